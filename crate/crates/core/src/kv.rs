//! The Khot-Vishnoi game over `{0,1}^n / H` with `H` the Hadamard code.
//!
//! Bitstrings of length `n` are stored as integers with position `i` in bit
//! `n-1-i`, so numeric order is lexicographic order of the strings. Position
//! `i` is identified with `t ∈ {0,1}^l` read as an `l`-bit integer, and the
//! codeword for `s` is `h_s(t) = ⟨s,t⟩ mod 2`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{BellError, Result};
use crate::linalg::{self, CMatrix};
use crate::model::{self, BellFunctional, Povm, PureState, QuantumStrategy};

pub const MAX_L: u32 = 4;
/// Largest `n` for which a dense functional is materialized.
pub const MAX_MATERIALIZED_N: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct KvGame {
    l: u32,
    n: usize,
    eta: f64,
    hadamard: Vec<u32>,
    cosets: Vec<Vec<u32>>,
    coset_of: Vec<u32>,
    index_in_coset: Vec<u32>,
}

fn check_eta(eta: f64) -> Result<()> {
    if !(0.0..=0.5).contains(&eta) {
        return Err(BellError::OutOfRange(format!("η = {eta} outside [0, 1/2]")));
    }
    Ok(())
}

/// Hadamard codewords `h_s`, `s ∈ {0,1}^l`, sorted.
pub fn hadamard_code(l: u32) -> Vec<u32> {
    let n = 1usize << l;
    let mut words: Vec<u32> = (0..n as u32)
        .map(|s| {
            (0..n as u32).fold(0u32, |acc, t| {
                let bit = (s & t).count_ones() & 1;
                acc | (bit << (n as u32 - 1 - t))
            })
        })
        .collect();
    words.sort_unstable();
    words
}

impl KvGame {
    pub fn build(l: u32, eta: f64) -> Result<Self> {
        check_eta(eta)?;
        if !(1..=MAX_L).contains(&l) {
            return Err(BellError::OutOfRange(format!("l = {l} outside 1..={MAX_L}")));
        }
        let n = 1usize << l;
        let hadamard = hadamard_code(l);
        let total = 1usize << n;
        let mut coset_of = vec![u32::MAX; total];
        let mut index_in_coset = vec![0u32; total];
        let mut cosets = Vec::with_capacity(total / n);
        // Ascending scan, so each coset is opened at its smallest representative.
        for v in 0..total as u32 {
            if coset_of[v as usize] != u32::MAX {
                continue;
            }
            let mut members: Vec<u32> = hadamard.iter().map(|h| v ^ h).collect();
            members.sort_unstable();
            let id = cosets.len() as u32;
            for (i, &w) in members.iter().enumerate() {
                coset_of[w as usize] = id;
                index_in_coset[w as usize] = i as u32;
            }
            cosets.push(members);
        }
        Ok(Self { l, n, eta, hadamard, cosets, coset_of, index_in_coset })
    }

    pub fn l(&self) -> u32 {
        self.l
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn hadamard(&self) -> &[u32] {
        &self.hadamard
    }

    pub fn cosets(&self) -> &[Vec<u32>] {
        &self.cosets
    }

    pub fn num_cosets(&self) -> usize {
        self.cosets.len()
    }

    /// Coset index and answer index of a bitstring.
    pub fn locate(&self, word: u32) -> (usize, usize) {
        (self.coset_of[word as usize] as usize, self.index_in_coset[word as usize] as usize)
    }

    /// Bit `i` of a word (position `i` counted from the left).
    pub fn bit(&self, word: u32, i: usize) -> u32 {
        (word >> (self.n - 1 - i)) & 1
    }

    pub fn format_word(&self, word: u32) -> String {
        (0..self.n).map(|i| if self.bit(word, i) == 1 { '1' } else { '0' }).collect()
    }

    /// Probability of the noise string `z`: `η^{|z|}(1-η)^{n-|z|}`.
    pub fn noise_probability(&self, z: u32) -> f64 {
        let w = z.count_ones() as i32;
        self.eta.powi(w) * (1.0 - self.eta).powi(self.n as i32 - w)
    }

    /// `(n/2^n)·η^{|z|}(1-η)^{n-|z|}` with `z = α ⊕ β`, `α` the `a`-th word of
    /// coset `x` and `β` the `b`-th word of coset `y`.
    pub fn coefficient(&self, x: usize, y: usize, a: usize, b: usize) -> Result<f64> {
        let nc = self.cosets.len();
        if x >= nc || y >= nc || a >= self.n || b >= self.n {
            return Err(BellError::OutOfRange(format!(
                "(x={x}, y={y}, a={a}, b={b}) outside {nc} cosets × {} answers",
                self.n
            )));
        }
        let z = self.cosets[x][a] ^ self.cosets[y][b];
        Ok(self.question_weight() * self.noise_probability(z))
    }

    /// `n / 2^n`, the probability of each coset.
    pub fn question_weight(&self) -> f64 {
        self.n as f64 / (1u64 << self.n) as f64
    }

    /// Dense functional with `N = 2^n/n` inputs and `K = n` outputs, plus one
    /// extra never-winning output per party when `padded`.
    pub fn functional(&self, padded: bool) -> Result<BellFunctional> {
        if self.n > MAX_MATERIALIZED_N {
            return Err(BellError::BudgetExceeded(format!(
                "n = {} too large to materialize (max {MAX_MATERIALIZED_N})",
                self.n
            )));
        }
        let k = self.n + usize::from(padded);
        let n = self.n;
        BellFunctional::from_fn(self.num_cosets(), k, |x, y, a, b| {
            if a < n && b < n {
                self.coefficient(x, y, a, b).expect("indices in range")
            } else {
                0.0
            }
        })
    }

    /// Broken variant that uses the answer index itself, read as an `n`-bit
    /// string, in place of the bitstring it labels. Kept as a negative control
    /// for answer-indexing checks.
    pub fn functional_with_index_answers(&self) -> Result<BellFunctional> {
        if self.n > MAX_MATERIALIZED_N {
            return Err(BellError::BudgetExceeded(format!(
                "n = {} too large to materialize (max {MAX_MATERIALIZED_N})",
                self.n
            )));
        }
        let w = self.question_weight();
        BellFunctional::from_fn(self.num_cosets(), self.n, |_, _, a, b| {
            w * self.noise_probability((a ^ b) as u32)
        })
    }

    /// Measurement vector `u_a(i) = (-1)^{a(i)}/√n` for `i < n`, zero up to `dim`.
    pub fn measurement_vector(&self, word: u32, dim: usize) -> Vec<f64> {
        let scale = 1.0 / (self.n as f64).sqrt();
        (0..dim)
            .map(|i| if i < self.n { if self.bit(word, i) == 1 { -scale } else { scale } } else { 0.0 })
            .collect()
    }

    /// Per-coset rank-one projectors `|u_a⟩⟨u_a|`, with `I - Σ` appended when
    /// `dim > n`.
    pub fn coset_povm(&self, x: usize, dim: usize) -> Result<Povm> {
        if dim < self.n {
            return Err(BellError::Precondition(format!(
                "state dimension {dim} smaller than n = {}",
                self.n
            )));
        }
        let mut elements: Vec<CMatrix> = self.cosets[x]
            .iter()
            .map(|&w| {
                let u = self.measurement_vector(w, dim);
                CMatrix::from_fn(dim, dim, |i, j| Complex64::new(u[i] * u[j], 0.0))
            })
            .collect();
        if dim > self.n {
            let sum = elements.iter().fold(CMatrix::zeros(dim, dim), |acc, e| acc + e);
            elements.push(linalg::identity(dim) - sum);
        }
        Povm::new(elements)
    }

    /// Both parties measure the coset projectors on `state`.
    pub fn quantum_strategy(&self, state: PureState) -> Result<QuantumStrategy> {
        let dim = state.dim();
        let povms: Vec<Povm> = (0..self.num_cosets()).map(|x| self.coset_povm(x, dim)).collect::<Result<_>>()?;
        QuantumStrategy::new(state, povms.clone(), povms)
    }

    /// `⟨G_KV, P⟩ = E_z (n/2^n) Σ_[x] Σ_{a∈[x]} P(a, a⊕z | [x], [x⊕z])` by
    /// full enumeration of the noise strings, for the quantum box of `s`.
    pub fn value_direct(&self, s: &QuantumStrategy) -> Result<f64> {
        if s.inputs() != self.num_cosets() || s.outputs() < self.n {
            return Err(BellError::ScenarioMismatch {
                expected_n: self.num_cosets(),
                expected_k: self.n,
                got_n: s.inputs(),
                got_k: s.outputs(),
            });
        }
        let alpha = s.state().schmidt();
        let weighted: Vec<Vec<CMatrix>> = s
            .alice()
            .iter()
            .map(|p| p.elements()[..self.n].iter().map(|e| model::weight_by_state(e, alpha)).collect())
            .collect();
        let bob = s.bob();
        let total = 1u32 << self.n;
        let weight = self.question_weight();

        let per_coset: Vec<f64> = (0..self.num_cosets())
            .into_par_iter()
            .map(|x| {
                let mut acc = 0.0;
                for z in 0..total {
                    let pz = self.noise_probability(z);
                    if pz == 0.0 {
                        continue;
                    }
                    let mut inner = 0.0;
                    for (a, &alpha_word) in self.cosets[x].iter().enumerate() {
                        let (y, b) = self.locate(alpha_word ^ z);
                        inner += model::entrywise_sum(&weighted[x][a], &bob[y].elements()[b]).re;
                    }
                    acc += pz * inner;
                }
                acc
            })
            .collect();
        Ok(weight * per_coset.iter().sum::<f64>())
    }
}

/// `(1/m)(Σ_{i≤m} α_i²)(1-(1-2η)²) + (1/m)(Σ_{i≤m} α_i)²(1-2η)²`.
pub fn value_closed_form(alpha: &[f64], m: usize, eta: f64) -> Result<f64> {
    check_eta(eta)?;
    if m == 0 {
        return Err(BellError::OutOfRange("m must be positive".into()));
    }
    let head = &alpha[..m.min(alpha.len())];
    let sq: f64 = head.iter().map(|a| a * a).sum();
    let l1: f64 = head.iter().sum();
    let c = (1.0 - 2.0 * eta).powi(2);
    let mf = m as f64;
    Ok(sq * (1.0 - c) / mf + l1 * l1 * c / mf)
}

/// `n^{-η/(1-η)}`, valid for `η ∈ [0, 1/2)`.
pub fn classical_upper_bound(n: usize, eta: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&eta) {
        return Err(BellError::OutOfRange(format!("η = {eta} outside [0, 1/2)")));
    }
    Ok((n as f64).powf(-eta / (1.0 - eta)))
}

/// `1/2 - 1/ln m`, which lies in `[0, 1/2]` once `m ≥ 8`.
pub fn default_eta(m: usize) -> Result<f64> {
    if m < 8 {
        return Err(BellError::OutOfRange(format!("default η needs m ≥ 8, got {m}")));
    }
    Ok(0.5 - 1.0 / (m as f64).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{pair, quantum_box};

    fn words(g: &KvGame, ws: &[u32]) -> Vec<String> {
        ws.iter().map(|&w| g.format_word(w)).collect()
    }

    #[test]
    fn hadamard_subgroups() {
        let g = KvGame::build(2, 0.25).unwrap();
        let mut h = words(&g, g.hadamard());
        h.sort();
        let mut want = vec!["0000", "0101", "0011", "0110"];
        want.sort();
        assert_eq!(h, want);
        assert_eq!(g.num_cosets(), 4);
        assert!(g.cosets().iter().all(|c| c.len() == 4));

        let g1 = KvGame::build(1, 0.0).unwrap();
        assert_eq!(words(&g1, g1.hadamard()), vec!["00", "01"]);
        assert_eq!(g1.num_cosets(), 2);
    }

    #[test]
    fn hadamard_code_is_xor_closed() {
        for l in 1..=4 {
            let h = hadamard_code(l);
            assert_eq!(h.len(), 1 << l);
            for &a in &h {
                for &b in &h {
                    assert!(h.binary_search(&(a ^ b)).is_ok());
                }
            }
        }
    }

    #[test]
    fn cosets_partition_the_cube() {
        for l in 1..=4 {
            let g = KvGame::build(l, 0.1).unwrap();
            let n = g.n();
            let mut count = vec![0u8; 1 << n];
            for c in g.cosets() {
                assert_eq!(c.len(), n);
                assert!(c.windows(2).all(|w| w[0] < w[1]));
                for &w in c {
                    count[w as usize] += 1;
                }
            }
            assert!(count.iter().all(|&c| c == 1));
            assert_eq!(g.num_cosets(), (1 << n) / n);
            assert!(g.cosets().windows(2).all(|w| w[0][0] < w[1][0]));
        }
    }

    #[test]
    fn eta_and_l_range() {
        assert!(KvGame::build(2, 0.6).is_err());
        assert!(KvGame::build(2, -0.1).is_err());
        assert!(KvGame::build(5, 0.1).is_err());
        assert!(KvGame::build(0, 0.1).is_err());
    }

    #[test]
    fn coefficient_values() {
        let g = KvGame::build(2, 0.25).unwrap();
        assert_eq!(g.coefficient(1, 1, 2, 2).unwrap(), 0.25 * 0.75f64.powi(4));
        assert!((g.coefficient(0, 0, 0, 0).unwrap() - 0.0791015625).abs() < 1e-15);
        let g0 = KvGame::build(2, 0.0).unwrap();
        assert_eq!(g0.coefficient(0, 1, 0, 0).unwrap(), 0.0);
        assert_eq!(g0.coefficient(0, 0, 1, 2).unwrap(), 0.0);
        assert!(g.coefficient(4, 0, 0, 0).is_err());
    }

    #[test]
    fn coefficient_mass() {
        // For each Alice answer map, Bob's answers carry total probability one;
        // the full tensor therefore sums to n.
        let g = KvGame::build(2, 0.25).unwrap();
        let m = g.functional(false).unwrap();
        let total: f64 = m.coeffs().iter().sum();
        assert!((total - 4.0).abs() < 1e-12, "{total}");
        for a in 0..4 {
            let s: f64 = (0..4)
                .flat_map(|x| (0..4).flat_map(move |y| (0..4).map(move |b| (x, y, b))))
                .map(|(x, y, b)| m.get(x, y, a, b))
                .sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn coefficient_matches_noise_expectation() {
        // Accumulate E_z over (x, a) ↦ (y, b) = locate(α ⊕ z) and compare entrywise.
        let g = KvGame::build(2, 0.25).unwrap();
        let nc = g.num_cosets();
        let mut acc = vec![0.0; nc * nc * 16];
        for z in 0..16u32 {
            for x in 0..nc {
                for (a, &w) in g.cosets()[x].iter().enumerate() {
                    let (y, b) = g.locate(w ^ z);
                    acc[((x * nc + y) * 4 + a) * 4 + b] += g.question_weight() * g.noise_probability(z);
                }
            }
        }
        let m = g.functional(false).unwrap();
        for (c, e) in m.coeffs().iter().zip(&acc) {
            assert!((c - e).abs() < 1e-15);
        }
    }

    #[test]
    fn noiseless_game_is_a_two_prover_game() {
        let g = KvGame::build(2, 0.0).unwrap();
        let nc = g.num_cosets();
        let mut pi = vec![0.0; nc * nc];
        for x in 0..nc {
            pi[x * nc + x] = 1.0 / nc as f64;
        }
        let via_game = BellFunctional::from_game(nc, 4, &pi, |x, y, a, b| x == y && a == b).unwrap();
        let kv = g.functional(false).unwrap();
        assert_eq!(via_game.coeffs(), kv.coeffs());
    }

    #[test]
    fn vnm_structure() {
        for l in 1..=4 {
            let g = KvGame::build(l, 0.1).unwrap();
            let n = g.n();
            for c in g.cosets() {
                let vs: Vec<Vec<f64>> = c.iter().map(|&w| g.measurement_vector(w, n)).collect();
                for i in 0..n {
                    for j in 0..n {
                        let gram = linalg::dot(&vs[i], &vs[j]);
                        let want = if i == j { 1.0 } else { 0.0 };
                        assert!((gram - want).abs() <= 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn padded_povm_completion() {
        let g = KvGame::build(2, 0.25).unwrap();
        let p = g.coset_povm(0, 5).unwrap();
        assert_eq!(p.outputs(), 5);
        let (neg, complete) = p.residuals();
        assert!(neg <= 1e-12 && complete <= 1e-12);
        assert!(g.coset_povm(0, 3).is_err());
    }

    #[test]
    fn closed_form_values() {
        let me = PureState::maximally_entangled(4);
        assert!((value_closed_form(me.schmidt(), 4, 0.25).unwrap() - 0.4375).abs() < 1e-15);
        assert!((value_closed_form(me.schmidt(), 4, 0.5).unwrap() - 0.25).abs() < 1e-15);
        let e1 = PureState::product(4);
        for eta in [0.0, 0.1, 0.3] {
            assert!((value_closed_form(e1.schmidt(), 4, eta).unwrap() - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn direct_value_matches_closed_form_and_pairing() {
        let g = KvGame::build(2, 0.25).unwrap();
        let s = g.quantum_strategy(PureState::maximally_entangled(4)).unwrap();
        let direct = g.value_direct(&s).unwrap();
        assert!((direct - 0.4375).abs() < 1e-10);
        let paired = pair(&g.functional(false).unwrap(), &quantum_box(&s).unwrap()).unwrap();
        assert!((paired - direct).abs() < 1e-12);
    }

    #[test]
    fn direct_value_padded_dimension() {
        let g = KvGame::build(2, 0.1).unwrap();
        let state = PureState::normalized(vec![0.6, 0.5, 0.4, 0.3, 0.2]).unwrap();
        let s = g.quantum_strategy(state.clone()).unwrap();
        let direct = g.value_direct(&s).unwrap();
        let closed = value_closed_form(state.schmidt(), 4, 0.1).unwrap();
        assert!((direct - closed).abs() < 1e-10);
        let paired = pair(&g.functional(true).unwrap(), &quantum_box(&s).unwrap()).unwrap();
        assert!((paired - direct).abs() < 1e-12);
    }

    #[test]
    fn noiseless_direct_value_only_counts_z_zero() {
        let g = KvGame::build(2, 0.0).unwrap();
        let s = g.quantum_strategy(PureState::maximally_entangled(4)).unwrap();
        // z = 0 only: (n/2^n) Σ_x Σ_a P(a,a|x,x) = 1 for the maximally entangled vNm strategy.
        assert!((g.value_direct(&s).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn classical_bound_values() {
        assert_eq!(classical_upper_bound(4, 0.0).unwrap(), 1.0);
        assert!((classical_upper_bound(4, 1.0 / 3.0).unwrap() - 0.5).abs() < 1e-15);
        let eta = default_eta(8).unwrap();
        assert!((classical_upper_bound(8, eta).unwrap() - 0.9604).abs() < 1e-4);
        assert!(classical_upper_bound(8, 0.5).is_err());
    }

    #[test]
    fn default_eta_range() {
        assert!((default_eta(8).unwrap() - 0.0191).abs() < 1e-4);
        assert!(default_eta(8).unwrap() > 0.0);
        assert!(default_eta(4).is_err());
        assert!(default_eta(7).is_err());
    }

    #[test]
    fn violation_ratio_exceeds_sharp_shape() {
        let c = crate::norms::SHARP_C.value.unwrap();
        let mut r = crate::rng::rng(12);
        for (n, eta) in [(4, 0.25), (8, default_eta(8).unwrap())] {
            for state in [PureState::maximally_entangled(n), PureState::product(n), PureState::random(n, &mut r)] {
                let ratio = value_closed_form(state.schmidt(), n, eta).unwrap() / classical_upper_bound(n, eta).unwrap();
                let l1: f64 = state.schmidt().iter().sum();
                let shape = c * (1.0 + 4.0 * (l1 * l1 - 1.0) / (n as f64).ln().powi(2));
                assert!(ratio >= shape, "n={n}: {ratio} < {shape}");
            }
        }
    }
}
