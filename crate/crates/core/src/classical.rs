//! Classical value by enumeration or alternating best response, the local
//! weight linear program, and the signed decomposition of marginal families.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BellError, Result};
use crate::lp;
use crate::model::{deterministic_box, pair, BellFunctional, ProbBox};
use crate::rng;

pub const DEFAULT_ENUMERATION_BUDGET: u64 = 10_000_000;
/// Number of deterministic boxes (`K^N · K^N`) the local-weight LP accepts by default.
pub const DEFAULT_LP_BUDGET: u64 = 729;

/// A deterministic strategy pair: one output per input for each party.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DeterministicStrategy {
    pub alice: Vec<usize>,
    pub bob: Vec<usize>,
}

impl DeterministicStrategy {
    pub fn to_box(&self, outputs: usize) -> Result<ProbBox> {
        deterministic_box(&self.alice, &self.bob, outputs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalValue {
    /// `|⟨M, D⟩|` for the witness box `D`.
    pub value: f64,
    pub witness: DeterministicStrategy,
    /// `+1` if the witness maximizes `⟨M,·⟩`, `-1` if it maximizes `-⟨M,·⟩`.
    pub sign: i8,
}

/// Per-input best response of Alice against a fixed Bob map, for `sign·M`.
/// Returns the answers and the (grouped) objective. Ties go to the lowest output.
fn alice_best_response(m: &BellFunctional, bob: &[usize], sign: f64, alice: &mut [usize]) -> f64 {
    let (n, k) = (m.inputs(), m.outputs());
    let mut total = 0.0;
    for (x, slot) in alice.iter_mut().enumerate().take(n) {
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for a in 0..k {
            let s: f64 = (0..n).map(|y| m.get(x, y, a, bob[y])).sum::<f64>() * sign;
            if s > best {
                best = s;
                arg = a;
            }
        }
        *slot = arg;
        total += best;
    }
    total
}

fn bob_best_response(m: &BellFunctional, alice: &[usize], sign: f64, bob: &mut [usize]) -> f64 {
    let (n, k) = (m.inputs(), m.outputs());
    let mut total = 0.0;
    for (y, slot) in bob.iter_mut().enumerate().take(n) {
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for b in 0..k {
            let s: f64 = (0..n).map(|x| m.get(x, y, alice[x], b)).sum::<f64>() * sign;
            if s > best {
                best = s;
                arg = b;
            }
        }
        *slot = arg;
        total += best;
    }
    total
}

fn decode_map(mut index: u64, n: usize, k: usize, out: &mut [usize]) {
    // Input 0 is the most significant digit, so index order is lexicographic.
    for slot in out.iter_mut().take(n).rev() {
        *slot = (index % k as u64) as usize;
        index /= k as u64;
    }
}

fn finalize(m: &BellFunctional, witness: DeterministicStrategy, sign: f64) -> Result<ClassicalValue> {
    let p = pair(m, &witness.to_box(m.outputs())?)?;
    Ok(ClassicalValue { value: sign * p, witness, sign: if sign > 0.0 { 1 } else { -1 } })
}

/// `ω(M) = max |⟨M, D⟩|` over deterministic boxes, by enumerating Bob's maps
/// and taking Alice's best response for `±M`.
pub fn classical_value_exact(m: &BellFunctional) -> Result<ClassicalValue> {
    classical_value_exact_with_budget(m, DEFAULT_ENUMERATION_BUDGET)
}

pub fn classical_value_exact_with_budget(m: &BellFunctional, budget: u64) -> Result<ClassicalValue> {
    let (n, k) = (m.inputs(), m.outputs());
    let count = (k as u64).checked_pow(n as u32).filter(|&c| c <= budget).ok_or_else(|| {
        BellError::BudgetExceeded(format!(
            "K^N = {k}^{n} exceeds enumeration budget {budget}; use the heuristic"
        ))
    })?;

    const CHUNK: u64 = 4096;
    let chunks = count.div_ceil(CHUNK);
    // Each chunk reports its first best (value, index, sign); merging keeps the earliest on ties.
    let best = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut bob = vec![0; n];
            let mut alice = vec![0; n];
            let mut best: Option<(f64, u64, f64)> = None;
            for idx in c * CHUNK..((c + 1) * CHUNK).min(count) {
                decode_map(idx, n, k, &mut bob);
                for sign in [1.0, -1.0] {
                    let v = alice_best_response(m, &bob, sign, &mut alice);
                    if best.is_none_or(|(bv, _, _)| v > bv) {
                        best = Some((v, idx, sign));
                    }
                }
            }
            best
        })
        .reduce(
            || None,
            |l, r| match (l, r) {
                (None, x) | (x, None) => x,
                (Some(a), Some(b)) => {
                    if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                        Some(b)
                    } else {
                        Some(a)
                    }
                }
            },
        )
        .expect("at least one Bob map");

    let (_, idx, sign) = best;
    let mut bob = vec![0; n];
    decode_map(idx, n, k, &mut bob);
    let mut alice = vec![0; n];
    alice_best_response(m, &bob, sign, &mut alice);
    finalize(m, DeterministicStrategy { alice, bob }, sign)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicValue {
    pub best: ClassicalValue,
    /// Objective after each half-sweep of the best restart.
    pub trace: Vec<f64>,
}

/// Alternating best response from random deterministic starts. The result
/// is a certified lower bound on `ω(M)`.
pub fn classical_value_heuristic(m: &BellFunctional, restarts: usize, seed: u64) -> Result<HeuristicValue> {
    let (n, k) = (m.inputs(), m.outputs());
    let restarts = restarts.max(1);
    let runs: Vec<(f64, f64, DeterministicStrategy, Vec<f64>)> = (0..restarts)
        .into_par_iter()
        .flat_map_iter(|r| {
            let mut rng = rng::rng(rng::substream(seed, r as u64));
            let start: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            [1.0, -1.0].into_iter().map(move |sign| {
                let mut bob = start.clone();
                let mut alice = vec![0; n];
                let mut trace = Vec::new();
                let mut current = f64::NEG_INFINITY;
                loop {
                    let va = alice_best_response(m, &bob, sign, &mut alice);
                    trace.push(va);
                    let mut next_bob = bob.clone();
                    let vb = bob_best_response(m, &alice, sign, &mut next_bob);
                    trace.push(vb);
                    if vb <= current + 1e-15 {
                        break;
                    }
                    current = vb;
                    bob = next_bob;
                }
                // `bob` is the last improving map and `alice` its best response.
                alice_best_response(m, &bob, sign, &mut alice);
                let v = (0..n)
                    .flat_map(|x| (0..n).map(move |y| (x, y)))
                    .map(|(x, y)| m.get(x, y, alice[x], bob[y]))
                    .sum::<f64>()
                    * sign;
                (v, sign, DeterministicStrategy { alice: alice.clone(), bob: bob.clone() }, trace)
            })
        })
        .collect();

    let best = runs
        .iter()
        .enumerate()
        .fold(None::<usize>, |acc, (i, run)| match acc {
            Some(j) if runs[j].0 >= run.0 => Some(j),
            _ => Some(i),
        })
        .expect("at least one run");
    let (_, sign, witness, trace) = runs[best].clone();
    Ok(HeuristicValue { best: finalize(m, witness, sign)?, trace })
}

/// Every deterministic box of the scenario, in `(alice map, bob map)` lexicographic order.
pub fn deterministic_boxes(inputs: usize, outputs: usize) -> Vec<DeterministicStrategy> {
    let per_party = (outputs as u64).pow(inputs as u32);
    let mut out = Vec::with_capacity((per_party * per_party) as usize);
    for ia in 0..per_party {
        for ib in 0..per_party {
            let mut alice = vec![0; inputs];
            let mut bob = vec![0; inputs];
            decode_map(ia, inputs, outputs, &mut alice);
            decode_map(ib, inputs, outputs, &mut bob);
            out.push(DeterministicStrategy { alice, bob });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalWeight {
    /// Largest `λ` with `λP + (1-λ)P' ∈ L` for some local `P'`.
    pub lambda: f64,
    /// `‖Σ w_i D_i - Σ u_i D_i - λP‖_∞` for the LP solution.
    pub residual: f64,
    pub pivots: usize,
}

/// Solves `max λ  s.t.  Σ w_i D_i - Σ u_i D_i = λP,  Σ w = 1,  Σ u = 1 - λ,  w, u ≥ 0`
/// over all deterministic boxes `D_i` of the scenario.
pub fn local_weight(p: &ProbBox) -> Result<LocalWeight> {
    local_weight_with_budget(p, DEFAULT_LP_BUDGET)
}

pub fn local_weight_with_budget(p: &ProbBox, budget: u64) -> Result<LocalWeight> {
    let (n, k) = (p.inputs(), p.outputs());
    let count = (k as u64)
        .checked_pow(2 * n as u32)
        .filter(|&c| c <= budget)
        .ok_or_else(|| BellError::BudgetExceeded(format!("{k}^{} deterministic boxes exceed LP budget {budget}", 2 * n)))?;
    let boxes = deterministic_boxes(n, k);
    debug_assert_eq!(boxes.len() as u64, count);
    let d = boxes.len();
    let entries = n * n * k * k;
    let vars = 2 * d + 1;
    let lambda_col = 2 * d;

    let mut a = vec![vec![0.0; vars]; entries + 2];
    for (i, s) in boxes.iter().enumerate() {
        for x in 0..n {
            for y in 0..n {
                let row = ((x * n + y) * k + s.alice[x]) * k + s.bob[y];
                a[row][i] += 1.0;
                a[row][d + i] -= 1.0;
            }
        }
        a[entries][i] = 1.0;
        a[entries + 1][d + i] = 1.0;
    }
    for (row, &prob) in a.iter_mut().zip(p.probs()) {
        row[lambda_col] = -prob;
    }
    a[entries + 1][lambda_col] = 1.0;
    let mut b = vec![0.0; entries + 2];
    b[entries] = 1.0;
    b[entries + 1] = 1.0;
    let mut c = vec![0.0; vars];
    c[lambda_col] = 1.0;

    let sol = lp::maximize_checked(&a, &b, &c)?;
    let lambda = sol.x[lambda_col];
    let residual = a[..entries]
        .iter()
        .map(|row| row.iter().zip(&sol.x).map(|(r, x)| r * x).sum::<f64>().abs())
        .fold(0.0, f64::max);
    Ok(LocalWeight { lambda: lambda.clamp(0.0, 1.0), residual, pivots: sol.pivots })
}

/// Real family `R(x|a)` whose rows share a common sum `C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalFamily {
    inputs: usize,
    outputs: usize,
    values: Vec<f64>,
}

impl MarginalFamily {
    pub fn new(inputs: usize, outputs: usize, values: Vec<f64>) -> Result<Self> {
        if inputs == 0 || outputs == 0 || values.len() != inputs * outputs {
            return Err(BellError::Precondition(format!(
                "marginal family needs {} values",
                inputs * outputs
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(BellError::Precondition("non-finite entry".into()));
        }
        Ok(Self { inputs, outputs, values })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.values[x * self.outputs..(x + 1) * self.outputs]
    }

    pub fn get(&self, x: usize, a: usize) -> f64 {
        self.values[x * self.outputs + a]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.inputs).map(|x| self.row(x).iter().sum()).collect()
    }

    /// `Λ = max_x Σ_a |R(x|a)|`.
    pub fn lambda_norm(&self) -> f64 {
        (0..self.inputs)
            .map(|x| self.row(x).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Entries nonnegative and every row summing to one.
    pub fn is_stochastic(&self, tol: f64) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
            && self.row_sums().iter().all(|s| (s - 1.0).abs() <= tol)
    }

    /// Random family with entries in `[-1, 1]` and a shared random row sum
    /// (the last output takes up the difference).
    pub fn random_admissible<R: rand::Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let c: f64 = rng.random_range(-1.0..1.0);
        let mut values = Vec::with_capacity(inputs * outputs);
        for _ in 0..inputs {
            let row: Vec<f64> = (0..outputs - 1).map(|_| rng.random_range(-1.0..1.0)).collect();
            let partial: f64 = row.iter().sum();
            values.extend(row);
            values.push(c - partial);
        }
        Self { inputs, outputs, values }
    }

    fn negated(&self) -> Self {
        Self { values: self.values.iter().map(|v| -v).collect(), ..self.clone() }
    }
}

/// `R = λ·P1 + μ·P2` with `P1, P2` row-stochastic and `|λ| + |μ| = Λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub lambda: f64,
    pub mu: f64,
    pub p1: MarginalFamily,
    pub p2: MarginalFamily,
}

impl Decomposition {
    pub fn reconstruction_residual(&self, r: &MarginalFamily) -> f64 {
        (0..r.inputs)
            .flat_map(|x| (0..r.outputs).map(move |a| (x, a)))
            .map(|(x, a)| (self.lambda * self.p1.get(x, a) + self.mu * self.p2.get(x, a) - r.get(x, a)).abs())
            .fold(0.0, f64::max)
    }
}

const ROW_SUM_TOL: f64 = 1e-10;

/// Constructive decomposition of a family with common row sums into two
/// row-stochastic families; the last output absorbs the slack.
pub fn decompose_marginal(r: &MarginalFamily) -> Result<Decomposition> {
    let sums = r.row_sums();
    let c = sums[0];
    if let Some(bad) = sums.iter().find(|s| (*s - c).abs() > ROW_SUM_TOL) {
        return Err(BellError::Precondition(format!(
            "row sums differ: {c} vs {bad}"
        )));
    }
    if c < 0.0 {
        let d = decompose_nonnegative_sum(&r.negated());
        return Ok(Decomposition { lambda: -d.lambda, mu: -d.mu, ..d });
    }
    Ok(decompose_nonnegative_sum(r))
}

fn decompose_nonnegative_sum(r: &MarginalFamily) -> Decomposition {
    let (n, k) = (r.inputs, r.outputs);
    let pos_sum = |x: usize| r.row(x).iter().filter(|&&v| v > 0.0).sum::<f64>();
    let neg_sum = |x: usize| r.row(x).iter().filter(|&&v| v <= 0.0).sum::<f64>();
    let big_m = (0..n).map(pos_sum).fold(f64::NEG_INFINITY, f64::max);
    let small_m = (0..n).map(neg_sum).fold(f64::INFINITY, f64::min);

    let last_only = || {
        let mut v = vec![0.0; n * k];
        for x in 0..n {
            v[x * k + k - 1] = 1.0;
        }
        MarginalFamily { inputs: n, outputs: k, values: v }
    };

    if small_m == 0.0 {
        // All entries nonnegative; the common sum is M.
        if big_m == 0.0 {
            return Decomposition { lambda: 0.0, mu: 0.0, p1: last_only(), p2: last_only() };
        }
        let p1 = build_stochastic(r, big_m, |v| v >= 0.0);
        return Decomposition { lambda: big_m, mu: 0.0, p1, p2: last_only() };
    }

    let p1 = build_stochastic(r, big_m, |v| v > 0.0);
    let p2 = build_stochastic(r, small_m, |v| v <= 0.0);
    Decomposition { lambda: big_m, mu: small_m, p1, p2 }
}

/// `P(a|x) = R(x|a)/scale` on the selected entries among the first `K-1`
/// outputs, zero on the rest, and `1 - Σ` in the last output.
fn build_stochastic(r: &MarginalFamily, scale: f64, select: impl Fn(f64) -> bool) -> MarginalFamily {
    let (n, k) = (r.inputs, r.outputs);
    let mut values = vec![0.0; n * k];
    for x in 0..n {
        let mut partial = 0.0;
        for a in 0..k - 1 {
            let v = r.get(x, a);
            let p = if scale != 0.0 && select(v) { v / scale } else { 0.0 };
            values[x * k + a] = p;
            partial += p;
        }
        values[x * k + k - 1] = (1.0 - partial).max(0.0);
    }
    MarginalFamily { inputs: n, outputs: k, values }
}
