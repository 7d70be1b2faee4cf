//! Bell functionals, probability boxes, pure states and measurements.
//!
//! Tensors are stored flat in `(x, y, a, b)` row-major order with 0-based
//! indices: `x, y` are inputs in `0..N`, `a, b` outputs in `0..K`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{BellError, Result};
use crate::linalg::{self, CMatrix};
use crate::tol::Tolerances;

#[inline]
fn flat(inputs: usize, outputs: usize, x: usize, y: usize, a: usize, b: usize) -> usize {
    ((x * inputs + y) * outputs + a) * outputs + b
}

/// Real coefficient tensor `M[x][y][a][b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BellFunctional {
    inputs: usize,
    outputs: usize,
    coeffs: Vec<f64>,
    is_game: bool,
}

impl BellFunctional {
    pub fn new(inputs: usize, outputs: usize, coeffs: Vec<f64>) -> Result<Self> {
        let expected = inputs * inputs * outputs * outputs;
        if inputs == 0 || outputs == 0 {
            return Err(BellError::InvalidFunctional("N and K must be positive".into()));
        }
        if coeffs.len() != expected {
            return Err(BellError::InvalidFunctional(format!(
                "expected {expected} coefficients, got {}",
                coeffs.len()
            )));
        }
        if let Some(bad) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(BellError::InvalidFunctional(format!("coefficient {bad} is not finite")));
        }
        Ok(Self { inputs, outputs, coeffs, is_game: false })
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            coeffs: vec![0.0; inputs * inputs * outputs * outputs],
            is_game: false,
        }
    }

    pub fn from_fn(
        inputs: usize,
        outputs: usize,
        mut f: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut coeffs = Vec::with_capacity(inputs * inputs * outputs * outputs);
        for x in 0..inputs {
            for y in 0..inputs {
                for a in 0..outputs {
                    for b in 0..outputs {
                        coeffs.push(f(x, y, a, b));
                    }
                }
            }
        }
        Self::new(inputs, outputs, coeffs)
    }

    /// Two-prover one-round game `π(x,y)·V(a,b|x,y)`.
    ///
    /// `pi` is row-major `N×N`; it must be nonnegative and sum to one.
    pub fn from_game(
        inputs: usize,
        outputs: usize,
        pi: &[f64],
        predicate: impl Fn(usize, usize, usize, usize) -> bool,
    ) -> Result<Self> {
        Self::from_game_with(inputs, outputs, pi, predicate, &Tolerances::default())
    }

    pub fn from_game_with(
        inputs: usize,
        outputs: usize,
        pi: &[f64],
        predicate: impl Fn(usize, usize, usize, usize) -> bool,
        tol: &Tolerances,
    ) -> Result<Self> {
        if pi.len() != inputs * inputs {
            return Err(BellError::InvalidGame(format!(
                "question distribution has {} entries, expected {}",
                pi.len(),
                inputs * inputs
            )));
        }
        if let Some(bad) = pi.iter().position(|&p| !(p >= 0.0 && p.is_finite())) {
            return Err(BellError::InvalidGame(format!("π entry {bad} is negative or not finite")));
        }
        let total: f64 = pi.iter().sum();
        if (total - 1.0).abs() > tol.game_normalization {
            return Err(BellError::InvalidGame(format!("π sums to {total}, not 1")));
        }
        let mut m = Self::from_fn(inputs, outputs, |x, y, a, b| {
            if predicate(x, y, a, b) {
                pi[x * inputs + y]
            } else {
                0.0
            }
        })?;
        m.is_game = true;
        Ok(m)
    }

    pub(crate) fn with_game_flag(mut self, is_game: bool) -> Self {
        self.is_game = is_game;
        self
    }

    /// The CHSH game: uniform questions, win iff `a ⊕ b = x·y`.
    pub fn chsh() -> Self {
        Self::from_game(2, 2, &[0.25; 4], |x, y, a, b| (a ^ b) == (x & y))
            .expect("CHSH is a valid game")
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn is_game(&self) -> bool {
        self.is_game
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, a: usize, b: usize) -> f64 {
        self.coeffs[flat(self.inputs, self.outputs, x, y, a, b)]
    }

    /// Slice of the `K×K` output block for inputs `(x, y)`, indexed `a*K + b`.
    pub fn block(&self, x: usize, y: usize) -> &[f64] {
        let kk = self.outputs * self.outputs;
        let start = (x * self.inputs + y) * kk;
        &self.coeffs[start..start + kk]
    }

    /// `-M`, used to handle the absolute value in ω and ω*.
    pub fn negated(&self) -> Self {
        Self {
            inputs: self.inputs,
            outputs: self.outputs,
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
            is_game: false,
        }
    }

    /// `s·self + t·other`.
    pub fn combine(&self, s: f64, other: &Self, t: f64) -> Result<Self> {
        check_scenario(self.inputs, self.outputs, other.inputs, other.outputs)?;
        Self::new(
            self.inputs,
            self.outputs,
            self.coeffs.iter().zip(&other.coeffs).map(|(p, q)| s * p + t * q).collect(),
        )
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |acc, c| acc.max(c.abs()))
    }
}

fn check_scenario(n: usize, k: usize, got_n: usize, got_k: usize) -> Result<()> {
    if n != got_n || k != got_k {
        return Err(BellError::ScenarioMismatch {
            expected_n: n,
            expected_k: k,
            got_n,
            got_k,
        });
    }
    Ok(())
}

/// Conditional distribution `P(a,b|x,y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbBox {
    inputs: usize,
    outputs: usize,
    probs: Vec<f64>,
}

impl ProbBox {
    /// Checks shape, finiteness, nonnegativity and per-question normalization.
    /// Non-signaling is not required here; see [`validate_box`].
    pub fn new(inputs: usize, outputs: usize, probs: Vec<f64>) -> Result<Self> {
        Self::new_with(inputs, outputs, probs, &Tolerances::default())
    }

    pub fn new_with(inputs: usize, outputs: usize, probs: Vec<f64>, tol: &Tolerances) -> Result<Self> {
        if inputs == 0 || outputs == 0 {
            return Err(BellError::InvalidBox("N and K must be positive".into()));
        }
        let expected = inputs * inputs * outputs * outputs;
        if probs.len() != expected {
            return Err(BellError::InvalidBox(format!(
                "expected {expected} probabilities, got {}",
                probs.len()
            )));
        }
        if probs.iter().any(|p| !p.is_finite()) {
            return Err(BellError::InvalidBox("non-finite probability".into()));
        }
        let b = Self { inputs, outputs, probs };
        let diag = validate_box_with(&b, tol);
        if !diag.nonnegative {
            return Err(BellError::InvalidBox(format!("negative entry {:e}", -diag.max_negativity)));
        }
        if !diag.normalized {
            return Err(BellError::InvalidBox(format!(
                "normalization residual {:e}",
                diag.max_normalization_residual
            )));
        }
        Ok(b)
    }

    pub fn from_fn(
        inputs: usize,
        outputs: usize,
        mut f: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut probs = Vec::with_capacity(inputs * inputs * outputs * outputs);
        for x in 0..inputs {
            for y in 0..inputs {
                for a in 0..outputs {
                    for b in 0..outputs {
                        probs.push(f(x, y, a, b));
                    }
                }
            }
        }
        Self::new(inputs, outputs, probs)
    }

    pub fn uniform(inputs: usize, outputs: usize) -> Self {
        let p = 1.0 / (outputs * outputs) as f64;
        Self { inputs, outputs, probs: vec![p; inputs * inputs * outputs * outputs] }
    }

    /// Popescu-Rohrlich box: `P(a,b|x,y) = 1/2` iff `a ⊕ b = x·y`.
    pub fn pr_box() -> Self {
        Self::from_fn(2, 2, |x, y, a, b| if (a ^ b) == (x & y) { 0.5 } else { 0.0 })
            .expect("PR box is normalized")
    }

    /// `t·self + (1-t)·other`.
    pub fn mix(&self, t: f64, other: &Self) -> Result<Self> {
        check_scenario(self.inputs, self.outputs, other.inputs, other.outputs)?;
        Self::new(
            self.inputs,
            self.outputs,
            self.probs.iter().zip(&other.probs).map(|(p, q)| t * p + (1.0 - t) * q).collect(),
        )
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, a: usize, b: usize) -> f64 {
        self.probs[flat(self.inputs, self.outputs, x, y, a, b)]
    }

    /// Unchecked construction for diagnostics and tests of the validators.
    pub fn from_raw(inputs: usize, outputs: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != inputs * inputs * outputs * outputs {
            return Err(BellError::InvalidBox("shape mismatch".into()));
        }
        Ok(Self { inputs, outputs, probs })
    }
}

/// Residuals of a box against the positivity, normalization and
/// non-signaling conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxDiagnostics {
    /// `max(0, -min P)`.
    pub max_negativity: f64,
    pub max_normalization_residual: f64,
    pub max_signaling_residual: f64,
    pub nonnegative: bool,
    pub normalized: bool,
    pub non_signaling: bool,
}

pub fn validate_box(p: &ProbBox) -> BoxDiagnostics {
    validate_box_with(p, &Tolerances::default())
}

pub fn validate_box_with(p: &ProbBox, tol: &Tolerances) -> BoxDiagnostics {
    let (n, k) = (p.inputs, p.outputs);
    let min = p.probs.iter().copied().fold(f64::INFINITY, f64::min);
    let max_negativity = (-min).max(0.0);

    let mut norm_res = 0.0f64;
    for x in 0..n {
        for y in 0..n {
            let s: f64 = (0..k).flat_map(|a| (0..k).map(move |b| (a, b))).map(|(a, b)| p.get(x, y, a, b)).sum();
            norm_res = norm_res.max((s - 1.0).abs());
        }
    }

    // Alice marginal Σ_b P(a,b|x,y) must not depend on y; Bob's likewise on x.
    let mut sig = 0.0f64;
    for x in 0..n {
        for a in 0..k {
            let marg: Vec<f64> = (0..n).map(|y| (0..k).map(|b| p.get(x, y, a, b)).sum()).collect();
            sig = sig.max(spread(&marg));
        }
    }
    for y in 0..n {
        for b in 0..k {
            let marg: Vec<f64> = (0..n).map(|x| (0..k).map(|a| p.get(x, y, a, b)).sum()).collect();
            sig = sig.max(spread(&marg));
        }
    }

    BoxDiagnostics {
        max_negativity,
        max_normalization_residual: norm_res,
        max_signaling_residual: sig,
        nonnegative: max_negativity <= tol.box_negativity,
        normalized: norm_res <= tol.box_normalization,
        non_signaling: sig <= tol.box_signaling,
    }
}

fn spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

/// `⟨M, P⟩ = Σ M P`, summed with `x` outermost, then `y`, `a`, `b`.
pub fn pair(m: &BellFunctional, p: &ProbBox) -> Result<f64> {
    check_scenario(m.inputs, m.outputs, p.inputs, p.outputs)?;
    Ok(m.coeffs.iter().zip(&p.probs).fold(0.0, |acc, (c, q)| acc + c * q))
}

/// `P(a,b|x,y) = [a = a_map(x)]·[b = b_map(y)]`.
pub fn deterministic_box(a_map: &[usize], b_map: &[usize], outputs: usize) -> Result<ProbBox> {
    let n = a_map.len();
    if b_map.len() != n {
        return Err(BellError::OutOfRange(format!(
            "Alice map has {} inputs, Bob map {}",
            n,
            b_map.len()
        )));
    }
    if let Some(&bad) = a_map.iter().chain(b_map).find(|&&v| v >= outputs) {
        return Err(BellError::OutOfRange(format!("output {bad} not below K={outputs}")));
    }
    let mut probs = vec![0.0; n * n * outputs * outputs];
    for x in 0..n {
        for y in 0..n {
            probs[flat(n, outputs, x, y, a_map[x], b_map[y])] = 1.0;
        }
    }
    Ok(ProbBox { inputs: n, outputs, probs })
}

/// Schmidt coefficients of `Σ α_i |ii⟩`, nonnegative, nonincreasing, unit 2-norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PureState {
    alpha: Vec<f64>,
}

impl PureState {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        Self::new_with(alpha, &Tolerances::default())
    }

    pub fn new_with(alpha: Vec<f64>, tol: &Tolerances) -> Result<Self> {
        if alpha.is_empty() {
            return Err(BellError::InvalidState("empty Schmidt vector".into()));
        }
        if alpha.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(BellError::InvalidState("coefficients must be finite and nonnegative".into()));
        }
        if alpha.windows(2).any(|w| w[1] > w[0]) {
            return Err(BellError::InvalidState("coefficients must be nonincreasing".into()));
        }
        let sq: f64 = alpha.iter().map(|a| a * a).sum();
        if (sq - 1.0).abs() > tol.state_normalization {
            return Err(BellError::InvalidState(format!("Σα² = {sq}, not 1")));
        }
        Ok(Self { alpha })
    }

    /// Sorts into nonincreasing order and rescales to unit norm.
    pub fn normalized(mut alpha: Vec<f64>) -> Result<Self> {
        alpha.iter_mut().for_each(|a| *a = a.abs());
        alpha.sort_by(|a, b| b.total_cmp(a));
        let norm = alpha.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(BellError::InvalidState("zero vector".into()));
        }
        alpha.iter_mut().for_each(|a| *a /= norm);
        Self::new(alpha)
    }

    pub fn maximally_entangled(dim: usize) -> Self {
        Self { alpha: vec![1.0 / (dim as f64).sqrt(); dim] }
    }

    /// `|11⟩` embedded in dimension `dim`.
    pub fn product(dim: usize) -> Self {
        let mut alpha = vec![0.0; dim];
        alpha[0] = 1.0;
        Self { alpha }
    }

    pub fn random<R: rand::Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let v = linalg::random_unit(dim, true, rng);
        Self::normalized(v).expect("random unit vector is a valid state")
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn schmidt(&self) -> &[f64] {
        &self.alpha
    }

    pub fn is_maximally_entangled(&self, tol: f64) -> bool {
        let target = 1.0 / (self.dim() as f64).sqrt();
        self.alpha.iter().all(|a| (a - target).abs() <= tol)
    }
}

/// A POVM: `K` PSD Hermitian `n×n` matrices summing to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    pub(crate) elements: Vec<CMatrix>,
}

impl Povm {
    pub fn new(elements: Vec<CMatrix>) -> Result<Self> {
        Self::new_with(elements, &Tolerances::default())
    }

    pub fn new_with(elements: Vec<CMatrix>, tol: &Tolerances) -> Result<Self> {
        let (psd, complete) = povm_residuals(&elements)?;
        if psd > tol.povm_psd {
            return Err(BellError::InvalidPovm(format!("element has eigenvalue {:e}", -psd)));
        }
        if complete > tol.povm_completeness {
            return Err(BellError::InvalidPovm(format!("Σ E - I has norm {complete:e}")));
        }
        Ok(Self { elements })
    }

    /// Projective measurement in the computational basis, padded with zero
    /// operators if `outputs > dim` and with the leftover basis vectors
    /// folded into the last outcome if `outputs < dim`.
    pub fn computational(dim: usize, outputs: usize) -> Self {
        let mut elements = vec![CMatrix::zeros(dim, dim); outputs];
        for i in 0..dim {
            let a = i.min(outputs - 1);
            elements[a][(i, i)] = Complex64::new(1.0, 0.0);
        }
        Self { elements }
    }

    pub fn random<R: rand::Rng + ?Sized>(dim: usize, outputs: usize, rng: &mut R) -> Self {
        Self { elements: linalg::random_povm(dim, outputs, rng) }
    }

    /// Qubit measurement of the observable `cos θ Z + sin θ X`; outcome 0 is the +1 eigenspace.
    pub fn qubit_projective(theta: f64) -> Self {
        let (cs, sn) = (theta.cos(), theta.sin());
        let r = |v: f64| Complex64::new(v, 0.0);
        let plus = CMatrix::from_row_slice(
            2,
            2,
            &[r(0.5 * (1.0 + cs)), r(0.5 * sn), r(0.5 * sn), r(0.5 * (1.0 - cs))],
        );
        let minus = linalg::identity(2) - &plus;
        Self { elements: vec![plus, minus] }
    }

    pub fn dim(&self) -> usize {
        self.elements.first().map_or(0, |e| e.nrows())
    }

    pub fn outputs(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    /// `(max negativity, ‖Σ E - I‖)`.
    pub fn residuals(&self) -> (f64, f64) {
        povm_residuals(&self.elements).expect("validated at construction")
    }
}

/// `(max(0, -min eigenvalue), operator norm of Σ E - I)` for candidate POVM elements.
pub fn povm_residuals(elements: &[CMatrix]) -> Result<(f64, f64)> {
    let Some(first) = elements.first() else {
        return Err(BellError::InvalidPovm("no elements".into()));
    };
    let dim = first.nrows();
    if elements.iter().any(|e| e.nrows() != dim || e.ncols() != dim) {
        return Err(BellError::InvalidPovm("elements must be square and equal-sized".into()));
    }
    let mut neg = 0.0f64;
    let mut total = CMatrix::zeros(dim, dim);
    for e in elements {
        let herm_defect = (e - e.adjoint()).norm();
        if herm_defect > 1e-10 {
            return Err(BellError::InvalidPovm(format!("element not Hermitian ({herm_defect:e})")));
        }
        neg = neg.max(-linalg::min_eigenvalue(e));
        total += e;
    }
    let complete = linalg::hermitian_op_norm(&(total - linalg::identity(dim)));
    Ok((neg.max(0.0), complete))
}

/// Pure state plus one POVM per input for each party, all in dimension `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumStrategy {
    pub(crate) state: PureState,
    pub(crate) alice: Vec<Povm>,
    pub(crate) bob: Vec<Povm>,
}

impl QuantumStrategy {
    pub fn new(state: PureState, alice: Vec<Povm>, bob: Vec<Povm>) -> Result<Self> {
        let n = state.dim();
        if alice.is_empty() || alice.len() != bob.len() {
            return Err(BellError::InvalidStrategy(format!(
                "Alice has {} inputs, Bob {}",
                alice.len(),
                bob.len()
            )));
        }
        let k = alice[0].outputs();
        for p in alice.iter().chain(&bob) {
            if p.dim() != n {
                return Err(BellError::InvalidStrategy(format!(
                    "POVM dimension {} differs from state dimension {n}",
                    p.dim()
                )));
            }
            if p.outputs() != k {
                return Err(BellError::InvalidStrategy("all POVMs must have K outcomes".into()));
            }
        }
        Ok(Self { state, alice, bob })
    }

    pub fn random<R: rand::Rng + ?Sized>(
        state: PureState,
        inputs: usize,
        outputs: usize,
        rng: &mut R,
    ) -> Self {
        let n = state.dim();
        let alice = (0..inputs).map(|_| Povm::random(n, outputs, rng)).collect();
        let bob = (0..inputs).map(|_| Povm::random(n, outputs, rng)).collect();
        Self { state, alice, bob }
    }

    pub fn state(&self) -> &PureState {
        &self.state
    }

    pub fn alice(&self) -> &[Povm] {
        &self.alice
    }

    pub fn bob(&self) -> &[Povm] {
        &self.bob
    }

    pub fn inputs(&self) -> usize {
        self.alice.len()
    }

    pub fn outputs(&self) -> usize {
        self.alice[0].outputs()
    }

    pub fn dim(&self) -> usize {
        self.state.dim()
    }
}

/// `D_α E D_α` for `D_α = diag(α)`.
pub(crate) fn weight_by_state(e: &CMatrix, alpha: &[f64]) -> CMatrix {
    CMatrix::from_fn(e.nrows(), e.ncols(), |i, j| e[(i, j)] * (alpha[i] * alpha[j]))
}

/// `Σ_{i,j} A(i,j) B(i,j)` (no conjugation).
pub(crate) fn entrywise_sum(a: &CMatrix, b: &CMatrix) -> Complex64 {
    a.iter().zip(b.iter()).fold(Complex64::new(0.0, 0.0), |acc, (p, q)| acc + p * q)
}

/// `P(a,b|x,y) = tr(E_x^a ⊗ F_y^b ρ) = Σ_{i,j} α_i α_j E(i,j) F(i,j)`.
pub fn quantum_box(s: &QuantumStrategy) -> Result<ProbBox> {
    quantum_box_with(s, &Tolerances::default())
}

pub fn quantum_box_with(s: &QuantumStrategy, tol: &Tolerances) -> Result<ProbBox> {
    let (n, k) = (s.inputs(), s.outputs());
    let alpha = s.state.schmidt();
    let weighted: Vec<Vec<CMatrix>> = s
        .alice
        .iter()
        .map(|p| p.elements.iter().map(|e| weight_by_state(e, alpha)).collect())
        .collect();
    let mut probs = Vec::with_capacity(n * n * k * k);
    let mut worst_imag = 0.0f64;
    for ex in &weighted {
        for fy in &s.bob {
            for e in ex {
                for f in &fy.elements {
                    let v = entrywise_sum(e, f);
                    worst_imag = worst_imag.max(v.im.abs());
                    probs.push(v.re);
                }
            }
        }
    }
    if worst_imag > tol.imaginary_residual {
        return Err(BellError::NumericConsistency(format!(
            "imaginary part {worst_imag:e} in quantum probabilities"
        )));
    }
    Ok(ProbBox { inputs: n, outputs: k, probs })
}
