//! Banach-norm quantities: projective norms of pure states, `ℓ∞→ℓ2` operator
//! norms, Gaussian `ℓ`-norms, 2-summing norms of diagonal maps, the twist-map
//! trace identity and the concentration-ratio experiment.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BellError, Result};
use crate::model::{BellFunctional, PureState};
use crate::relax::{self, Mode, VectorStrategy};
use crate::rng;
use crate::signs::{self, MAX_OUTPUTS};

/// A numerical constant together with where its value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constant {
    pub name: &'static str,
    /// `None` when no numerical value is known.
    pub value: Option<f64>,
    pub provenance: &'static str,
}

/// Upper estimate of the real Grothendieck constant.
pub const GROTHENDIECK: Constant =
    Constant { name: "K_G", value: Some(1.78), provenance: "known upper estimate of the real Grothendieck constant" };
/// Constant in the sharp lower bound on the largest violation of a pure state.
pub const SHARP_C: Constant =
    Constant { name: "C", value: Some(0.018_315_638_888_734_18), provenance: "admissible choice e^-4 for the sharp bound" };
pub const K12: Constant = Constant { name: "K_1,2", value: None, provenance: "universal constant, value unknown" };
pub const ENVELOPE_D: Constant =
    Constant { name: "D", value: None, provenance: "universal constant of the unbounded-violation envelope, value unknown" };

pub const MIN_SAMPLES: usize = 10_000;
pub const DEFAULT_SAMPLES: usize = 100_000;
const MAX_BATCHES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Natural,
    Binary,
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Binary => x.log2(),
        }
    }
}

/// `(Σ_i α_i)²`.
pub fn projective_norm_pure(state: &PureState) -> f64 {
    let l1: f64 = state.schmidt().iter().sum();
    l1 * l1
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SharpBound {
    /// `sup_{2≤k≤n} (Σ_{i≤k} α_i / log k)²`.
    pub raw: f64,
    /// `C · raw`.
    pub with_constant: f64,
    /// Maximizing `k`.
    pub k: usize,
    /// Set for `n = 1`, where the supremum is empty and `α_1²` is returned instead.
    pub single_term_convention: bool,
    pub constant: Constant,
}

pub fn lv_lower_bound_sharp(state: &PureState) -> SharpBound {
    lv_lower_bound_sharp_with(state, LogBase::Natural)
}

/// The `k = 1` term has `log 1 = 0` and is excluded.
pub fn lv_lower_bound_sharp_with(state: &PureState, base: LogBase) -> SharpBound {
    let alpha = state.schmidt();
    let c = SHARP_C.value.expect("C is pinned");
    if alpha.len() == 1 {
        let raw = alpha[0] * alpha[0];
        return SharpBound { raw, with_constant: c * raw, k: 1, single_term_convention: true, constant: SHARP_C };
    }
    let mut prefix = alpha[0];
    let mut best = (f64::NEG_INFINITY, 2);
    for (k, a) in alpha.iter().enumerate().skip(1).map(|(i, a)| (i + 1, a)) {
        prefix += a;
        let term = (prefix / base.log(k as f64)).powi(2);
        if term > best.0 {
            best = (term, k);
        }
    }
    SharpBound { raw: best.0, with_constant: c * best.0, k: best.1, single_term_convention: false, constant: SHARP_C }
}

/// `max_σ ‖Σ_a σ_a u_a‖₂` by enumeration of `2^{K-1}` sign patterns.
pub fn op_norm_inf_to_2(vectors: &[Vec<f64>]) -> Result<f64> {
    if vectors.len() > MAX_OUTPUTS {
        return Err(BellError::BudgetExceeded(format!(
            "{} columns exceed the sign-enumeration limit {MAX_OUTPUTS}",
            vectors.len()
        )));
    }
    if vectors.is_empty() {
        return Ok(0.0);
    }
    let d = vectors[0].len();
    if vectors.iter().any(|v| v.len() != d) {
        return Err(BellError::InvalidStrategy("columns must share one dimension".into()));
    }
    let refs: Vec<&[f64]> = vectors.iter().map(Vec::as_slice).collect();
    Ok(signs::max_signed_norm(&refs).0)
}

/// `‖(λ_i)‖₂`.
pub fn two_summing_diagonal(lambdas: &[f64]) -> f64 {
    lambdas.iter().map(|l| l * l).sum::<f64>().sqrt()
}

/// Real matrix stored by rows as sparse `(column, value)` lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    entries: Vec<Vec<(usize, f64)>>,
}

impl Matrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(BellError::OutOfRange("ragged matrix rows".into()));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(BellError::OutOfRange("matrix entries must be finite".into()));
        }
        let entries = rows
            .iter()
            .map(|r| r.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, v)| (j, *v)).collect())
            .collect();
        Ok(Self { rows: rows.len(), cols, entries })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: vec![Vec::new(); rows] }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        let entries = values.iter().enumerate().map(|(i, v)| if *v == 0.0 { vec![] } else { vec![(i, *v)] }).collect();
        Self { rows: n, cols: n, entries }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn scaled(&self, c: f64) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|r| r.iter().map(|(j, v)| (*j, v * c)).filter(|(_, v)| *v != 0.0).collect())
            .collect();
        Self { rows: self.rows, cols: self.cols, entries }
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(&self.entries) {
            *o = row.iter().map(|(j, v)| v * x[*j]).sum();
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.entries
            .iter()
            .map(|r| {
                let mut d = vec![0.0; self.cols];
                r.iter().for_each(|(j, v)| d[*j] = *v);
                d
            })
            .collect()
    }

    fn columns(&self) -> Vec<Vec<f64>> {
        let mut cols = vec![vec![0.0; self.rows]; self.cols];
        for (i, r) in self.entries.iter().enumerate() {
            for (j, v) in r {
                cols[*j][i] = *v;
            }
        }
        cols
    }

    /// `tr(self · other)`.
    pub fn trace_product(&self, other: &Matrix) -> Result<f64> {
        if self.cols != other.rows || self.rows != other.cols {
            return Err(BellError::OutOfRange(format!(
                "trace of {}×{} times {}×{} is undefined",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut total = 0.0;
        for (i, r) in self.entries.iter().enumerate() {
            for (k, v) in r {
                if let Some((_, w)) = other.entries[*k].iter().find(|(j, _)| *j == i) {
                    total += v * w;
                }
            }
        }
        Ok(total)
    }

    /// `ℓ∞→ℓ2` norm of the map whose columns are the columns of `self`.
    ///
    /// Mutually orthogonal columns give `(Σ ‖c_j‖²)^{1/2}` for every sign
    /// pattern; otherwise the patterns are enumerated (at most 24 columns).
    pub fn inf_to_2_norm(&self) -> Result<f64> {
        let disjoint = self.entries.iter().all(|r| r.len() <= 1);
        if disjoint {
            return Ok(self.entries.iter().flatten().map(|(_, v)| v * v).sum::<f64>().sqrt());
        }
        let cols = self.columns();
        if cols.len() <= MAX_OUTPUTS {
            return op_norm_inf_to_2(&cols);
        }
        let orthogonal = (0..cols.len())
            .all(|a| (a + 1..cols.len()).all(|b| crate::linalg::dot(&cols[a], &cols[b]) == 0.0));
        if orthogonal {
            return Ok(cols.iter().flatten().map(|v| v * v).sum::<f64>().sqrt());
        }
        Err(BellError::BudgetExceeded(format!(
            "ℓ∞→ℓ2 norm of {} non-orthogonal columns exceeds the enumeration budget",
            cols.len()
        )))
    }
}

/// Norm on the target space of a map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Linf,
    L2,
    L1,
}

impl Target {
    pub fn norm(self, v: &[f64]) -> f64 {
        match self {
            Target::Linf => v.iter().fold(0.0f64, |m, x| m.max(x.abs())),
            Target::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Target::L1 => v.iter().map(|x| x.abs()).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
    /// Batch `b` draws from substream `b` of the seed.
    pub batches: usize,
}

fn batch_sizes(samples: usize) -> Vec<usize> {
    let batches = samples.clamp(1, MAX_BATCHES);
    (0..batches).map(|b| samples / batches + usize::from(b < samples % batches)).collect()
}

/// Calls `f(g)` on `size` standard Gaussian vectors of length `n` from substream `batch`.
fn gaussian_batch(seed: u64, batch: usize, size: usize, n: usize, mut f: impl FnMut(&[f64])) {
    let mut r = rng::rng(rng::substream(seed, batch as u64));
    let mut g = vec![0.0; n];
    for _ in 0..size {
        g.iter_mut().for_each(|x| *x = StandardNormal.sample(&mut r));
        f(&g);
    }
}

fn check_samples(samples: usize) -> Result<()> {
    if samples < MIN_SAMPLES {
        return Err(BellError::OutOfRange(format!("need at least {MIN_SAMPLES} samples, got {samples}")));
    }
    Ok(())
}

/// Delete-one-batch jackknife for `sqrt(mean)` given per-batch `(sum, count)`.
fn jackknife_sqrt(parts: &[(f64, usize)]) -> (f64, f64) {
    let total: f64 = parts.iter().map(|p| p.0).sum();
    let count: usize = parts.iter().map(|p| p.1).sum();
    let est = (total / count as f64).sqrt();
    let b = parts.len();
    if b < 2 {
        return (est, f64::NAN);
    }
    let leave: Vec<f64> = parts.iter().map(|(s, c)| ((total - s) / (count - c) as f64).sqrt()).collect();
    let mean = leave.iter().sum::<f64>() / b as f64;
    let var = leave.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() * (b - 1) as f64 / b as f64;
    (est, var.sqrt())
}

/// `ℓ(T) = (E ‖T g‖²)^{1/2}` with `g` standard Gaussian, by Monte Carlo.
pub fn ell_norm_mc(t: &Matrix, target: Target, samples: usize, seed: u64) -> Result<Estimate> {
    check_samples(samples)?;
    let sizes = batch_sizes(samples);
    let parts: Vec<(f64, usize)> = sizes
        .par_iter()
        .enumerate()
        .map(|(b, &size)| {
            let mut img = vec![0.0; t.rows()];
            let mut acc = 0.0;
            gaussian_batch(seed, b, size, t.cols(), |g| {
                t.apply(g, &mut img);
                let v = target.norm(&img);
                acc += v * v;
            });
            (acc, size)
        })
        .collect();
    let (estimate, stderr) = jackknife_sqrt(&parts);
    Ok(Estimate { estimate, stderr, samples, batches: sizes.len() })
}

/// Maps `(u_y, v_y)` for `y ∈ [N+1]` built from a functional and a vector strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct TwistMaps {
    /// `u[y]` is `w × d` (row `b` is the `|b⟩` coordinate), `w = max(K-1, 1)`.
    pub u: Vec<Vec<Vec<f64>>>,
    /// `v[y]` is given by its `w` columns in `R^d`.
    pub v: Vec<Vec<Vec<f64>>>,
}

impl TwistMaps {
    pub fn build(m: &BellFunctional, vs: &VectorStrategy) -> Result<Self> {
        if m.inputs() != vs.inputs() || m.outputs() != vs.outputs() {
            return Err(BellError::ScenarioMismatch {
                expected_n: m.inputs(),
                expected_k: m.outputs(),
                got_n: vs.inputs(),
                got_k: vs.outputs(),
            });
        }
        let (n, k, d) = (m.inputs(), m.outputs(), vs.dim());
        let w = k.saturating_sub(1).max(1);
        let last = k - 1;
        let mut u = Vec::with_capacity(n + 1);
        let mut v = Vec::with_capacity(n + 1);
        for y in 0..n {
            let mut uy = vec![vec![0.0; d]; w];
            for (b, row) in uy.iter_mut().enumerate().take(k - 1) {
                for x in 0..n {
                    for a in 0..k {
                        let c = m.get(x, y, a, b) - m.get(x, y, a, last);
                        if c != 0.0 {
                            row.iter_mut().zip(&vs.u()[x][a]).for_each(|(o, t)| *o += c * t);
                        }
                    }
                }
            }
            u.push(uy);
            let mut vy = vec![vec![0.0; d]; w];
            for (b, col) in vy.iter_mut().enumerate().take(k - 1) {
                col.copy_from_slice(&vs.v()[y][b]);
            }
            v.push(vy);
        }
        let mut un = vec![vec![0.0; d]; w];
        for y in 0..n {
            for x in 0..n {
                for a in 0..k {
                    let c = m.get(x, y, a, last);
                    if c != 0.0 {
                        un[0].iter_mut().zip(&vs.u()[x][a]).for_each(|(o, t)| *o += c * t);
                    }
                }
            }
        }
        let mut vn = vec![vec![0.0; d]; w];
        for vb in &vs.v()[0] {
            vn[0].iter_mut().zip(vb).for_each(|(o, t)| *o += t);
        }
        u.push(un);
        v.push(vn);
        Ok(Self { u, v })
    }

    /// `Σ_y tr(v_y ∘ u_y)`.
    pub fn trace(&self) -> f64 {
        self.u
            .iter()
            .zip(&self.v)
            .map(|(uy, vy)| uy.iter().zip(vy).map(|(row, col)| crate::linalg::dot(row, col)).sum::<f64>())
            .sum()
    }

    /// `ℓ∞→ℓ2` norms of the `v_y`.
    pub fn v_norms(&self) -> Result<Vec<f64>> {
        self.v.iter().map(|vy| op_norm_inf_to_2(vy)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub v_norms: Vec<f64>,
}

/// `|Σ M ⟨u, v⟩ - Σ_y tr(v_y ∘ u_y)|` with no feasibility precondition.
pub fn twist_trace_residual(m: &BellFunctional, vs: &VectorStrategy) -> Result<TraceCheck> {
    let maps = TwistMaps::build(m, vs)?;
    let lhs = relax::bilinear(m, vs)?;
    let rhs = maps.trace();
    Ok(TraceCheck { lhs, rhs, residual: (lhs - rhs).abs(), v_norms: maps.v_norms()? })
}

/// [`twist_trace_residual`] for a strategy that is feasible with a shared marginal.
pub fn twist_and_trace_check(m: &BellFunctional, vs: &VectorStrategy) -> Result<TraceCheck> {
    let tol = 1e-10;
    let f = relax::check_feasible(vs, Mode::OpBar, tol)?;
    if !f.feasible {
        return Err(BellError::Precondition(format!(
            "strategy infeasible (norm violation {:e}, marginal residual {:e})",
            f.violation, f.marginal_residual
        )));
    }
    twist_trace_residual(m, vs)
}

/// Breaks the shared marginal on Bob's side: `v_y^{K}` for `y ≥ 1` is shifted
/// by `scale` along `Σ_{x,a,y≥1} M_{x,y}^{a,K} u_x^a`, which moves the
/// bilinear form but none of the twist maps.
pub fn break_marginal(m: &BellFunctional, vs: &VectorStrategy, scale: f64) -> Result<VectorStrategy> {
    let (n, k, d) = (m.inputs(), m.outputs(), vs.dim());
    let last = k - 1;
    let mut dir = vec![0.0; d];
    for y in 1..n {
        for x in 0..n {
            for a in 0..k {
                let c = m.get(x, y, a, last);
                dir.iter_mut().zip(&vs.u()[x][a]).for_each(|(o, t)| *o += c * t);
            }
        }
    }
    let norm = crate::linalg::norm2(&dir);
    if norm == 0.0 {
        dir = vec![0.0; d];
        dir[0] = 1.0;
    } else {
        dir.iter_mut().for_each(|t| *t /= norm);
    }
    let mut v = vs.v().to_vec();
    for fam in v.iter_mut().skip(1) {
        fam[last].iter_mut().zip(&dir).for_each(|(o, t)| *o += scale * t);
    }
    VectorStrategy::new(vs.u().to_vec(), v, vs.z().map(<[f64]>::to_vec))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Concentration {
    pub trace: f64,
    pub t_norm: f64,
    pub ell_s: Estimate,
    /// `|tr(T∘S)| · sqrt(ln n / n) / (‖T‖ · ℓ(S))`.
    pub ratio: f64,
}

/// `S: R^n → ℓ∞^N` (an `N × n` matrix) and `T: ℓ∞^N → R^n` (an `n × N` matrix).
pub fn concentration_ratio(s: &Matrix, t: &Matrix, samples: usize, seed: u64) -> Result<Concentration> {
    if s.rows() != t.cols() || s.cols() != t.rows() {
        return Err(BellError::OutOfRange(format!(
            "S is {}×{} but T is {}×{}",
            s.rows(),
            s.cols(),
            t.rows(),
            t.cols()
        )));
    }
    let n = s.cols();
    let trace = t.trace_product(s)?;
    let t_norm = t.inf_to_2_norm()?;
    let ell_s = ell_norm_mc(s, Target::Linf, samples, seed)?;
    let denom = t_norm * ell_s.estimate;
    let scale = if n > 1 { ((n as f64).ln() / n as f64).sqrt() } else { 0.0 };
    let ratio = if trace == 0.0 || denom == 0.0 { 0.0 } else { trace.abs() * scale / denom };
    Ok(Concentration { trace, t_norm, ell_s, ratio })
}

/// A map into `ℓ1(ℓ∞)` given blockwise by `S_x`, all with the same domain.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMap {
    blocks: Vec<Matrix>,
}

impl BlockMap {
    pub fn new(blocks: Vec<Matrix>) -> Result<Self> {
        let n = blocks.first().map(Matrix::cols).ok_or_else(|| BellError::OutOfRange("no blocks".into()))?;
        if blocks.iter().any(|b| b.cols() != n) {
            return Err(BellError::OutOfRange("blocks must share the domain dimension".into()));
        }
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> &[Matrix] {
        &self.blocks
    }

    pub fn domain(&self) -> usize {
        self.blocks[0].cols()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockEstimate {
    /// Estimate of `E ‖S g‖_{ℓ1(ℓ∞)}`.
    pub total: f64,
    pub total_stderr: f64,
    /// Estimates of `E ‖S_x g‖_∞` on the same draws.
    pub per_block: Vec<f64>,
    /// Largest per-draw `|‖S g‖ - Σ_x ‖S_x g‖_∞|`.
    pub additivity_residual: f64,
    pub samples: usize,
    pub batches: usize,
}

fn l1_of_linf(image: &[f64], sizes: &[usize]) -> f64 {
    let mut total = 0.0;
    let mut start = 0;
    for s in sizes {
        total += Target::Linf.norm(&image[start..start + s]);
        start += s;
    }
    total
}

pub fn block_ell_one_infty_mc(s: &BlockMap, samples: usize, seed: u64) -> Result<BlockEstimate> {
    check_samples(samples)?;
    let sizes = batch_sizes(samples);
    let block_rows: Vec<usize> = s.blocks.iter().map(Matrix::rows).collect();
    let nb = s.blocks.len();
    let parts: Vec<(f64, f64, Vec<f64>, f64)> = sizes
        .par_iter()
        .enumerate()
        .map(|(b, &size)| {
            let mut image = vec![0.0; block_rows.iter().sum()];
            let mut block_img: Vec<Vec<f64>> = block_rows.iter().map(|r| vec![0.0; *r]).collect();
            let (mut sum, mut sq, mut per, mut worst) = (0.0, 0.0, vec![0.0; nb], 0.0f64);
            gaussian_batch(seed, b, size, s.domain(), |g| {
                let mut start = 0;
                for (blk, out) in s.blocks.iter().zip(block_img.iter_mut()) {
                    blk.apply(g, out);
                    image[start..start + out.len()].copy_from_slice(out);
                    start += out.len();
                }
                let total = l1_of_linf(&image, &block_rows);
                let mut parts_sum = 0.0;
                for (p, out) in per.iter_mut().zip(&block_img) {
                    let v = Target::Linf.norm(out);
                    *p += v;
                    parts_sum += v;
                }
                worst = worst.max((total - parts_sum).abs());
                sum += total;
                sq += total * total;
            });
            (sum, sq, per, worst)
        })
        .collect();
    let count = samples as f64;
    let sum: f64 = parts.iter().map(|p| p.0).sum();
    let sq: f64 = parts.iter().map(|p| p.1).sum();
    let mut per_block = vec![0.0; nb];
    for p in &parts {
        per_block.iter_mut().zip(&p.2).for_each(|(o, v)| *o += v);
    }
    per_block.iter_mut().for_each(|v| *v /= count);
    let total = sum / count;
    let var = (sq / count - total * total).max(0.0) * count / (count - 1.0);
    Ok(BlockEstimate {
        total,
        total_stderr: (var / count).sqrt(),
        per_block,
        additivity_residual: parts.iter().map(|p| p.3).fold(0.0, f64::max),
        samples,
        batches: sizes.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical;
    use crate::model::{quantum_box, QuantumStrategy};
    use crate::quantum::quantum_to_vectors;
    use proptest::prelude::*;

    fn random_functional(n: usize, k: usize, seed: u64) -> BellFunctional {
        let mut r = rng::rng(seed);
        BellFunctional::from_fn(n, k, |_, _, _, _| r.random_range(-1.0..1.0)).unwrap()
    }

    #[test]
    fn projective_norm_examples() {
        assert!((projective_norm_pure(&PureState::maximally_entangled(7)) - 7.0).abs() < 1e-12);
        assert_eq!(projective_norm_pure(&PureState::product(3)), 1.0);
        let s = PureState::new(vec![0.8f64.sqrt(), 0.2f64.sqrt()]).unwrap();
        assert!((projective_norm_pure(&s) - 1.8).abs() < 1e-12);
    }

    #[test]
    fn projective_norm_range() {
        let mut r = rng::rng(1);
        for _ in 0..1000 {
            let n = r.random_range(1..10);
            let p = projective_norm_pure(&PureState::random(n, &mut r));
            assert!((1.0 - 1e-12..=n as f64 + 1e-12).contains(&p));
        }
    }

    #[test]
    fn sharp_bound_examples() {
        let me = lv_lower_bound_sharp(&PureState::maximally_entangled(16));
        assert_eq!(me.k, 16);
        assert!((me.raw - 16.0 / 16f64.ln().powi(2)).abs() < 1e-12);
        assert!((me.raw * 16f64.ln().powi(2) / 16.0 - 1.0).abs() < 1e-14);
        let e1 = lv_lower_bound_sharp(&PureState::product(5));
        assert_eq!(e1.k, 2);
        assert!((e1.raw - 2.0814).abs() < 1e-4);
        let two = lv_lower_bound_sharp(&PureState::maximally_entangled(2));
        assert!((two.raw - 4.1627).abs() < 1e-4);
        assert!((two.with_constant - (-4f64).exp() * two.raw).abs() < 1e-15);
        let one = lv_lower_bound_sharp(&PureState::product(1));
        assert!(one.single_term_convention && one.raw == 1.0);
        let b = lv_lower_bound_sharp_with(&PureState::maximally_entangled(16), LogBase::Binary);
        assert!((b.raw - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sharp_constant_is_e_minus_four() {
        assert!((SHARP_C.value.unwrap() - (-4f64).exp()).abs() < 1e-17);
    }

    #[test]
    fn op_norm_examples() {
        assert_eq!(op_norm_inf_to_2(&[vec![1.0, 0.0]]).unwrap(), 1.0);
        assert!((op_norm_inf_to_2(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(op_norm_inf_to_2(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap(), 2.0);
        assert!(op_norm_inf_to_2(&vec![vec![1.0]; 25]).is_err());
    }

    #[test]
    fn op_norm_matches_full_enumeration() {
        let mut r = rng::rng(2);
        for _ in 0..50 {
            let k = r.random_range(1..7);
            let d = r.random_range(1..4);
            let vs: Vec<Vec<f64>> = (0..k).map(|_| (0..d).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
            let mut brute = 0.0f64;
            for p in 0..(1u32 << k) {
                let mut w = vec![0.0; d];
                for (a, v) in vs.iter().enumerate() {
                    let s = if p >> a & 1 == 1 { -1.0 } else { 1.0 };
                    w.iter_mut().zip(v).for_each(|(o, t)| *o += s * t);
                }
                brute = brute.max(crate::linalg::norm2(&w));
            }
            assert!((op_norm_inf_to_2(&vs).unwrap() - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn two_summing_examples() {
        assert!((two_summing_diagonal(&[1.0; 9]) - 3.0).abs() < 1e-15);
        assert_eq!(two_summing_diagonal(&[1.0]), 1.0);
        let d: Vec<f64> = (2..=4).map(|k| 1.0 / (k as f64).ln().sqrt()).collect();
        assert!((two_summing_diagonal(&d) - 1.7533).abs() < 1e-4);
    }

    #[test]
    fn ell_norm_identity() {
        let one = ell_norm_mc(&Matrix::identity(1), Target::Linf, 100_000, 3).unwrap();
        assert!((one.estimate - 1.0).abs() <= 3.0 * one.stderr + 1e-12, "{one:?}");
        let two = ell_norm_mc(&Matrix::identity(2), Target::Linf, 200_000, 3).unwrap();
        let exact = (1.0 + 2.0 / std::f64::consts::PI).sqrt();
        assert!((two.estimate / exact - 1.0).abs() < 0.005, "{two:?}");
        assert!(ell_norm_mc(&Matrix::identity(2), Target::Linf, 10, 3).is_err());
    }

    #[test]
    fn ell_norm_homogeneous_and_deterministic() {
        let t = Matrix::from_rows(&[vec![1.0, 0.5, 0.0], vec![0.0, -1.0, 2.0]]).unwrap();
        let a = ell_norm_mc(&t, Target::L2, 20_000, 9).unwrap();
        let b = ell_norm_mc(&t.scaled(3.0), Target::L2, 20_000, 9).unwrap();
        assert!((b.estimate - 3.0 * a.estimate).abs() < 1e-12);
        assert_eq!(a, ell_norm_mc(&t, Target::L2, 20_000, 9).unwrap());
        // E‖Tg‖₂² is the squared Frobenius norm.
        assert!((a.estimate - 6.25f64.sqrt()).abs() < 4.0 * a.stderr);
    }

    #[test]
    fn matrix_norm_paths_agree() {
        let t = Matrix::from_rows(&[vec![1.0, 0.0, 2.0], vec![0.0, 3.0, 0.0]]).unwrap();
        let enumerated = op_norm_inf_to_2(&t.columns()).unwrap();
        assert!((t.inf_to_2_norm().unwrap() - enumerated).abs() < 1e-12);
        assert_eq!(Matrix::identity(1000).inf_to_2_norm().unwrap(), 1000f64.sqrt());
        let dense = Matrix::from_rows(&[vec![1.0; 30], vec![1.0; 30]]).unwrap();
        assert!(dense.inf_to_2_norm().is_err());
    }

    #[test]
    fn twist_zero_functional() {
        let vs = relax_embedding(2, 3);
        let c = twist_and_trace_check(&BellFunctional::zeros(2, 3), &vs).unwrap();
        assert_eq!((c.lhs, c.rhs, c.residual), (0.0, 0.0, 0.0));
    }

    fn relax_embedding(n: usize, k: usize) -> VectorStrategy {
        let s = classical::DeterministicStrategy { alice: vec![0; n], bob: vec![k - 1; n] };
        relax::embed_deterministic(&s, k, 2).unwrap()
    }

    #[test]
    fn twist_chsh_witness() {
        let m = BellFunctional::chsh();
        let vs = relax::classical_embedding(&m, 2).unwrap();
        let c = twist_and_trace_check(&m, &vs).unwrap();
        assert!(c.residual < 1e-12);
        assert!((c.lhs.abs() - 0.75).abs() < 1e-12);
        assert_eq!(c.v_norms.len(), 3);
        assert!(c.v_norms.iter().all(|v| *v <= 1.0 + 1e-12));
    }

    #[test]
    fn twist_quantum_derived() {
        let mut r = rng::rng(8);
        for seed in 0..10 {
            let m = random_functional(3, 3, seed);
            let s = QuantumStrategy::random(PureState::maximally_entangled(2), 3, 3, &mut r);
            let fam = quantum_to_vectors(&m, &s, false).unwrap();
            let vs = fam.best_strategy().unwrap();
            let c = twist_and_trace_check(&m, &vs).unwrap();
            assert!(c.residual < 1e-10, "{c:?}");
            assert!(c.v_norms.iter().all(|v| *v <= 1.0 + 1e-10));
            let _ = quantum_box(&s).unwrap();
        }
    }

    #[test]
    fn twist_single_output() {
        let m = BellFunctional::new(2, 1, vec![0.5, -1.0, 2.0, 0.25]).unwrap();
        let z = vec![0.6, 0.8];
        let fam = vec![vec![z.clone()]; 2];
        let vs = VectorStrategy::new(fam.clone(), fam, Some(z)).unwrap();
        assert!(twist_and_trace_check(&m, &vs).unwrap().residual < 1e-14);
    }

    #[test]
    fn broken_marginal_breaks_the_identity() {
        let m = random_functional(3, 3, 21);
        let vs = relax::classical_embedding(&m, 3).unwrap();
        let broken = break_marginal(&m, &vs, 0.5).unwrap();
        assert!(twist_and_trace_check(&m, &broken).is_err());
        assert!(twist_trace_residual(&m, &broken).unwrap().residual > 0.01);
    }

    #[test]
    fn concentration_examples() {
        let zero = concentration_ratio(&Matrix::zeros(4, 4), &Matrix::zeros(4, 4), 10_000, 1).unwrap();
        assert_eq!(zero.ratio, 0.0);
        let id = Matrix::identity(64);
        let a = concentration_ratio(&id, &id, 20_000, 2).unwrap();
        assert!((0.4..=1.2).contains(&a.ratio), "{a:?}");
        assert_eq!(a.trace, 64.0);
        assert_eq!(a.t_norm, 8.0);
        let b = concentration_ratio(&id.scaled(4.0), &id.scaled(0.25), 20_000, 2).unwrap();
        assert!((a.ratio - b.ratio).abs() < 1e-12);
    }

    #[test]
    fn block_additivity() {
        let mut r = rng::rng(4);
        let mk = |r: &mut rng::Rng, rows: usize| {
            Matrix::from_rows(&(0..rows).map(|_| (0..3).map(|_| r.random_range(-1.0..1.0)).collect()).collect::<Vec<_>>())
                .unwrap()
        };
        let blocks = vec![mk(&mut r, 2), mk(&mut r, 4), mk(&mut r, 1)];
        let est = block_ell_one_infty_mc(&BlockMap::new(blocks.clone()).unwrap(), 100_000, 5).unwrap();
        assert_eq!(est.additivity_residual, 0.0);
        assert!((est.total - est.per_block.iter().sum::<f64>()).abs() < 1e-12);
        assert!(est.total_stderr > 0.0);

        let twin = BlockMap::new(vec![blocks[0].clone(), blocks[0].clone()]).unwrap();
        let e2 = block_ell_one_infty_mc(&twin, 10_000, 6).unwrap();
        assert_eq!(e2.per_block[0], e2.per_block[1]);
        assert!((e2.total - 2.0 * e2.per_block[0]).abs() < 1e-12);
        assert!(BlockMap::new(vec![mk(&mut r, 2), Matrix::zeros(2, 5)]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn trace_identity_on_feasible_strategies(seed in 0u64..100_000) {
            let mut r = rng::rng(seed);
            let (n, k, d) = (r.random_range(1..5), r.random_range(1..5), r.random_range(1..7));
            let m = random_functional(n, k, seed ^ 0xABCD);
            let vs = relax::random_feasible(n, k, d, &mut r);
            let c = twist_and_trace_check(&m, &vs).unwrap();
            prop_assert!(c.residual <= 1e-10);
            prop_assert!(c.v_norms.iter().all(|v| *v <= 1.0 + 1e-10));
        }
    }
}
