//! Dimension-restricted vector relaxations of the quantum value.
//!
//! A [`VectorStrategy`] assigns real `d`-vectors `u_x^a`, `v_y^b`. In
//! [`Mode::OpN`] each family only needs `max_σ ‖Σ_a σ_a u_x^a‖ ≤ 1`; in
//! [`Mode::OpBar`] all families must also sum to one shared vector `z`.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{self, DeterministicStrategy};
use crate::error::{BellError, Result};
use crate::linalg;
use crate::model::BellFunctional;
use crate::rng;
use crate::signs::{self, Pattern, MAX_OUTPUTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    OpN,
    OpBar,
}

impl std::str::FromStr for Mode {
    type Err = BellError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "opn" => Ok(Mode::OpN),
            "opbar" => Ok(Mode::OpBar),
            other => Err(BellError::OutOfRange(format!("unknown mode {other:?} (expected opn|opbar)"))),
        }
    }
}

type Family = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorStrategy {
    dim: usize,
    u: Vec<Family>,
    v: Vec<Family>,
    z: Option<Vec<f64>>,
}

impl VectorStrategy {
    pub fn new(u: Vec<Family>, v: Vec<Family>, z: Option<Vec<f64>>) -> Result<Self> {
        let bad = |msg: String| Err(BellError::InvalidStrategy(msg));
        if u.is_empty() || u.len() != v.len() {
            return bad(format!("{} Alice inputs vs {} Bob inputs", u.len(), v.len()));
        }
        let k = u[0].len();
        if k == 0 {
            return bad("families must have at least one vector".into());
        }
        let dim = u[0][0].len();
        if dim == 0 {
            return bad("vector dimension must be positive".into());
        }
        for fam in u.iter().chain(&v) {
            if fam.len() != k {
                return bad(format!("family sizes differ ({} vs {k})", fam.len()));
            }
            if fam.iter().any(|w| w.len() != dim || w.iter().any(|c| !c.is_finite())) {
                return bad(format!("every vector must be finite with dimension {dim}"));
            }
        }
        if let Some(z) = &z {
            if z.len() != dim || z.iter().any(|c| !c.is_finite()) {
                return bad(format!("z must be finite with dimension {dim}"));
            }
        }
        Ok(Self { dim, u, v, z })
    }

    /// Zero vectors everywhere, no `z`.
    pub fn zeros(inputs: usize, outputs: usize, dim: usize) -> Self {
        let fam = vec![vec![0.0; dim]; outputs];
        Self { dim, u: vec![fam.clone(); inputs], v: vec![fam; inputs], z: None }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn inputs(&self) -> usize {
        self.u.len()
    }

    pub fn outputs(&self) -> usize {
        self.u[0].len()
    }

    pub fn u(&self) -> &[Family] {
        &self.u
    }

    pub fn v(&self) -> &[Family] {
        &self.v
    }

    pub fn z(&self) -> Option<&[f64]> {
        self.z.as_deref()
    }

    pub fn set_z(&mut self, z: Option<Vec<f64>>) {
        self.z = z;
    }

    /// The same strategy padded with zero coordinates up to `dim`.
    pub fn padded(&self, dim: usize) -> Result<Self> {
        if dim < self.dim {
            return Err(BellError::Precondition(format!(
                "cannot embed dimension {} into {dim}",
                self.dim
            )));
        }
        let pad = |w: &Vec<f64>| {
            let mut p = w.clone();
            p.resize(dim, 0.0);
            p
        };
        let fam = |fs: &[Family]| fs.iter().map(|f| f.iter().map(pad).collect()).collect();
        Ok(Self { dim, u: fam(&self.u), v: fam(&self.v), z: self.z.as_ref().map(pad) })
    }

    fn scale(&mut self, c: f64) {
        for w in self.u.iter_mut().chain(self.v.iter_mut()).flatten() {
            w.iter_mut().for_each(|t| *t *= c);
        }
        if let Some(z) = &mut self.z {
            z.iter_mut().for_each(|t| *t *= c);
        }
    }
}

/// Random strategy satisfying the shared-marginal constraint exactly and the
/// norm constraints after a uniform rescale.
pub fn random_feasible<R: rand::Rng + ?Sized>(inputs: usize, outputs: usize, dim: usize, rng: &mut R) -> VectorStrategy {
    let z = linalg::random_unit(dim, false, rng);
    let kf = outputs as f64;
    let fam = |rng: &mut R| -> Family {
        let mut f: Family = (0..outputs).map(|_| linalg::random_unit(dim, false, rng)).collect();
        let s = family_sum(&f, dim);
        for w in f.iter_mut() {
            w.iter_mut().zip(s.iter().zip(&z)).for_each(|(t, (si, zi))| *t -= (si - zi) / kf);
        }
        f
    };
    let u = (0..inputs).map(|_| fam(rng)).collect();
    let v = (0..inputs).map(|_| fam(rng)).collect();
    let vs = VectorStrategy { dim, u, v, z: Some(z) };
    repair(&vs, Mode::OpBar).expect("outputs within the enumeration limit").0
}

/// Vectors all parallel to `e_1` with the indicator magnitudes of a deterministic strategy.
pub fn embed_deterministic(s: &DeterministicStrategy, outputs: usize, dim: usize) -> Result<VectorStrategy> {
    if dim == 0 || outputs == 0 {
        return Err(BellError::OutOfRange("dimension and outputs must be positive".into()));
    }
    let family = |choice: usize| -> Family {
        (0..outputs)
            .map(|a| {
                let mut w = vec![0.0; dim];
                if a == choice {
                    w[0] = 1.0;
                }
                w
            })
            .collect()
    };
    let mut z = vec![0.0; dim];
    z[0] = 1.0;
    VectorStrategy::new(
        s.alice.iter().map(|&a| family(a)).collect(),
        s.bob.iter().map(|&b| family(b)).collect(),
        Some(z),
    )
}

/// Embedding of an optimal deterministic witness for `m`.
pub fn classical_embedding(m: &BellFunctional, dim: usize) -> Result<VectorStrategy> {
    let cv = classical::classical_value_exact(m)?;
    embed_deterministic(&cv.witness, m.outputs(), dim)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub mode: Mode,
    /// Largest `‖Σ_a σ_a w^a‖₂` over all families and sign patterns seen.
    pub worst_norm: f64,
    /// `max(0, worst_norm - 1)`.
    pub violation: f64,
    /// Largest `‖Σ_a w^a - z‖₂` (zero in `OpN` mode).
    pub marginal_residual: f64,
    pub feasible: bool,
    /// False when only a random subset of sign patterns was checked.
    pub certified: bool,
}

fn check_outputs(k: usize) -> Result<()> {
    if k > MAX_OUTPUTS {
        return Err(BellError::BudgetExceeded(format!(
            "K = {k} exceeds the sign-enumeration limit {MAX_OUTPUTS}; use the sampled check"
        )));
    }
    Ok(())
}

fn refs(family: &Family) -> Vec<&[f64]> {
    family.iter().map(Vec::as_slice).collect()
}

fn family_sum(family: &Family, dim: usize) -> Vec<f64> {
    let mut s = vec![0.0; dim];
    for w in family {
        s.iter_mut().zip(w).for_each(|(o, t)| *o += t);
    }
    s
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

fn marginal_residual(vs: &VectorStrategy, mode: Mode) -> Result<f64> {
    if mode == Mode::OpN {
        return Ok(0.0);
    }
    let z = vs
        .z
        .as_deref()
        .ok_or_else(|| BellError::InvalidStrategy("OpBar mode needs a shared vector z".into()))?;
    Ok(vs
        .u
        .iter()
        .chain(&vs.v)
        .map(|f| distance(&family_sum(f, vs.dim), z))
        .fold(0.0, f64::max))
}

/// Worst signed norm of every family, by full enumeration.
pub fn worst_signed_norm(vs: &VectorStrategy) -> Result<f64> {
    check_outputs(vs.outputs())?;
    Ok(vs
        .u
        .par_iter()
        .chain(vs.v.par_iter())
        .map(|f| signs::max_signed_norm(&refs(f)).0)
        .reduce(|| 0.0, f64::max))
}

fn verdict(mode: Mode, worst_norm: f64, marginal_residual: f64, tol: f64, certified: bool) -> Feasibility {
    let violation = (worst_norm - 1.0).max(0.0);
    Feasibility {
        mode,
        worst_norm,
        violation,
        marginal_residual,
        feasible: violation <= tol && marginal_residual <= tol,
        certified,
    }
}

/// Exact feasibility check over all `2^{K-1}` sign patterns per family.
pub fn check_feasible(vs: &VectorStrategy, mode: Mode, tol: f64) -> Result<Feasibility> {
    let worst = worst_signed_norm(vs)?;
    Ok(verdict(mode, worst, marginal_residual(vs, mode)?, tol, true))
}

/// Non-certifying check on `samples` random sign patterns per family, for large `K`.
pub fn check_feasible_sampled(
    vs: &VectorStrategy,
    mode: Mode,
    tol: f64,
    samples: usize,
    seed: u64,
) -> Result<Feasibility> {
    let mut rng = rng::rng(seed);
    let dim = vs.dim;
    let mut worst = 0.0f64;
    let mut w = vec![0.0; dim];
    for f in vs.u.iter().chain(&vs.v) {
        // All-plus pattern plus random ones.
        for s in 0..samples.max(1) {
            w.iter_mut().for_each(|t| *t = 0.0);
            for u in f {
                let sign = if s == 0 || rng.random::<bool>() { 1.0 } else { -1.0 };
                w.iter_mut().zip(u).for_each(|(o, t)| *o += sign * t);
            }
            worst = worst.max(linalg::norm2(&w));
        }
    }
    Ok(verdict(mode, worst, marginal_residual(vs, mode)?, tol, false))
}

fn check_shape(m: &BellFunctional, vs: &VectorStrategy) -> Result<()> {
    if m.inputs() != vs.inputs() || m.outputs() != vs.outputs() {
        return Err(BellError::ScenarioMismatch {
            expected_n: m.inputs(),
            expected_k: m.outputs(),
            got_n: vs.inputs(),
            got_k: vs.outputs(),
        });
    }
    Ok(())
}

/// `Σ_{x,y,a,b} M ⟨u_x^a, v_y^b⟩` without the absolute value.
pub fn bilinear(m: &BellFunctional, vs: &VectorStrategy) -> Result<f64> {
    check_shape(m, vs)?;
    let (n, k) = (m.inputs(), m.outputs());
    let mut total = 0.0;
    for x in 0..n {
        for y in 0..n {
            for a in 0..k {
                for b in 0..k {
                    let c = m.get(x, y, a, b);
                    if c != 0.0 {
                        total += c * linalg::dot(&vs.u[x][a], &vs.v[y][b]);
                    }
                }
            }
        }
    }
    Ok(total)
}

pub fn objective(m: &BellFunctional, vs: &VectorStrategy) -> Result<f64> {
    Ok(bilinear(m, vs)?.abs())
}

/// `G[x][a] = Σ_{y,b} M ⟨·, w_y^b⟩`, optionally with the roles transposed.
fn gradient(m: &BellFunctional, other: &[Family], transpose: bool, dim: usize) -> Vec<Family> {
    let (n, k) = (m.inputs(), m.outputs());
    (0..n)
        .map(|x| {
            (0..k)
                .map(|a| {
                    let mut g = vec![0.0; dim];
                    for (y, fam) in other.iter().enumerate() {
                        for (b, w) in fam.iter().enumerate() {
                            let c = if transpose { m.get(y, x, b, a) } else { m.get(x, y, a, b) };
                            if c != 0.0 {
                                g.iter_mut().zip(w).for_each(|(o, t)| *o += c * t);
                            }
                        }
                    }
                    g
                })
                .collect()
        })
        .collect()
}

fn pairing_with(grad: &[Family], fams: &[Family]) -> f64 {
    grad.iter()
        .zip(fams)
        .flat_map(|(g, f)| g.iter().zip(f))
        .map(|(p, q)| linalg::dot(p, q))
        .sum()
}

/// Projection of one family onto `{max_σ ‖Σ σ_a w^a‖ ≤ 1} ∩ {Σ_a w^a = z}`
/// (the second set only when `z` is given) by Dykstra's algorithm over the
/// violated sign patterns.
fn project_family(family: &mut Family, z: Option<&[f64]>, steps: usize) {
    let k = family.len();
    let dim = family[0].len();
    let kf = k as f64;
    let mut corrections: Vec<(Pattern, Vec<f64>)> = Vec::new();
    let mut w = vec![0.0; dim];
    for _ in 0..steps.max(1) {
        if let Some(z) = z {
            let s = family_sum(family, dim);
            for u in family.iter_mut() {
                u.iter_mut().zip(s.iter().zip(z)).for_each(|(t, (si, zi))| *t -= (si - zi) / kf);
            }
        }
        let mut active: Vec<Pattern> = Vec::new();
        signs::for_each_pattern(&refs(family), |p, sq| {
            if sq > 1.0 {
                active.push(p);
            }
        });
        let done = active.is_empty()
            && corrections.iter().all(|(_, c)| c.iter().all(|t| *t == 0.0))
            && z.is_none_or(|z| distance(&family_sum(family, dim), z) <= 1e-15);
        if done {
            break;
        }
        for (p, _) in &corrections {
            if !active.contains(p) {
                active.push(*p);
            }
        }
        let mut max_shift = 0.0f64;
        for p in active {
            let slot = match corrections.iter().position(|(q, _)| *q == p) {
                Some(i) => i,
                None => {
                    corrections.push((p, vec![0.0; dim]));
                    corrections.len() - 1
                }
            };
            let c = &mut corrections[slot].1;
            // Y = U + σ⊗c, then project Y onto C_σ.
            for (a, u) in family.iter_mut().enumerate() {
                let s = signs::sign(p, a);
                u.iter_mut().zip(c.iter()).for_each(|(t, ci)| *t += s * ci);
            }
            signs::signed_sum(&refs(family), p, &mut w);
            let norm = linalg::norm2(&w);
            let shrink = if norm > 1.0 { 1.0 / norm } else { 1.0 };
            for (ci, wi) in c.iter_mut().zip(&w) {
                *ci = (wi - wi * shrink) / kf;
            }
            for (a, u) in family.iter_mut().enumerate() {
                let s = signs::sign(p, a);
                u.iter_mut().zip(c.iter()).for_each(|(t, ci)| *t -= s * ci);
            }
            max_shift = max_shift.max(c.iter().fold(0.0f64, |m, t| m.max(t.abs())));
        }
        corrections.retain(|(_, c)| c.iter().any(|t| *t != 0.0));
        if max_shift < 1e-15 && z.is_none() {
            break;
        }
    }
    if let Some(z) = z {
        let s = family_sum(family, dim);
        for u in family.iter_mut() {
            u.iter_mut().zip(s.iter().zip(z)).for_each(|(t, (si, zi))| *t -= (si - zi) / kf);
        }
    }
}

/// Exact marginal projection followed by the uniform rescale by `max(1, worst norm)`.
pub fn repair(vs: &VectorStrategy, mode: Mode) -> Result<(VectorStrategy, f64)> {
    check_outputs(vs.outputs())?;
    let mut out = vs.clone();
    if mode == Mode::OpBar {
        let z = out
            .z
            .clone()
            .ok_or_else(|| BellError::InvalidStrategy("OpBar mode needs a shared vector z".into()))?;
        let kf = out.outputs() as f64;
        let dim = out.dim;
        for fam in out.u.iter_mut().chain(out.v.iter_mut()) {
            let s = family_sum(fam, dim);
            for u in fam.iter_mut() {
                u.iter_mut().zip(s.iter().zip(&z)).for_each(|(t, (si, zi))| *t -= (si - zi) / kf);
            }
        }
    } else {
        out.z = None;
    }
    let c = worst_signed_norm(&out)?.max(1.0);
    if c > 1.0 {
        out.scale(1.0 / c);
        // Guard against the last ulp; the scaled norm must not exceed one.
        let again = worst_signed_norm(&out)?;
        if again > 1.0 {
            out.scale(1.0 / again);
        }
    }
    Ok((out, c))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "strategy")]
pub enum Init {
    Random,
    Witness,
    Strategy(Box<VectorStrategy>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxConfig {
    pub restarts: usize,
    pub rounds: usize,
    pub step_size: f64,
    pub dykstra_steps: usize,
    pub seed: u64,
    pub tol: f64,
    /// Start of restart 0; later restarts start at random.
    pub init: Init,
}

impl Default for RelaxConfig {
    fn default() -> Self {
        Self { restarts: 4, rounds: 100, step_size: 0.5, dykstra_steps: 200, seed: 0, tol: 1e-10, init: Init::Witness }
    }
}

impl RelaxConfig {
    fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.rounds == 0 || self.dykstra_steps == 0 {
            return Err(BellError::OutOfRange("restarts, rounds and dykstra_steps must be positive".into()));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) || !(self.tol >= 1e-15) {
            return Err(BellError::OutOfRange("step_size must be positive and tol ≥ 1e-15".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxResult {
    /// Objective of the rescaled, exactly feasible strategy.
    pub value: f64,
    /// Objective before the final rescale.
    pub pre_rescale: f64,
    pub rescale: f64,
    pub strategy: VectorStrategy,
    pub feasibility: Feasibility,
    /// Best restart's signed objective after each round.
    pub trace: Vec<f64>,
    pub restart: usize,
}

fn random_strategy(inputs: usize, outputs: usize, dim: usize, mode: Mode, seed: u64) -> VectorStrategy {
    let mut rng = rng::rng(seed);
    let scale = 1.0 / outputs as f64;
    let fam = |rng: &mut rng::Rng| -> Family {
        (0..outputs)
            .map(|_| linalg::random_unit(dim, false, rng).into_iter().map(|t| t * scale).collect())
            .collect()
    };
    let u = (0..inputs).map(|_| fam(&mut rng)).collect();
    let v = (0..inputs).map(|_| fam(&mut rng)).collect();
    let z = (mode == Mode::OpBar).then(|| linalg::random_unit(dim, false, &mut rng));
    VectorStrategy { dim, u, v, z }
}

struct Run {
    signed: f64,
    strategy: VectorStrategy,
    trace: Vec<f64>,
}

fn project_all(fams: &mut [Family], z: Option<&[f64]>, steps: usize) {
    fams.par_iter_mut().for_each(|f| project_family(f, z, steps));
}

fn signed_objective(m: &BellFunctional, vs: &VectorStrategy, sign: f64) -> f64 {
    sign * bilinear(m, vs).expect("shape checked")
}

const MAX_HALVINGS: usize = 30;

/// Projected ascent on one side; returns whether a step was accepted.
fn side_step(
    m: &BellFunctional,
    vs: &mut VectorStrategy,
    sign: f64,
    side_u: bool,
    step: &mut f64,
    cfg: &RelaxConfig,
) -> bool {
    let current = signed_objective(m, vs, sign);
    let grad = if side_u { gradient(m, &vs.v, false, vs.dim) } else { gradient(m, &vs.u, true, vs.dim) };
    let gnorm = grad.iter().flatten().flatten().map(|t| t * t).sum::<f64>().sqrt();
    if gnorm == 0.0 {
        return false;
    }
    for _ in 0..MAX_HALVINGS {
        let t = sign * *step / gnorm;
        let mut cand = if side_u { vs.u.clone() } else { vs.v.clone() };
        for (f, g) in cand.iter_mut().zip(&grad) {
            for (w, gw) in f.iter_mut().zip(g) {
                w.iter_mut().zip(gw).for_each(|(o, d)| *o += t * d);
            }
        }
        project_all(&mut cand, vs.z.as_deref(), cfg.dykstra_steps);
        let value = sign * pairing_with(&grad, &cand);
        if value > current + cfg.tol * (1.0 + current.abs()) {
            if side_u {
                vs.u = cand;
            } else {
                vs.v = cand;
            }
            *step = (*step * 2.0).min(cfg.step_size * 4.0);
            return true;
        }
        *step *= 0.5;
    }
    *step = cfg.step_size;
    false
}

/// Re-estimates `z` from the family sums after a free ascent step on both sides.
fn z_step(m: &BellFunctional, vs: &mut VectorStrategy, sign: f64, step: f64, cfg: &RelaxConfig) -> bool {
    let current = signed_objective(m, vs, sign);
    let gu = gradient(m, &vs.v, false, vs.dim);
    let gv = gradient(m, &vs.u, true, vs.dim);
    let gnorm = gu.iter().chain(&gv).flatten().flatten().map(|t| t * t).sum::<f64>().sqrt();
    if gnorm == 0.0 {
        return false;
    }
    let t = sign * step / gnorm;
    let mut cand = vs.clone();
    for (fams, grad) in [(&mut cand.u, &gu), (&mut cand.v, &gv)] {
        for (f, g) in fams.iter_mut().zip(grad) {
            for (w, gw) in f.iter_mut().zip(g) {
                w.iter_mut().zip(gw).for_each(|(o, d)| *o += t * d);
            }
        }
        project_all(fams, None, cfg.dykstra_steps);
    }
    let count = (cand.u.len() + cand.v.len()) as f64;
    let mut z = vec![0.0; vs.dim];
    for f in cand.u.iter().chain(&cand.v) {
        z.iter_mut().zip(family_sum(f, vs.dim)).for_each(|(o, s)| *o += s / count);
    }
    project_all(&mut cand.u, Some(&z), cfg.dykstra_steps);
    project_all(&mut cand.v, Some(&z), cfg.dykstra_steps);
    cand.z = Some(z);
    if signed_objective(m, &cand, sign) > current + cfg.tol * (1.0 + current.abs()) {
        *vs = cand;
        true
    } else {
        false
    }
}

fn ascend(m: &BellFunctional, start: VectorStrategy, mode: Mode, sign: f64, cfg: &RelaxConfig) -> Run {
    let mut vs = start;
    let mut trace = vec![signed_objective(m, &vs, sign)];
    let (mut su, mut sv, mut sz) = (cfg.step_size, cfg.step_size, cfg.step_size);
    for _ in 0..cfg.rounds {
        let mut moved = side_step(m, &mut vs, sign, true, &mut su, cfg);
        moved |= side_step(m, &mut vs, sign, false, &mut sv, cfg);
        if mode == Mode::OpBar {
            if z_step(m, &mut vs, sign, sz, cfg) {
                moved = true;
            } else {
                sz = (sz * 0.5).max(1e-6);
            }
        }
        let value = signed_objective(m, &vs, sign);
        trace.push(value);
        if !moved {
            break;
        }
    }
    Run { signed: *trace.last().expect("nonempty"), strategy: vs, trace }
}

/// Makes a starting point feasible for `mode` (projection, then rescale).
fn prepare(vs: VectorStrategy, mode: Mode, cfg: &RelaxConfig) -> Result<VectorStrategy> {
    let mut vs = vs;
    if mode == Mode::OpBar && vs.z.is_none() {
        let count = (2 * vs.inputs()) as f64;
        let mut z = vec![0.0; vs.dim];
        for f in vs.u.iter().chain(&vs.v) {
            z.iter_mut().zip(family_sum(f, vs.dim)).for_each(|(o, s)| *o += s / count);
        }
        vs.z = Some(z);
    }
    if mode == Mode::OpN {
        vs.z = None;
    }
    if !check_feasible(&vs, mode, 0.0)?.feasible {
        let z = vs.z.clone();
        project_all(&mut vs.u, z.as_deref(), cfg.dykstra_steps);
        project_all(&mut vs.v, z.as_deref(), cfg.dykstra_steps);
    }
    Ok(repair(&vs, mode)?.0)
}

/// Heuristic maximization of `|Σ M ⟨u, v⟩|` over feasible vector strategies
/// in dimension `dim`; the returned strategy is exactly feasible.
pub fn optimize(m: &BellFunctional, dim: usize, mode: Mode, cfg: &RelaxConfig) -> Result<RelaxResult> {
    cfg.validate()?;
    check_outputs(m.outputs())?;
    if dim == 0 {
        return Err(BellError::OutOfRange("dimension must be positive".into()));
    }
    let first = match &cfg.init {
        Init::Random => random_strategy(m.inputs(), m.outputs(), dim, mode, rng::substream(cfg.seed, 0)),
        Init::Witness => classical_embedding(m, dim)?,
        Init::Strategy(s) => {
            check_shape(m, s)?;
            s.padded(dim)?
        }
    };
    let starts: Vec<VectorStrategy> = std::iter::once(Ok(first))
        .chain((1..cfg.restarts).map(|r| {
            Ok(random_strategy(m.inputs(), m.outputs(), dim, mode, rng::substream(cfg.seed, r as u64)))
        }))
        .map(|s: Result<VectorStrategy>| s.and_then(|s| prepare(s, mode, cfg)))
        .collect::<Result<_>>()?;

    let runs: Vec<(usize, Run)> = starts
        .into_par_iter()
        .enumerate()
        .flat_map_iter(|(r, s)| {
            [1.0, -1.0].into_iter().map(move |sign| (r, ascend(m, s.clone(), mode, sign, cfg))).collect::<Vec<_>>()
        })
        .collect();

    let mut best: Option<(usize, Run, VectorStrategy, f64, f64)> = None;
    for (r, run) in runs {
        let (repaired, c) = repair(&run.strategy, mode)?;
        let value = objective(m, &repaired)?;
        if best.as_ref().is_none_or(|b| value > b.3) {
            best = Some((r, run, repaired, value, c));
        }
    }
    let (restart, run, strategy, value, rescale) = best.expect("at least one restart");
    let feasibility = check_feasible(&strategy, mode, 1e-12)?;
    if !feasibility.feasible {
        return Err(BellError::CertificationFailed { residual: feasibility.violation.max(feasibility.marginal_residual) });
    }
    Ok(RelaxResult {
        value,
        pre_rescale: run.signed.abs(),
        rescale,
        strategy,
        feasibility,
        trace: run.trace,
        restart,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{deterministic_box, pair};
    use proptest::prelude::*;

    fn unit(dim: usize, i: usize) -> Vec<f64> {
        let mut e = vec![0.0; dim];
        e[i] = 1.0;
        e
    }

    fn random_functional(n: usize, k: usize, seed: u64) -> BellFunctional {
        let mut r = rng::rng(seed);
        BellFunctional::from_fn(n, k, |_, _, _, _| r.random_range(-1.0..1.0)).unwrap()
    }

    #[test]
    fn single_output_family() {
        let z = unit(3, 1);
        let vs = VectorStrategy::new(vec![vec![z.clone()]], vec![vec![z.clone()]], Some(z)).unwrap();
        let f = check_feasible(&vs, Mode::OpBar, 1e-12).unwrap();
        assert!(f.feasible && f.certified);
        assert_eq!(f.worst_norm, 1.0);
    }

    #[test]
    fn doubled_vector_is_infeasible() {
        let vs = VectorStrategy::new(
            vec![vec![vec![2.0, 0.0], vec![0.0, 0.0]]],
            vec![vec![vec![1.0, 0.0], vec![0.0, 0.0]]],
            None,
        )
        .unwrap();
        let f = check_feasible(&vs, Mode::OpN, 1e-12).unwrap();
        assert!(!f.feasible);
        assert_eq!(f.worst_norm, 2.0);
        assert_eq!(f.violation, 1.0);
    }

    #[test]
    fn orthogonal_families_vanish() {
        let m = random_functional(2, 2, 3);
        let fam = |i| vec![unit(4, i), unit(4, i + 1)];
        let vs = VectorStrategy::new(vec![fam(0), fam(0)], vec![fam(2), fam(2)], None).unwrap();
        assert_eq!(objective(&m, &vs).unwrap(), 0.0);
        assert_eq!(objective(&BellFunctional::zeros(2, 2), &vs).unwrap(), 0.0);
    }

    #[test]
    fn shape_and_budget_errors() {
        let vs = VectorStrategy::zeros(2, 2, 2);
        assert!(matches!(objective(&BellFunctional::zeros(3, 2), &vs), Err(BellError::ScenarioMismatch { .. })));
        let big = VectorStrategy::zeros(1, 25, 2);
        assert!(matches!(check_feasible(&big, Mode::OpN, 1e-12), Err(BellError::BudgetExceeded(_))));
        let sampled = check_feasible_sampled(&big, Mode::OpN, 1e-12, 64, 1).unwrap();
        assert!(sampled.feasible && !sampled.certified);
        assert!(check_feasible(&vs, Mode::OpBar, 1e-12).is_err());
    }

    #[test]
    fn witness_embedding_reproduces_classical_value() {
        for seed in 0..20 {
            let m = random_functional(3, 3, seed);
            let cv = classical::classical_value_exact(&m).unwrap();
            let vs = embed_deterministic(&cv.witness, 3, 2).unwrap();
            assert!(check_feasible(&vs, Mode::OpBar, 0.0).unwrap().feasible);
            let det = deterministic_box(&cv.witness.alice, &cv.witness.bob, 3).unwrap();
            assert!((objective(&m, &vs).unwrap() - pair(&m, &det).unwrap().abs()).abs() <= 1e-12);
            assert!((objective(&m, &vs).unwrap() - cv.value).abs() <= 1e-12);
        }
    }

    #[test]
    fn trivial_scenario_reaches_one() {
        let m = BellFunctional::new(1, 1, vec![1.0]).unwrap();
        for dim in [1, 3] {
            for init in [Init::Random, Init::Witness] {
                let cfg = RelaxConfig { init, ..RelaxConfig::default() };
                let r = optimize(&m, dim, Mode::OpBar, &cfg).unwrap();
                assert!((r.value - 1.0).abs() < 1e-9, "{}", r.value);
            }
        }
    }

    #[test]
    fn chsh_opbar_beats_classical() {
        let m = BellFunctional::chsh();
        let r = optimize(&m, 2, Mode::OpBar, &RelaxConfig::default()).unwrap();
        assert!(r.value >= 0.75 - 1e-12, "{}", r.value);
        assert!(r.feasibility.feasible && r.feasibility.violation <= 1e-12);
    }

    #[test]
    fn optimize_outputs_are_feasible_and_monotone() {
        for (seed, mode) in [(1, Mode::OpN), (2, Mode::OpBar), (3, Mode::OpBar)] {
            let m = random_functional(3, 3, seed);
            let cfg = RelaxConfig { seed, restarts: 3, rounds: 40, ..RelaxConfig::default() };
            let r = optimize(&m, 3, mode, &cfg).unwrap();
            assert!(check_feasible(&r.strategy, mode, 1e-12).unwrap().feasible);
            assert!(r.value <= r.pre_rescale + 1e-12);
            assert!(r.trace.windows(2).all(|w| w[1] >= w[0] - 1e-9));
            let omega = classical::classical_value_exact(&m).unwrap().value;
            assert!(r.value >= omega - 1e-9, "{} < {omega}", r.value);
        }
    }

    #[test]
    fn optimize_is_deterministic() {
        let m = random_functional(2, 3, 9);
        let cfg = RelaxConfig { seed: 5, init: Init::Random, ..RelaxConfig::default() };
        let a = optimize(&m, 2, Mode::OpBar, &cfg).unwrap();
        let b = optimize(&m, 2, Mode::OpBar, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn projection_lands_in_the_feasible_set() {
        let mut r = rng::rng(4);
        let mut fam: Family = (0..4).map(|_| (0..3).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let z = vec![0.3, -0.2, 0.1];
        project_family(&mut fam, Some(&z), 500);
        let vs = VectorStrategy::new(vec![fam.clone()], vec![fam], Some(z)).unwrap();
        let f = check_feasible(&vs, Mode::OpBar, 1e-8).unwrap();
        assert!(f.feasible, "{f:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn repair_is_exactly_feasible(seed in 0u64..10_000, k in 1usize..5, d in 1usize..4) {
            let mut vs = random_strategy(2, k, d, Mode::OpBar, seed);
            vs.scale(3.0);
            let (fixed, c) = repair(&vs, Mode::OpBar).unwrap();
            prop_assert!(c >= 1.0);
            let f = check_feasible(&fixed, Mode::OpBar, 1e-12).unwrap();
            prop_assert!(f.feasible, "{:?}", f);
        }
    }
}
