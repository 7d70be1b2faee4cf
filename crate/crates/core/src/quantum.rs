//! Fixed-dimension quantum strategies: see-saw lower bounds on the quantum
//! value of a state, and the reduction from a quantum strategy to indexed
//! families of vectors.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BellError, Result};
use crate::linalg::{self, CMatrix};
use crate::model::{self, pair, quantum_box, BellFunctional, Povm, PureState, QuantumStrategy};
use crate::relax::VectorStrategy;
use crate::rng;

/// POVM residual accepted after the final repair.
pub const CERTIFY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeesawConfig {
    pub rounds: usize,
    /// Dykstra iterations per projection.
    pub inner_steps: usize,
    pub step_size: f64,
    pub restarts: usize,
    pub seed: u64,
    pub tol: f64,
}

impl Default for SeesawConfig {
    fn default() -> Self {
        Self { rounds: 100, inner_steps: 200, step_size: 1.0, restarts: 10, seed: 0, tol: 1e-10 }
    }
}

impl SeesawConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 || self.inner_steps == 0 || self.restarts == 0 {
            return Err(BellError::OutOfRange("rounds, inner_steps and restarts must be positive".into()));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) || !(self.tol >= 1e-12) {
            return Err(BellError::OutOfRange("step_size must be positive and tol ≥ 1e-12".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeesawResult {
    /// `|⟨M, Q⟩|` re-evaluated on the repaired strategy.
    pub value: f64,
    pub pairing: f64,
    pub strategy: QuantumStrategy,
    /// Worst negative eigenvalue and completeness residual over all POVMs.
    pub psd_residual: f64,
    pub completeness_residual: f64,
    /// Signed objective of the winning run after each round.
    pub trace: Vec<f64>,
    pub restart: usize,
}

type Elements = Vec<CMatrix>;

/// Dykstra between `{E_a ⪰ 0}` and `{Σ_a E_a = I}`.
fn project_povm(mut e: Elements, steps: usize) -> Elements {
    let k = e.len();
    let dim = e[0].nrows();
    let shift = |e: &mut Elements| {
        let total = e.iter().fold(CMatrix::zeros(dim, dim), |acc, m| acc + m);
        let delta = (linalg::identity(dim) - total) * Complex64::new(1.0 / k as f64, 0.0);
        e.iter_mut().for_each(|m| *m += &delta);
    };
    let mut corr = vec![CMatrix::zeros(dim, dim); k];
    for _ in 0..steps {
        for (m, p) in e.iter_mut().zip(corr.iter_mut()) {
            let y = &*m + &*p;
            let clipped = linalg::psd_clip(&y);
            *p = &y - &clipped;
            *m = clipped;
        }
        shift(&mut e);
        let neg = e.iter().map(linalg::min_eigenvalue).fold(0.0f64, |a, v| a.max(-v));
        if neg < 1e-10 {
            break;
        }
    }
    e
}

/// Exact POVM from an almost-feasible one: PSD clip, then `S^{-1/2} E S^{-1/2}`.
fn repair_povm(e: &Elements) -> Elements {
    let clipped: Elements = e.iter().map(linalg::psd_clip).collect();
    linalg::normalize_povm(&clipped)
}

fn linear(grad: &[CMatrix], e: &[CMatrix]) -> f64 {
    grad.iter().zip(e).map(|(g, m)| g.iter().zip(m.iter()).map(|(p, q)| (p.conj() * q).re).sum::<f64>()).sum()
}

const MAX_HALVINGS: usize = 30;
const ASCENT_STEPS: usize = 50;

/// Maximizes `Re Σ_a ⟨G_a, E_a⟩` over POVMs by projected gradient ascent from `start`.
fn improve_povm(start: &Elements, grad: &[CMatrix], cfg: &SeesawConfig) -> Elements {
    let gnorm = grad.iter().map(|g| g.norm()).fold(0.0, f64::max);
    let mut e = start.clone();
    if gnorm == 0.0 {
        return e;
    }
    let mut current = linear(grad, &e);
    let mut step = cfg.step_size;
    for _ in 0..ASCENT_STEPS {
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let t = Complex64::new(step / gnorm, 0.0);
            let moved: Elements = e.iter().zip(grad).map(|(m, g)| m + g * t).collect();
            let cand = repair_povm(&project_povm(moved, cfg.inner_steps));
            let value = linear(grad, &cand);
            if value > current + cfg.tol * (1.0 + current.abs()) {
                let gain = value - current;
                e = cand;
                current = value;
                accepted = true;
                step *= 2.0;
                if gain < cfg.tol {
                    return e;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    e
}

/// `G_x^a = conj(D_α (Σ_{y,b} M F_y^b) D_α)` (Alice side), or the transpose roles for Bob.
fn party_gradient(m: &BellFunctional, other: &[Elements], alpha: &[f64], alice: bool, x: usize) -> Elements {
    let k = m.outputs();
    let dim = alpha.len();
    (0..k)
        .map(|a| {
            let mut acc = CMatrix::zeros(dim, dim);
            for (y, fy) in other.iter().enumerate() {
                for (b, f) in fy.iter().enumerate() {
                    let c = if alice { m.get(x, y, a, b) } else { m.get(y, x, b, a) };
                    if c != 0.0 {
                        acc += f * Complex64::new(c, 0.0);
                    }
                }
            }
            model::weight_by_state(&acc, alpha).map(|v| v.conj())
        })
        .collect()
}

fn to_strategy(state: &PureState, alice: &[Elements], bob: &[Elements]) -> QuantumStrategy {
    let wrap = |ps: &[Elements]| ps.iter().map(|e| Povm { elements: e.clone() }).collect();
    QuantumStrategy { state: state.clone(), alice: wrap(alice), bob: wrap(bob) }
}

fn signed_value(m: &BellFunctional, state: &PureState, alice: &[Elements], bob: &[Elements], sign: f64) -> f64 {
    let s = to_strategy(state, alice, bob);
    sign * pair(m, &quantum_box(&s).expect("repaired POVMs")).expect("shapes agree")
}

struct Run {
    signed: f64,
    alice: Vec<Elements>,
    bob: Vec<Elements>,
    trace: Vec<f64>,
}

fn run(m: &BellFunctional, state: &PureState, start: (Vec<Elements>, Vec<Elements>), sign: f64, cfg: &SeesawConfig) -> Run {
    let alpha = state.schmidt();
    let signed = m.combine(sign, &BellFunctional::zeros(m.inputs(), m.outputs()), 0.0).expect("same shape");
    let (mut alice, mut bob) = start;
    let mut value = signed_value(m, state, &alice, &bob, sign);
    let mut trace = vec![value];
    for _ in 0..cfg.rounds {
        for x in 0..m.inputs() {
            let g = party_gradient(&signed, &bob, alpha, true, x);
            alice[x] = improve_povm(&alice[x], &g, cfg);
        }
        for y in 0..m.inputs() {
            let g = party_gradient(&signed, &alice, alpha, false, y);
            bob[y] = improve_povm(&bob[y], &g, cfg);
        }
        let next = signed_value(m, state, &alice, &bob, sign);
        trace.push(next);
        let gain = next - value;
        value = next;
        if gain < cfg.tol {
            break;
        }
    }
    Run { signed: value, alice, bob, trace }
}

/// Computational-basis projectors, padded with zero operators when `K > n`.
fn computational_start(dim: usize, inputs: usize, outputs: usize) -> Vec<Elements> {
    vec![Povm::computational(dim, outputs).elements; inputs]
}

/// See-saw lower bound on `ω*_ρ(M)` with `ρ` the given pure state of dimension `dim`.
pub fn seesaw(m: &BellFunctional, dim: usize, state: &PureState, cfg: &SeesawConfig) -> Result<SeesawResult> {
    cfg.validate()?;
    if state.dim() != dim {
        return Err(BellError::Precondition(format!(
            "state dimension {} differs from requested {dim}",
            state.dim()
        )));
    }
    let (n, k) = (m.inputs(), m.outputs());
    let starts: Vec<(Vec<Elements>, Vec<Elements>)> = (0..cfg.restarts)
        .map(|r| {
            if r == 0 {
                (computational_start(dim, n, k), computational_start(dim, n, k))
            } else {
                let mut g = rng::rng(rng::substream(cfg.seed, r as u64));
                let mut draw = || (0..n).map(|_| linalg::random_povm(dim, k, &mut g)).collect::<Vec<_>>();
                let a = draw();
                (a, draw())
            }
        })
        .collect();

    let runs: Vec<(usize, Run)> = starts
        .into_par_iter()
        .enumerate()
        .flat_map_iter(|(r, s)| {
            [1.0, -1.0].into_iter().map(move |sign| (r, run(m, state, s.clone(), sign, cfg))).collect::<Vec<_>>()
        })
        .collect();

    let (restart, best) = runs
        .into_iter()
        .reduce(|acc, cur| if cur.1.signed > acc.1.signed { cur } else { acc })
        .expect("at least one restart");

    let alice: Vec<Elements> = best.alice.iter().map(repair_povm).collect();
    let bob: Vec<Elements> = best.bob.iter().map(repair_povm).collect();
    let mut psd = 0.0f64;
    let mut complete = 0.0f64;
    for e in alice.iter().chain(&bob) {
        let (neg, comp) = model::povm_residuals(e)?;
        psd = psd.max(neg);
        complete = complete.max(comp);
    }
    let residual = psd.max(complete);
    if residual > CERTIFY_TOL {
        return Err(BellError::CertificationFailed { residual });
    }
    let strategy = to_strategy(state, &alice, &bob);
    let pairing = pair(m, &quantum_box(&strategy)?)?;
    Ok(SeesawResult {
        value: pairing.abs(),
        pairing,
        strategy,
        psd_residual: psd,
        completeness_residual: complete,
        trace: best.trace,
        restart,
    })
}

/// Complex vector families `u^{a,i}_x`, `v^{b,i}_y` for every basis index `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexedVectorFamilies {
    pub dim: usize,
    /// `u[i][x][a]` and `v[i][y][b]`, each a vector of length `dim`.
    pub u: Vec<Vec<Vec<Vec<Complex64>>>>,
    pub v: Vec<Vec<Vec<Vec<Complex64>>>>,
    /// Averaging weights: `1/n` for the maximally entangled state, `α_i²` otherwise.
    pub weights: Vec<f64>,
    /// `Σ M Re⟨u^{a,i}, v^{b,i}⟩` per index.
    pub per_index: Vec<f64>,
    pub best_index: usize,
    /// Set when the state is not maximally entangled.
    pub diagnostic: bool,
}

fn cdot(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    u.iter().zip(v).map(|(p, q)| p.conj() * q).sum()
}

/// `Re ⊕ Im`, mapping `C^n` isometrically onto `R^{2n}`.
pub fn realify(u: &[Complex64]) -> Vec<f64> {
    u.iter().map(|c| c.re).chain(u.iter().map(|c| c.im)).collect()
}

impl IndexedVectorFamilies {
    /// `Σ_i w_i Σ M Re⟨u^{a,i}, v^{b,i}⟩`.
    pub fn weighted_pairing(&self) -> f64 {
        self.weights.iter().zip(&self.per_index).map(|(w, p)| w * p).sum()
    }

    /// Realified families at index `i` with `z = e_i ⊕ 0`.
    pub fn vector_strategy(&self, i: usize) -> Result<VectorStrategy> {
        if i >= self.dim {
            return Err(BellError::OutOfRange(format!("index {i} outside dimension {}", self.dim)));
        }
        let fam = |fs: &Vec<Vec<Vec<Complex64>>>| -> Vec<Vec<Vec<f64>>> {
            fs.iter().map(|f| f.iter().map(|w| realify(w)).collect()).collect()
        };
        let mut z = vec![0.0; 2 * self.dim];
        z[i] = 1.0;
        VectorStrategy::new(fam(&self.u[i]), fam(&self.v[i]), Some(z))
    }

    pub fn best_strategy(&self) -> Result<VectorStrategy> {
        self.vector_strategy(self.best_index)
    }
}

/// `u^{a,i}_x = conj(E_x^a)|i⟩`, `v^{b,i}_y = F_y^b|i⟩`.
///
/// For a state that is not maximally entangled this needs `diagnostic`, and
/// then uses `v^{b,i}_y = D_α F_y^b|i⟩ / α_i` with weights `α_i²`, which keeps
/// the marginal identity and the pairing identity but not the norm bound.
pub fn quantum_to_vectors(m: &BellFunctional, s: &QuantumStrategy, diagnostic: bool) -> Result<IndexedVectorFamilies> {
    if m.inputs() != s.inputs() || m.outputs() != s.outputs() {
        return Err(BellError::ScenarioMismatch {
            expected_n: m.inputs(),
            expected_k: m.outputs(),
            got_n: s.inputs(),
            got_k: s.outputs(),
        });
    }
    let n = s.dim();
    let maxent = s.state().is_maximally_entangled(1e-12);
    if !maxent && !diagnostic {
        return Err(BellError::Precondition(
            "quantum_to_vectors needs a maximally entangled state (enable diagnostic mode otherwise)".into(),
        ));
    }
    let alpha = s.state().schmidt();
    let weights: Vec<f64> =
        if maxent { vec![1.0 / n as f64; n] } else { alpha.iter().map(|a| a * a).collect() };
    let column = |e: &CMatrix, i: usize| -> Vec<Complex64> { (0..n).map(|r| e[(r, i)]).collect() };

    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for i in 0..n {
        u.push(
            s.alice()
                .iter()
                .map(|p| p.elements().iter().map(|e| column(e, i).iter().map(|c| c.conj()).collect()).collect())
                .collect::<Vec<Vec<Vec<Complex64>>>>(),
        );
        let scale = |r: usize| if maxent || alpha[i] == 0.0 { 1.0 } else { alpha[r] / alpha[i] };
        v.push(
            s.bob()
                .iter()
                .map(|p| {
                    p.elements()
                        .iter()
                        .map(|f| column(f, i).iter().enumerate().map(|(r, c)| c * scale(r)).collect())
                        .collect()
                })
                .collect::<Vec<Vec<Vec<Complex64>>>>(),
        );
    }

    let (nn, k) = (m.inputs(), m.outputs());
    let per_index: Vec<f64> = (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for x in 0..nn {
                for y in 0..nn {
                    for a in 0..k {
                        for b in 0..k {
                            let c = m.get(x, y, a, b);
                            if c != 0.0 {
                                acc += c * cdot(&u[i][x][a], &v[i][y][b]).re;
                            }
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let best_index = (0..n).fold(0, |best, i| if per_index[i].abs() > per_index[best].abs() { i } else { best });
    Ok(IndexedVectorFamilies { dim: n, u, v, weights, per_index, best_index, diagnostic: !maxent })
}

/// Largest marginal residual `‖Σ_a u^{a,i}_x - |i⟩‖` over all indices and families.
pub fn marginal_residual(f: &IndexedVectorFamilies) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..f.dim {
        for fam in f.u[i].iter().chain(&f.v[i]) {
            for r in 0..f.dim {
                let s: Complex64 = fam.iter().map(|w| w[r]).sum();
                let target = if r == i { 1.0 } else { 0.0 };
                worst = worst.max((s - target).norm());
            }
        }
    }
    worst
}
