//! End-to-end verification suite and bound summaries.
//!
//! [`verify_suite`] runs every identity and inequality check in a fixed order
//! and returns a [`Report`] that serializes to JSON lines, one check per line
//! followed by a summary object. Each check draws from its own labeled RNG
//! substream, so the report is byte-for-byte reproducible for a given seed.

use std::f64::consts::PI;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::classical::{self, MarginalFamily};
use crate::error::{BellError, Result};
use crate::kv::{self, KvGame};
use crate::model::{pair, quantum_box, BellFunctional, ProbBox, PureState, QuantumStrategy};
use crate::norms::{self, Constant, Matrix, Target};
use crate::quantum::{self, SeesawConfig};
use crate::relax::{self, Init, Mode, RelaxConfig};
use crate::rng;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const SUITE: &str = "bell-verify";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Small,
    Full,
}

impl std::str::FromStr for Scale {
    type Err = BellError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "small" => Ok(Scale::Small),
            "full" => Ok(Scale::Full),
            other => Err(BellError::OutOfRange(format!("unknown scale {other:?} (expected small|full)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    ReportOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "relation", rename_all = "snake_case")]
pub enum Expected {
    Equal { value: f64 },
    AtMost { value: f64 },
    AtLeast { value: f64 },
    Within { lo: f64, hi: f64 },
}

impl Expected {
    fn holds(self, measured: f64, tol: f64) -> bool {
        match self {
            Expected::Equal { value } => (measured - value).abs() <= tol,
            Expected::AtMost { value } => measured <= value + tol,
            Expected::AtLeast { value } => measured >= value - tol,
            Expected::Within { lo, hi } => measured >= lo - tol && measured <= hi + tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub id: String,
    /// Short name of the identity or inequality being checked.
    pub anchor: String,
    pub status: Status,
    /// `None` when the check could not be evaluated.
    pub measured: Option<f64>,
    pub expected: Expected,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    pub fn new(id: &str, anchor: &str, measured: f64, expected: Expected, tolerance: f64) -> Self {
        let status = if measured.is_finite() && expected.holds(measured, tolerance) { Status::Pass } else { Status::Fail };
        Self {
            id: id.into(),
            anchor: anchor.into(),
            status,
            measured: measured.is_finite().then_some(measured),
            expected,
            tolerance,
            note: None,
        }
    }

    pub fn report_only(id: &str, anchor: &str, measured: f64, expected: Expected, note: &str) -> Self {
        Self {
            id: id.into(),
            anchor: anchor.into(),
            status: Status::ReportOnly,
            measured: measured.is_finite().then_some(measured),
            expected,
            tolerance: 0.0,
            note: Some(note.into()),
        }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    fn errored(id: &str, anchor: &str, err: &BellError) -> Self {
        Self {
            id: id.into(),
            anchor: anchor.into(),
            status: Status::Fail,
            measured: None,
            expected: Expected::Equal { value: 0.0 },
            tolerance: 0.0,
            note: Some(format!("error: {err}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub suite: String,
    pub scale: Scale,
    pub seed: u64,
    pub version: String,
    pub total: usize,
    pub pass: usize,
    pub fail: usize,
    pub report_only: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub suite: String,
    pub scale: Scale,
    pub seed: u64,
    pub version: String,
    pub checks: Vec<Check>,
}

impl Report {
    fn count(&self, s: Status) -> usize {
        self.checks.iter().filter(|c| c.status == s).count()
    }

    pub fn summary(&self) -> Summary {
        Summary {
            suite: self.suite.clone(),
            scale: self.scale,
            seed: self.seed,
            version: self.version.clone(),
            total: self.checks.len(),
            pass: self.count(Status::Pass),
            fail: self.count(Status::Fail),
            report_only: self.count(Status::ReportOnly),
        }
    }

    pub fn all_passed(&self) -> bool {
        self.count(Status::Fail) == 0
    }

    pub fn get(&self, id: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.id == id)
    }

    /// One JSON object per check, then `{"summary": ...}`; newline terminated.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&serde_json::to_string(c).expect("check serializes"));
            out.push('\n');
        }
        let summary = serde_json::json!({ "summary": self.summary() });
        out.push_str(&summary.to_string());
        out.push('\n');
        out
    }
}

/// Deliberate defects injected into the suite to confirm that checks can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fixture {
    #[default]
    None,
    /// The KV canary uses answer indices in place of coset bitstrings.
    CorruptKvAnswers,
}

struct Sizes {
    bilinearity: usize,
    decompositions: usize,
    strategies: usize,
    relax_functionals: usize,
    embeddings: usize,
    trace_instances: usize,
    ell_samples: usize,
    concentration_samples: usize,
    block_samples: usize,
}

impl Sizes {
    fn of(scale: Scale) -> Self {
        match scale {
            Scale::Small => Self {
                bilinearity: 50,
                decompositions: 1000,
                strategies: 50,
                relax_functionals: 3,
                embeddings: 50,
                trace_instances: 100,
                ell_samples: 1_000_000,
                concentration_samples: 20_000,
                block_samples: 100_000,
            },
            Scale::Full => Self {
                bilinearity: 500,
                decompositions: 10_000,
                strategies: 200,
                relax_functionals: 10,
                embeddings: 200,
                trace_instances: 1000,
                ell_samples: 4_000_000,
                concentration_samples: 100_000,
                block_samples: 1_000_000,
            },
        }
    }
}

fn random_functional(n: usize, k: usize, r: &mut rng::Rng) -> BellFunctional {
    BellFunctional::from_fn(n, k, |_, _, _, _| r.random_range(-1.0..1.0)).expect("finite coefficients")
}

fn sub(seed: u64, label: &str) -> rng::Rng {
    rng::rng(rng::labeled(seed, label))
}

const EQ0: Expected = Expected::Equal { value: 0.0 };

fn model_checks(seed: u64, sz: &Sizes) -> Result<Vec<Check>> {
    let mut r = sub(seed, "model/bilinearity");
    let mut worst = 0.0f64;
    for _ in 0..sz.bilinearity {
        let (n, k) = (r.random_range(1..4), r.random_range(1..4));
        let m = random_functional(n, k, &mut r);
        let p1 = quantum_box(&QuantumStrategy::random(PureState::random(2, &mut r), n, k, &mut r))?;
        let p2 = quantum_box(&QuantumStrategy::random(PureState::random(3, &mut r), n, k, &mut r))?;
        let t: f64 = r.random_range(0.0..1.0);
        let mixed = pair(&m, &p1.mix(t, &p2)?)?;
        worst = worst.max((mixed - (t * pair(&m, &p1)? + (1.0 - t) * pair(&m, &p2)?)).abs());
    }
    let zero = pair(&BellFunctional::zeros(3, 2), &ProbBox::uniform(3, 2))?;
    Ok(vec![
        Check::new("model.bilinearity", "pairing-bilinear", worst, EQ0, 1e-12),
        Check::new("model.zero_functional", "pairing-bilinear", zero, EQ0, 0.0),
    ])
}

fn classical_checks(seed: u64, sz: &Sizes) -> Result<Vec<Check>> {
    let chsh = classical::classical_value_exact(&BellFunctional::chsh())?.value;
    let zero = classical::classical_value_exact(&BellFunctional::zeros(2, 2))?.value;
    let mut r = sub(seed, "classical/decomposition");
    let (mut recon, mut norm_gap, mut outside) = (0.0f64, 0.0f64, 0usize);
    for _ in 0..sz.decompositions {
        let (n, k) = (r.random_range(1..7), r.random_range(1..7));
        let fam = MarginalFamily::random_admissible(n, k, &mut r);
        let d = classical::decompose_marginal(&fam)?;
        recon = recon.max(d.reconstruction_residual(&fam));
        norm_gap = norm_gap.max((d.lambda.abs() + d.mu.abs() - fam.lambda_norm()).abs());
        outside += usize::from(!(d.p1.is_stochastic(1e-12) && d.p2.is_stochastic(1e-12)));
    }
    Ok(vec![
        Check::new("classical.chsh", "classical-value", chsh, Expected::Equal { value: 0.75 }, 0.0),
        Check::new("classical.zero_functional", "classical-value", zero, EQ0, 0.0),
        Check::new("classical.decomposition_reconstruction", "marginal-decomposition", recon, EQ0, 1e-12),
        Check::new("classical.decomposition_membership", "marginal-decomposition", outside as f64, EQ0, 0.0),
        Check::new("classical.decomposition_norm", "marginal-decomposition", norm_gap, EQ0, 1e-12),
    ])
}

fn kv_structure_checks() -> Result<Vec<Check>> {
    let mut bad_partition = 0usize;
    let mut vnm = 0.0f64;
    for l in 1..=4 {
        let g = KvGame::build(l, 0.1)?;
        let n = g.n();
        let mut seen = vec![0u8; 1 << n];
        for coset in g.cosets() {
            bad_partition += usize::from(coset.len() != n);
            coset.iter().for_each(|&w| seen[w as usize] += 1);
        }
        bad_partition += seen.iter().filter(|&&c| c != 1).count();
        if l >= 2 {
            for coset in g.cosets() {
                let vs: Vec<Vec<f64>> = coset.iter().map(|&w| g.measurement_vector(w, n)).collect();
                let mut completeness = vec![0.0; n * n];
                for (a, u) in vs.iter().enumerate() {
                    for (b, w) in vs.iter().enumerate() {
                        let want = if a == b { 1.0 } else { 0.0 };
                        vnm = vnm.max((crate::linalg::dot(u, w) - want).abs());
                    }
                    for i in 0..n {
                        for j in 0..n {
                            completeness[i * n + j] += u[i] * u[j];
                        }
                    }
                }
                for i in 0..n {
                    for j in 0..n {
                        let want = if i == j { 1.0 } else { 0.0 };
                        vnm = vnm.max((completeness[i * n + j] - want).abs());
                    }
                }
            }
        }
    }
    Ok(vec![
        Check::new("kv.coset_partition", "kv-cosets", bad_partition as f64, EQ0, 0.0),
        Check::new("kv.vnm_structure", "kv-von-neumann-measurement", vnm, EQ0, 1e-12),
    ])
}

fn kv_value_checks(seed: u64, fixture: Fixture) -> Result<Vec<Check>> {
    let mut r = sub(seed, "kv/closed-form");
    let mut worst = 0.0f64;
    for l in [2, 3] {
        let n = 1usize << l;
        let random = PureState::random(n, &mut r);
        for eta in [0.0, 0.1, 0.25, 0.4] {
            let g = KvGame::build(l, eta)?;
            for state in [PureState::maximally_entangled(n), PureState::product(n), random.clone()] {
                let closed = kv::value_closed_form(state.schmidt(), n, eta)?;
                let direct = g.value_direct(&g.quantum_strategy(state)?)?;
                worst = worst.max((closed - direct).abs());
            }
        }
    }
    let mut out = vec![Check::new("kv.closed_form_vs_direct", "kv-quantum-value", worst, EQ0, 1e-10)];
    for eta in [0.1, 0.25] {
        let g = KvGame::build(2, eta)?;
        let m = match fixture {
            Fixture::None => g.functional(false)?,
            Fixture::CorruptKvAnswers => g.functional_with_index_answers()?,
        };
        let omega = classical::classical_value_exact(&m)?.value;
        let bound = kv::classical_upper_bound(4, eta)?;
        out.push(Check::new(
            &format!("kv.hypercontractive_eta_{eta}"),
            "kv-classical-bound",
            omega,
            Expected::AtMost { value: bound },
            0.0,
        ));
    }
    let c = norms::SHARP_C.value.expect("pinned");
    let mut shape_margin = f64::INFINITY;
    for (n, eta) in [(4usize, 0.25), (8, kv::default_eta(8)?)] {
        for state in [PureState::maximally_entangled(n), PureState::product(n), PureState::random(n, &mut r)] {
            let ratio = kv::value_closed_form(state.schmidt(), n, eta)? / kv::classical_upper_bound(n, eta)?;
            let l1: f64 = state.schmidt().iter().sum();
            let shape = c * (1.0 + 4.0 * (l1 * l1 - 1.0) / (n as f64).ln().powi(2));
            shape_margin = shape_margin.min(ratio - shape);
        }
    }
    out.push(
        Check::new("kv.violation_ratio_shape", "kv-violation-ratio", shape_margin, Expected::AtLeast { value: 0.0 }, 0.0)
            .with_note("minimum of ratio minus C(1+4(‖α‖₁²-1)/ln²n) with C = e^-4"),
    );
    Ok(out)
}

fn quantum_checks(seed: u64, sz: &Sizes) -> Result<Vec<Check>> {
    let cfg = SeesawConfig { restarts: 20, seed: rng::labeled(seed, "quantum/seesaw"), ..SeesawConfig::default() };
    let chsh = quantum::seesaw(&BellFunctional::chsh(), 2, &PureState::maximally_entangled(2), &cfg)?;
    let monotone = chsh.trace.windows(2).map(|w| w[0] - w[1]).fold(0.0f64, f64::max);
    let zero = quantum::seesaw(
        &BellFunctional::zeros(2, 2),
        2,
        &PureState::maximally_entangled(2),
        &SeesawConfig { restarts: 2, ..cfg.clone() },
    )?;

    let mut r = sub(seed, "quantum/to-vectors");
    let (mut infeasible, mut pairing, mut best_gap) = (0usize, 0.0f64, 0.0f64);
    for _ in 0..sz.strategies {
        let (n, nn, k) = (r.random_range(1..5), r.random_range(1..4), r.random_range(1..4));
        let s = QuantumStrategy::random(PureState::maximally_entangled(n), nn, k, &mut r);
        let m = random_functional(nn, k, &mut r);
        let fam = quantum::quantum_to_vectors(&m, &s, false)?;
        let direct = pair(&m, &quantum_box(&s)?)?;
        pairing = pairing.max((fam.weighted_pairing() - direct).abs());
        best_gap = best_gap.max(direct.abs() - fam.per_index[fam.best_index].abs());
        for i in 0..n {
            let f = relax::check_feasible(&fam.vector_strategy(i)?, Mode::OpBar, 1e-10)?;
            infeasible += usize::from(!f.feasible);
        }
    }
    Ok(vec![
        Check::new("quantum.seesaw_chsh", "seesaw-lower-bound", chsh.value, Expected::AtLeast { value: 0.8535 }, 0.0)
            .with_note("target (2+√2)/4"),
        Check::new("quantum.seesaw_monotone", "seesaw-lower-bound", monotone, Expected::AtMost { value: 0.0 }, 1e-9),
        Check::new(
            "quantum.seesaw_feasibility",
            "seesaw-lower-bound",
            chsh.psd_residual.max(chsh.completeness_residual),
            EQ0,
            1e-8,
        ),
        Check::new("quantum.seesaw_zero_functional", "seesaw-lower-bound", zero.value, EQ0, 0.0),
        Check::new("quantum.vectors_feasible", "quantum-to-vectors", infeasible as f64, EQ0, 0.0),
        Check::new("quantum.vectors_pairing", "quantum-to-vectors", pairing, EQ0, 1e-10),
        Check::new("quantum.vectors_best_index", "quantum-to-vectors", best_gap, Expected::AtMost { value: 0.0 }, 1e-12),
    ])
}

/// `n / sqrt(ln n)` for `n ≥ 2`.
pub fn envelope(n: usize) -> Option<f64> {
    (n >= 2).then(|| n as f64 / (n as f64).ln().sqrt())
}

fn relax_checks(seed: u64, sz: &Sizes) -> Result<Vec<Check>> {
    let mut r = sub(seed, "relax/certification");
    let mut worst = 0.0f64;
    let mut below_start = 0.0f64;
    for i in 0..sz.relax_functionals {
        let m = random_functional(3, 3, &mut r);
        let mode = if i % 2 == 0 { Mode::OpBar } else { Mode::OpN };
        let cfg = RelaxConfig { restarts: 2, rounds: 30, seed: r.random(), ..RelaxConfig::default() };
        let res = relax::optimize(&m, 3, mode, &cfg)?;
        worst = worst.max(res.feasibility.violation).max(res.feasibility.marginal_residual);
        let omega = classical::classical_value_exact(&m)?.value;
        below_start = below_start.max(omega - res.value);
    }

    let g = KvGame::build(2, 0.25)?;
    let m = g.functional(false)?;
    let s = g.quantum_strategy(PureState::maximally_entangled(4))?;
    let start = quantum::quantum_to_vectors(&m, &s, false)?.best_strategy()?;
    let cfg = RelaxConfig {
        restarts: 1,
        rounds: 30,
        seed: rng::labeled(seed, "relax/kv"),
        init: Init::Strategy(Box::new(start)),
        ..RelaxConfig::default()
    };
    let kv_run = relax::optimize(&m, 8, Mode::OpBar, &cfg)?;
    worst = worst.max(kv_run.feasibility.violation).max(kv_run.feasibility.marginal_residual);
    let omega_kv = classical::classical_value_exact(&m)?.value;

    let mut r = sub(seed, "relax/embedding");
    let mut embed = 0.0f64;
    for _ in 0..sz.embeddings {
        let (n, k, d) = (r.random_range(1..4), r.random_range(1..4), r.random_range(1..4));
        let m = random_functional(n, k, &mut r);
        let cv = classical::classical_value_exact(&m)?;
        let vs = relax::embed_deterministic(&cv.witness, k, d)?;
        if !relax::check_feasible(&vs, Mode::OpBar, 0.0)?.feasible {
            embed = f64::INFINITY;
        }
        embed = embed.max((relax::objective(&m, &vs)? - cv.value).abs());
    }
    Ok(vec![
        Check::new("relax.certified_feasible", "relaxation-feasibility", worst, EQ0, 1e-12),
        Check::new("relax.not_below_witness", "relaxation-feasibility", below_start, Expected::AtMost { value: 0.0 }, 1e-12),
        Check::new("relax.kv_quantum_start", "relaxation-feasibility", kv_run.value, Expected::AtLeast { value: 0.4375 }, 0.0),
        Check::new("relax.classical_embedding", "relaxation-feasibility", embed, EQ0, 1e-12),
        Check::report_only(
            "relax.kv_ratio_to_classical",
            "unbounded-violation-envelope",
            kv_run.value / omega_kv,
            Expected::AtMost { value: envelope(8).expect("n ≥ 2") },
            "ratio value/ω at d = 8 against n/sqrt(ln n); the constant D is unknown",
        ),
    ])
}

fn trace_checks(seed: u64, sz: &Sizes) -> Result<Vec<Check>> {
    let mut r = sub(seed, "norms/trace");
    let (mut residual, mut vnorm, mut control) = (0.0f64, 0.0f64, f64::INFINITY);
    for _ in 0..sz.trace_instances {
        let (n, k, d) = (r.random_range(1..5), r.random_range(2..5), r.random_range(1..7));
        let m = random_functional(n.max(2), k, &mut r);
        let vs = relax::random_feasible(n.max(2), k, d, &mut r);
        let c = norms::twist_and_trace_check(&m, &vs)?;
        residual = residual.max(c.residual);
        vnorm = vnorm.max(c.v_norms.iter().copied().fold(0.0, f64::max));
        let broken = norms::break_marginal(&m, &vs, 0.5)?;
        control = control.min(norms::twist_trace_residual(&m, &broken)?.residual);
    }
    let zero = norms::twist_and_trace_check(&BellFunctional::zeros(2, 2), &relax::classical_embedding(&BellFunctional::zeros(2, 2), 2)?)?;
    Ok(vec![
        Check::new("norms.trace_identity", "twist-trace-identity", residual, EQ0, 1e-10),
        Check::new("norms.twist_v_norms", "twist-trace-identity", vnorm, Expected::AtMost { value: 1.0 }, 1e-10),
        Check::new("norms.trace_negative_control", "twist-trace-identity", control, Expected::AtLeast { value: 0.01 }, 0.0)
            .with_note("Bob marginal broken; the identity must fail"),
        Check::new("norms.trace_zero_functional", "twist-trace-identity", zero.residual, EQ0, 0.0),
    ])
}

fn ell_checks(seed: u64, sz: &Sizes) -> Result<Vec<Check>> {
    let exact = (1.0 + 2.0 / PI).sqrt();
    let est = norms::ell_norm_mc(&Matrix::identity(2), Target::Linf, sz.ell_samples, rng::labeled(seed, "norms/ell"))?;
    let mut out = vec![Check::new(
        "norms.ell_identity_2",
        "gaussian-ell-norm",
        est.estimate,
        Expected::Equal { value: exact },
        0.005 * exact,
    )
    .with_note(format!("stderr {:.3e}", est.stderr))];
    for n in [64usize, 256, 1024] {
        let id = Matrix::identity(n);
        let c = norms::concentration_ratio(&id, &id, sz.concentration_samples, rng::labeled(seed, &format!("norms/concentration/{n}")))?;
        out.push(Check::new(
            &format!("norms.concentration_{n}"),
            "concentration-ratio",
            c.ratio,
            Expected::Within { lo: 0.4, hi: 1.2 },
            0.0,
        ));
    }
    let mut r = sub(seed, "norms/blocks");
    let blocks: Vec<Matrix> = [2usize, 3, 1]
        .iter()
        .map(|&rows| {
            let dense: Vec<Vec<f64>> = (0..rows).map(|_| (0..4).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
            Matrix::from_rows(&dense)
        })
        .collect::<Result<_>>()?;
    let b = norms::block_ell_one_infty_mc(&norms::BlockMap::new(blocks)?, sz.block_samples, rng::labeled(seed, "norms/block-mc"))?;
    out.push(Check::new("norms.block_additivity", "block-additivity", b.additivity_residual, EQ0, 0.0));
    Ok(out)
}

fn bound_checks() -> Vec<Check> {
    let b = bounds(&PureState::maximally_entangled(16));
    vec![
        Check::new("norms.projective_maxent_16", "projective-norm-pure", b.upper_projective, Expected::Equal { value: 16.0 }, 1e-9),
        Check::new(
            "norms.sharp_lower_maxent_16",
            "sharp-lower-bound",
            b.lower_sharp_raw,
            Expected::Equal { value: 16.0 / 16f64.ln().powi(2) },
            1e-9,
        ),
        Check::report_only(
            "bounds.maxent_envelope_16",
            "unbounded-violation-envelope",
            b.maxent_envelope.unwrap_or(f64::NAN),
            Expected::AtMost { value: 16.0 },
            "n/sqrt(ln n) up to the unknown constant D",
        ),
    ]
}

fn run(out: &mut Vec<Check>, id: &str, anchor: &str, f: impl FnOnce() -> Result<Vec<Check>>) {
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)) {
        Ok(Ok(checks)) => out.extend(checks),
        Ok(Err(e)) => out.push(Check::errored(id, anchor, &e)),
        Err(_) => out.push(Check::errored(id, anchor, &BellError::NumericConsistency("check panicked".into()))),
    }
}

pub fn verify_suite(scale: Scale, seed: u64) -> Report {
    verify_suite_with(scale, seed, Fixture::None)
}

pub fn verify_suite_with(scale: Scale, seed: u64, fixture: Fixture) -> Report {
    let sz = Sizes::of(scale);
    let mut checks = Vec::new();
    run(&mut checks, "model", "pairing-bilinear", || model_checks(seed, &sz));
    run(&mut checks, "classical", "classical-value", || classical_checks(seed, &sz));
    run(&mut checks, "kv.structure", "kv-cosets", kv_structure_checks);
    run(&mut checks, "kv.values", "kv-quantum-value", || kv_value_checks(seed, fixture));
    run(&mut checks, "quantum", "seesaw-lower-bound", || quantum_checks(seed, &sz));
    run(&mut checks, "relax", "relaxation-feasibility", || relax_checks(seed, &sz));
    run(&mut checks, "norms.trace", "twist-trace-identity", || trace_checks(seed, &sz));
    run(&mut checks, "norms.ell", "gaussian-ell-norm", || ell_checks(seed, &sz));
    checks.extend(bound_checks());
    Report { suite: SUITE.into(), scale, seed, version: VERSION.into(), checks }
}

/// Upper and lower bounds on the largest violation attainable with a pure state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bounds {
    pub dim: usize,
    /// `(Σ α_i)²`.
    pub upper_projective: f64,
    pub lower_sharp_raw: f64,
    pub lower_sharp_with_c: f64,
    pub sharp_k: usize,
    pub single_term_convention: bool,
    /// `n / sqrt(ln n)`, reported only (unknown constant).
    pub maxent_envelope: Option<f64>,
    pub constants: Vec<Constant>,
}

pub fn bounds(state: &PureState) -> Bounds {
    let sharp = norms::lv_lower_bound_sharp(state);
    Bounds {
        dim: state.dim(),
        upper_projective: norms::projective_norm_pure(state),
        lower_sharp_raw: sharp.raw,
        lower_sharp_with_c: sharp.with_constant,
        sharp_k: sharp.k,
        single_term_convention: sharp.single_term_convention,
        maxent_envelope: envelope(state.dim()),
        constants: vec![norms::SHARP_C, norms::ENVELOPE_D],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_examples() {
        let b = bounds(&PureState::maximally_entangled(16));
        assert!((b.upper_projective - 16.0).abs() < 1e-9);
        assert!((b.lower_sharp_raw - 16.0 / 16f64.ln().powi(2)).abs() < 1e-9);
        assert!((b.maxent_envelope.unwrap() - 9.608).abs() < 1e-3);
        let p = bounds(&PureState::product(4));
        assert_eq!(p.upper_projective, 1.0);
        assert!((p.lower_sharp_raw - 2f64.ln().powi(-2)).abs() < 1e-12);
        let one = bounds(&PureState::product(1));
        assert_eq!(one.upper_projective, 1.0);
        assert!(one.maxent_envelope.is_none() && one.single_term_convention);
    }

    #[test]
    fn check_status_logic() {
        assert_eq!(Check::new("a", "x", 0.5, Expected::AtMost { value: 0.4 }, 0.1).status, Status::Pass);
        assert_eq!(Check::new("a", "x", 0.6, Expected::AtMost { value: 0.4 }, 0.1).status, Status::Fail);
        assert_eq!(Check::new("a", "x", f64::NAN, EQ0, 1.0).status, Status::Fail);
        assert_eq!(Check::new("a", "x", 1.0, Expected::Within { lo: 0.0, hi: 2.0 }, 0.0).status, Status::Pass);
        let j = serde_json::to_string(&Check::report_only("a", "x", 1.0, EQ0, "n")).unwrap();
        assert!(j.contains("\"status\":\"report-only\"") && j.contains("\"relation\":\"equal\""));
    }

    #[test]
    fn corrupted_kv_trips_the_canary() {
        let checks = kv_value_checks(3, Fixture::CorruptKvAnswers).unwrap();
        let canary: Vec<_> = checks.iter().filter(|c| c.id.starts_with("kv.hypercontractive")).collect();
        assert_eq!(canary.len(), 2);
        assert!(canary.iter().all(|c| c.status == Status::Fail));
        let clean = kv_value_checks(3, Fixture::None).unwrap();
        assert!(clean.iter().all(|c| c.status == Status::Pass), "{clean:?}");
    }
}
