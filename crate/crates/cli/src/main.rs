//! `bell`: command-line front end for the bell-core toolkit.
//!
//! Every command prints one JSON document on stdout. Exit codes: 0 on
//! success, 1 when a computation fails or `verify` records a failing check,
//! 2 on malformed arguments or unreadable input.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use bell_core::classical;
use bell_core::harness::{self, Scale};
use bell_core::io;
use bell_core::kv::{self, KvGame};
use bell_core::norms::{self, LogBase, Matrix, Target};
use bell_core::quantum::{self, SeesawConfig};
use bell_core::relax::{self, Init, Mode, RelaxConfig, VectorStrategy};
use bell_core::{BellFunctional, PureState};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "bell", version, about = "Classical, quantum and relaxed values of Bell functionals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classical value ω(M), exact enumeration or alternating best response.
    Classical(ClassicalArgs),
    /// Largest local weight of a box (LP).
    LocalWeight {
        #[arg(long = "box", value_name = "FILE")]
        box_file: PathBuf,
    },
    /// See-saw lower bound on the quantum value at fixed dimension.
    Quantum(QuantumArgs),
    /// Khot-Vishnoi game generator and values.
    Kv(KvArgs),
    /// Certified lower bound on a vector relaxation value.
    Relax(RelaxArgs),
    /// Norm computations.
    Norms {
        #[command(subcommand)]
        command: NormsCommand,
    },
    /// Runs the end-to-end verification suite.
    Verify {
        #[arg(long, default_value = "small")]
        scale: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Writes the JSON-lines report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Upper and lower violation bounds for a pure state.
    Bounds(StateArgs),
}

#[derive(Args)]
struct ClassicalArgs {
    #[arg(long)]
    functional: PathBuf,
    #[arg(long, conflicts_with = "heuristic")]
    exact: bool,
    #[arg(long)]
    heuristic: bool,
    #[arg(long, default_value_t = 16)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct StateArgs {
    /// `maxent` or a state JSON file.
    #[arg(long, default_value = "maxent")]
    state: String,
    /// Required with `maxent`; checked against the file otherwise.
    #[arg(long)]
    dim: Option<usize>,
}

#[derive(Args)]
struct QuantumArgs {
    #[arg(long)]
    functional: PathBuf,
    #[command(flatten)]
    state: StateArgs,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 100)]
    rounds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct KvArgs {
    #[arg(long)]
    l: u32,
    /// A number in [0, 1/2] or `auto` for 1/2 - 1/ln n.
    #[arg(long, default_value = "auto")]
    eta: String,
    #[arg(long, value_name = "FILE")]
    emit_functional: Option<PathBuf>,
    /// Pads each coset with an extra, never-winning answer.
    #[arg(long, requires = "emit_functional")]
    padded: bool,
    #[arg(long)]
    closed_form: bool,
    #[arg(long)]
    direct: bool,
    /// `maxent` or a state JSON file of dimension n.
    #[arg(long, default_value = "maxent")]
    state: String,
}

#[derive(Args)]
struct RelaxArgs {
    #[arg(long)]
    functional: PathBuf,
    #[arg(long)]
    dim: usize,
    #[arg(long, value_enum, default_value = "opbar")]
    mode: CliMode,
    /// `witness`, `random`, or `quantum FILE` with a strategy JSON.
    #[arg(long, num_args = 1..=2, value_names = ["KIND", "FILE"], default_value = "witness")]
    init: Vec<String>,
    #[arg(long, default_value_t = 4)]
    restarts: usize,
    #[arg(long, default_value_t = 100)]
    rounds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliMode {
    Opn,
    Opbar,
}

impl From<CliMode> for Mode {
    fn from(m: CliMode) -> Self {
        match m {
            CliMode::Opn => Mode::OpN,
            CliMode::Opbar => Mode::OpBar,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CliTarget {
    Linf,
    L2,
    L1,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliLog {
    Natural,
    Binary,
}

#[derive(Args)]
struct MatrixArgs {
    /// JSON array of rows.
    #[arg(long, conflicts_with = "identity")]
    matrix: Option<PathBuf>,
    /// Uses the n×n identity.
    #[arg(long)]
    identity: Option<usize>,
}

#[derive(Subcommand)]
enum NormsCommand {
    /// Projective norm (Σα)² of a pure state.
    PiPure(StateArgs),
    /// Sharp lower bound sup_k (Σ_{i≤k} α_i)² / (log k)².
    LvSharp {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long, value_enum, default_value = "natural")]
        log: CliLog,
    },
    /// ℓ∞→ℓ2 norm of a list of column vectors given as JSON.
    Opnorm {
        #[arg(long)]
        columns: PathBuf,
    },
    /// Monte Carlo Gaussian ℓ-norm of a matrix.
    Ell {
        #[command(flatten)]
        matrix: MatrixArgs,
        #[arg(long, value_enum, default_value = "linf")]
        target: CliTarget,
        #[arg(long, default_value_t = norms::DEFAULT_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// 2-summing norm of a diagonal map.
    TwoSumming {
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        lambdas: Vec<f64>,
    },
    /// Twist maps and the trace identity for a feasible vector strategy.
    TwistCheck {
        #[arg(long)]
        functional: PathBuf,
        #[arg(long)]
        vectors: PathBuf,
    },
    /// Ratio tr(S∘T) / (‖T‖ ℓ(S)) for S = T = identity on ℓ∞ⁿ.
    Concentration {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = norms::DEFAULT_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Input problems exit with 2, computation problems with 1.
enum Failure {
    Usage(anyhow::Error),
    Compute(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Compute(e.into())
    }
}

type Outcome = std::result::Result<(Value, bool), Failure>;

fn usage<T>(r: anyhow::Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(Failure::Usage)
}

fn read_functional(path: &Path) -> std::result::Result<BellFunctional, Failure> {
    usage(
        io::read_to_string(path)
            .and_then(|t| io::functional_from_str(&t))
            .with_context(|| format!("reading functional {}", path.display())),
    )
}

fn read_state(arg: &str, dim: Option<usize>) -> std::result::Result<PureState, Failure> {
    if arg == "maxent" {
        let n = dim.ok_or_else(|| Failure::Usage(anyhow!("--state maxent needs --dim")))?;
        if n == 0 {
            return Err(Failure::Usage(anyhow!("--dim must be positive")));
        }
        return Ok(PureState::maximally_entangled(n));
    }
    let state = usage(
        io::read_to_string(arg)
            .and_then(|t| io::state_from_str(&t))
            .with_context(|| format!("reading state {arg}")),
    )?;
    if let Some(n) = dim {
        if n != state.dim() {
            return Err(Failure::Usage(anyhow!("--dim {n} does not match state dimension {}", state.dim())));
        }
    }
    Ok(state)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> std::result::Result<T, Failure> {
    usage(
        std::fs::read_to_string(path)
            .map_err(anyhow::Error::from)
            .and_then(|t| serde_json::from_str(&t).map_err(anyhow::Error::from))
            .with_context(|| format!("reading {}", path.display())),
    )
}

fn read_matrix(args: &MatrixArgs) -> std::result::Result<Matrix, Failure> {
    match (&args.matrix, args.identity) {
        (Some(p), None) => {
            let rows: Vec<Vec<f64>> = read_json(p)?;
            usage(Matrix::from_rows(&rows).map_err(Into::into))
        }
        (None, Some(n)) if n > 0 => Ok(Matrix::identity(n)),
        _ => Err(Failure::Usage(anyhow!("give --matrix FILE or --identity N (N ≥ 1)"))),
    }
}

fn envelope(n: usize) -> Value {
    json!(harness::envelope(n))
}

fn classical_cmd(a: ClassicalArgs) -> Outcome {
    let m = read_functional(&a.functional)?;
    if a.heuristic {
        let h = classical::classical_value_heuristic(&m, a.restarts, a.seed)?;
        return Ok((
            json!({ "value": h.best.value, "witness": h.best.witness, "sign": h.best.sign, "method": "heuristic",
                    "restarts": a.restarts, "seed": a.seed, "trace": h.trace }),
            true,
        ));
    }
    let c = classical::classical_value_exact(&m)?;
    Ok((json!({ "value": c.value, "witness": c.witness, "sign": c.sign, "method": "exact" }), true))
}

fn local_weight_cmd(path: &Path) -> Outcome {
    let p = usage(
        io::read_to_string(path)
            .and_then(|t| io::box_from_str(&t))
            .with_context(|| format!("reading box {}", path.display())),
    )?;
    let w = classical::local_weight(&p)?;
    Ok((json!({ "value": w.lambda, "residual": w.residual, "pivots": w.pivots }), true))
}

fn quantum_cmd(a: QuantumArgs) -> Outcome {
    let m = read_functional(&a.functional)?;
    let state = read_state(&a.state.state, a.state.dim)?;
    let cfg = SeesawConfig { restarts: a.restarts, rounds: a.rounds, seed: a.seed, ..SeesawConfig::default() };
    let r = quantum::seesaw(&m, state.dim(), &state, &cfg)?;
    Ok((
        json!({
            "value": r.value,
            "pairing": r.pairing,
            "psd_residual": r.psd_residual,
            "completeness_residual": r.completeness_residual,
            "restart": r.restart,
            "trace": r.trace,
            "strategy": io::StrategyJson::from(&r.strategy),
        }),
        true,
    ))
}

fn kv_cmd(a: KvArgs) -> Outcome {
    if !(1..=4).contains(&a.l) {
        return Err(Failure::Usage(anyhow!("--l must be in 1..=4")));
    }
    let n = 1usize << a.l;
    let eta = if a.eta == "auto" {
        usage(kv::default_eta(n).context("--eta auto needs n ≥ 8; pass an explicit --eta"))?
    } else {
        usage(a.eta.parse::<f64>().with_context(|| format!("bad --eta {:?}", a.eta)))?
    };
    let g = usage(KvGame::build(a.l, eta).map_err(Into::into))?;
    let mut out = json!({
        "l": a.l,
        "n": n,
        "eta": eta,
        "inputs": g.num_cosets(),
        "hadamard": g.hadamard().iter().map(|&w| g.format_word(w)).collect::<Vec<_>>(),
        "classical_upper_bound": if eta < 0.5 { json!(kv::classical_upper_bound(n, eta)?) } else { Value::Null },
    });
    if let Some(path) = &a.emit_functional {
        let f = g.functional(a.padded)?;
        io::write_string(path, &io::to_json(&io::FunctionalJson::from(&f)))?;
        out["functional"] = json!(path.display().to_string());
    }
    if a.closed_form || a.direct {
        let state = read_state(&a.state, Some(n))?;
        if a.closed_form {
            out["closed_form"] = json!(kv::value_closed_form(state.schmidt(), n, eta)?);
        }
        if a.direct {
            out["direct"] = json!(g.value_direct(&g.quantum_strategy(state)?)?);
        }
    }
    Ok((out, true))
}

fn relax_cmd(a: RelaxArgs) -> Outcome {
    let m = read_functional(&a.functional)?;
    let init = match a.init.as_slice() {
        [k] if k == "witness" => Init::Witness,
        [k] if k == "random" => Init::Random,
        [k, file] if k == "quantum" => {
            let s = usage(
                io::read_to_string(file)
                    .and_then(|t| io::strategy_from_str(&t))
                    .with_context(|| format!("reading strategy {file}")),
            )?;
            let diagnostic = !s.state().is_maximally_entangled(1e-12);
            Init::Strategy(Box::new(quantum::quantum_to_vectors(&m, &s, diagnostic)?.best_strategy()?))
        }
        _ => return Err(Failure::Usage(anyhow!("--init takes witness, random, or quantum FILE"))),
    };
    let cfg = RelaxConfig { restarts: a.restarts, rounds: a.rounds, seed: a.seed, init, ..RelaxConfig::default() };
    let r = relax::optimize(&m, a.dim, a.mode.into(), &cfg)?;
    let omega = classical::classical_value_exact(&m).ok().map(|c| c.value);
    let ratio = omega.filter(|&w| w > 0.0).map(|w| r.value / w);
    Ok((
        json!({
            "value": r.value,
            "omega": omega,
            "ratio_to_omega": ratio,
            "envelope": envelope(a.dim),
            "envelope_note": "n/sqrt(ln n) at n = dim; the constant D is unknown, report only",
            "pre_rescale": r.pre_rescale,
            "rescale": r.rescale,
            "feasibility": r.feasibility,
            "restart": r.restart,
            "trace": r.trace,
            "strategy": r.strategy,
        }),
        true,
    ))
}

fn norms_cmd(c: NormsCommand) -> Outcome {
    let out = match c {
        NormsCommand::PiPure(s) => {
            let state = read_state(&s.state, s.dim)?;
            json!({ "value": norms::projective_norm_pure(&state), "dim": state.dim() })
        }
        NormsCommand::LvSharp { state, log } => {
            let st = read_state(&state.state, state.dim)?;
            let base = match log {
                CliLog::Natural => LogBase::Natural,
                CliLog::Binary => LogBase::Binary,
            };
            json!(norms::lv_lower_bound_sharp_with(&st, base))
        }
        NormsCommand::Opnorm { columns } => {
            let cols: Vec<Vec<f64>> = read_json(&columns)?;
            json!({ "value": norms::op_norm_inf_to_2(&cols)? })
        }
        NormsCommand::Ell { matrix, target, samples, seed } => {
            let t = read_matrix(&matrix)?;
            let target = match target {
                CliTarget::Linf => Target::Linf,
                CliTarget::L2 => Target::L2,
                CliTarget::L1 => Target::L1,
            };
            let e = norms::ell_norm_mc(&t, target, samples, seed)?;
            json!({ "estimate": e.estimate, "stderr": e.stderr, "samples": e.samples, "batches": e.batches, "seed": seed })
        }
        NormsCommand::TwoSumming { lambdas } => {
            if lambdas.iter().any(|l| !l.is_finite()) {
                return Err(Failure::Usage(anyhow!("--lambdas must be finite")));
            }
            json!({ "value": norms::two_summing_diagonal(&lambdas) })
        }
        NormsCommand::TwistCheck { functional, vectors } => {
            let m = read_functional(&functional)?;
            let raw: VectorStrategy = read_json(&vectors)?;
            let vs = usage(
                VectorStrategy::new(raw.u().to_vec(), raw.v().to_vec(), raw.z().map(<[f64]>::to_vec))
                    .map_err(Into::into),
            )?;
            json!(norms::twist_and_trace_check(&m, &vs)?)
        }
        NormsCommand::Concentration { n, samples, seed } => {
            if n == 0 {
                return Err(Failure::Usage(anyhow!("--n must be positive")));
            }
            let id = Matrix::identity(n);
            json!(norms::concentration_ratio(&id, &id, samples, seed)?)
        }
    };
    Ok((json!({ "result": out, "constants": [norms::GROTHENDIECK, norms::SHARP_C, norms::K12, norms::ENVELOPE_D] }), true))
}

fn verify_cmd(scale: &str, seed: u64, out: Option<PathBuf>) -> Outcome {
    let scale: Scale = usage(scale.parse().map_err(anyhow::Error::from))?;
    let report = harness::verify_suite(scale, seed);
    let text = report.to_jsonl();
    let passed = report.all_passed();
    match out {
        Some(path) => {
            io::write_string(&path, &text)?;
            Ok((json!({ "summary": report.summary(), "out": path.display().to_string() }), passed))
        }
        None => {
            print!("{text}");
            Ok((Value::Null, passed))
        }
    }
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Classical(a) => classical_cmd(a),
        Command::LocalWeight { box_file } => local_weight_cmd(&box_file),
        Command::Quantum(a) => quantum_cmd(a),
        Command::Kv(a) => kv_cmd(a),
        Command::Relax(a) => relax_cmd(a),
        Command::Norms { command } => norms_cmd(command),
        Command::Verify { scale, seed, out } => verify_cmd(&scale, seed, out),
        Command::Bounds(s) => {
            let state = read_state(&s.state, s.dim)?;
            Ok((json!(harness::bounds(&state)), true))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok((value, ok)) => {
            if !value.is_null() {
                println!("{}", serde_json::to_string_pretty(&value).expect("JSON value serializes"));
            }
            ExitCode::from(if ok { 0 } else { 1 })
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

