//! Command-line front end for the robust-sbm library.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 a boosting round was
//! flagged infeasible, 3 a verifier failed.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use robust_sbm::boost::BoostMode;
use robust_sbm::harness::{
    attack_graph, attack_z2, graph_instance, run_sweep, z2_instance, Attack, ExperimentPlan, MonotoneSpec,
};
use robust_sbm::instance::{GroundTruth, MonotoneStrategy, NodeAttack, Z2Attack, Z2Instance};
use robust_sbm::io;
use robust_sbm::pipeline::{
    boost_stage, initialize_graph, initialize_z2, run_sbm2, run_sbmk, run_z2, Mode, ModelParams, PipelineConfig,
    PipelineReport, Preset,
};
use robust_sbm::rounding::{match_error, Labelling};
use robust_sbm::stats::demean;
use robust_sbm::verifiers::{run_claim_with, ClaimOverrides, VerifierReport, CLAIMS, MASTER_SEED};
use robust_sbm::Graph;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FLAGGED: i32 = 2;
pub const EXIT_VERIFY_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "rsbm", version, about = "Robust community detection and Z2 synchronization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample an instance and write it with its ground truth.
    Generate(GenerateArgs),
    /// Corrupt an instance file.
    Attack(AttackArgs),
    /// Run the initialization program and rounding.
    Init(StageArgs),
    /// Run the boosting loop from a labelling.
    Boost(BoostArgs),
    /// Run the full pipeline on a file or a freshly sampled instance.
    Run(RunArgs),
    /// Run the Monte Carlo verifiers.
    Verify(VerifyArgs),
    /// Print the matching error between two labellings.
    Eval(EvalArgs),
    /// Execute an experiment plan.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
struct ModelArgs {
    #[arg(long, default_value = "sbm2")]
    mode: Mode,
    #[arg(long, default_value_t = 400)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 40.0)]
    a: f64,
    #[arg(long, default_value_t = 5.0)]
    b: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 6.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "desk")]
    preset: Preset,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Graph file, or dense matrix file in z2 mode.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    truth_out: PathBuf,
}

#[derive(Debug, Clone, Args)]
struct NoiseArgs {
    /// Attack name; defaults to rewire_opposite (graphs) or flip_sign (z2).
    #[arg(long)]
    attack: Option<Attack>,
    #[arg(long)]
    monotone: Option<String>,
    #[arg(long, default_value_t = 0)]
    monotone_budget: usize,
    #[arg(long, default_value_t = 1.0)]
    monotone_scale: f64,
}

#[derive(Debug, Args)]
struct AttackArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    noise: NoiseArgs,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    truth_out: PathBuf,
}

#[derive(Debug, Args)]
struct StageArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    input: PathBuf,
    /// Ground truth file for error reporting.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BoostArgs {
    #[command(flatten)]
    stage: StageArgs,
    /// Starting labelling.
    #[arg(long)]
    labels: PathBuf,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    noise: NoiseArgs,
    /// Instance file; when absent an instance is sampled and attacked from the seed.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value = "rsbm-run.labels")]
    out: PathBuf,
    /// JSON run report with the per-round trace.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Claim id, or `all`.
    #[arg(long, default_value = "all")]
    claim: String,
    #[arg(long, default_value_t = MASTER_SEED)]
    seed: u64,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    /// One-line-per-claim CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Full reports with raw statistics.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    pred: PathBuf,
    truth: PathBuf,
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    plan: PathBuf,
    /// CSV destination; defaults to the plan's csv_path, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file for the trend diagnostics.
    #[arg(long)]
    trends: Option<PathBuf>,
}

/// Parses `argv` (program name first) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_USAGE
        }
    }
}

fn dispatch(cmd: Command) -> anyhow::Result<i32> {
    match cmd {
        Command::Generate(a) => generate(&a),
        Command::Attack(a) => attack(&a),
        Command::Init(a) => init(&a),
        Command::Boost(a) => boost(&a),
        Command::Run(a) => run_pipeline(&a),
        Command::Verify(a) => verify(&a),
        Command::Eval(a) => eval(&a),
        Command::Sweep(a) => sweep(&a),
    }
}

fn model_params(m: &ModelArgs, n: usize) -> ModelParams {
    ModelParams {
        n,
        a: m.a,
        b: m.b,
        k: m.k,
        alpha: m.alpha,
        lambda: m.lambda,
    }
}

fn generate(args: &GenerateArgs) -> anyhow::Result<i32> {
    let m = &args.model;
    match m.mode {
        Mode::Z2 => {
            let (inst, truth) = z2_instance(m.n, m.lambda, m.seed)?;
            io::save_matrix(&args.out, &inst.matrix, inst.lambda)?;
            io::save_truth(&args.truth_out, &truth)?;
        }
        _ => {
            let (g, truth) = graph_instance(m.n, m.k, m.a, m.b, m.alpha, m.seed)?;
            io::save_graph(&args.out, &g, truth.k)?;
            io::save_truth(&args.truth_out, &truth)?;
        }
    }
    Ok(EXIT_OK)
}

fn monotone_spec(noise: &NoiseArgs) -> anyhow::Result<Option<MonotoneSpec>> {
    let Some(name) = &noise.monotone else {
        return Ok(None);
    };
    let strategy: MonotoneStrategy = serde_json::from_value(serde_json::Value::String(name.clone()))
        .with_context(|| format!("unknown monotone strategy {name:?}"))?;
    Ok(Some(MonotoneSpec {
        strategy,
        budget: noise.monotone_budget,
        scale: noise.monotone_scale,
    }))
}

fn node_attack(noise: &NoiseArgs) -> anyhow::Result<NodeAttack> {
    match noise.attack {
        None => Ok(NodeAttack::RewireOpposite),
        Some(Attack::Node(a)) => Ok(a),
        Some(other) => bail!("attack {} applies to z2 instances only", other.name()),
    }
}

fn z2_attack(noise: &NoiseArgs) -> anyhow::Result<Z2Attack> {
    match noise.attack {
        None => Ok(Z2Attack::FlipSign),
        Some(Attack::Z2(a)) => Ok(a),
        Some(other) => bail!("attack {} applies to graphs only", other.name()),
    }
}

fn load_z2(path: &Path) -> anyhow::Result<Z2Instance> {
    let (matrix, lambda) = io::load_matrix(path)?;
    Ok(Z2Instance {
        n: matrix.nrows(),
        matrix,
        lambda,
    })
}

fn attack(args: &AttackArgs) -> anyhow::Result<i32> {
    let m = &args.model;
    let monotone = monotone_spec(&args.noise)?;
    match m.mode {
        Mode::Z2 => {
            let inst = load_z2(&args.input)?;
            let mut truth = io::load_truth(&args.truth, Some(2))?;
            let out = attack_z2(&inst, &mut truth, z2_attack(&args.noise)?, m.eps, monotone.as_ref(), m.seed)?;
            io::save_matrix(&args.out, &out.matrix, out.lambda)?;
            io::save_truth(&args.truth_out, &truth)?;
        }
        _ => {
            let (g, k) = io::load_graph(&args.input)?;
            let mut truth = io::load_truth(&args.truth, Some(k))?;
            let out = attack_graph(&g, &mut truth, node_attack(&args.noise)?, m.eps, monotone.as_ref(), m.seed)?;
            io::save_graph(&args.out, &out, k)?;
            io::save_truth(&args.truth_out, &truth)?;
        }
    }
    Ok(EXIT_OK)
}

fn truth_labels(path: Option<&PathBuf>, k: usize) -> anyhow::Result<Option<Labelling>> {
    path.map(|p| -> anyhow::Result<Labelling> {
        let t = io::load_truth(p, Some(k))?;
        Ok(Labelling::new(t.partition, k)?)
    })
    .transpose()
}

enum Loaded {
    Graph(Graph, usize),
    Z2(Z2Instance),
}

fn load_instance(mode: Mode, path: &Path) -> anyhow::Result<Loaded> {
    Ok(match mode {
        Mode::Z2 => Loaded::Z2(load_z2(path)?),
        _ => {
            let (g, k) = io::load_graph(path)?;
            Loaded::Graph(g, k)
        }
    })
}

fn print_json(value: &impl serde::Serialize) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn init(args: &StageArgs) -> anyhow::Result<i32> {
    let m = &args.model;
    let cfg = PipelineConfig::new(m.mode, m.preset, m.seed);
    let outcome = match load_instance(m.mode, &args.input)? {
        Loaded::Z2(inst) => initialize_z2(&inst, m.lambda, &cfg)?,
        Loaded::Graph(g, k) => initialize_graph(&g, m.a, m.b, k, &cfg)?,
    };
    io::save_labelling(&args.out, &outcome.labels)?;
    let k = outcome.labels.k;
    let error = truth_labels(args.truth.as_ref(), k)?
        .map(|t| match_error(&outcome.labels, &t, k))
        .transpose()?;
    print_json(&serde_json::json!({
        "objective": outcome.objective,
        "flagged_infeasible": outcome.flagged,
        "error": error,
    }))?;
    Ok(EXIT_OK)
}

fn boost(args: &BoostArgs) -> anyhow::Result<i32> {
    let s = &args.stage;
    let m = &s.model;
    let cfg = PipelineConfig::new(m.mode, m.preset, m.seed);
    let init = io::load_labelling(&args.labels)?;
    let (matrix, mode, n) = match load_instance(m.mode, &s.input)? {
        Loaded::Z2(inst) => (inst.matrix, BoostMode::Z2, inst.n),
        Loaded::Graph(g, k) => {
            let mode = if m.mode == Mode::Sbmk || k >= 3 {
                BoostMode::K { alpha: m.alpha }
            } else {
                BoostMode::Two
            };
            (demean(&g, m.a, m.b)?.matrix, mode, g.n())
        }
    };
    if init.n() != n {
        bail!("labelling has {} nodes but the instance has {n}", init.n());
    }
    let params = cfg.resolve(&model_params(m, n))?;
    let run = boost_stage(&matrix, &init, &params, mode, m.seed)?;
    io::save_labelling(&s.out, &run.labels)?;
    let truth = truth_labels(s.truth.as_ref(), init.k)?;
    let error = truth
        .as_ref()
        .map(|t| match_error(&run.labels, t, init.k))
        .transpose()?;
    let flagged = run.rounds.iter().any(|r| r.flagged_infeasible);
    let rounds: Vec<_> = run
        .rounds
        .iter()
        .map(|r| {
            serde_json::json!({
                "round": r.round,
                "rho": r.rho,
                "flagged_infeasible": r.flagged_infeasible,
                "flips": r.flips,
            })
        })
        .collect();
    print_json(&serde_json::json!({ "rounds": rounds, "error": error, "any_flagged": flagged }))?;
    Ok(if flagged { EXIT_FLAGGED } else { EXIT_OK })
}

/// Report without wall-clock fields, so that reruns are byte-identical.
fn report_json(report: &PipelineReport) -> anyhow::Result<serde_json::Value> {
    let mut v = serde_json::to_value(report)?;
    if let Some(obj) = v.as_object_mut() {
        obj.remove("wall_ms");
    }
    Ok(v)
}

fn run_pipeline(args: &RunArgs) -> anyhow::Result<i32> {
    let m = &args.model;
    let cfg = PipelineConfig::new(m.mode, m.preset, m.seed);
    let monotone = monotone_spec(&args.noise)?;
    let (loaded, truth): (Loaded, Option<GroundTruth>) = match &args.input {
        Some(path) => {
            let loaded = load_instance(m.mode, path)?;
            let k = match &loaded {
                Loaded::Graph(_, k) => *k,
                Loaded::Z2(_) => 2,
            };
            let truth = args.truth.as_ref().map(|p| io::load_truth(p, Some(k))).transpose()?;
            (loaded, truth)
        }
        None => match m.mode {
            Mode::Z2 => {
                let (inst, mut truth) = z2_instance(m.n, m.lambda, m.seed)?;
                let inst = attack_z2(&inst, &mut truth, z2_attack(&args.noise)?, m.eps, monotone.as_ref(), m.seed)?;
                (Loaded::Z2(inst), Some(truth))
            }
            _ => {
                let (g, mut truth) = graph_instance(m.n, m.k, m.a, m.b, m.alpha, m.seed)?;
                let g = attack_graph(&g, &mut truth, node_attack(&args.noise)?, m.eps, monotone.as_ref(), m.seed)?;
                let k = truth.k;
                (Loaded::Graph(g, k), Some(truth))
            }
        },
    };
    let report = match loaded {
        Loaded::Z2(inst) => {
            let t = truth.map(|t| Labelling::new(t.partition, 2)).transpose()?;
            run_z2(&inst, m.lambda, m.eps, &cfg, t.as_ref())?
        }
        Loaded::Graph(g, k) => {
            let t = truth.map(|t| Labelling::new(t.partition, k)).transpose()?;
            if m.mode == Mode::Sbmk || k >= 3 {
                run_sbmk(&g, m.a, m.b, m.eps, k, m.alpha, &cfg, t.as_ref())?
            } else {
                run_sbm2(&g, m.a, m.b, m.eps, m.alpha, &cfg, t.as_ref())?
            }
        }
    };
    io::save_labelling(&args.out, &report.labels)?;
    let json = report_json(&report)?;
    if let Some(path) = &args.report {
        std::fs::write(path, serde_json::to_string_pretty(&json)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    log::info!("pipeline finished in {} ms", report.wall_ms);
    print_json(&json)?;
    Ok(if report.any_flagged { EXIT_FLAGGED } else { EXIT_OK })
}

fn verify(args: &VerifyArgs) -> anyhow::Result<i32> {
    let ids: Vec<&str> = if args.claim == "all" {
        CLAIMS.to_vec()
    } else if CLAIMS.contains(&args.claim.as_str()) {
        vec![args.claim.as_str()]
    } else {
        bail!("unknown claim {:?}; expected `all` or one of {CLAIMS:?}", args.claim);
    };
    let overrides = ClaimOverrides {
        n: args.n,
        a: args.a,
        b: args.b,
        eps: args.eps,
        lambda: args.lambda,
        trials: args.trials,
    };
    let reports: Vec<VerifierReport> = ids
        .iter()
        .map(|id| run_claim_with(id, args.seed, &overrides))
        .collect::<robust_sbm::Result<_>>()?;
    let mut lines = vec![VerifierReport::CSV_HEADER.to_string()];
    lines.extend(reports.iter().map(VerifierReport::csv_row));
    let csv = lines.join("\n") + "\n";
    print!("{csv}");
    if let Some(path) = &args.csv {
        std::fs::write(path, &csv)?;
    }
    if let Some(path) = &args.json {
        std::fs::write(path, serde_json::to_string_pretty(&reports)? + "\n")?;
    }
    Ok(if reports.iter().all(VerifierReport::passed) {
        EXIT_OK
    } else {
        EXIT_VERIFY_FAILED
    })
}

/// Reads a labelling file, falling back to the ground-truth format.
fn load_labels_any(path: &Path, k: Option<usize>) -> anyhow::Result<Labelling> {
    match io::load_labelling(path) {
        Ok(l) => Ok(l),
        Err(first) => {
            let t = io::load_truth(path, k).map_err(|_| first)?;
            Ok(Labelling::new(t.partition, t.k)?)
        }
    }
}

fn eval(args: &EvalArgs) -> anyhow::Result<i32> {
    let pred = load_labels_any(&args.pred, args.k)?;
    let truth = load_labels_any(&args.truth, args.k)?;
    let k = args.k.unwrap_or(pred.k.max(truth.k));
    println!("{}", match_error(&pred, &truth, k)?);
    Ok(EXIT_OK)
}

fn sweep(args: &SweepArgs) -> anyhow::Result<i32> {
    let plan = ExperimentPlan::load(&args.plan)?;
    let result = run_sweep(&plan)?;
    match args.out.as_ref().or(plan.csv_path.as_ref()) {
        Some(path) => {
            let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            result.write_csv(std::io::BufWriter::new(file))?;
        }
        None => result.write_csv(std::io::stdout().lock())?,
    }
    if let Some(path) = &args.trends {
        std::fs::write(path, serde_json::to_string_pretty(&result.trends)? + "\n")?;
    } else {
        eprintln!("{}", serde_json::to_string(&result.trends)?);
    }
    if result.failures() > 0 {
        eprintln!("{} rows failed; see their status column", result.failures());
    }
    Ok(EXIT_OK)
}
