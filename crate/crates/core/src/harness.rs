//! Experiment orchestration: seeded instance and attack stages shared with
//! the CLI, parameter sweeps with per-cell aggregates, and monotone-trend
//! diagnostics.
//!
//! Every replicate draws from `derive_seed(master, [cell, replicate])` and
//! each stage (graph, corruption, monotone noise, pipeline) derives its own
//! stream from that seed, so a row is regenerable from the plan alone.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::graph::Graph;
use crate::instance::{
    apply_monotone, apply_node_corruption, corrupt_z2, gen_sbm, gen_z2, CorruptionSelection, GroundTruth,
    InstanceSpec, MonotoneStrategy, NodeAttack, Z2Attack, Z2Instance,
};
use crate::pipeline::{run_sbm2, run_sbmk, run_z2, Mode, PipelineConfig, PipelineReport, Preset};
use crate::rng::{derive_seed, derived_rng, stage};
use crate::rounding::Labelling;
use crate::stats::snr;

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable holding the sweep worker count.
pub const WORKERS_ENV: &str = "RSBM_WORKERS";

/// Node attack for graph modes or row attack for ℤ₂.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Attack {
    Node(NodeAttack),
    Z2(Z2Attack),
}

impl Attack {
    pub fn name(&self) -> &'static str {
        match self {
            Attack::Node(NodeAttack::RewireOpposite) => "rewire_opposite",
            Attack::Node(NodeAttack::Erase) => "erase",
            Attack::Node(NodeAttack::RandomFlip) => "random_flip",
            Attack::Node(NodeAttack::CliquePlantCorrupt) => "clique_plant_corrupt",
            Attack::Z2(Z2Attack::FlipSign) => "flip_sign",
            Attack::Z2(Z2Attack::Zero) => "zero",
            Attack::Z2(Z2Attack::Noise) => "noise",
        }
    }
}

impl std::str::FromStr for Attack {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| param(format!("unknown attack {s:?}")))
    }
}

/// Monotone noise: graph edits for graph modes, perturbed entries for ℤ₂.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotoneSpec {
    pub strategy: MonotoneStrategy,
    pub budget: usize,
    /// Magnitude scale for ℤ₂ perturbations.
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

fn two() -> usize {
    2
}

/// Seeded SBM instance: the graph stream is `derive_seed(seed, [GRAPH])`.
pub fn graph_instance(n: usize, k: usize, a: f64, b: f64, alpha: f64, seed: u64) -> Result<(Graph, GroundTruth)> {
    let spec = InstanceSpec {
        alpha,
        ..InstanceSpec::balanced(n, k, a, b, seed)
    };
    gen_sbm(&spec, &mut derived_rng(seed, &[stage::GRAPH]))
}

/// Node corruption then monotone noise, each on its own derived stream.
pub fn attack_graph(
    g: &Graph,
    truth: &mut GroundTruth,
    attack: NodeAttack,
    eps: f64,
    monotone: Option<&MonotoneSpec>,
    seed: u64,
) -> Result<Graph> {
    let mut out = apply_node_corruption(
        g,
        truth,
        attack,
        eps,
        CorruptionSelection::Uniform,
        &mut derived_rng(seed, &[stage::CORRUPT]),
    )?;
    if let Some(m) = monotone {
        out = apply_monotone(&out, truth, m.strategy, m.budget, &mut derived_rng(seed, &[stage::MONOTONE])).0;
    }
    Ok(out)
}

/// Seeded ℤ₂ instance on the `GRAPH` stream.
pub fn z2_instance(n: usize, lambda: f64, seed: u64) -> Result<(Z2Instance, GroundTruth)> {
    gen_z2(n, lambda, &mut derived_rng(seed, &[stage::GRAPH]))
}

pub fn attack_z2(
    inst: &Z2Instance,
    truth: &mut GroundTruth,
    attack: Z2Attack,
    eps: f64,
    monotone: Option<&MonotoneSpec>,
    seed: u64,
) -> Result<Z2Instance> {
    let (budget, scale) = monotone.map_or((0, 0.0), |m| (m.budget, m.scale));
    corrupt_z2(inst, truth, eps, budget, scale, attack, &mut derived_rng(seed, &[stage::CORRUPT]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub schema_version: u32,
    pub mode: Mode,
    pub n: usize,
    #[serde(default = "two")]
    pub k: usize,
    #[serde(default = "one")]
    pub alpha: f64,
    /// Signal axis for graph modes.
    #[serde(default)]
    pub ab_pairs: Vec<(f64, f64)>,
    /// Signal axis for ℤ₂.
    #[serde(default)]
    pub lambdas: Vec<f64>,
    pub eps_grid: Vec<f64>,
    pub attack: Attack,
    #[serde(default)]
    pub monotone: Option<MonotoneSpec>,
    pub preset: Preset,
    pub replicates: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub csv_path: Option<PathBuf>,
    /// Directory for per-replicate round traces (JSON); none when absent.
    #[serde(default)]
    pub trace_dir: Option<PathBuf>,
}

/// One grid cell: a signal point and a corruption level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub a: f64,
    pub b: f64,
    pub lambda: f64,
    pub eps: f64,
}

impl Cell {
    /// Signal strength: `C` for graph modes, `λ` for ℤ₂.
    pub fn strength(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Z2 => self.lambda,
            _ => snr(self.a, self.b),
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(param(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.n == 0 || self.replicates == 0 || self.eps_grid.is_empty() {
            return Err(param("n, replicates and eps_grid must be nonempty"));
        }
        if let Some(e) = self.eps_grid.iter().find(|e| !(0.0..1.0).contains(*e)) {
            return Err(param(format!("eps={e} must lie in [0, 1)")));
        }
        match (self.mode, self.attack) {
            (Mode::Z2, Attack::Z2(_)) => {
                if self.lambdas.is_empty() {
                    return Err(param("z2 plans need a nonempty lambdas axis"));
                }
            }
            (Mode::Sbm2 | Mode::Sbmk, Attack::Node(_)) => {
                if self.ab_pairs.is_empty() {
                    return Err(param("graph plans need a nonempty ab_pairs axis"));
                }
                if let Some((a, b)) = self.ab_pairs.iter().find(|(a, b)| !(b < a)) {
                    return Err(param(format!("need b < a, got ({a}, {b})")));
                }
            }
            _ => return Err(param(format!("attack {} does not fit mode {:?}", self.attack.name(), self.mode))),
        }
        match self.mode {
            Mode::Sbm2 if self.k != 2 => Err(param("sbm2 plans need k = 2")),
            Mode::Sbmk if self.k < 3 => Err(param("sbmk plans need k ≥ 3")),
            _ => Ok(()),
        }
    }

    /// Cells in signal-major order.
    pub fn cells(&self) -> Vec<Cell> {
        let signals: Vec<(f64, f64, f64)> = match self.mode {
            Mode::Z2 => self.lambdas.iter().map(|&l| (0.0, 0.0, l)).collect(),
            _ => self.ab_pairs.iter().map(|&(a, b)| (a, b, 0.0)).collect(),
        };
        signals
            .into_iter()
            .flat_map(|(a, b, lambda)| self.eps_grid.iter().map(move |&eps| Cell { a, b, lambda, eps }))
            .collect()
    }

    pub fn replicate_seed(&self, cell: usize, replicate: usize) -> u64 {
        derive_seed(self.master_seed, &[cell as u64, replicate as u64])
    }

    pub fn load(path: &Path) -> Result<Self> {
        let plan: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        plan.validate()?;
        Ok(plan)
    }
}

/// One CSV row. Aggregate rows carry `replicate = "agg"`, the median error
/// and its interquartile range.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub mode: Mode,
    pub n: usize,
    pub k: usize,
    pub a: f64,
    pub b: f64,
    pub lambda: f64,
    pub eps: f64,
    pub attack: &'static str,
    pub preset: Preset,
    pub seed: u64,
    pub replicate: String,
    pub error: Option<f64>,
    pub rho_final: Option<f64>,
    pub rounds_used: Option<usize>,
    pub wall_ms: Option<u128>,
    pub error_iqr: Option<f64>,
    pub trace_path: Option<String>,
    /// `ok`, or the failure message for this replicate.
    pub status: String,
}

pub const CSV_HEADER: &str = "mode,n,k,a,b,lambda,eps,attack,preset,seed,replicate,error,rho_final,rounds_used,wall_ms,error_iqr,trace_path,status";

/// Runs one replicate of one cell with ground truth attached.
pub fn run_replicate(plan: &ExperimentPlan, cell: &Cell, seed: u64) -> Result<PipelineReport> {
    let cfg = PipelineConfig::new(plan.mode, plan.preset, seed);
    match (plan.mode, plan.attack) {
        (Mode::Z2, Attack::Z2(attack)) => {
            let (inst, mut truth) = z2_instance(plan.n, cell.lambda, seed)?;
            let inst = attack_z2(&inst, &mut truth, attack, cell.eps, plan.monotone.as_ref(), seed)?;
            let labels = Labelling::new(truth.partition, 2)?;
            run_z2(&inst, cell.lambda, cell.eps, &cfg, Some(&labels))
        }
        (mode, Attack::Node(attack)) => {
            let (g, mut truth) = graph_instance(plan.n, plan.k, cell.a, cell.b, plan.alpha, seed)?;
            let g = attack_graph(&g, &mut truth, attack, cell.eps, plan.monotone.as_ref(), seed)?;
            let labels = Labelling::new(truth.partition, plan.k)?;
            if mode == Mode::Sbmk {
                run_sbmk(&g, cell.a, cell.b, cell.eps, plan.k, plan.alpha, &cfg, Some(&labels))
            } else {
                run_sbm2(&g, cell.a, cell.b, cell.eps, plan.alpha, &cfg, Some(&labels))
            }
        }
        _ => Err(param("attack does not fit mode")),
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &t in &idx[i..=j] {
            ranks[t] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman correlation with average ranks; 0 when either side is constant
/// or fewer than two points are given.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "spearman needs paired samples");
    if x.len() < 2 {
        return 0.0;
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let m = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / m, ry.iter().sum::<f64>() / m);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Spearman correlation along one axis with the other held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Trend {
    /// The held value: `C` (or `λ`) for ε-trends, `ε` for signal trends.
    pub fixed: f64,
    pub points: usize,
    pub spearman: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trends {
    /// Median error against ε at each fixed signal; expected ≥ 0.
    pub eps: Vec<Trend>,
    /// Median error against signal strength at each fixed ε; expected ≤ 0.
    pub signal: Vec<Trend>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Median error per cell, in [`ExperimentPlan::cells`] order.
    pub cell_medians: Vec<f64>,
    pub trends: Trends,
}

impl SweepResult {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.status != "ok").count()
    }

    pub fn write_csv(&self, w: impl std::io::Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in &self.rows {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Worker count from [`WORKERS_ENV`], else the available parallelism.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn trends(plan: &ExperimentPlan, cells: &[Cell], medians: &[f64]) -> Trends {
    let n_eps = plan.eps_grid.len();
    let n_sig = cells.len() / n_eps;
    let mut eps = Vec::new();
    for s in 0..n_sig {
        let pts: Vec<(f64, f64)> = (0..n_eps)
            .map(|e| (cells[s * n_eps + e].eps, medians[s * n_eps + e]))
            .filter(|p| p.1.is_finite())
            .collect();
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        eps.push(Trend {
            fixed: cells[s * n_eps].strength(plan.mode),
            points: x.len(),
            spearman: spearman(&x, &y),
        });
    }
    let mut signal = Vec::new();
    for e in 0..n_eps {
        let pts: Vec<(f64, f64)> = (0..n_sig)
            .map(|s| (cells[s * n_eps + e].strength(plan.mode), medians[s * n_eps + e]))
            .filter(|p| p.1.is_finite())
            .collect();
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        signal.push(Trend {
            fixed: plan.eps_grid[e],
            points: x.len(),
            spearman: spearman(&x, &y),
        });
    }
    Trends { eps, signal }
}

fn write_trace(dir: &Path, cell: usize, replicate: usize, report: &PipelineReport) -> Result<String> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("cell{cell}_rep{replicate}.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&report.rounds)?)?;
    Ok(path.display().to_string())
}

/// Runs every (cell, replicate) on a pool of [`worker_count`] threads. Rows
/// come back in plan order; a failed replicate is recorded in its row's
/// `status` and the sweep continues.
pub fn run_sweep(plan: &ExperimentPlan) -> Result<SweepResult> {
    plan.validate()?;
    let cells = plan.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..plan.replicates).map(move |r| (c, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
    let base_row = |cell: &Cell, seed: u64, replicate: String| SweepRow {
        mode: plan.mode,
        n: plan.n,
        k: plan.k,
        a: cell.a,
        b: cell.b,
        lambda: cell.lambda,
        eps: cell.eps,
        attack: plan.attack.name(),
        preset: plan.preset,
        seed,
        replicate,
        error: None,
        rho_final: None,
        rounds_used: None,
        wall_ms: None,
        error_iqr: None,
        trace_path: None,
        status: "ok".to_string(),
    };
    let rows: Vec<SweepRow> = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, r)| {
                let cell = &cells[c];
                let seed = plan.replicate_seed(c, r);
                let mut row = base_row(cell, seed, r.to_string());
                let outcome = run_replicate(plan, cell, seed).and_then(|rep| {
                    let trace = match &plan.trace_dir {
                        Some(dir) => Some(write_trace(dir, c, r, &rep)?),
                        None => None,
                    };
                    Ok((rep, trace))
                });
                match outcome {
                    Ok((rep, trace)) => {
                        row.error = rep.final_error;
                        row.rho_final = rep.rho_final();
                        row.rounds_used = Some(rep.rounds.len());
                        row.wall_ms = Some(rep.wall_ms);
                        row.trace_path = trace;
                    }
                    Err(e) => {
                        log::warn!("cell {c} replicate {r} failed: {e}");
                        row.status = e.to_string();
                    }
                }
                row
            })
            .collect()
    });
    let mut out = rows;
    let mut medians = Vec::with_capacity(cells.len());
    for (c, cell) in cells.iter().enumerate() {
        let mut errs: Vec<f64> = out[c * plan.replicates..(c + 1) * plan.replicates]
            .iter()
            .filter_map(|r| r.error)
            .collect();
        errs.sort_by(f64::total_cmp);
        let median = quantile(&errs, 0.5);
        medians.push(median);
        let mut agg = base_row(cell, derive_seed(plan.master_seed, &[c as u64]), "agg".to_string());
        if errs.is_empty() {
            agg.status = "no successful replicates".to_string();
        } else {
            agg.error = Some(median);
            agg.error_iqr = Some(quantile(&errs, 0.75) - quantile(&errs, 0.25));
        }
        out.push(agg);
    }
    let trends = trends(plan, &cells, &medians);
    Ok(SweepResult {
        rows: out,
        cell_medians: medians,
        trends,
    })
}
