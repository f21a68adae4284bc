//! End-to-end recovery: demean, initialize, early-exit test, boost.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::boost::{boost_loop, BoostMode, BoostParams, BoostRun};
use crate::error::{param, Result};
use crate::graph::Graph;
use crate::init_sdp::{solve_init_sbm, solve_init_z2, InitSolverConfig};
use crate::instance::Z2Instance;
use crate::rng::{derive_seed, stage};
use crate::rounding::{
    kmeans_rows, match_error, sign_round_z2, sign_round_z2_centered, KMeansConfig, Labelling,
};
use crate::stats::{demean, snr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Sbm2,
    Sbmk,
    Z2,
}

impl std::str::FromStr for Mode {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sbm2" => Ok(Mode::Sbm2),
            "sbmk" => Ok(Mode::Sbmk),
            "z2" => Ok(Mode::Z2),
            _ => Err(param(format!("unknown mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Theory,
    Desk,
}

impl std::str::FromStr for Preset {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theory" => Ok(Preset::Theory),
            "desk" => Ok(Preset::Desk),
            _ => Err(param(format!("unknown preset {s:?}"))),
        }
    }
}

/// The boosting program's `(ζ, K, d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProgramParams {
    pub zeta: f64,
    pub big_k: f64,
    pub d: f64,
}

/// Largest `ζ` kept by the theory preset.
pub const ZETA_CLAMP: f64 = 0.99;

/// Model parameters the presets depend on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub k: usize,
    pub alpha: f64,
    /// ℤ₂ signal strength; unused for graphs.
    pub lambda: f64,
}

/// Parameters as written in the algorithm boxes, before any clamping.
pub fn theory_params(mode: Mode, m: &ModelParams, chi: f64) -> ProgramParams {
    let c = snr(m.a, m.b);
    let a3 = m.alpha.powi(3);
    match mode {
        Mode::Sbm2 => ProgramParams {
            zeta: 4e5 / a3 * chi / c.sqrt(),
            big_k: 1e6 * chi / a3,
            d: (m.a + m.b).sqrt(),
        },
        Mode::Sbmk => {
            let k = m.k as f64;
            ProgramParams {
                zeta: 2e5 * k * k / m.alpha.powi(4) * chi / c.sqrt(),
                big_k: (10.0 * k / m.alpha).powi(10) * chi,
                d: (m.a + m.b).sqrt(),
            }
        }
        Mode::Z2 => ProgramParams {
            zeta: 1e5 / m.lambda,
            big_k: 1e6,
            d: (m.n as f64).sqrt(),
        },
    }
}

/// Calibrated desk values. `d` is set so that the per-node threshold
/// `10dK³` is `eta` times the expected row sum of `Â ⊙ L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeskPreset {
    pub zeta: f64,
    pub big_k: f64,
    pub eta: f64,
}

impl Default for DeskPreset {
    fn default() -> Self {
        Self {
            zeta: 0.2,
            big_k: 49.0,
            eta: 0.15,
        }
    }
}

/// Expected row sum of `Â ⊙ L` under correct labels: `(a−b)/2` for two
/// communities, `(a−b)/k` per pair block, `λ√n` for ℤ₂.
pub fn row_signal(mode: Mode, m: &ModelParams) -> f64 {
    match mode {
        Mode::Sbm2 => (m.a - m.b) / 2.0,
        Mode::Sbmk => (m.a - m.b) / m.k as f64,
        Mode::Z2 => m.lambda * (m.n as f64).sqrt(),
    }
}

impl DeskPreset {
    pub fn params(&self, mode: Mode, m: &ModelParams) -> ProgramParams {
        let k3 = self.big_k.powi(3);
        ProgramParams {
            zeta: self.zeta,
            big_k: self.big_k,
            d: self.eta * row_signal(mode, m) / (10.0 * k3),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub preset: Preset,
    pub chi: f64,
    pub init: InitSolverConfig,
    /// Solver settings; `zeta`, `big_k` and `d` are overwritten by the preset.
    pub boost: BoostParams,
    pub desk: DeskPreset,
    pub kmeans_restarts: usize,
    /// ℤ₂ rounding centers `W` at its mean entry instead of `1/2`.
    pub z2_mean_centering: bool,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn new(mode: Mode, preset: Preset, seed: u64) -> Self {
        Self {
            mode,
            preset,
            chi: 1.6,
            init: InitSolverConfig::default(),
            boost: BoostParams::default(),
            desk: DeskPreset::default(),
            kmeans_restarts: 20,
            z2_mean_centering: true,
            seed,
        }
    }

    /// Resolved boosting parameters; both presets are logged.
    pub fn resolve(&self, m: &ModelParams) -> Result<BoostParams> {
        let theory = theory_params(self.mode, m, self.chi);
        let desk = self.desk.params(self.mode, m);
        log::info!("theory preset: {theory:?}; desk preset: {desk:?}");
        let chosen = match self.preset {
            Preset::Desk => desk,
            Preset::Theory => {
                let mut p = theory;
                if p.zeta >= 1.0 {
                    log::warn!("theory zeta = {} is not below 1; clamped to {ZETA_CLAMP}", p.zeta);
                    p.zeta = ZETA_CLAMP;
                }
                p
            }
        };
        let params = BoostParams {
            zeta: chosen.zeta,
            big_k: chosen.big_k,
            d: chosen.d,
            ..self.boost.clone()
        };
        params.validate()?;
        Ok(params)
    }
}

/// Per-round record, with the error when ground truth is supplied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundTrace {
    pub round: usize,
    pub rho: f64,
    pub flagged_infeasible: bool,
    pub flips: usize,
    pub error: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    #[serde(skip)]
    pub labels: Labelling,
    #[serde(skip)]
    pub init_labels: Labelling,
    pub early_exit: bool,
    pub init_objective: f64,
    pub init_flagged: bool,
    pub init_error: Option<f64>,
    pub final_error: Option<f64>,
    pub zeta: f64,
    pub big_k: f64,
    pub d: f64,
    pub rounds: Vec<RoundTrace>,
    /// Set when any boosting round was infeasible at `ζ`.
    pub any_flagged: bool,
    pub wall_ms: u128,
}

impl PipelineReport {
    pub fn rho_final(&self) -> Option<f64> {
        self.rounds.last().map(|r| r.rho)
    }
}

fn score(l: &Labelling, truth: Option<&Labelling>) -> Result<Option<f64>> {
    truth.map(|t| match_error(l, t, t.k.max(l.k))).transpose()
}

/// Initial labelling with the init program's objective and feasibility flag.
#[derive(Debug, Clone)]
pub struct InitOutcome {
    pub labels: Labelling,
    pub objective: f64,
    pub flagged: bool,
}

/// Boosting loop on the stage stream `derive_seed(seed, [BOOST])`.
pub fn boost_stage(
    a: &nalgebra::DMatrix<f64>,
    init: &Labelling,
    params: &BoostParams,
    mode: BoostMode,
    seed: u64,
) -> Result<BoostRun> {
    boost_loop(a, init, params, mode, derive_seed(seed, &[stage::BOOST]))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    a: &nalgebra::DMatrix<f64>,
    init: InitOutcome,
    early_exit: bool,
    params: &BoostParams,
    mode: BoostMode,
    truth: Option<&Labelling>,
    seed: u64,
    start: Instant,
) -> Result<PipelineReport> {
    let run = if early_exit {
        None
    } else {
        Some(boost_stage(a, &init.labels, params, mode, seed)?)
    };
    let mut rounds = Vec::new();
    if let Some(BoostRun { rounds: recs, history, .. }) = &run {
        for (r, l) in recs.iter().zip(history) {
            rounds.push(RoundTrace {
                round: r.round,
                rho: r.rho,
                flagged_infeasible: r.flagged_infeasible,
                flips: r.flips,
                error: score(l, truth)?,
            });
        }
    }
    let any_flagged = rounds.iter().any(|r| r.flagged_infeasible);
    if any_flagged {
        log::warn!("some boosting rounds were infeasible; their flips were skipped");
    }
    let labels = run.map(|r| r.labels).unwrap_or_else(|| init.labels.clone());
    Ok(PipelineReport {
        init_error: score(&init.labels, truth)?,
        final_error: score(&labels, truth)?,
        labels,
        init_labels: init.labels,
        early_exit,
        init_objective: init.objective,
        init_flagged: init.flagged,
        zeta: params.zeta,
        big_k: params.big_k,
        d: params.d,
        rounds,
        any_flagged,
        wall_ms: start.elapsed().as_millis(),
    })
}

fn kmeans_cfg(cfg: &PipelineConfig) -> KMeansConfig {
    KMeansConfig {
        restarts: cfg.kmeans_restarts,
        seed: derive_seed(cfg.seed, &[stage::KMEANS]),
        ..KMeansConfig::default()
    }
}

/// Init program on the graph plus k-means rounding.
pub fn initialize_graph(g: &Graph, a: f64, b: f64, k: usize, cfg: &PipelineConfig) -> Result<InitOutcome> {
    let init_cfg = InitSolverConfig {
        seed: derive_seed(cfg.seed, &[stage::INIT]),
        ..cfg.init
    };
    let sol = solve_init_sbm(g, a, b, cfg.chi, &init_cfg)?;
    let km = kmeans_rows(&sol.w, k, &kmeans_cfg(cfg))?;
    Ok(InitOutcome {
        labels: km.labelling,
        objective: sol.objective,
        flagged: sol.flagged_infeasible,
    })
}

fn check_graph(a: f64, b: f64, eps: f64, alpha: f64) -> Result<()> {
    if !(b < a) {
        return Err(param(format!("need b < a, got a={a}, b={b}")));
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(param(format!("eps={eps} must lie in [0, 1)")));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(param(format!("alpha={alpha} must lie in (0, 1]")));
    }
    Ok(())
}

/// Two communities. Returns the initial labelling when `ε ≥ 1/√C`.
pub fn run_sbm2(
    g: &Graph,
    a: f64,
    b: f64,
    eps: f64,
    alpha: f64,
    cfg: &PipelineConfig,
    truth: Option<&Labelling>,
) -> Result<PipelineReport> {
    check_graph(a, b, eps, alpha)?;
    let start = Instant::now();
    let m = ModelParams {
        n: g.n(),
        a,
        b,
        k: 2,
        alpha,
        lambda: 0.0,
    };
    let params = cfg.resolve(&m)?;
    let a_hat = demean(g, a, b)?;
    let init = initialize_graph(g, a, b, 2, cfg)?;
    let early = eps >= 1.0 / snr(a, b).sqrt();
    finish(&a_hat.matrix, init, early, &params, BoostMode::Two, truth, cfg.seed, start)
}

/// `k ≥ 3` communities with pairwise constraint blocks.
#[allow(clippy::too_many_arguments)]
pub fn run_sbmk(
    g: &Graph,
    a: f64,
    b: f64,
    eps: f64,
    k: usize,
    alpha: f64,
    cfg: &PipelineConfig,
    truth: Option<&Labelling>,
) -> Result<PipelineReport> {
    check_graph(a, b, eps, alpha)?;
    if k < 3 {
        return Err(param(format!("run_sbmk needs k ≥ 3, got {k}")));
    }
    let start = Instant::now();
    let m = ModelParams {
        n: g.n(),
        a,
        b,
        k,
        alpha,
        lambda: 0.0,
    };
    let params = cfg.resolve(&m)?;
    let a_hat = demean(g, a, b)?;
    let init = initialize_graph(g, a, b, k, cfg)?;
    let early = eps >= 1.0 / snr(a, b).sqrt();
    finish(&a_hat.matrix, init, early, &params, BoostMode::K { alpha }, truth, cfg.seed, start)
}

/// Init program on the observation plus sign rounding.
pub fn initialize_z2(inst: &Z2Instance, lambda: f64, cfg: &PipelineConfig) -> Result<InitOutcome> {
    let init_cfg = InitSolverConfig {
        seed: derive_seed(cfg.seed, &[stage::INIT]),
        ..cfg.init
    };
    let sol = solve_init_z2(inst, lambda, &init_cfg)?;
    let rounding = if cfg.z2_mean_centering {
        sign_round_z2_centered(&sol.w)?
    } else {
        sign_round_z2(&sol.w)?
    };
    if rounding.degenerate {
        log::warn!("sign rounding is degenerate; labels are arbitrary on ties");
    }
    Ok(InitOutcome {
        labels: rounding.labelling,
        objective: sol.objective,
        flagged: sol.flagged_infeasible,
    })
}

/// ℤ₂ synchronization. Boosting runs on the raw observation. Returns the
/// initial labelling when `ε ≥ 1/λ`.
pub fn run_z2(
    inst: &Z2Instance,
    lambda: f64,
    eps: f64,
    cfg: &PipelineConfig,
    truth: Option<&Labelling>,
) -> Result<PipelineReport> {
    if !(lambda > 0.0) {
        return Err(param(format!("lambda={lambda} must be positive")));
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(param(format!("eps={eps} must lie in [0, 1)")));
    }
    let start = Instant::now();
    let m = ModelParams {
        n: inst.n,
        a: 0.0,
        b: 0.0,
        k: 2,
        alpha: 1.0,
        lambda,
    };
    let params = cfg.resolve(&m)?;
    let init = initialize_z2(inst, lambda, cfg)?;
    let early = eps >= 1.0 / lambda;
    finish(&inst.matrix, init, early, &params, BoostMode::Z2, truth, cfg.seed, start)
}
