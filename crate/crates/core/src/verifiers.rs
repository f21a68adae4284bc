//! Monte Carlo checks of the model's probabilistic statements at desk scale.
//!
//! Each verifier runs independent trials on derived RNG streams, keeps every
//! raw statistic, and issues `pass` iff the per-trial pass rate reaches the
//! configured bound. Analytic bounds are recomputed from [`crate::stats`] at
//! run time.

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::graph::Graph;
use crate::instance::{apply_node_corruption, gen_sbm, gen_z2, CorruptionSelection, InstanceSpec, NodeAttack};
use crate::rng::{derived_rng, stage};
use crate::rounding::{raw_disagreement, Labelling};
use crate::linalg::opnorm;
use crate::stats::{
    best_rectangle_sum, dconst, demean, prune_high_degree, rconst, resolvability_slack, snr, RectMode,
    ResolvabilityParams,
};

/// Master seed the acceptance suite and `verify` use by default.
pub const MASTER_SEED: u64 = 0x5EED_2024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                min: f64::NAN,
                median: f64::NAN,
                max: f64::NAN,
            };
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let m = v.len();
        let median = if m % 2 == 1 {
            v[m / 2]
        } else {
            0.5 * (v[m / 2 - 1] + v[m / 2])
        };
        Self {
            min: v[0],
            median,
            max: v[m - 1],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifierReport {
    pub claim_id: String,
    pub trials: usize,
    pub passes: usize,
    pub pass_rate: f64,
    /// Required pass rate.
    pub threshold: f64,
    /// Summary of the per-trial statistic.
    pub stats: Summary,
    pub values: Vec<f64>,
    /// Configured thresholds and derived bounds, by name.
    pub config: Vec<(String, f64)>,
    pub verdict: Verdict,
}

impl VerifierReport {
    fn new(claim_id: &str, values: Vec<f64>, passed: Vec<bool>, threshold: f64, config: Vec<(&str, f64)>) -> Self {
        let trials = passed.len();
        let passes = passed.iter().filter(|&&p| p).count();
        let pass_rate = if trials == 0 { 0.0 } else { passes as f64 / trials as f64 };
        Self {
            claim_id: claim_id.to_string(),
            trials,
            passes,
            pass_rate,
            threshold,
            stats: Summary::of(&values),
            values,
            config: config.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            verdict: if pass_rate >= threshold { Verdict::Pass } else { Verdict::Fail },
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub const CSV_HEADER: &'static str = "claim_id,trials,pass_rate,threshold,verdict";

    pub fn csv_row(&self) -> String {
        let verdict = match self.verdict {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        };
        format!("{},{},{},{},{}", self.claim_id, self.trials, self.pass_rate, self.threshold, verdict)
    }
}

fn claim_tag(id: &str) -> u64 {
    id.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

fn trial_rng(seed: u64, id: &str, trial: usize) -> crate::rng::Rng {
    derived_rng(seed, &[stage::VERIFY, claim_tag(id), trial as u64])
}

fn pure_sbm(n: usize, a: f64, b: f64, rng: &mut crate::rng::Rng) -> Result<(Graph, Labelling)> {
    let spec = InstanceSpec::balanced(n, 2, a, b, 0);
    let (g, truth) = gen_sbm(&spec, rng)?;
    let labels = Labelling::new(truth.partition, 2)?;
    Ok((g, labels))
}

fn signs_of(l: &Labelling) -> Vec<f64> {
    l.assignment.iter().map(|&c| if c == 0 { 1.0 } else { -1.0 }).collect()
}

fn times_l(m: &DMatrix<f64>, s: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s[i] * s[j])
}

/// Binomial tail of the row-sum difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinomialTailConfig {
    pub a: f64,
    pub b: f64,
    pub n: usize,
    pub alpha: f64,
    pub theta: f64,
    pub samples: usize,
}

impl BinomialTailConfig {
    pub fn desk() -> Self {
        Self {
            a: 40.0,
            b: 5.0,
            n: 400,
            alpha: 0.5,
            theta: 0.0,
            samples: 100_000,
        }
    }
}

/// Analytic tail bound `exp(−C/2 + (θ/2) ln R(a/n, b/n))`.
pub fn binomial_tail_bound(a: f64, b: f64, n: usize, theta: f64) -> Result<f64> {
    let nf = n as f64;
    let r = rconst(a / nf, b / nf)?;
    Ok((-snr(a, b) / 2.0 + theta / 2.0 * r.ln()).exp())
}

/// Samples both difference distributions. A sample passes when it is not in
/// the bad tail; the verdict requires the empirical tail not to exceed the
/// bound by more than three binomial standard errors.
pub fn verify_binomial_tail(cfg: &BinomialTailConfig, seed: u64) -> Result<VerifierReport> {
    let BinomialTailConfig {
        a,
        b,
        n,
        alpha,
        theta,
        samples,
    } = *cfg;
    if !(b < a) || !(alpha > 0.0 && alpha < 1.0) || samples == 0 {
        return Err(param("need b < a, alpha in (0, 1) and samples > 0"));
    }
    let nf = n as f64;
    let big_k = (1.0 - 2.0 * alpha) * nf * dconst(a / nf, b / nf)?;
    let bound = binomial_tail_bound(a, b, n, theta)?;
    let n_in = (alpha * nf).round() as u64;
    let n_out = n as u64 - n_in;
    let draw = |p: f64, m: u64, rng: &mut crate::rng::Rng| -> f64 {
        Binomial::new(m, p).expect("valid binomial").sample(rng) as f64
    };
    let mut rng = trial_rng(seed, "binomial_tail", 0);
    let mut bad1 = 0usize;
    let mut bad2 = 0usize;
    for _ in 0..samples {
        let x1 = draw(a / nf, n_in, &mut rng) - draw(b / nf, n_out, &mut rng);
        if x1 + big_k <= theta {
            bad1 += 1;
        }
        let x2 = draw(b / nf, n_in, &mut rng) - draw(a / nf, n_out, &mut rng);
        if x2 + big_k >= -theta {
            bad2 += 1;
        }
    }
    let s = samples as f64;
    let p1 = bad1 as f64 / s;
    let p2 = bad2 as f64 / s;
    let worst = p1.max(p2);
    let se = (bound.max(worst) * (1.0 - bound.max(worst)).max(0.0) / s).sqrt();
    let allowed = bound + 3.0 * se;
    let passed = vec![worst <= allowed];
    Ok(VerifierReport::new(
        "binomial_tail",
        vec![p1, p2],
        passed,
        1.0,
        vec![
            ("a", a),
            ("b", b),
            ("n", nf),
            ("alpha", alpha),
            ("theta", theta),
            ("samples", s),
            ("K", big_k),
            ("bound", bound),
            ("allowed", allowed),
        ],
    ))
}

/// Row-sum resolvability of `(A − D J) ⊙ L` on pure SBMs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvabilityConfig {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    /// Desk stand-in for the analysis constant `K`.
    pub big_k: f64,
    pub theta: f64,
    pub budget_frac: f64,
    pub trials: usize,
    pub pass_bound: f64,
    /// Check a random subset at the size bound with halved `d₁`.
    pub restricted: bool,
}

impl ResolvabilityConfig {
    /// Frozen by one-time calibration on a separate seed range.
    pub fn desk() -> Self {
        Self {
            n: 400,
            a: 60.0,
            b: 10.0,
            big_k: 2.0,
            theta: 0.05,
            budget_frac: 0.1,
            trials: 50,
            pass_bound: 0.9,
            restricted: false,
        }
    }

    pub fn desk_restricted() -> Self {
        Self {
            restricted: true,
            pass_bound: 0.85,
            ..Self::desk()
        }
    }
}

pub fn verify_resolvability(cfg: &ResolvabilityConfig, seed: u64) -> Result<VerifierReport> {
    if !(cfg.b <= cfg.a) || cfg.trials == 0 {
        return Err(param("need b ≤ a and trials > 0"));
    }
    let id = if cfg.restricted {
        "resolvability_restricted"
    } else {
        "resolvability"
    };
    let root = (cfg.a + cfg.b).sqrt();
    let c = snr(cfg.a, cfg.b);
    let keep_frac = if cfg.restricted {
        (1.0 - cfg.big_k / (10.0 * c.sqrt())).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let results: Vec<Result<f64>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, id, t);
            let (g, labels) = pure_sbm(cfg.n, cfg.a, cfg.b.min(cfg.a), &mut rng)?;
            let a_hat = if cfg.a > cfg.b {
                demean(&g, cfg.a, cfg.b)?.matrix
            } else {
                // No signal: demean by the common edge density.
                g.to_matrix().add_scalar(-cfg.a / cfg.n as f64)
            };
            let x = times_l(&a_hat, &signs_of(&labels));
            if cfg.restricted {
                let keep = (keep_frac * cfg.n as f64).ceil() as usize;
                let mut idx: Vec<usize> = (0..cfg.n).collect();
                rand::seq::SliceRandom::shuffle(idx.as_mut_slice(), &mut rng);
                idx.truncate(keep);
                idx.sort_unstable();
                let sub = DMatrix::from_fn(keep, keep, |i, j| x[(idx[i], idx[j])]);
                let removed = (cfg.n - keep) as f64 / cfg.n as f64;
                let params = ResolvabilityParams {
                    d1: 0.5 * cfg.big_k * root,
                    d2: 1.1 * (cfg.theta + removed) * root,
                    budget_frac: cfg.budget_frac,
                };
                Ok(resolvability_slack(&sub, &params)?.0)
            } else {
                let params = ResolvabilityParams {
                    d1: cfg.big_k * root,
                    d2: cfg.theta * root,
                    budget_frac: cfg.budget_frac,
                };
                Ok(resolvability_slack(&x, &params)?.0)
            }
        })
        .collect();
    let values = results.into_iter().collect::<Result<Vec<f64>>>()?;
    let passed = values.iter().map(|&s| s >= 0.0).collect();
    Ok(VerifierReport::new(
        id,
        values,
        passed,
        cfg.pass_bound,
        vec![
            ("n", cfg.n as f64),
            ("a", cfg.a),
            ("b", cfg.b),
            ("K", cfg.big_k),
            ("theta", cfg.theta),
            ("budget_frac", cfg.budget_frac),
            ("keep_frac", keep_frac),
        ],
    ))
}

/// Rectangle sums of centered Bernoulli matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectangleConfig {
    pub n: usize,
    pub sigma: f64,
    pub n1: usize,
    pub n2: usize,
    pub trials: usize,
    pub pass_bound: f64,
}

impl RectangleConfig {
    pub fn desk() -> Self {
        Self {
            n: 500,
            sigma: (40.0f64 / 500.0).sqrt(),
            n1: 10,
            n2: 10,
            trials: 50,
            pass_bound: 0.95,
        }
    }
}

/// Entries are `Bernoulli(σ²) − σ²`: mean zero, variance below `σ²`,
/// bounded by one. The searched rectangle sums are lower bounds on the true
/// extremes, so a failure is conclusive and a pass is relative to the search.
pub fn verify_rectangle_sums(cfg: &RectangleConfig, seed: u64) -> Result<VerifierReport> {
    let RectangleConfig {
        n,
        sigma,
        n1,
        n2,
        trials,
        pass_bound,
    } = *cfg;
    let desk_cap = n / 10;
    if n1 == 0 || n2 == 0 || n1 > desk_cap || n2 > desk_cap {
        return Err(Error::Precondition(format!(
            "rectangle sides ({n1}, {n2}) must lie in [1, n/10 = {desk_cap}]"
        )));
    }
    if !(sigma > 0.0 && sigma < 1.0) || trials == 0 {
        return Err(param("need sigma in (0, 1) and trials > 0"));
    }
    let p = sigma * sigma;
    let limit = (n1 + n2) as f64 * sigma * (n as f64).sqrt();
    let results: Vec<Result<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, "rectangle_sums", t);
            let m = DMatrix::from_fn(n, n, |_, _| if rng.gen::<f64>() < p { 1.0 - p } else { -p });
            let hi = best_rectangle_sum(&m, n1, n2, RectMode::Max)?.value;
            let lo = best_rectangle_sum(&m, n1, n2, RectMode::Min)?.value;
            Ok(hi.abs().max(lo.abs()))
        })
        .collect();
    let values = results.into_iter().collect::<Result<Vec<f64>>>()?;
    let passed = values.iter().map(|&v| v <= limit).collect();
    Ok(VerifierReport::new(
        "rectangle_sums",
        values,
        passed,
        pass_bound,
        vec![
            ("n", n as f64),
            ("sigma", sigma),
            ("n1", n1 as f64),
            ("n2", n2 as f64),
            ("limit", limit),
        ],
    ))
}

/// Operator norm of the centered adjacency after degree pruning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPruningConfig {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub trials: usize,
    /// Frozen desk constant bounding the median `χ̂`.
    pub chi_max: f64,
}

impl SpectralPruningConfig {
    pub fn desk() -> Self {
        Self {
            n: 1000,
            a: 20.0,
            b: 5.0,
            trials: 30,
            chi_max: 4.0,
        }
    }
}

/// Per-trial outcome of the pruning check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruningTrial {
    pub chi: f64,
    pub kept_frac: f64,
}

/// `χ̂ = ‖(A − ((a+b)/2n)J − ((a−b)/2n)L)_{S×S}‖ / √(a+b)` with `S` the nodes
/// of degree at most `20a`.
pub fn pruning_trial(g: &Graph, labels: &Labelling, a: f64, b: f64) -> PruningTrial {
    let n = g.n();
    let nf = n as f64;
    let keep = prune_high_degree(g, 20.0 * a);
    let s = signs_of(labels);
    let m = keep.len();
    let centered = DMatrix::from_fn(m, m, |i, j| {
        let (u, v) = (keep[i], keep[j]);
        let adj = if g.has_edge(u, v) { 1.0 } else { 0.0 };
        adj - (a + b) / (2.0 * nf) - (a - b) / (2.0 * nf) * s[u] * s[v]
    });
    PruningTrial {
        chi: opnorm(&centered).value / (a + b).sqrt(),
        kept_frac: m as f64 / nf,
    }
}

/// Passes when the median `χ̂` is at most `chi_max` (pass bound 0.5 on the
/// per-trial test `χ̂ ≤ chi_max`). Kept fractions are reported in `config`.
pub fn verify_spectral_pruning(cfg: &SpectralPruningConfig, seed: u64) -> Result<VerifierReport> {
    if !(cfg.b <= cfg.a) || cfg.trials == 0 {
        return Err(param("need b ≤ a and trials > 0"));
    }
    let trials: Vec<Result<PruningTrial>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, "spectral_pruning", t);
            let spec = InstanceSpec::balanced(cfg.n, 2, cfg.a, cfg.b, 0);
            let (g, truth) = gen_sbm(&spec, &mut rng)?;
            let labels = Labelling::new(truth.partition, 2)?;
            Ok(pruning_trial(&g, &labels, cfg.a, cfg.b))
        })
        .collect();
    let trials = trials.into_iter().collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = trials.iter().map(|t| t.chi).collect();
    let c = snr(cfg.a, cfg.b);
    let size_floor = 1.0 - (-2.0 * c).exp();
    let size_ok = trials.iter().filter(|t| t.kept_frac >= size_floor).count() as f64 / trials.len() as f64;
    let passed = values.iter().map(|&x| x <= cfg.chi_max).collect();
    Ok(VerifierReport::new(
        "spectral_pruning",
        values,
        passed,
        0.5,
        vec![
            ("n", cfg.n as f64),
            ("a", cfg.a),
            ("b", cfg.b),
            ("chi_max", cfg.chi_max),
            ("size_floor", size_floor),
            ("size_ok_rate", size_ok),
        ],
    ))
}

/// Row-sum resolvability of `A ⊙ L` for ℤ₂ synchronization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Z2RowsumConfig {
    pub n: usize,
    pub lambda: f64,
    pub big_k: f64,
    pub theta: f64,
    pub trials: usize,
    pub pass_bound: f64,
}

impl Z2RowsumConfig {
    pub fn desk() -> Self {
        Self {
            n: 300,
            lambda: 6.0,
            big_k: 2.0,
            theta: 0.05,
            trials: 50,
            pass_bound: 0.9,
        }
    }
}

/// Slack of `A ⊙ L` at `(K√n, θ√n)` with budget `0.1n` on one instance.
pub fn z2_rowsum_slack(inst_matrix: &DMatrix<f64>, signs: &[f64], big_k: f64, theta: f64) -> Result<f64> {
    let n = inst_matrix.nrows() as f64;
    let params = ResolvabilityParams {
        d1: big_k * n.sqrt(),
        d2: theta * n.sqrt(),
        budget_frac: 0.1,
    };
    Ok(resolvability_slack(&times_l(inst_matrix, signs), &params)?.0)
}

pub fn verify_z2_rowsums(cfg: &Z2RowsumConfig, seed: u64) -> Result<VerifierReport> {
    if !(cfg.lambda >= 0.0) || cfg.trials == 0 {
        return Err(param("need lambda ≥ 0 and trials > 0"));
    }
    let results: Vec<Result<f64>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, "z2_rowsums", t);
            let (inst, truth) = gen_z2(cfg.n, cfg.lambda, &mut rng)?;
            let signs: Vec<f64> = truth
                .sign_vector
                .as_ref()
                .ok_or_else(|| param("missing sign vector"))?
                .iter()
                .map(|&s| s as f64)
                .collect();
            z2_rowsum_slack(&inst.matrix, &signs, cfg.big_k, cfg.theta)
        })
        .collect();
    let values = results.into_iter().collect::<Result<Vec<f64>>>()?;
    let passed = values.iter().map(|&s| s >= 0.0).collect();
    Ok(VerifierReport::new(
        "z2_rowsums",
        values,
        passed,
        cfg.pass_bound,
        vec![
            ("n", cfg.n as f64),
            ("lambda", cfg.lambda),
            ("K", cfg.big_k),
            ("theta", cfg.theta),
            ("budget_frac", 0.1),
        ],
    ))
}

/// Degree-preserving rewire attack against one-step majority voting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MajorityAttackConfig {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub eps: f64,
    pub trials: usize,
    pub min_error: f64,
    pub pass_bound: f64,
}

impl MajorityAttackConfig {
    pub fn desk() -> Self {
        Self {
            n: 2000,
            a: 110.0,
            b: 90.0,
            eps: 0.3,
            trials: 30,
            min_error: 0.3,
            pass_bound: 0.9,
        }
    }
}

/// Attack threshold `2(a−b)/(a+b)`.
pub fn majority_threshold(a: f64, b: f64) -> f64 {
    2.0 * (a - b) / (a + b)
}

/// Each node takes the most common label among its neighbours (ties and
/// isolated nodes keep their label).
pub fn majority_vote(g: &Graph, labels: &Labelling) -> Labelling {
    let k = labels.k;
    let assignment = (0..g.n())
        .map(|u| {
            let mut counts = vec![0usize; k];
            for v in g.neighbors(u) {
                counts[labels.assignment[v]] += 1;
            }
            let own = labels.assignment[u];
            let best = (0..k).max_by_key(|&c| (counts[c], c == own)).unwrap_or(own);
            if counts[best] == counts[own] {
                own
            } else {
                best
            }
        })
        .collect();
    Labelling {
        assignment,
        k,
    }
}

/// Attacked graph and the majority-vote error from exact labels, measured
/// without relabeling (the start fixes the orientation).
pub fn majority_attack_trial(cfg: &MajorityAttackConfig, rng: &mut crate::rng::Rng) -> Result<(Graph, Labelling, f64)> {
    let spec = InstanceSpec::balanced(cfg.n, 2, cfg.a, cfg.b, 0);
    let (g, mut truth) = gen_sbm(&spec, rng)?;
    let labels = Labelling::new(truth.partition.clone(), 2)?;
    let attacked = apply_node_corruption(
        &g,
        &mut truth,
        NodeAttack::RewireOpposite,
        cfg.eps,
        CorruptionSelection::Uniform,
        rng,
    )?;
    let voted = majority_vote(&attacked, &labels);
    let err = raw_disagreement(&voted, &labels);
    Ok((attacked, labels, err))
}

pub fn verify_majority_attack(cfg: &MajorityAttackConfig, seed: u64) -> Result<VerifierReport> {
    let threshold = majority_threshold(cfg.a, cfg.b);
    if cfg.eps < threshold {
        return Err(Error::Precondition(format!(
            "eps={} is below the attack threshold 2(a−b)/(a+b) = {threshold}",
            cfg.eps
        )));
    }
    if cfg.trials == 0 {
        return Err(param("trials must be positive"));
    }
    let results: Vec<Result<f64>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, "majority_attack", t);
            Ok(majority_attack_trial(cfg, &mut rng)?.2)
        })
        .collect();
    let values = results.into_iter().collect::<Result<Vec<f64>>>()?;
    let passed = values.iter().map(|&e| e >= cfg.min_error).collect();
    Ok(VerifierReport::new(
        "majority_attack",
        values,
        passed,
        cfg.pass_bound,
        vec![
            ("n", cfg.n as f64),
            ("a", cfg.a),
            ("b", cfg.b),
            ("eps", cfg.eps),
            ("threshold", threshold),
            ("min_error", cfg.min_error),
        ],
    ))
}

/// Names accepted by [`run_claim`].
pub const CLAIMS: [&str; 7] = [
    "binomial_tail",
    "resolvability",
    "resolvability_restricted",
    "rectangle_sums",
    "spectral_pruning",
    "z2_rowsums",
    "majority_attack",
];

/// Optional replacements for the frozen desk values; fields a claim does
/// not use are ignored.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClaimOverrides {
    pub n: Option<usize>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub eps: Option<f64>,
    pub lambda: Option<f64>,
    pub trials: Option<usize>,
}

/// Runs one claim at its frozen desk configuration.
pub fn run_claim(id: &str, seed: u64) -> Result<VerifierReport> {
    run_claim_with(id, seed, &ClaimOverrides::default())
}

pub fn run_claim_with(id: &str, seed: u64, o: &ClaimOverrides) -> Result<VerifierReport> {
    match id {
        "binomial_tail" => {
            let d = BinomialTailConfig::desk();
            let cfg = BinomialTailConfig {
                a: o.a.unwrap_or(d.a),
                b: o.b.unwrap_or(d.b),
                n: o.n.unwrap_or(d.n),
                samples: o.trials.unwrap_or(d.samples),
                ..d
            };
            verify_binomial_tail(&cfg, seed)
        }
        "resolvability" | "resolvability_restricted" => {
            let d = if id == "resolvability" {
                ResolvabilityConfig::desk()
            } else {
                ResolvabilityConfig::desk_restricted()
            };
            let cfg = ResolvabilityConfig {
                n: o.n.unwrap_or(d.n),
                a: o.a.unwrap_or(d.a),
                b: o.b.unwrap_or(d.b),
                trials: o.trials.unwrap_or(d.trials),
                ..d
            };
            verify_resolvability(&cfg, seed)
        }
        "rectangle_sums" => {
            let d = RectangleConfig::desk();
            let cfg = RectangleConfig {
                n: o.n.unwrap_or(d.n),
                trials: o.trials.unwrap_or(d.trials),
                ..d
            };
            verify_rectangle_sums(&cfg, seed)
        }
        "spectral_pruning" => {
            let d = SpectralPruningConfig::desk();
            let cfg = SpectralPruningConfig {
                n: o.n.unwrap_or(d.n),
                a: o.a.unwrap_or(d.a),
                b: o.b.unwrap_or(d.b),
                trials: o.trials.unwrap_or(d.trials),
                ..d
            };
            verify_spectral_pruning(&cfg, seed)
        }
        "z2_rowsums" => {
            let d = Z2RowsumConfig::desk();
            let cfg = Z2RowsumConfig {
                n: o.n.unwrap_or(d.n),
                lambda: o.lambda.unwrap_or(d.lambda),
                trials: o.trials.unwrap_or(d.trials),
                ..d
            };
            verify_z2_rowsums(&cfg, seed)
        }
        "majority_attack" => {
            let d = MajorityAttackConfig::desk();
            let cfg = MajorityAttackConfig {
                n: o.n.unwrap_or(d.n),
                a: o.a.unwrap_or(d.a),
                b: o.b.unwrap_or(d.b),
                eps: o.eps.unwrap_or(d.eps),
                trials: o.trials.unwrap_or(d.trials),
                ..d
            };
            verify_majority_attack(&cfg, seed)
        }
        _ => Err(param(format!("unknown claim {id:?}; expected one of {CLAIMS:?}"))),
    }
}

/// Every claim at its frozen configuration.
pub fn run_suite(seed: u64) -> Result<Vec<VerifierReport>> {
    CLAIMS.iter().map(|id| run_claim(id, seed)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_median() {
        let s = Summary::of(&[3.0, 1.0, 2.0, 10.0]);
        assert_eq!((s.min, s.median, s.max), (1.0, 2.5, 10.0));
    }

    #[test]
    fn bound_increases_with_theta() {
        let grid: Vec<f64> = (0..10).map(|t| binomial_tail_bound(40.0, 5.0, 400, t as f64).unwrap()).collect();
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
        let at0 = binomial_tail_bound(40.0, 5.0, 400, 0.0).unwrap();
        assert!((at0 - (-snr(40.0, 5.0) / 2.0).exp()).abs() < 1e-15);
    }

    #[test]
    fn half_alpha_zeroes_shift() {
        let nf = 400.0;
        let k = (1.0 - 2.0 * 0.5) * nf * dconst(40.0 / nf, 5.0 / nf).unwrap();
        assert_eq!(k, 0.0);
    }

    #[test]
    fn rectangle_side_precondition() {
        let cfg = RectangleConfig {
            n1: 500,
            ..RectangleConfig::desk()
        };
        assert!(matches!(verify_rectangle_sums(&cfg, 1), Err(Error::Precondition(_))));
    }

    #[test]
    fn majority_below_threshold_is_rejected() {
        let cfg = MajorityAttackConfig {
            eps: 0.1,
            ..MajorityAttackConfig::desk()
        };
        assert!(matches!(verify_majority_attack(&cfg, 1), Err(Error::Precondition(_))));
    }

    #[test]
    fn majority_keeps_ties() {
        let mut g = Graph::empty(3);
        g.set_edge(0, 1, true);
        g.set_edge(0, 2, true);
        let l = Labelling::new(vec![0, 0, 1], 2).unwrap();
        let v = majority_vote(&g, &l);
        assert_eq!(v.assignment[0], 0);
        assert_eq!(v.assignment[1], 0);
    }
}
