//! Scalar constants of the model, demeaning, the exact resolvability oracle,
//! and rectangle-sum / degree-pruning checkers.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::rng_from_seed;

pub use crate::linalg::{opnorm, OpNorm};

fn check_prob(name: &str, p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("{name}={p} must lie in (0, 1)")));
    }
    Ok(())
}

/// Demeaning constant `ln((1−q)/(1−p)) / ln(p(1−q)/(q(1−p)))`.
pub fn dconst(p: f64, q: f64) -> Result<f64> {
    check_prob("p", p)?;
    check_prob("q", q)?;
    if p == q {
        return Err(Error::Domain(format!("dconst undefined for p = q = {p}")));
    }
    // ln_1p keeps precision for the small edge probabilities of sparse graphs.
    let num = (-q).ln_1p() - (-p).ln_1p();
    let den = p.ln() - q.ln() + num;
    Ok(num / den)
}

/// Likelihood ratio `p(1−q) / (q(1−p))`.
pub fn rconst(p: f64, q: f64) -> Result<f64> {
    check_prob("p", p)?;
    check_prob("q", q)?;
    Ok(p * (1.0 - q) / (q * (1.0 - p)))
}

/// Signal-to-noise ratio `(√a − √b)²`.
pub fn snr(a: f64, b: f64) -> f64 {
    let d = a.sqrt() - b.sqrt();
    d * d
}

/// A real matrix together with the constant subtracted from every entry.
#[derive(Debug, Clone)]
pub struct DemeanedMatrix {
    pub matrix: DMatrix<f64>,
    pub demean_constant: f64,
}

impl DemeanedMatrix {
    /// Wraps a matrix used without demeaning.
    pub fn raw(matrix: DMatrix<f64>) -> Self {
        Self {
            matrix,
            demean_constant: 0.0,
        }
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    /// Adds the constant back.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.matrix.add_scalar(self.demean_constant)
    }
}

/// `A − D(a/n, b/n)·J`.
pub fn demean(g: &Graph, a: f64, b: f64) -> Result<DemeanedMatrix> {
    if !(b < a) {
        return Err(Error::Domain(format!("demean requires b < a, got a={a}, b={b}")));
    }
    let n = g.n() as f64;
    let c = dconst(a / n, b / n)?;
    Ok(DemeanedMatrix {
        matrix: g.to_matrix().add_scalar(-c),
        demean_constant: c,
    })
}

/// Parameters of the resolvability functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvabilityParams {
    pub d1: f64,
    pub d2: f64,
    pub budget_frac: f64,
}

impl ResolvabilityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.d1 >= 0.0 && self.d2 >= 0.0) {
            return Err(Error::Parameter("d1 and d2 must be nonnegative".into()));
        }
        if !(self.budget_frac > 0.0 && self.budget_frac <= 0.5) {
            return Err(Error::Parameter(format!(
                "budget_frac={} must lie in (0, 0.5]",
                self.budget_frac
            )));
        }
        Ok(())
    }
}

/// Minimizes `Σᵢ xᵢ(sᵢ − d₁) + d₂n` over `x ∈ [0,1]ⁿ`, `Σx ≤ budget_frac·n`,
/// where `sᵢ` are the row sums of `x_mat`. Returns the slack and the
/// minimizing weights. The matrix is resolvable iff the slack is nonnegative.
pub fn resolvability_slack(
    x_mat: &DMatrix<f64>,
    params: &ResolvabilityParams,
) -> Result<(f64, Vec<f64>)> {
    params.validate()?;
    let n = x_mat.nrows();
    if x_mat.ncols() != n {
        return Err(Error::Dimension {
            expected: n,
            got: x_mat.ncols(),
        });
    }
    let sums = crate::linalg::row_sums(x_mat);
    let values: Vec<f64> = sums.iter().map(|s| s - params.d1).collect();
    let budget = params.budget_frac * n as f64;
    let (value, x) = greedy_budgeted_min(&values, budget);
    Ok((value + params.d2 * n as f64, x))
}

/// Exact minimizer of `Σ xᵢ vᵢ` over `x ∈ [0,1]ⁿ`, `Σx ≤ budget`: take the
/// most negative entries first, the last one fractionally.
pub fn greedy_budgeted_min(values: &[f64], budget: f64) -> (f64, Vec<f64>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]).then(i.cmp(&j)));
    let mut x = vec![0.0; values.len()];
    let mut left = budget.max(0.0);
    let mut total = 0.0;
    for &i in &order {
        if values[i] >= 0.0 || left <= 0.0 {
            break;
        }
        let take = left.min(1.0);
        x[i] = take;
        total += take * values[i];
        left -= take;
    }
    (total, x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RectMode {
    Max,
    Min,
}

/// A combinatorial rectangle and the sum of the entries it covers.
#[derive(Debug, Clone, PartialEq)]
pub struct RectangleSum {
    pub value: f64,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

fn top_indices(scores: &[f64], count: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    idx.truncate(count);
    idx.sort_unstable();
    idx
}

fn restricted_row_sums(m: &DMatrix<f64>, cols: &[usize]) -> Vec<f64> {
    (0..m.nrows())
        .map(|i| cols.iter().map(|&j| m[(i, j)]).sum())
        .collect()
}

fn restricted_col_sums(m: &DMatrix<f64>, rows: &[usize]) -> Vec<f64> {
    (0..m.ncols())
        .map(|j| {
            let col = m.column(j);
            rows.iter().map(|&i| col[i]).sum()
        })
        .collect()
}

fn rect_value(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> f64 {
    cols.iter()
        .map(|&j| {
            let col = m.column(j);
            rows.iter().map(|&i| col[i]).sum::<f64>()
        })
        .sum()
}

/// Heuristic search for the `n1 × n2` rectangle with the largest (or smallest)
/// entry sum, by alternating maximization from a column-sum start and ten
/// random restarts. The returned value is exactly the sum over the returned
/// rectangle; it is not certified globally optimal.
pub fn best_rectangle_sum(
    m: &DMatrix<f64>,
    n1: usize,
    n2: usize,
    mode: RectMode,
) -> Result<RectangleSum> {
    let (rows, cols) = m.shape();
    if n1 == 0 || n2 == 0 || n1 > rows || n2 > cols {
        return Err(Error::Parameter(format!(
            "rectangle {n1}x{n2} does not fit a {rows}x{cols} matrix"
        )));
    }
    let signed;
    let work = match mode {
        RectMode::Max => m,
        RectMode::Min => {
            signed = -m;
            &signed
        }
    };
    let mut rng = rng_from_seed(0x5EED_2EC7);
    let mut starts: Vec<Vec<usize>> = Vec::with_capacity(11);
    starts.push(top_indices(crate::linalg::col_sums(work).as_slice(), n2));
    let all: Vec<usize> = (0..cols).collect();
    for _ in 0..10 {
        let mut c: Vec<usize> = all.choose_multiple(&mut rng, n2).copied().collect();
        c.sort_unstable();
        starts.push(c);
    }
    let mut best: Option<RectangleSum> = None;
    for start in starts {
        let mut c = start;
        let mut r = top_indices(&restricted_row_sums(work, &c), n1);
        let mut value = rect_value(work, &r, &c);
        for _ in 0..100 {
            let c2 = top_indices(&restricted_col_sums(work, &r), n2);
            let r2 = top_indices(&restricted_row_sums(work, &c2), n1);
            let v2 = rect_value(work, &r2, &c2);
            if v2 <= value + 1e-12 * (1.0 + value.abs()) {
                break;
            }
            c = c2;
            r = r2;
            value = v2;
        }
        if best.as_ref().is_none_or(|b| value > b.value) {
            best = Some(RectangleSum {
                value,
                rows: r,
                cols: c,
            });
        }
    }
    let mut best = best.expect("at least one start");
    if mode == RectMode::Min {
        best.value = rect_value(m, &best.rows, &best.cols);
    }
    Ok(best)
}

/// Nodes whose degree is at most `threshold`.
pub fn prune_high_degree(g: &Graph, threshold: f64) -> Vec<usize> {
    (0..g.n())
        .filter(|&u| g.degree(u) as f64 <= threshold)
        .collect()
}
