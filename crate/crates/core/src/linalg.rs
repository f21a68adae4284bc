//! Dense numerical kernels: block subspace iteration for leading singular
//! triplets, operator and trace norms, and the capped-simplex projection.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::rng::rng_from_seed;

/// Leading singular triplets of a matrix, ordered by decreasing value.
#[derive(Debug, Clone)]
pub struct TopSingular {
    pub values: Vec<f64>,
    /// Left singular vectors as columns.
    pub u: DMatrix<f64>,
    /// Right singular vectors as columns.
    pub v: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Orthonormalizes the columns of `x` in place (modified Gram-Schmidt, two
/// passes). Columns that collapse are replaced by fresh random directions.
pub fn orthonormalize(x: &mut DMatrix<f64>, seed: u64) {
    let (n, p) = x.shape();
    let mut rng = rng_from_seed(seed);
    for j in 0..p {
        for _attempt in 0..4 {
            for _pass in 0..2 {
                for i in 0..j {
                    let proj = x.column(i).dot(&x.column(j));
                    let ci = x.column(i).clone_owned();
                    x.column_mut(j).axpy(-proj, &ci, 1.0);
                }
            }
            let norm = x.column(j).norm();
            if norm > 1e-12 {
                x.column_mut(j).scale_mut(1.0 / norm);
                break;
            }
            for r in 0..n {
                x[(r, j)] = rng.sample(StandardNormal);
            }
        }
    }
}

fn random_block(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng_from_seed(seed);
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Computes the `p` leading singular triplets of `m` by block subspace
/// iteration on `MᵀM`, optionally warm-started from a previous right basis.
///
/// Convergence is declared when every tracked singular value changes by at
/// most `tol` relative to the largest one between sweeps.
pub fn top_singular(
    m: &DMatrix<f64>,
    p: usize,
    warm: Option<&DMatrix<f64>>,
    tol: f64,
    max_iters: usize,
) -> TopSingular {
    let (rows, cols) = m.shape();
    let p = p.min(rows).min(cols).max(1);
    // A few guard vectors speed up convergence of the last tracked value.
    let q = (p + 4).min(rows).min(cols);
    let mut v = match warm {
        Some(w) if w.nrows() == cols && w.ncols() >= 1 => {
            let mut v = random_block(cols, q, 0x51A7);
            let take = w.ncols().min(q);
            v.columns_mut(0, take).copy_from(&w.columns(0, take));
            v
        }
        _ => random_block(cols, q, 0x51A7),
    };
    orthonormalize(&mut v, 0xB10C);

    let mut prev: Vec<f64> = vec![f64::INFINITY; p];
    let mut converged = false;
    let mut iterations = 0;
    let mut sig = vec![0.0; q];
    let mut right = DMatrix::zeros(q, q);
    for it in 0..max_iters.max(1) {
        iterations = it + 1;
        let u_block = m * &v;
        // Rayleigh-Ritz on the current subspace.
        let svd = u_block.clone().svd(true, true);
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
        let vt = svd.v_t.as_ref().expect("requested v_t");
        right = DMatrix::from_fn(q, q, |r, c| vt[(order[c], r)]);
        for (c, &o) in order.iter().enumerate() {
            sig[c] = svd.singular_values[o];
        }
        let scale = sig[0].max(1e-300);
        let delta = (0..p)
            .map(|i| (sig[i] - prev[i]).abs())
            .fold(0.0, f64::max);
        if delta <= tol * scale {
            converged = true;
            v = &v * &right;
            break;
        }
        prev.copy_from_slice(&sig[..p]);
        let mut next = m.tr_mul(&u_block);
        orthonormalize(&mut next, 0xB10C ^ it as u64);
        v = next;
    }
    if !converged {
        v = &v * &right;
    }
    let mut mv = m * &v;
    let mut values = Vec::with_capacity(p);
    for j in 0..p {
        let s = mv.column(j).norm();
        values.push(s);
        if s > 1e-300 {
            mv.column_mut(j).scale_mut(1.0 / s);
        }
    }
    TopSingular {
        values,
        u: mv.columns(0, p).into_owned(),
        v: v.columns(0, p).into_owned(),
        converged,
        iterations,
    }
}

/// Largest singular value with a convergence flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpNorm {
    pub value: f64,
    pub converged: bool,
}

/// Operator (spectral) norm by subspace iteration on `MᵀM`.
pub fn opnorm(m: &DMatrix<f64>) -> OpNorm {
    if m.is_empty() {
        return OpNorm {
            value: 0.0,
            converged: true,
        };
    }
    let top = top_singular(m, 2, None, 1e-12, 3000);
    OpNorm {
        value: top.values[0],
        converged: top.converged,
    }
}

/// Singular values from a full decomposition; uses the symmetric eigensolver
/// when `m` is exactly symmetric.
pub fn singular_values_full(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = if m.is_square() && m == &m.transpose() {
        m.clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .map(|x| x.abs())
            .collect()
    } else {
        m.clone().singular_values().iter().copied().collect()
    };
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Trace (nuclear) norm from a full decomposition.
pub fn trace_norm(m: &DMatrix<f64>) -> f64 {
    singular_values_full(m).iter().sum()
}

/// Euclidean projection of `v` onto `{x : lo ≤ xᵢ ≤ hi, Σx ≤ budget}`.
///
/// Requires `lo ≤ hi` and `budget ≥ n·lo`. Solved by bisection on the shift
/// `t` in `clip(v − t)`.
pub fn project_capped_simplex(v: &[f64], lo: f64, hi: f64, budget: f64) -> Vec<f64> {
    let clip = |t: f64| -> Vec<f64> { v.iter().map(|&x| (x - t).clamp(lo, hi)).collect() };
    let sum_at = |t: f64| -> f64 { v.iter().map(|&x| (x - t).clamp(lo, hi)).sum() };
    if sum_at(0.0) <= budget {
        return clip(0.0);
    }
    let mut left = 0.0;
    let mut right = v.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x)) - lo;
    for _ in 0..200 {
        let mid = 0.5 * (left + right);
        if sum_at(mid) > budget {
            left = mid;
        } else {
            right = mid;
        }
        if right - left <= 1e-15 * (1.0 + right.abs()) {
            break;
        }
    }
    clip(right)
}

/// Column sums of `m` as a vector.
pub fn col_sums(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum()))
}

/// Row sums of `m` as a vector.
pub fn row_sums(m: &DMatrix<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(m.nrows());
    for c in m.column_iter() {
        out += c;
    }
    out
}
