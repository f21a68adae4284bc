//! Independent test-side oracles.
#![allow(dead_code)]

use itertools::Itertools;
use nalgebra::DMatrix;

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
}

/// Root of the log-likelihood balance `t·ln(p/q) + (1−t)·ln((1−p)/(1−q)) = 0`
/// by bisection.
pub fn dconst_by_bisection(p: f64, q: f64) -> f64 {
    let slope = (p / q).ln();
    let offset = ((q - p) / (1.0 - q)).ln_1p();
    let f = |t: f64| t * slope + (1.0 - t) * offset;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let increasing = f(1.0) > f(0.0);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) < 0.0) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn rconst_by_logs(p: f64, q: f64) -> f64 {
    (p.ln() - q.ln() + (-q).ln_1p() - (-p).ln_1p()).exp()
}

/// Minimum of `Σ xᵢvᵢ` over the vertices of `{x ∈ [0,1]ⁿ : Σx ≤ budget}`:
/// 0/1 points with at most one fractional coordinate completing the budget.
pub fn lp_vertex_min(v: &[f64], budget: f64) -> f64 {
    let n = v.len();
    assert!(n <= 16, "brute force is exponential");
    let mut best = 0.0f64;
    for mask in 0u32..(1 << n) {
        let size = mask.count_ones() as f64;
        if size > budget + 1e-12 {
            continue;
        }
        let base: f64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| v[i]).sum();
        best = best.min(base);
        let frac = budget - size;
        if frac > 0.0 && frac < 1.0 {
            for j in (0..n).filter(|&j| mask >> j & 1 == 0) {
                best = best.min(base + frac * v[j]);
            }
        }
    }
    best
}

/// Misclassified fraction minimized over all `k!` relabelings of `pred`.
pub fn match_error_bruteforce(pred: &[usize], truth: &[usize], k: usize) -> f64 {
    let n = pred.len();
    if n == 0 {
        return 0.0;
    }
    (0..k)
        .permutations(k)
        .map(|perm| pred.iter().zip(truth).filter(|(&p, &t)| perm[p] != t).count())
        .min()
        .expect("k ≥ 1") as f64
        / n as f64
}

/// Exact maximum entry sum over all `n1 × n2` rectangles.
pub fn exhaustive_max_rectangle(m: &DMatrix<f64>, n1: usize, n2: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for rows in (0..m.nrows()).combinations(n1) {
        for cols in (0..m.ncols()).combinations(n2) {
            let s: f64 = rows.iter().flat_map(|&i| cols.iter().map(move |&j| (i, j))).map(|ij| m[ij]).sum();
            best = best.max(s);
        }
    }
    best
}
