//! Turning weight matrices into labellings, and scoring labellings.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, Rng};

/// A community id per node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labelling {
    pub assignment: Vec<usize>,
    pub k: usize,
}

impl Labelling {
    pub fn new(assignment: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(node) = assignment.iter().position(|&c| c >= k) {
            return Err(Error::LabelRange {
                node,
                label: assignment[node],
                k,
            });
        }
        Ok(Self { assignment, k })
    }

    /// Community 0 for `+1`, community 1 for `−1`.
    pub fn from_signs(signs: &[i8]) -> Self {
        Self {
            assignment: signs.iter().map(|&s| if s >= 0 { 0 } else { 1 }).collect(),
            k: 2,
        }
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    /// Sign vector; defined only for two communities.
    pub fn to_signs(&self) -> Result<Vec<i8>> {
        if self.k != 2 {
            return Err(Error::Precondition(format!(
                "sign vector needs k = 2, labelling has k = {}",
                self.k
            )));
        }
        Ok(self
            .assignment
            .iter()
            .map(|&c| if c == 0 { 1 } else { -1 })
            .collect())
    }

    /// Members of each community.
    pub fn classes(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &c) in self.assignment.iter().enumerate() {
            out[c].push(i);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_lloyd_iters: usize,
    pub seed: u64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            restarts: 20,
            max_lloyd_iters: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub labelling: Labelling,
    pub objective: f64,
}

struct Clustering {
    assign: Vec<usize>,
    sums: Vec<DVector<f64>>,
    counts: Vec<usize>,
}

fn sq_dist_to_mean(x: &DVector<f64>, sum: &DVector<f64>, count: usize) -> f64 {
    let c = count as f64;
    x.iter()
        .zip(sum.iter())
        .map(|(a, s)| {
            let d = a - s / c;
            d * d
        })
        .sum()
}

impl Clustering {
    fn from_assign(points: &[DVector<f64>], assign: Vec<usize>, k: usize) -> Self {
        let dim = points[0].len();
        let mut sums = vec![DVector::zeros(dim); k];
        let mut counts = vec![0; k];
        for (p, &c) in points.iter().zip(&assign) {
            sums[c] += p;
            counts[c] += 1;
        }
        Self {
            assign,
            sums,
            counts,
        }
    }

    fn objective(&self, points: &[DVector<f64>]) -> f64 {
        points
            .iter()
            .zip(&self.assign)
            .map(|(p, &c)| sq_dist_to_mean(p, &self.sums[c], self.counts[c]))
            .sum()
    }
}

fn sq_dist(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kmeanspp(points: &[DVector<f64>], k: usize, rng: &mut Rng) -> Vec<DVector<f64>> {
    let n = points.len();
    let mut centers = vec![points[rng.gen_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total <= 0.0 {
            rng.gen_range(0..n)
        } else {
            let mut t = rng.gen::<f64>() * total;
            let mut idx = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if t < d {
                    idx = i;
                    break;
                }
                t -= d;
            }
            idx
        };
        centers.push(points[pick].clone());
        let c = centers.last().expect("just pushed");
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, c));
        }
    }
    centers
}

fn lloyd(points: &[DVector<f64>], mut centers: Vec<DVector<f64>>, iters: usize) -> Vec<usize> {
    let n = points.len();
    let k = centers.len();
    let mut assign = vec![usize::MAX; n];
    for _ in 0..iters {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let best = (0..k)
                .map(|c| (sq_dist(p, &centers[c]), c))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .expect("k >= 1")
                .1;
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        let mut counts = vec![0usize; k];
        let mut sums = vec![DVector::zeros(points[0].len()); k];
        for (p, &c) in points.iter().zip(&assign) {
            sums[c] += p;
            counts[c] += 1;
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Reseed an empty cluster at the point farthest from its center.
                let far = (0..n)
                    .max_by(|&i, &j| {
                        let di = sq_dist(&points[i], &centers[assign[i]]);
                        let dj = sq_dist(&points[j], &centers[assign[j]]);
                        di.total_cmp(&dj).then(j.cmp(&i))
                    })
                    .expect("n >= 1");
                centers[c] = points[far].clone();
                assign[far] = c;
                changed = true;
            } else {
                centers[c] = &sums[c] / counts[c] as f64;
            }
        }
        if !changed {
            break;
        }
    }
    assign
}

/// Single-point moves between clusters (Hartigan's criterion), to a local
/// optimum. Returns the objective after each accepted move.
fn local_search(points: &[DVector<f64>], cl: &mut Clustering) -> Vec<f64> {
    let k = cl.counts.len();
    let mut trace = vec![cl.objective(points)];
    let mut current = trace[0];
    for _pass in 0..100 {
        let mut moved = false;
        for (i, p) in points.iter().enumerate() {
            let from = cl.assign[i];
            if cl.counts[from] <= 1 {
                continue;
            }
            let nf = cl.counts[from] as f64;
            let loss = nf / (nf - 1.0) * sq_dist_to_mean(p, &cl.sums[from], cl.counts[from]);
            let mut best = (0.0, from);
            for to in 0..k {
                if to == from {
                    continue;
                }
                let gain = if cl.counts[to] == 0 {
                    0.0
                } else {
                    let nt = cl.counts[to] as f64;
                    nt / (nt + 1.0) * sq_dist_to_mean(p, &cl.sums[to], cl.counts[to])
                };
                let delta = gain - loss;
                if delta < best.0 - 1e-12 * (1.0 + current.abs()) {
                    best = (delta, to);
                }
            }
            if best.1 != from {
                let to = best.1;
                cl.sums[from] -= p;
                cl.counts[from] -= 1;
                cl.sums[to] += p;
                cl.counts[to] += 1;
                cl.assign[i] = to;
                current += best.0;
                trace.push(current);
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    trace
}

/// Clusters the rows of `w` into `k` groups: k-means++ seeding, Lloyd
/// iterations and single-point local search, best of `cfg.restarts` runs.
pub fn kmeans_rows(w: &DMatrix<f64>, k: usize, cfg: &KMeansConfig) -> Result<KMeansResult> {
    if k < 2 {
        return Err(Error::Parameter(format!("k={k} must be at least 2")));
    }
    let n = w.nrows();
    if n < k {
        return Err(Error::Parameter(format!("cannot split {n} rows into {k} clusters")));
    }
    let points: Vec<DVector<f64>> = (0..n).map(|i| w.row(i).transpose()).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for r in 0..cfg.restarts.max(1) {
        let mut rng = rng_from_seed(derive_seed(cfg.seed, &[r as u64]));
        let centers = kmeanspp(&points, k, &mut rng);
        let assign = lloyd(&points, centers, cfg.max_lloyd_iters);
        let mut cl = Clustering::from_assign(&points, assign, k);
        let trace = local_search(&points, &mut cl);
        debug_assert!(trace.windows(2).all(|t| t[1] <= t[0] + 1e-9 * (1.0 + t[0].abs())));
        let obj = cl.objective(&points);
        if best.as_ref().is_none_or(|b| obj < b.0) {
            best = Some((obj, cl.assign));
        }
    }
    let (objective, assign) = best.expect("at least one restart");
    Ok(KMeansResult {
        labelling: Labelling::new(assign, k)?,
        objective,
    })
}

/// k-means objective of a given assignment of the rows of `w`.
pub fn kmeans_objective(w: &DMatrix<f64>, labels: &Labelling) -> f64 {
    let points: Vec<DVector<f64>> = (0..w.nrows()).map(|i| w.row(i).transpose()).collect();
    Clustering::from_assign(&points, labels.assignment.clone(), labels.k).objective(&points)
}

#[derive(Debug, Clone)]
pub struct SignRounding {
    pub labelling: Labelling,
    /// True when the top singular value of `W − J/2` is not separated from
    /// the next one.
    pub degenerate: bool,
}

/// Signs of the top right singular vector of `W − J/2`, oriented so that its
/// first nonzero coordinate is positive; zero coordinates map to `+1`.
pub fn sign_round_z2(w: &DMatrix<f64>) -> Result<SignRounding> {
    sign_round_shifted(w, 0.5)
}

/// As [`sign_round_z2`] but centered at the mean entry of `W`, which removes
/// the all-ones direction when `W` carries extra uniform mass.
pub fn sign_round_z2_centered(w: &DMatrix<f64>) -> Result<SignRounding> {
    let mean = if w.is_empty() { 0.5 } else { w.mean() };
    sign_round_shifted(w, mean)
}

fn sign_round_shifted(w: &DMatrix<f64>, center: f64) -> Result<SignRounding> {
    let n = w.nrows();
    if w.ncols() != n {
        return Err(Error::Dimension {
            expected: n,
            got: w.ncols(),
        });
    }
    let shifted = w.add_scalar(-center);
    let svd = shifted.svd(false, true);
    let vt = svd.v_t.as_ref().expect("requested v_t");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let s0 = svd.singular_values[order[0]];
    let s1 = order.get(1).map_or(0.0, |&i| svd.singular_values[i]);
    let degenerate = s0 <= 1e-300 || (s0 - s1) / s0 < 1e-10;
    let mut v: Vec<f64> = (0..n).map(|j| vt[(order[0], j)]).collect();
    let tiny = 1e-12 / (n as f64).sqrt();
    if let Some(first) = v.iter().find(|x| x.abs() > tiny) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    let signs: Vec<i8> = v.iter().map(|&x| if x < -tiny { -1 } else { 1 }).collect();
    Ok(SignRounding {
        labelling: Labelling::from_signs(&signs),
        degenerate,
    })
}

/// Minimum-cost perfect assignment on a square cost matrix (Hungarian method,
/// O(k³)). Returns `assignment[row] = col`.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    // Potentials-based formulation with 1-based sentinel column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    out
}

/// Fraction of misclassified nodes, minimized over relabelings of `pred`.
pub fn match_error(pred: &Labelling, truth: &Labelling, k: usize) -> Result<f64> {
    if pred.n() != truth.n() {
        return Err(Error::Dimension {
            expected: truth.n(),
            got: pred.n(),
        });
    }
    for l in [pred, truth] {
        if let Some(node) = l.assignment.iter().position(|&c| c >= k) {
            return Err(Error::LabelRange {
                node,
                label: l.assignment[node],
                k,
            });
        }
    }
    let n = pred.n();
    if n == 0 {
        return Ok(0.0);
    }
    let mut conf = vec![vec![0usize; k]; k];
    for (&p, &t) in pred.assignment.iter().zip(&truth.assignment) {
        conf[p][t] += 1;
    }
    let cost: Vec<Vec<f64>> = conf
        .iter()
        .map(|row| row.iter().map(|&c| -(c as f64)).collect())
        .collect();
    let perm = hungarian(&cost);
    let agree: usize = perm.iter().enumerate().map(|(p, &t)| conf[p][t]).sum();
    Ok((n - agree) as f64 / n as f64)
}

/// Fraction of nodes whose label differs, without relabeling.
pub fn raw_disagreement(pred: &Labelling, truth: &Labelling) -> f64 {
    let n = pred.n().max(1);
    pred.assignment
        .iter()
        .zip(&truth.assignment)
        .filter(|(a, b)| a != b)
        .count() as f64
        / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lab(v: &[usize], k: usize) -> Labelling {
        Labelling::new(v.to_vec(), k).unwrap()
    }

    #[test]
    fn match_error_basic_cases() {
        let t = lab(&[0, 0, 1, 1, 1], 2);
        assert_eq!(match_error(&t, &t, 2).unwrap(), 0.0);
        let swapped = lab(&[1, 1, 0, 0, 0], 2);
        assert_eq!(match_error(&swapped, &t, 2).unwrap(), 0.0);
        let one_off = lab(&[1, 0, 1, 1, 1], 2);
        assert!((match_error(&one_off, &t, 2).unwrap() - 0.2).abs() < 1e-15);
        assert!(matches!(
            match_error(&lab(&[0, 2, 1], 3), &lab(&[0, 1, 1], 3), 2),
            Err(Error::LabelRange { .. })
        ));
    }

    #[test]
    fn hungarian_small_known_instance() {
        let cost = vec![
            vec![4.0, 1.0, 3.0],
            vec![2.0, 0.0, 5.0],
            vec![3.0, 2.0, 2.0],
        ];
        let a = hungarian(&cost);
        let total: f64 = a.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn kmeans_recovers_distinct_rows() {
        let rows = [[0.0, 1.0, 2.0], [5.0, 5.0, 5.0], [9.0, 0.0, 1.0]];
        let truth: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let w = DMatrix::from_fn(30, 3, |i, j| rows[truth[i]][j]);
        let r = kmeans_rows(&w, 3, &KMeansConfig::default()).unwrap();
        assert!(r.objective.abs() < 1e-12);
        assert_eq!(match_error(&r.labelling, &lab(&truth, 3), 3).unwrap(), 0.0);
    }

    #[test]
    fn sign_round_rank_one_and_degenerate() {
        let l = [1.0, -1.0, -1.0, 1.0, 1.0, -1.0];
        let w = DMatrix::from_fn(6, 6, |i, j| (1.0 + l[i] * l[j]) / 2.0);
        let r = sign_round_z2(&w).unwrap();
        assert!(!r.degenerate);
        let truth = Labelling::from_signs(&l.map(|x| x as i8));
        assert_eq!(match_error(&r.labelling, &truth, 2).unwrap(), 0.0);
        let half = DMatrix::from_element(6, 6, 0.5);
        assert!(sign_round_z2(&half).unwrap().degenerate);
    }
}
