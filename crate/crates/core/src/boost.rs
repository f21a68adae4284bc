//! Boosting program: masks `W = J − w1ᵀ − 1wᵀ + N`, the constraint family
//! over approximate row selectors, an approximate separation oracle, the
//! feasibility search on ρ, and the label-flip loops.
//!
//! The solver restricts `N = wwᵀ`, so `W = uuᵀ` with `u = 1 − w`. This keeps
//! `W ≥ 0`, the box and the pseudorectangle budgets satisfied by construction
//! and leaves the row-selector constraints as the only ones to enforce.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{param, Error, Result};
use crate::rng::{derive_seed, rng_from_seed, stage, Rng};
use crate::rounding::Labelling;
use crate::stats::greedy_budgeted_min;

/// A rank-one pseudorectangle `N = rows·colsᵀ` with nonnegative factors.
///
/// Every candidate built here (combinatorial rectangles, spectral
/// candidates, `wwᵀ`) has this form, so the factored storage is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct Pseudorectangle {
    pub rows: Vec<f64>,
    pub cols: Vec<f64>,
    pub theta: f64,
}

impl Pseudorectangle {
    pub fn zeros(n: usize, theta: f64) -> Self {
        Self {
            rows: vec![0.0; n],
            cols: vec![0.0; n],
            theta,
        }
    }

    pub fn outer(rows: Vec<f64>, cols: Vec<f64>, theta: f64) -> Self {
        Self { rows, cols, theta }
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| self.rows[i] * self.cols[j])
    }

    pub fn entry_sum(&self) -> f64 {
        self.rows.iter().sum::<f64>() * self.cols.iter().sum::<f64>()
    }

    /// Exact for rank one: `‖r‖·‖c‖`.
    pub fn trace_norm(&self) -> f64 {
        let nr = self.rows.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nc = self.cols.iter().map(|x| x * x).sum::<f64>().sqrt();
        nr * nc
    }

    /// Entry-sum and trace budgets of scale `theta` on an `m`-node block.
    pub fn within_budget(&self, m: usize, tol: f64) -> bool {
        let m = m as f64;
        let entries_ok = self
            .rows
            .iter()
            .all(|&r| (-tol..=1.0 + tol).contains(&r))
            && self.cols.iter().all(|&c| (-tol..=1.0 + tol).contains(&c));
        entries_ok
            && self.entry_sum() <= self.theta * self.theta * m * m + tol
            && self.trace_norm() <= self.theta * m + tol
    }
}

/// `M = rows(x) − N_sub` with `N_sub` a pseudorectangle of scale `√(θδ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RowSelector {
    pub x: Vec<f64>,
    pub n_sub: Pseudorectangle,
    pub theta: f64,
    pub delta: f64,
}

impl RowSelector {
    /// Materializes `M`, clipped to `[0, 1]`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let m = self.x.len();
        DMatrix::from_fn(m, m, |i, j| {
            (self.x[i] - self.n_sub.rows[i] * self.n_sub.cols[j]).clamp(0.0, 1.0)
        })
    }

    pub fn is_admissible(&self, tol: f64) -> bool {
        let m = self.x.len();
        let sum_ok = self.x.iter().sum::<f64>() <= self.theta * m as f64 + tol;
        let box_ok = self.x.iter().all(|&v| (-tol..=1.0 + tol).contains(&v));
        let dominated = (0..m).all(|i| {
            let cmax = self.n_sub.cols.iter().fold(0.0f64, |a, &c| a.max(c));
            self.n_sub.rows[i] * cmax <= self.x[i] + tol
        });
        sum_ok && box_ok && dominated && self.n_sub.within_budget(m, tol)
    }
}

/// One instance of the quantified constraint, found by the oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintWitness {
    pub rho_prime: f64,
    /// Index of the constraint block (community pair in k-mode).
    pub block: usize,
    /// Selector in the block's local coordinates.
    pub selector: RowSelector,
    /// `−gap`; positive means violated.
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostParams {
    pub zeta: f64,
    pub d: f64,
    pub big_k: f64,
    /// Points in the geometric `ρ′` constraint grid.
    pub rho_grid: usize,
    /// Points in the geometric outer search grid on `ρ ∈ [1/n, ζ]`.
    pub search_grid: usize,
    pub oracle_restarts: usize,
    /// Alternating-maximization passes per oracle start.
    pub oracle_passes: usize,
    pub solver_iters: usize,
    /// Iterations without improvement before a probe gives up.
    pub patience: usize,
    pub step0: f64,
    /// Violation tolerance in units of `10dK²`.
    pub tol_rel: f64,
    pub max_rounds: Option<usize>,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            zeta: 0.2,
            d: 1.0,
            big_k: 49.0,
            rho_grid: 24,
            search_grid: 12,
            oracle_restarts: 2,
            oracle_passes: 3,
            solver_iters: 60,
            patience: 15,
            step0: 0.5,
            tol_rel: 0.5,
            max_rounds: None,
        }
    }
}

impl BoostParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return Err(param(format!("zeta={} must lie in (0, 1)", self.zeta)));
        }
        if !(self.big_k >= 4.0) {
            return Err(param(format!("K={} must be at least 4", self.big_k)));
        }
        if !(self.d > 0.0 && self.d.is_finite()) {
            return Err(param(format!("d={} must be positive", self.d)));
        }
        if self.rho_grid == 0 || self.search_grid == 0 || self.solver_iters == 0 {
            return Err(param("grid sizes and iteration counts must be positive"));
        }
        if !(self.tol_rel >= 0.0 && self.step0 > 0.0) {
            return Err(param("tol_rel must be nonnegative and step0 positive"));
        }
        Ok(())
    }

    /// Closed threshold `1 − 1/√K`.
    pub fn flip_threshold(&self) -> f64 {
        1.0 - 1.0 / self.big_k.sqrt()
    }

    /// Per-node unit `10dK²` of the constraint right-hand side.
    pub fn unit(&self) -> f64 {
        10.0 * self.d * self.big_k * self.big_k
    }

    pub fn tol(&self) -> f64 {
        self.tol_rel * self.unit()
    }
}

/// A constraint block: node set and `B = Â ⊙ L` restricted to it.
#[derive(Debug, Clone)]
pub struct Block {
    pub nodes: Vec<usize>,
    pub b: DMatrix<f64>,
}

/// The constraint system for one labelling.
#[derive(Debug, Clone)]
pub struct BoostProblem {
    pub n: usize,
    pub blocks: Vec<Block>,
    /// `ρ′` ranges over `[lower_scale·ρ/K, ζ]`.
    pub lower_scale: f64,
}

fn signed_block(a: &DMatrix<f64>, nodes: Vec<usize>, signs: &[f64]) -> Block {
    let m = nodes.len();
    let b = DMatrix::from_fn(m, m, |i, j| a[(nodes[i], nodes[j])] * signs[i] * signs[j]);
    Block { nodes, b }
}

impl BoostProblem {
    /// Two communities (or ℤ₂): one block, `L = ℓℓᵀ`. `a` is the demeaned
    /// adjacency for graphs and the raw observation for ℤ₂.
    pub fn two(a: &DMatrix<f64>, labels: &Labelling) -> Result<Self> {
        let n = check_square(a, labels)?;
        let signs: Vec<f64> = labels.to_signs()?.iter().map(|&s| s as f64).collect();
        Ok(Self {
            n,
            blocks: vec![signed_block(a, (0..n).collect(), &signs)],
            lower_scale: 1.0,
        })
    }

    /// k communities: one block per unordered pair `{j₁, j₂}` over
    /// `S_{j₁} ∪ S_{j₂}` with `L(j₁, j₂)` = +1 within a side, −1 across.
    pub fn k_mode(a: &DMatrix<f64>, labels: &Labelling, alpha: f64) -> Result<Self> {
        let n = check_square(a, labels)?;
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(param(format!("alpha={alpha} must lie in (0, 1]")));
        }
        let classes = labels.classes();
        let mut blocks = Vec::new();
        for j1 in 0..labels.k {
            for j2 in j1 + 1..labels.k {
                let mut nodes = classes[j1].clone();
                nodes.extend_from_slice(&classes[j2]);
                if nodes.is_empty() {
                    continue;
                }
                let signs: Vec<f64> = (0..nodes.len())
                    .map(|i| if i < classes[j1].len() { 1.0 } else { -1.0 })
                    .collect();
                blocks.push(signed_block(a, nodes, &signs));
            }
        }
        Ok(Self {
            n,
            blocks,
            lower_scale: labels.k as f64 / alpha,
        })
    }

    /// Constraint gap of `wit` at global weights `w`, by direct evaluation of
    /// `⟨B ⊙ uuᵀ, M⟩ − 10dK²(KΣxᵢuᵢ − ρ′m)` on the materialized selector.
    pub fn witness_gap(&self, wit: &ConstraintWitness, w: &[f64], params: &BoostParams) -> f64 {
        let block = &self.blocks[wit.block];
        let m = block.nodes.len();
        let u: Vec<f64> = block.nodes.iter().map(|&i| 1.0 - w[i]).collect();
        let mm = wit.selector.matrix();
        let mut lhs = 0.0;
        for j in 0..m {
            for i in 0..m {
                lhs += block.b[(i, j)] * u[i] * u[j] * mm[(i, j)];
            }
        }
        let xu: f64 = wit.selector.x.iter().zip(&u).map(|(x, u)| x * u).sum();
        lhs - params.unit() * (params.big_k * xu - wit.rho_prime * m as f64)
    }
}

fn check_square(a: &DMatrix<f64>, labels: &Labelling) -> Result<usize> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension {
            expected: n,
            got: a.ncols(),
        });
    }
    if labels.n() != n {
        return Err(Error::Dimension {
            expected: n,
            got: labels.n(),
        });
    }
    Ok(n)
}

/// `W = J − w1ᵀ − 1wᵀ + N` and its minimum entry.
pub fn build_mask(w: &[f64], n_mat: &Pseudorectangle) -> Result<(DMatrix<f64>, f64)> {
    let n = w.len();
    if n_mat.n() != n || n_mat.cols.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: n_mat.n(),
        });
    }
    let m = DMatrix::from_fn(n, n, |i, j| 1.0 - w[i] - w[j] + n_mat.rows[i] * n_mat.cols[j]);
    let min = m.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((m, if n == 0 { 0.0 } else { min }))
}

/// Geometric grid of `count` points from `lo` to `hi` inclusive.
pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 || lo >= hi {
        return vec![hi];
    }
    let ratio = (hi / lo).ln() / (count - 1) as f64;
    let mut g: Vec<f64> = (0..count).map(|t| lo * (ratio * t as f64).exp()).collect();
    g[count - 1] = hi;
    g
}

/// Per-block quantities reused across the `ρ′` grid. The grid points are
/// searched in lockstep, one column per point, so that every product with
/// `G` is a single matrix-matrix multiply.
struct BlockEval<'a> {
    block: &'a Block,
    u: Vec<f64>,
    g: DMatrix<f64>,
    gt: DMatrix<f64>,
    /// Entrywise positive part of `G` and its transpose.
    gp: DMatrix<f64>,
    gpt: DMatrix<f64>,
    sigma: Vec<f64>,
}

/// Lockstep state for one grid: per-point greedy `x`, its zero-rectangle gap
/// and the best `(gap, r, c)` found so far.
struct GridState {
    rho: Vec<f64>,
    xs: Vec<Vec<f64>>,
    base: Vec<f64>,
    masses: Vec<f64>,
    active: Vec<bool>,
    best: Vec<(f64, Vec<f64>, Vec<f64>)>,
}

impl GridState {
    fn offer(&mut self, l: usize, gap: f64, r: Vec<f64>, c: Vec<f64>) {
        if gap < self.best[l].0 {
            self.best[l] = (gap, r, c);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn column(m: &DMatrix<f64>, l: usize) -> Vec<f64> {
    m.column(l).iter().copied().collect()
}

impl<'a> BlockEval<'a> {
    fn new(block: &'a Block, w: &[f64], params: &BoostParams) -> Self {
        let m = block.nodes.len();
        let u: Vec<f64> = block.nodes.iter().map(|&i| 1.0 - w[i]).collect();
        let g = DMatrix::from_fn(m, m, |i, j| block.b[(i, j)] * u[i] * u[j]);
        let gt = g.transpose();
        let gp = g.map(|v| v.max(0.0));
        let gpt = gt.map(|v| v.max(0.0));
        let rs = crate::linalg::row_sums(&g);
        let sk = params.unit() * params.big_k;
        let sigma = (0..m).map(|i| rs[i] - sk * u[i]).collect();
        Self {
            block,
            u,
            g,
            gt,
            gp,
            gpt,
            sigma,
        }
    }

    fn m(&self) -> usize {
        self.u.len()
    }

    /// Top `cap` entries with positive score, as a 0/1 indicator.
    fn top_columns(scores: &[f64], cap: usize) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..scores.len()).filter(|&j| scores[j] > 0.0).collect();
        idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        idx.truncate(cap);
        let mut c = vec![0.0; scores.len()];
        for j in idx {
            c[j] = 1.0;
        }
        c
    }

    fn column_cap(mass: f64, r: &[f64], m: usize) -> usize {
        let s: f64 = r.iter().sum();
        if s <= 0.0 {
            return 0;
        }
        ((mass / s).floor().max(0.0) as usize).min(m)
    }

    /// Alternating maximization over rectangles `R × C` with `R ⊆ supp(x)`,
    /// `N_sub = x_R·1_Cᵀ`, from one starting column set per grid point.
    fn alternate(&self, st: &mut GridState, c: &DMatrix<f64>, params: &BoostParams) {
        let m = self.m();
        let p = st.rho.len();
        let live: Vec<usize> = (0..p).filter(|&l| st.active[l]).collect();
        let mut gc = &self.g * c;
        for _ in 0..params.oracle_passes.max(1) {
            let r = DMatrix::from_fn(m, p, |i, l| if gc[(i, l)] > 0.0 { st.xs[l][i] } else { 0.0 });
            let scores = &self.gt * &r;
            let mut next = DMatrix::zeros(m, p);
            for &l in &live {
                let rl = column(&r, l);
                let cap = Self::column_cap(st.masses[l], &rl, m);
                let cl = Self::top_columns(&column(&scores, l), cap);
                next.set_column(l, &DVector::from_vec(cl));
            }
            gc = &self.g * &next;
            for &l in &live {
                let cl = column(&next, l);
                let rl = if cl.iter().any(|&v| v > 0.0) {
                    column(&r, l)
                } else {
                    vec![0.0; m]
                };
                let gap = st.base[l] - dot(&rl, gc.column(l).as_slice());
                st.offer(l, gap, rl, cl);
            }
        }
    }

    /// Rank-one candidates from the Perron pair of `G₊` on the rows of each
    /// `x`, rescaled to the row dominance, entry-sum and trace budgets.
    fn spectral(&self, st: &mut GridState, params: &BoostParams) {
        let m = self.m();
        let p = st.rho.len();
        let mut alive = st.active.clone();
        let mut q = DMatrix::from_element(m, p, 1.0 / (m as f64).sqrt());
        let mut pm = DMatrix::zeros(m, p);
        for _ in 0..15 {
            pm = &self.gp * &q;
            for l in 0..p {
                for i in 0..m {
                    if !(alive[l] && st.xs[l][i] > 0.0) {
                        pm[(i, l)] = 0.0;
                    }
                }
            }
            normalize_columns(&mut pm, &mut alive);
            q = &self.gpt * &pm;
            normalize_columns(&mut q, &mut alive);
        }
        let gq = &self.g * &q;
        for l in (0..p).filter(|&l| alive[l]) {
            let x = &st.xs[l];
            let pl = pm.column(l);
            let ql = q.column(l);
            let qmax = ql.iter().fold(0.0f64, |a, &b| a.max(b));
            let mut s = f64::INFINITY;
            for i in 0..m {
                if x[i] > 0.0 && pl[i] > 0.0 {
                    s = s.min(x[i] / (pl[i] * qmax));
                }
            }
            let rho_prime = st.rho[l];
            s = s.min(st.masses[l] / (pl.sum() * ql.sum()));
            s = s.min(params.big_k.sqrt() * rho_prime * m as f64 / (pl.norm() * ql.norm()));
            // Keep the dominance `N ≤ rows(x)` strict under rounding.
            s *= 1.0 - 1e-12;
            if !(s.is_finite() && s > 0.0) {
                continue;
            }
            let gap = st.base[l] - s * dot(pl.as_slice(), gq.column(l).as_slice());
            // Split the scale so both factors stay in [0, 1]; dominance gives
            // `max r · max c ≤ 1`, so the balanced split always fits.
            let pmax = pl.iter().fold(0.0f64, |a, &b| a.max(b));
            let t = (s * pmax * qmax).sqrt();
            let r: Vec<f64> = pl.iter().map(|v| s * v * t / (s * pmax)).collect();
            let c: Vec<f64> = ql.iter().map(|v| v * (s * pmax) / t).collect();
            st.offer(l, gap, r, c);
        }
    }

    /// Best witness at each `ρ′`: the exact greedy `x` on `σ`, then the
    /// subtracted rectangle searched within the rows of `x`.
    fn search(&self, grid: &[f64], params: &BoostParams, rng: &mut Rng) -> Vec<(f64, RowSelector)> {
        let m = self.m();
        let p = grid.len();
        let xs: Vec<Vec<f64>> = grid
            .iter()
            .map(|&rp| greedy_budgeted_min(&self.sigma, rp * m as f64).1)
            .collect();
        let base: Vec<f64> = grid
            .iter()
            .zip(&xs)
            .map(|(&rp, x)| dot(x, &self.sigma) + params.unit() * rp * m as f64)
            .collect();
        let mut st = GridState {
            rho: grid.to_vec(),
            masses: grid.iter().map(|&rp| params.big_k * rp * rp * (m * m) as f64).collect(),
            active: xs.iter().map(|x| x.iter().any(|&v| v > 0.0)).collect(),
            best: base.iter().map(|&g| (g, vec![0.0; m], vec![0.0; m])).collect(),
            xs,
            base,
        };
        if st.active.iter().any(|&a| a) {
            let xmat = DMatrix::from_fn(m, p, |i, l| st.xs[l][i]);
            let scores = &self.gt * &xmat;
            let mut starts = vec![DMatrix::zeros(m, p); 1 + params.oracle_restarts];
            for l in (0..p).filter(|&l| st.active[l]) {
                let cap = Self::column_cap(st.masses[l], &st.xs[l], m);
                let top = Self::top_columns(&column(&scores, l), cap);
                starts[0].set_column(l, &DVector::from_vec(top));
                for start in starts.iter_mut().skip(1) {
                    let mut idx: Vec<usize> = (0..m).collect();
                    idx.shuffle(rng);
                    let take = if cap == 0 { 0 } else { rng.gen_range(1..=cap) };
                    for &j in &idx[..take] {
                        start[(j, l)] = 1.0;
                    }
                }
            }
            for c in &starts {
                self.alternate(&mut st, c, params);
            }
            self.spectral(&mut st, params);
        }
        st.best
            .into_iter()
            .zip(st.xs)
            .zip(grid)
            .map(|(((gap, r, c), x), &rp)| {
                let selector = RowSelector {
                    x,
                    n_sub: Pseudorectangle::outer(r, c, params.big_k.sqrt() * rp),
                    theta: rp,
                    delta: params.big_k * rp,
                };
                (gap, selector)
            })
            .collect()
    }

    /// `∂gap/∂u` in block coordinates for each violated selector, via `B`
    /// products batched over the selectors.
    fn grad_u(&self, sels: &[&RowSelector], params: &BoostParams) -> Vec<Vec<f64>> {
        let m = self.m();
        let p = sels.len();
        if p == 0 {
            return Vec::new();
        }
        let b = &self.block.b;
        let bu = b * DVector::from_column_slice(&self.u);
        let xu = DMatrix::from_fn(m, p, |i, l| sels[l].x[i] * self.u[i]);
        let ru = DMatrix::from_fn(m, p, |i, l| sels[l].n_sub.rows[i] * self.u[i]);
        let cu = DMatrix::from_fn(m, p, |i, l| sels[l].n_sub.cols[i] * self.u[i]);
        let bt_xu = b.tr_mul(&xu);
        let b_cu = b * &cu;
        let bt_ru = b.tr_mul(&ru);
        let sk = params.unit() * params.big_k;
        (0..p)
            .map(|l| {
                let (x, r, c) = (&sels[l].x, &sels[l].n_sub.rows, &sels[l].n_sub.cols);
                (0..m)
                    .map(|k| {
                        x[k] * bu[k] + bt_xu[(k, l)] - r[k] * b_cu[(k, l)] - c[k] * bt_ru[(k, l)] - sk * x[k]
                    })
                    .collect()
            })
            .collect()
    }
}

/// Scales each live column to unit norm; zero columns are marked dead.
fn normalize_columns(m: &mut DMatrix<f64>, alive: &mut [bool]) {
    for (l, live) in alive.iter_mut().enumerate() {
        let norm = m.column(l).norm();
        if *live && norm > 0.0 {
            m.column_mut(l).unscale_mut(norm);
        } else {
            *live = false;
            m.column_mut(l).fill(0.0);
        }
    }
}

/// The most violated witness per (block, `ρ′`) grid point.
fn all_witnesses(
    problem: &BoostProblem,
    w: &[f64],
    rho: f64,
    params: &BoostParams,
    seed: u64,
) -> Vec<(ConstraintWitness, Vec<f64>)> {
    let mut out = Vec::new();
    let lo = (problem.lower_scale * rho / params.big_k).min(params.zeta);
    let grid = geometric_grid(lo.max(1e-12), params.zeta, params.rho_grid);
    for (bi, block) in problem.blocks.iter().enumerate() {
        if block.nodes.is_empty() {
            continue;
        }
        let eval = BlockEval::new(block, w, params);
        let mut rng = rng_from_seed(derive_seed(seed, &[stage::BOOST, bi as u64]));
        let found = eval.search(&grid, params, &mut rng);
        let violated: Vec<&RowSelector> = found.iter().filter(|(g, _)| *g < 0.0).map(|(_, s)| s).collect();
        let mut grads = eval.grad_u(&violated, params).into_iter();
        for ((gap, selector), &rp) in found.into_iter().zip(&grid) {
            let grad = if gap < 0.0 {
                grads.next().expect("one gradient per violated selector")
            } else {
                Vec::new()
            };
            out.push((
                ConstraintWitness {
                    rho_prime: rp,
                    block: bi,
                    selector,
                    violation: -gap,
                },
                grad,
            ));
        }
    }
    out
}

/// Most violated constraint at `(w, N = wwᵀ)` for objective level `rho`, or
/// `None` when no violation exceeds the tolerance. An empty return certifies
/// feasibility only relative to this oracle.
pub fn oracle_separate(
    problem: &BoostProblem,
    w: &[f64],
    rho: f64,
    params: &BoostParams,
    seed: u64,
) -> Option<ConstraintWitness> {
    max_witness(all_witnesses(problem, w, rho, params, seed))
        .filter(|wit| wit.violation > params.tol())
}

fn max_witness(all: Vec<(ConstraintWitness, Vec<f64>)>) -> Option<ConstraintWitness> {
    // Ties go to the earliest entry, i.e. the smallest ρ′ of the first block.
    all.into_iter()
        .map(|(w, _)| w)
        .fold(None, |best: Option<ConstraintWitness>, w| match best {
            Some(b) if b.violation >= w.violation => Some(b),
            _ => Some(w),
        })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostSolution {
    pub rho: f64,
    pub w: Vec<f64>,
    pub n_mat: Pseudorectangle,
    pub flagged_infeasible: bool,
    /// Largest oracle violation at the returned iterate.
    pub max_violation: f64,
    pub witness: Option<ConstraintWitness>,
    /// Number of `ρ` values probed.
    pub probes: usize,
}

impl BoostSolution {
    pub fn mask(&self) -> DMatrix<f64> {
        build_mask(&self.w, &self.n_mat).expect("consistent shapes").0
    }
}

struct Probe {
    w: Vec<f64>,
    max_violation: f64,
    witness: Option<ConstraintWitness>,
}

/// Projected normalized subgradient on the total violation at fixed `ρ`.
fn solve_at(problem: &BoostProblem, rho: f64, start: &[f64], params: &BoostParams, seed: u64) -> Probe {
    let n = problem.n;
    let budget = rho * n as f64;
    let mut w = crate::linalg::project_capped_simplex(start, 0.0, 1.0, budget);
    let mut best: Option<Probe> = None;
    let mut since_best = 0;
    for t in 0..params.solver_iters {
        let wits = all_witnesses(problem, &w, rho, params, derive_seed(seed, &[t as u64]));
        let mut grad = vec![0.0; n];
        for (wit, g) in &wits {
            if wit.violation > 0.0 {
                let nodes = &problem.blocks[wit.block].nodes;
                for (li, &gi) in g.iter().enumerate() {
                    grad[nodes[li]] += gi;
                }
            }
        }
        let top = max_witness(wits);
        let viol = top.as_ref().map_or(f64::NEG_INFINITY, |x| x.violation);
        if best.as_ref().is_none_or(|b| viol < b.max_violation) {
            best = Some(Probe {
                w: w.clone(),
                max_violation: viol,
                witness: top,
            });
            since_best = 0;
        } else {
            since_best += 1;
        }
        if viol <= params.tol() || since_best >= params.patience {
            break;
        }
        let scale = grad.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        if scale <= 0.0 {
            break;
        }
        let step = params.step0 / (1.0 + t as f64).sqrt();
        let moved: Vec<f64> = w.iter().zip(&grad).map(|(wi, gi)| wi - step * gi / scale).collect();
        w = crate::linalg::project_capped_simplex(&moved, 0.0, 1.0, budget);
    }
    best.expect("at least one iteration")
}

fn solution_from(probe: Probe, rho: f64, flagged: bool, probes: usize, params: &BoostParams) -> BoostSolution {
    let w = probe.w;
    BoostSolution {
        rho,
        n_mat: Pseudorectangle::outer(w.clone(), w.clone(), rho),
        w,
        flagged_infeasible: flagged,
        max_violation: probe.max_violation,
        witness: probe.witness.filter(|x| x.violation > params.tol()),
        probes,
    }
}

/// Smallest feasible `ρ` on a geometric grid over `[1/n, ζ]`.
///
/// `ζ` is probed first; if it is infeasible the `ζ` iterate is returned
/// flagged. Otherwise a binary search with warm starts locates the smallest
/// feasible grid point.
pub fn solve_boost(problem: &BoostProblem, params: &BoostParams, seed: u64) -> Result<BoostSolution> {
    params.validate()?;
    let n = problem.n;
    if n == 0 {
        return Err(param("empty problem"));
    }
    let lo = (1.0 / n as f64).min(params.zeta);
    let grid = geometric_grid(lo, params.zeta, params.search_grid);
    let last = grid.len() - 1;
    let zeros = vec![0.0; n];
    let mut probes = 1;
    let top = solve_at(problem, grid[last], &zeros, params, derive_seed(seed, &[last as u64]));
    if top.max_violation > params.tol() {
        log::debug!("boost: infeasible at zeta={} (violation {})", params.zeta, top.max_violation);
        return Ok(solution_from(top, grid[last], true, probes, params));
    }
    let (mut lo_i, mut hi_i) = (0usize, last);
    let mut feasible = top;
    while lo_i < hi_i {
        let mid = (lo_i + hi_i) / 2;
        probes += 1;
        let p = solve_at(problem, grid[mid], &feasible.w, params, derive_seed(seed, &[mid as u64]));
        if p.max_violation <= params.tol() {
            hi_i = mid;
            feasible = p;
        } else {
            lo_i = mid + 1;
        }
    }
    Ok(solution_from(feasible, grid[hi_i], false, probes, params))
}

/// Outcome of checking the planted candidate `w = w_base`, `N = w_base w_baseᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessCheck {
    pub rho: f64,
    pub max_violation: f64,
    pub witness: Option<ConstraintWitness>,
}

impl WitnessCheck {
    pub fn feasible(&self) -> bool {
        self.witness.is_none()
    }
}

/// Checks the planted feasible point built from a known bad set.
pub fn check_witness_feasibility(
    problem: &BoostProblem,
    w_base: &[f64],
    params: &BoostParams,
    seed: u64,
) -> Result<WitnessCheck> {
    params.validate()?;
    let n = problem.n;
    if w_base.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: w_base.len(),
        });
    }
    if w_base.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Precondition("w_base must be a 0/1 vector".into()));
    }
    let mass: f64 = w_base.iter().sum();
    if mass > params.zeta * n as f64 {
        return Err(Error::Precondition(format!(
            "base set of size {mass} exceeds the budget zeta·n = {}",
            params.zeta * n as f64
        )));
    }
    let rho = (mass / n as f64).max(1.0 / n as f64).min(params.zeta);
    let all = all_witnesses(problem, w_base, rho, params, seed);
    let top = max_witness(all);
    let max_violation = top.as_ref().map_or(f64::NEG_INFINITY, |w| w.violation);
    Ok(WitnessCheck {
        rho,
        max_violation,
        witness: top.filter(|w| w.violation > params.tol()),
    })
}

/// Flips the sign of every node with `wᵢ ≥ 1 − 1/√K`.
pub fn flip_step_2(labels: &Labelling, w: &[f64], params: &BoostParams) -> Result<Labelling> {
    if labels.k != 2 {
        return Err(Error::Precondition(format!("flip_step_2 needs k = 2, got {}", labels.k)));
    }
    let thr = params.flip_threshold();
    let assignment = labels
        .assignment
        .iter()
        .zip(w)
        .map(|(&c, &wi)| if wi >= thr { 1 - c } else { c })
        .collect();
    Labelling::new(assignment, 2)
}

/// Reassigns every node with `wᵢ ≥ 1 − 1/√K` to one of the other `k − 1`
/// communities uniformly at random.
pub fn flip_step_k(labels: &Labelling, w: &[f64], params: &BoostParams, rng: &mut Rng) -> Result<Labelling> {
    let k = labels.k;
    if k < 2 {
        return Err(Error::Precondition(format!("flip_step_k needs k ≥ 2, got {k}")));
    }
    let thr = params.flip_threshold();
    let assignment = labels
        .assignment
        .iter()
        .zip(w)
        .map(|(&c, &wi)| {
            if wi >= thr {
                let r = rng.gen_range(0..k - 1);
                if r >= c {
                    r + 1
                } else {
                    r
                }
            } else {
                c
            }
        })
        .collect();
    Labelling::new(assignment, k)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoostMode {
    Two,
    K { alpha: f64 },
    Z2,
}

/// Per-round record of the flip loop.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub rho: f64,
    pub flagged_infeasible: bool,
    pub flips: usize,
    pub max_violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostRun {
    pub labels: Labelling,
    pub rounds: Vec<RoundRecord>,
    /// Labelling after each round.
    pub history: Vec<Labelling>,
}

impl BoostRun {
    pub fn rounds_used(&self) -> usize {
        self.rounds.len()
    }

    pub fn last_rho(&self) -> Option<f64> {
        self.rounds.last().map(|r| r.rho)
    }
}

/// Default round cap: `⌈10 ln n⌉`, or `⌈10 k ln n⌉` in k-mode.
pub fn default_rounds(n: usize, mode: BoostMode, k: usize) -> usize {
    let ln = (n.max(2) as f64).ln();
    match mode {
        BoostMode::K { .. } => (10.0 * k as f64 * ln).ceil() as usize,
        _ => (10.0 * ln).ceil() as usize,
    }
}

/// Alternates the boosting program with label flips. A flagged-infeasible
/// round skips its flip; the loop stops early once a round leaves the labels
/// unchanged.
pub fn boost_loop(
    a: &DMatrix<f64>,
    init: &Labelling,
    params: &BoostParams,
    mode: BoostMode,
    seed: u64,
) -> Result<BoostRun> {
    params.validate()?;
    let rounds = params
        .max_rounds
        .unwrap_or_else(|| default_rounds(init.n(), mode, init.k));
    let mut labels = init.clone();
    let mut records = Vec::new();
    let mut history = Vec::new();
    let mut flip_rng = rng_from_seed(derive_seed(seed, &[stage::FLIP]));
    for t in 0..rounds {
        let problem = match mode {
            BoostMode::Two | BoostMode::Z2 => BoostProblem::two(a, &labels)?,
            BoostMode::K { alpha } => BoostProblem::k_mode(a, &labels, alpha)?,
        };
        let sol = solve_boost(&problem, params, derive_seed(seed, &[stage::BOOST, t as u64]))?;
        let next = if sol.flagged_infeasible {
            log::warn!("boost round {t}: infeasible at zeta, keeping labels");
            labels.clone()
        } else {
            match mode {
                BoostMode::K { .. } if labels.k >= 3 => flip_step_k(&labels, &sol.w, params, &mut flip_rng)?,
                _ => flip_step_2(&labels, &sol.w, params)?,
            }
        };
        let flips = next
            .assignment
            .iter()
            .zip(&labels.assignment)
            .filter(|(a, b)| a != b)
            .count();
        records.push(RoundRecord {
            round: t,
            rho: sol.rho,
            flagged_infeasible: sol.flagged_infeasible,
            flips,
            max_violation: sol.max_violation,
        });
        let unchanged = next == labels;
        history.push(next.clone());
        labels = next;
        if unchanged {
            break;
        }
    }
    Ok(BoostRun {
        labels,
        rounds: records,
        history,
    })
}
