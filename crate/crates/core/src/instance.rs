//! Pure, semi-random and node-corrupted SBM instances, and the ℤ₂
//! synchronization analogues.

use nalgebra::DMatrix;
use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::graph::Graph;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub n: usize,
    pub k: usize,
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub eps: f64,
    pub seed: u64,
    /// Explicit community sizes; sampled within the imbalance box when absent.
    #[serde(default)]
    pub sizes: Option<Vec<usize>>,
}

impl InstanceSpec {
    pub fn balanced(n: usize, k: usize, a: f64, b: f64, seed: u64) -> Self {
        Self {
            n,
            k,
            a,
            b,
            alpha: 1.0,
            eps: 0.0,
            seed,
            sizes: None,
        }
    }

    /// Inclusive size range `[⌈αn/k⌉, ⌊n/(αk)⌋]`.
    pub fn size_bounds(&self) -> (usize, usize) {
        let n = self.n as f64;
        let k = self.k as f64;
        let lo = (self.alpha * n / k - 1e-9).ceil().max(1.0) as usize;
        let hi = (n / (self.alpha * k) + 1e-9).floor() as usize;
        (lo, hi)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(param(format!("k={} must be at least 2", self.k)));
        }
        if self.n < self.k {
            return Err(param(format!("n={} is smaller than k={}", self.n, self.k)));
        }
        if !(self.b > 0.0 && self.b < self.a && self.a <= self.n as f64 / 2.0) {
            return Err(param(format!(
                "need 0 < b < a <= n/2, got a={}, b={}, n={}",
                self.a, self.b, self.n
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(param(format!("alpha={} must lie in (0, 1]", self.alpha)));
        }
        if !(0.0..1.0).contains(&self.eps) {
            return Err(param(format!("eps={} must lie in [0, 1)", self.eps)));
        }
        let (lo, hi) = self.size_bounds();
        if lo > hi || lo * self.k > self.n || hi * self.k < self.n {
            return Err(param(format!(
                "no size vector of {} communities in [{lo}, {hi}] sums to n={}",
                self.k, self.n
            )));
        }
        if let Some(sizes) = &self.sizes {
            if sizes.len() != self.k || sizes.iter().sum::<usize>() != self.n {
                return Err(param("explicit sizes must have k entries summing to n"));
            }
            if sizes.iter().any(|&s| s < lo || s > hi) {
                return Err(param(format!("explicit sizes must lie in [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub partition: Vec<usize>,
    pub k: usize,
    /// `+1` for community 0 and `−1` for community 1; present only when k = 2.
    pub sign_vector: Option<Vec<i8>>,
    pub corrupted_set: Vec<usize>,
    pub monotone_edits: usize,
}

impl GroundTruth {
    pub fn from_partition(partition: Vec<usize>, k: usize) -> Self {
        let sign_vector =
            (k == 2).then(|| partition.iter().map(|&c| if c == 0 { 1 } else { -1 }).collect());
        Self {
            partition,
            k,
            sign_vector,
            corrupted_set: Vec::new(),
            monotone_edits: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.partition.len()
    }

    pub fn community_sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &c in &self.partition {
            s[c] += 1;
        }
        s
    }

    pub fn is_corrupted_mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.n()];
        for &i in &self.corrupted_set {
            m[i] = true;
        }
        m
    }
}

fn sample_sizes(spec: &InstanceSpec, rng: &mut Rng) -> Vec<usize> {
    if let Some(s) = &spec.sizes {
        return s.clone();
    }
    let (lo, hi) = spec.size_bounds();
    let k = spec.k;
    for _ in 0..100_000 {
        let mut s: Vec<usize> = (0..k - 1).map(|_| rng.gen_range(lo..=hi)).collect();
        let used: usize = s.iter().sum();
        if used < spec.n && (lo..=hi).contains(&(spec.n - used)) {
            s.push(spec.n - used);
            return s;
        }
    }
    // Sequential sampling within the ranges that keep the rest feasible.
    let mut s = Vec::with_capacity(k);
    let mut left = spec.n;
    for i in 0..k {
        let rest = k - i - 1;
        let min = lo.max(left.saturating_sub(rest * hi));
        let max = hi.min(left - rest * lo);
        let v = if i + 1 == k { left } else { rng.gen_range(min..=max) };
        s.push(v);
        left -= v;
    }
    s
}

/// Samples a graph from the SBM with intra probability a/n and inter
/// probability b/n.
pub fn gen_sbm(spec: &InstanceSpec, rng: &mut Rng) -> Result<(Graph, GroundTruth)> {
    spec.validate()?;
    let n = spec.n;
    let sizes = sample_sizes(spec, rng);
    let mut nodes: Vec<usize> = (0..n).collect();
    nodes.shuffle(rng);
    let mut partition = vec![0; n];
    let mut pos = 0;
    for (c, &s) in sizes.iter().enumerate() {
        for &u in &nodes[pos..pos + s] {
            partition[u] = c;
        }
        pos += s;
    }
    let p_in = spec.a / n as f64;
    let p_out = spec.b / n as f64;
    let mut g = Graph::empty(n);
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if partition[u] == partition[v] { p_in } else { p_out };
            if rng.gen::<f64>() < p {
                g.set_edge(u, v, true);
            }
        }
    }
    Ok((g, GroundTruth::from_partition(partition, spec.k)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonotoneStrategy {
    RandomHelpful,
    CliquePlant,
    HubBoost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonotoneReport {
    pub performed: usize,
    pub shortfall: usize,
}

fn helpful_slots(g: &Graph, part: &[usize]) -> Vec<(usize, usize)> {
    let n = g.n();
    let mut slots = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let same = part[u] == part[v];
            if same != g.has_edge(u, v) {
                slots.push((u, v));
            }
        }
    }
    slots
}

/// Toggles the pair so that it agrees with the partition; returns whether an
/// edit happened.
fn make_helpful(g: &mut Graph, part: &[usize], u: usize, v: usize) -> bool {
    if u == v {
        return false;
    }
    let same = part[u] == part[v];
    if g.has_edge(u, v) == same {
        return false;
    }
    g.set_edge(u, v, same);
    true
}

fn random_helpful(g: &mut Graph, part: &[usize], budget: usize, rng: &mut Rng) -> usize {
    if budget == 0 {
        return 0;
    }
    let slots = helpful_slots(g, part);
    let take = budget.min(slots.len());
    for i in index::sample(rng, slots.len(), take) {
        let (u, v) = slots[i];
        make_helpful(g, part, u, v);
    }
    take
}

/// Applies up to `budget` monotone edits: each one adds an intra-community
/// edge or deletes an inter-community edge.
pub fn apply_monotone(
    g: &Graph,
    truth: &mut GroundTruth,
    strategy: MonotoneStrategy,
    budget: usize,
    rng: &mut Rng,
) -> (Graph, MonotoneReport) {
    let mut out = g.clone();
    let part = &truth.partition;
    let n = g.n();
    let mut done = 0;
    match strategy {
        MonotoneStrategy::RandomHelpful => {
            done = random_helpful(&mut out, part, budget, rng);
        }
        MonotoneStrategy::CliquePlant => {
            let m = ((n as f64).sqrt().ceil() as usize).max(2);
            let mut members: Vec<Vec<usize>> = vec![Vec::new(); truth.k];
            for (u, &c) in part.iter().enumerate() {
                members[c].push(u);
            }
            let eligible: Vec<usize> = (0..truth.k).filter(|&c| members[c].len() >= 2).collect();
            let mut stale = 0;
            while done < budget && !eligible.is_empty() && stale < 20 {
                let c = *eligible.choose(rng).expect("nonempty");
                let size = m.min(members[c].len());
                let clique: Vec<usize> =
                    members[c].choose_multiple(rng, size).copied().collect();
                let mut pairs = Vec::new();
                for (i, &u) in clique.iter().enumerate() {
                    for &v in &clique[i + 1..] {
                        if !out.has_edge(u, v) {
                            pairs.push((u, v));
                        }
                    }
                }
                if pairs.is_empty() {
                    stale += 1;
                    continue;
                }
                stale = 0;
                pairs.shuffle(rng);
                for (u, v) in pairs {
                    if done == budget {
                        break;
                    }
                    if make_helpful(&mut out, part, u, v) {
                        done += 1;
                    }
                }
            }
            done += random_helpful(&mut out, part, budget - done, rng);
        }
        MonotoneStrategy::HubBoost => {
            let mut hubs: Vec<usize> = (0..n).collect();
            hubs.shuffle(rng);
            'outer: for &h in &hubs {
                let mut others: Vec<usize> = (0..n).filter(|&v| v != h).collect();
                others.shuffle(rng);
                for v in others {
                    if done == budget {
                        break 'outer;
                    }
                    if make_helpful(&mut out, part, h, v) {
                        done += 1;
                    }
                }
            }
        }
    }
    truth.monotone_edits += done;
    (
        out,
        MonotoneReport {
            performed: done,
            shortfall: budget - done,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeAttack {
    /// Reconnect every edge of a corrupted node to the other communities,
    /// preserving its degree.
    RewireOpposite,
    Erase,
    /// Resample incident edges as if the node belonged to another community.
    RandomFlip,
    /// Erase incident edges, then join all corrupted nodes in a clique.
    CliquePlantCorrupt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionSelection {
    #[default]
    Uniform,
    /// Nodes with the most neighbors outside their own community.
    Boundary,
}

/// Number of nodes an ε budget allows: `⌈εn⌉`.
pub fn corruption_count(eps: f64, n: usize) -> usize {
    ((eps * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n)
}

fn select_corrupted(
    g: &Graph,
    part: &[usize],
    count: usize,
    selection: CorruptionSelection,
    rng: &mut Rng,
) -> Vec<usize> {
    let n = g.n();
    let mut chosen: Vec<usize> = match selection {
        CorruptionSelection::Uniform => index::sample(rng, n, count).into_vec(),
        CorruptionSelection::Boundary => {
            let mut nodes: Vec<usize> = (0..n).collect();
            nodes.shuffle(rng);
            let cross: Vec<usize> = (0..n)
                .map(|u| g.neighbors(u).filter(|&v| part[v] != part[u]).count())
                .collect();
            nodes.sort_by(|&x, &y| cross[y].cmp(&cross[x]));
            nodes.truncate(count);
            nodes
        }
    };
    chosen.sort_unstable();
    chosen
}

/// Lets an adversary rewrite all edges incident to `⌈εn⌉` nodes.
pub fn apply_node_corruption(
    g: &Graph,
    truth: &mut GroundTruth,
    attack: NodeAttack,
    eps: f64,
    selection: CorruptionSelection,
    rng: &mut Rng,
) -> Result<Graph> {
    if !(0.0..1.0).contains(&eps) {
        return Err(param(format!("eps={eps} must lie in [0, 1)")));
    }
    let n = g.n();
    if truth.n() != n {
        return Err(crate::error::Error::Dimension {
            expected: n,
            got: truth.n(),
        });
    }
    let count = corruption_count(eps, n);
    let part = truth.partition.clone();
    let chosen = select_corrupted(g, &part, count, selection, rng);
    let mut out = g.clone();
    match attack {
        NodeAttack::Erase => {
            for &u in &chosen {
                out.isolate(u);
            }
        }
        NodeAttack::CliquePlantCorrupt => {
            for &u in &chosen {
                out.isolate(u);
            }
            for (i, &u) in chosen.iter().enumerate() {
                for &v in &chosen[i + 1..] {
                    out.set_edge(u, v, true);
                }
            }
        }
        NodeAttack::RandomFlip => {
            let p_in = edge_density(g, &part, true);
            let p_out = edge_density(g, &part, false);
            for &u in &chosen {
                let other: Vec<usize> = (0..truth.k).filter(|&c| c != part[u]).collect();
                let fake = *other.choose(rng).expect("k >= 2");
                for (v, &cv) in part.iter().enumerate() {
                    if v != u {
                        let p = if cv == fake { p_in } else { p_out };
                        out.set_edge(u, v, rng.gen::<f64>() < p);
                    }
                }
            }
        }
        NodeAttack::RewireOpposite => rewire_opposite(&mut out, &part, &chosen, rng),
    }
    let mut set: Vec<usize> = truth.corrupted_set.iter().copied().chain(chosen).collect();
    set.sort_unstable();
    set.dedup();
    truth.corrupted_set = set;
    Ok(out)
}

fn edge_density(g: &Graph, part: &[usize], same: bool) -> f64 {
    let n = g.n();
    let (mut edges, mut pairs) = (0usize, 0usize);
    for u in 0..n {
        for v in (u + 1)..n {
            if (part[u] == part[v]) == same {
                pairs += 1;
                edges += g.has_edge(u, v) as usize;
            }
        }
    }
    if pairs == 0 {
        0.0
    } else {
        edges as f64 / pairs as f64
    }
}

fn rewire_opposite(g: &mut Graph, part: &[usize], chosen: &[usize], rng: &mut Rng) {
    let n = g.n();
    let mut corrupted = vec![false; n];
    for &u in chosen {
        corrupted[u] = true;
    }
    let degree: Vec<usize> = chosen.iter().map(|&u| g.degree(u)).collect();
    for &u in chosen {
        g.isolate(u);
    }
    // Per community: corrupted and uncorrupted members.
    let k = part.iter().copied().max().map_or(1, |m| m + 1);
    let mut clean_members: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut corrupt_count = vec![0usize; k];
    let mut size = vec![0usize; k];
    for u in 0..n {
        size[part[u]] += 1;
        if corrupted[u] {
            corrupt_count[part[u]] += 1;
        } else {
            clean_members[part[u]].push(u);
        }
    }
    // Stubs are split between corrupted and clean opposite nodes in
    // proportion to their share of the opposite side.
    let mut marked: Vec<usize> = Vec::new();
    let mut clean_need = vec![0usize; chosen.len()];
    for (idx, &u) in chosen.iter().enumerate() {
        let opp_total: usize = (0..k).filter(|&c| c != part[u]).map(|c| size[c]).sum();
        let opp_corrupt: usize = (0..k)
            .filter(|&c| c != part[u])
            .map(|c| corrupt_count[c])
            .sum();
        let f = if opp_total == 0 {
            0.0
        } else {
            opp_corrupt as f64 / opp_total as f64
        };
        for _ in 0..degree[idx] {
            if rng.gen::<f64>() < f {
                marked.push(idx);
            } else {
                clean_need[idx] += 1;
            }
        }
    }
    // Pair marked stubs between corrupted nodes of different communities.
    marked.shuffle(rng);
    let mut pending: Vec<usize> = Vec::new();
    for s in marked {
        let u = chosen[s];
        let pos = pending.iter().position(|&t| {
            let v = chosen[t];
            part[v] != part[u] && !g.has_edge(u, v)
        });
        match pos {
            Some(p) => {
                let t = pending.swap_remove(p);
                g.set_edge(u, chosen[t], true);
            }
            None => pending.push(s),
        }
    }
    for s in pending {
        clean_need[s] += 1;
    }
    // Remaining stubs go to distinct clean opposite nodes, then to any unused
    // slot when the opposite side is exhausted.
    for (idx, &u) in chosen.iter().enumerate() {
        let mut need = clean_need[idx];
        if need == 0 {
            continue;
        }
        let mut cands: Vec<usize> = (0..k)
            .filter(|&c| c != part[u])
            .flat_map(|c| clean_members[c].iter().copied())
            .filter(|&v| !g.has_edge(u, v))
            .collect();
        let take = need.min(cands.len());
        for i in index::sample(rng, cands.len(), take) {
            g.set_edge(u, cands[i], true);
        }
        need -= take;
        if need > 0 {
            cands = (0..n).filter(|&v| v != u && !g.has_edge(u, v)).collect();
            let take = need.min(cands.len());
            for i in index::sample(rng, cands.len(), take) {
                g.set_edge(u, cands[i], true);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Z2Instance {
    pub n: usize,
    pub matrix: DMatrix<f64>,
    pub lambda: f64,
}

/// Observes `λℓℓᵀ/√n + E` with `E` iid standard normal and `ℓ` uniform ±1.
pub fn gen_z2(n: usize, lambda: f64, rng: &mut Rng) -> Result<(Z2Instance, GroundTruth)> {
    if n < 2 {
        return Err(param(format!("n={n} must be at least 2")));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(param(format!("lambda={lambda} must be finite and nonnegative")));
    }
    let signs: Vec<f64> = (0..n)
        .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let scale = lambda / (n as f64).sqrt();
    let mut m = DMatrix::zeros(n, n);
    // Row-major draw order keeps the stream layout independent of storage.
    for i in 0..n {
        for j in 0..n {
            let e: f64 = rng.sample(StandardNormal);
            m[(i, j)] = scale * signs[i] * signs[j] + e;
        }
    }
    let partition = signs.iter().map(|&s| if s > 0.0 { 0 } else { 1 }).collect();
    Ok((
        Z2Instance {
            n,
            matrix: m,
            lambda,
        },
        GroundTruth::from_partition(partition, 2),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Z2Attack {
    /// Corrupted rows and columns become `−λℓℓᵀ/√n` plus fresh noise.
    FlipSign,
    Zero,
    /// Corrupted rows and columns become pure fresh noise.
    Noise,
}

/// Adds a sign-consistent monotone perturbation on `monotone_budget` random
/// entries (scaled half-normal magnitudes times `monotone_scale`), then lets
/// the adversary rewrite `⌈εn⌉` rows and columns.
#[allow(clippy::too_many_arguments)]
pub fn corrupt_z2(
    inst: &Z2Instance,
    truth: &mut GroundTruth,
    eps: f64,
    monotone_budget: usize,
    monotone_scale: f64,
    attack: Z2Attack,
    rng: &mut Rng,
) -> Result<Z2Instance> {
    if !(0.0..1.0).contains(&eps) {
        return Err(param(format!("eps={eps} must lie in [0, 1)")));
    }
    let n = inst.n;
    let signs: Vec<f64> = truth
        .sign_vector
        .as_ref()
        .ok_or_else(|| param("z2 ground truth needs a sign vector"))?
        .iter()
        .map(|&s| s as f64)
        .collect();
    let mut m = inst.matrix.clone();
    let budget = monotone_budget.min(n * n);
    for cell in index::sample(rng, n * n, budget) {
        let (i, j) = (cell / n, cell % n);
        let g: f64 = rng.sample::<f64, _>(StandardNormal).abs();
        m[(i, j)] += monotone_scale * g * signs[i] * signs[j];
    }
    truth.monotone_edits += budget;
    let chosen = {
        let mut c = index::sample(rng, n, corruption_count(eps, n)).into_vec();
        c.sort_unstable();
        c
    };
    let scale = inst.lambda / (n as f64).sqrt();
    for &i in &chosen {
        for j in 0..n {
            for (r, c) in [(i, j), (j, i)] {
                m[(r, c)] = match attack {
                    Z2Attack::Zero => 0.0,
                    Z2Attack::Noise => rng.sample(StandardNormal),
                    Z2Attack::FlipSign => {
                        -scale * signs[r] * signs[c] + rng.sample::<f64, _>(StandardNormal)
                    }
                };
            }
        }
    }
    let mut set: Vec<usize> = truth.corrupted_set.iter().copied().chain(chosen).collect();
    set.sort_unstable();
    set.dedup();
    truth.corrupted_set = set;
    Ok(Z2Instance {
        n,
        matrix: m,
        lambda: inst.lambda,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn sizes_respect_imbalance_box() {
        let spec = InstanceSpec {
            alpha: 0.6,
            ..InstanceSpec::balanced(300, 3, 20.0, 4.0, 0)
        };
        let (lo, hi) = spec.size_bounds();
        for seed in 0..50 {
            let (_, t) = gen_sbm(&spec, &mut rng_from_seed(seed)).unwrap();
            for s in t.community_sizes() {
                assert!(s >= lo && s <= hi, "{s} outside [{lo}, {hi}]");
            }
        }
    }

    #[test]
    fn infeasible_sizes_are_rejected() {
        let spec = InstanceSpec::balanced(301, 2, 20.0, 4.0, 0);
        assert!(gen_sbm(&spec, &mut rng_from_seed(0)).is_err());
        let bad = InstanceSpec::balanced(100, 2, 4.0, 20.0, 0);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn corruption_count_is_ceiling() {
        assert_eq!(corruption_count(0.0, 100), 0);
        assert_eq!(corruption_count(0.05, 400), 20);
        assert_eq!(corruption_count(0.051, 100), 6);
        assert_eq!(corruption_count(0.3, 2000), 600);
    }

    #[test]
    fn zero_budget_monotone_is_identity() {
        let spec = InstanceSpec::balanced(60, 2, 10.0, 3.0, 0);
        let mut rng = rng_from_seed(1);
        let (g, mut t) = gen_sbm(&spec, &mut rng).unwrap();
        for s in [
            MonotoneStrategy::RandomHelpful,
            MonotoneStrategy::CliquePlant,
            MonotoneStrategy::HubBoost,
        ] {
            let (out, rep) = apply_monotone(&g, &mut t, s, 0, &mut rng);
            assert_eq!(out, g);
            assert_eq!(rep.performed, 0);
        }
        assert_eq!(t.monotone_edits, 0);
    }

    #[test]
    fn z2_monotone_respects_signs_and_zero_attack_zeroes() {
        let mut rng = rng_from_seed(3);
        let (inst, mut t) = gen_z2(30, 2.0, &mut rng).unwrap();
        let out = corrupt_z2(&inst, &mut t, 0.1, 200, 1.0, Z2Attack::Zero, &mut rng).unwrap();
        let s = t.sign_vector.clone().unwrap();
        let bad = t.is_corrupted_mask();
        for i in 0..30 {
            for j in 0..30 {
                if bad[i] || bad[j] {
                    assert_eq!(out.matrix[(i, j)], 0.0);
                } else {
                    let d = (out.matrix[(i, j)] - inst.matrix[(i, j)]) * (s[i] * s[j]) as f64;
                    assert!(d >= 0.0);
                }
            }
        }
        assert_eq!(t.corrupted_set.len(), 3);
    }
}
