//! Adversary contracts: monotone edits only help, node corruption stays local.

use proptest::prelude::*;
use robust_sbm::instance::{
    apply_monotone, apply_node_corruption, corruption_count, gen_sbm, CorruptionSelection, InstanceSpec,
    MonotoneStrategy, NodeAttack,
};
use robust_sbm::rng::rng_from_seed;
use robust_sbm::Graph;

fn strategy() -> impl Strategy<Value = MonotoneStrategy> {
    prop_oneof![
        Just(MonotoneStrategy::RandomHelpful),
        Just(MonotoneStrategy::CliquePlant),
        Just(MonotoneStrategy::HubBoost),
    ]
}

fn attack() -> impl Strategy<Value = NodeAttack> {
    prop_oneof![
        Just(NodeAttack::RewireOpposite),
        Just(NodeAttack::Erase),
        Just(NodeAttack::RandomFlip),
        Just(NodeAttack::CliquePlantCorrupt),
    ]
}

fn differing_pairs(g: &Graph, h: &Graph) -> Vec<(usize, usize)> {
    let n = g.n();
    (0..n)
        .flat_map(|u| ((u + 1)..n).map(move |v| (u, v)))
        .filter(|&(u, v)| g.has_edge(u, v) != h.has_edge(u, v))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn monotone_edits_only_add_intra_or_remove_inter(
        seed in 0u64..10_000,
        k in 2usize..4,
        budget in 0usize..400,
        strat in strategy(),
    ) {
        let spec = InstanceSpec::balanced(60, k, 12.0, 3.0, seed);
        let (g, mut truth) = gen_sbm(&spec, &mut rng_from_seed(seed)).unwrap();
        let (h, report) = apply_monotone(&g, &mut truth, strat, budget, &mut rng_from_seed(seed + 1));
        prop_assert!(h.is_well_formed());
        prop_assert_eq!(report.performed + report.shortfall, budget);
        let diff = differing_pairs(&g, &h);
        prop_assert_eq!(diff.len(), report.performed);
        for (u, v) in diff {
            let same = truth.partition[u] == truth.partition[v];
            prop_assert_eq!(h.has_edge(u, v), same, "edit ({}, {}) is not monotone", u, v);
        }
        prop_assert_eq!(truth.monotone_edits, report.performed);
    }

    #[test]
    fn node_corruption_only_touches_chosen_nodes(
        seed in 0u64..10_000,
        eps in 0.0f64..0.3,
        atk in attack(),
    ) {
        let n = 80;
        let spec = InstanceSpec::balanced(n, 2, 15.0, 3.0, seed);
        let (g, mut truth) = gen_sbm(&spec, &mut rng_from_seed(seed)).unwrap();
        let h = apply_node_corruption(&g, &mut truth, atk, eps, CorruptionSelection::Uniform, &mut rng_from_seed(seed + 7)).unwrap();
        prop_assert!(h.is_well_formed());
        prop_assert_eq!(truth.corrupted_set.len(), corruption_count(eps, n));
        let mask = truth.is_corrupted_mask();
        for (u, v) in differing_pairs(&g, &h) {
            prop_assert!(mask[u] || mask[v], "pair ({}, {}) changed without a corrupted endpoint", u, v);
        }
    }

    #[test]
    fn rewire_preserves_corrupted_degrees(seed in 0u64..10_000, eps in 0.0f64..0.2) {
        let spec = InstanceSpec::balanced(100, 2, 10.0, 2.0, seed);
        let (g, mut truth) = gen_sbm(&spec, &mut rng_from_seed(seed)).unwrap();
        let h = apply_node_corruption(&g, &mut truth, NodeAttack::RewireOpposite, eps, CorruptionSelection::Uniform, &mut rng_from_seed(seed ^ 0xABCD)).unwrap();
        for &u in &truth.corrupted_set {
            prop_assert_eq!(h.degree(u), g.degree(u), "node {}", u);
        }
    }
}

#[test]
fn boundary_selection_picks_the_most_crossing_nodes() {
    let spec = InstanceSpec::balanced(100, 2, 10.0, 6.0, 3);
    let (g, mut truth) = gen_sbm(&spec, &mut rng_from_seed(3)).unwrap();
    let part = truth.partition.clone();
    let cross: Vec<usize> = (0..100)
        .map(|u| g.neighbors(u).filter(|&v| part[v] != part[u]).count())
        .collect();
    apply_node_corruption(&g, &mut truth, NodeAttack::Erase, 0.1, CorruptionSelection::Boundary, &mut rng_from_seed(4)).unwrap();
    let chosen_min = truth.corrupted_set.iter().map(|&u| cross[u]).min().unwrap();
    let mask = truth.is_corrupted_mask();
    let rest_max = (0..100).filter(|&u| !mask[u]).map(|u| cross[u]).max().unwrap();
    assert!(chosen_min >= rest_max);
}
