//! Resolvability slack against LP-vertex enumeration.

mod common;

use common::lp_vertex_min;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use robust_sbm::rng::rng_from_seed;
use robust_sbm::stats::{greedy_budgeted_min, resolvability_slack, ResolvabilityParams};

#[test]
fn slack_equals_vertex_brute_force_on_random_matrices() {
    let mut rng = rng_from_seed(2);
    for case in 0..100 {
        let n = 8;
        let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-3.0..3.0));
        let params = ResolvabilityParams {
            d1: rng.gen_range(0.0..4.0),
            d2: rng.gen_range(0.0..1.0),
            budget_frac: rng.gen_range(0.05..0.5),
        };
        let (slack, x) = resolvability_slack(&m, &params).unwrap();
        let sums: Vec<f64> = (0..n).map(|i| m.row(i).sum() - params.d1).collect();
        let want = lp_vertex_min(&sums, params.budget_frac * n as f64) + params.d2 * n as f64;
        assert!((slack - want).abs() < 1e-9, "case {case}: {slack} vs {want}");
        let attained: f64 = x.iter().zip(&sums).map(|(a, b)| a * b).sum::<f64>() + params.d2 * n as f64;
        assert!((attained - slack).abs() < 1e-9);
        assert!(x.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!(x.iter().sum::<f64>() <= params.budget_frac * n as f64 + 1e-9);
    }
}

#[test]
fn rejects_bad_parameters() {
    let m = DMatrix::zeros(4, 4);
    for budget_frac in [0.0, 0.6] {
        let p = ResolvabilityParams {
            d1: 1.0,
            d2: 1.0,
            budget_frac,
        };
        assert!(resolvability_slack(&m, &p).is_err());
    }
    let rect = DMatrix::zeros(3, 4);
    let p = ResolvabilityParams {
        d1: 1.0,
        d2: 1.0,
        budget_frac: 0.1,
    };
    assert!(resolvability_slack(&rect, &p).is_err());
}

proptest! {
    #[test]
    fn greedy_matches_vertex_enumeration(v in prop::collection::vec(-5.0f64..5.0, 1..10), budget in 0.0f64..10.0) {
        let (val, x) = greedy_budgeted_min(&v, budget);
        prop_assert!((val - lp_vertex_min(&v, budget)).abs() < 1e-9);
        prop_assert!(x.iter().sum::<f64>() <= budget + 1e-9);
    }

    #[test]
    fn slack_is_convex_and_nonincreasing_in_budget(v in prop::collection::vec(-5.0f64..5.0, 2..12)) {
        let n = v.len() as f64;
        let vals: Vec<f64> = (0..=10).map(|t| greedy_budgeted_min(&v, n * t as f64 / 10.0).0).collect();
        for w in vals.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
        for w in vals.windows(3) {
            prop_assert!(w[0] + w[2] >= 2.0 * w[1] - 1e-9);
        }
    }

    #[test]
    fn slack_shifts_linearly_in_d2(seed in 0u64..1000, d2 in 0.0f64..3.0) {
        let mut rng = rng_from_seed(seed);
        let m = DMatrix::from_fn(6, 6, |_, _| rng.gen_range(-2.0..2.0));
        let base = ResolvabilityParams { d1: 1.0, d2: 0.0, budget_frac: 0.3 };
        let shifted = ResolvabilityParams { d2, ..base };
        let s0 = resolvability_slack(&m, &base).unwrap().0;
        let s1 = resolvability_slack(&m, &shifted).unwrap().0;
        prop_assert!((s1 - s0 - 6.0 * d2).abs() < 1e-9);
    }
}
