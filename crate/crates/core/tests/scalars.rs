//! Model scalars against independent evaluations.

mod common;

use common::{dconst_by_bisection, rconst_by_logs, rel_err};
use proptest::prelude::*;
use rand::Rng;
use robust_sbm::rng::rng_from_seed;
use robust_sbm::stats::{dconst, rconst, snr};

#[test]
fn scalars_match_independent_oracles_on_random_pairs() {
    let mut rng = rng_from_seed(1);
    let mut checked = 0;
    while checked < 10_000 {
        let q: f64 = 10f64.powf(rng.gen_range(-4.0..-0.05));
        let p: f64 = 10f64.powf(rng.gen_range(-4.0..-0.05));
        let (p, q) = if p > q { (p, q) } else { (q, p) };
        if p / q < 1.01 {
            continue;
        }
        let d = dconst(p, q).unwrap();
        assert!(q < d && d < p, "sandwich fails at p={p}, q={q}: {d}");
        assert!(rel_err(d, dconst_by_bisection(p, q)) < 1e-12, "dconst({p}, {q}) = {d}");
        let r = rconst(p, q).unwrap();
        assert!(rel_err(r, rconst_by_logs(p, q)) < 1e-12, "rconst({p}, {q}) = {r}");
        checked += 1;
    }
}

#[test]
fn domain_errors() {
    assert!(dconst(0.3, 0.3).is_err());
    assert!(dconst(0.0, 0.3).is_err());
    assert!(dconst(0.3, 1.0).is_err());
    assert!(rconst(-0.1, 0.3).is_err());
}

#[test]
fn snr_example() {
    assert!((snr(121.0, 1.0) - 100.0).abs() < 1e-12);
    assert_eq!(snr(7.0, 7.0), 0.0);
}

proptest! {
    #[test]
    fn dconst_is_symmetric_under_swap(p in 0.001f64..0.99, q in 0.001f64..0.99) {
        prop_assume!((p - q).abs() > 1e-3);
        prop_assert!(rel_err(dconst(p, q).unwrap(), dconst(q, p).unwrap()) < 1e-12);
    }

    #[test]
    fn rconst_exceeds_one_iff_p_exceeds_q(p in 0.001f64..0.99, q in 0.001f64..0.99) {
        prop_assume!(p != q);
        prop_assert_eq!(rconst(p, q).unwrap() > 1.0, p > q);
    }

    #[test]
    fn snr_is_symmetric_and_nonnegative(a in 0.0f64..200.0, b in 0.0f64..200.0) {
        prop_assert!(snr(a, b) >= 0.0);
        prop_assert!((snr(a, b) - snr(b, a)).abs() < 1e-9);
    }
}
