use lossycs::bounds::{
    beta_classic, beta_serial, beta_star, beta_tree, branch_lower_bound, oversampling_baseline, relay_lower_bound,
    BoundAlgorithm, BoundKind,
};
use lossycs::Query;
use proptest::prelude::*;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn query() -> impl Strategy<Value = Query> {
    (
        20usize..400,
        1usize..10,
        0.05f64..0.95,
        0.001f64..0.5,
        0.2f64..2.0,
        0.01f64..=1.0,
        0.01f64..=1.0,
        1usize..30,
    )
        .prop_map(|(n, s, delta, eps, c, p, q, k)| {
            Query::new(n, s.min(n), delta, eps)
                .with_c(c)
                .with_p(p)
                .with_q(q)
                .with_k(k)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn reductions(q in query()) {
        let star = beta_star(&q).unwrap().value;
        let full = q.with_q(1.0);
        prop_assert!(close(full.k as f64 * beta_tree(&full).unwrap().value, star));
        let one = q.with_k(1);
        prop_assert!(close(beta_tree(&one).unwrap().value, beta_star(&one.with_p(q.p * q.q)).unwrap().value));
        prop_assert!(close(beta_serial(&one).unwrap().value, beta_star(&one).unwrap().value));
        let lossless = q.with_p(1.0);
        prop_assert!(close(lossless.k as f64 * beta_serial(&lossless).unwrap().value, beta_classic(&q).unwrap().value));
        prop_assert!(close(beta_star(&lossless).unwrap().value, beta_classic(&q).unwrap().value));
    }

    #[test]
    fn star_dominates_baseline(q in query()) {
        let star = beta_star(&q).unwrap().value;
        let base = oversampling_baseline(&q).unwrap().value;
        prop_assert!(star >= base * (1.0 - 1e-12));
    }

    #[test]
    fn tree_and_serial_need_more_than_their_floors(q in query()) {
        let tree = beta_tree(&q).unwrap().value;
        let relay = relay_lower_bound(&q).unwrap().value;
        prop_assert!(tree >= relay * (1.0 - 1e-12));
        let serial = beta_serial(&q).unwrap().value;
        let branch = branch_lower_bound(&q).unwrap().value;
        prop_assert!(serial >= branch * (1.0 - 1e-12));
    }

    #[test]
    fn lossier_links_need_more_measurements(q in query(), shrink in 0.1f64..1.0) {
        let worse = q.with_p(q.p * shrink);
        for kind in [BoundKind::Star, BoundKind::Tree, BoundKind::Serial] {
            let a = kind.evaluate(&q).unwrap().value;
            let b = kind.evaluate(&worse).unwrap().value;
            prop_assert!(b >= a * (1.0 - 1e-12), "{:?}", kind);
        }
    }

    #[test]
    fn value_is_ratio_of_parts(q in query()) {
        for kind in [BoundKind::Classic, BoundKind::Star, BoundKind::Tree, BoundKind::Serial] {
            let r = kind.evaluate(&q).unwrap();
            prop_assert!(!r.degenerate);
            prop_assert!(close(r.value, r.numerator / r.log_denominator));
        }
    }

    #[test]
    fn algorithm_variant_is_finite(q in query()) {
        for algo in [BoundAlgorithm::BasisPursuit, BoundAlgorithm::Iht, BoundAlgorithm::Cosamp] {
            let r = BoundKind::StarAlgo.evaluate(&q.with_algorithm(algo));
            if algo.constants::<f64>().r_algo * q.s > q.n {
                prop_assert!(r.unwrap_err().is_config());
            } else {
                let r = r.unwrap();
                prop_assert!(r.value.is_finite() && r.value > 0.0);
            }
        }
    }
}

#[test]
fn no_delivery_means_no_bound() {
    let q = Query::new(200, 20, 0.5, 0.01).with_p(0.0);
    assert!(beta_star(&q).unwrap().value.is_infinite());
    assert!(beta_tree(&q.with_p(0.5).with_q(0.0)).unwrap().value.is_infinite());
}

#[test]
fn invalid_queries_are_rejected() {
    for q in [
        Query::new(10, 0, 0.5, 0.01),
        Query::new(10, 11, 0.5, 0.01),
        Query::new(10, 2, 0.0, 0.01),
        Query::new(10, 2, 0.5, 1.0),
        Query::new(10, 2, 0.5, 0.01).with_p(1.5),
    ] {
        assert!(beta_star(&q).unwrap_err().is_config());
    }
}
