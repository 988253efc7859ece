use mk_core::corpus::{self, random_ap_weight, random_positive};
use mk_core::operators::maximal;
use mk_core::{
    estimate_operator_norm, rdf_dual_iterate, rdf_iterate, Exponent, OperatorKind, RdfConfig, Sequence, Weight,
};
use proptest::prelude::*;

fn instance(seed: u64, min_n: usize, max_n: usize) -> (Weight, Sequence, Exponent) {
    let mut rng = corpus::rng(seed);
    let n = min_n + (seed as usize % (max_n - min_n + 1));
    let p = Exponent::new([1.5, 2.0, 3.0][(seed / 7 % 3) as usize]).unwrap();
    let w = random_ap_weight(&mut rng, n, p).unwrap();
    let h = random_positive(&mut rng, n, 1e-3, 1e3);
    (w, h, p)
}

fn safe_k(w: &Weight, p: Exponent, seed: u64) -> f64 {
    estimate_operator_norm(OperatorKind::Maximal, w, p, 400, seed)
        .unwrap()
        .constant_with_safety(1.5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn iterate_grows_with_s(seed in any::<u64>(), s in 0usize..20) {
        let (w, h, p) = instance(seed, 4, 48);
        let k = safe_k(&w, p, seed);
        let a = rdf_iterate(&h, &w, p, &RdfConfig::new(k, s, 1e-300).unwrap()).unwrap();
        let b = rdf_iterate(&h, &w, p, &RdfConfig::new(k, s + 1, 1e-300).unwrap()).unwrap();
        prop_assert!(a.iterate.values().iter().zip(b.iterate.values()).all(|(x, y)| x <= y));
        prop_assert!(a.iterate.values().iter().zip(h.values()).all(|(x, y)| x >= y));
    }

    #[test]
    fn norm_bounded_by_term_sum(seed in any::<u64>()) {
        let (w, h, p) = instance(seed, 4, 48);
        let r = rdf_iterate(&h, &w, p, &RdfConfig::with_k(safe_k(&w, p, seed)).unwrap()).unwrap();
        prop_assert!(r.iterate_norm <= r.term_norm_sum() * (1.0 + 1e-12));
        prop_assert_eq!(r.term_norms.len(), r.terms_used() + 1);
    }

    #[test]
    fn maximal_of_iterate_within_slack(seed in any::<u64>()) {
        let (w, h, p) = instance(seed, 4, 48);
        let k = safe_k(&w, p, seed);
        let r = rdf_iterate(&h, &w, p, &RdfConfig::with_k(k).unwrap()).unwrap();
        let m = maximal(&r.iterate);
        for (mx, x) in m.values().iter().zip(r.iterate.values()) {
            prop_assert!(*mx <= 2.0 * k * (1.0 + r.tail_slack) * x * (1.0 + 1e-9));
        }
        prop_assert!(r.checks.i && r.checks.ii && r.checks.iii);
    }

    #[test]
    fn dual_checks_hold(seed in any::<u64>()) {
        let (w, h, p) = instance(seed, 4, 48);
        let q = p.conjugate();
        let k = estimate_operator_norm(OperatorKind::DualMaximal, &w, q, 400, seed)
            .unwrap()
            .constant_with_safety(1.5);
        let r = rdf_dual_iterate(&h, &w, p, &RdfConfig::with_k(k).unwrap()).unwrap();
        prop_assert!(r.checks.i && r.checks.ii && r.checks.iii, "{:?}", r.checks);
        prop_assert_eq!(r.norm_exponent, q.get());
    }
}

/// With a certified `K` at `N <= 2`, every term obeys the geometric bound.
#[test]
fn certified_k_gives_geometric_terms() {
    for seed in 0..12u64 {
        let (w, h, p) = instance(seed, 1, 2);
        let e = estimate_operator_norm(OperatorKind::Maximal, &w, p, 400, seed).unwrap();
        assert!(e.is_certified_upper);
        let k = e.upper_bound.unwrap_or(e.value);
        let r = rdf_iterate(&h, &w, p, &RdfConfig::with_k(k).unwrap()).unwrap();
        for (s, t) in r.term_norms.iter().enumerate() {
            assert!(
                *t <= r.h_norm * 0.5f64.powi(s as i32) * (1.0 + 1e-9),
                "seed {seed} s {s}"
            );
        }
        assert!(r.iterate_norm <= 2.0 * r.h_norm * (1.0 + 1e-9));
    }
}

#[test]
fn small_k_is_reported_as_nonconvergent() {
    let w = Weight::constant(16, 1.0).unwrap();
    let h = Sequence::new((1..=16).map(|k| 1.0 / k as f64).collect()).unwrap();
    let p = Exponent::new(2.0).unwrap();
    let err = rdf_iterate(&h, &w, p, &RdfConfig::new(0.1, 200, 1e-12).unwrap());
    assert!(matches!(err, Err(mk_core::Error::NonconvergentSeries { .. })));
}
