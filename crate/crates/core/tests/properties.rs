use std::sync::Arc;

use mlp_core::bounds::{
    cost_recursion_bound, full_history_corrected_bound, full_history_equality_case, two_step_closed_form,
    two_step_direct,
};
use mlp_core::{
    builtin, choose_n, derive_stream, estimate, kp_constant, phi, predicted_cost, ComplexityQuery, MlpError, MlpParams,
    StreamKey,
};
use num_complex::Complex64;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn stream_replays(seed in any::<u64>(), path in prop::collection::vec(any::<i64>(), 0..6)) {
        let mut a = derive_stream(seed, &path);
        let mut b = derive_stream(seed, &path);
        for _ in 0..16 {
            let u = a.next_uniform();
            prop_assert!((0.0..1.0).contains(&u));
            prop_assert_eq!(u.to_bits(), b.next_uniform().to_bits());
        }
        prop_assert_eq!(a.next_gaussian_vector(3).unwrap(), b.next_gaussian_vector(3).unwrap());
        prop_assert_eq!(a.draws(), 19);
    }

    #[test]
    fn phi_doubling_and_growth(m in 1u64..5_000_000) {
        let a = phi(m).unwrap();
        let b = phi(m + 1).unwrap();
        prop_assert!(a <= b && b <= 2 * a);
        prop_assert!(a <= m);
        let ceiling = ((m as f64).ln().sqrt()).exp();
        prop_assert!(a as f64 <= ceiling * (1.0 + 1e-12));
    }

    #[test]
    fn choose_n_monotone_in_tolerance(l in 0.005f64..0.3, e1 in 1e-3f64..1.0, ratio in 1.0f64..50.0) {
        let query = |eps: f64| ComplexityQuery {
            d: 5,
            eps,
            delta: 0.1,
            lp: kp_constant(2.0).unwrap(),
            lipschitz: l,
            growth_p: 0.0,
            growth_q: 0.0,
            horizon: 1.0,
        };
        let loose = choose_n(&query(e1 * ratio));
        let tight = choose_n(&query(e1));
        match (loose, tight) {
            (Ok(a), Ok(b)) => prop_assert!(a <= b),
            (Ok(_), Err(MlpError::SelectorCap { .. })) | (Err(MlpError::SelectorCap { .. }), Err(MlpError::SelectorCap { .. })) => {}
            other => prop_assert!(false, "unexpected {:?}", other),
        }
    }

    #[test]
    fn two_step_closed_form_agrees(
        b1 in (-1.5f64..1.5, -1.5f64..1.5),
        b2 in (-1.5f64..1.5, -1.5f64..1.5),
        raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..25),
    ) {
        let b1 = Complex64::new(b1.0, b1.1);
        let b2 = Complex64::new(b2.0, b2.1);
        prop_assume!((b1 * b1 + 4.0 * b2).norm() > 0.1);
        let alphas: Vec<Complex64> = raw.iter().map(|&(r, i)| Complex64::new(r, i)).collect();
        let k = alphas.len() - 1;
        let c = two_step_closed_form(b1, b2, &alphas, k).unwrap();
        let d = two_step_direct(b1, b2, &alphas, k).unwrap();
        prop_assert!((c - d).norm() <= 1e-8 * c.norm().max(d.norm()).max(1e-300), "{} vs {}", c, d);
    }

    #[test]
    fn corrected_full_history_bound_dominates(gamma in 0u8..2, beta in 1.0f64..3.0, a0 in 0.0f64..4.0, a1 in 0.0f64..4.0) {
        let xs = full_history_equality_case(gamma, beta, a0, a1, 20).unwrap();
        for (k, x) in xs.iter().enumerate() {
            prop_assert!(*x <= full_history_corrected_bound(gamma, beta, a0, a1, k as u32).unwrap() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn predicted_cost_within_recursion(n in 0u32..7, base in 1u64..5, d in 1usize..9) {
        let c = predicted_cost(n, base, d).unwrap();
        let b = cost_recursion_bound(n, base, (d + 2) as f64).unwrap();
        prop_assert!((c.total() as f64) <= b.recursion);
        prop_assert!(b.recursion <= b.closed * (1.0 + 1e-12));
    }

    #[test]
    fn datum_scaling_by_powers_of_two(j in -8i32..8, seed in any::<u64>(), n in 1u32..4) {
        let p = builtin("heat-quadratic", 3, 1.0).unwrap();
        let mut q = p.clone();
        let lambda = 2f64.powi(j);
        let g = p.g.clone();
        q.g = Arc::new(move |x| lambda * g(x));
        let key = StreamKey::root(seed);
        let x = [0.25, -0.5, 1.0];
        let a = estimate(&p, &MlpParams::raw(n, 2), 0.2, &x, &key).unwrap();
        let b = estimate(&q, &MlpParams::raw(n, 2), 0.2, &x, &key).unwrap();
        prop_assert_eq!((lambda * a.value).to_bits(), b.value.to_bits());
    }

    #[test]
    fn constant_source_is_exact(d in 1usize..12, n in 1u32..4, t in 0.0f64..1.0, seed in any::<u64>()) {
        let p = builtin("constant-source", d, 1.0).unwrap();
        let x = vec![0.3; d];
        let r = estimate(&p, &MlpParams::scheduled(n, 3), t, &x, &StreamKey::root(seed)).unwrap();
        prop_assert!((r.value - (1.0 - t)).abs() <= 1e-12);
    }

    #[test]
    fn ledger_matches_prediction(n in 0u32..4, base in 1u64..4, d in 1usize..6, seed in any::<u64>()) {
        let p = builtin("linear-reaction", d, 1.0).unwrap();
        let r = estimate(&p, &MlpParams::raw(n, base), 0.0, &vec![0.0; d], &StreamKey::root(seed)).unwrap();
        prop_assert_eq!(r.ledger, predicted_cost(n, base, d).unwrap());
    }
}
