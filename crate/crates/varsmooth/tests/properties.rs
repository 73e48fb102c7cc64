use proptest::prelude::*;

use varsmooth::atomic::SplineSeries;
use varsmooth::gridfn::GridFunction;
use varsmooth::norms::{hardy_check, norm_seq, BesovParams, HardyBranch};
use varsmooth::seqspace::{brute_force_operator_norm, embedding_criterion, seq_norm, EmbeddingOptions, SeqSpace};
use varsmooth::splines::{refine, SplineFn};
use varsmooth::traceext::{besov_extend, besov_trace, PlaneSpec};
use varsmooth::weights::constant_smoothness;

fn coeffs(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len)
}

fn exponent() -> impl Strategy<Value = f64> {
    prop_oneof![Just(1.0), Just(2.0), Just(3.0), Just(f64::INFINITY)]
}

fn space(levels: usize, size: usize) -> impl Strategy<Value = SeqSpace> {
    (exponent(), exponent(), prop::collection::vec(0.1f64..4.0, levels), prop::collection::vec(prop::collection::vec(0.1f64..4.0, size), levels))
        .prop_map(|(p, q, beta, w)| SeqSpace::new(p, q, beta, w).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn refinement_keeps_values(degree in 0usize..4, level in 0u32..3, extra in 1u32..3, seed in coeffs(64), x in 0.0f64..1.0) {
        let mut it = seed.into_iter().cycle();
        let s = SplineFn::from_fn(1, degree, level, |_| it.next().unwrap());
        let fine = refine(&s, level + extra);
        prop_assert!((fine.eval(&[x]) - s.eval(&[x])).abs() <= 1e-12);
    }

    #[test]
    fn partition_of_unity(degree in 0usize..4, level in 0u32..6, x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let s = SplineFn::from_fn(2, degree, level.min(4), |_| 1.0);
        prop_assert!((s.eval(&[x, y]) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn trace_of_extension_is_identity(degree in 1usize..4, top in 0u32..4, seed in coeffs(32)) {
        let mut it = seed.into_iter().cycle();
        let levels = (0..=top).map(|k| SplineFn::from_fn(1, degree, k, |_| it.next().unwrap())).collect();
        let s = SplineSeries::new(levels).unwrap();
        let ps = PlaneSpec::new(2, 1).unwrap();
        let back = besov_trace(&besov_extend(&s, &ps).unwrap(), &ps).unwrap();
        for (a, b) in s.levels.iter().zip(&back.levels) {
            for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn norm_is_homogeneous(vals in coeffs(64), c in -5.0f64..5.0, s in 0.0f64..2.0) {
        let g = GridFunction::new(1, 6, vals).unwrap();
        let bp = BesovParams::new(2, 2.0, 2.0, 2.0).unwrap();
        let ms = constant_smoothness(1, 2.0, s, 4).unwrap();
        let a = norm_seq(&g, &ms, &bp).unwrap().total;
        let b = norm_seq(&g.scale(c), &ms, &bp).unwrap().total;
        prop_assert!((b - c.abs() * a).abs() <= 1e-9 * (1.0 + b));
    }

    #[test]
    fn seq_norm_triangle(sp in space(4, 3), a in prop::collection::vec(coeffs(3), 4), b in prop::collection::vec(coeffs(3), 4)) {
        let sum: Vec<Vec<f64>> = a.iter().zip(&b).map(|(x, y)| x.iter().zip(y).map(|(u, v)| u + v).collect()).collect();
        let (na, nb, ns) = (seq_norm(&a, &sp).unwrap(), seq_norm(&b, &sp).unwrap(), seq_norm(&sum, &sp).unwrap());
        prop_assert!(ns <= (na + nb) * (1.0 + 1e-12));
    }

    #[test]
    fn hardy_bound_holds(a in prop::collection::vec(0.0f64..1.0, 1..30), beta in 0.2f64..2.0, q in exponent(), mu in prop_oneof![Just(0.5), Just(1.0)]) {
        for branch in [HardyBranch::Tail, HardyBranch::Head] {
            let h = hardy_check(&a, q, mu, beta, beta + 1.0, branch).unwrap();
            prop_assert!(h.lhs.is_finite() && h.holds, "{h:?}");
        }
    }

    #[test]
    fn embedding_into_itself(sp in space(6, 4)) {
        let v = embedding_criterion(&sp, &sp, EmbeddingOptions::default()).unwrap();
        prop_assert!(v.continuous);
        prop_assert!((v.value - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn enlarging_target_weights_increases_value(a in space(6, 4), b in space(6, 4), bump in prop::collection::vec(1.0f64..3.0, 6)) {
        prop_assume!(a.same_shape(&b));
        let beta = b.beta.iter().zip(&bump).map(|(x, y)| x * y).collect();
        let bigger = SeqSpace::new(b.p, b.q, beta, b.w.clone()).unwrap();
        let v0 = embedding_criterion(&a, &b, EmbeddingOptions::default()).unwrap().value;
        let v1 = embedding_criterion(&a, &bigger, EmbeddingOptions::default()).unwrap().value;
        prop_assert!(v1 >= v0 * (1.0 - 1e-12));
    }

    #[test]
    fn brute_force_below_criterion(a in space(5, 3), b in space(5, 3), seed in 0u64..100) {
        let v = embedding_criterion(&a, &b, EmbeddingOptions::default()).unwrap();
        prop_assume!(v.value.is_finite());
        let est = brute_force_operator_norm(&a, &b, 8, seed).unwrap();
        prop_assert!(est <= v.value * (1.0 + 1e-9), "{est} > {}", v.value);
    }
}
