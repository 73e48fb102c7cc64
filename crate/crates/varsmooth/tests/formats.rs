use proptest::prelude::*;

use varsmooth::atomic::{format_series, parse_series, SplineSeries};
use varsmooth::gridfn::{format_gridfn, parse_gridfn, GridFunction};
use varsmooth::seqspace::{format_seqspace, parse_seqspace, SeqSpace};
use varsmooth::splines::SplineFn;
use varsmooth::weights::{format_multiseq, parse_multiseq, MultiSeq};

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6f64..1e6, -1e-6f64..1e-6, Just(0.0)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn grid_function_round_trip(n in 1usize..3, level in 0u32..4, vals in prop::collection::vec(finite(), 64)) {
        let len = 1usize << (n as u32 * level);
        let g = GridFunction::new(n, level, vals.into_iter().cycle().take(len).collect()).unwrap();
        prop_assert_eq!(parse_gridfn(&format_gridfn(&g)).unwrap(), g);
    }

    #[test]
    fn multiseq_round_trip(n in 1usize..3, kmax in 0u32..3, vals in prop::collection::vec(1e-3f64..1e3, 16)) {
        let ms = MultiSeq::from_fn(n, 2.0, kmax, |k, m| vals[(k as usize * 7 + m.iter().sum::<i64>() as usize * 3) % vals.len()]).unwrap();
        prop_assert_eq!(parse_multiseq(&format_multiseq(&ms)).unwrap(), ms);
    }

    #[test]
    fn series_round_trip(degree in 0usize..3, top in 0u32..3, vals in prop::collection::vec(finite(), 32)) {
        let mut it = vals.into_iter().cycle();
        let levels = (0..=top).map(|k| SplineFn::from_fn(2, degree, k, |_| it.next().unwrap())).collect();
        let s = SplineSeries::new(levels).unwrap();
        prop_assert_eq!(parse_series(&format_series(&s)).unwrap(), s);
    }

    #[test]
    fn seqspace_round_trip(levels in 1usize..5, size in 1usize..5, vals in prop::collection::vec(1e-3f64..1e3, 32)) {
        let mut it = vals.into_iter().cycle();
        let beta = (0..levels).map(|_| it.next().unwrap()).collect();
        let w = (0..levels).map(|_| (0..size).map(|_| it.next().unwrap()).collect()).collect();
        let sp = SeqSpace::new(2.0, f64::INFINITY, beta, w).unwrap();
        prop_assert_eq!(parse_seqspace(&format_seqspace(&sp)).unwrap(), sp);
    }
}

#[test]
fn malformed_inputs_are_rejected() {
    assert!(parse_gridfn("VSGF1\nn=1 K=2\n1 2 3\n").is_err());
    assert!(parse_gridfn("VSGF2\nn=1 K=0\n1\n").is_err());
    assert!(parse_gridfn("VSGF1\nn=1 K=0\nnan\n").is_err());
    assert!(parse_series("VSSS1\nn=1 degree=1 K=0\n0 0 1\n0 0 2\n").is_err());
    assert!(parse_seqspace("VSQS1\n1 2 2\n1 1.0\n").is_err());
}
