//! Property tests over the public estimator API.

use knnrex::data::{gen_gmm, gen_ring, gmm3_fixture};
use knnrex::estimators::{
    synth_bias_corrected, synthesize_population, CorrectedOptions, EstimatorConfig, MarginalSpec,
};
use knnrex::evaluation::hellinger_union;
use knnrex::preprocess::{whiten_apply, whiten_fit, whiten_invert};
use knnrex::rng::seeded;
use proptest::prelude::*;

fn config(method: u8, k: usize, m: usize, h: f64) -> EstimatorConfig {
    match method {
        0 => EstimatorConfig::knn_rex(k, m.min(k + 1)),
        1 => EstimatorConfig::fixed(h),
        _ => EstimatorConfig::bmp(k, h),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn synthesis_has_shape_and_is_seed_deterministic(
        n in 20usize..120, l in 1usize..400, method in 0u8..3,
        k in 1usize..15, m in 1usize..6, h in 0.0f64..1.0, seed in any::<u64>(),
    ) {
        let x = gen_ring(n, &mut seeded(seed ^ 1)).unwrap();
        let cfg = config(method, k, m, h);
        let a = synthesize_population(&x, &cfg, l, &mut seeded(seed)).unwrap();
        let b = synthesize_population(&x, &cfg, l, &mut seeded(seed)).unwrap();
        prop_assert_eq!(a.len(), l);
        prop_assert_eq!(a.dim(), 2);
        prop_assert!(a.all_finite());
        prop_assert_eq!(a.as_flat(), b.as_flat());
    }

    #[test]
    fn whitening_round_trips(n in 5usize..80, seed in any::<u64>()) {
        let x = gen_gmm(&gmm3_fixture(), n, &mut seeded(seed)).unwrap();
        let t = whiten_fit(&x).unwrap();
        let back = whiten_invert(&t, &whiten_apply(&t, &x).unwrap()).unwrap();
        for (p, q) in x.as_flat().iter().zip(back.as_flat()) {
            prop_assert!((p - q).abs() <= 1e-9 * (1.0 + p.abs()), "{} vs {}", p, q);
        }
    }

    #[test]
    fn hellinger_is_a_bounded_symmetric_distance(
        n in 1usize..200, l in 1usize..200, bins in 1usize..12, seed in any::<u64>(),
    ) {
        let y = gen_ring(n, &mut seeded(seed)).unwrap();
        let z = gen_ring(l, &mut seeded(seed.wrapping_add(1))).unwrap();
        let a = hellinger_union(&y, &z, bins).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert_eq!(a, hellinger_union(&z, &y, bins).unwrap());
        prop_assert_eq!(hellinger_union(&y, &y, bins).unwrap(), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn corrected_synthesis_hits_every_bin_exactly(
        n in 80usize..200, bins in 2usize..6, total in 50u64..400, seed in any::<u64>(),
    ) {
        let x = gen_gmm(&gmm3_fixture(), n, &mut seeded(seed)).unwrap();
        let spec = MarginalSpec::from_reference(&x, bins, total).unwrap();
        let opts = CorrectedOptions { k: 10, m: 3, ..CorrectedOptions::default() };
        let (y, _) = synth_bias_corrected(&x, &spec, &opts, &mut seeded(seed ^ 7)).unwrap();
        prop_assert_eq!(y.len() as u64, total);
        let hist = spec.histogram(&y);
        for (v, h) in spec.vars.iter().zip(&hist) {
            prop_assert_eq!(&v.freqs, h);
        }
    }
}
