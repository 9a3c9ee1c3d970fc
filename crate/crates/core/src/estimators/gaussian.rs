//! Sample-point Gaussian kernel estimators with spherical bandwidth: fixed
//! `h`, and the BMP variable bandwidth `h * delta_ik`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::kernels::gaussian_sample_into;
use crate::knn::{build_knn, KnnIndex};
use crate::points::PointSet;

fn check_h(h: f64) -> Result<()> {
    if !(h >= 0.0) || !h.is_finite() {
        return Err(Error::BadParams(format!(
            "bandwidth h = {h} must be finite and >= 0"
        )));
    }
    Ok(())
}

fn resample<R: Rng + ?Sized>(
    x: &PointSet,
    l: usize,
    rng: &mut R,
    bandwidth: impl Fn(usize) -> f64,
) -> PointSet {
    let d = x.dim();
    let mut out = vec![0.0; l * d];
    for y in out.chunks_exact_mut(d) {
        let i = rng.random_range(0..x.len());
        gaussian_sample_into(x.row(i), bandwidth(i), rng, y);
    }
    PointSet::from_flat(d, out).expect("dimension is positive")
}

pub fn synth_fixed_gaussian<R: Rng + ?Sized>(
    x: &PointSet,
    h: f64,
    l: usize,
    rng: &mut R,
) -> Result<PointSet> {
    check_h(h)?;
    if x.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(resample(x, l, rng, |_| h))
}

/// Per-point BMP bandwidths `h * delta_ik`.
pub fn bmp_bandwidths(index: &KnnIndex, h: f64) -> Vec<f64> {
    (0..index.len())
        .map(|i| h * index.distances(i)[index.k() - 1])
        .collect()
}

pub fn synth_bmp<R: Rng + ?Sized>(
    x: &PointSet,
    k: usize,
    h: f64,
    l: usize,
    rng: &mut R,
) -> Result<PointSet> {
    check_h(h)?;
    if x.is_empty() {
        return Err(Error::EmptySample);
    }
    let index = build_knn(x, k)?;
    synth_bmp_with_index(x, &index, h, l, rng)
}

pub fn synth_bmp_with_index<R: Rng + ?Sized>(
    x: &PointSet,
    index: &KnnIndex,
    h: f64,
    l: usize,
    rng: &mut R,
) -> Result<PointSet> {
    check_h(h)?;
    let bw = bmp_bandwidths(index, h);
    Ok(resample(x, l, rng, |i| bw[i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn zero_bandwidth_is_bootstrap() {
        let x = PointSet::from_rows(&[[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]]).unwrap();
        let y = synth_fixed_gaussian(&x, 0.0, 50, &mut seeded(1)).unwrap();
        assert!(y.rows().all(|r| x.rows().any(|s| s == r)));
        let y = synth_bmp(&x, 1, 0.0, 50, &mut seeded(1)).unwrap();
        assert!(y.rows().all(|r| x.rows().any(|s| s == r)));
    }

    #[test]
    fn contract_and_errors() {
        let x = PointSet::from_rows(&[[0.0], [1.0]]).unwrap();
        assert_eq!(
            synth_fixed_gaussian(&x, 0.3, 5, &mut seeded(2))
                .unwrap()
                .len(),
            5
        );
        assert!(matches!(
            synth_fixed_gaussian(&x, -1.0, 5, &mut seeded(2)),
            Err(Error::BadParams(_))
        ));
        assert!(matches!(
            synth_fixed_gaussian(&PointSet::new(1), 1.0, 5, &mut seeded(2)),
            Err(Error::EmptySample)
        ));
        assert!(matches!(
            synth_bmp(&x, 2, 1.0, 5, &mut seeded(2)),
            Err(Error::KTooLarge { .. })
        ));
    }

    #[test]
    fn fixed_moments_single_point() {
        let x = PointSet::from_rows(&[[0.0]]).unwrap();
        let y = synth_fixed_gaussian(&x, 1.0, 1_000_000, &mut seeded(3)).unwrap();
        let mean = y.mean()[0];
        let var = y.covariance()[0];
        assert!(mean.abs() < 0.01);
        assert!((var - 1.0).abs() < 0.01, "{var}");
    }

    #[test]
    fn bmp_bandwidth_is_scaled_kth_distance() {
        let x = PointSet::from_flat(1, vec![0.0, 1.0, 3.0, 7.0]).unwrap();
        let idx = build_knn(&x, 2).unwrap();
        let bw = bmp_bandwidths(&idx, 0.5);
        assert_eq!(bw[0], 1.5);
    }

    #[test]
    fn bmp_duplicate_point_has_zero_bandwidth() {
        let x = PointSet::from_flat(1, vec![2.0, 2.0, 10.0, 20.0]).unwrap();
        let idx = build_knn(&x, 1).unwrap();
        let bw = bmp_bandwidths(&idx, 3.0);
        assert_eq!(&bw[..2], &[0.0, 0.0]);
        let y = synth_bmp_with_index(&x, &idx, 3.0, 400, &mut seeded(4)).unwrap();
        // Seeds at the duplicate reproduce it exactly.
        assert!(y.rows().filter(|r| r[0] == 2.0).count() > 100);
    }
}
