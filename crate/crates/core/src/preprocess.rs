//! Whitening: an affine map to zero mean and identity covariance, and its inverse.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::points::PointSet;

/// Relative eigenvalue floor below which the covariance is treated as singular.
const SINGULAR_RATIO: f64 = 1e-12;

/// `forward * (x - mean)` maps original units to whitened units;
/// `inverse * y + mean` maps back.
#[derive(Debug, Clone, PartialEq)]
pub struct WhitenTransform {
    pub mean: Vec<f64>,
    pub forward: DMatrix<f64>,
    pub inverse: DMatrix<f64>,
}

impl WhitenTransform {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            forward: DMatrix::identity(dim, dim),
            inverse: DMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Maps a single point into whitened units.
    pub fn apply_point(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for (i, o) in out.iter_mut().enumerate().take(d) {
            let mut acc = 0.0;
            for j in 0..d {
                acc += self.forward[(i, j)] * (x[j] - self.mean[j]);
            }
            *o = acc;
        }
    }

    /// Maps a single whitened point back into original units.
    pub fn invert_point(&self, y: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for (i, o) in out.iter_mut().enumerate().take(d) {
            let mut acc = self.mean[i];
            for j in 0..d {
                acc += self.inverse[(i, j)] * y[j];
            }
            *o = acc;
        }
    }
}

/// Fits the whitening transform to `x` from the symmetric eigendecomposition
/// of its `1/n` covariance: `forward = L^{-1/2} Q^T`, `inverse = Q L^{1/2}`.
pub fn whiten_fit(x: &PointSet) -> Result<WhitenTransform> {
    let d = x.dim();
    let n = x.len();
    if n < d + 1 {
        return Err(Error::TooFewPoints {
            needed: d + 1,
            got: n,
        });
    }
    let mean = x.mean();
    let cov = DMatrix::from_row_slice(d, d, &x.covariance());
    let eig = SymmetricEigen::new(cov);
    let max_eig = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let min_eig = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if !(max_eig > 0.0) || min_eig <= SINGULAR_RATIO * max_eig {
        return Err(Error::SingularCovariance { min_eig, max_eig });
    }

    // Sign convention: largest-magnitude entry of each eigenvector is positive.
    let mut q = eig.eigenvectors;
    for mut col in q.column_iter_mut() {
        let pivot = col
            .iter()
            .cloned()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(1.0);
        if pivot < 0.0 {
            col.neg_mut();
        }
    }

    let mut forward = q.transpose();
    let mut inverse = q;
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let s = lambda.sqrt();
        forward.row_mut(k).scale_mut(1.0 / s);
        inverse.column_mut(k).scale_mut(s);
    }
    Ok(WhitenTransform {
        mean,
        forward,
        inverse,
    })
}

pub fn whiten_apply(t: &WhitenTransform, x: &PointSet) -> Result<PointSet> {
    map_rows(t, x, WhitenTransform::apply_point)
}

pub fn whiten_invert(t: &WhitenTransform, y: &PointSet) -> Result<PointSet> {
    map_rows(t, y, WhitenTransform::invert_point)
}

fn map_rows(
    t: &WhitenTransform,
    x: &PointSet,
    f: fn(&WhitenTransform, &[f64], &mut [f64]),
) -> Result<PointSet> {
    if x.dim() != t.dim() {
        return Err(Error::DimensionMismatch {
            expected: t.dim(),
            got: x.dim(),
        });
    }
    let d = t.dim();
    let mut out = vec![0.0; x.len() * d];
    for (row, dst) in x.rows().zip(out.chunks_exact_mut(d)) {
        f(t, row, dst);
    }
    let mut set = PointSet::from_flat(d, out)?;
    set.set_names(x.names().map(|n| n.to_vec()));
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng;

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    fn identity_flat(d: usize) -> Vec<f64> {
        let mut v = vec![0.0; d * d];
        for i in 0..d {
            v[i * d + i] = 1.0;
        }
        v
    }

    #[test]
    fn square_corners() {
        let x = PointSet::from_rows(&[[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [2.0, 2.0]]).unwrap();
        let t = whiten_fit(&x).unwrap();
        assert!(max_abs_diff(&t.mean, &[1.0, 1.0]) < 1e-12);
        let w = whiten_apply(&t, &x).unwrap();
        assert!(w.mean().iter().all(|m| m.abs() < 1e-12));
        assert!(max_abs_diff(&w.covariance(), &identity_flat(2)) < 1e-9);
    }

    #[test]
    fn already_white_data_is_fixed_point() {
        let x = PointSet::from_rows(&[[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]).unwrap();
        // Covariance diag(0.5, 0.5); rescale to identity.
        let s = 2f64.sqrt();
        let x = PointSet::from_flat(2, x.as_flat().iter().map(|v| v * s).collect()).unwrap();
        let t = whiten_fit(&x).unwrap();
        assert!(t.mean.iter().all(|m| m.abs() < 1e-12));
        let fwd: Vec<f64> = t.forward.transpose().iter().cloned().collect();
        assert!(max_abs_diff(&fwd, &identity_flat(2)) < 1e-9);
    }

    #[test]
    fn constant_column_is_singular() {
        let x = PointSet::from_rows(&[[1.0, 3.0], [2.0, 3.0], [5.0, 3.0], [4.0, 3.0]]).unwrap();
        assert!(matches!(
            whiten_fit(&x),
            Err(Error::SingularCovariance { .. })
        ));
    }

    #[test]
    fn collinear_columns_are_singular() {
        let x = PointSet::from_rows(&[[1.0, 2.0], [2.0, 4.0], [3.0, 6.0], [5.0, 10.0]]).unwrap();
        assert!(matches!(
            whiten_fit(&x),
            Err(Error::SingularCovariance { .. })
        ));
    }

    #[test]
    fn too_few_points() {
        let x = PointSet::from_rows(&[[1.0, 2.0], [2.0, 5.0]]).unwrap();
        assert!(matches!(
            whiten_fit(&x),
            Err(Error::TooFewPoints { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn identity_transform_is_noop_and_mean_maps_to_zero() {
        let x = PointSet::from_rows(&[[1.5, -2.0], [3.0, 4.0]]).unwrap();
        let id = WhitenTransform::identity(2);
        assert_eq!(whiten_apply(&id, &x).unwrap(), x);
        assert_eq!(whiten_invert(&id, &x).unwrap(), x);

        let data = PointSet::from_rows(&[[0.0, 1.0], [2.0, 0.0], [1.0, 3.0], [5.0, 2.0]]).unwrap();
        let t = whiten_fit(&data).unwrap();
        let at_mean = PointSet::from_rows(std::slice::from_ref(&t.mean)).unwrap();
        let z = whiten_apply(&t, &at_mean).unwrap();
        assert!(z.row(0).iter().all(|v| v.abs() < 1e-12));
        let back = whiten_invert(&t, &PointSet::from_rows(&[[0.0, 0.0]]).unwrap()).unwrap();
        assert!(max_abs_diff(back.row(0), &t.mean) < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let t = WhitenTransform::identity(3);
        let x = PointSet::from_rows(&[[1.0, 2.0]]).unwrap();
        assert!(matches!(
            whiten_apply(&t, &x),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            whiten_invert(&t, &x),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn round_trip_and_whitened_moments(d in 1usize..=32, extra in 1usize..40, seed in any::<u64>()) {
            let n = 2 * d + extra;
            let mut rng = seeded(seed);
            // Correlated data: random linear mix of uniforms plus an offset.
            let mix: Vec<f64> = (0..d * d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut flat = Vec::with_capacity(n * d);
            for _ in 0..n {
                let z: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                for i in 0..d {
                    let mut v = 10.0 * i as f64 + z[i];
                    for j in 0..d {
                        v += 0.5 * mix[i * d + j] * z[j];
                    }
                    flat.push(v);
                }
            }
            let x = PointSet::from_flat(d, flat).unwrap();
            let t = match whiten_fit(&x) {
                Ok(t) => t,
                Err(Error::SingularCovariance { .. }) => return Ok(()),
                Err(e) => panic!("{e}"),
            };
            let prod = &t.forward * &t.inverse;
            let prod: Vec<f64> = prod.iter().cloned().collect();
            prop_assert!(max_abs_diff(&prod, &identity_flat(d)) < 1e-9);

            let w = whiten_apply(&t, &x).unwrap();
            prop_assert!(w.mean().iter().all(|m| m.abs() < 1e-9));
            prop_assert!(max_abs_diff(&w.covariance(), &identity_flat(d)) < 1e-6);

            let back = whiten_invert(&t, &w).unwrap();
            prop_assert!(max_abs_diff(back.as_flat(), x.as_flat()) < 1e-9);
        }
    }
}
