//! Synthetic benchmark datasets.

use std::f64::consts::{PI, TAU};

use nalgebra::{Cholesky, DMatrix};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::points::PointSet;

/// Classical Swiss Roll: `(t cos t, u, t sin t)` with `t ~ U[1.5 pi, 4.5 pi]`
/// and `u ~ U[0, 21]`.
pub fn gen_swiss_roll<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<PointSet> {
    if n == 0 {
        return Err(Error::BadParams("n must be at least 1".into()));
    }
    let mut flat = Vec::with_capacity(3 * n);
    for _ in 0..n {
        let t = rng.random_range(1.5 * PI..=4.5 * PI);
        let u = rng.random_range(0.0..=21.0);
        flat.extend_from_slice(&[t * t.cos(), u, t * t.sin()]);
    }
    PointSet::from_flat(3, flat)?.with_names(vec!["x".into(), "y".into(), "z".into()])
}

/// Ring in the plane: radius `N(1, 0.1)`, angle uniform.
pub fn gen_ring<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<PointSet> {
    gen_ring_with(n, 1.0, 0.1, rng)
}

pub fn gen_ring_with<R: Rng + ?Sized>(
    n: usize,
    radius: f64,
    radial_sd: f64,
    rng: &mut R,
) -> Result<PointSet> {
    if n == 0 {
        return Err(Error::BadParams("n must be at least 1".into()));
    }
    let radial = Normal::new(radius, radial_sd).map_err(|e| Error::BadParams(e.to_string()))?;
    let mut flat = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let r = radial.sample(rng);
        let a = rng.random_range(0.0..TAU);
        flat.extend_from_slice(&[r * a.cos(), r * a.sin()]);
    }
    PointSet::from_flat(2, flat)
}

/// Gaussian mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmSpec {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    /// Row-major `d x d` covariance per component.
    pub covs: Vec<Vec<f64>>,
}

impl GmmSpec {
    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    fn factors(&self) -> Result<Vec<DMatrix<f64>>> {
        let d = self.dim();
        let c = self.weights.len();
        if c == 0 || d == 0 || self.means.len() != c || self.covs.len() != c {
            return Err(Error::BadSpec("component counts disagree".into()));
        }
        if self.weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::BadSpec("weights must be non-negative".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::BadSpec(format!("weights sum to {total}, not 1")));
        }
        self.means
            .iter()
            .zip(&self.covs)
            .map(|(mu, cov)| {
                if mu.len() != d || cov.len() != d * d {
                    return Err(Error::BadSpec("component dimension mismatch".into()));
                }
                let m = DMatrix::from_row_slice(d, d, cov);
                if (&m - m.transpose()).amax() > 1e-12 {
                    return Err(Error::BadSpec("covariance is not symmetric".into()));
                }
                Cholesky::new(m)
                    .map(|c| c.l())
                    .ok_or_else(|| Error::BadSpec("covariance is not positive definite".into()))
            })
            .collect()
    }
}

/// First component whose cumulative weight exceeds `u`; rounding shortfall
/// falls to the last component with positive weight.
fn pick_component(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (c, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc && w > 0.0 {
            return c;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Mixture draws together with the component index of each draw.
pub fn gen_gmm_labeled<R: Rng + ?Sized>(
    spec: &GmmSpec,
    n: usize,
    rng: &mut R,
) -> Result<(PointSet, Vec<usize>)> {
    let factors = spec.factors()?;
    let d = spec.dim();
    let mut flat = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    let mut z = vec![0.0; d];
    for _ in 0..n {
        let u: f64 = rng.random();
        let c = pick_component(&spec.weights, u);
        z.iter_mut().for_each(|v| *v = StandardNormal.sample(rng));
        let l = &factors[c];
        for i in 0..d {
            let mut v = spec.means[c][i];
            for j in 0..=i {
                v += l[(i, j)] * z[j];
            }
            flat.push(v);
        }
        labels.push(c);
    }
    Ok((PointSet::from_flat(d, flat)?, labels))
}

pub fn gen_gmm<R: Rng + ?Sized>(spec: &GmmSpec, n: usize, rng: &mut R) -> Result<PointSet> {
    Ok(gen_gmm_labeled(spec, n, rng)?.0)
}

/// Three correlated blobs in three variables, used as a census-like fixture.
pub fn gmm3_fixture() -> GmmSpec {
    GmmSpec {
        weights: vec![0.5, 0.3, 0.2],
        means: vec![
            vec![0.0, 0.0, 0.0],
            vec![3.0, 1.0, -2.0],
            vec![-2.0, 4.0, 1.0],
        ],
        covs: vec![
            vec![1.0, 0.5, 0.2, 0.5, 1.0, 0.3, 0.2, 0.3, 1.0],
            vec![0.6, -0.2, 0.0, -0.2, 0.8, 0.1, 0.0, 0.1, 0.5],
            vec![0.4, 0.0, 0.1, 0.0, 0.9, -0.3, 0.1, -0.3, 0.7],
        ],
    }
}

/// Uniform points in the cube `[0, side]^d`.
pub fn gen_uniform_cube<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    side: f64,
    rng: &mut R,
) -> Result<PointSet> {
    PointSet::from_flat(d, (0..n * d).map(|_| rng.random_range(0.0..side)).collect())
}
