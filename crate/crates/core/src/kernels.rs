//! Crossover kernels: the REX sampler and its Gaussian density, and the
//! spherical Gaussian kernel used by the fixed and BMP baselines.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::points::PointSet;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Kernel construction set: the `m` parent points that define one kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct Kcs {
    dim: usize,
    points: Vec<f64>,
}

impl Kcs {
    pub fn new(dim: usize, points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyKcs);
        }
        if dim == 0 || !points.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: points.len() % dim.max(1),
            });
        }
        Ok(Self { dim, points })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let set = PointSet::from_rows(rows).map_err(|_| Error::EmptyKcs)?;
        Self::new(set.dim(), set.into_flat())
    }

    /// Gathers rows `ids` of `x` in order.
    pub fn gather(x: &PointSet, ids: &[usize]) -> Result<Self> {
        Self::new(x.dim(), x.select(ids).into_flat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn size(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.points.chunks_exact(self.dim)
    }
}

/// Maximum-likelihood mean and covariance (`1/m` normalizer) of a KCS.
#[derive(Debug, Clone, PartialEq)]
pub struct KcsStats {
    pub mu: Vec<f64>,
    pub sigma: DMatrix<f64>,
}

pub fn kcs_stats(kcs: &Kcs) -> KcsStats {
    let d = kcs.dim();
    let m = kcs.size() as f64;
    let mut mu = vec![0.0; d];
    for p in kcs.points() {
        for (a, x) in mu.iter_mut().zip(p) {
            *a += x;
        }
    }
    mu.iter_mut().for_each(|a| *a /= m);
    let mut sigma = DMatrix::zeros(d, d);
    for p in kcs.points() {
        let c = DVector::from_iterator(d, p.iter().zip(&mu).map(|(x, u)| x - u));
        sigma.ger(1.0 / m, &c, &c, 1.0);
    }
    KcsStats { mu, sigma }
}

/// Draws one REX child `y = mu + sum_i eps_i (x_i - mu)` with `eps_i ~ N(0, 1/m)`.
///
/// Consumes exactly `m` standard normal draws, in KCS order, and never forms
/// the covariance matrix: cost is `O(m d)`.
pub fn rex_sample<R: Rng + ?Sized>(kcs: &Kcs, rng: &mut R) -> Vec<f64> {
    let mut out = vec![0.0; kcs.dim()];
    let rows: Vec<&[f64]> = kcs.points().collect();
    rex_sample_into(&rows, rng, &mut out);
    out
}

/// Allocation-free REX draw over borrowed parent rows; `out` receives the child.
pub(crate) fn rex_sample_into<R: Rng + ?Sized>(parents: &[&[f64]], rng: &mut R, out: &mut [f64]) {
    let m = parents.len();
    let inv_m = 1.0 / m as f64;
    let scale = inv_m.sqrt();
    out.iter_mut().for_each(|o| *o = 0.0);
    for p in parents {
        for (o, x) in out.iter_mut().zip(p.iter()) {
            *o += x;
        }
    }
    out.iter_mut().for_each(|o| *o *= inv_m);
    if m == 1 {
        // x_1 - mu is identically zero; still consume the draw.
        let _: f64 = rng.sample(StandardNormal);
        out.copy_from_slice(parents[0]);
        return;
    }
    // out currently holds mu; accumulate deviations into a separate pass so
    // mu is not disturbed while it is still needed.
    let d = out.len();
    let mut acc = [0.0f64; 32];
    let mut heap;
    let acc: &mut [f64] = if d <= acc.len() {
        &mut acc[..d]
    } else {
        heap = vec![0.0; d];
        &mut heap
    };
    for p in parents {
        let eps: f64 = rng.sample::<f64, _>(StandardNormal) * scale;
        for j in 0..d {
            acc[j] += eps * (p[j] - out[j]);
        }
    }
    for j in 0..d {
        out[j] += acc[j];
    }
}

/// Gaussian log-density with a precomputed Cholesky factor.
#[derive(Debug, Clone)]
pub struct GaussianLogPdf {
    mu: Vec<f64>,
    chol: Cholesky<f64, Dyn>,
    log_norm: f64,
}

impl GaussianLogPdf {
    pub fn new(mu: Vec<f64>, cov: DMatrix<f64>) -> Option<Self> {
        let d = mu.len();
        let chol = Cholesky::new(cov)?;
        let l = chol.l_dirty();
        let mut log_det = 0.0;
        for i in 0..d {
            let v = l[(i, i)];
            if !(v > 0.0) || !v.is_finite() {
                return None;
            }
            log_det += 2.0 * v.ln();
        }
        Some(Self {
            mu,
            chol,
            log_norm: -0.5 * (d as f64 * LN_2PI + log_det),
        })
    }

    pub fn ln_pdf(&self, y: &[f64]) -> f64 {
        let d = self.mu.len();
        // Forward substitution L z = (y - mu); quadratic form is |z|^2.
        let l = self.chol.l_dirty();
        let mut z = vec![0.0; d];
        let mut q = 0.0;
        for i in 0..d {
            let mut s = y[i] - self.mu[i];
            for j in 0..i {
                s -= l[(i, j)] * z[j];
            }
            z[i] = s / l[(i, i)];
            q += z[i] * z[i];
        }
        self.log_norm - 0.5 * q
    }
}

/// Builds the REX kernel's density `N(mu, Sigma + ridge I)`.
pub fn rex_log_density_fn(kcs: &Kcs, ridge: f64) -> Result<GaussianLogPdf> {
    let KcsStats { mu, mut sigma } = kcs_stats(kcs);
    for i in 0..kcs.dim() {
        sigma[(i, i)] += ridge;
    }
    GaussianLogPdf::new(mu, sigma).ok_or(Error::SingularSigma { ridge })
}

/// Density of the REX kernel at `y`.
pub fn rex_density(y: &[f64], kcs: &Kcs, ridge: f64) -> Result<f64> {
    if y.len() != kcs.dim() {
        return Err(Error::DimensionMismatch {
            expected: kcs.dim(),
            got: y.len(),
        });
    }
    Ok(rex_log_density_fn(kcs, ridge)?.ln_pdf(y).exp())
}

/// `center + h z` with `z` standard normal; consumes `d` draws.
pub fn gaussian_sample<R: Rng + ?Sized>(center: &[f64], h: f64, rng: &mut R) -> Vec<f64> {
    let mut out = vec![0.0; center.len()];
    gaussian_sample_into(center, h, rng, &mut out);
    out
}

pub(crate) fn gaussian_sample_into<R: Rng + ?Sized>(
    center: &[f64],
    h: f64,
    rng: &mut R,
    out: &mut [f64],
) {
    for (o, c) in out.iter_mut().zip(center) {
        let z: f64 = rng.sample(StandardNormal);
        *o = c + h * z;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn diamond() -> Kcs {
        Kcs::from_rows(&[[-1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]).unwrap()
    }

    #[test]
    fn stats_of_diamond() {
        let s = kcs_stats(&diamond());
        assert_eq!(s.mu, vec![0.0, 0.0]);
        assert_eq!(
            s.sigma,
            DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5])
        );
    }

    #[test]
    fn stats_of_degenerate_sets() {
        let one = Kcs::from_rows(&[[3.0, -2.0]]).unwrap();
        let s = kcs_stats(&one);
        assert_eq!(s.mu, vec![3.0, -2.0]);
        assert_eq!(s.sigma, DMatrix::zeros(2, 2));
        let twin = Kcs::from_rows(&[[0.5, 0.25], [0.5, 0.25]]).unwrap();
        assert_eq!(kcs_stats(&twin).sigma, DMatrix::zeros(2, 2));
    }

    #[test]
    fn empty_kcs_rejected() {
        assert!(matches!(Kcs::new(2, vec![]), Err(Error::EmptyKcs)));
    }

    #[test]
    fn single_parent_is_copied() {
        let kcs = Kcs::from_rows(&[[0.1, 0.7, -3.3]]).unwrap();
        let mut rng = seeded(1);
        for _ in 0..10 {
            assert_eq!(rex_sample(&kcs, &mut rng), vec![0.1, 0.7, -3.3]);
        }
    }

    #[test]
    fn identical_parents_give_that_point() {
        let kcs = Kcs::from_rows(&[[0.1, 0.7], [0.1, 0.7], [0.1, 0.7]]).unwrap();
        let mut rng = seeded(2);
        for _ in 0..10 {
            let y = rex_sample(&kcs, &mut rng);
            assert!((y[0] - 0.1).abs() < 1e-15 && (y[1] - 0.7).abs() < 1e-15);
        }
    }

    #[test]
    fn sampler_consumes_m_draws() {
        let kcs = diamond();
        let mut a = seeded(5);
        let mut b = seeded(5);
        rex_sample(&kcs, &mut a);
        for _ in 0..4 {
            let _: f64 = b.sample(StandardNormal);
        }
        assert_eq!(a.random::<u64>(), b.random::<u64>());
    }

    #[test]
    fn diamond_moments_monte_carlo() {
        let kcs = diamond();
        let mut rng = seeded(11);
        let n = 1_000_000;
        let (mut s0, mut s1, mut s00, mut s01, mut s11) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let y = rex_sample(&kcs, &mut rng);
            s0 += y[0];
            s1 += y[1];
            s00 += y[0] * y[0];
            s01 += y[0] * y[1];
            s11 += y[1] * y[1];
        }
        let n = n as f64;
        let (m0, m1) = (s0 / n, s1 / n);
        assert!(m0.abs() < 0.005 && m1.abs() < 0.005);
        assert!((s00 / n - m0 * m0 - 0.5).abs() < 0.01);
        assert!((s11 / n - m1 * m1 - 0.5).abs() < 0.01);
        assert!((s01 / n - m0 * m1).abs() < 0.01);
    }

    #[test]
    fn diamond_density_at_mean() {
        let p = rex_density(&[0.0, 0.0], &diamond(), 0.0).unwrap();
        assert!((p - std::f64::consts::FRAC_1_PI).abs() < 1e-12);
    }

    #[test]
    fn density_is_centrally_symmetric() {
        let kcs = Kcs::from_rows(&[[-1.0, 0.3], [1.0, 0.1], [0.2, 1.0], [-0.2, -1.4]]).unwrap();
        let mu = kcs_stats(&kcs).mu;
        for (a, b) in [(0.3, -0.2), (1.5, 0.7), (-2.0, 0.1)] {
            let p = rex_density(&[mu[0] + a, mu[1] + b], &kcs, 0.0).unwrap();
            let q = rex_density(&[mu[0] - a, mu[1] - b], &kcs, 0.0).unwrap();
            assert!((p - q).abs() < 1e-14 * p.max(1e-300));
        }
    }

    #[test]
    fn rank_deficient_kcs_is_singular() {
        let kcs = Kcs::from_rows(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        assert!(matches!(
            rex_density(&[0.0, 0.0], &kcs, 0.0),
            Err(Error::SingularSigma { .. })
        ));
        assert!(rex_density(&[0.0, 0.0], &kcs, 1e-3).is_ok());
    }

    #[test]
    fn density_integrates_to_one() {
        // Midpoint rule over +-6 sigma along the principal axes' bounding box.
        let kcs = Kcs::from_rows(&[[-1.0, 0.3], [1.0, 0.1], [0.2, 1.0], [-0.2, -1.4]]).unwrap();
        let s = kcs_stats(&kcs);
        let sd0 = s.sigma[(0, 0)].sqrt();
        let sd1 = s.sigma[(1, 1)].sqrt();
        let pdf = rex_log_density_fn(&kcs, 0.0).unwrap();
        let steps = 600;
        let (h0, h1) = (12.0 * sd0 / steps as f64, 12.0 * sd1 / steps as f64);
        let mut total = 0.0;
        for i in 0..steps {
            for j in 0..steps {
                let y = [
                    s.mu[0] - 6.0 * sd0 + (i as f64 + 0.5) * h0,
                    s.mu[1] - 6.0 * sd1 + (j as f64 + 0.5) * h1,
                ];
                total += pdf.ln_pdf(&y).exp();
            }
        }
        total *= h0 * h1;
        assert!((total - 1.0).abs() < 1e-3, "{total}");

        let line = Kcs::from_rows(&[[0.0], [1.0], [3.0]]).unwrap();
        let s = kcs_stats(&line);
        let sd = s.sigma[(0, 0)].sqrt();
        let steps = 4000;
        let h = 12.0 * sd / steps as f64;
        let total: f64 = (0..steps)
            .map(|i| {
                let y = s.mu[0] - 6.0 * sd + (i as f64 + 0.5) * h;
                rex_density(&[y], &line, 0.0).unwrap() * h
            })
            .sum();
        assert!((total - 1.0).abs() < 1e-3, "{total}");
    }

    #[test]
    fn gaussian_zero_bandwidth_and_shape() {
        let mut rng = seeded(3);
        assert_eq!(
            gaussian_sample(&[1.0, 2.0, 3.0], 0.0, &mut rng),
            vec![1.0, 2.0, 3.0]
        );
        assert_eq!(gaussian_sample(&[0.0; 7], 1.0, &mut rng).len(), 7);
    }

    #[test]
    fn gaussian_variance_monte_carlo() {
        let mut rng = seeded(4);
        let n = 1_000_000;
        let (mut s, mut ss) = (0.0, 0.0);
        for _ in 0..n {
            let y = gaussian_sample(&[0.0], 2.0, &mut rng)[0];
            s += y;
            ss += y * y;
        }
        let mean = s / n as f64;
        let var = ss / n as f64 - mean * mean;
        assert!((var - 4.0).abs() < 0.04, "{var}");
    }

    #[test]
    fn reproducible_under_seed() {
        let kcs = diamond();
        let a: Vec<Vec<f64>> = {
            let mut r = seeded(9);
            (0..5).map(|_| rex_sample(&kcs, &mut r)).collect()
        };
        let b: Vec<Vec<f64>> = {
            let mut r = seeded(9);
            (0..5).map(|_| rex_sample(&kcs, &mut r)).collect()
        };
        assert_eq!(a, b);
    }
}
