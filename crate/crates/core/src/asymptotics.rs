//! Covariance of a density restricted to a small ball.
//!
//! For a continuously differentiable density `f` and the ball `B(x, delta)`,
//! the conditional covariance is approximately
//!
//! ```text
//! delta^2 / (d + 2) I  -  delta^4 / (d + 2)^2  (grad f grad f^T) / f^2 (x)
//! ```
//!
//! The first term is the BMP-like isotropic bandwidth; the rank-one second
//! term shrinks it along the gradient. [`ball_cov_theory`] evaluates the
//! formula and [`ball_cov_mc`] estimates the same matrix by rejection sampling.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::derive;

/// A density known in closed form near a study point.
pub trait DensityModel: Sync {
    fn dim(&self) -> usize;
    fn density(&self, y: &[f64]) -> f64;
    fn gradient(&self, y: &[f64]) -> Vec<f64>;
    /// An upper bound of the density over `B(center, delta)`, used as the
    /// rejection envelope.
    fn bound_on_ball(&self, center: &[f64], delta: f64) -> f64;
}

/// Constant density.
#[derive(Debug, Clone)]
pub struct UniformDensity {
    pub dim: usize,
}

impl DensityModel for UniformDensity {
    fn dim(&self) -> usize {
        self.dim
    }
    fn density(&self, _: &[f64]) -> f64 {
        1.0
    }
    fn gradient(&self, _: &[f64]) -> Vec<f64> {
        vec![0.0; self.dim]
    }
    fn bound_on_ball(&self, _: &[f64], _: f64) -> f64 {
        1.0
    }
}

/// `f(y) = max(0, value + slope . (y - origin))`.
#[derive(Debug, Clone)]
pub struct LinearDensity {
    pub origin: Vec<f64>,
    pub value: f64,
    pub slope: Vec<f64>,
}

impl DensityModel for LinearDensity {
    fn dim(&self) -> usize {
        self.origin.len()
    }
    fn density(&self, y: &[f64]) -> f64 {
        let lin: f64 = self
            .slope
            .iter()
            .zip(y.iter().zip(&self.origin))
            .map(|(s, (a, o))| s * (a - o))
            .sum();
        (self.value + lin).max(0.0)
    }
    fn gradient(&self, y: &[f64]) -> Vec<f64> {
        if self.density(y) > 0.0 {
            self.slope.clone()
        } else {
            vec![0.0; self.dim()]
        }
    }
    fn bound_on_ball(&self, center: &[f64], delta: f64) -> f64 {
        let norm = self.slope.iter().map(|s| s * s).sum::<f64>().sqrt();
        self.density(center) + norm * delta
    }
}

/// Central finite-difference gradient, for checking a model's `gradient`.
pub fn numeric_gradient(model: &dyn DensityModel, x: &[f64], step: f64) -> Vec<f64> {
    (0..x.len())
        .map(|j| {
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[j] += step;
            b[j] -= step;
            (model.density(&a) - model.density(&b)) / (2.0 * step)
        })
        .collect()
}

/// Asymptotic covariance of `f` restricted to `B(x, delta)`.
pub fn ball_cov_theory(model: &dyn DensityModel, x: &[f64], delta: f64) -> Result<DMatrix<f64>> {
    if !(delta > 0.0) {
        return Err(Error::BadParams(format!(
            "delta must be positive, got {delta}"
        )));
    }
    let d = model.dim();
    let f = model.density(x);
    if !(f > 0.0) {
        return Err(Error::ZeroDensity);
    }
    let g = model.gradient(x);
    let dp2 = (d + 2) as f64;
    let mut cov = DMatrix::identity(d, d) * (delta * delta / dp2);
    let c = delta.powi(4) / (dp2 * dp2 * f * f);
    for i in 0..d {
        for j in 0..d {
            cov[(i, j)] -= c * g[i] * g[j];
        }
    }
    Ok(cov)
}

/// Monte-Carlo estimate with per-entry standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct McCovariance {
    pub cov: DMatrix<f64>,
    pub std_err: DMatrix<f64>,
    pub accepted: usize,
    pub proposed: usize,
}

const CHUNK: usize = 1 << 16;
const MIN_ACCEPTANCE: f64 = 1e-4;

/// Raw moment sums of one chunk, relative to the ball center.
#[derive(Clone)]
struct Moments {
    count: usize,
    proposed: usize,
    s1: Vec<f64>,
    s2: Vec<f64>,
    s4: Vec<f64>,
}

impl Moments {
    fn new(d: usize) -> Self {
        Self {
            count: 0,
            proposed: 0,
            s1: vec![0.0; d],
            s2: vec![0.0; d * d],
            s4: vec![0.0; d * d],
        }
    }

    fn merge(&mut self, o: &Moments) {
        self.count += o.count;
        self.proposed += o.proposed;
        for (a, b) in self.s1.iter_mut().zip(&o.s1) {
            *a += b;
        }
        for (a, b) in self.s2.iter_mut().zip(&o.s2) {
            *a += b;
        }
        for (a, b) in self.s4.iter_mut().zip(&o.s4) {
            *a += b;
        }
    }
}

fn sample_chunk(
    model: &dyn DensityModel,
    x: &[f64],
    delta: f64,
    bound: f64,
    target: usize,
    seed: u64,
    chunk: u64,
) -> Result<Moments> {
    let d = x.len();
    let mut rng = derive(seed, chunk);
    let mut m = Moments::new(d);
    let mut u = vec![0.0; d];
    let mut y = vec![0.0; d];
    let d2 = delta * delta;
    while m.count < target {
        m.proposed += 1;
        if m.proposed >= 100_000 && (m.count as f64) < MIN_ACCEPTANCE * m.proposed as f64 {
            return Err(Error::RejectionStall {
                rate: m.count as f64 / m.proposed as f64,
                min: MIN_ACCEPTANCE,
            });
        }
        let mut r2 = 0.0;
        for j in 0..d {
            u[j] = rng.random_range(-delta..delta);
            r2 += u[j] * u[j];
        }
        if r2 > d2 {
            continue;
        }
        for j in 0..d {
            y[j] = x[j] + u[j];
        }
        if rng.random::<f64>() * bound >= model.density(&y) {
            continue;
        }
        m.count += 1;
        for a in 0..d {
            m.s1[a] += u[a];
            for b in 0..d {
                let p = u[a] * u[b];
                m.s2[a * d + b] += p;
                m.s4[a * d + b] += p * p;
            }
        }
    }
    Ok(m)
}

/// Rejection-sampled covariance of `f(y | y in B(x, delta))` (`1/N`
/// normalizer), with standard errors of each entry.
pub fn ball_cov_mc_detailed<R: Rng + ?Sized>(
    model: &dyn DensityModel,
    x: &[f64],
    delta: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<McCovariance> {
    if !(delta > 0.0) {
        return Err(Error::BadParams(format!(
            "delta must be positive, got {delta}"
        )));
    }
    if x.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: x.len(),
        });
    }
    if !(model.density(x) > 0.0) {
        return Err(Error::ZeroDensity);
    }
    if n_samples < 2 {
        return Err(Error::BadParams("need at least two samples".into()));
    }
    let d = x.len();
    let bound = model.bound_on_ball(x, delta);
    let seed: u64 = rng.random();
    let chunks = n_samples.div_ceil(CHUNK);
    let targets: Vec<usize> = (0..chunks)
        .map(|c| CHUNK.min(n_samples - c * CHUNK))
        .collect();

    let run = |c: usize| sample_chunk(model, x, delta, bound, targets[c], seed, c as u64);
    #[cfg(feature = "parallel")]
    let parts: Vec<Result<Moments>> = {
        use rayon::prelude::*;
        (0..chunks).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Result<Moments>> = (0..chunks).map(run).collect();

    let mut total = Moments::new(d);
    for p in parts {
        total.merge(&p?);
    }

    let n = total.count as f64;
    let mean: Vec<f64> = total.s1.iter().map(|s| s / n).collect();
    let mut cov = DMatrix::zeros(d, d);
    let mut se = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            let e2 = total.s2[a * d + b] / n;
            cov[(a, b)] = e2 - mean[a] * mean[b];
            let var_prod = (total.s4[a * d + b] / n - e2 * e2).max(0.0);
            se[(a, b)] = (var_prod / n).sqrt();
        }
    }
    Ok(McCovariance {
        cov,
        std_err: se,
        accepted: total.count,
        proposed: total.proposed,
    })
}

pub fn ball_cov_mc<R: Rng + ?Sized>(
    model: &dyn DensityModel,
    x: &[f64],
    delta: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    Ok(ball_cov_mc_detailed(model, x, delta, n_samples, rng)?.cov)
}

/// Shrinkage along the gradient: `var(perpendicular) - var(along)`, or
/// `delta^2/3 - var` in one dimension. Equals the second term's eigenvalue
/// when the formula holds.
pub fn gradient_shrinkage(cov: &DMatrix<f64>, gradient: &[f64], delta: f64) -> f64 {
    let d = cov.nrows();
    let norm = gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
    let u: Vec<f64> = if norm > 0.0 {
        gradient.iter().map(|g| g / norm).collect()
    } else {
        (0..d).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect()
    };
    let mut along = 0.0;
    for i in 0..d {
        for j in 0..d {
            along += u[i] * cov[(i, j)] * u[j];
        }
    }
    if d == 1 {
        delta * delta / 3.0 - along
    } else {
        (cov.trace() - along) / (d - 1) as f64 - along
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticsRow {
    pub delta: f64,
    pub theory: DMatrix<f64>,
    pub mc: DMatrix<f64>,
    pub std_err: DMatrix<f64>,
    /// Max entrywise `|theory - mc|`.
    pub max_dev: f64,
    /// Max entrywise `|theory - mc| / std_err` (entries with zero error skipped).
    pub max_dev_se: f64,
    pub shrink_theory: f64,
    pub shrink_mc: f64,
    /// `|second term| / |first term|` predicted: `delta^2 |grad f / f|^2 / (d + 2)`.
    pub ratio_theory: f64,
    pub ratio_mc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticsReport {
    pub dim: usize,
    pub point: Vec<f64>,
    pub n_samples: usize,
    pub rows: Vec<AsymptoticsRow>,
}

impl AsymptoticsReport {
    /// Measured shrinkage ratio between consecutive deltas (expect
    /// `(delta_i / delta_{i+1})^4`).
    pub fn shrink_scaling(&self) -> Vec<f64> {
        self.rows
            .windows(2)
            .map(|w| w[0].shrink_mc / w[1].shrink_mc)
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# asymptotics report\n");
        s += &format!("dim={}\n", self.dim);
        s += &format!(
            "point={}\n",
            self.point
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        );
        s += &format!("n_samples={}\n", self.n_samples);
        s += "delta,max_dev,max_dev_se,shrink_theory,shrink_mc,ratio_theory,ratio_mc\n";
        for r in &self.rows {
            s += &format!(
                "{},{:e},{:.3},{:e},{:e},{:e},{:e}\n",
                r.delta,
                r.max_dev,
                r.max_dev_se,
                r.shrink_theory,
                r.shrink_mc,
                r.ratio_theory,
                r.ratio_mc
            );
        }
        let scaling = self.shrink_scaling();
        if !scaling.is_empty() {
            s += &format!(
                "shrink_scaling={}\n",
                scaling
                    .iter()
                    .map(|v| format!("{v:.4}"))
                    .collect::<Vec<_>>()
                    .join(" ")
            );
        }
        s
    }
}

/// Theory against Monte Carlo at each of a decreasing list of radii.
pub fn asymptotics_report<R: Rng + ?Sized>(
    model: &dyn DensityModel,
    x: &[f64],
    deltas: &[f64],
    n_samples: usize,
    rng: &mut R,
) -> Result<AsymptoticsReport> {
    if deltas.is_empty() || deltas.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::BadParams("deltas must be positive".into()));
    }
    if deltas.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::BadParams(
            "deltas must be strictly decreasing".into(),
        ));
    }
    let d = model.dim();
    let f = model.density(x);
    let g = model.gradient(x);
    let rel_grad2: f64 = g.iter().map(|v| (v / f) * (v / f)).sum();
    let dp2 = (d + 2) as f64;
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let theory = ball_cov_theory(model, x, delta)?;
        let mc = ball_cov_mc_detailed(model, x, delta, n_samples, rng)?;
        let mut max_dev: f64 = 0.0;
        let mut max_dev_se: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let dev = (theory[(i, j)] - mc.cov[(i, j)]).abs();
                max_dev = max_dev.max(dev);
                if mc.std_err[(i, j)] > 0.0 {
                    max_dev_se = max_dev_se.max(dev / mc.std_err[(i, j)]);
                }
            }
        }
        let first = delta * delta / dp2;
        let shrink_theory = delta.powi(4) / (dp2 * dp2) * rel_grad2;
        let shrink_mc = gradient_shrinkage(&mc.cov, &g, delta);
        rows.push(AsymptoticsRow {
            delta,
            theory,
            mc: mc.cov,
            std_err: mc.std_err,
            max_dev,
            max_dev_se,
            shrink_theory,
            shrink_mc,
            ratio_theory: shrink_theory / first,
            ratio_mc: shrink_mc / first,
        });
    }
    Ok(AsymptoticsReport {
        dim: d,
        point: x.to_vec(),
        n_samples,
        rows,
    })
}
