//! Likelihood-optimized mixture of `L` REX kernels.
//!
//! Hill-climbs the KCS choice: each iteration re-draws one KCS and keeps the
//! move iff the training log-likelihood `sum_i log((1/L) sum_l K(x_i | X_l))`
//! strictly increases. Stops after `stall_limit` consecutive rejections.

use rand::Rng;

use crate::error::{Error, Result};
use crate::kernels::{kcs_stats, GaussianLogPdf, Kcs};
use crate::points::PointSet;

use super::knn_rex::choose_distinct;

/// Proposal move for the hill climber.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KmMove {
    /// Pick one KCS uniformly; redraw all of its members without replacement.
    #[default]
    RedrawSet,
    /// Pick one KCS uniformly; replace one member by a point outside the set.
    ReplaceMember,
}

#[derive(Debug, Clone)]
pub struct KmOptions {
    pub kcs_count: usize,
    pub m: usize,
    pub stall_limit: usize,
    pub mv: KmMove,
    /// Diagonal ridge, relative to the mean KCS variance, applied only to
    /// kernels whose covariance is not positive definite.
    pub ridge: f64,
}

pub const DEFAULT_KM_RIDGE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct KmModel {
    /// Sample-point ids of each KCS.
    pub kcss: Vec<Vec<usize>>,
    pub loglik: f64,
    pub initial_loglik: f64,
    /// Log-likelihood after each accepted move, in order.
    pub accepted: Vec<f64>,
    /// Iteration (1-based) at which each accepted move happened.
    pub accepted_at: Vec<usize>,
    pub iterations: usize,
}

/// Per-point log-density of one KCS's kernel, with the ridge fallback for
/// near-singular covariance. A set that stays singular yields `-inf`.
fn kernel_column(x: &PointSet, ids: &[usize], ridge: f64, out: &mut [f64]) {
    let kcs = Kcs::gather(x, ids).expect("KCS ids are non-empty");
    let stats = kcs_stats(&kcs);
    let d = x.dim();
    let pdf = GaussianLogPdf::new(stats.mu.clone(), stats.sigma.clone()).or_else(|| {
        let ridge = ridge * stats.sigma.trace() / d as f64;
        if !(ridge > 0.0) {
            return None;
        }
        let mut s = stats.sigma.clone();
        for i in 0..d {
            s[(i, i)] += ridge;
        }
        GaussianLogPdf::new(stats.mu.clone(), s)
    });
    match pdf {
        Some(pdf) => {
            for (o, r) in out.iter_mut().zip(x.rows()) {
                *o = pdf.ln_pdf(r);
            }
        }
        None => out.iter_mut().for_each(|o| *o = f64::NEG_INFINITY),
    }
}

fn log_mean_exp(v: impl Iterator<Item = f64> + Clone, count: usize) -> f64 {
    let max = v.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = v.map(|a| (a - max).exp()).sum();
    max + s.ln() - (count as f64).ln()
}

/// Column-major cache of `log K(x_i | X_l)`, one column per KCS.
struct LogKernelCache {
    n: usize,
    cols: Vec<f64>,
    kcs_count: usize,
}

impl LogKernelCache {
    fn build(x: &PointSet, kcss: &[Vec<usize>], ridge: f64) -> Self {
        let n = x.len();
        let mut cols = vec![0.0; n * kcss.len()];
        for (ids, col) in kcss.iter().zip(cols.chunks_exact_mut(n)) {
            kernel_column(x, ids, ridge, col);
        }
        Self {
            n,
            cols,
            kcs_count: kcss.len(),
        }
    }

    fn loglik_with(&self, replace: Option<(usize, &[f64])>) -> f64 {
        let mut total = 0.0;
        for i in 0..self.n {
            let row = (0..self.kcs_count).map(|l| match replace {
                Some((c, col)) if c == l => col[i],
                _ => self.cols[l * self.n + i],
            });
            total += log_mean_exp(row, self.kcs_count);
        }
        total
    }

    fn set_column(&mut self, l: usize, col: &[f64]) {
        self.cols[l * self.n..(l + 1) * self.n].copy_from_slice(col);
    }
}

/// Training log-likelihood of a KCS configuration, computed from scratch.
pub fn km_loglik(x: &PointSet, kcss: &[Vec<usize>]) -> f64 {
    km_loglik_ridge(x, kcss, DEFAULT_KM_RIDGE)
}

pub fn km_loglik_ridge(x: &PointSet, kcss: &[Vec<usize>], ridge: f64) -> f64 {
    LogKernelCache::build(x, kcss, ridge).loglik_with(None)
}

fn draw_set<R: Rng + ?Sized>(all: &[usize], m: usize, rng: &mut R) -> Vec<usize> {
    let mut out = Vec::with_capacity(all.len());
    choose_distinct(all, m, rng, &mut out);
    // Canonical order: the same set always evaluates identically.
    out.sort_unstable();
    out
}

pub fn km_fit<R: Rng + ?Sized>(
    x: &PointSet,
    kcs_count: usize,
    m: usize,
    rng: &mut R,
    stall_limit: usize,
) -> Result<KmModel> {
    km_fit_with(
        x,
        &KmOptions {
            kcs_count,
            m,
            stall_limit,
            mv: KmMove::default(),
            ridge: DEFAULT_KM_RIDGE,
        },
        rng,
    )
}

pub fn km_fit_with<R: Rng + ?Sized>(
    x: &PointSet,
    opts: &KmOptions,
    rng: &mut R,
) -> Result<KmModel> {
    let n = x.len();
    let d = x.dim();
    if !(opts.ridge >= 0.0) {
        return Err(Error::BadParams("ridge must be non-negative".into()));
    }
    if opts.kcs_count == 0 {
        return Err(Error::BadParams("KCS count L must be at least 1".into()));
    }
    if opts.m < d + 1 {
        return Err(Error::BadParams(format!(
            "KM needs m >= d + 1 = {}, got {}",
            d + 1,
            opts.m
        )));
    }
    if n < opts.m {
        return Err(Error::BadParams(format!(
            "sample of {n} points is smaller than m = {}",
            opts.m
        )));
    }
    if opts.mv == KmMove::ReplaceMember && n == opts.m {
        return Err(Error::BadParams("member replacement needs n > m".into()));
    }

    let all: Vec<usize> = (0..n).collect();
    let mut kcss: Vec<Vec<usize>> = (0..opts.kcs_count)
        .map(|_| draw_set(&all, opts.m, rng))
        .collect();
    let mut cache = LogKernelCache::build(x, &kcss, opts.ridge);
    let mut loglik = cache.loglik_with(None);
    let initial_loglik = loglik;
    let mut accepted = Vec::new();
    let mut accepted_at = Vec::new();
    let mut stall = 0;
    let mut iterations = 0;
    let mut col = vec![0.0; n];

    while stall < opts.stall_limit {
        iterations += 1;
        let l = rng.random_range(0..opts.kcs_count);
        let proposal = match opts.mv {
            KmMove::RedrawSet => draw_set(&all, opts.m, rng),
            KmMove::ReplaceMember => {
                let mut p = kcss[l].clone();
                let slot = rng.random_range(0..opts.m);
                let outside: Vec<usize> = all.iter().copied().filter(|i| !p.contains(i)).collect();
                p[slot] = outside[rng.random_range(0..outside.len())];
                p.sort_unstable();
                p
            }
        };
        kernel_column(x, &proposal, opts.ridge, &mut col);
        let candidate = cache.loglik_with(Some((l, &col)));
        if candidate > loglik {
            cache.set_column(l, &col);
            kcss[l] = proposal;
            loglik = candidate;
            accepted.push(loglik);
            accepted_at.push(iterations);
            stall = 0;
        } else {
            stall += 1;
        }
    }

    Ok(KmModel {
        kcss,
        loglik,
        initial_loglik,
        accepted,
        accepted_at,
        iterations,
    })
}

/// Draws `l` points: a KCS chosen uniformly, then one REX child.
pub fn km_synth<R: Rng + ?Sized>(
    model: &KmModel,
    x: &PointSet,
    l: usize,
    rng: &mut R,
) -> Result<PointSet> {
    if model.kcss.is_empty() {
        return Err(Error::BadParams(
            "model has no kernel construction sets".into(),
        ));
    }
    if let Some(&bad) = model.kcss.iter().flatten().find(|&&i| i >= x.len()) {
        return Err(Error::BadIndex {
            index: bad,
            len: x.len(),
        });
    }
    let d = x.dim();
    let mut out = vec![0.0; l * d];
    let mut parents: Vec<&[f64]> = Vec::new();
    for y in out.chunks_exact_mut(d) {
        let set = &model.kcss[rng.random_range(0..model.kcss.len())];
        parents.clear();
        parents.extend(set.iter().map(|&i| x.row(i)));
        crate::kernels::rex_sample_into(&parents, rng, y);
    }
    PointSet::from_flat(d, out)
}
