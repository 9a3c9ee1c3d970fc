//! Inverted cross-validation: train on one small fold, test against the rest.

use std::time::Instant;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::estimators::{synthesize_whitened, EstimatorConfig, Method};
use crate::points::PointSet;
use crate::preprocess::{whiten_apply, whiten_fit, whiten_invert};
use crate::rng::derive;

use super::hellinger::hellinger_union;
use super::welch::{mean_sd, welch_samples, WelchResult};

#[derive(Debug, Clone, PartialEq)]
pub struct IcvOptions {
    pub folds: usize,
    pub bins_per_dim: usize,
    /// Master seed: fixes fold assignment and every fold's synthesis stream.
    pub seed: u64,
}

impl Default for IcvOptions {
    fn default() -> Self {
        Self {
            folds: 100,
            bins_per_dim: 10,
            seed: 0,
        }
    }
}

/// Fold membership after one shuffle; the remainder `n mod folds` is dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct IcvSplits {
    order: Vec<usize>,
    fold_size: usize,
    folds: usize,
}

impl IcvSplits {
    pub fn new(n: usize, folds: usize, seed: u64) -> Result<Self> {
        if folds < 2 {
            return Err(Error::BadParams("ICV needs at least 2 folds".into()));
        }
        if n < folds {
            return Err(Error::TooFewPoints {
                needed: folds,
                got: n,
            });
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut derive(seed, 0));
        let fold_size = n / folds;
        order.truncate(fold_size * folds);
        Ok(Self {
            order,
            fold_size,
            folds,
        })
    }

    pub fn folds(&self) -> usize {
        self.folds
    }

    pub fn train_size(&self) -> usize {
        self.fold_size
    }

    pub fn test_size(&self) -> usize {
        self.fold_size * (self.folds - 1)
    }

    pub fn train(&self, fold: usize) -> &[usize] {
        &self.order[fold * self.fold_size..(fold + 1) * self.fold_size]
    }

    pub fn test(&self, fold: usize) -> Vec<usize> {
        let (a, b) = (fold * self.fold_size, (fold + 1) * self.fold_size);
        self.order[..a]
            .iter()
            .chain(&self.order[b..])
            .copied()
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcvReport {
    pub config: EstimatorConfig,
    pub options: IcvOptions,
    pub train_size: usize,
    pub test_size: usize,
    pub hellinger: Vec<f64>,
    /// Hellinger distance of the raw training fold to the test folds.
    pub baseline: Vec<f64>,
    pub seconds: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub baseline_mean: f64,
    pub baseline_std: f64,
}

impl IcvReport {
    fn assemble(
        config: EstimatorConfig,
        options: IcvOptions,
        splits: &IcvSplits,
        folds: Vec<(f64, f64, f64)>,
    ) -> Self {
        let hellinger: Vec<f64> = folds.iter().map(|f| f.0).collect();
        let baseline: Vec<f64> = folds.iter().map(|f| f.1).collect();
        let seconds: Vec<f64> = folds.iter().map(|f| f.2).collect();
        let (mean, std) = mean_sd(&hellinger);
        let (baseline_mean, baseline_std) = mean_sd(&baseline);
        Self {
            config,
            options,
            train_size: splits.train_size(),
            test_size: splits.test_size(),
            hellinger,
            baseline,
            seconds,
            mean,
            std,
            baseline_mean,
            baseline_std,
        }
    }

    /// Welch's test of this method's fold scores against the copying baseline.
    pub fn versus_baseline(&self) -> Result<WelchResult> {
        welch_samples(&self.hellinger, &self.baseline)
    }

    pub fn versus(&self, other: &IcvReport) -> Result<WelchResult> {
        welch_samples(&self.hellinger, &other.hellinger)
    }

    pub fn total_seconds(&self) -> f64 {
        self.seconds.iter().sum()
    }

    /// Deterministic text rendering: header keys in fixed order, then one
    /// row per fold. Timings are excluded so equal seeds give equal bytes.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# icv report\n");
        for (k, v) in self.config.describe() {
            s += &format!("{k}={v}\n");
        }
        s += &format!("folds={}\n", self.options.folds);
        s += &format!("bins_per_dim={}\n", self.options.bins_per_dim);
        s += &format!("icv_seed={}\n", self.options.seed);
        s += &format!("train_size={}\n", self.train_size);
        s += &format!("test_size={}\n", self.test_size);
        s += &format!("hellinger_mean={:e}\n", self.mean);
        s += &format!("hellinger_std={:e}\n", self.std);
        s += &format!("baseline_mean={:e}\n", self.baseline_mean);
        s += &format!("baseline_std={:e}\n", self.baseline_std);
        if let Ok(w) = self.versus_baseline() {
            s += &format!("welch_vs_baseline_t={:e}\n", w.t);
            s += &format!("welch_vs_baseline_p={:e}\n", w.p);
        }
        s += "fold,hellinger,baseline\n";
        for (i, (h, b)) in self.hellinger.iter().zip(&self.baseline).enumerate() {
            s += &format!("{i},{h:e},{b:e}\n");
        }
        s
    }
}

/// Materialized fold data shared by every configuration of a sweep.
struct Fold {
    train: PointSet,
    test: PointSet,
    baseline: f64,
}

fn prepare_folds(data: &PointSet, splits: &IcvSplits, bins: usize) -> Result<Vec<Fold>> {
    (0..splits.folds())
        .map(|f| {
            let train = data.select(splits.train(f));
            let test = data.select(&splits.test(f));
            let baseline = hellinger_union(&train, &test, bins)?;
            Ok(Fold {
                train,
                test,
                baseline,
            })
        })
        .collect()
}

fn run_fold(
    fold: &Fold,
    index: usize,
    cfg: &EstimatorConfig,
    opts: &IcvOptions,
) -> Result<(f64, f64, f64)> {
    let start = Instant::now();
    let mut rng = derive(opts.seed, 1 + index as u64);
    let t = whiten_fit(&fold.train)?;
    let w = whiten_apply(&t, &fold.train)?;
    let y = synthesize_whitened(&w, cfg, fold.test.len(), &mut rng)?;
    let mut y = whiten_invert(&t, &y)?;
    if cfg.round_integers {
        for i in 0..y.len() {
            y.row_mut(i).iter_mut().for_each(|v| *v = v.round());
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    let h = hellinger_union(&y, &fold.test, opts.bins_per_dim)?;
    Ok((h, fold.baseline, seconds))
}

fn run_folds(
    folds: &[Fold],
    cfg: &EstimatorConfig,
    opts: &IcvOptions,
) -> Result<Vec<(f64, f64, f64)>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        folds
            .par_iter()
            .enumerate()
            .map(|(i, f)| run_fold(f, i, cfg, opts))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        folds
            .iter()
            .enumerate()
            .map(|(i, f)| run_fold(f, i, cfg, opts))
            .collect()
    }
}

fn check_method(cfg: &EstimatorConfig) -> Result<()> {
    if cfg.method == Method::KnnRexCorrected {
        return Err(Error::BadParams(
            "inverted cross-validation does not apply to the marginal-corrected method".into(),
        ));
    }
    Ok(())
}

/// Runs the full ICV protocol for one configuration.
pub fn icv_run(data: &PointSet, cfg: &EstimatorConfig, opts: &IcvOptions) -> Result<IcvReport> {
    Ok(icv_sweep(data, std::slice::from_ref(cfg), opts)?.remove(0))
}

/// Runs ICV for several configurations over identical folds.
pub fn icv_sweep(
    data: &PointSet,
    cfgs: &[EstimatorConfig],
    opts: &IcvOptions,
) -> Result<Vec<IcvReport>> {
    cfgs.iter().try_for_each(check_method)?;
    let splits = IcvSplits::new(data.len(), opts.folds, opts.seed)?;
    let folds = prepare_folds(data, &splits, opts.bins_per_dim)?;
    cfgs.iter()
        .map(|cfg| {
            let rows = run_folds(&folds, cfg, opts)?;
            Ok(IcvReport::assemble(
                cfg.clone(),
                opts.clone(),
                &splits,
                rows,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_ring;
    use crate::rng::seeded;

    #[test]
    fn split_arithmetic() {
        let s = IcvSplits::new(10_000, 100, 3).unwrap();
        assert_eq!(s.train_size(), 100);
        assert_eq!(s.test_size(), 9900);
        let s = IcvSplits::new(1234, 100, 3).unwrap();
        assert_eq!((s.train_size(), s.test_size()), (12, 1188));
        let mut all: Vec<usize> = s.train(5).to_vec();
        all.extend(s.test(5));
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 1200);
    }

    #[test]
    fn split_errors() {
        assert!(matches!(
            IcvSplits::new(50, 100, 0),
            Err(Error::TooFewPoints { .. })
        ));
        assert!(matches!(IcvSplits::new(50, 1, 0), Err(Error::BadParams(_))));
    }

    #[test]
    fn reproducible_and_consistent_summary() {
        let data = gen_ring(2000, &mut seeded(1)).unwrap();
        let opts = IcvOptions {
            folds: 10,
            bins_per_dim: 8,
            seed: 4,
        };
        let cfg = EstimatorConfig::knn_rex(10, 3);
        let a = icv_run(&data, &cfg, &opts).unwrap();
        let b = icv_run(&data, &cfg, &opts).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        assert_eq!(a.hellinger.len(), 10);
        let (m, s) = mean_sd(&a.hellinger);
        assert!((m - a.mean).abs() < 1e-12 && (s - a.std).abs() < 1e-12);
        assert!(a.hellinger.iter().all(|h| (0.0..=1.0).contains(h)));
    }

    #[test]
    fn corrected_method_rejected() {
        let data = gen_ring(100, &mut seeded(1)).unwrap();
        let cfg = EstimatorConfig {
            method: Method::KnnRexCorrected,
            ..EstimatorConfig::default()
        };
        assert!(icv_run(&data, &cfg, &IcvOptions::default()).is_err());
    }
}
