//! Population synthesizers.
//!
//! All estimators except [`synth_bias_corrected`] work on whitened data; use
//! [`synthesize_population`] to whiten, synthesize and map back in one step.

mod corrected;
mod gaussian;
mod km;
mod knn_rex;

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::points::PointSet;
use crate::preprocess::{whiten_apply, whiten_fit, whiten_invert};

pub use corrected::{
    synth_bias_corrected, CorrectedOptions, CorrectedStats, MarginalSpec, MarginalVar,
};
pub use gaussian::{bmp_bandwidths, synth_bmp, synth_bmp_with_index, synth_fixed_gaussian};
pub use km::{
    km_fit, km_fit_with, km_loglik, km_loglik_ridge, km_synth, KmModel, KmMove, KmOptions,
    DEFAULT_KM_RIDGE,
};
pub use knn_rex::{synth_knn_rex, KnnRexSampler};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    KnnRex,
    KnnRexCorrected,
    FixedGaussian,
    Bmp,
    KmRex,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::KnnRex => "knn-rex",
            Method::KnnRexCorrected => "knn-rex-corrected",
            Method::FixedGaussian => "fixed",
            Method::Bmp => "bmp",
            Method::KmRex => "km",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "knn-rex" | "knn_rex" => Method::KnnRex,
            "knn-rex-corrected" | "knn_rex_corrected" => Method::KnnRexCorrected,
            "fixed" | "fixed-gaussian" | "fixed_gaussian" => Method::FixedGaussian,
            "bmp" => Method::Bmp,
            "km" | "km-rex" | "km_rex" => Method::KmRex,
            other => return Err(Error::BadParams(format!("unknown method `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub method: Method,
    pub k: usize,
    pub m: usize,
    pub h: f64,
    /// Number of kernel construction sets (KM only).
    pub kcs_count: usize,
    pub seed: u64,
    pub stall_limit: usize,
    pub km_move: KmMove,
    pub round_integers: bool,
    /// Relative ridge for singular KM kernels.
    pub ridge: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            method: Method::KnnRex,
            k: 30,
            m: 3,
            h: 0.1,
            kcs_count: 10,
            seed: 0,
            stall_limit: 10_000,
            km_move: KmMove::RedrawSet,
            round_integers: false,
            ridge: DEFAULT_KM_RIDGE,
        }
    }
}

impl EstimatorConfig {
    pub fn knn_rex(k: usize, m: usize) -> Self {
        Self {
            method: Method::KnnRex,
            k,
            m,
            ..Self::default()
        }
    }

    pub fn fixed(h: f64) -> Self {
        Self {
            method: Method::FixedGaussian,
            h,
            ..Self::default()
        }
    }

    pub fn bmp(k: usize, h: f64) -> Self {
        Self {
            method: Method::Bmp,
            k,
            h,
            ..Self::default()
        }
    }

    pub fn km(kcs_count: usize, m: usize) -> Self {
        Self {
            method: Method::KmRex,
            kcs_count,
            m,
            ..Self::default()
        }
    }

    /// `key=value` pairs of the parameters that affect this method, in a
    /// stable order.
    pub fn describe(&self) -> Vec<(&'static str, String)> {
        let mut v = vec![("method", self.method.to_string())];
        match self.method {
            Method::KnnRex | Method::KnnRexCorrected => {
                v.push(("k", self.k.to_string()));
                v.push(("m", self.m.to_string()));
            }
            Method::FixedGaussian => v.push(("h", self.h.to_string())),
            Method::Bmp => {
                v.push(("k", self.k.to_string()));
                v.push(("h", self.h.to_string()));
            }
            Method::KmRex => {
                v.push(("L", self.kcs_count.to_string()));
                v.push(("m", self.m.to_string()));
                v.push(("stall_limit", self.stall_limit.to_string()));
            }
        }
        if self.method == Method::KnnRexCorrected {
            v.push(("round_integers", self.round_integers.to_string()));
        }
        v.push(("seed", self.seed.to_string()));
        v
    }
}

/// Synthesizes `l` points from already-whitened data with any unconditional
/// method (everything except the marginal-corrected variant).
pub fn synthesize_whitened<R: Rng + ?Sized>(
    w: &PointSet,
    cfg: &EstimatorConfig,
    l: usize,
    rng: &mut R,
) -> Result<PointSet> {
    match cfg.method {
        Method::KnnRex => synth_knn_rex(w, cfg.k, cfg.m, l, rng),
        Method::FixedGaussian => synth_fixed_gaussian(w, cfg.h, l, rng),
        Method::Bmp => synth_bmp(w, cfg.k, cfg.h, l, rng),
        Method::KmRex => {
            let opts = KmOptions {
                kcs_count: cfg.kcs_count,
                m: cfg.m,
                stall_limit: cfg.stall_limit,
                mv: cfg.km_move,
                ridge: cfg.ridge,
            };
            let model = km_fit_with(w, &opts, rng)?;
            km_synth(&model, w, l, rng)
        }
        Method::KnnRexCorrected => Err(Error::BadParams(
            "the marginal-corrected method needs a marginal spec".into(),
        )),
    }
}

/// Whitens `x`, synthesizes `l` points, and maps them back to original units.
pub fn synthesize_population<R: Rng + ?Sized>(
    x: &PointSet,
    cfg: &EstimatorConfig,
    l: usize,
    rng: &mut R,
) -> Result<PointSet> {
    let t = whiten_fit(x)?;
    let w = whiten_apply(&t, x)?;
    let y = synthesize_whitened(&w, cfg, l, rng)?;
    let mut out = whiten_invert(&t, &y)?;
    if cfg.round_integers {
        for i in 0..out.len() {
            out.row_mut(i).iter_mut().for_each(|v| *v = v.round());
        }
    }
    out.set_names(x.names().map(|n| n.to_vec()));
    Ok(out)
}

/// `(k, m)` from the intrinsic dimension: `m = d' + 1` and `k` at the middle
/// of the recommended 10..=50 range, capped at `n - 1` when `n` is known.
pub fn suggest_params(d_intrinsic: usize, sample_size: Option<usize>) -> Result<(usize, usize)> {
    if d_intrinsic == 0 {
        return Err(Error::BadParams(
            "intrinsic dimension must be at least 1".into(),
        ));
    }
    let m = d_intrinsic + 1;
    let mut k = 30usize.clamp(10, 50);
    if let Some(n) = sample_size {
        k = k.min(n.saturating_sub(1));
    }
    Ok((k, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn parameter_rule() {
        assert_eq!(suggest_params(2, None).unwrap(), (30, 3));
        assert_eq!(suggest_params(1, None).unwrap(), (30, 2));
        assert_eq!(suggest_params(6, None).unwrap(), (30, 7));
        assert_eq!(suggest_params(2, Some(20)).unwrap(), (19, 3));
        assert!(suggest_params(0, None).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in [
            Method::KnnRex,
            Method::KnnRexCorrected,
            Method::FixedGaussian,
            Method::Bmp,
            Method::KmRex,
        ] {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("gmm".parse::<Method>().is_err());
    }

    #[test]
    fn population_in_original_units() {
        let x = PointSet::from_rows(&[
            [10.0, 100.0],
            [12.0, 90.0],
            [11.0, 130.0],
            [13.0, 120.0],
            [9.0, 95.0],
        ])
        .unwrap();
        let cfg = EstimatorConfig::knn_rex(3, 1);
        let y = synthesize_population(&x, &cfg, 40, &mut seeded(1)).unwrap();
        // Bootstrap round trip through whitening reproduces sample rows.
        for r in y.rows() {
            assert!(x
                .rows()
                .any(|s| s.iter().zip(r).all(|(a, b)| (a - b).abs() < 1e-9)));
        }
    }

    #[test]
    fn every_method_is_reproducible_and_finite() {
        let mut rng = seeded(2);
        let x = crate::data::gen_ring(60, &mut rng).unwrap();
        for cfg in [
            EstimatorConfig::knn_rex(8, 3),
            EstimatorConfig::fixed(0.2),
            EstimatorConfig::bmp(5, 0.5),
            EstimatorConfig {
                stall_limit: 50,
                ..EstimatorConfig::km(4, 3)
            },
        ] {
            let a = synthesize_population(&x, &cfg, 123, &mut seeded(3)).unwrap();
            let b = synthesize_population(&x, &cfg, 123, &mut seeded(3)).unwrap();
            assert_eq!(a.len(), 123);
            assert!(a.all_finite());
            assert_eq!(a, b);
        }
    }
}
