use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchResult {
    pub t: f64,
    pub dof: f64,
    /// Two-sided p-value.
    pub p: f64,
}

/// Welch's unequal-variance t-test from summary statistics.
///
/// The two-sided p-value is `I_{dof / (dof + t^2)}(dof / 2, 1 / 2)`, evaluated
/// directly so tiny p-values keep their relative precision.
pub fn welch_t(
    mean_a: f64,
    sd_a: f64,
    n_a: usize,
    mean_b: f64,
    sd_b: f64,
    n_b: usize,
) -> Result<WelchResult> {
    if n_a < 2 || n_b < 2 {
        return Err(Error::BadParams(
            "Welch's test needs at least two observations per group".into(),
        ));
    }
    if !(sd_a >= 0.0) || !(sd_b >= 0.0) {
        return Err(Error::BadParams(
            "standard deviations must be non-negative".into(),
        ));
    }
    if sd_a == 0.0 && sd_b == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    let va = sd_a * sd_a / n_a as f64;
    let vb = sd_b * sd_b / n_b as f64;
    let t = (mean_a - mean_b) / (va + vb).sqrt();
    let dof = (va + vb).powi(2) / (va * va / (n_a - 1) as f64 + vb * vb / (n_b - 1) as f64);
    let p = if t == 0.0 {
        1.0
    } else {
        beta_reg(0.5 * dof, 0.5, dof / (dof + t * t))
    };
    Ok(WelchResult { t, dof, p })
}

/// Welch's test on two raw samples (sample standard deviation, `n - 1`).
pub fn welch_samples(a: &[f64], b: &[f64]) -> Result<WelchResult> {
    let (ma, sa) = mean_sd(a);
    let (mb, sb) = mean_sd(b);
    welch_t(ma, sa, a.len(), mb, sb, b.len())
}

/// Mean and sample standard deviation (`n - 1` normalizer; 0 for one value).
pub fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_groups() {
        let r = welch_t(0.5, 0.1, 10, 0.5, 0.1, 10).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn unit_shift() {
        let r = welch_t(1.0, 1.0, 100, 2.0, 1.0, 100).unwrap();
        assert!((r.t + 7.0710678118654755).abs() < 1e-12);
        assert!((r.dof - 198.0).abs() < 1e-9);
        assert!(r.p < 1e-10);
    }

    #[test]
    fn degenerate() {
        assert!(matches!(
            welch_t(1.0, 0.0, 5, 2.0, 0.0, 5),
            Err(Error::DegenerateVariance)
        ));
        assert!(matches!(
            welch_t(1.0, 1.0, 1, 2.0, 1.0, 5),
            Err(Error::BadParams(_))
        ));
    }

    #[test]
    fn student_t_quantiles() {
        // Tabulated upper quantiles q of Student's t: two-sided p = 2 (1 - q).
        let table = [
            (1.0, 0.9, 3.0776835372078066),
            (1.0, 0.975, 12.706204736432095),
            (1.0, 0.995, 63.65674116287399),
            (10.0, 0.9, 1.3721836411102863),
            (10.0, 0.975, 2.2281388519649385),
            (10.0, 0.995, 3.16927267261695),
            (100.0, 0.9, 1.2900747613398769),
            (100.0, 0.975, 1.9839715184496334),
            (100.0, 0.995, 2.6258905214380177),
        ];
        for (dof, q, x) in table {
            let p: f64 = beta_reg(0.5 * dof, 0.5, dof / (dof + x * x));
            assert!((p - 2.0 * (1.0 - q)).abs() < 1e-6, "dof {dof} q {q}: {p}");
        }
    }

    #[test]
    fn sample_form_matches_summary_form() {
        let a = [1.0, 2.0, 3.0, 4.5];
        let b = [2.0, 2.5, 4.0, 6.0, 7.0];
        let (ma, sa) = mean_sd(&a);
        let (mb, sb) = mean_sd(&b);
        assert_eq!(
            welch_samples(&a, &b).unwrap(),
            welch_t(ma, sa, 4, mb, sb, 5).unwrap()
        );
    }
}
