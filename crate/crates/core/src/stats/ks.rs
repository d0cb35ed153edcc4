//! Kolmogorov–Smirnov statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::normal;

/// Minimum sample size accepted by the two-sample test.
pub const MIN_KS_SAMPLES: usize = 50;

/// `c(alpha) = sqrt(-ln(alpha/2)/2)` at alpha = 0.01.
pub fn ks_coefficient(alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    /// Asymptotic critical value at the 1% level for these sample sizes.
    pub critical_1pct: f64,
    pub p_value: f64,
}

impl KsResult {
    pub fn rejects(&self) -> bool {
        self.statistic >= self.critical_1pct
    }
}

fn sorted(values: &[f64]) -> Result<Vec<f64>> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite sample value".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    Ok(v)
}

/// Two-sample statistic `sup |F_a - F_b|`, ties handled by stepping over equal values.
pub fn two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    for s in [a, b] {
        if s.len() < MIN_KS_SAMPLES {
            return Err(Error::TooFewSamples {
                needed: MIN_KS_SAMPLES,
                got: s.len(),
            });
        }
    }
    let a = sorted(a)?;
    let b = sorted(b)?;
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    Ok(KsResult {
        statistic: d,
        critical_1pct: ks_coefficient(0.01) / ne.sqrt(),
        p_value: kolmogorov_survival(d, ne),
    })
}

/// One-sample statistic against the standard normal distribution.
pub fn against_standard_normal(values: &[f64]) -> Result<KsResult> {
    if values.len() < MIN_KS_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_KS_SAMPLES,
            got: values.len(),
        });
    }
    let v = sorted(values)?;
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in v.iter().enumerate() {
        let f = normal::cdf(*x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(KsResult {
        statistic: d,
        critical_1pct: ks_coefficient(0.01) / n.sqrt(),
        p_value: kolmogorov_survival(d, n),
    })
}

/// `P(D > d)` from the Kolmogorov distribution with Stephens' small-sample
/// correction, `ne` the effective sample size.
pub fn kolmogorov_survival(d: f64, ne: f64) -> f64 {
    let sq = ne.sqrt();
    let lambda = (sq + 0.12 + 0.11 / sq) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normal_sample(n: usize, shift: f64, seed: u64) -> Vec<f64> {
        // stratified quantiles with a deterministic scramble
        let mut v: Vec<f64> = (0..n)
            .map(|i| {
                let u = ((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ seed) % 1_000_003;
                normal::quantile((u as f64 + 0.5) / 1_000_003.0) + shift
            })
            .collect();
        v.rotate_left(n / 3);
        v
    }

    #[test]
    fn identical_samples_have_zero_distance() {
        let a = normal_sample(500, 0.0, 1);
        assert_eq!(two_sample(&a, &a).unwrap().statistic, 0.0);
        let mut shuffled = a.clone();
        shuffled.reverse();
        shuffled.rotate_left(17);
        assert_eq!(two_sample(&a, &shuffled).unwrap().statistic, 0.0);
    }

    #[test]
    fn equal_constants_are_degenerate_but_fine() {
        let a = vec![1.0; 80];
        let r = two_sample(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(!r.rejects());
        let b = vec![2.0; 80];
        assert_eq!(two_sample(&a, &b).unwrap().statistic, 1.0);
    }

    #[test]
    fn too_few_samples_is_an_error() {
        let a = vec![0.0; 10];
        assert!(matches!(
            two_sample(&a, &a),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn critical_value_coefficient() {
        assert!((ks_coefficient(0.01) - 1.627_624_0).abs() < 1e-6);
        assert!((ks_coefficient(0.05) - 1.358_101_5).abs() < 1e-6);
    }

    #[test]
    fn survival_function_reference_points() {
        // Q_KS(1.36) ≈ 0.0494 and Q_KS(1.63) ≈ 0.0098 in the asymptotic limit.
        assert!((kolmogorov_survival(1.36 / 1e4, 1e8) - 0.0494).abs() < 5e-4);
        assert!((kolmogorov_survival(1.63 / 1e4, 1e8) - 0.0098).abs() < 2e-4);
    }
}
