//! Log-log least squares.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub points: Vec<(f64, f64)>,
    pub exponent: f64,
    pub exponent_se: f64,
    pub intercept: f64,
    pub fit_range: (f64, f64),
}

/// Slope of `ln value` against `ln scale`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<DecayFit> {
    if points.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            got: points.len(),
        });
    }
    for w in points.windows(2) {
        if !(w[1].0 > w[0].0) {
            return Err(Error::InvalidArgument(
                "scales must be strictly increasing".into(),
            ));
        }
    }
    for &(s, v) in points {
        if !(s > 0.0) || !(v > 0.0) || !v.is_finite() {
            return Err(Error::NonPositive { scale: s, value: v });
        }
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (slope, intercept, se) = least_squares(&xs, &ys);
    Ok(DecayFit {
        points: points.to_vec(),
        exponent: slope,
        exponent_se: se,
        intercept,
        fit_range: (points[0].0, points[points.len() - 1].0),
    })
}

/// Ordinary least squares line; returns (slope, intercept, slope standard error).
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let se = if xs.len() > 2 {
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, intercept, se)
}

/// Points of `points` whose scale lies in the last decade `[max/10, max]`.
pub fn largest_decade(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let max = points.iter().map(|p| p.0).fold(f64::MIN, f64::max);
    points
        .iter()
        .copied()
        .filter(|p| p.0 >= max / 10.0 * (1.0 - 1e-12))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let pts: Vec<_> = [1.0, 2.0, 4.0, 8.0, 16.0]
            .iter()
            .map(|&s: &f64| (s, s.powf(-0.5)))
            .collect();
        let fit = fit_power_law(&pts).unwrap();
        assert!((fit.exponent + 0.5).abs() < 1e-12);
        assert_eq!(fit.fit_range, (1.0, 16.0));
    }

    #[test]
    fn constant_values_fit_zero() {
        let pts = [(1.0, 3.0), (2.0, 3.0), (5.0, 3.0)];
        assert!(fit_power_law(&pts).unwrap().exponent.abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            fit_power_law(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]),
            Err(Error::NonPositive { .. })
        ));
        assert!(fit_power_law(&[(1.0, 1.0), (2.0, 1.0)]).is_err());
        assert!(fit_power_law(&[(1.0, 1.0), (1.0, 1.0), (3.0, 1.0)]).is_err());
    }
}
