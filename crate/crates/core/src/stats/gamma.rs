//! Coupled-pair distances `gamma_{K1,K2}(0) = E |u_{K1}(0, x) - u_{K2}(0, x)|^2`.

use crate::error::{Error, Result};
use crate::solver::FieldState;

pub const MIN_PAIRS: usize = 100;

/// Mean squared difference over replicas and sites, with its standard error over replicas.
pub fn gamma_estimate(pairs: &[(FieldState, FieldState)], sites: &[usize]) -> Result<(f64, f64)> {
    let per: Vec<f64> = pairs.iter().map(|(a, b)| pair_distance(a, b, sites)).collect();
    gamma_from_replicas(&per)
}

/// Site-averaged squared difference of one pair.
pub fn pair_distance(a: &FieldState, b: &FieldState, sites: &[usize]) -> f64 {
    sites.iter().map(|&s| (a.values[s] - b.values[s]).powi(2)).sum::<f64>() / sites.len() as f64
}

pub fn gamma_from_replicas(per: &[f64]) -> Result<(f64, f64)> {
    if per.len() < MIN_PAIRS {
        return Err(Error::TooFewSamples { needed: MIN_PAIRS, got: per.len() });
    }
    let n = per.len() as f64;
    let mean = per.iter().sum::<f64>() / n;
    let var = per.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// `alpha = int_{K2}^{K1} (1 ^ s^{-d/2}) ds` in closed form.
pub fn alpha(k1: f64, k2: f64, dim: usize) -> f64 {
    let p = dim as f64 / 2.0;
    let prim = |s: f64| {
        if s <= 1.0 {
            s
        } else {
            1.0 + (1.0 - s.powf(1.0 - p)) / (p - 1.0)
        }
    };
    prim(k1) - prim(k2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_closed_form() {
        let v = alpha(8.0, 4.0, 3);
        assert!((v - 2.0 * (0.5 - 8f64.powf(-0.5))).abs() < 1e-14);
        assert!((v - 0.292_893_218_813_452_5).abs() < 1e-12);
        assert!((alpha(2.0, 0.5, 3) - (0.5 + 2.0 * (1.0 - 2f64.powf(-0.5)))).abs() < 1e-14);
    }
}
