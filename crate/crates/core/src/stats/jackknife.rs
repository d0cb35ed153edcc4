//! Leave-one-out jackknife standard errors.

/// Jackknife standard error of `estimator` over replicas.
///
/// `estimator` receives the replica set with one element removed. For the
/// sample mean this reproduces `s / sqrt(n)` exactly.
pub fn jackknife_se<T>(items: &[T], estimator: impl Fn(&mut dyn Iterator<Item = &T>) -> f64) -> f64 {
    let n = items.len();
    if n < 2 {
        return 0.0;
    }
    let leave_out: Vec<f64> = (0..n)
        .map(|k| {
            let mut it = items
                .iter()
                .enumerate()
                .filter(move |(i, _)| *i != k)
                .map(|(_, v)| v);
            estimator(&mut it)
        })
        .collect();
    let mean = leave_out.iter().sum::<f64>() / n as f64;
    let ss: f64 = leave_out.iter().map(|v| (v - mean).powi(2)).sum();
    ((n as f64 - 1.0) / n as f64 * ss).sqrt()
}

/// Jackknife standard error of the ratio `mean(a) / mean(b)` over paired replicas.
pub fn ratio_of_means_se(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n < 2 {
        return 0.0;
    }
    let sa: f64 = a.iter().sum();
    let sb: f64 = b.iter().sum();
    let loo: Vec<f64> = (0..n).map(|k| (sa - a[k]) / (sb - b[k])).collect();
    let mean = loo.iter().sum::<f64>() / n as f64;
    let ss: f64 = loo.iter().map(|v| (v - mean).powi(2)).sum();
    ((n as f64 - 1.0) / n as f64 * ss).sqrt()
}

/// Jackknife SE of the unbiased sample variance.
pub fn variance_se(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 3 {
        return 0.0;
    }
    let s1: f64 = xs.iter().sum();
    let s2: f64 = xs.iter().map(|x| x * x).sum();
    let m = (n - 1) as f64;
    let loo: Vec<f64> = xs
        .iter()
        .map(|x| {
            let a = s1 - x;
            let b = s2 - x * x;
            (b - a * a / m) / (m - 1.0)
        })
        .collect();
    let mean = loo.iter().sum::<f64>() / n as f64;
    let ss: f64 = loo.iter().map(|v| (v - mean).powi(2)).sum();
    ((n as f64 - 1.0) / n as f64 * ss).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_jackknife_is_classical_se() {
        let xs: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = jackknife_se(&xs, |it| {
            let v: Vec<f64> = it.copied().collect();
            v.iter().sum::<f64>() / v.len() as f64
        });
        assert!((se - (var / n).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn variance_se_matches_generic_jackknife() {
        let xs: Vec<f64> = (0..40).map(|i| ((i * 13) % 7) as f64 * 0.3 - 1.0).collect();
        let generic = jackknife_se(&xs, |it| {
            let v: Vec<f64> = it.copied().collect();
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
        });
        assert!((variance_se(&xs) - generic).abs() < 1e-12);
    }
}
