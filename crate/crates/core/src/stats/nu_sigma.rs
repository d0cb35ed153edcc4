//! Effective variance `nu_sigma^2 = int E[sigma(Z(0)) sigma(Z(x))] R(x) dx`.

use serde::{Deserialize, Serialize};

use crate::kernels::CovarianceKernel;
use crate::solver::Sigma;
use crate::stats::jackknife::jackknife_se;
use crate::stats::summation::NeumaierSum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuSigmaEstimate {
    /// Lags (signed lattice offsets) within the support of `R`.
    pub lags: Vec<Vec<i64>>,
    /// Ensemble-averaged `C_sigma(lag)`, spatially averaged over translates.
    pub profile: Vec<f64>,
    pub nu2: f64,
    pub se: f64,
    pub replicas: usize,
}

/// Per-replica `h^d sum_x C_r(x) R(x)` and `C_r(x)`, where `C_r` averages
/// `sigma(u(y)) sigma(u(y + x))` over sites `y` on a sub-grid of `stride`.
pub fn replica_contribution(snapshot: &[f64], sigma: &Sigma, kernel: &CovarianceKernel, stride: usize) -> (f64, Vec<f64>) {
    let lat = &kernel.lattice;
    let s: Vec<f64> = snapshot.iter().map(|u| sigma.eval(*u)).collect();
    let n = lat.side();
    let stride = stride.max(1);
    let sites: Vec<usize> = (0..lat.cell_count())
        .filter(|&i| {
            let mut rest = i;
            (0..lat.dim()).all(|_| {
                let ok = (rest % n).is_multiple_of(stride);
                rest /= n;
                ok
            })
        })
        .collect();
    let support = kernel.support_cells();
    let mut profile = Vec::with_capacity(support.len());
    let mut nu = NeumaierSum::default();
    for (idx, lag) in &support {
        let mut acc = NeumaierSum::default();
        for &y in &sites {
            acc.add(s[y] * s[lat.shifted(y, lag)]);
        }
        let c = acc.value() / sites.len() as f64;
        nu.add(c * kernel.values[*idx]);
        profile.push(c);
    }
    (lat.cell_volume() * nu.value(), profile)
}

/// Ensemble estimate from independent stationary snapshots.
pub fn nu_sigma_estimate(snapshots: &[Vec<f64>], sigma: &Sigma, kernel: &CovarianceKernel, stride: usize) -> NuSigmaEstimate {
    let parts: Vec<(f64, Vec<f64>)> = snapshots
        .iter()
        .map(|s| replica_contribution(s, sigma, kernel, stride))
        .collect();
    combine(parts, kernel)
}

/// Merges per-replica contributions from [`replica_contribution`].
pub fn combine(parts: Vec<(f64, Vec<f64>)>, kernel: &CovarianceKernel) -> NuSigmaEstimate {
    let r = parts.len();
    let nus: Vec<f64> = parts.iter().map(|p| p.0).collect();
    let nu2 = nus.iter().copied().collect::<NeumaierSum>().value() / r as f64;
    let se = jackknife_se(&nus, |it| {
        let v: Vec<f64> = it.copied().collect();
        v.iter().sum::<f64>() / v.len() as f64
    });
    let m = parts.first().map(|p| p.1.len()).unwrap_or(0);
    let profile = (0..m)
        .map(|j| parts.iter().map(|p| p.1[j]).collect::<NeumaierSum>().value() / r as f64)
        .collect();
    NuSigmaEstimate {
        lags: kernel.support_cells().into_iter().map(|c| c.1).collect(),
        profile,
        nu2,
        se,
        replicas: r,
    }
}
