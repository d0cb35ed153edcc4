//! Default numerical tolerances, gathered in one overridable record.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative floor for negative covariance spectrum values.
    pub spd: f64,
    pub mollifier_mass: f64,
    pub covariance_mass: f64,
    /// Heat mass allowed outside the periodic box.
    pub periodization: f64,
    pub heat_mass: f64,
    pub chapman_kolmogorov: f64,
    pub fourier_identity: f64,
    pub semigroup_mean: f64,
    pub ppr_slope: f64,
    pub ftilde_slope: f64,
    /// Relative consistency of F-tilde under a changed time split.
    pub ftilde_quadrature: f64,
    pub sigma_g_relative: f64,
    /// Width of statistical acceptance bands in standard errors.
    pub se_multiplier: f64,
    pub ks_alpha: f64,
    pub scheme_gap: f64,
    pub moment_growth: f64,
    pub probe_log_band: f64,
    pub probe_linearity: f64,
    pub structure_slope: f64,
    pub decay_exponent_low: f64,
    pub decay_exponent_high: f64,
    /// Upper bound on max/min of gamma/alpha along the coupling ladder.
    pub gamma_alpha_spread: f64,
    /// Field magnitude treated as runaway growth.
    pub blow_up: f64,
    /// Mass of the test function allowed outside the macroscopic box.
    pub g_tail: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            spd: 1e-12,
            mollifier_mass: 1e-12,
            covariance_mass: 1e-10,
            periodization: 1e-10,
            heat_mass: 1e-8,
            chapman_kolmogorov: 1e-8,
            fourier_identity: 1e-8,
            semigroup_mean: 1e-12,
            ppr_slope: 0.1,
            ftilde_slope: 0.2,
            ftilde_quadrature: 1e-3,
            sigma_g_relative: 1e-6,
            se_multiplier: 3.0,
            ks_alpha: 0.01,
            scheme_gap: 0.01,
            moment_growth: 1.05,
            probe_log_band: 0.5,
            probe_linearity: 0.01,
            structure_slope: 1.35,
            decay_exponent_low: -0.7,
            decay_exponent_high: -0.3,
            gamma_alpha_spread: 2.0,
            blow_up: 1e150,
            g_tail: 1e-3,
        }
    }
}
