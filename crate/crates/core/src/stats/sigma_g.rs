//! Limit variance `Sigma_g` of the Gaussian field tested against `g`.

use std::f64::consts::PI;

use libm::erfc;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::stats::quadrature;
use crate::stats::summation::NeumaierSum;

/// Test functions with a closed-form transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TestFunction {
    /// Unit-mass Gaussian `(2 pi w^2)^{-d/2} exp(-|x|^2 / (2 w^2))`.
    Gaussian { width: f64 },
}

impl TestFunction {
    pub fn width(&self) -> f64 {
        match *self {
            TestFunction::Gaussian { width } => width,
        }
    }

    /// `g_hat(xi)` as a function of `|xi|^2`.
    pub fn hat(&self, k2: f64) -> f64 {
        let w = self.width();
        (-0.5 * w * w * k2).exp()
    }

    /// Mass of one copy of `g` outside the box of side `period` centred at the origin.
    pub fn outside_mass(&self, period: f64, dim: usize) -> f64 {
        dim as f64 * erfc(period / (2.0 * std::f64::consts::SQRT_2 * self.width()))
    }

    /// One-axis periodised profile at `x`.
    pub fn periodic_1d(&self, x: f64, period: f64) -> f64 {
        let w = self.width();
        let norm = (2.0 * PI * w * w).powf(-0.5);
        let reach = ((80.0f64).sqrt() * w / period).ceil() as i64 + 1;
        (-reach..=reach)
            .map(|m| {
                let z = x + m as f64 * period;
                (-(z * z) / (2.0 * w * w)).exp()
            })
            .sum::<f64>()
            * norm
    }

    pub fn validate(&self, period: f64, dim: usize, tail_tol: f64) -> Result<()> {
        if !(self.width() > 0.0) {
            return Err(Error::TestFunction(format!("width {} must be positive", self.width())));
        }
        let out = self.outside_mass(period, dim);
        if out > tail_tol {
            return Err(Error::TestFunction(format!(
                "mass {out:e} of g lies outside the box of side {period}, tolerance {tail_tol:e}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaGValue {
    pub g: TestFunction,
    pub t: f64,
    pub beta: f64,
    pub nu2: f64,
    pub value: f64,
    /// Change when the wavenumber cutoff is halved.
    pub quadrature_error: f64,
}

fn spectral_sum(g: &TestFunction, t: f64, period: f64, side: usize, dim: usize) -> f64 {
    let k: Vec<f64> = (0..side)
        .map(|j| {
            let m = if j < side / 2 { j as i64 } else { j as i64 - side as i64 };
            2.0 * PI * m as f64 / period
        })
        .collect();
    let total = side.pow(dim as u32);
    let mut acc = NeumaierSum::default();
    for idx in 0..total {
        let mut rest = idx;
        let mut k2 = 0.0;
        for _ in 0..dim {
            k2 += k[rest % side].powi(2);
            rest /= side;
        }
        let gh = g.hat(k2);
        let term = if k2 == 0.0 {
            t
        } else {
            -(-2.0 * t * k2).exp_m1() / (2.0 * k2)
        };
        acc.add(gh * gh * term);
    }
    acc.value() / period.powi(dim as i32)
}

/// `beta^2 nu^2 (1/V) sum_k |g_hat|^2 (1 - e^{-2t|k|^2}) / (2|k|^2)` on the macroscopic torus.
pub fn sigma_g(nu2: f64, beta: f64, t: f64, g: &TestFunction, lattice: &Lattice) -> Result<SigmaGValue> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("time {t} must be positive")));
    }
    let kmax = PI / lattice.spacing();
    let edge = g.hat(kmax * kmax).powi(2);
    if edge > 1e-12 {
        return Err(Error::TestFunction(format!(
            "macroscopic spacing {} under-resolves g: |g_hat|^2 = {edge:e} at the cutoff",
            lattice.spacing()
        )));
    }
    let (l, n, d) = (lattice.period(), lattice.side(), lattice.dim());
    let fine = spectral_sum(g, t, l, n, d);
    let coarse = spectral_sum(g, t, l, n / 2, d);
    let scale = beta * beta * nu2;
    Ok(SigmaGValue {
        g: *g,
        t,
        beta,
        nu2,
        value: scale * fine,
        quadrature_error: scale * (fine - coarse).abs(),
    })
}

/// Real-space time quadrature of `beta^2 nu^2 int_0^t int int p(2s, x1 - x2) g g`
/// on the torus, for a Gaussian `g`.
pub fn sigma_g_real_space(nu2: f64, beta: f64, t: f64, g: &TestFunction, period: f64, dim: usize) -> f64 {
    let w = g.width();
    let f1 = |s: f64| {
        let v = 2.0 * w * w + 4.0 * s;
        let norm = (2.0 * PI * v).powf(-0.5);
        let reach = ((80.0 * v).sqrt() / period).ceil() as i64 + 1;
        (-reach..=reach)
            .map(|m| (-(m as f64 * period).powi(2) / (2.0 * v)).exp())
            .sum::<f64>()
            * norm
    };
    beta * beta * nu2 * quadrature::integrate(|s| f1(s).powi(dim as i32), 0.0, t, 32, 24)
}
