//! Rescaled test-function statistic `X_eps = eps^{1-d/2} int (u_eps(t, x) - 1) g(x) dx`.

use crate::error::{Error, Result};
use crate::kernels::{CovarianceKernel, Symbol};
use crate::lattice::Lattice;
use crate::solver::{FieldState, Scheme};
use crate::spectral::SpectralPlan;
use crate::stats::sigma_g::TestFunction;
use crate::stats::summation::NeumaierSum;

/// Precomputed weights `eps^{1+d/2} h^d g(eps y)` on the microscopic lattice.
#[derive(Debug, Clone)]
pub struct FluctuationFunctional {
    pub eps: f64,
    pub t: f64,
    pub lambda: f64,
    weights: Vec<f64>,
}

impl FluctuationFunctional {
    /// `g` is periodised on the macroscopic box of side `eps L`.
    pub fn new(lattice: &Lattice, eps: f64, t: f64, g: &TestFunction, lambda: f64, tail_tol: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidArgument(format!("eps = {eps} must lie in (0, 1]")));
        }
        let d = lattice.dim();
        let period = eps * lattice.period();
        g.validate(period, d, tail_tol)?;
        let h = lattice.spacing();
        let axis: Vec<f64> = (0..lattice.side())
            .map(|j| g.periodic_1d(eps * lattice.signed(j) as f64 * h, period))
            .collect();
        let scale = eps.powf(1.0 + d as f64 / 2.0) * lattice.cell_volume();
        let weights = crate::kernels::separable_field(&axis, lattice)
            .into_iter()
            .map(|v| scale * v)
            .collect();
        Ok(Self { eps, t, lambda, weights })
    }

    /// Microscopic time `t / eps^2`.
    pub fn micro_time(&self) -> f64 {
        self.t / (self.eps * self.eps)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn evaluate_values(&self, values: &[f64]) -> f64 {
        let mut acc = NeumaierSum::default();
        for (u, w) in values.iter().zip(&self.weights) {
            acc.add((u - self.lambda) * w);
        }
        acc.value()
    }

    pub fn evaluate(&self, field: &FieldState) -> Result<f64> {
        if field.values.len() != self.weights.len() {
            return Err(Error::ShapeMismatch { expected: self.weights.len(), got: field.values.len() });
        }
        if (field.time() - self.micro_time()).abs() > field.dt / 2.0 {
            return Err(Error::InvalidArgument(format!(
                "field at time {} but the statistic needs t / eps^2 = {}",
                field.time(),
                self.micro_time()
            )));
        }
        Ok(self.evaluate_values(&field.values))
    }
}

/// Convenience wrapper over [`FluctuationFunctional`].
pub fn fluctuation_statistic(field: &FieldState, lattice: &Lattice, eps: f64, t: f64, g: &TestFunction) -> Result<f64> {
    FluctuationFunctional::new(lattice, eps, t, g, 1.0, 1e-3)?.evaluate(field)
}

/// Exact first-order (constant `sigma`) variance of `X_eps` per unit
/// `beta^2 sigma(1)^2` for the discrete-time scheme, including the finite-eps
/// cut-off by `R_hat(eps xi)` and the torus sum.
pub fn first_chaos_variance(
    plan: &SpectralPlan,
    kernel: &CovarianceKernel,
    functional: &FluctuationFunctional,
    steps: i64,
    dt: f64,
    scheme: Scheme,
    symbol: Symbol,
) -> Result<f64> {
    let lat = plan.lattice();
    let mut ws = plan.workspace();
    plan.forward(functional.weights(), &mut ws)?;
    let lambda = match (scheme, symbol) {
        (Scheme::SpectralExponential, Symbol::Continuum) => plan.k2().to_vec(),
        _ => plan.discrete_symbol(),
    };
    let n = steps as i32;
    let table: Vec<f64> = ws
        .spectrum
        .iter()
        .zip(&kernel.fourier)
        .zip(&lambda)
        .map(|((w, rh), l)| {
            let (q, first) = match scheme {
                Scheme::SpectralExponential => ((-2.0 * dt * l).exp(), 1),
                Scheme::ExplicitFd => ((1.0 - dt * l).powi(2), 0),
            };
            let geom = if (1.0 - q).abs() < 1e-15 {
                n as f64
            } else {
                q.powi(first) * (1.0 - q.powi(n)) / (1.0 - q)
            };
            w.norm_sqr() * rh * geom
        })
        .collect();
    Ok(dt * plan.full_sum(&table) / lat.volume())
}
