//! Experiment drivers. Each is validated and costed when prepared, then run
//! over the shared worker pool.

use std::sync::Arc;

use ewlab_core::ensemble::Pool;
use ewlab_core::kernels::{bump_mollifier, covariance_of, CovarianceKernel, MollifierSpec};
use ewlab_core::noise::NoiseSource;
use ewlab_core::solver::{Sigma, SigmaSpec};
use ewlab_core::{Lattice, SpectralPlan, Tolerances};

use crate::config::{Config, Geometry};
use crate::error::CliError;
use crate::output::Output;

mod coupling;
mod ew;
mod exactness;
mod kernels;
mod moments;
mod noise;
mod probe;
mod schemes;
mod stationarity;
mod structure;

/// Stream `experiment` ids, one per driver, so no two experiments share noise.
pub mod ids {
    pub const NOISE: u32 = 2;
    pub const EXACTNESS: u32 = 3;
    pub const SCHEMES: u32 = 4;
    pub const MOMENTS: u32 = 5;
    pub const STATIONARITY: u32 = 6;
    pub const SHIFTED: u32 = 7;
    pub const COUPLING: u32 = 8;
    pub const FIRST_CHAOS: u32 = 9;
    pub const EW: u32 = 10;
    pub const PROBE: u32 = 11;
    pub const STRUCTURE: u32 = 12;
}

pub struct RunContext {
    pub pool: Pool,
    pub seed: u64,
    pub tol: Tolerances,
    pub dumps: bool,
}

pub trait Experiment: Send + Sync {
    fn name(&self) -> &'static str;
    /// Projected number of lattice cell updates.
    fn cost(&self) -> f64;
    fn run(&self, ctx: &RunContext) -> Result<Output, CliError>;
}

pub const ALL: [&str; 11] = [
    "kernel_checks",
    "noise",
    "exactness",
    "schemes",
    "moments",
    "stationarity",
    "coupling",
    "first_chaos",
    "ew",
    "probe",
    "structure",
];

/// Builds and validates one experiment by name.
pub fn prepare(cfg: &Config, name: &str) -> Result<Box<dyn Experiment>, CliError> {
    Ok(match name {
        "kernel_checks" => Box::new(kernels::KernelChecks::new(cfg)?),
        "noise" => Box::new(noise::NoiseCertification::new(cfg)?),
        "exactness" => Box::new(exactness::Exactness::new(cfg)?),
        "schemes" => Box::new(schemes::SchemeComparison::new(cfg)?),
        "moments" => Box::new(moments::Moments::new(cfg)?),
        "stationarity" => Box::new(stationarity::Stationarity::new(cfg)?),
        "structure" => Box::new(structure::Structure::new(cfg)?),
        "coupling" => Box::new(coupling::Coupling::new(cfg)?),
        "first_chaos" => Box::new(ew::EwLimit::new(cfg, "first_chaos", &cfg.first_chaos)?),
        "ew" => Box::new(ew::EwLimit::new(cfg, "ew", &cfg.ew)?),
        "probe" => Box::new(probe::Probe::new(cfg)?),
        other => return Err(CliError::Config(format!("unknown experiment {other}"))),
    })
}

/// Lattice, transform plan, mollifier and covariance of one geometry.
#[derive(Clone)]
pub struct Setup {
    pub geometry: Geometry,
    pub lattice: Lattice,
    pub plan: Arc<SpectralPlan>,
    pub phi: Arc<MollifierSpec>,
    pub kernel: Arc<CovarianceKernel>,
}

impl Setup {
    pub fn new(geometry: Geometry, tol: &Tolerances) -> Result<Self, CliError> {
        let lattice = geometry.lattice()?;
        let plan = Arc::new(SpectralPlan::new(&lattice));
        let phi = bump_mollifier(&plan, geometry.r0)?;
        let kernel = covariance_of(&plan, &phi, tol)?;
        Ok(Self {
            geometry,
            lattice,
            plan,
            phi: Arc::new(phi),
            kernel: Arc::new(kernel),
        })
    }

    pub fn source(&self, seed: u64, dt: f64) -> Result<Arc<NoiseSource>, CliError> {
        Ok(Arc::new(NoiseSource::new(self.plan.clone(), self.phi.clone(), seed, dt)?))
    }

    pub fn cells(&self) -> f64 {
        self.lattice.cell_count() as f64
    }
}

pub fn sigma(spec: SigmaSpec) -> Result<Sigma, CliError> {
    Ok(Sigma::new(spec)?)
}

/// Number of steps of `dt` in `value`, as a configuration error when off-grid.
pub fn steps(what: &str, value: f64, dt: f64) -> Result<i64, CliError> {
    ewlab_core::noise::steps_of(what, value, dt).map_err(|e| CliError::Config(e.to_string()))
}

pub fn require(ok: bool, msg: impl FnOnce() -> String) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(msg()))
    }
}

pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let m: ewlab_core::stats::summation::Moments = values.iter().copied().collect();
    (m.mean(), m.std_error())
}
