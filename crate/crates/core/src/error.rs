use thiserror::Error;

/// Errors raised by the lattice, noise, solver and estimator layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("lattice of {cells} cells exceeds the memory budget of {budget} cells")]
    MemoryBudget { cells: u128, budget: u128 },

    #[error("invalid mollifier: {0}")]
    InvalidMollifier(String),

    #[error("covariance aliasing: min R-hat = {min_fourier:e} below -{tolerance:e}; lattice too coarse")]
    Aliasing { min_fourier: f64, tolerance: f64 },

    #[error(
        "periodization error {error:e} at t = {t} exceeds {tolerance:e}; a period of at least {required_period} is needed"
    )]
    Periodization {
        t: f64,
        error: f64,
        tolerance: f64,
        required_period: f64,
    },

    #[error("heat kernel at t = {t} is under-resolved: mass {mass} deviates from 1 by more than {tolerance:e}")]
    UnderResolved { t: f64, mass: f64, tolerance: f64 },

    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("blow-up at t = {time}: non-finite or runaway value (beta too large?)")]
    BlowUp { time: f64 },

    #[error("explicit scheme unstable: dt = {dt} exceeds h^2/(2d) = {limit}")]
    SchemeStability { dt: f64, limit: f64 },

    #[error("time index mismatch: state at step {state}, slice at step {slice}")]
    TimeIndexMismatch { state: i64, slice: i64 },

    #[error("{what} is not an integer multiple of dt = {dt}")]
    NotOnStepGrid { what: String, dt: f64 },

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("non-positive value {value} at scale {scale} cannot be fitted on a log scale")]
    NonPositive { scale: f64, value: f64 },

    #[error("test function under-resolved: {0}")]
    TestFunction(String),
}

pub type Result<T> = std::result::Result<T, Error>;
