//! Simulation and verification kernels for the nonlinear stochastic heat
//! equation `du = Laplacian(u) dt + beta sigma(u) dW_phi` on a periodic lattice
//! in three or more dimensions.
//!
//! The crate is organised bottom-up: [`lattice`] and [`spectral`] fix geometry
//! and transforms, [`kernels`] builds the mollifier, covariance and heat
//! semigroup, [`noise`] produces reproducible smoothed increments, [`solver`]
//! steps the equation and [`stats`] holds the estimators. [`ensemble`] runs
//! replica batches in parallel with order-insensitive merges.

// `!(x > 0.0)` style guards are used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ensemble;
pub mod error;
pub mod kernels;
pub mod lattice;
pub mod noise;
pub mod report;
pub mod solver;
pub mod spectral;
pub mod stats;
pub mod tolerances;

pub use error::{Error, Result};
pub use kernels::{
    bump_mollifier, covariance_of, heat_kernel_field, semigroup_apply, CovarianceKernel,
    HeatSemigroupPlan, MollifierSpec, Symbol,
};
pub use lattice::Lattice;
pub use report::{Check, ExperimentReport, ReportRow};
pub use spectral::{SpectralPlan, SpectralWorkspace};
pub use tolerances::Tolerances;
