//! Estimators, fits and hypothesis tests.

pub mod fit;
pub mod fluctuation;
pub mod gamma;
pub mod jackknife;
pub mod ks;
pub mod normal;
pub mod nu_sigma;
pub mod quadrature;
pub mod sigma_g;
pub mod stationarity;
pub mod structure;
pub mod summation;
