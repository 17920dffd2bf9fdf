//! Extreme quantile estimation.
//!
//! * [`distributions`]: the study distributions and the generalised Pareto
//!   family (sampling, CDF, inverse CDF).
//! * [`estimators`]: empirical order-statistic quantiles and GP
//!   peaks-over-threshold extrapolation.
//! * [`pinball`]: pinball-loss quantile regression with constant, linear
//!   and small neural quantile functions.
//! * [`simstudy`]: the Monte Carlo comparison of the empirical and GP
//!   estimators at extreme levels.
//! * [`cli`]: the command-line front end.

pub mod cli;
pub mod distributions;
pub mod error;
pub mod estimators;
pub mod optim;
pub mod pinball;
pub mod rng;
pub mod sample;
pub mod simstudy;

pub use distributions::{GpParams, Sampler, StudyDist};
pub use error::{Error, Result};
pub use estimators::{empirical_quantile, fit_gp_mle, fit_tail, gp_quantile, GpFit, TailModel};
pub use rng::Rng;
pub use sample::Sample;

/// Version string recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
