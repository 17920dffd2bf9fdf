//! The two competing tail quantile estimators: the empirical order
//! statistic and the GP peaks-over-threshold extrapolation.

pub mod empirical;
pub mod gp;

pub use empirical::{empirical_quantile, order_statistic_rank, quantile_of_sorted};
pub use gp::{
    fit_gp_mle, fit_tail, gp_log_likelihood, gp_quantile, tail_quantile, GpFit, TailModel,
};
