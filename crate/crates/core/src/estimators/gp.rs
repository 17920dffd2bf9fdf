//! Generalised Pareto peaks-over-threshold: maximum-likelihood fitting of
//! excesses and tail extrapolation.

use serde::Serialize;

use crate::distributions::{GpParams, XI_ZERO_TOL};
use crate::error::{check_probability, domain, Error, Result};
use crate::estimators::empirical::empirical_quantile;
use crate::optim::{nelder_mead, NelderMeadConfig};
use crate::sample::Sample;

/// Fewest excesses accepted by the likelihood fit.
pub const MIN_EXCESSES: usize = 10;
/// Lower bound of the shape parameter (open).
pub const XI_LOWER: f64 = -0.5;
/// Fits whose shape lies within this distance of [`XI_LOWER`] are flagged
/// as boundary solutions.
pub const BOUNDARY_BAND: f64 = 1e-3;

const START_XI: f64 = 0.1;
const START_STEP: f64 = 0.1;
const RESTART_STEP: f64 = 1e-3;

/// GP log-likelihood of excesses; `-inf` when any excess falls outside
/// the support.
pub fn gp_log_likelihood(params: GpParams, excesses: &[f64]) -> f64 {
    let GpParams { sigma, xi } = params;
    let m = excesses.len() as f64;
    if xi.abs() < XI_ZERO_TOL {
        let total: f64 = excesses.iter().sum();
        return -m * sigma.ln() - total / sigma;
    }
    let mut acc = 0.0;
    for &z in excesses {
        let t = xi * z / sigma;
        if t <= -1.0 {
            return f64::NEG_INFINITY;
        }
        acc += t.ln_1p();
    }
    -m * sigma.ln() - (1.0 + 1.0 / xi) * acc
}

/// Result of a GP likelihood fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GpFit {
    pub params: GpParams,
    pub log_likelihood: f64,
    /// The optimum sits on the `xi > -0.5` constraint.
    pub boundary: bool,
    pub iterations: usize,
}

/// Maximum-likelihood GP fit to positive excesses, constrained to
/// `xi > -0.5`. The search runs over `(ln sigma, xi)` from
/// `(ln mean_excess, 0.1)`, and is restarted once from its optimum with a
/// small simplex.
pub fn fit_gp_mle(excesses: &[f64]) -> Result<GpFit> {
    let m = excesses.len();
    if m < MIN_EXCESSES {
        return Err(Error::InsufficientData {
            what: "excesses",
            needed: MIN_EXCESSES,
            got: m,
        });
    }
    if let Some(bad) = excesses.iter().find(|z| !(z.is_finite() && **z > 0.0)) {
        return domain(format!("excesses must be finite and > 0, got {bad}"));
    }
    if excesses.iter().all(|&z| z == excesses[0]) {
        return Err(Error::DegenerateSample(m));
    }

    let neg_ll = |theta: &[f64]| {
        let xi = theta[1];
        if xi <= XI_LOWER {
            return f64::INFINITY;
        }
        let params = GpParams {
            sigma: theta[0].exp(),
            xi,
        };
        -gp_log_likelihood(params, excesses)
    };

    let mean = excesses.iter().sum::<f64>() / m as f64;
    let cfg = NelderMeadConfig::default();
    let first = nelder_mead(
        neg_ll,
        &[mean.ln(), START_XI],
        &[START_STEP, START_STEP],
        &cfg,
    );
    let second = nelder_mead(neg_ll, &first.x, &[RESTART_STEP, RESTART_STEP], &cfg);
    let iterations = first.iterations + second.iterations;
    let best = if second.value <= first.value {
        &second
    } else {
        &first
    };

    if !(first.converged || second.converged) || !best.value.is_finite() {
        return Err(Error::Convergence {
            what: "GP likelihood fit",
            iterations,
            best: vec![best.x[0].exp(), best.x[1]],
        });
    }

    let params = GpParams::new(best.x[0].exp(), best.x[1])?;
    Ok(GpFit {
        params,
        log_likelihood: -best.value,
        boundary: params.xi - XI_LOWER < BOUNDARY_BAND,
        iterations,
    })
}

/// Threshold, exceedance fraction and fitted GP of a peaks-over-threshold
/// model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailModel {
    pub u: f64,
    pub zeta_u: f64,
    pub gp: GpParams,
    pub n_exc: usize,
    pub n: usize,
    pub log_likelihood: f64,
    pub boundary: bool,
}

/// Fit a GP to the strict exceedances of the empirical `threshold_level`
/// quantile. A level of exactly 0 takes the sample minimum as threshold.
pub fn fit_tail(sample: &Sample, threshold_level: f64) -> Result<TailModel> {
    let u = if threshold_level == 0.0 {
        sample.min()
    } else {
        check_probability("threshold level", threshold_level)?;
        empirical_quantile(sample, threshold_level)?
    };
    let sorted = sample.sorted();
    let first_above = sorted.partition_point(|&y| y <= u);
    let excesses: Vec<f64> = sorted[first_above..].iter().map(|&y| y - u).collect();
    let n_exc = excesses.len();
    if n_exc < MIN_EXCESSES {
        return Err(Error::InsufficientData {
            what: "threshold exceedances",
            needed: MIN_EXCESSES,
            got: n_exc,
        });
    }
    let fit = fit_gp_mle(&excesses)?;
    Ok(TailModel {
        u,
        zeta_u: n_exc as f64 / sample.len() as f64,
        gp: fit.params,
        n_exc,
        n: sample.len(),
        log_likelihood: fit.log_likelihood,
        boundary: fit.boundary,
    })
}

/// Extrapolated quantile `u + (sigma/xi) [((1 - tau)/zeta)^(-xi) - 1]`
/// (`u + sigma ln(zeta / (1 - tau))` in the exponential limit). Defined for
/// `tau >= 1 - zeta`; returns `u` exactly on the boundary.
pub fn tail_quantile(u: f64, zeta_u: f64, gp: GpParams, tau: f64) -> Result<f64> {
    check_probability("tau", tau)?;
    if !(zeta_u > 0.0 && zeta_u <= 1.0) {
        return domain(format!("exceedance fraction must lie in (0, 1], got {zeta_u}"));
    }
    let p = 1.0 - tau;
    if p >= zeta_u {
        if tau < 1.0 - zeta_u {
            return domain(format!(
                "tau = {tau} lies below the extrapolation region (tau >= {}); use the empirical quantile",
                1.0 - zeta_u
            ));
        }
        return Ok(u);
    }
    let log_ratio = (p / zeta_u).ln();
    let GpParams { sigma, xi } = gp;
    Ok(if xi.abs() < XI_ZERO_TOL {
        u - sigma * log_ratio
    } else {
        u + sigma / xi * (-xi * log_ratio).exp_m1()
    })
}

impl TailModel {
    pub fn quantile(&self, tau: f64) -> Result<f64> {
        tail_quantile(self.u, self.zeta_u, self.gp, tau)
    }
}

/// Extrapolated `tau`-quantile of a fitted tail model.
pub fn gp_quantile(model: &TailModel, tau: f64) -> Result<f64> {
    model.quantile(tau)
}
