//! Ground-truth distributions of the simulation study and the generalised
//! Pareto family: sampling, CDF, density and inverse CDF.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{check_probability, domain, Error, Result};
use crate::rng::Rng;
use crate::sample::Sample;

/// Below this magnitude of the shape parameter the GP evaluators use the
/// exponential limit.
pub const XI_ZERO_TOL: f64 = 1e-8;

const GAMMA_SHAPE: f64 = 4.0;
const GAMMA_SCALE: f64 = 0.25;
const FRECHET_SHAPE: f64 = 3.0;

/// Scale/shape pair of the generalised Pareto distribution.
///
/// The support is `[0, inf)` for `xi >= 0` and `[0, -sigma/xi]` for `xi < 0`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GpParams {
    pub sigma: f64,
    pub xi: f64,
}

impl GpParams {
    pub fn new(sigma: f64, xi: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return domain(format!("GP scale must be finite and > 0, got {sigma}"));
        }
        if !xi.is_finite() {
            return domain(format!("GP shape must be finite, got {xi}"));
        }
        Ok(Self { sigma, xi })
    }

    fn is_exponential(&self) -> bool {
        self.xi.abs() < XI_ZERO_TOL
    }

    /// Right endpoint of the support (`inf` unless `xi < 0`).
    pub fn upper_endpoint(&self) -> f64 {
        if self.xi < 0.0 && !self.is_exponential() {
            -self.sigma / self.xi
        } else {
            f64::INFINITY
        }
    }

    pub fn cdf(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        if z >= self.upper_endpoint() {
            return 1.0;
        }
        if self.is_exponential() {
            return -(-z / self.sigma).exp_m1();
        }
        let log_surv = -(self.xi * z / self.sigma).ln_1p() / self.xi;
        -log_surv.exp_m1()
    }

    /// Log-density; `-inf` outside the support.
    pub fn log_pdf(&self, z: f64) -> f64 {
        if z < 0.0 || z > self.upper_endpoint() {
            return f64::NEG_INFINITY;
        }
        if self.is_exponential() {
            return -self.sigma.ln() - z / self.sigma;
        }
        let t = self.xi * z / self.sigma;
        if t <= -1.0 {
            return f64::NEG_INFINITY;
        }
        -self.sigma.ln() - (1.0 + 1.0 / self.xi) * t.ln_1p()
    }

    pub fn pdf(&self, z: f64) -> f64 {
        self.log_pdf(z).exp()
    }

    /// Inverse CDF for `p` in `[0, 1)`.
    pub fn quantile(&self, p: f64) -> f64 {
        let log_surv = (-p).ln_1p();
        if self.is_exponential() {
            -self.sigma * log_surv
        } else {
            self.sigma / self.xi * (-self.xi * log_surv).exp_m1()
        }
    }
}

/// The distributions of the simulation study, plus a GP case for
/// well-specified checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StudyDist {
    /// Standard normal.
    Normal01,
    /// Gamma with shape 4 and scale 1/4 (mean 1).
    Gamma4,
    /// Log-normal with log-mean 0 and log-variance 1.
    LogNormal01,
    /// Frechet with shape 3 and lower endpoint 0.
    Frechet3,
    Gp(GpParams),
}

impl StudyDist {
    /// The four distributions of the empirical-vs-GP comparison, in order of
    /// increasing tail heaviness.
    pub const STUDY: [StudyDist; 4] = [
        StudyDist::Normal01,
        StudyDist::Gamma4,
        StudyDist::LogNormal01,
        StudyDist::Frechet3,
    ];

    pub fn name(&self) -> String {
        match self {
            StudyDist::Normal01 => "normal01".into(),
            StudyDist::Gamma4 => "gamma4".into(),
            StudyDist::LogNormal01 => "lognormal01".into(),
            StudyDist::Frechet3 => "frechet3".into(),
            StudyDist::Gp(p) => format!("gp({},{})", p.sigma, p.xi),
        }
    }

    pub fn cdf(&self, y: f64) -> Result<f64> {
        if !y.is_finite() {
            return domain(format!("cdf argument must be finite, got {y}"));
        }
        Ok(match self {
            StudyDist::Normal01 => normal_cdf(y),
            StudyDist::Gamma4 => {
                if y <= 0.0 {
                    0.0
                } else {
                    gamma_lr(GAMMA_SHAPE, y / GAMMA_SCALE)
                }
            }
            StudyDist::LogNormal01 => {
                if y <= 0.0 {
                    0.0
                } else {
                    normal_cdf(y.ln())
                }
            }
            StudyDist::Frechet3 => {
                if y <= 0.0 {
                    0.0
                } else {
                    (-y.powf(-FRECHET_SHAPE)).exp()
                }
            }
            StudyDist::Gp(p) => p.cdf(y),
        })
    }

    pub fn pdf(&self, y: f64) -> Result<f64> {
        if !y.is_finite() {
            return domain(format!("pdf argument must be finite, got {y}"));
        }
        Ok(match self {
            StudyDist::Normal01 => normal_pdf(y),
            StudyDist::Gamma4 => gamma4_pdf(y),
            StudyDist::LogNormal01 => {
                if y <= 0.0 {
                    0.0
                } else {
                    normal_pdf(y.ln()) / y
                }
            }
            StudyDist::Frechet3 => {
                if y <= 0.0 {
                    0.0
                } else {
                    let t = y.powf(-FRECHET_SHAPE);
                    FRECHET_SHAPE * t / y * (-t).exp()
                }
            }
            StudyDist::Gp(p) => p.pdf(y),
        })
    }

    /// True `tau`-quantile `inf{y : F(y) >= tau}`.
    pub fn true_quantile(&self, tau: f64) -> Result<f64> {
        check_probability("tau", tau)?;
        Ok(match self {
            StudyDist::Normal01 => normal_quantile(tau),
            StudyDist::Gamma4 => gamma4_quantile(tau),
            StudyDist::LogNormal01 => normal_quantile(tau).exp(),
            StudyDist::Frechet3 => (-tau.ln()).powf(-1.0 / FRECHET_SHAPE),
            StudyDist::Gp(p) => p.quantile(tau),
        })
    }

    /// One draw.
    pub fn draw(&self, rng: &mut Rng) -> f64 {
        match self {
            StudyDist::Normal01 => rng.standard_normal(),
            StudyDist::Gamma4 => GAMMA_SCALE * gamma_marsaglia_tsang(GAMMA_SHAPE, rng),
            StudyDist::LogNormal01 => rng.standard_normal().exp(),
            StudyDist::Frechet3 => (-rng.uniform_open().ln()).powf(-1.0 / FRECHET_SHAPE),
            StudyDist::Gp(p) => p.quantile(rng.uniform()),
        }
    }

    /// `n` i.i.d. draws.
    pub fn sample(&self, n: usize, rng: &mut Rng) -> Result<Sample> {
        if n == 0 {
            return domain("sample size must be at least 1");
        }
        let values = (0..n).map(|_| self.draw(rng)).collect();
        Sample::new(values)
    }
}

impl fmt::Display for StudyDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for StudyDist {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal01" => Ok(StudyDist::Normal01),
            "gamma4" => Ok(StudyDist::Gamma4),
            "lognormal01" => Ok(StudyDist::LogNormal01),
            "frechet3" => Ok(StudyDist::Frechet3),
            other => {
                let params = other
                    .strip_prefix("gp(")
                    .and_then(|r| r.strip_suffix(')'))
                    .and_then(|r| r.split_once(','))
                    .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
                match params {
                    Some((sigma, xi)) => Ok(StudyDist::Gp(GpParams::new(sigma, xi)?)),
                    None => domain(format!("unknown distribution '{other}'")),
                }
            }
        }
    }
}

/// Anything that can produce i.i.d. real draws from a stream.
pub trait Sampler: Sync {
    fn draw(&self, rng: &mut Rng) -> f64;
}

impl Sampler for StudyDist {
    fn draw(&self, rng: &mut Rng) -> f64 {
        StudyDist::draw(self, rng)
    }
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal inverse CDF: Acklam's rational approximation (relative
/// error ~1e-9) followed by one Newton step on the erfc-based CDF.
pub fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    let x = if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail((-2.0 * (-p).ln_1p()).sqrt())
    };

    // Newton refinement; in the upper tail work with the survival function
    // so the residual keeps its relative precision.
    if x > 0.0 {
        let resid = 0.5 * erfc(x * FRAC_1_SQRT_2) - (1.0 - p);
        x + resid / normal_pdf(x)
    } else {
        let resid = normal_cdf(x) - p;
        x - resid / normal_pdf(x)
    }
}

fn gamma4_pdf(y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let z = y / GAMMA_SCALE;
    ((GAMMA_SHAPE - 1.0) * z.ln() - z - ln_gamma(GAMMA_SHAPE)).exp() / GAMMA_SCALE
}

/// Safeguarded Newton iteration inside a bisection bracket.
fn gamma4_quantile(tau: f64) -> f64 {
    let cdf = |y: f64| gamma_lr(GAMMA_SHAPE, y / GAMMA_SCALE);
    let mut lo = 0.0;
    let mut hi = 1.0;
    while cdf(hi) < tau {
        lo = hi;
        hi *= 2.0;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = cdf(x) - tau;
        if f == 0.0 {
            return x;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = gamma4_pdf(x);
        if d > 0.0 {
            let step = f / d;
            let cand = x - step;
            if cand > lo && cand < hi {
                x = cand;
                if step.abs() <= 1e-15 * x {
                    return x;
                }
                continue;
            }
        }
        x = 0.5 * (lo + hi);
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            return x;
        }
    }
    x
}

/// Marsaglia-Tsang squeeze/rejection sampler for Gamma(shape, 1), shape >= 1.
fn gamma_marsaglia_tsang(shape: f64, rng: &mut Rng) -> f64 {
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = rng.standard_normal();
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = rng.uniform_open();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 {
            return d * v;
        }
        if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}
