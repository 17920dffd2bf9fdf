//! Pinball-loss quantile regression: a quantile function `q_tau(x)` is
//! fitted by minimising the mean check loss over the training pairs.
//! Each level is fitted on its own; nothing ties fits at different levels
//! together, so [`count_crossings`] reports crossings instead of preventing
//! them.

pub mod data;
pub mod linear;
pub mod loss;
pub mod mlp;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{check_probability, domain, Error, Result};
use crate::estimators::quantile_of_sorted;
use crate::rng::Rng;

pub use data::RegressionData;
pub use linear::LinearConfig;
pub use loss::{empirical_risk, pinball_loss, rho, rho_derivative};
pub use mlp::{Activation, Mlp, MlpConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Constant,
    Linear,
    Mlp,
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(ModelKind::Constant),
            "linear" => Ok(ModelKind::Linear),
            "mlp" => Ok(ModelKind::Mlp),
            other => domain(format!("unknown model form '{other}'")),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Constant => "constant",
            ModelKind::Linear => "linear",
            ModelKind::Mlp => "mlp",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainConfig {
    pub seed: u64,
    pub linear: LinearConfig,
    pub mlp: MlpConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "form", rename_all = "lowercase")]
pub enum ModelForm {
    Constant { beta: f64 },
    Linear { weights: Vec<f64>, intercept: f64 },
    Mlp(Mlp),
}

/// A fitted quantile function at level `tau`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileModel {
    pub tau: f64,
    pub form: ModelForm,
    /// Mean pinball risk on the training set.
    pub train_loss: f64,
    pub warnings: Vec<String>,
}

impl QuantileModel {
    pub fn kind(&self) -> ModelKind {
        match self.form {
            ModelForm::Constant { .. } => ModelKind::Constant,
            ModelForm::Linear { .. } => ModelKind::Linear,
            ModelForm::Mlp(_) => ModelKind::Mlp,
        }
    }

    /// Covariate dimension, `None` for constant models.
    pub fn input_dim(&self) -> Option<usize> {
        match &self.form {
            ModelForm::Constant { .. } => None,
            ModelForm::Linear { weights, .. } => Some(weights.len()),
            ModelForm::Mlp(net) => Some(net.input_dim()),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if let Some(q) = self.input_dim() {
            if x.len() != q {
                return domain(format!("expected {q} covariates, got {}", x.len()));
            }
        }
        Ok(match &self.form {
            ModelForm::Constant { beta } => *beta,
            ModelForm::Linear { weights, intercept } => {
                intercept + weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            }
            ModelForm::Mlp(net) => net.predict(x),
        })
    }

    /// Mean pinball risk on arbitrary data.
    pub fn risk(&self, data: &RegressionData) -> Result<f64> {
        let mut total = 0.0;
        for (x, y) in data.x().iter().zip(data.y()) {
            total += rho(y - self.predict(x)?, self.tau);
        }
        Ok(total / data.n() as f64)
    }
}

/// Deterministic forward evaluation of a fitted model.
pub fn predict(model: &QuantileModel, x: &[f64]) -> Result<f64> {
    model.predict(x)
}

/// Fit a quantile function of the given form by empirical pinball-risk
/// minimisation.
///
/// The constant fit is exact: it is the empirical `tau`-quantile of the
/// responses. Linear and neural fits never return a training risk above
/// the constant fit's.
pub fn fit_quantile_model(
    data: &RegressionData,
    tau: f64,
    kind: ModelKind,
    cfg: &TrainConfig,
) -> Result<QuantileModel> {
    check_probability("tau", tau)?;
    let mut sorted = data.y().to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let beta = quantile_of_sorted(&sorted, tau);
    let constant_risk = empirical_risk(data.y().iter().map(|y| y - beta), tau);

    match kind {
        ModelKind::Constant => Ok(QuantileModel {
            tau,
            form: ModelForm::Constant { beta },
            train_loss: constant_risk,
            warnings: Vec::new(),
        }),
        ModelKind::Linear => {
            let fit = linear::fit_linear(data, tau, beta, &cfg.linear)?;
            Ok(QuantileModel {
                tau,
                form: ModelForm::Linear {
                    weights: fit.weights,
                    intercept: fit.intercept,
                },
                train_loss: fit.risk,
                warnings: fit.warnings,
            })
        }
        ModelKind::Mlp => fit_mlp(data, tau, beta, constant_risk, cfg),
    }
}

fn fit_mlp(
    data: &RegressionData,
    tau: f64,
    beta: f64,
    constant_risk: f64,
    cfg: &TrainConfig,
) -> Result<QuantileModel> {
    let mut warnings = Vec::new();
    let moments = data.column_moments();
    let x_mean: Vec<f64> = moments.iter().map(|m| m.0).collect();
    let x_scale: Vec<f64> = moments
        .iter()
        .enumerate()
        .map(|(j, &(_, sd))| {
            if sd > 0.0 {
                sd
            } else {
                warnings.push(format!("covariate column {j} has zero variance"));
                1.0
            }
        })
        .collect();
    let (y_center, y_sd) = data::mean_sd(data.y());
    let y_scale = if y_sd > 0.0 { y_sd } else { 1.0 };

    let xs: Vec<Vec<f64>> = data
        .x()
        .iter()
        .map(|r| {
            r.iter()
                .zip(x_mean.iter().zip(&x_scale))
                .map(|(v, (m, s))| (v - m) / s)
                .collect()
        })
        .collect();
    let ys: Vec<f64> = data.y().iter().map(|y| (y - y_center) / y_scale).collect();

    let mut rng = Rng::new(cfg.seed);
    let start = (beta - y_center) / y_scale;
    let (mut net, _) = mlp::train(&xs, &ys, tau, start, &cfg.mlp, &mut rng);
    net.x_mean = x_mean;
    net.x_scale = x_scale;
    net.y_center = y_center;
    net.y_scale = y_scale;

    let mut model = QuantileModel {
        tau,
        form: ModelForm::Mlp(net),
        train_loss: 0.0,
        warnings,
    };
    let mut risk = model.risk(data)?;
    if !risk.is_finite() {
        let ModelForm::Mlp(net) = &model.form else { unreachable!() };
        return Err(Error::Convergence {
            what: "neural quantile fit",
            iterations: cfg.mlp.epochs,
            best: net.params(),
        });
    }
    if risk > constant_risk {
        // Zero output weights and a bias at the constant optimum represent
        // the constant fit exactly.
        let ModelForm::Mlp(net) = &mut model.form else { unreachable!() };
        let out = net.layers.last_mut().expect("output layer");
        out.weights.iter_mut().for_each(|w| *w = 0.0);
        out.biases[0] = start;
        risk = model.risk(data)?;
        model
            .warnings
            .push("network did not improve on the constant fit; constant output kept".into());
    }
    model.train_loss = risk;
    Ok(model)
}

/// Number of rows where fits ordered by increasing `tau` produce a
/// decreasing prediction somewhere along the sequence.
pub fn count_crossings(models: &[QuantileModel], xs: &[Vec<f64>]) -> Result<usize> {
    let mut order: Vec<&QuantileModel> = models.iter().collect();
    order.sort_by(|a, b| a.tau.total_cmp(&b.tau));
    let mut crossings = 0;
    for x in xs {
        let preds = order
            .iter()
            .map(|m| m.predict(x))
            .collect::<Result<Vec<f64>>>()?;
        if preds.windows(2).any(|w| w[1] < w[0]) {
            crossings += 1;
        }
    }
    Ok(crossings)
}
