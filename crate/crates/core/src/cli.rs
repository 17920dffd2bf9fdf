//! Command-line front end: `simulate`, `fit-tail` and `regress`.
//!
//! Exit codes: 0 on success, 1 for runtime or data errors, 2 for usage
//! errors. Every successful command writes `<out>.manifest.json` next to
//! its output.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::distributions::StudyDist;
use crate::estimators::fit_tail;
use crate::pinball::{fit_quantile_model, ModelForm, ModelKind, RegressionData, TrainConfig};
use crate::sample::Sample;
use crate::simstudy::{log_tau_grid, run_study, SimSummary, StudyConfig};

#[derive(Debug, Parser)]
#[command(name = "extremeq", version, about = "Extreme quantile estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compare empirical and GP tail quantile estimators by simulation.
    Simulate(SimulateArgs),
    /// Fit a GP tail above an empirical threshold and extrapolate.
    FitTail(FitTailArgs),
    /// Pinball-loss quantile regression.
    Regress(RegressArgs),
}

fn parse_probability(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if p > 0.0 && p < 1.0 {
        Ok(p)
    } else {
        Err(format!("{p} is not a probability in (0, 1)"))
    }
}

fn parse_threshold_quantile(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..1.0).contains(&p) {
        Ok(p)
    } else {
        Err(format!("{p} is not in [0, 1)"))
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// normal01, gamma4, lognormal01, frechet3 or all.
    #[arg(long, default_value = "all")]
    pub dist: String,
    #[arg(long, default_value_t = StudyConfig::DEFAULT_N)]
    pub n: usize,
    #[arg(long, default_value_t = StudyConfig::DEFAULT_REPS)]
    pub reps: usize,
    #[arg(long, default_value_t = StudyConfig::DEFAULT_TAU_MIN, value_parser = parse_probability)]
    pub tau_min: f64,
    #[arg(long, default_value_t = StudyConfig::DEFAULT_TAU_MAX, value_parser = parse_probability)]
    pub tau_max: f64,
    /// Number of levels, equally spaced in log10(1 - tau).
    #[arg(long, default_value_t = StudyConfig::DEFAULT_GRID)]
    pub grid: usize,
    #[arg(long, default_value_t = StudyConfig::DEFAULT_THRESHOLD, value_parser = parse_probability)]
    pub threshold: f64,
    #[arg(long, default_value_t = StudyConfig::DEFAULT_SEED)]
    pub seed: u64,
    /// Replicates for the Monte Carlo E[max] reference.
    #[arg(long, default_value_t = StudyConfig::DEFAULT_EMAX_REPS)]
    pub emax_reps: usize,
    /// Worker threads (0 = all cores). Output does not depend on it.
    #[arg(long, default_value_t = 0)]
    #[serde(skip)]
    pub threads: usize,
    #[arg(long, default_value = "simulation.csv")]
    pub out: PathBuf,
    /// Re-run the configuration recorded in a manifest.
    #[arg(long)]
    #[serde(skip)]
    pub from_manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitTailArgs {
    /// CSV with a header row, or `-` for stdin.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub column: String,
    /// Threshold as an empirical quantile level; 0 uses the sample minimum.
    #[arg(long, default_value_t = 0.95, value_parser = parse_threshold_quantile)]
    pub threshold_quantile: f64,
    /// Levels to extrapolate to (repeatable).
    #[arg(long, value_parser = parse_probability)]
    pub tau: Vec<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RegressArgs {
    /// CSV with a header row; every column but the response is a covariate.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub response: String,
    #[arg(long, value_parser = parse_probability)]
    pub tau: f64,
    /// constant, linear or mlp.
    #[arg(long, default_value = "linear")]
    pub model: String,
    /// CSV of query rows to predict at.
    #[arg(long)]
    pub predict: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Sidecar describing how an output was produced.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: serde_json::Value,
    pub wall_clock_seconds: f64,
    pub diagnostics: serde_json::Value,
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn write_manifest(out: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(manifest).map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(manifest_path(out), json + "\n")?;
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("serialisable")
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::FitTail(args) => cmd_fit_tail(args),
        Command::Regress(args) => cmd_regress(args),
    }
}

/// Study configurations for the requested distributions.
pub fn study_configs(args: &SimulateArgs) -> Result<Vec<StudyConfig>, CliError> {
    let dists: Vec<StudyDist> = if args.dist == "all" {
        StudyDist::STUDY.to_vec()
    } else {
        vec![args.dist.parse().map_err(|e: crate::Error| CliError::Usage(e.to_string()))?]
    };
    let grid = log_tau_grid(args.tau_min, args.tau_max, args.grid)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    dists
        .into_iter()
        .map(|dist| {
            let cfg = StudyConfig {
                dist,
                n: args.n,
                reps: args.reps,
                tau_grid: grid.clone(),
                threshold_level: args.threshold,
                seed: args.seed,
                emax_reps: args.emax_reps,
            };
            cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            Ok(cfg)
        })
        .collect()
}

/// Plot-ready CSV of study summaries.
pub fn summaries_csv(summaries: &[SimSummary]) -> String {
    let mut s = String::from(
        "dist,tau,true_q,emp_mean,emp_lo,emp_hi,gp_mean,gp_lo,gp_hi,e_max,gp_fail_count\n",
    );
    for sum in summaries {
        for r in &sum.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                sum.dist,
                r.tau,
                r.true_q,
                r.emp_mean,
                r.emp_lo,
                r.emp_hi,
                r.gp_mean,
                r.gp_lo,
                r.gp_hi,
                sum.e_max.mean,
                sum.gp_fail_count
            ));
        }
    }
    s
}

#[derive(Serialize)]
struct SimDiagnostics<'a> {
    dist: &'a str,
    gp_fail_count: usize,
    gp_fail_flag: bool,
    boundary_count: usize,
    e_max: f64,
    e_max_std_error: f64,
    mean_sample_max: f64,
    mean_sample_max_std_error: f64,
}

pub fn cmd_simulate(mut args: SimulateArgs) -> Result<(), CliError> {
    let start = Instant::now();
    if let Some(path) = args.from_manifest.clone() {
        let text = fs::read_to_string(&path)?;
        let manifest: RunManifest =
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let recorded: SimulateArgs = serde_json::from_value(manifest.config)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        args = SimulateArgs {
            threads: args.threads,
            out: args.out,
            from_manifest: None,
            ..recorded
        };
    }
    let configs = study_configs(&args)?;
    let summaries = configs
        .iter()
        .map(|cfg| run_study(cfg, args.threads))
        .collect::<Result<Vec<_>, _>>()?;
    fs::write(&args.out, summaries_csv(&summaries))?;

    for s in summaries.iter().filter(|s| s.gp_fail_flag) {
        eprintln!(
            "warning: {}: {} of {} GP fits failed",
            s.dist, s.gp_fail_count, s.reps
        );
    }
    let diagnostics: Vec<SimDiagnostics> = summaries
        .iter()
        .map(|s| SimDiagnostics {
            dist: &s.dist,
            gp_fail_count: s.gp_fail_count,
            gp_fail_flag: s.gp_fail_flag,
            boundary_count: s.boundary_count,
            e_max: s.e_max.mean,
            e_max_std_error: s.e_max.std_error,
            mean_sample_max: s.mean_sample_max.mean,
            mean_sample_max_std_error: s.mean_sample_max.std_error,
        })
        .collect();
    write_manifest(
        &args.out,
        &RunManifest {
            command: "simulate".into(),
            version: crate::VERSION.into(),
            config: to_json(&args),
            wall_clock_seconds: start.elapsed().as_secs_f64(),
            diagnostics: to_json(&diagnostics),
        },
    )
}

fn read_input(path: &Path) -> Result<String, CliError> {
    let text = if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        s
    } else {
        fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?
    };
    Ok(text)
}

/// Header and numeric rows of a CSV document.
pub fn parse_numeric_csv(text: &str, source: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Runtime(format!("{source}: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(CliError::Runtime(format!("{source}: missing header row")));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Runtime(format!("{source}: {e}")))?;
        let row = rec
            .iter()
            .zip(&headers)
            .map(|(field, name)| {
                field.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    CliError::Runtime(format!(
                        "{source}: row {}, column '{name}': '{field}' is not a finite number",
                        i + 1
                    ))
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Runtime(format!("{source}: no data rows")));
    }
    Ok((headers, rows))
}

fn column_index(headers: &[String], name: &str, source: &str) -> Result<usize, CliError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::Runtime(format!("{source}: missing column '{name}'")))
}

#[derive(Serialize)]
struct QuantileEntry {
    tau: f64,
    quantile: f64,
}

#[derive(Serialize)]
struct FitTailReport {
    column: String,
    n: usize,
    threshold_quantile: f64,
    u: f64,
    zeta_u: f64,
    n_exc: usize,
    sigma: f64,
    xi: f64,
    log_likelihood: f64,
    boundary: bool,
    quantiles: Vec<QuantileEntry>,
}

pub fn cmd_fit_tail(args: FitTailArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let source = args.input.display().to_string();
    let (headers, rows) = parse_numeric_csv(&read_input(&args.input)?, &source)?;
    let col = column_index(&headers, &args.column, &source)?;
    let sample = Sample::new(rows.iter().map(|r| r[col]).collect())?;
    let tail = fit_tail(&sample, args.threshold_quantile)?;
    let quantiles = args
        .tau
        .iter()
        .map(|&tau| Ok(QuantileEntry { tau, quantile: tail.quantile(tau)? }))
        .collect::<Result<Vec<_>, crate::Error>>()?;
    let report = FitTailReport {
        column: args.column.clone(),
        n: sample.len(),
        threshold_quantile: args.threshold_quantile,
        u: tail.u,
        zeta_u: tail.zeta_u,
        n_exc: tail.n_exc,
        sigma: tail.gp.sigma,
        xi: tail.gp.xi,
        log_likelihood: tail.log_likelihood,
        boundary: tail.boundary,
        quantiles,
    };
    write_json(&args.out, &report)?;
    write_manifest(
        &args.out,
        &RunManifest {
            command: "fit-tail".into(),
            version: crate::VERSION.into(),
            config: to_json(&args),
            wall_clock_seconds: start.elapsed().as_secs_f64(),
            diagnostics: serde_json::json!({ "boundary": tail.boundary }),
        },
    )
}

fn write_json<T: Serialize>(out: &Path, v: &T) -> Result<(), CliError> {
    let mut f = fs::File::create(out).map_err(|e| CliError::Runtime(format!("{}: {e}", out.display())))?;
    serde_json::to_writer_pretty(&mut f, v).map_err(|e| CliError::Runtime(e.to_string()))?;
    f.write_all(b"\n")?;
    Ok(())
}

#[derive(Serialize)]
#[serde(untagged)]
enum ModelParameters {
    Constant { beta: f64 },
    Linear { intercept: f64, weights: Vec<f64> },
    Mlp { layer_sizes: Vec<usize>, activation: crate::pinball::Activation, n_params: usize },
}

#[derive(Serialize)]
struct RegressReport {
    model: String,
    tau: f64,
    response: String,
    covariates: Vec<String>,
    n: usize,
    parameters: ModelParameters,
    train_loss: f64,
    warnings: Vec<String>,
    predictions: Vec<f64>,
}

pub fn cmd_regress(args: RegressArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let kind: ModelKind = args.model.parse().map_err(|e: crate::Error| CliError::Usage(e.to_string()))?;
    let source = args.input.display().to_string();
    let (headers, rows) = parse_numeric_csv(&read_input(&args.input)?, &source)?;
    let resp = column_index(&headers, &args.response, &source)?;
    let covariates: Vec<String> = headers.iter().filter(|h| **h != args.response).cloned().collect();
    let split = |row: &[f64], skip: Option<usize>| -> Vec<f64> {
        row.iter()
            .enumerate()
            .filter(|(j, _)| Some(*j) != skip)
            .map(|(_, v)| *v)
            .collect()
    };
    let y: Vec<f64> = rows.iter().map(|r| r[resp]).collect();
    let data = if covariates.is_empty() {
        RegressionData::unconditional(y)?
    } else {
        RegressionData::new(rows.iter().map(|r| split(r, Some(resp))).collect(), y)?
    };

    let cfg = TrainConfig {
        seed: args.seed,
        ..Default::default()
    };
    let model = fit_quantile_model(&data, args.tau, kind, &cfg)?;

    let mut predictions = Vec::new();
    if let Some(path) = &args.predict {
        let psource = path.display().to_string();
        let (pheaders, prows) = parse_numeric_csv(&read_input(path)?, &psource)?;
        let skip = pheaders.iter().position(|h| *h == args.response);
        let q = covariates.len();
        for row in &prows {
            let x = split(row, skip);
            if kind != ModelKind::Constant && x.len() != q {
                return Err(CliError::Runtime(format!(
                    "{psource}: dimension mismatch, query rows have {} covariates but the model was trained on {q}",
                    x.len()
                )));
            }
            predictions.push(model.predict(&x)?);
        }
    }

    let parameters = match &model.form {
        ModelForm::Constant { beta } => ModelParameters::Constant { beta: *beta },
        ModelForm::Linear { weights, intercept } => ModelParameters::Linear {
            intercept: *intercept,
            weights: weights.clone(),
        },
        ModelForm::Mlp(net) => ModelParameters::Mlp {
            layer_sizes: net.sizes(),
            activation: net.activation,
            n_params: net.n_params(),
        },
    };
    let report = RegressReport {
        model: kind.to_string(),
        tau: args.tau,
        response: args.response.clone(),
        covariates,
        n: data.n(),
        parameters,
        train_loss: model.train_loss,
        warnings: model.warnings.clone(),
        predictions,
    };
    write_json(&args.out, &report)?;
    write_manifest(
        &args.out,
        &RunManifest {
            command: "regress".into(),
            version: crate::VERSION.into(),
            config: to_json(&args),
            wall_clock_seconds: start.elapsed().as_secs_f64(),
            diagnostics: serde_json::json!({ "warnings": model.warnings }),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probability_parser() {
        assert_eq!(parse_probability("0.5"), Ok(0.5));
        assert!(parse_probability("1.5").is_err());
        assert!(parse_probability("0").is_err());
        assert!(parse_probability("abc").is_err());
        assert_eq!(parse_threshold_quantile("0"), Ok(0.0));
        assert!(parse_threshold_quantile("1").is_err());
    }

    #[test]
    fn cli_parses_defaults() {
        let cli = Cli::try_parse_from(["extremeq", "simulate"]).unwrap();
        let Command::Simulate(a) = cli.command else { panic!() };
        assert_eq!(a.n, 1000);
        assert_eq!(a.reps, 10_000);
        assert_eq!(a.grid, 50);
        assert_eq!(study_configs(&a).unwrap().len(), 4);
        assert!(Cli::try_parse_from(["extremeq", "simulate", "--tau-min", "1.5"]).is_err());
    }

    #[test]
    fn numeric_csv_errors() {
        assert!(parse_numeric_csv("a,b\n", "t").is_err());
        assert!(parse_numeric_csv("a,b\n1,x\n", "t").is_err());
        let (h, r) = parse_numeric_csv("a, b\n1, 2\n3,4\n", "t").unwrap();
        assert_eq!(h, vec!["a", "b"]);
        assert_eq!(r, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
    }

    #[test]
    fn manifest_sidecar_path() {
        assert_eq!(manifest_path(Path::new("out/sim.csv")), PathBuf::from("out/sim.csv.manifest.json"));
    }
}
