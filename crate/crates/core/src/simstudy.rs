//! Monte Carlo comparison of the empirical and GP tail estimators.
//!
//! Each replicate draws `n` observations from its own substream, evaluates
//! the empirical quantile and the GP extrapolation (threshold at the
//! empirical `threshold_level` quantile) on a grid of extreme levels, and
//! the replicates are reduced in index order. Results therefore depend only
//! on the configuration, never on the number of worker threads.

use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::{Sampler, StudyDist};
use crate::error::{domain, Error, Result};
use crate::estimators::{fit_tail, quantile_of_sorted};
use crate::rng::Rng;

/// Key offset separating the expected-maximum streams from replicate streams.
const EMAX_KEY: u64 = 0x6a09_e667_f3bc_c908;
const EMAX_BATCH: usize = 1000;
/// GP failure rate above which a summary is flagged.
pub const MAX_FAIL_RATE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyConfig {
    #[serde(serialize_with = "serialize_dist")]
    pub dist: StudyDist,
    pub n: usize,
    pub reps: usize,
    pub tau_grid: Vec<f64>,
    pub threshold_level: f64,
    pub seed: u64,
    /// Replicates used for the Monte Carlo estimate of `E[max]`.
    pub emax_reps: usize,
}

fn serialize_dist<S: serde::Serializer>(d: &StudyDist, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&d.name())
}

impl StudyConfig {
    pub const DEFAULT_N: usize = 1000;
    pub const DEFAULT_REPS: usize = 10_000;
    pub const DEFAULT_TAU_MIN: f64 = 0.99;
    pub const DEFAULT_TAU_MAX: f64 = 0.99999;
    pub const DEFAULT_GRID: usize = 50;
    pub const DEFAULT_THRESHOLD: f64 = 0.95;
    pub const DEFAULT_SEED: u64 = 20_240_521;
    pub const DEFAULT_EMAX_REPS: usize = 100_000;

    /// Defaults of the published study for one distribution.
    pub fn new(dist: StudyDist) -> Self {
        Self {
            dist,
            n: Self::DEFAULT_N,
            reps: Self::DEFAULT_REPS,
            tau_grid: log_tau_grid(Self::DEFAULT_TAU_MIN, Self::DEFAULT_TAU_MAX, Self::DEFAULT_GRID)
                .expect("default grid is valid"),
            threshold_level: Self::DEFAULT_THRESHOLD,
            seed: Self::DEFAULT_SEED,
            emax_reps: Self::DEFAULT_EMAX_REPS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 100 {
            return domain(format!("sample size must be at least 100, got {}", self.n));
        }
        if self.reps < 2 {
            return domain(format!("need at least 2 replicates, got {}", self.reps));
        }
        if self.emax_reps < 1000 {
            return domain(format!("E[max] needs at least 1000 replicates, got {}", self.emax_reps));
        }
        if !(self.threshold_level > 0.0 && self.threshold_level < 1.0) {
            return domain(format!("threshold level must lie in (0, 1), got {}", self.threshold_level));
        }
        if self.tau_grid.is_empty() {
            return domain("tau grid is empty");
        }
        if self.tau_grid.windows(2).any(|w| !(w[0] < w[1])) {
            return domain("tau grid must be strictly increasing");
        }
        for &t in &self.tau_grid {
            if !(t > 0.0 && t < 1.0) {
                return domain(format!("tau grid entry {t} outside (0, 1)"));
            }
            if t < self.threshold_level {
                return domain(format!(
                    "tau grid entry {t} lies below the threshold level {}",
                    self.threshold_level
                ));
            }
        }
        Ok(())
    }
}

/// `points` levels from `tau_min` to `tau_max`, equally spaced in
/// `log10(1 - tau)`.
pub fn log_tau_grid(tau_min: f64, tau_max: f64, points: usize) -> Result<Vec<f64>> {
    if !(tau_min > 0.0 && tau_min < 1.0 && tau_max > 0.0 && tau_max < 1.0) {
        return domain(format!("tau range [{tau_min}, {tau_max}] must lie in (0, 1)"));
    }
    if points == 1 {
        return if tau_min == tau_max {
            Ok(vec![tau_min])
        } else {
            domain("a one-point grid needs tau_min == tau_max")
        };
    }
    if points < 2 || !(tau_min < tau_max) {
        return domain(format!(
            "need tau_min < tau_max and at least 2 points, got [{tau_min}, {tau_max}] with {points}"
        ));
    }
    let a = (1.0 - tau_min).log10();
    let b = (1.0 - tau_max).log10();
    let mut grid: Vec<f64> = (0..points)
        .map(|i| 1.0 - 10f64.powf(a + (b - a) * i as f64 / (points - 1) as f64))
        .collect();
    grid[0] = tau_min;
    grid[points - 1] = tau_max;
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return domain("tau grid too dense to be strictly increasing in floating point");
    }
    Ok(grid)
}

/// Per-level estimates from one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateResult {
    pub index: usize,
    pub sample_max: f64,
    pub emp: Vec<f64>,
    /// `None` when the GP fit failed.
    pub gp: Option<Vec<f64>>,
    pub boundary: bool,
    pub failure: Option<String>,
}

/// Draw replicate `rep_index` from its substream and evaluate both
/// estimators over the grid. GP fit failures are recorded, not raised.
pub fn run_replicate(cfg: &StudyConfig, rep_index: usize) -> Result<ReplicateResult> {
    if rep_index >= cfg.reps {
        return domain(format!("replicate index {rep_index} out of range (reps = {})", cfg.reps));
    }
    let mut rng = Rng::substream(cfg.seed, rep_index as u64);
    let sample = cfg.dist.sample(cfg.n, &mut rng)?;
    let sorted = sample.sorted();
    let emp = cfg.tau_grid.iter().map(|&t| quantile_of_sorted(sorted, t)).collect();

    let (gp, boundary, failure) = match fit_tail(&sample, cfg.threshold_level) {
        Ok(tail) => match cfg
            .tau_grid
            .iter()
            .map(|&t| tail.quantile(t))
            .collect::<Result<Vec<f64>>>()
        {
            Ok(q) if q.iter().all(|v| v.is_finite()) => (Some(q), tail.boundary, None),
            Ok(_) => (None, tail.boundary, Some("non-finite extrapolation".to_string())),
            Err(e) => (None, tail.boundary, Some(e.to_string())),
        },
        Err(e) => (None, false, Some(e.to_string())),
    };

    Ok(ReplicateResult {
        index: rep_index,
        sample_max: sample.max(),
        emp,
        gp,
        boundary,
        failure,
    })
}

fn with_threads<T: Send>(threads: usize, job: impl FnOnce() -> T + Send) -> T {
    if threads == 1 {
        return job();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(job),
        Err(_) => job(),
    }
}

/// All replicates of a study, in index order. `threads = 0` uses rayon's
/// default pool size.
pub fn run_replicates(cfg: &StudyConfig, threads: usize) -> Result<Vec<ReplicateResult>> {
    cfg.validate()?;
    with_threads(threads, || {
        (0..cfg.reps)
            .into_par_iter()
            .map(|i| run_replicate(cfg, i))
            .collect()
    })
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub reps: usize,
}

impl McEstimate {
    pub fn from_values(values: &[f64]) -> Self {
        let m = values.len() as f64;
        let mean = values.iter().sum::<f64>() / m;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
        Self {
            mean,
            std_error: (var / m).sqrt(),
            reps: values.len(),
        }
    }
}

/// Monte Carlo estimate of `E[max(Y_1..Y_n)]` from `mc_reps` independent
/// samples. Batches draw from fixed substreams, so the estimate is the same
/// for any thread count.
pub fn estimate_expected_max<S: Sampler + ?Sized>(
    dist: &S,
    n: usize,
    mc_reps: usize,
    seed: u64,
    threads: usize,
) -> Result<McEstimate> {
    if mc_reps < 1000 {
        return domain(format!("E[max] needs at least 1000 replicates, got {mc_reps}"));
    }
    if n == 0 {
        return domain("sample size must be at least 1");
    }
    let batches = mc_reps.div_ceil(EMAX_BATCH);
    let maxima: Vec<Vec<f64>> = with_threads(threads, || {
        (0..batches)
            .into_par_iter()
            .map(|b| {
                let mut rng = Rng::substream(seed ^ EMAX_KEY, b as u64);
                let count = EMAX_BATCH.min(mc_reps - b * EMAX_BATCH);
                (0..count)
                    .map(|_| (0..n).map(|_| dist.draw(&mut rng)).fold(f64::NEG_INFINITY, f64::max))
                    .collect()
            })
            .collect()
    });
    let all: Vec<f64> = maxima.into_iter().flatten().collect();
    Ok(McEstimate::from_values(&all))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub tau: f64,
    pub true_q: f64,
    pub emp_mean: f64,
    pub emp_lo: f64,
    pub emp_hi: f64,
    pub gp_mean: f64,
    pub gp_lo: f64,
    pub gp_hi: f64,
}

/// Across-replicate aggregates of a study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimSummary {
    pub dist: String,
    pub n: usize,
    pub reps: usize,
    pub rows: Vec<SummaryRow>,
    pub e_max: McEstimate,
    /// Mean and standard error of the replicates' own sample maxima.
    pub mean_sample_max: McEstimate,
    pub gp_fail_count: usize,
    pub boundary_count: usize,
    /// Failure rate reached [`MAX_FAIL_RATE`].
    pub gp_fail_flag: bool,
}

/// Mean and 2.5%/97.5% order-statistic envelope of `values`.
pub fn envelope(values: &[f64]) -> (f64, f64, f64) {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    (mean, quantile_of_sorted(&sorted, 0.025), quantile_of_sorted(&sorted, 0.975))
}

/// Reduce replicates (in index order) to a summary. GP aggregates use only
/// the replicates whose fit succeeded.
pub fn aggregate(cfg: &StudyConfig, reps: &[ReplicateResult], e_max: McEstimate) -> Result<SimSummary> {
    if reps.len() < 2 {
        return domain(format!("need at least 2 replicates to aggregate, got {}", reps.len()));
    }
    let mut ordered: Vec<&ReplicateResult> = reps.iter().collect();
    ordered.sort_by_key(|r| r.index);

    let ok: Vec<&Vec<f64>> = ordered.iter().filter_map(|r| r.gp.as_ref()).collect();
    let gp_fail_count = ordered.len() - ok.len();
    let boundary_count = ordered.iter().filter(|r| r.gp.is_some() && r.boundary).count();

    let mut rows = Vec::with_capacity(cfg.tau_grid.len());
    for (k, &tau) in cfg.tau_grid.iter().enumerate() {
        if ok.len() < 2 {
            return Err(Error::Aggregation {
                tau,
                reason: format!("only {} successful GP fits out of {}", ok.len(), ordered.len()),
            });
        }
        let emp: Vec<f64> = ordered.iter().map(|r| r.emp[k]).collect();
        let gp: Vec<f64> = ok.iter().map(|g| g[k]).collect();
        let (emp_mean, emp_lo, emp_hi) = envelope(&emp);
        let (gp_mean, gp_lo, gp_hi) = envelope(&gp);
        rows.push(SummaryRow {
            tau,
            true_q: cfg.dist.true_quantile(tau)?,
            emp_mean,
            emp_lo,
            emp_hi,
            gp_mean,
            gp_lo,
            gp_hi,
        });
    }

    let maxima: Vec<f64> = ordered.iter().map(|r| r.sample_max).collect();
    Ok(SimSummary {
        dist: cfg.dist.name(),
        n: cfg.n,
        reps: ordered.len(),
        rows,
        e_max,
        mean_sample_max: McEstimate::from_values(&maxima),
        gp_fail_count,
        boundary_count,
        gp_fail_flag: gp_fail_count as f64 >= MAX_FAIL_RATE * ordered.len() as f64,
    })
}

/// Run a full study: replicates, `E[max]` reference and aggregation.
pub fn run_study(cfg: &StudyConfig, threads: usize) -> Result<SimSummary> {
    let reps = run_replicates(cfg, threads)?;
    let e_max = estimate_expected_max(&cfg.dist, cfg.n, cfg.emax_reps, cfg.seed, threads)?;
    aggregate(cfg, &reps, e_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::GpParams;

    fn small(dist: StudyDist, reps: usize) -> StudyConfig {
        StudyConfig {
            reps,
            emax_reps: 1000,
            ..StudyConfig::new(dist)
        }
    }

    #[test]
    fn default_grid() {
        let g = log_tau_grid(0.99, 0.99999, 50).unwrap();
        assert_eq!(g.len(), 50);
        assert_eq!(g[0], 0.99);
        assert_eq!(g[49], 0.99999);
        let logs: Vec<f64> = g.iter().map(|t| (1.0 - t).log10()).collect();
        for w in logs.windows(2) {
            assert!((w[0] - w[1] - 3.0 / 49.0).abs() < 1e-9);
        }
        assert!(log_tau_grid(1.5, 0.9, 10).is_err());
        assert!(log_tau_grid(0.99, 0.9, 10).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = small(StudyDist::Normal01, 10);
        assert!(c.validate().is_ok());
        c.tau_grid = vec![0.9, 0.99];
        assert!(c.validate().is_err());
        let mut c = small(StudyDist::Normal01, 1);
        assert!(c.validate().is_err());
        c.reps = 2;
        c.n = 50;
        assert!(c.validate().is_err());
        c.n = 1000;
        c.tau_grid = vec![0.999, 0.99];
        assert!(c.validate().is_err());
    }

    #[test]
    fn replicate_is_deterministic_and_saturates() {
        let cfg = small(StudyDist::LogNormal01, 5);
        let a = run_replicate(&cfg, 3).unwrap();
        let b = run_replicate(&cfg, 3).unwrap();
        assert_eq!(a, b);
        for (k, &t) in cfg.tau_grid.iter().enumerate() {
            if t > 1.0 - 1.0 / cfg.n as f64 {
                assert_eq!(a.emp[k], a.sample_max);
            }
        }
        assert!(run_replicate(&cfg, 5).is_err());
    }

    #[test]
    fn exponential_study_dist_tracks_log_return_level() {
        let cfg = small(StudyDist::Gp(GpParams::new(1.0, 0.0).unwrap()), 200);
        let reps = run_replicates(&cfg, 1).unwrap();
        // Across replicates the GP estimate at each level is centred on the
        // truth, ln(1 / (1 - tau)), with spread set by 50 excesses.
        for (k, &t) in cfg.tau_grid.iter().enumerate() {
            let vals: Vec<f64> = reps.iter().filter_map(|r| r.gp.as_ref().map(|g| g[k])).collect();
            let (mean, lo, hi) = envelope(&vals);
            let truth = -(1.0 - t).ln();
            assert!(lo < truth && truth < hi, "tau={t}");
            assert!((mean - truth).abs() < 0.25 * truth, "tau={t}: {mean} vs {truth}");
        }
    }

    #[test]
    fn two_point_aggregation() {
        let (mean, lo, hi) = envelope(&[3.0, 1.0]);
        assert_eq!((mean, lo, hi), (2.0, 1.0, 3.0));
    }

    #[test]
    fn aggregation_error_names_tau() {
        let cfg = StudyConfig {
            tau_grid: vec![0.99, 0.999],
            ..small(StudyDist::Normal01, 3)
        };
        let reps: Vec<ReplicateResult> = (0..3)
            .map(|i| ReplicateResult {
                index: i,
                sample_max: 1.0,
                emp: vec![0.5, 1.0],
                gp: None,
                boundary: false,
                failure: Some("x".into()),
            })
            .collect();
        let e = McEstimate { mean: 0.0, std_error: 0.0, reps: 1000 };
        match aggregate(&cfg, &reps, e) {
            Err(Error::Aggregation { tau, .. }) => assert_eq!(tau, 0.99),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dropped_fits_only_leave_gp_aggregates() {
        let cfg = StudyConfig {
            tau_grid: vec![0.99],
            ..small(StudyDist::Normal01, 3)
        };
        let mk = |i: usize, gp: Option<f64>| ReplicateResult {
            index: i,
            sample_max: i as f64,
            emp: vec![i as f64],
            gp: gp.map(|v| vec![v]),
            boundary: false,
            failure: None,
        };
        let reps = vec![mk(0, Some(10.0)), mk(1, None), mk(2, Some(20.0))];
        let e = McEstimate { mean: 0.0, std_error: 0.0, reps: 1000 };
        let s = aggregate(&cfg, &reps, e).unwrap();
        assert_eq!(s.rows[0].emp_mean, 1.0);
        assert_eq!(s.rows[0].gp_mean, 15.0);
        assert_eq!(s.gp_fail_count, 1);
        assert!(s.gp_fail_flag);
    }

    struct PointMass(f64);

    impl Sampler for PointMass {
        fn draw(&self, _rng: &mut Rng) -> f64 {
            self.0
        }
    }

    #[test]
    fn expected_max_of_point_mass() {
        let e = estimate_expected_max(&PointMass(2.5), 10, 1000, 1, 1).unwrap();
        assert_eq!(e.mean, 2.5);
        assert_eq!(e.std_error, 0.0);
        assert!(estimate_expected_max(&PointMass(1.0), 10, 999, 1, 1).is_err());
    }

    #[test]
    fn expected_max_is_thread_invariant() {
        let a = estimate_expected_max(&StudyDist::Frechet3, 100, 3500, 4, 1).unwrap();
        let b = estimate_expected_max(&StudyDist::Frechet3, 100, 3500, 4, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.reps, 3500);
    }

    #[test]
    fn frechet_expected_max_self_consistent() {
        let a = estimate_expected_max(&StudyDist::Frechet3, 1000, 20_000, 1, 0).unwrap();
        let b = estimate_expected_max(&StudyDist::Frechet3, 1000, 20_000, 2, 0).unwrap();
        let combined = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
        assert!((a.mean - b.mean).abs() < 4.0 * combined);
    }

    #[test]
    fn summary_is_deterministic_and_thread_invariant() {
        let cfg = small(StudyDist::Gamma4, 40);
        let a = run_study(&cfg, 1).unwrap();
        let b = run_study(&cfg, 4).unwrap();
        assert_eq!(a, b);
        for r in &a.rows {
            assert!(r.emp_lo <= r.emp_mean && r.emp_mean <= r.emp_hi);
            assert!(r.gp_lo <= r.gp_mean && r.gp_mean <= r.gp_hi);
        }
    }
}
