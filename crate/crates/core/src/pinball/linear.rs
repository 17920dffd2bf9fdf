//! Linear quantile regression.
//!
//! The check loss is replaced by a Huberised version of width `h`
//! (`0.5 huber_h(u) + (tau - 0.5) u`) and minimised by damped Newton
//! iterations on standardised data, shrinking `h` by a decade per stage
//! down to `1e-4 sd(y)`. A single pass of exact coordinate-wise
//! minimisation of the unsmoothed loss (a weighted quantile per
//! coordinate) finishes the fit, after first trying the vertex that
//! interpolates the rows nearest the smoothed fit.

use crate::error::{domain, Error, Result};
use crate::pinball::data::{mean_sd, RegressionData};
use crate::pinball::loss::{empirical_risk, rho};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearConfig {
    /// Final smoothing width relative to `sd(y)`.
    pub final_width: f64,
    /// Gradient sup-norm tolerance on the standardised problem.
    pub tol: f64,
    pub max_iter_per_stage: usize,
}

impl Default for LinearConfig {
    fn default() -> Self {
        Self {
            final_width: 1e-4,
            tol: 1e-8,
            max_iter_per_stage: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub risk: f64,
    pub warnings: Vec<String>,
}

fn smoothed(u: f64, tau: f64, h: f64) -> f64 {
    let a = u.abs();
    let huber = if a <= h { 0.5 * u * u / h + 0.5 * h } else { a };
    0.5 * huber + (tau - 0.5) * u
}

fn smoothed_derivative(u: f64, tau: f64, h: f64) -> f64 {
    0.5 * (u / h).clamp(-1.0, 1.0) + tau - 0.5
}

/// Solve the small dense system `a x = b` by Gaussian elimination with
/// partial pivoting. Returns `None` when singular.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

struct Design {
    /// Standardised rows with a leading 1 for the intercept.
    z: Vec<Vec<f64>>,
    y: Vec<f64>,
}

impl Design {
    fn residuals(&self, beta: &[f64]) -> impl Iterator<Item = f64> + '_ {
        let beta = beta.to_vec();
        self.z
            .iter()
            .zip(&self.y)
            .map(move |(z, y)| y - z.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>())
    }

    fn objective(&self, beta: &[f64], tau: f64, h: f64) -> f64 {
        let n = self.y.len() as f64;
        self.residuals(beta).map(|r| smoothed(r, tau, h)).sum::<f64>() / n
    }
}

/// Damped Newton on the smoothed objective. Returns whether the stage
/// converged (gradient below tolerance, or no further decrease possible in
/// floating point) and the iteration count.
fn newton_stage(
    d: &Design,
    beta: &mut Vec<f64>,
    tau: f64,
    h: f64,
    cfg: &LinearConfig,
) -> (bool, usize) {
    let p = beta.len();
    let n = d.y.len() as f64;
    let mut mu = 1e-10;
    let mut f = d.objective(beta, tau, h);
    for it in 0..cfg.max_iter_per_stage {
        let mut grad = vec![0.0; p];
        let mut hess = vec![vec![0.0; p]; p];
        for (z, r) in d.z.iter().zip(d.residuals(beta)) {
            let psi = smoothed_derivative(r, tau, h);
            for j in 0..p {
                grad[j] -= psi * z[j] / n;
            }
            if r.abs() < h {
                let w = 0.5 / (h * n);
                for j in 0..p {
                    for k in 0..=j {
                        hess[j][k] += w * z[j] * z[k];
                    }
                }
            }
        }
        let grad_norm = grad.iter().fold(0.0, |m: f64, g| m.max(g.abs()));
        if grad_norm < cfg.tol {
            return (true, it);
        }
        for j in 0..p {
            for k in 0..j {
                hess[k][j] = hess[j][k];
            }
        }

        let mut accepted = false;
        for _ in 0..60 {
            let mut damped = hess.clone();
            for (j, row) in damped.iter_mut().enumerate() {
                row[j] += mu;
            }
            let Some(step) = solve(damped, grad.iter().map(|g| -g).collect()) else {
                mu *= 10.0;
                continue;
            };
            let cand: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + s).collect();
            let fc = d.objective(&cand, tau, h);
            if fc <= f {
                let moved = step.iter().fold(0.0, |m: f64, s| m.max(s.abs()));
                *beta = cand;
                f = fc;
                mu = (mu * 0.1).max(1e-12);
                accepted = true;
                if moved < 1e-15 {
                    return (true, it);
                }
                break;
            }
            mu *= 10.0;
        }
        if !accepted {
            return (true, it);
        }
    }
    (false, cfg.max_iter_per_stage)
}

/// Candidate vertex of the exact problem: the fit interpolating the rows
/// with the smallest absolute residuals, one per free coefficient.
fn vertex_snap(
    data: &RegressionData,
    tau: f64,
    active: &[bool],
    intercept: &mut f64,
    weights: &mut [f64],
) {
    let rows = data.x();
    let y = data.y();
    let cols: Vec<usize> = (0..weights.len()).filter(|&j| active[j]).collect();
    let p = cols.len() + 1;
    let mut by_resid: Vec<(f64, usize)> = rows
        .iter()
        .zip(y)
        .enumerate()
        .map(|(i, (x, y))| {
            let r = y - *intercept - x.iter().zip(weights.iter()).map(|(a, b)| a * b).sum::<f64>();
            (r.abs(), i)
        })
        .collect();
    by_resid.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let basis: Vec<usize> = by_resid.iter().take(p).map(|&(_, i)| i).collect();
    let a: Vec<Vec<f64>> = basis
        .iter()
        .map(|&i| std::iter::once(1.0).chain(cols.iter().map(|&j| rows[i][j])).collect())
        .collect();
    let b: Vec<f64> = basis.iter().map(|&i| y[i]).collect();
    let Some(sol) = solve(a, b) else { return };
    if sol.iter().any(|v| !v.is_finite()) {
        return;
    }
    let mut cand = vec![0.0; weights.len()];
    for (k, &j) in cols.iter().enumerate() {
        cand[j] = sol[k + 1];
    }
    if risk_of(data, tau, sol[0], &cand) < risk_of(data, tau, *intercept, weights) {
        *intercept = sol[0];
        weights.copy_from_slice(&cand);
    }
}

/// Exact minimisation of the unsmoothed risk along each coordinate in turn.
fn coordinate_polish(data: &RegressionData, tau: f64, intercept: &mut f64, weights: &mut [f64]) {
    let q = weights.len();
    let rows = data.x();
    let y = data.y();
    let mut resid: Vec<f64> = rows
        .iter()
        .zip(y)
        .map(|(x, y)| y - *intercept - x.iter().zip(weights.iter()).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    for j in 0..=q {
        let coef = |i: usize| if j == 0 { 1.0 } else { rows[i][j - 1] };
        // Along coefficient j the risk is sum_i |c_i| rho_{tau_i}(t_i - delta)
        // with t_i = r_i / c_i and tau_i = tau or 1 - tau by the sign of c_i.
        let mut pts: Vec<(f64, f64)> = Vec::with_capacity(resid.len());
        let mut target = 0.0;
        for (i, r) in resid.iter().enumerate() {
            let c = coef(i);
            if c == 0.0 {
                continue;
            }
            let w = c.abs();
            target += w * if c > 0.0 { tau } else { 1.0 - tau };
            pts.push((r / c, w));
        }
        if pts.is_empty() {
            continue;
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut cum = 0.0;
        let mut delta = pts[pts.len() - 1].0;
        for &(t, w) in &pts {
            cum += w;
            if cum >= target {
                delta = t;
                break;
            }
        }
        let before: f64 = resid.iter().map(|&r| rho(r, tau)).sum();
        let after: f64 = resid
            .iter()
            .enumerate()
            .map(|(i, &r)| rho(r - coef(i) * delta, tau))
            .sum();
        if after < before {
            if j == 0 {
                *intercept += delta;
            } else {
                weights[j - 1] += delta;
            }
            for (i, r) in resid.iter_mut().enumerate() {
                *r -= coef(i) * delta;
            }
        }
    }
}

pub(crate) fn risk_of(data: &RegressionData, tau: f64, intercept: f64, weights: &[f64]) -> f64 {
    empirical_risk(
        data.x().iter().zip(data.y()).map(|(x, y)| {
            y - intercept - x.iter().zip(weights).map(|(a, b)| a * b).sum::<f64>()
        }),
        tau,
    )
}

/// Fit `q(x) = intercept + weights . x` by empirical pinball-risk
/// minimisation. `constant_beta` is the optimal constant, used as the start
/// and as the fallback that guarantees the fit never does worse than it.
pub fn fit_linear(
    data: &RegressionData,
    tau: f64,
    constant_beta: f64,
    cfg: &LinearConfig,
) -> Result<LinearFit> {
    let q = data.q();
    if data.n() < q + 1 {
        return domain(format!(
            "linear fit needs at least {} rows for {q} covariates, got {}",
            q + 1,
            data.n()
        ));
    }
    let moments = data.column_moments();
    let mut warnings = Vec::new();
    for (j, &(_, sd)) in moments.iter().enumerate() {
        if sd == 0.0 {
            warnings.push(format!("covariate column {j} has zero variance; its coefficient is fixed at 0"));
        }
    }
    let (y_mean, y_sd) = mean_sd(data.y());
    let y_sd = if y_sd > 0.0 { y_sd } else { 1.0 };

    let design = Design {
        z: data
            .x()
            .iter()
            .map(|row| {
                std::iter::once(1.0)
                    .chain(row.iter().zip(&moments).map(|(v, &(m, s))| {
                        if s > 0.0 {
                            (v - m) / s
                        } else {
                            0.0
                        }
                    }))
                    .collect()
            })
            .collect(),
        y: data.y().iter().map(|v| (v - y_mean) / y_sd).collect(),
    };

    let mut beta = vec![0.0; q + 1];
    beta[0] = (constant_beta - y_mean) / y_sd;
    let stages = (-cfg.final_width.log10()).round().max(0.0) as i32;
    let mut converged = false;
    let mut iterations = 0;
    for k in 0..=stages {
        let h = 10f64.powi(-k).max(cfg.final_width);
        let (ok, it) = newton_stage(&design, &mut beta, tau, h, cfg);
        converged = ok;
        iterations += it;
    }

    // Back to original units.
    let mut weights: Vec<f64> = moments
        .iter()
        .zip(&beta[1..])
        .map(|(&(_, s), b)| if s > 0.0 { y_sd * b / s } else { 0.0 })
        .collect();
    let mut intercept = y_mean + y_sd * beta[0]
        - weights.iter().zip(&moments).map(|(w, (m, _))| w * m).sum::<f64>();

    if !converged || beta.iter().any(|b| !b.is_finite()) {
        let mut best = vec![intercept];
        best.extend(&weights);
        return Err(Error::Convergence {
            what: "linear quantile fit",
            iterations,
            best,
        });
    }

    let active: Vec<bool> = moments.iter().map(|&(_, s)| s > 0.0).collect();
    vertex_snap(data, tau, &active, &mut intercept, &mut weights);
    coordinate_polish(data, tau, &mut intercept, &mut weights);
    let mut risk = risk_of(data, tau, intercept, &weights);
    let constant_risk = risk_of(data, tau, constant_beta, &vec![0.0; q]);
    if risk > constant_risk {
        intercept = constant_beta;
        weights = vec![0.0; q];
        risk = constant_risk;
        warnings.push("linear fit did not improve on the constant fit; constant kept".into());
    }
    Ok(LinearFit {
        weights,
        intercept,
        risk,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::quantile_of_sorted;
    use crate::Rng;

    fn constant_beta(y: &[f64], tau: f64) -> f64 {
        let mut s = y.to_vec();
        s.sort_by(f64::total_cmp);
        quantile_of_sorted(&s, tau)
    }

    #[test]
    fn smoothing_is_c1_and_close_to_check_loss() {
        let (tau, h) = (0.8, 0.01);
        for u in [-h, h] {
            let l = smoothed_derivative(u - 1e-12, tau, h);
            let r = smoothed_derivative(u + 1e-12, tau, h);
            assert!((l - r).abs() < 1e-9);
        }
        for u in [-1.0, -0.005, 0.0, 0.003, 2.0] {
            assert!((smoothed(u, tau, h) - rho(u, tau)).abs() <= 0.25 * h + 1e-15);
        }
    }

    #[test]
    fn solve_small_system() {
        let x = solve(vec![vec![2.0, 1.0], vec![1.0, 3.0]], vec![3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
        assert!(solve(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![1.0, 1.0]).is_none());
    }

    #[test]
    fn exact_line_is_recovered() {
        let x: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 / 10.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| 3.0 - 0.5 * r[0]).collect();
        let d = RegressionData::new(x, y.clone()).unwrap();
        let fit = fit_linear(&d, 0.3, constant_beta(&y, 0.3), &LinearConfig::default()).unwrap();
        assert!((fit.intercept - 3.0).abs() < 1e-9);
        assert!((fit.weights[0] + 0.5).abs() < 1e-9);
        assert!(fit.risk < 1e-9);
    }

    #[test]
    fn zero_variance_column_warns() {
        let mut rng = Rng::new(4);
        let x: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.standard_normal(), 7.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] + rng.standard_normal()).collect();
        let d = RegressionData::new(x, y.clone()).unwrap();
        let fit = fit_linear(&d, 0.5, constant_beta(&y, 0.5), &LinearConfig::default()).unwrap();
        assert_eq!(fit.weights[1], 0.0);
        assert!(fit.warnings.iter().any(|w| w.contains("column 1")));
    }

    #[test]
    fn too_few_rows() {
        let d = RegressionData::new(vec![vec![1.0, 2.0], vec![2.0, 1.0]], vec![0.0, 1.0]).unwrap();
        assert!(matches!(fit_linear(&d, 0.5, 0.0, &LinearConfig::default()), Err(Error::Domain(_))));
    }

    #[test]
    fn reaches_the_brute_force_vertex_optimum() {
        // The LP optimum of a one-covariate quantile regression interpolates
        // two observations, so a scan over all pairs finds it.
        for seed in 12..18 {
            let mut rng = Rng::new(seed);
            let x: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.uniform_range(-2.0, 2.0)]).collect();
            let y: Vec<f64> = x.iter().map(|r| 1.0 + r[0] + rng.standard_normal()).collect();
            let d = RegressionData::new(x.clone(), y.clone()).unwrap();
            for tau in [0.2, 0.5, 0.9] {
                let fit =
                    fit_linear(&d, tau, constant_beta(&y, tau), &LinearConfig::default()).unwrap();
                let mut best = f64::INFINITY;
                for i in 0..40 {
                    for j in i + 1..40 {
                        let slope = (y[j] - y[i]) / (x[j][0] - x[i][0]);
                        let icpt = y[i] - slope * x[i][0];
                        best = best.min(risk_of(&d, tau, icpt, &[slope]));
                    }
                }
                assert!(fit.risk <= best + 1e-12, "seed={seed} tau={tau}: {} vs {best}", fit.risk);
            }
        }
    }
}
