//! Derivative-free Nelder-Mead simplex minimisation.
//!
//! Infeasible points are expressed by the objective returning `+inf` (or
//! NaN, treated the same); the simplex never accepts them as improvements.

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadConfig {
    pub max_iter: usize,
    /// Converged when every vertex lies within this sup-norm distance of the best.
    pub size_tol: f64,
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self {
            max_iter: 500,
            size_tol: 1e-8,
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Minimise `f` from `x0` with an axis-aligned initial simplex of the given
/// per-coordinate `steps`.
pub fn nelder_mead<F>(f: F, x0: &[f64], steps: &[f64], cfg: &NelderMeadConfig) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let dim = x0.len();
    assert_eq!(steps.len(), dim);
    assert!(dim >= 1);
    let eval = |x: &[f64]| sanitize(f(x));

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for i in 0..dim {
        let mut x = x0.to_vec();
        x[i] += steps[i];
        let mut fx = eval(&x);
        if !fx.is_finite() {
            // Try the opposite direction before giving up on this vertex.
            x[i] = x0[i] - steps[i];
            fx = eval(&x);
        }
        simplex.push((x, fx));
    }

    let order = |s: &mut Vec<(Vec<f64>, f64)>| s.sort_by(|a, b| a.1.total_cmp(&b.1));
    let size = |s: &[(Vec<f64>, f64)]| {
        let best = &s[0].0;
        s[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(best).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    };
    let along = |from: &[f64], to: &[f64], t: f64| -> Vec<f64> {
        from.iter().zip(to).map(|(c, w)| c + t * (c - w)).collect()
    };

    order(&mut simplex);
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        if size(&simplex) < cfg.size_tol {
            return Minimum {
                x: simplex[0].0.clone(),
                value: simplex[0].1,
                iterations,
                converged: true,
            };
        }
        iterations += 1;

        let mut centroid = vec![0.0; dim];
        for (x, _) in &simplex[..dim] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / dim as f64;
            }
        }
        let (worst, f_worst) = simplex[dim].clone();
        let f_best = simplex[0].1;
        let f_second = simplex[dim - 1].1;

        let xr = along(&centroid, &worst, cfg.reflection);
        let fr = eval(&xr);
        if fr < f_best {
            let xe = along(&centroid, &worst, cfg.reflection * cfg.expansion);
            let fe = eval(&xe);
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < f_second {
            simplex[dim] = (xr, fr);
        } else {
            let (xc, fc) = if fr < f_worst {
                let xc = along(&centroid, &worst, cfg.reflection * cfg.contraction);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = along(&centroid, &worst, -cfg.contraction);
                let fc = eval(&xc);
                (xc, fc)
            };
            if fc < fr.min(f_worst) {
                simplex[dim] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = best
                        .iter()
                        .zip(&v.0)
                        .map(|(b, x)| b + cfg.shrink * (x - b))
                        .collect();
                    let fx = eval(&x);
                    *v = (x, fx);
                }
            }
        }
        order(&mut simplex);
    }

    let converged = size(&simplex) < cfg.size_tol;
    Minimum {
        x: simplex[0].0.clone(),
        value: simplex[0].1,
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + 10.0 * (x[1] + 2.0).powi(2);
        let m = nelder_mead(f, &[0.0, 0.0], &[0.5, 0.5], &NelderMeadConfig::default());
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-7);
        assert!((m.x[1] + 2.0).abs() < 1e-7);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
        let cfg = NelderMeadConfig {
            max_iter: 5000,
            ..Default::default()
        };
        let m = nelder_mead(f, &[-1.2, 1.0], &[0.1, 0.1], &cfg);
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn respects_infeasible_region() {
        // Minimum of the unconstrained bowl lies at x = -1, outside x > 0.
        let f = |x: &[f64]| {
            if x[0] <= 0.0 {
                f64::INFINITY
            } else {
                (x[0] + 1.0).powi(2) + x[1] * x[1]
            }
        };
        let m = nelder_mead(f, &[1.0, 1.0], &[0.2, 0.2], &NelderMeadConfig::default());
        assert!(m.x[0] > 0.0 && m.x[0] < 1e-6);
        assert!(m.value.is_finite());
    }

    #[test]
    fn reports_non_convergence() {
        let f = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
        let cfg = NelderMeadConfig {
            max_iter: 5,
            ..Default::default()
        };
        let m = nelder_mead(f, &[-1.2, 1.0], &[0.1, 0.1], &cfg);
        assert!(!m.converged);
        assert_eq!(m.iterations, 5);
    }
}
