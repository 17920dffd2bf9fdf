use crate::error::{check_probability, domain, Result};

/// Check loss `u (tau - 1{u < 0})`, unchecked.
#[inline]
pub fn rho(u: f64, tau: f64) -> f64 {
    if u < 0.0 {
        u * (tau - 1.0)
    } else {
        u * tau
    }
}

/// Derivative of [`rho`] in `u`; at the kink `u = 0` the indicator is 0,
/// so the value is `tau`.
#[inline]
pub fn rho_derivative(u: f64, tau: f64) -> f64 {
    if u < 0.0 {
        tau - 1.0
    } else {
        tau
    }
}

/// Pinball (quantile check) loss of a residual `u` at level `tau`.
pub fn pinball_loss(u: f64, tau: f64) -> Result<f64> {
    check_probability("tau", tau)?;
    if !u.is_finite() {
        return domain(format!("residual must be finite, got {u}"));
    }
    Ok(rho(u, tau))
}

/// Mean check loss of residuals `y_i - q_i`.
pub fn empirical_risk<I>(residuals: I, tau: f64) -> f64
where
    I: IntoIterator<Item = f64>,
{
    let (sum, n) = residuals
        .into_iter()
        .fold((0.0, 0usize), |(s, n), u| (s + rho(u, tau), n + 1));
    sum / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert!((pinball_loss(2.0, 0.9).unwrap() - 1.8).abs() < 1e-15);
        assert!((pinball_loss(-2.0, 0.9).unwrap() - 0.2).abs() < 1e-15);
        for tau in [0.01, 0.5, 0.99] {
            assert_eq!(pinball_loss(0.0, tau).unwrap(), 0.0);
        }
        assert!(pinball_loss(1.0, 1.0).is_err());
        assert!(pinball_loss(f64::NAN, 0.5).is_err());
    }

    #[test]
    fn kink_convention() {
        assert_eq!(rho_derivative(0.0, 0.3), 0.3);
    }

    proptest! {
        #[test]
        fn derivative_matches_finite_differences(
            u in prop_oneof![-50.0f64..-1e-3, 1e-3f64..50.0],
            tau in 0.01f64..0.99,
        ) {
            let h = 1e-6;
            let fd = (rho(u + h, tau) - rho(u - h, tau)) / (2.0 * h);
            prop_assert!((fd - rho_derivative(u, tau)).abs() < 1e-8);
        }

        #[test]
        fn convex_and_zero_only_at_zero(
            a in -10.0f64..10.0,
            b in -10.0f64..10.0,
            t in 0.0f64..1.0,
            tau in 0.01f64..0.99,
        ) {
            let mid = t * a + (1.0 - t) * b;
            prop_assert!(rho(mid, tau) <= t * rho(a, tau) + (1.0 - t) * rho(b, tau) + 1e-12);
            if a != 0.0 {
                prop_assert!(rho(a, tau) > 0.0);
            }
        }
    }
}
