use crate::error::{check_probability, Result};
use crate::sample::Sample;

/// 1-based rank `k` of the left-continuous empirical quantile: the smallest
/// `k` with `k / n >= tau`, evaluated in floating point exactly as the
/// defining comparison is.
pub fn order_statistic_rank(n: usize, tau: f64) -> usize {
    debug_assert!(n >= 1);
    let nf = n as f64;
    let mut k = ((nf * tau).ceil() as usize).clamp(1, n);
    while k > 1 && (k - 1) as f64 / nf >= tau {
        k -= 1;
    }
    while k < n && (k as f64) / nf < tau {
        k += 1;
    }
    k
}

/// Empirical quantile of already sorted values.
pub fn quantile_of_sorted(sorted: &[f64], tau: f64) -> f64 {
    sorted[order_statistic_rank(sorted.len(), tau) - 1]
}

/// `inf{y : F_n(y) >= tau}`, the order statistic `y_(ceil(n tau))` without
/// interpolation. For `tau > 1 - 1/n` this is the sample maximum.
pub fn empirical_quantile(sample: &Sample, tau: f64) -> Result<f64> {
    check_probability("tau", tau)?;
    Ok(quantile_of_sorted(sample.sorted(), tau))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Rng, StudyDist};
    use proptest::prelude::*;

    /// Literal scan of `inf{y : #{values <= y} / n >= tau}`.
    fn brute_force(values: &[f64], tau: f64) -> f64 {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        for &y in &sorted {
            let count = sorted.iter().filter(|&&v| v <= y).count() as f64;
            if count / n >= tau {
                return y;
            }
        }
        unreachable!("F_n(max) = 1 >= tau")
    }

    fn sample(v: &[f64]) -> Sample {
        Sample::new(v.to_vec()).unwrap()
    }

    #[test]
    fn examples() {
        let s = sample(&[1., 2., 3., 4., 5., 6., 7., 8., 9., 10.]);
        assert_eq!(empirical_quantile(&s, 0.3).unwrap(), 3.0);
        assert_eq!(empirical_quantile(&sample(&[5.0]), 0.01).unwrap(), 5.0);
        assert_eq!(empirical_quantile(&sample(&[5.0]), 0.99).unwrap(), 5.0);

        let big = StudyDist::Normal01.sample(1000, &mut Rng::new(3)).unwrap();
        assert_eq!(empirical_quantile(&big, 0.9995).unwrap(), big.max());
    }

    #[test]
    fn saturates_above_one_minus_one_over_n() {
        let s = StudyDist::Gamma4.sample(1000, &mut Rng::new(5)).unwrap();
        for tau in [0.99901, 0.9995, 0.9999, 0.99999, 1.0 - 1e-12] {
            assert_eq!(empirical_quantile(&s, tau).unwrap(), s.max());
        }
        assert!(empirical_quantile(&s, 0.999).unwrap() < s.max());
    }

    #[test]
    fn domain_errors() {
        let s = sample(&[1.0, 2.0]);
        for tau in [0.0, 1.0, -0.5, f64::NAN] {
            assert!(empirical_quantile(&s, tau).is_err());
        }
    }

    #[test]
    fn brute_force_equivalence_1000_cases() {
        let mut rng = Rng::new(99);
        for _ in 0..1000 {
            let n = 1 + (rng.uniform() * 50.0) as usize;
            // Rounded draws so that ties occur.
            let values: Vec<f64> = (0..n).map(|_| (rng.standard_normal() * 4.0).round()).collect();
            let tau = rng.uniform_open();
            let s = Sample::new(values.clone()).unwrap();
            assert_eq!(empirical_quantile(&s, tau).unwrap(), brute_force(&values, tau));
        }
        // Grid levels that hit k/n exactly.
        for n in 1..=40usize {
            let values: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let s = Sample::new(values.clone()).unwrap();
            for j in 1..100 {
                let tau = j as f64 / 100.0;
                assert_eq!(empirical_quantile(&s, tau).unwrap(), brute_force(&values, tau));
            }
        }
    }

    proptest! {
        #[test]
        fn affine_equivariance(
            values in prop::collection::vec(-1e3f64..1e3, 1..60),
            tau in 0.001f64..0.999,
            a in 1e-3f64..1e3,
            b in -1e3f64..1e3,
        ) {
            // y -> a*y + b is nondecreasing in floating point, so ranks carry over.
            let s = Sample::new(values.clone()).unwrap();
            let t = Sample::new(values.iter().map(|v| a * v + b).collect()).unwrap();
            prop_assert_eq!(
                empirical_quantile(&t, tau).unwrap(),
                a * empirical_quantile(&s, tau).unwrap() + b
            );
        }

        #[test]
        fn monotone_in_tau(
            values in prop::collection::vec(-1e3f64..1e3, 1..60),
            t1 in 0.001f64..0.999,
            t2 in 0.001f64..0.999,
        ) {
            let s = Sample::new(values).unwrap();
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            prop_assert!(empirical_quantile(&s, lo).unwrap() <= empirical_quantile(&s, hi).unwrap());
        }
    }
}
