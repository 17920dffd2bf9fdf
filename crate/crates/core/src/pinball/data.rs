use crate::error::{domain, Result};

/// Covariate rows paired with responses.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
}

impl RegressionData {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        if y.is_empty() {
            return domain("regression data is empty");
        }
        if x.len() != y.len() {
            return domain(format!("{} covariate rows but {} responses", x.len(), y.len()));
        }
        let q = x[0].len();
        if q == 0 {
            return domain("covariate dimension must be at least 1");
        }
        if let Some(i) = x.iter().position(|row| row.len() != q) {
            return domain(format!("row {i} has {} covariates, expected {q}", x[i].len()));
        }
        if x.iter().flatten().chain(&y).any(|v| !v.is_finite()) {
            return domain("regression data contains non-finite values");
        }
        Ok(Self { x, y })
    }

    /// Responses only; each row gets a single zero covariate.
    pub fn unconditional(y: Vec<f64>) -> Result<Self> {
        let x = vec![vec![0.0]; y.len()];
        Self::new(x, y)
    }

    pub fn x(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn q(&self) -> usize {
        self.x[0].len()
    }

    /// Per-column mean and (population) standard deviation.
    pub(crate) fn column_moments(&self) -> Vec<(f64, f64)> {
        let n = self.n() as f64;
        (0..self.q())
            .map(|j| {
                let mean = self.x.iter().map(|r| r[j]).sum::<f64>() / n;
                let var = self.x.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
                (mean, var.sqrt())
            })
            .collect()
    }
}

pub(crate) fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(RegressionData::new(vec![], vec![]).is_err());
        assert!(RegressionData::new(vec![vec![1.0]], vec![1.0, 2.0]).is_err());
        assert!(RegressionData::new(vec![vec![1.0], vec![1.0, 2.0]], vec![1.0, 2.0]).is_err());
        assert!(RegressionData::new(vec![vec![]], vec![1.0]).is_err());
        assert!(RegressionData::new(vec![vec![f64::NAN]], vec![1.0]).is_err());
        let d = RegressionData::new(vec![vec![1.0, 2.0], vec![3.0, 4.0]], vec![0.0, 1.0]).unwrap();
        assert_eq!((d.n(), d.q()), (2, 2));
        assert_eq!(d.column_moments(), vec![(2.0, 1.0), (3.0, 1.0)]);
    }
}
