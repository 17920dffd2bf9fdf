use std::sync::OnceLock;

use crate::error::{domain, Result};

/// A non-empty collection of finite observations with a lazily cached
/// sorted view.
#[derive(Debug, Clone)]
pub struct Sample {
    values: Vec<f64>,
    sorted: OnceLock<Vec<f64>>,
}

impl Sample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return domain("sample is empty");
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return domain(format!("sample contains non-finite value {bad}"));
        }
        Ok(Self {
            values,
            sorted: OnceLock::new(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Nondecreasing permutation of the values.
    pub fn sorted(&self) -> &[f64] {
        self.sorted.get_or_init(|| {
            let mut v = self.values.clone();
            v.sort_unstable_by(f64::total_cmp);
            v
        })
    }

    pub fn max(&self) -> f64 {
        *self.sorted().last().expect("non-empty")
    }

    pub fn min(&self) -> f64 {
        self.sorted()[0]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl TryFrom<Vec<f64>> for Sample {
    type Error = crate::Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Sample::new(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(Sample::new(vec![]).is_err());
        assert!(Sample::new(vec![1.0, f64::NAN]).is_err());
        assert!(Sample::new(vec![f64::NEG_INFINITY]).is_err());
    }

    #[test]
    fn sorted_view_is_sorted_permutation() {
        let s = Sample::new(vec![3.0, -1.0, 2.0, 2.0, 10.0]).unwrap();
        assert_eq!(s.sorted(), &[-1.0, 2.0, 2.0, 3.0, 10.0]);
        assert_eq!(s.values(), &[3.0, -1.0, 2.0, 2.0, 10.0]);
        assert_eq!(s.max(), 10.0);
        assert_eq!(s.min(), -1.0);
    }
}
