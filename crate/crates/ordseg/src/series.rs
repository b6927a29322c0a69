//! Core data carriers: a sampled time series and the polynomial basis used
//! by every regression in the crate.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A one-dimensional series sampled at strictly increasing times.
///
/// Invariants enforced at construction: `t` and `y` have the same non-zero
/// length, every value is finite, and `t` is strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    t: Vec<f64>,
    y: Vec<f64>,
}

impl TimeSeries {
    pub fn new(t: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if t.is_empty() {
            return Err(Error::InvalidInput("series must be non-empty".into()));
        }
        if t.len() != y.len() {
            return Err(Error::InvalidInput(format!(
                "t has {} samples but y has {}",
                t.len(),
                y.len()
            )));
        }
        if let Some(i) = t.iter().chain(y.iter()).position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value at flat position {i}"
            )));
        }
        if let Some(i) = t.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!(
                "t must be strictly increasing; violation between samples {} and {}",
                i,
                i + 1
            )));
        }
        Ok(TimeSeries { t, y })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        false // the constructor rejects empty series
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }
}

/// Monomial basis `1, t, t^2, ..., t^degree`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolynomialBasis {
    degree: usize,
}

impl PolynomialBasis {
    pub fn new(degree: usize) -> Self {
        PolynomialBasis { degree }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of basis functions (`degree + 1`).
    pub fn len(&self) -> usize {
        self.degree + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Evaluates the basis at one time point.
    pub fn row(&self, t: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.degree + 1);
        let mut p = 1.0;
        for _ in 0..=self.degree {
            out.push(p);
            p *= t;
        }
        out
    }

    /// `Σ_d beta_d t^d` via Horner's rule.
    pub fn eval(&self, beta: &[f64], t: f64) -> f64 {
        debug_assert_eq!(beta.len(), self.degree + 1);
        beta.iter().rev().fold(0.0, |acc, &b| acc * t + b)
    }

    /// Full `n x (degree + 1)` design matrix for a series.
    pub fn design_matrix(&self, series: &TimeSeries) -> Array2<f64> {
        let n = series.len();
        let mut x = Array2::<f64>::zeros((n, self.degree + 1));
        for (i, &ti) in series.t().iter().enumerate() {
            let mut p = 1.0;
            for d in 0..=self.degree {
                x[[i, d]] = p;
                p *= ti;
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_length_mismatch_and_non_increasing_t() {
        assert!(TimeSeries::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(TimeSeries::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(TimeSeries::new(vec![1.0, 0.5], vec![1.0, 2.0]).is_err());
        assert!(TimeSeries::new(vec![], vec![]).is_err());
        assert!(TimeSeries::new(vec![0.0, f64::NAN], vec![1.0, 2.0]).is_err());
        assert!(TimeSeries::new(vec![0.0, 1.0], vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn design_matrix_rows_are_monomials() {
        let s = TimeSeries::new(vec![0.0, 1.0, 2.0], vec![0.0; 3]).unwrap();
        let x = PolynomialBasis::new(2).design_matrix(&s);
        assert_eq!(x.shape(), &[3, 3]);
        assert_eq!(x.row(2).to_vec(), vec![1.0, 2.0, 4.0]);
    }

    #[test]
    fn eval_matches_row_dot_product() {
        let basis = PolynomialBasis::new(3);
        let beta = [1.0, -2.0, 0.5, 0.25];
        let t = 1.7;
        let dot: f64 = basis.row(t).iter().zip(&beta).map(|(x, b)| x * b).sum();
        assert!((basis.eval(&beta, t) - dot).abs() < 1e-12);
    }
}
