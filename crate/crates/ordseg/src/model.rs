//! Model parameters and likelihoods for the ordered regression mixture.
//!
//! Each class `k` is a polynomial regression `y = beta_k' x(t) + sigma_k e`
//! with standard normal noise `e`; class membership over time is governed
//! by the logistic proportions of [`crate::logistic::LogisticParams`].

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logistic::{self, LogisticParams};
use crate::math::{logsumexp, mean_variance};
use crate::partition::OrderedPartition;
use crate::series::{PolynomialBasis, TimeSeries};

/// One class's regression: polynomial coefficients and noise variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRegression {
    pub beta: Vec<f64>,
    pub sigma2: f64,
}

/// Full parameter set of the mixture: per-class regressions plus the
/// logistic process steering the class proportions over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionMixtureParams {
    pub classes: Vec<ClassRegression>,
    pub logistic: LogisticParams,
}

impl RegressionMixtureParams {
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::InvalidInput("mixture needs at least one class".into()));
        }
        if self.classes.len() != self.logistic.num_classes() {
            return Err(Error::InvalidInput(format!(
                "{} regression classes but logistic process has {}",
                self.classes.len(),
                self.logistic.num_classes()
            )));
        }
        let width = self.classes[0].beta.len();
        for (k, c) in self.classes.iter().enumerate() {
            if c.beta.len() != width {
                return Err(Error::InvalidInput(format!(
                    "class {k} has {} coefficients, expected {width}",
                    c.beta.len()
                )));
            }
            if !(c.sigma2 > 0.0) || !c.sigma2.is_finite() {
                return Err(Error::Domain(format!(
                    "class {k} variance must be positive and finite, got {}",
                    c.sigma2
                )));
            }
        }
        Ok(())
    }
}

/// Soft class memberships: an `n x K` row-stochastic matrix.
///
/// Every entry lies in `[0, 1]` and each row sums to 1 within `1e-9`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix(Array2<f64>);

impl WeightMatrix {
    pub fn new(w: Array2<f64>) -> Result<Self> {
        if w.nrows() == 0 || w.ncols() == 0 {
            return Err(Error::InvalidInput("weight matrix must be non-empty".into()));
        }
        for (i, row) in w.rows().into_iter().enumerate() {
            let mut sum = 0.0;
            for &v in row {
                if !(0.0..=1.0 + 1e-12).contains(&v) || !v.is_finite() {
                    return Err(Error::Domain(format!(
                        "weight out of [0, 1] at row {i}: {v}"
                    )));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Domain(format!(
                    "row {i} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(WeightMatrix(w))
    }

    /// 0/1 indicator matrix for hard labels in `0..num_classes`.
    pub fn hard(labels: &[usize], num_classes: usize) -> Result<Self> {
        if labels.iter().any(|&l| l >= num_classes) {
            return Err(Error::InvalidInput("label out of class range".into()));
        }
        let mut w = Array2::<f64>::zeros((labels.len(), num_classes));
        for (i, &l) in labels.iter().enumerate() {
            w[[i, l]] = 1.0;
        }
        WeightMatrix::new(w)
    }

    pub fn uniform(n: usize, num_classes: usize) -> Self {
        WeightMatrix(Array2::from_elem((n, num_classes), 1.0 / num_classes as f64))
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    /// Index of the largest entry in row `i`; ties go to the lowest class.
    pub fn argmax_row(&self, i: usize) -> usize {
        let row = self.0.row(i);
        let mut best = 0;
        for k in 1..row.len() {
            if row[k] > row[best] {
                best = k;
            }
        }
        best
    }

    pub fn column_total(&self, k: usize) -> f64 {
        self.0.column(k).sum()
    }
}

/// Noise-variance floor used by every variance estimate in the crate:
/// `1e-6` times the sample variance of `y`, or `1e-12` absolute when the
/// series is (numerically) constant. Keeps single-support classes from
/// collapsing the likelihood.
pub fn variance_floor(y: &[f64]) -> f64 {
    let (_, var) = mean_variance(y);
    if var > 0.0 {
        1e-6 * var
    } else {
        1e-12
    }
}

/// Log-density of `N(mean, sigma2)` at `y`.
pub fn gaussian_log_density(y: f64, mean: f64, sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::Domain(format!(
            "gaussian density needs positive variance, got {sigma2}"
        )));
    }
    Ok(gaussian_log_density_unchecked(y, mean, sigma2))
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[inline]
pub(crate) fn gaussian_log_density_unchecked(y: f64, mean: f64, sigma2: f64) -> f64 {
    let r = y - mean;
    -0.5 * (LN_2PI + sigma2.ln() + r * r / sigma2)
}

/// `n x K` matrix of per-point, per-class log densities
/// `log pi_k(t_i) + log N(y_i; beta_k' x(t_i), sigma_k^2)`.
pub(crate) fn joint_log_densities(
    series: &TimeSeries,
    params: &RegressionMixtureParams,
) -> Result<Array2<f64>> {
    params.validate()?;
    let k = params.num_classes();
    let basis = PolynomialBasis::new(params.classes[0].beta.len() - 1);
    let log_pi = logistic::log_probabilities(series.t(), &params.logistic);
    let mut out = Array2::<f64>::zeros((series.len(), k));
    for (i, (&ti, &yi)) in series.t().iter().zip(series.y()).enumerate() {
        for (c, class) in params.classes.iter().enumerate() {
            let mean = basis.eval(&class.beta, ti);
            out[[i, c]] =
                log_pi[[i, c]] + gaussian_log_density_unchecked(yi, mean, class.sigma2);
        }
    }
    Ok(out)
}

/// Observed-data log-likelihood of the mixture:
/// `Σ_i log Σ_k pi_k(t_i) N(y_i; beta_k' x(t_i), sigma_k^2)`.
pub fn mixture_log_likelihood(
    series: &TimeSeries,
    params: &RegressionMixtureParams,
) -> Result<f64> {
    let joint = joint_log_densities(series, params)?;
    let mut ll = 0.0;
    for (i, row) in joint.rows().into_iter().enumerate() {
        let term = logsumexp(row.as_slice().unwrap());
        if !term.is_finite() {
            return Err(Error::Domain(format!(
                "likelihood degenerate at sample {i}"
            )));
        }
        ll += term;
    }
    Ok(ll)
}

/// Complete-data log-likelihood under a hard ordered labeling:
/// `Σ_i log pi_{z_i}(t_i) + log N(y_i; ...)`.
pub fn complete_data_log_likelihood(
    series: &TimeSeries,
    params: &RegressionMixtureParams,
    labeling: &OrderedPartition,
) -> Result<f64> {
    if labeling.n() != series.len() {
        return Err(Error::InvalidInput(format!(
            "labeling covers {} samples, series has {}",
            labeling.n(),
            series.len()
        )));
    }
    if labeling.num_classes() != params.num_classes() {
        return Err(Error::InvalidInput(format!(
            "labeling has {} classes, params have {}",
            labeling.num_classes(),
            params.num_classes()
        )));
    }
    let joint = joint_log_densities(series, params)?;
    let mut ll = 0.0;
    for i in 0..series.len() {
        ll += joint[[i, labeling.label(i)]];
    }
    Ok(ll)
}
