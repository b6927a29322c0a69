//! Maximum-likelihood estimation of the logistic-weighted regression
//! mixture by expectation-maximisation.
//!
//! The observed-data log-likelihood
//!
//! ```text
//! L(Psi) = Σ_i log Σ_k pi_k(t_i; w) N(y_i; beta_k' x(t_i), sigma_k^2)
//! ```
//!
//! is maximised by alternating the posterior responsibilities (E) with two
//! independent M-step blocks: a Newton/IRLS logistic fit for `w` and one
//! weighted least-squares problem per class for `(beta_k, sigma_k^2)`.
//! Each sweep cannot decrease `L`; a full fit runs several restarts from
//! different initial partitions and keeps the best final likelihood.

use std::time::Instant;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::weighted_polyfit;
use crate::logistic::{irls_fit_with, ordered_labeling, IrlsOptions, LogisticParams};
use crate::math::logsumexp;
use crate::model::{
    joint_log_densities, variance_floor, ClassRegression, RegressionMixtureParams, WeightMatrix,
};
use crate::partition::OrderedPartition;
use crate::series::TimeSeries;

/// Knobs of a full EM fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    /// Outer sweep cap per restart (the "N" of the complexity).
    pub max_iterations: usize,
    /// Stop when `|L_new - L_old| / max(|L_new|, 1e-12)` falls below this.
    pub rel_tol: f64,
    /// Number of initial partitions tried; the first is deterministic
    /// (equal time spans), the rest are random.
    pub n_restarts: usize,
    /// Seeds the random restarts; the fit is deterministic given this.
    pub seed: u64,
    /// Inner Newton/IRLS options for the logistic M-step.
    pub irls: IrlsOptions,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_iterations: 1000,
            rel_tol: 1e-8,
            n_restarts: 5,
            seed: 0,
            irls: IrlsOptions::default(),
        }
    }
}

/// How a single run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Relative likelihood change fell below tolerance.
    Converged,
    /// Iteration cap reached.
    MaxIterations,
    /// The hard labeling repeated itself (classification EM only).
    LabelingFixedPoint,
}

/// Everything a fit produces. Serializes losslessly to JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub params: RegressionMixtureParams,
    /// Contiguous segmentation produced by the fit: the ordered logistic
    /// labeling for EM, the final hard labeling for classification EM.
    pub partition: OrderedPartition,
    /// Per-sample argmax of the posterior responsibilities (lowest class
    /// wins ties). Unlike `partition` this need not be ordered.
    pub posterior_labels: Vec<usize>,
    /// Monitored objective after the initial point and each sweep:
    /// observed-data log-likelihood for EM, complete-data log-likelihood
    /// for classification EM. Non-decreasing for EM.
    pub loglik_trace: Vec<f64>,
    /// Number of M-steps performed by the winning restart.
    pub n_iterations: usize,
    /// Inner Newton iterations spent by each M-step of the winning restart.
    pub irls_iteration_counts: Vec<usize>,
    pub stop: StopReason,
    /// Which restart produced the reported fit (ties keep the earliest).
    pub restart_index_selected: usize,
    /// Whether the final logistic fit was flagged as saturated.
    pub logistic_saturated: bool,
    /// Total wall-clock time across all restarts, seconds.
    pub wall_clock_seconds: f64,
}

impl FitReport {
    /// Final value of the monitored objective.
    pub fn log_likelihood(&self) -> f64 {
        *self.loglik_trace.last().expect("trace is never empty")
    }
}

/// Posterior responsibilities and the observed-data log-likelihood at the
/// current parameters.
///
/// Computed in log space: `tau_ik = exp(l_ik - logsumexp_k l_ik)` where
/// `l_ik` is the joint log-density, so extreme variances or proportions
/// cannot overflow. Fails if any sample's likelihood degenerates.
pub fn e_step(
    series: &TimeSeries,
    params: &RegressionMixtureParams,
) -> Result<(WeightMatrix, f64)> {
    let joint = joint_log_densities(series, params)?;
    let (n, k) = joint.dim();
    let mut tau = Array2::<f64>::zeros((n, k));
    let mut ll = 0.0;
    for i in 0..n {
        let row = joint.row(i);
        let lse = logsumexp(row.as_slice().unwrap());
        if !lse.is_finite() {
            return Err(Error::Domain(format!(
                "posterior degenerate at sample {i} (all classes have zero density)"
            )));
        }
        for c in 0..k {
            tau[[i, c]] = (joint[[i, c]] - lse).exp();
        }
        ll += lse;
    }
    Ok((WeightMatrix::new(tau)?, ll))
}

/// Regression block of the M-step: one weighted least-squares fit per
/// class under the responsibilities, variances floored by
/// [`variance_floor`] of the whole series.
///
/// A class whose responsibility column sums to zero has no data to fit;
/// that raises [`Error::EmptyClass`] so the caller can re-initialise.
pub fn m_step_regression(
    series: &TimeSeries,
    tau: &WeightMatrix,
    degree: usize,
) -> Result<Vec<ClassRegression>> {
    let k = tau.num_classes();
    let floor = variance_floor(series.y());
    let w = tau.as_array();
    let mut classes = Vec::with_capacity(k);
    let mut col = vec![0.0; series.len()];
    for c in 0..k {
        for (i, slot) in col.iter_mut().enumerate() {
            *slot = w[[i, c]];
        }
        if tau.column_total(c) <= 0.0 {
            return Err(Error::EmptyClass { class: c });
        }
        let (beta, wsse, wtot) = weighted_polyfit(series.t(), series.y(), Some(&col), degree)?;
        classes.push(ClassRegression {
            beta,
            sigma2: (wsse / wtot).max(floor),
        });
    }
    Ok(classes)
}

/// Initial parameters from a hard chunk partition.
///
/// Restart 0 splits `[t_0, t_{n-1}]` into equal time spans (falling back
/// to equal sample counts if a span is empty); restarts >= 1 draw `k - 1`
/// distinct random boundaries. Each chunk gets its own least-squares fit,
/// and the logistic scores come from a deliberately short Newton run (3
/// iterations) on the chunk indicators: chunk labels are perfectly
/// separable, so a converged fit would start every restart at essentially
/// hard proportions and the first E-step could never move a sample across
/// a chunk boundary. Three steps give moderate slopes that still track
/// the chunks.
pub fn initialize(
    series: &TimeSeries,
    k: usize,
    degree: usize,
    restart: usize,
    attempt: usize,
    base_seed: u64,
) -> Result<RegressionMixtureParams> {
    let n = series.len();
    if k == 0 || n < k {
        return Err(Error::InvalidInput(format!(
            "need 1 <= k <= n, got k = {k} for n = {n}"
        )));
    }

    let boundaries: Vec<usize> = if restart == 0 && attempt == 0 {
        equal_time_boundaries(series.t(), k)
    } else {
        let offset = (restart + 1000 * attempt) as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(offset));
        let mut picks: Vec<usize> = rand::seq::index::sample(&mut rng, n - 1, k - 1)
            .into_iter()
            .map(|i| i + 1)
            .collect();
        picks.sort_unstable();
        picks
    };
    let partition = OrderedPartition::from_boundaries(n, &boundaries)?;

    let floor = variance_floor(series.y());
    let mut classes = Vec::with_capacity(k);
    for c in 0..k {
        let r = partition.range(c);
        let (beta, sse, m) =
            weighted_polyfit(&series.t()[r.clone()], &series.y()[r], None, degree)?;
        classes.push(ClassRegression {
            beta,
            sigma2: (sse / m).max(floor),
        });
    }

    let hard = WeightMatrix::hard(&partition.labels(), k)?;
    let short = IrlsOptions {
        max_iterations: 3,
        ..IrlsOptions::default()
    };
    let logistic = irls_fit_with(series.t(), &hard, &LogisticParams::flat(k), &short)?.params;

    Ok(RegressionMixtureParams { classes, logistic })
}

fn equal_time_boundaries(t: &[f64], k: usize) -> Vec<usize> {
    let n = t.len();
    let (lo, hi) = (t[0], t[n - 1]);
    let mut bounds = Vec::with_capacity(k - 1);
    for j in 1..k {
        let edge = lo + (hi - lo) * j as f64 / k as f64;
        bounds.push(t.partition_point(|&v| v <= edge));
    }
    let distinct_interior = bounds.windows(2).all(|w| w[0] < w[1])
        && bounds.first().map_or(true, |&b| b > 0)
        && bounds.last().map_or(true, |&b| b < n);
    if !distinct_interior {
        // Irregular grids can leave a time span empty; equal counts cannot.
        bounds = (1..k).map(|j| j * n / k).collect();
    }
    bounds
}

struct RunOutcome {
    params: RegressionMixtureParams,
    tau: WeightMatrix,
    trace: Vec<f64>,
    irls_iteration_counts: Vec<usize>,
    stop: StopReason,
    saturated: bool,
}

fn run_once(
    series: &TimeSeries,
    mut params: RegressionMixtureParams,
    degree: usize,
    config: &EmConfig,
) -> Result<RunOutcome> {
    let (mut tau, mut ll) = e_step(series, &params)?;
    let mut trace = vec![ll];
    let mut irls_iteration_counts = Vec::new();
    let mut saturated = false;
    let mut stop = StopReason::MaxIterations;

    for _ in 0..config.max_iterations {
        params.classes = m_step_regression(series, &tau, degree)?;
        let fit = irls_fit_with(series.t(), &tau, &params.logistic, &config.irls)?;
        params.logistic = fit.params;
        saturated = fit.saturated;
        irls_iteration_counts.push(fit.iterations);

        let (tau_next, ll_next) = e_step(series, &params)?;
        tau = tau_next;
        trace.push(ll_next);
        let gain = (ll_next - ll).abs();
        ll = ll_next;
        if gain / ll.abs().max(1e-12) < config.rel_tol {
            stop = StopReason::Converged;
            break;
        }
    }

    Ok(RunOutcome {
        params,
        tau,
        trace,
        irls_iteration_counts,
        stop,
        saturated,
    })
}

/// Fits a `k`-class mixture of degree-`degree` regressions by EM with
/// restarts. Deterministic given `config.seed`.
///
/// A restart that collapses a class (`EmptyClass`) is re-initialised from
/// a fresh random partition, up to ten attempts, before the error is
/// propagated. Restarts are compared on their final log-likelihood; the
/// earliest restart wins ties.
pub fn em_fit(
    series: &TimeSeries,
    k: usize,
    degree: usize,
    config: &EmConfig,
) -> Result<FitReport> {
    let started = Instant::now();
    if config.n_restarts == 0 {
        return Err(Error::InvalidInput("n_restarts must be positive".into()));
    }
    if config.max_iterations == 0 {
        return Err(Error::InvalidInput("max_iterations must be positive".into()));
    }
    let n = series.len();
    if k == 0 || n < k.max(degree + 1) {
        return Err(Error::InvalidInput(format!(
            "cannot fit k = {k} classes of degree {degree} to {n} samples"
        )));
    }

    let mut best: Option<(usize, RunOutcome)> = None;
    for restart in 0..config.n_restarts {
        let mut outcome = None;
        for attempt in 0..10 {
            let params = initialize(series, k, degree, restart, attempt, config.seed)?;
            match run_once(series, params, degree, config) {
                Ok(run) => {
                    outcome = Some(run);
                    break;
                }
                Err(Error::EmptyClass { .. }) if attempt + 1 < 10 => continue,
                Err(e) => return Err(e),
            }
        }
        let run = outcome.expect("loop either breaks with a run or returns the error");
        let better = match &best {
            None => true,
            Some((_, incumbent)) => {
                run.trace.last().unwrap() > incumbent.trace.last().unwrap()
            }
        };
        if better {
            best = Some((restart, run));
        }
    }

    let (restart_index_selected, run) = best.expect("n_restarts >= 1");
    let labeling = ordered_labeling(series.t(), &run.params.logistic)?;
    let posterior_labels = (0..n).map(|i| run.tau.argmax_row(i)).collect();

    Ok(FitReport {
        params: run.params,
        partition: labeling.partition,
        posterior_labels,
        loglik_trace: run.trace,
        n_iterations: run.irls_iteration_counts.len(),
        irls_iteration_counts: run.irls_iteration_counts,
        stop: run.stop,
        restart_index_selected,
        logistic_saturated: run.saturated,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    })
}
