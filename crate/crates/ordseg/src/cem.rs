//! Classification EM: a hard assignment step between E and M.
//!
//! Where EM carries full posterior responsibilities into the M-step,
//! classification EM commits each sample to a class first and fits on the
//! resulting indicators, maximising the complete-data log-likelihood
//!
//! ```text
//! CL(Psi, z) = Σ_i log pi_{z_i}(t_i; w) + log N(y_i; beta_{z_i}' x(t_i), sigma_{z_i}^2)
//! ```
//!
//! over parameters and labelings jointly. Iterations are cheaper and the
//! labeling usually reaches a fixed point long before the iteration cap;
//! the price is a biased, likelihood-suboptimal estimate relative to EM
//! (each class is fitted from a truncated sample).
//!
//! Two implementation choices keep the ascent of `CL` exact and the
//! boundaries data-driven:
//!
//! * The assignment step maximises `Σ_i log tau_{i z_i}` over *ordered*
//!   labelings by a tiny dynamic program. Per-row argmax followed by an
//!   ordering repair (the [`c_step`] helper) can strictly decrease `CL`
//!   when one early flip drags every later sample upward; the constrained
//!   maximiser cannot, since the previous labeling is itself feasible.
//! * The logistic proportions stay flat while the labeling moves and are
//!   fitted once, to the labeling the sweeps settle on. Hard indicators
//!   are perfectly separable, so `Q1` has no finite maximiser: refitting
//!   the proportions inside the loop drives them toward step functions at
//!   the *current* boundaries, after which the prior term outweighs any
//!   density evidence in the assignment and the labeling freezes wherever
//!   it was initialised. With flat proportions the `Q1` term of `CL` is
//!   the constant `-n log K`, each sweep is an exact coordinate ascent
//!   (dynamic program in `z`, weighted least squares in the class
//!   parameters), and the deferred fit can only raise `Q1` above the flat
//!   value. The final proportions saturate by design (coefficient clamp
//!   plus flag) — they describe the hard partition the fit returns.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::em::{e_step, initialize, m_step_regression, EmConfig, FitReport, StopReason};
use crate::error::{Error, Result};
use crate::logistic::{irls_fit_with, ordered_labeling, IrlsOptions, LogisticParams};
use crate::model::{complete_data_log_likelihood, RegressionMixtureParams, WeightMatrix};
use crate::partition::{repair_non_decreasing, OrderedPartition};
use crate::series::TimeSeries;

/// What to do when the hard assignment empties a class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmptyClassPolicy {
    /// Abandon the restart and redraw its initial partition.
    #[default]
    AbortRestart,
    /// Move the least-confident point (lowest max-posterior) into the
    /// empty class and continue.
    ReseedSmallest,
}

/// Which scores the hard assignment ranks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CStepRule {
    /// Best ordered labeling under the posterior responsibilities
    /// (proportions times densities).
    #[default]
    Posterior,
    /// Argmax of the logistic proportions alone; already time-ordered.
    /// The proportions are refit to the current labeling each sweep, so
    /// this rule has no density feedback: it anchors near the best
    /// initial partition rather than migrating boundaries toward the
    /// data. Shipped for comparison, not recommended.
    Logistic,
}

/// Knobs of a classification-EM fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CemConfig {
    /// Shared outer-loop settings (iteration cap, tolerance, restarts,
    /// seed). The embedded IRLS options drive the deferred proportion fit;
    /// under [`CStepRule::Logistic`] the per-sweep refit overrides their
    /// Newton cap with [`CemConfig::logistic_newton_steps`].
    pub em: EmConfig,
    pub empty_class_policy: EmptyClassPolicy,
    pub c_step_rule: CStepRule,
    /// Newton steps granted to the per-sweep proportion refit under
    /// [`CStepRule::Logistic`], which cannot run on flat proportions (the
    /// labeling *is* their argmax). Kept small so the refit tracks the
    /// labeling instead of saturating at once. The default
    /// [`CStepRule::Posterior`] rule ignores this: it fits the proportions
    /// once, after the labeling settles, with the full IRLS options.
    pub logistic_newton_steps: usize,
}

impl Default for CemConfig {
    fn default() -> Self {
        CemConfig {
            em: EmConfig::default(),
            empty_class_policy: EmptyClassPolicy::default(),
            c_step_rule: CStepRule::default(),
            logistic_newton_steps: 4,
        }
    }
}

/// Hard assignment helper: per-sample argmax of the responsibilities
/// (lowest class wins ties) followed by the minimal left-to-right repair
/// that restores non-decreasing labels.
///
/// [`cem_fit`] itself assigns with the ordering-constrained maximiser (see
/// the module docs); this unconstrained-then-repaired variant is the
/// cheaper diagnostic rule and the building block for comparisons.
pub fn c_step(tau: &WeightMatrix) -> Result<OrderedPartition> {
    let mut labels: Vec<usize> = (0..tau.nrows()).map(|i| tau.argmax_row(i)).collect();
    repair_non_decreasing(&mut labels);
    OrderedPartition::from_labels(&labels, tau.num_classes())
}

/// Best *ordered* labeling under per-sample log-scores: maximises
/// `Σ_i log tau_{i z_i}` subject to `z` non-decreasing, by forward dynamic
/// programming over the running prefix maximum. Ties prefer lower classes.
fn ordered_argmax(tau: &WeightMatrix) -> Vec<usize> {
    let (n, k) = (tau.nrows(), tau.num_classes());
    let w = tau.as_array();
    // best[c]: score of the best labeling of samples 0..=i ending in class c.
    let mut best = vec![0.0f64; k];
    let mut choice = vec![0usize; n * k];
    for c in 0..k {
        best[c] = w[[0, c]].ln();
    }
    for i in 1..n {
        // prefix[c] = argmax_{c' <= c} best[c'], lowest c' on ties.
        let mut run_arg = 0usize;
        let mut next = vec![0.0f64; k];
        for c in 0..k {
            if best[c] > best[run_arg] {
                run_arg = c;
            }
            next[c] = best[run_arg] + w[[i, c]].ln();
            choice[i * k + c] = run_arg;
        }
        best = next;
    }
    let mut c = (0..k).fold(0, |arg, c| if best[c] > best[arg] { c } else { arg });
    let mut labels = vec![0usize; n];
    for i in (1..n).rev() {
        labels[i] = c;
        c = choice[i * k + c];
    }
    labels[0] = c;
    labels
}

/// Applies the reseed policy until every class is populated: each round
/// moves one point with the lowest max-posterior into the first empty
/// class, picking among the points that can join it without breaking the
/// label ordering (the two samples flanking the empty class's slot).
fn reseed_smallest(
    labels: &mut [usize],
    tau: &WeightMatrix,
    k: usize,
) -> Result<OrderedPartition> {
    let n = labels.len();
    for _ in 0..n {
        let partition = OrderedPartition::from_labels(labels, k)?;
        let empty = match (0..k).find(|&c| partition.range(c).is_empty()) {
            None => return Ok(partition),
            Some(c) => c,
        };
        // All labels differ from `empty`; the slot sits at the first index
        // whose label exceeds it.
        let pos = labels.partition_point(|&l| l < empty);
        let mut candidates: Vec<usize> = Vec::with_capacity(2);
        if pos > 0 {
            candidates.push(pos - 1);
        }
        if pos < n {
            candidates.push(pos);
        }
        let confidence = |i: usize| tau.as_array()[[i, tau.argmax_row(i)]];
        let moved = candidates
            .into_iter()
            .min_by(|&a, &b| confidence(a).total_cmp(&confidence(b)))
            .expect("n >= 1");
        labels[moved] = empty;
    }
    Err(Error::EmptyClass {
        class: (0..k)
            .find(|c| !labels.contains(c))
            .unwrap_or(0),
    })
}

struct CemRun {
    params: RegressionMixtureParams,
    labeling: OrderedPartition,
    tau: WeightMatrix,
    trace: Vec<f64>,
    irls_iteration_counts: Vec<usize>,
    stop: StopReason,
    saturated: bool,
    sweeps: usize,
}

fn assign(
    series: &TimeSeries,
    params: &RegressionMixtureParams,
    tau: &WeightMatrix,
    config: &CemConfig,
) -> Result<OrderedPartition> {
    let k = tau.num_classes();
    let z = match config.c_step_rule {
        CStepRule::Posterior => OrderedPartition::from_labels(&ordered_argmax(tau), k)?,
        CStepRule::Logistic => ordered_labeling(series.t(), &params.logistic)?.partition,
    };
    if z.non_empty_classes() == k {
        return Ok(z);
    }
    match config.empty_class_policy {
        EmptyClassPolicy::AbortRestart => {
            let empty = (0..k)
                .find(|&c| z.range(c).is_empty())
                .expect("some class is empty");
            Err(Error::EmptyClass { class: empty })
        }
        EmptyClassPolicy::ReseedSmallest => {
            let mut labels = z.labels();
            reseed_smallest(&mut labels, tau, k)
        }
    }
}

fn run_once(
    series: &TimeSeries,
    mut params: RegressionMixtureParams,
    degree: usize,
    config: &CemConfig,
) -> Result<CemRun> {
    let k = params.num_classes();
    // See the module docs: under the posterior rule the proportions stay
    // flat while the labeling moves, so the assignment is driven by the
    // class densities alone and every sweep ascends `CL` exactly.
    let deferred_logistic = config.c_step_rule == CStepRule::Posterior;
    if deferred_logistic {
        params.logistic = LogisticParams::flat(k);
    }
    let inner = IrlsOptions {
        max_iterations: config.logistic_newton_steps,
        ..config.em.irls.clone()
    };

    let (mut tau, _) = e_step(series, &params)?;
    let mut z = assign(series, &params, &tau, config)?;
    let mut cl = complete_data_log_likelihood(series, &params, &z)?;
    let mut trace = vec![cl];
    let mut irls_iteration_counts = Vec::new();
    let mut saturated = false;
    let mut stop = StopReason::MaxIterations;
    let mut sweeps = 0;

    for _ in 0..config.em.max_iterations {
        sweeps += 1;
        let hard = WeightMatrix::hard(&z.labels(), k)?;
        params.classes = m_step_regression(series, &hard, degree)?;
        if !deferred_logistic {
            let fit = irls_fit_with(series.t(), &hard, &params.logistic, &inner)?;
            params.logistic = fit.params;
            saturated = fit.saturated;
            irls_iteration_counts.push(fit.iterations);
        }

        let (tau_next, _) = e_step(series, &params)?;
        tau = tau_next;
        let z_next = assign(series, &params, &tau, config)?;
        let cl_next = complete_data_log_likelihood(series, &params, &z_next)?;
        trace.push(cl_next);

        let fixed = z_next == z;
        z = z_next;
        let gain = (cl_next - cl).abs();
        cl = cl_next;
        if fixed {
            stop = StopReason::LabelingFixedPoint;
            break;
        }
        if gain / cl.abs().max(1e-12) < config.em.rel_tol {
            stop = StopReason::Converged;
            break;
        }
    }

    if deferred_logistic {
        // One full fit to the settled labeling. Starting from flat keeps
        // the trace non-decreasing: IRLS cannot drop below its `-n log K`
        // starting value, and the density term is untouched.
        let hard = WeightMatrix::hard(&z.labels(), k)?;
        let fit = irls_fit_with(series.t(), &hard, &LogisticParams::flat(k), &config.em.irls)?;
        params.logistic = fit.params;
        saturated = fit.saturated;
        irls_iteration_counts.push(fit.iterations);
        trace.push(complete_data_log_likelihood(series, &params, &z)?);
        let (tau_final, _) = e_step(series, &params)?;
        tau = tau_final;
    }

    Ok(CemRun {
        params,
        labeling: z,
        tau,
        trace,
        irls_iteration_counts,
        stop,
        saturated,
        sweeps,
    })
}

/// Fits a `k`-class mixture by classification EM with restarts,
/// deterministic given `config.em.seed`. The reported `partition` is the
/// final hard labeling; `loglik_trace` monitors the complete-data
/// log-likelihood and is non-decreasing.
pub fn cem_fit(
    series: &TimeSeries,
    k: usize,
    degree: usize,
    config: &CemConfig,
) -> Result<FitReport> {
    let started = Instant::now();
    if config.em.n_restarts == 0 {
        return Err(Error::InvalidInput("n_restarts must be positive".into()));
    }
    if config.em.max_iterations == 0 {
        return Err(Error::InvalidInput("max_iterations must be positive".into()));
    }
    if config.logistic_newton_steps == 0 {
        return Err(Error::InvalidInput(
            "logistic_newton_steps must be positive".into(),
        ));
    }
    let n = series.len();
    if k == 0 || n < k.max(degree + 1) {
        return Err(Error::InvalidInput(format!(
            "cannot fit k = {k} classes of degree {degree} to {n} samples"
        )));
    }

    let mut best: Option<(usize, CemRun)> = None;
    let mut last_empty: Option<Error> = None;
    for restart in 0..config.em.n_restarts {
        let mut outcome = None;
        for attempt in 0..10 {
            let params = initialize(series, k, degree, restart, attempt, config.em.seed)?;
            match run_once(series, params, degree, config) {
                Ok(run) => {
                    outcome = Some(run);
                    break;
                }
                Err(e @ Error::EmptyClass { .. }) => {
                    last_empty = Some(e);
                    continue;
                }
                Err(e) => return Err(e),
            }
        }
        let run = match outcome {
            Some(run) => run,
            None => continue,
        };
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

    let (restart_index_selected, run) = match best {
        Some(found) => found,
        None => return Err(last_empty.expect("every restart failed with an empty class")),
    };
    let posterior_labels = (0..n).map(|i| run.tau.argmax_row(i)).collect();

    Ok(FitReport {
        params: run.params,
        partition: run.labeling,
        posterior_labels,
        loglik_trace: run.trace,
        n_iterations: run.sweeps,
        irls_iteration_counts: run.irls_iteration_counts,
        stop: run.stop,
        restart_index_selected,
        logistic_saturated: run.saturated,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Side-by-side fit of both estimators on the same series. Serializes
/// losslessly to JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmCemComparison {
    pub em: FitReport,
    pub cem: FitReport,
    /// Percentage of samples on which the two partitions agree.
    pub label_agreement_pct: f64,
}

pub fn compare_em_cem(
    series: &TimeSeries,
    k: usize,
    degree: usize,
    em_config: &EmConfig,
    cem_config: &CemConfig,
) -> Result<EmCemComparison> {
    let em = crate::em::em_fit(series, k, degree, em_config)?;
    let cem = cem_fit(series, k, degree, cem_config)?;
    let agree = em
        .partition
        .labels()
        .iter()
        .zip(cem.partition.labels())
        .filter(|(a, b)| *a == b)
        .count();
    Ok(EmCemComparison {
        em,
        cem,
        label_agreement_pct: 100.0 * agree as f64 / series.len() as f64,
    })
}
