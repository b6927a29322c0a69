//! Cross-algorithm evaluation: the segmentation-error metric, a benchmark
//! harness that times all three estimators on identical synthetic
//! datasets, and a runtime-scaling summary (log-log slopes and dynamic
//! programming vs. mixture time ratios).
//!
//! Timing discipline: the wall clock covers the fit call only (neither
//! simulation nor I/O), trials run sequentially on one thread so the
//! scaling exponents are not confounded, and every algorithm inside one
//! trial consumes the byte-identical dataset.

use std::fmt;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cem::{cem_fit, CemConfig};
use crate::em::{em_fit, EmConfig};
use crate::error::{Error, Result};
use crate::fisher::{fisher_segment, DiameterKind};
use crate::io::fmt_g17;
use crate::math::splitmix64;
use crate::partition::OrderedPartition;
use crate::simulate::{simulate, SimulationSpec, Situation};

/// Successive time ratios may dip by this relative amount and still count
/// as non-decreasing; measured timings at desk scale are noisy.
pub const RATIO_NOISE_TOLERANCE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Fisher,
    Em,
    Cem,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Fisher => "fisher",
            Algorithm::Em => "em",
            Algorithm::Cem => "cem",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// What to run: the cross product of situations, sample sizes and
/// algorithms, `repeats` trials per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkPlan {
    /// Strictly increasing sample sizes.
    pub n_list: Vec<usize>,
    pub situations: Vec<Situation>,
    /// Trials per (situation, n) cell.
    pub repeats: usize,
    pub algorithms: Vec<Algorithm>,
    pub base_seed: u64,
    pub em: EmConfig,
    pub cem: CemConfig,
}

impl Default for BenchmarkPlan {
    fn default() -> Self {
        BenchmarkPlan {
            n_list: vec![100, 300, 500, 700, 1000, 1500, 2000, 3000],
            situations: vec![Situation::ConstantMeans, Situation::AffineMeans],
            repeats: 20,
            algorithms: vec![Algorithm::Fisher, Algorithm::Em, Algorithm::Cem],
            base_seed: 0,
            em: EmConfig::default(),
            cem: CemConfig::default(),
        }
    }
}

impl BenchmarkPlan {
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::InvalidInput("repeats must be at least 1".into()));
        }
        if self.n_list.is_empty() {
            return Err(Error::InvalidInput("n_list is empty".into()));
        }
        if let Some(w) = self.n_list.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!(
                "n_list must be strictly increasing; {} is followed by {}",
                w[0], w[1]
            )));
        }
        if let Some(&n) = self.n_list.iter().find(|&&n| n < 3) {
            return Err(Error::InvalidInput(format!(
                "n_list entries must be at least 3, got {n}"
            )));
        }
        if self.situations.is_empty() {
            return Err(Error::InvalidInput("situations is empty".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::InvalidInput("algorithms is empty".into()));
        }
        Ok(())
    }
}

/// One (dataset, algorithm) run. `error_pct` and `seconds` are `None`
/// exactly when `failure` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub situation: Situation,
    pub n: usize,
    pub algorithm: Algorithm,
    pub trial: usize,
    /// Simulation seed; identical across algorithms within a trial.
    pub seed: u64,
    pub error_pct: Option<f64>,
    /// Argmax-posterior error for the mixture estimators, kept as a
    /// diagnostic next to the ordered labelling above.
    pub posterior_error_pct: Option<f64>,
    pub seconds: Option<f64>,
    pub failure: Option<String>,
}

/// Per (situation, n, algorithm) aggregate. `None` means every trial in
/// the cell failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub situation: Situation,
    pub n: usize,
    pub algorithm: Algorithm,
    pub mean_seconds: Option<f64>,
    pub mean_error_pct: Option<f64>,
    /// Sample standard deviation of the per-trial errors (0 for a single
    /// successful trial).
    pub std_error_pct: Option<f64>,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub plan: BenchmarkPlan,
    pub trials: Vec<TrialRecord>,
    pub cells: Vec<CellSummary>,
}

/// Percentage of samples whose class label differs between two ordered
/// partitions of the same series. Class indices align by construction
/// (both partitions are time-ordered), so no permutation matching is
/// involved; a predicted partition with fewer non-empty segments simply
/// never matches the missing classes.
pub fn segmentation_error(predicted: &OrderedPartition, truth: &OrderedPartition) -> Result<f64> {
    if predicted.n() != truth.n() {
        return Err(Error::InvalidInput(format!(
            "predicted partition covers {} samples, truth covers {}",
            predicted.n(),
            truth.n()
        )));
    }
    Ok(label_error_pct(&predicted.labels(), &truth.labels()))
}

/// Mismatch percentage between two equally long label vectors.
fn label_error_pct(predicted: &[usize], truth: &[usize]) -> f64 {
    debug_assert_eq!(predicted.len(), truth.len());
    let mismatches = predicted
        .iter()
        .zip(truth)
        .filter(|(p, t)| p != t)
        .count();
    100.0 * mismatches as f64 / truth.len() as f64
}

/// Deterministic per-trial simulation seed: the plan seed combined with
/// the cell coordinates through a mixing hash, so cells never share
/// noise streams yet remain reproducible from `base_seed` alone.
pub fn trial_seed(base_seed: u64, situation: Situation, n: usize, trial: usize) -> u64 {
    let mut h = splitmix64(base_seed ^ 0x5851_f42d_4c95_7f2d);
    h = splitmix64(h ^ situation.code() as u64);
    h = splitmix64(h ^ n as u64);
    h = splitmix64(h ^ trial as u64);
    h
}

/// Runs the full plan. Single-trial estimator failures are recorded on
/// the trial and excluded from the cell means; the run continues.
pub fn run_benchmark(plan: &BenchmarkPlan) -> Result<BenchmarkResult> {
    plan.validate()?;
    let mut trials = Vec::new();
    for &situation in &plan.situations {
        for &n in &plan.n_list {
            for trial in 0..plan.repeats {
                let seed = trial_seed(plan.base_seed, situation, n, trial);
                let spec = SimulationSpec::situation(situation, n, seed);
                let data = simulate(&spec)?;
                let truth_labels = data.truth.labels();
                let k = data.truth.num_classes();
                let degree = situation.degree();
                for &algorithm in &plan.algorithms {
                    trials.push(run_trial(
                        plan,
                        &data.series,
                        &truth_labels,
                        situation,
                        n,
                        trial,
                        seed,
                        algorithm,
                        k,
                        degree,
                    ));
                }
            }
        }
    }
    let cells = summarize(plan, &trials);
    Ok(BenchmarkResult {
        plan: plan.clone(),
        trials,
        cells,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_trial(
    plan: &BenchmarkPlan,
    series: &crate::series::TimeSeries,
    truth_labels: &[usize],
    situation: Situation,
    n: usize,
    trial: usize,
    seed: u64,
    algorithm: Algorithm,
    k: usize,
    degree: usize,
) -> TrialRecord {
    // The estimators' restart seeds must differ from the data seed (and
    // from one another) or restarts would be correlated with the noise.
    let fitted: Result<(Vec<usize>, Option<Vec<usize>>, f64)> = match algorithm {
        Algorithm::Fisher => {
            let started = Instant::now();
            let out = fisher_segment(series, k, DiameterKind::Polynomial { degree });
            let secs = started.elapsed().as_secs_f64();
            out.map(|seg| (seg.partition.labels(), None, secs))
        }
        Algorithm::Em => {
            let mut config = plan.em.clone();
            config.seed = splitmix64(seed ^ 1);
            let started = Instant::now();
            let out = em_fit(series, k, degree, &config);
            let secs = started.elapsed().as_secs_f64();
            out.map(|r| (r.partition.labels(), Some(r.posterior_labels), secs))
        }
        Algorithm::Cem => {
            let mut config = plan.cem.clone();
            config.em.seed = splitmix64(seed ^ 2);
            let started = Instant::now();
            let out = cem_fit(series, k, degree, &config);
            let secs = started.elapsed().as_secs_f64();
            out.map(|r| (r.partition.labels(), Some(r.posterior_labels), secs))
        }
    };
    match fitted {
        Ok((labels, posterior, seconds)) => TrialRecord {
            situation,
            n,
            algorithm,
            trial,
            seed,
            error_pct: Some(label_error_pct(&labels, truth_labels)),
            posterior_error_pct: posterior.map(|p| label_error_pct(&p, truth_labels)),
            seconds: Some(seconds),
            failure: None,
        },
        Err(e) => TrialRecord {
            situation,
            n,
            algorithm,
            trial,
            seed,
            error_pct: None,
            posterior_error_pct: None,
            seconds: None,
            failure: Some(e.to_string()),
        },
    }
}

fn summarize(plan: &BenchmarkPlan, trials: &[TrialRecord]) -> Vec<CellSummary> {
    let mut cells = Vec::new();
    for &situation in &plan.situations {
        for &n in &plan.n_list {
            for &algorithm in &plan.algorithms {
                let in_cell: Vec<&TrialRecord> = trials
                    .iter()
                    .filter(|t| t.situation == situation && t.n == n && t.algorithm == algorithm)
                    .collect();
                let errors: Vec<f64> = in_cell.iter().filter_map(|t| t.error_pct).collect();
                let seconds: Vec<f64> = in_cell.iter().filter_map(|t| t.seconds).collect();
                let failures = in_cell.iter().filter(|t| t.failure.is_some()).count();
                cells.push(CellSummary {
                    situation,
                    n,
                    algorithm,
                    mean_seconds: mean(&seconds),
                    mean_error_pct: mean(&errors),
                    std_error_pct: sample_std(&errors),
                    failures,
                });
            }
        }
    }
    cells
}

fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

fn sample_std(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    if xs.len() < 2 {
        return Some(0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSlope {
    pub algorithm: Algorithm,
    /// Least-squares slope of log(mean seconds) against log(n).
    pub loglog_slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub n: usize,
    pub fisher_over_em: Option<f64>,
    pub fisher_over_cem: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SituationScaling {
    pub situation: Situation,
    pub slopes: Vec<AlgorithmSlope>,
    pub ratios: Vec<RatioRow>,
    /// Whether the fisher/em time ratio never drops by more than
    /// `RATIO_NOISE_TOLERANCE` relatively from one n to the next;
    /// `None` when either algorithm is absent.
    pub fisher_em_ratio_non_decreasing: Option<bool>,
    pub fisher_cem_ratio_non_decreasing: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSummary {
    pub situations: Vec<SituationScaling>,
}

impl ScalingSummary {
    pub fn for_situation(&self, situation: Situation) -> Option<&SituationScaling> {
        self.situations.iter().find(|s| s.situation == situation)
    }
}

/// Fits per-algorithm log-log runtime slopes and the per-n time ratios of
/// the dynamic program over each mixture estimator.
pub fn scaling_summary(result: &BenchmarkResult) -> Result<ScalingSummary> {
    if result.plan.n_list.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "scaling needs at least 3 sample sizes, got {}",
            result.plan.n_list.len()
        )));
    }
    let mut situations = Vec::new();
    for &situation in &result.plan.situations {
        let cell = |n: usize, alg: Algorithm| -> Option<f64> {
            result
                .cells
                .iter()
                .find(|c| c.situation == situation && c.n == n && c.algorithm == alg)
                .and_then(|c| c.mean_seconds)
                .filter(|&s| s > 0.0)
        };

        let mut slopes = Vec::new();
        for &algorithm in &result.plan.algorithms {
            let points: Vec<(f64, f64)> = result
                .plan
                .n_list
                .iter()
                .filter_map(|&n| cell(n, algorithm).map(|s| ((n as f64).ln(), s.ln())))
                .collect();
            if points.len() < 3 {
                return Err(Error::InvalidInput(format!(
                    "algorithm {algorithm} has timings for only {} sample sizes; \
                     at least 3 are needed for a slope",
                    points.len()
                )));
            }
            slopes.push(AlgorithmSlope {
                algorithm,
                loglog_slope: ols_slope(&points),
            });
        }

        let has = |alg: Algorithm| result.plan.algorithms.contains(&alg);
        let ratios: Vec<RatioRow> = result
            .plan
            .n_list
            .iter()
            .map(|&n| {
                let fisher = cell(n, Algorithm::Fisher);
                let ratio = |alg: Algorithm| match (fisher, cell(n, alg)) {
                    (Some(f), Some(t)) => Some(f / t),
                    _ => None,
                };
                RatioRow {
                    n,
                    fisher_over_em: ratio(Algorithm::Em),
                    fisher_over_cem: ratio(Algorithm::Cem),
                }
            })
            .collect();

        let monotone = |pick: fn(&RatioRow) -> Option<f64>| -> Option<bool> {
            let vals: Vec<f64> = ratios.iter().filter_map(pick).collect();
            if vals.len() < 2 {
                return None;
            }
            Some(
                vals.windows(2)
                    .all(|w| w[1] >= w[0] * (1.0 - RATIO_NOISE_TOLERANCE)),
            )
        };
        let fisher_em_ratio_non_decreasing = if has(Algorithm::Fisher) && has(Algorithm::Em) {
            monotone(|r| r.fisher_over_em)
        } else {
            None
        };
        let fisher_cem_ratio_non_decreasing = if has(Algorithm::Fisher) && has(Algorithm::Cem) {
            monotone(|r| r.fisher_over_cem)
        } else {
            None
        };
        situations.push(SituationScaling {
            situation,
            slopes,
            ratios,
            fisher_em_ratio_non_decreasing,
            fisher_cem_ratio_non_decreasing,
        });
    }
    Ok(ScalingSummary { situations })
}

fn ols_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_g17).unwrap_or_default()
}

/// Writes `errors.csv`, `timings.csv` and `metadata.json` into `dir`.
/// The timing file carries the summary's slope column when at least three
/// sample sizes were benchmarked, and leaves it blank otherwise.
pub fn write_benchmark_outputs(result: &BenchmarkResult, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let summary = scaling_summary(result).ok();

    let mut errors = String::from("situation,n,algorithm,mean_error_pct,std_error_pct,failures\n");
    for c in &result.cells {
        errors.push_str(&format!(
            "{},{},{},{},{},{}\n",
            c.situation.code(),
            c.n,
            c.algorithm,
            fmt_opt(c.mean_error_pct),
            fmt_opt(c.std_error_pct),
            c.failures
        ));
    }
    let errors_path = dir.join("errors.csv");
    std::fs::write(&errors_path, errors).map_err(|e| Error::io(&errors_path, e))?;

    let mut timings =
        String::from("situation,n,algorithm,mean_seconds,loglog_slope,fisher_time_ratio\n");
    for c in &result.cells {
        let scaling = summary
            .as_ref()
            .and_then(|s| s.for_situation(c.situation));
        let slope = scaling.and_then(|s| {
            s.slopes
                .iter()
                .find(|a| a.algorithm == c.algorithm)
                .map(|a| a.loglog_slope)
        });
        let ratio = scaling.and_then(|s| {
            let row = s.ratios.iter().find(|r| r.n == c.n)?;
            match c.algorithm {
                Algorithm::Fisher => Some(1.0),
                Algorithm::Em => row.fisher_over_em,
                Algorithm::Cem => row.fisher_over_cem,
            }
        });
        timings.push_str(&format!(
            "{},{},{},{},{},{}\n",
            c.situation.code(),
            c.n,
            c.algorithm,
            fmt_opt(c.mean_seconds),
            fmt_opt(slope),
            fmt_opt(ratio)
        ));
    }
    let timings_path = dir.join("timings.csv");
    std::fs::write(&timings_path, timings).map_err(|e| Error::io(&timings_path, e))?;

    #[derive(Serialize)]
    struct GeneratorInfo {
        situation: Situation,
        change_times: Vec<f64>,
        sigmas: Vec<f64>,
        coefficients: Vec<Vec<f64>>,
    }
    #[derive(Serialize)]
    struct Metadata<'a> {
        plan: &'a BenchmarkPlan,
        generators: Vec<GeneratorInfo>,
        scaling: Option<&'a ScalingSummary>,
        /// Per-trial records, including every simulation seed.
        trials: &'a [TrialRecord],
    }
    let generators = result
        .plan
        .situations
        .iter()
        .map(|&s| {
            let spec = SimulationSpec::situation(s, result.plan.n_list[0], 0);
            GeneratorInfo {
                situation: s,
                change_times: spec.change_times,
                sigmas: spec.sigmas,
                coefficients: spec.coefficients,
            }
        })
        .collect();
    let metadata = Metadata {
        plan: &result.plan,
        generators,
        scaling: summary.as_ref(),
        trials: &result.trials,
    };
    let meta_path = dir.join("metadata.json");
    let json = serde_json::to_string_pretty(&metadata)
        .map_err(|e| Error::Domain(format!("metadata serialisation failed: {e}")))?;
    std::fs::write(&meta_path, json).map_err(|e| Error::io(&meta_path, e))
}
