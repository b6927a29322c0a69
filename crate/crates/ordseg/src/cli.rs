//! Command-line front end.
//!
//! Four subcommands: `simulate` writes a seeded synthetic dataset,
//! `segment` runs one of the three estimators over a CSV series and emits
//! a JSON report, `benchmark` reproduces the cross-algorithm error/runtime
//! tables, and `curves` dumps the logistic proportion curves behind a
//! parameter set.
//!
//! Exit codes: 0 success (including `--help`/`--version`), 1 usage or
//! validation failure (including malformed CSV input), 2 I/O failure.
//! Every flag can also come from a `--config` JSON file; precedence is
//! defaults < config file < flags. Subcommands that consume randomness
//! generate a seed when none is given and print it to stderr, so any run
//! can be reproduced afterwards.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bench::{run_benchmark, write_benchmark_outputs, Algorithm, BenchmarkPlan};
use crate::cem::{cem_fit, CStepRule, CemConfig};
use crate::em::{em_fit, EmConfig, StopReason};
use crate::error::{Error, Result};
use crate::fisher::{fisher_segment, DiameterKind};
use crate::io::{fmt_g17, read_series_csv, write_series_csv};
use crate::logistic::{self, LogisticParams};
use crate::partition::OrderedPartition;
use crate::series::TimeSeries;
use crate::simulate::{simulate, SimulationSpec, Situation};

#[derive(Parser)]
#[command(
    name = "ordseg",
    version,
    about = "Segment one-dimensional time series into ordered polynomial-regression classes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic dataset as CSV plus a metadata sidecar.
    Simulate(SimulateArgs),
    /// Segment a CSV series and print a JSON report.
    Segment(SegmentArgs),
    /// Run the cross-algorithm benchmark and write its result files.
    Benchmark(BenchmarkArgs),
    /// Tabulate the logistic proportion curves for given coefficients.
    Curves(CurvesArgs),
}

/// Entry point for the binary.
pub fn run() -> ExitCode {
    run_from(std::env::args_os())
}

/// Parses `args` (including the program name) and executes the command.
pub fn run_from<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Segment(args) => cmd_segment(args),
        Command::Benchmark(args) => cmd_benchmark(args),
        Command::Curves(args) => cmd_curves(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Io { .. } => 2,
                _ => 1,
            })
        }
    }
}

/// Reads a `--config` JSON file, or yields the all-absent default.
fn load_config<C: serde::de::DeserializeOwned + Default>(path: Option<&PathBuf>) -> Result<C> {
    match path {
        None => Ok(C::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::InvalidInput(format!("config file {}: {e}", p.display())))
        }
    }
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| {
        Error::InvalidInput(format!("{flag} is required (flag or config-file field)"))
    })
}

/// Uses the given seed, or draws one from the OS and announces it so the
/// run stays reproducible.
fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let generated: u64 = rand::random();
        eprintln!("seed: {generated} (generated; pass --seed {generated} to reproduce)");
        generated
    })
}

fn parse_situation(code: u8) -> Result<Situation> {
    Situation::try_from(code).map_err(Error::InvalidInput)
}

fn parse_algorithm(name: &str) -> Result<Algorithm> {
    match name {
        "fisher" => Ok(Algorithm::Fisher),
        "em" => Ok(Algorithm::Em),
        "cem" => Ok(Algorithm::Cem),
        other => Err(Error::InvalidInput(format!(
            "unknown algorithm `{other}` (expected fisher, em or cem)"
        ))),
    }
}

fn parse_c_step_rule(name: &str) -> Result<CStepRule> {
    match name {
        "posterior" => Ok(CStepRule::Posterior),
        "logistic" => Ok(CStepRule::Logistic),
        other => Err(Error::InvalidInput(format!(
            "unknown c-step rule `{other}` (expected posterior or logistic)"
        ))),
    }
}

fn write_or_print(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------
// simulate

#[derive(Args)]
struct SimulateArgs {
    /// Generating regime: 1 = constant means, 2 = affine trends.
    #[arg(long)]
    situation: Option<u8>,
    /// Number of samples on the uniform grid over [0, 5].
    #[arg(long)]
    n: Option<usize>,
    /// Noise seed; omitted = generated and printed to stderr.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path; a `<out>.meta.json` sidecar is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file supplying any of the flags above.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateFileConfig {
    situation: Option<u8>,
    n: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let file: SimulateFileConfig = load_config(args.config.as_ref())?;
    let situation = parse_situation(require(args.situation.or(file.situation), "--situation")?)?;
    let n = require(args.n.or(file.n), "--n")?;
    let out = require(args.out.or(file.out), "--out")?;
    let seed = resolve_seed(args.seed.or(file.seed));

    let spec = SimulationSpec::situation(situation, n, seed);
    let data = simulate(&spec)?;
    write_series_csv(&out, &data.series, Some(&data.true_labels()))?;

    let meta_path = PathBuf::from(format!("{}.meta.json", out.display()));
    let meta = serde_json::to_string_pretty(&spec)
        .map_err(|e| Error::Domain(format!("metadata serialisation failed: {e}")))?;
    std::fs::write(&meta_path, meta + "\n").map_err(|e| Error::io(&meta_path, e))
}

// ---------------------------------------------------------------------
// segment

#[derive(Args)]
struct SegmentArgs {
    /// Estimator: fisher, em or cem.
    #[arg(long)]
    algo: Option<String>,
    /// Number of ordered classes.
    #[arg(long)]
    k: Option<usize>,
    /// Polynomial degree of the per-class trend.
    #[arg(long)]
    degree: Option<usize>,
    /// Input CSV (`t,y` with header; an extra label column is ignored).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Restart seed for em/cem; omitted = generated and printed to stderr.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of em/cem restarts.
    #[arg(long)]
    restarts: Option<usize>,
    /// Relative log-likelihood convergence tolerance for em/cem.
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration cap for em/cem.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Hard-assignment rule for cem: posterior or logistic.
    #[arg(long)]
    c_step_rule: Option<String>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file supplying any of the flags above.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentFileConfig {
    algo: Option<String>,
    k: Option<usize>,
    degree: Option<usize>,
    input: Option<PathBuf>,
    seed: Option<u64>,
    restarts: Option<usize>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    c_step_rule: Option<String>,
    out: Option<PathBuf>,
}

/// Effective configuration echoed into the report. Estimator-specific
/// fields stay absent for algorithms that do not use them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentConfigEcho {
    pub k: usize,
    pub degree: usize,
    pub input: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_step_rule: Option<CStepRule>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentSummary {
    pub class: usize,
    /// Half-open sample index range `[start, end)` of this class.
    pub start: usize,
    pub end: usize,
    /// Polynomial coefficients, constant term first.
    pub beta: Vec<f64>,
    pub sigma2: f64,
}

/// The JSON document `segment` emits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentDocument {
    pub algorithm: Algorithm,
    pub config: SegmentConfigEcho,
    pub n: usize,
    pub segments: Vec<SegmentSummary>,
    /// Continuous change instants, taken midway between the last sample of
    /// one class and the first sample of the next.
    pub change_times: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_likelihood: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_cost: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub irls_iteration_counts: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restart_index_selected: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop: Option<StopReason>,
    /// Fitted logistic score pairs (em/cem), `[w_k0, w_k1]` per class.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub logistic: Option<Vec<[f64; 2]>>,
    pub wall_clock_seconds: f64,
}

/// Midpoint change instants of a partition on a sampled time grid. A
/// boundary pinned to the series edge degenerates to the edge time.
fn change_times(series: &TimeSeries, partition: &OrderedPartition) -> Vec<f64> {
    let t = series.t();
    let n = series.len();
    partition
        .boundaries()
        .iter()
        .map(|&b| {
            if b == 0 {
                t[0]
            } else if b >= n {
                t[n - 1]
            } else {
                0.5 * (t[b - 1] + t[b])
            }
        })
        .collect()
}

/// Runs one estimator over an in-memory series and assembles the report.
/// Split from the flag handling so library callers and tests can reuse it.
pub fn segment_series(
    series: &TimeSeries,
    algorithm: Algorithm,
    echo: SegmentConfigEcho,
) -> Result<SegmentDocument> {
    let k = echo.k;
    let degree = echo.degree;
    match algorithm {
        Algorithm::Fisher => {
            let started = Instant::now();
            let seg = fisher_segment(series, k, DiameterKind::Polynomial { degree })?;
            let wall_clock_seconds = started.elapsed().as_secs_f64();
            let segments = seg
                .fits
                .iter()
                .enumerate()
                .map(|(class, fit)| SegmentSummary {
                    class,
                    start: seg.partition.range(class).start,
                    end: seg.partition.range(class).end,
                    beta: fit.beta.clone(),
                    sigma2: fit.sigma2,
                })
                .collect();
            Ok(SegmentDocument {
                algorithm,
                n: series.len(),
                segments,
                change_times: change_times(series, &seg.partition),
                log_likelihood: None,
                total_cost: Some(seg.total_cost),
                n_iterations: None,
                irls_iteration_counts: None,
                restart_index_selected: None,
                stop: None,
                logistic: None,
                wall_clock_seconds,
                config: echo,
            })
        }
        Algorithm::Em | Algorithm::Cem => {
            let em_config = EmConfig {
                max_iterations: echo.max_iter.unwrap_or_else(|| EmConfig::default().max_iterations),
                rel_tol: echo.tol.unwrap_or_else(|| EmConfig::default().rel_tol),
                n_restarts: echo.restarts.unwrap_or_else(|| EmConfig::default().n_restarts),
                seed: echo.seed.unwrap_or_default(),
                ..EmConfig::default()
            };
            let started = Instant::now();
            let report = if algorithm == Algorithm::Em {
                em_fit(series, k, degree, &em_config)?
            } else {
                let config = CemConfig {
                    em: em_config,
                    c_step_rule: echo.c_step_rule.unwrap_or_default(),
                    ..CemConfig::default()
                };
                cem_fit(series, k, degree, &config)?
            };
            let wall_clock_seconds = started.elapsed().as_secs_f64();
            let segments = report
                .params
                .classes
                .iter()
                .enumerate()
                .map(|(class, fit)| SegmentSummary {
                    class,
                    start: report.partition.range(class).start,
                    end: report.partition.range(class).end,
                    beta: fit.beta.clone(),
                    sigma2: fit.sigma2,
                })
                .collect();
            Ok(SegmentDocument {
                algorithm,
                n: series.len(),
                segments,
                change_times: change_times(series, &report.partition),
                log_likelihood: Some(*report.loglik_trace.last().unwrap()),
                total_cost: None,
                n_iterations: Some(report.n_iterations),
                irls_iteration_counts: Some(report.irls_iteration_counts),
                restart_index_selected: Some(report.restart_index_selected),
                stop: Some(report.stop),
                logistic: Some(report.params.logistic.pairs().to_vec()),
                wall_clock_seconds,
                config: echo,
            })
        }
    }
}

fn cmd_segment(args: SegmentArgs) -> Result<()> {
    let file: SegmentFileConfig = load_config(args.config.as_ref())?;
    let algorithm = parse_algorithm(&require(args.algo.or(file.algo), "--algo")?)?;
    let k = require(args.k.or(file.k), "--k")?;
    let degree = require(args.degree.or(file.degree), "--degree")?;
    let input = require(args.input.or(file.input), "--input")?;
    let out = args.out.or(file.out);

    let (series, _labels) = read_series_csv(&input)?;

    let uses_seed = algorithm != Algorithm::Fisher;
    let echo = SegmentConfigEcho {
        k,
        degree,
        input: input.display().to_string(),
        seed: uses_seed.then(|| resolve_seed(args.seed.or(file.seed))),
        restarts: uses_seed
            .then(|| args.restarts.or(file.restarts).unwrap_or_else(|| EmConfig::default().n_restarts)),
        tol: uses_seed.then(|| args.tol.or(file.tol).unwrap_or_else(|| EmConfig::default().rel_tol)),
        max_iter: uses_seed
            .then(|| args.max_iter.or(file.max_iter).unwrap_or_else(|| EmConfig::default().max_iterations)),
        c_step_rule: if algorithm == Algorithm::Cem {
            Some(match args.c_step_rule.or(file.c_step_rule) {
                Some(name) => parse_c_step_rule(&name)?,
                None => CStepRule::default(),
            })
        } else {
            None
        },
    };

    let document = segment_series(&series, algorithm, echo)?;
    let json = serde_json::to_string_pretty(&document)
        .map_err(|e| Error::Domain(format!("report serialisation failed: {e}")))?;
    write_or_print(out.as_ref(), &(json + "\n"))
}

// ---------------------------------------------------------------------
// benchmark

#[derive(Args)]
struct BenchmarkArgs {
    /// Comma-separated sample sizes, e.g. 100,300,500.
    #[arg(long)]
    n_list: Option<String>,
    /// Comma-separated situations out of {1,2}.
    #[arg(long)]
    situations: Option<String>,
    /// Trials per (situation, n) cell.
    #[arg(long)]
    repeats: Option<usize>,
    /// Comma-separated algorithms out of {fisher,em,cem}.
    #[arg(long)]
    algorithms: Option<String>,
    /// Base seed; omitted = generated and printed to stderr.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory receiving errors.csv, timings.csv and metadata.json.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Desk-scale preset: n_list 100,300,500 and 5 repeats.
    #[arg(long)]
    quick: bool,
    /// JSON file supplying any of the flags above.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchmarkFileConfig {
    n_list: Option<Vec<usize>>,
    situations: Option<Vec<u8>>,
    repeats: Option<usize>,
    algorithms: Option<Vec<String>>,
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
}

fn parse_comma_list<T, F>(text: &str, what: &str, parse: F) -> Result<Vec<T>>
where
    F: Fn(&str) -> Result<T>,
{
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            parse(s).map_err(|e| Error::InvalidInput(format!("{what} entry `{s}`: {e}")))
        })
        .collect()
}

fn cmd_benchmark(args: BenchmarkArgs) -> Result<()> {
    let file: BenchmarkFileConfig = load_config(args.config.as_ref())?;
    let defaults = BenchmarkPlan::default();

    // Layering: stock defaults, then the --quick preset, then the config
    // file, then explicit flags.
    let mut n_list = if args.quick { vec![100, 300, 500] } else { defaults.n_list.clone() };
    if let Some(list) = file.n_list {
        n_list = list;
    }
    if let Some(text) = &args.n_list {
        n_list = parse_comma_list(text, "--n-list", |s| {
            s.parse::<usize>()
                .map_err(|e| Error::InvalidInput(e.to_string()))
        })?;
    }

    let mut repeats = if args.quick { 5 } else { defaults.repeats };
    if let Some(r) = file.repeats {
        repeats = r;
    }
    if let Some(r) = args.repeats {
        repeats = r;
    }

    let mut situations = defaults.situations.clone();
    if let Some(codes) = file.situations {
        situations = codes
            .into_iter()
            .map(parse_situation)
            .collect::<Result<_>>()?;
    }
    if let Some(text) = &args.situations {
        situations = parse_comma_list(text, "--situations", |s| {
            let code: u8 = s
                .parse()
                .map_err(|e: std::num::ParseIntError| Error::InvalidInput(e.to_string()))?;
            parse_situation(code)
        })?;
    }

    let mut algorithms = defaults.algorithms.clone();
    if let Some(names) = file.algorithms {
        algorithms = names
            .iter()
            .map(|s| parse_algorithm(s))
            .collect::<Result<_>>()?;
    }
    if let Some(text) = &args.algorithms {
        algorithms = parse_comma_list(text, "--algorithms", |s| parse_algorithm(s))?;
    }

    let out_dir = require(args.out_dir.or(file.out_dir), "--out-dir")?;
    let base_seed = resolve_seed(args.seed.or(file.seed));

    let plan = BenchmarkPlan {
        n_list,
        situations,
        repeats,
        algorithms,
        base_seed,
        ..BenchmarkPlan::default()
    };
    plan.validate()?;

    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let result = run_benchmark(&plan)?;
    write_benchmark_outputs(&result, &out_dir)?;

    let failures: usize = result.cells.iter().map(|c| c.failures).sum();
    eprintln!(
        "benchmark: {} trials across {} cells written to {} ({} failures)",
        result.trials.len(),
        result.cells.len(),
        out_dir.display(),
        failures
    );
    Ok(())
}

// ---------------------------------------------------------------------
// curves

#[derive(Args)]
struct CurvesArgs {
    /// Number of classes.
    #[arg(long)]
    k: Option<usize>,
    /// JSON array of `[w0, w1]` score pairs, K or K-1 rows; the last class
    /// is pinned to zero. Omitted = all-zero scores (uniform curves).
    #[arg(long)]
    params: Option<String>,
    #[arg(long)]
    t_min: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    /// Number of grid intervals; the CSV holds steps+1 rows.
    #[arg(long)]
    steps: Option<usize>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file supplying any of the flags above.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CurvesFileConfig {
    k: Option<usize>,
    params: Option<Vec<[f64; 2]>>,
    t_min: Option<f64>,
    t_max: Option<f64>,
    steps: Option<usize>,
    out: Option<PathBuf>,
}

/// Builds pinned logistic parameters for `k` classes from user rows:
/// either all `k` score pairs or the `k-1` free ones.
fn curves_params(k: usize, rows: Vec<[f64; 2]>) -> Result<LogisticParams> {
    if rows.is_empty() {
        return Ok(LogisticParams::flat(k));
    }
    let mut pairs = rows;
    if pairs.len() == k - 1 {
        pairs.push([0.0, 0.0]);
    }
    if pairs.len() != k {
        return Err(Error::InvalidInput(format!(
            "--params holds {} rows; {k} classes need {k} or {} rows",
            pairs.len(),
            k - 1
        )));
    }
    LogisticParams::from_pairs(pairs)
}

fn cmd_curves(args: CurvesArgs) -> Result<()> {
    let file: CurvesFileConfig = load_config(args.config.as_ref())?;
    let k = require(args.k.or(file.k), "--k")?;
    if k == 0 {
        return Err(Error::InvalidInput("--k must be at least 1".into()));
    }
    let rows: Vec<[f64; 2]> = match args.params {
        Some(text) => serde_json::from_str(&text)
            .map_err(|e| Error::InvalidInput(format!("--params is not a JSON array of [w0, w1] pairs: {e}")))?,
        None => file.params.unwrap_or_default(),
    };
    let params = curves_params(k, rows)?;
    let t_min = args.t_min.or(file.t_min).unwrap_or(0.0);
    let t_max = args.t_max.or(file.t_max).unwrap_or(5.0);
    let steps = args.steps.or(file.steps).unwrap_or(500);
    if !(t_min < t_max) {
        return Err(Error::InvalidInput(format!(
            "--t-min {t_min} must be below --t-max {t_max}"
        )));
    }
    if steps == 0 {
        return Err(Error::InvalidInput("--steps must be at least 1".into()));
    }

    let t: Vec<f64> = (0..=steps)
        .map(|i| t_min + (t_max - t_min) * i as f64 / steps as f64)
        .collect();
    let pi = logistic::probabilities(&t, &params);

    let mut out = String::with_capacity((steps + 2) * 24 * (k + 1));
    out.push('t');
    for class in 1..=k {
        out.push_str(&format!(",pi_{class}"));
    }
    out.push('\n');
    for (i, &ti) in t.iter().enumerate() {
        out.push_str(&fmt_g17(ti));
        for class in 0..k {
            out.push(',');
            out.push_str(&fmt_g17(pi[[i, class]]));
        }
        out.push('\n');
    }
    write_or_print(args.out.or(file.out).as_ref(), &out)
}
