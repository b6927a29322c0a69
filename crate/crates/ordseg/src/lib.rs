//! Segmentation of one-dimensional time series into time-ordered
//! polynomial-regression classes.
//!
//! Three estimators share one generative model: each class `k` is a
//! polynomial regression with its own noise variance, and class membership
//! evolves over time through multinomial logistic proportions whose scores
//! are affine in `t` (so the classes are contiguous in time).
//!
//! * [`fisher::fisher_segment`] — exact minimisation of the total
//!   within-segment squared error by dynamic programming, `O(K n^2)`
//!   diameter lookups over a precomputed cost matrix.
//! * [`em::em_fit`] — maximum-likelihood fit of the soft mixture by EM;
//!   the logistic M-step is a Newton/IRLS inner loop.
//! * [`cem::cem_fit`] — classification EM: a hard assignment step between
//!   E and M, monitoring the complete-data log-likelihood.
//!
//! A seeded simulator ([`simulate`]), a benchmark harness ([`bench`]) and a
//! small CLI ([`cli`], binary `ordseg`) round out the crate.
//!
//! # Quick start
//!
//! ```
//! use ordseg::prelude::*;
//!
//! let spec = SimulationSpec::situation(Situation::ConstantMeans, 300, 42);
//! let data = simulate(&spec).unwrap();
//! let seg = fisher_segment(&data.series, 3, DiameterKind::ConstantMean).unwrap();
//! assert_eq!(seg.partition.num_classes(), 3);
//! ```
//!
//! # Examples
//!
//! Each major capability has a runnable example:
//!
//! ```text
//! cargo run --release --example simulate_dataset
//! cargo run --release --example fisher_segmentation
//! cargo run --release --example em_fit
//! cargo run --release --example cem_fit
//! cargo run --release --example logistic_curves
//! cargo run --release --example benchmark_scaling
//! ```

pub mod bench;
pub mod cem;
pub mod cli;
pub mod em;
pub mod error;
pub mod fisher;
pub mod io;
pub mod linalg;
pub mod logistic;
pub mod math;
pub mod model;
pub mod partition;
pub mod series;
pub mod simulate;

pub use error::{Error, Result};

/// One-import surface for the common workflow: simulate or load a series,
/// fit it with one of the three estimators, inspect the partition.
pub mod prelude {
    pub use crate::bench::{run_benchmark, segmentation_error, Algorithm, BenchmarkPlan};
    pub use crate::cem::{cem_fit, compare_em_cem, CStepRule, CemConfig, EmptyClassPolicy};
    pub use crate::em::{em_fit, EmConfig, FitReport, StopReason};
    pub use crate::error::{Error, Result};
    pub use crate::fisher::{fisher_segment, DiameterKind, Segmentation};
    pub use crate::io::{read_series_csv, write_series_csv};
    pub use crate::logistic::{irls_fit, probabilities, IrlsOptions, LogisticParams};
    pub use crate::model::{ClassRegression, RegressionMixtureParams, WeightMatrix};
    pub use crate::partition::OrderedPartition;
    pub use crate::series::TimeSeries;
    pub use crate::simulate::{simulate, SimulationSpec, Situation};
}
