//! Runs a small grid of the error/runtime benchmark and prints the
//! per-cell summaries plus the fitted log-log runtime slopes.
//!
//! The dynamic program revisits every candidate segment (quadratic in n),
//! while both mixture estimators sweep the series a bounded number of
//! times (roughly linear); the slopes below show exactly that.
//!
//! ```text
//! cargo run --release --example benchmark_scaling
//! ```

use ordseg::bench::scaling_summary;
use ordseg::prelude::*;

fn main() {
    let plan = BenchmarkPlan {
        n_list: vec![200, 400, 800, 1600],
        situations: vec![Situation::ConstantMeans],
        repeats: 5,
        base_seed: 1,
        ..BenchmarkPlan::default()
    };
    let result = run_benchmark(&plan).unwrap();

    println!("{:>6} {:>8} {:>12} {:>12} {:>10}", "n", "algo", "mean err %", "std err %", "mean sec");
    for cell in &result.cells {
        println!(
            "{:>6} {:>8} {:>12.3} {:>12.3} {:>10.5}",
            cell.n,
            cell.algorithm.name(),
            cell.mean_error_pct.unwrap(),
            cell.std_error_pct.unwrap(),
            cell.mean_seconds.unwrap()
        );
    }

    let scaling = scaling_summary(&result).unwrap();
    let sit = scaling.for_situation(Situation::ConstantMeans).unwrap();
    println!();
    println!("log-log runtime slopes:");
    for s in &sit.slopes {
        println!("  {:>8} {:>6.3}", s.algorithm.name(), s.loglog_slope);
    }
    println!();
    println!("dynamic-program time over mixture time:");
    for r in &sit.ratios {
        println!(
            "  n = {:>5}: fisher/em {:>7.3}, fisher/cem {:>7.3}",
            r.n,
            r.fisher_over_em.unwrap(),
            r.fisher_over_cem.unwrap()
        );
    }
}
