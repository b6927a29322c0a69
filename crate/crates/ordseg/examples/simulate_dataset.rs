//! Generates both benchmark situations and shows what the simulator
//! records: grid, change times, per-class noise levels, ground truth.
//!
//! ```text
//! cargo run --release --example simulate_dataset
//! ```

use ordseg::io::series_to_csv;
use ordseg::prelude::*;

fn main() {
    for situation in [Situation::ConstantMeans, Situation::AffineMeans] {
        let spec = SimulationSpec::situation(situation, 300, 42);
        let data = simulate(&spec).unwrap();

        println!("situation {} (degree {})", situation.code(), situation.degree());
        println!("  n            {}", data.series.len());
        println!("  change times {:?}", spec.change_times);
        println!("  sigmas       {:?}", spec.sigmas);
        println!("  coefficients {:?}", spec.coefficients);
        println!(
            "  truth        boundaries {:?}, class sizes {:?}",
            data.truth.boundaries(),
            (0..data.truth.num_classes())
                .map(|c| data.truth.range(c).len())
                .collect::<Vec<_>>()
        );

        // The CSV form round-trips every f64 bit pattern; the labelled
        // variant is what `ordseg simulate` writes to disk.
        let csv = series_to_csv(&data.series, Some(&data.truth.labels())).unwrap();
        println!("  first rows of the labelled CSV:");
        for line in csv.lines().take(4) {
            println!("    {line}");
        }
        println!();
    }
}
