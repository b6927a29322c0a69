//! Exact segmentation by dynamic programming: fits the piecewise-affine
//! benchmark situation and compares the recovered boundaries with the
//! generator's truth.
//!
//! ```text
//! cargo run --release --example fisher_segmentation
//! ```

use ordseg::prelude::*;

fn main() {
    let spec = SimulationSpec::situation(Situation::AffineMeans, 500, 7);
    let data = simulate(&spec).unwrap();

    let seg = fisher_segment(&data.series, 3, DiameterKind::Polynomial { degree: 1 }).unwrap();

    println!("total within-segment squared error: {:.4}", seg.total_cost);
    println!(
        "boundaries: found {:?}, truth {:?}",
        seg.partition.boundaries(),
        data.truth.boundaries()
    );
    println!(
        "misclassified samples: {:.2}%",
        segmentation_error(&seg.partition, &data.truth).unwrap()
    );
    println!();
    println!("segment   range        intercept    slope     sigma^2");
    for (c, fit) in seg.fits.iter().enumerate() {
        let range = seg.partition.range(c);
        println!(
            "{c:>7}   [{:>3}, {:>3})   {:>9.4} {:>8.4}   {:>9.4}",
            range.start, range.end, fit.beta[0], fit.beta[1], fit.sigma2
        );
    }

    // The degree-0 diameter has a closed incremental form and is the fast
    // path for level-shift data.
    let flat = simulate(&SimulationSpec::situation(Situation::ConstantMeans, 500, 7)).unwrap();
    let seg0 = fisher_segment(&flat.series, 3, DiameterKind::ConstantMean).unwrap();
    println!();
    println!(
        "constant-mean variant: boundaries {:?} (truth {:?}), cost {:.4}",
        seg0.partition.boundaries(),
        flat.truth.boundaries(),
        seg0.total_cost
    );
}
