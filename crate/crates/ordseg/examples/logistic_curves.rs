//! The time-varying class proportions: affine scores through a softmax.
//! Shows how the slope magnitude controls how sharply one class hands
//! over to the next, and that the argmax labeling is always contiguous.
//!
//! ```text
//! cargo run --release --example logistic_curves
//! ```

use ordseg::logistic::ordered_labeling;
use ordseg::prelude::*;

fn main() {
    let t: Vec<f64> = (0..=500).map(|i| i as f64 * 0.01).collect();

    // Two classes handing over at t = 2: score pair (w0, w1) = (-2λ, λ)
    // puts the crossing where the free score hits zero. Steeper slopes
    // squeeze the soft zone toward a step.
    println!("pi_1(t) for a handover at t = 2:");
    println!("{:>12} {:>8} {:>8} {:>8} {:>8} {:>8}", "slope", "t=1.0", "t=1.8", "t=2.0", "t=2.2", "t=3.0");
    for lambda in [-1.0, -5.0, -50.0] {
        let params = LogisticParams::from_pairs(vec![[-2.0 * lambda, lambda], [0.0, 0.0]]).unwrap();
        let p = probabilities(&t, &params);
        let at = |x: f64| p[[(x / 0.01).round() as usize, 0]];
        println!(
            "{lambda:>12} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            at(1.0),
            at(1.8),
            at(2.0),
            at(2.2),
            at(3.0)
        );
    }

    // Three classes active in succession; the labeling the curves induce
    // is contiguous by construction (log-odds are affine in t).
    let params = LogisticParams::from_pairs(vec![[10.0, -8.0], [9.0, -3.0], [0.0, 0.0]]).unwrap();
    let labeling = ordered_labeling(&t, &params).unwrap();
    println!();
    println!(
        "three-class example: boundaries at t = {:?}, repaired samples: {}",
        labeling
            .partition
            .boundaries()
            .iter()
            .map(|&i| t[i])
            .collect::<Vec<_>>(),
        labeling.repaired
    );

    for (c, [w0, w1]) in params.pairs().iter().enumerate() {
        println!("  class {c}: score {w0:>5.1} + {w1:>5.1} t");
    }

    // The same rows the `ordseg curves` subcommand writes as CSV.
    println!();
    let p = probabilities(&t, &params);
    println!("{:>5} {:>8} {:>8} {:>8}", "t", "pi_1", "pi_2", "pi_3");
    for i in (0..=500).step_by(100) {
        println!(
            "{:>5.1} {:>8.4} {:>8.4} {:>8.4}",
            t[i],
            p[[i, 0]],
            p[[i, 1]],
            p[[i, 2]]
        );
    }
}
