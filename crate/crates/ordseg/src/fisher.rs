//! Exact segmentation by dynamic programming over an additive cost.
//!
//! The optimal split of `n` samples into `K` contiguous segments under any
//! additive per-segment cost satisfies
//!
//! ```text
//! C_1(j) = D(0..=j)
//! C_k(j) = min_{ i in [k-1, j-1] }  C_{k-1}(i) + D(i+1..=j)
//! ```
//!
//! where `D` is the segment diameter. Both diameters here are least-squares
//! residuals: the within-segment inertia about the mean, or the residual
//! sum of squares of a degree-`p` polynomial fit. Backtracking recovers the
//! boundaries; the whole procedure is exact, not a local search.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{solve_spd_in_place, weighted_polyfit};
use crate::model::{variance_floor, ClassRegression};
use crate::partition::OrderedPartition;
use crate::series::TimeSeries;

/// Segment cost family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiameterKind {
    /// Squared deviation about the segment mean (a degree-0 fit).
    ConstantMean,
    /// Residual sum of squares of a degree-`degree` polynomial fit.
    Polynomial { degree: usize },
}

impl DiameterKind {
    pub fn degree(&self) -> usize {
        match self {
            DiameterKind::ConstantMean => 0,
            DiameterKind::Polynomial { degree } => *degree,
        }
    }
}

/// Dense matrix of interval costs: `cost(i, j)` is the diameter of samples
/// `i..=j`. Entries below the diagonal are unused.
pub struct CostMatrix {
    n: usize,
    degree: usize,
    cost: Array2<f64>,
}

impl CostMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Cost of the interval `start..=end` (inclusive sample indices).
    pub fn get(&self, start: usize, end: usize) -> f64 {
        debug_assert!(start <= end && end < self.n);
        self.cost[[start, end]]
    }
}

/// The dense matrix needs `8 n^2` bytes; past this the quadratic algorithm
/// is impractical anyway.
pub const MAX_COST_MATRIX_N: usize = 20_000;

/// Computes every interval's least-squares cost in `O(n^2)` solves.
///
/// For each fixed start the interval grows one sample at a time while the
/// running moments `Σ t^r`, `Σ t^a y`, `Σ y^2` are updated, so each entry
/// costs one small normal-equation solve instead of a fresh regression.
/// Segments shorter than `degree + 1` (or numerically singular ones) get an
/// additive ridge of `1e-10` times the moment-matrix trace. Costs are
/// clamped at zero to absorb cancellation error.
pub fn compute_cost_matrix(series: &TimeSeries, kind: DiameterKind) -> Result<CostMatrix> {
    let n = series.len();
    if n > MAX_COST_MATRIX_N {
        return Err(Error::InvalidInput(format!(
            "n = {n} exceeds the dense cost-matrix cap of {MAX_COST_MATRIX_N} \
             ({} GiB would be required)",
            (n * n * 8) >> 30
        )));
    }
    let p = kind.degree();
    let d = p + 1;
    let t = series.t();
    let y = series.y();
    let mut cost = Array2::<f64>::zeros((n, n));

    // Running moments for the interval [i, j]:
    //   moments[r] = Σ t^r  (r <= 2p),  sty[a] = Σ t^a y  (a <= p),  syy = Σ y^2.
    let mut moments = vec![0.0; 2 * p + 1];
    let mut sty = vec![0.0; d];
    let mut powers = vec![0.0; 2 * p + 1];
    let mut gram = vec![0.0; d * d];
    let mut rhs = vec![0.0; d];

    for i in 0..n {
        moments.iter_mut().for_each(|m| *m = 0.0);
        sty.iter_mut().for_each(|s| *s = 0.0);
        let mut syy = 0.0;
        for j in i..n {
            let (tj, yj) = (t[j], y[j]);
            let mut pw = 1.0;
            for entry in powers.iter_mut() {
                *entry = pw;
                pw *= tj;
            }
            for (m, &pwr) in moments.iter_mut().zip(powers.iter()) {
                *m += pwr;
            }
            for (s, &pwr) in sty.iter_mut().zip(powers.iter()) {
                *s += pwr * yj;
            }
            syy += yj * yj;

            let m = j - i + 1;
            let sse = if p == 0 {
                // beta = Σy / m, the 1x1 normal equation.
                let beta = sty[0] / moments[0];
                syy - beta * sty[0]
            } else {
                // Hankel moment matrix: gram[a][b] = Σ t^(a+b).
                for a in 0..d {
                    for b in 0..d {
                        gram[a * d + b] = moments[a + b];
                    }
                }
                rhs.copy_from_slice(&sty);
                let mut solved = m >= d && solve_spd_in_place(&mut gram, &mut rhs, d);
                if !solved {
                    let trace: f64 = (0..d).map(|a| moments[2 * a]).sum();
                    let mut ridge = 1e-10 * trace.max(1.0);
                    for _ in 0..6 {
                        for a in 0..d {
                            for b in 0..d {
                                gram[a * d + b] = moments[a + b];
                            }
                            gram[a * d + a] += ridge;
                        }
                        rhs.copy_from_slice(&sty);
                        if solve_spd_in_place(&mut gram, &mut rhs, d) {
                            solved = true;
                            break;
                        }
                        ridge *= 10.0;
                    }
                    if !solved {
                        return Err(Error::Domain(format!(
                            "interval [{i}, {j}] produced an unsolvable moment matrix"
                        )));
                    }
                }
                let explained: f64 = rhs.iter().zip(sty.iter()).map(|(b, s)| b * s).sum();
                syy - explained
            };
            cost[[i, j]] = sse.max(0.0);
        }
    }
    Ok(CostMatrix { n, degree: p, cost })
}

/// Exact segmentation result.
#[derive(Debug, Clone)]
pub struct Segmentation {
    pub partition: OrderedPartition,
    /// Per-segment least-squares fit; `sigma2` is the mean squared residual
    /// floored by [`variance_floor`].
    pub fits: Vec<ClassRegression>,
    /// Sum of the chosen segments' diameters (the minimised criterion).
    pub total_cost: f64,
}

/// Documented tie handling: among cost-equal segmentations the dynamic
/// program returns the one whose boundary vector is smallest, achieved by
/// scanning candidate split points in ascending order and replacing the
/// incumbent only on a strictly smaller cost.
pub fn tie_break_policy() -> &'static str {
    "lexicographically smallest boundary vector: candidate split points are \
     scanned in ascending order and an incumbent is replaced only on a \
     strictly smaller cost"
}

/// Splits `series` into `k` contiguous segments minimising the summed
/// diameter, exactly. `O(k n^2)` table operations after the `O(n^2)` cost
/// matrix.
pub fn fisher_segment(series: &TimeSeries, k: usize, kind: DiameterKind) -> Result<Segmentation> {
    let costs = compute_cost_matrix(series, kind)?;
    fisher_segment_with_costs(series, &costs, k)
}

/// As [`fisher_segment`], reusing a precomputed cost matrix (e.g. when
/// sweeping over `k`).
pub fn fisher_segment_with_costs(
    series: &TimeSeries,
    costs: &CostMatrix,
    k: usize,
) -> Result<Segmentation> {
    let n = series.len();
    if costs.n != n {
        return Err(Error::InvalidInput(format!(
            "cost matrix covers {} samples, series has {n}",
            costs.n
        )));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!(
            "need 1 <= k <= n, got k = {k} for n = {n}"
        )));
    }

    // best[j]: optimal cost of splitting 0..=j into the current number of
    // segments; prev[ks][j]: last split's argmin for backtracking.
    let mut best: Vec<f64> = (0..n).map(|j| costs.get(0, j)).collect();
    let mut prev = vec![vec![0usize; n]; k];
    for ks in 1..k {
        let mut next = vec![f64::INFINITY; n];
        for j in ks..n {
            let mut arg = ks - 1;
            let mut val = f64::INFINITY;
            for i in ks - 1..j {
                let cand = best[i] + costs.get(i + 1, j);
                if cand < val {
                    val = cand;
                    arg = i;
                }
            }
            next[j] = val;
            prev[ks][j] = arg;
        }
        best = next;
    }

    let total_cost = best[n - 1];
    let mut boundaries = Vec::with_capacity(k - 1);
    let mut end = n - 1;
    for ks in (1..k).rev() {
        let i = prev[ks][end];
        boundaries.push(i + 1);
        end = i;
    }
    boundaries.reverse();
    let partition = OrderedPartition::from_boundaries(n, &boundaries)?;

    let floor = variance_floor(series.y());
    let mut fits = Vec::with_capacity(k);
    for seg in 0..k {
        let r = partition.range(seg);
        let (beta, sse, m) =
            weighted_polyfit(&series.t()[r.clone()], &series.y()[r], None, costs.degree)?;
        fits.push(ClassRegression {
            beta,
            sigma2: (sse / m).max(floor),
        });
    }

    Ok(Segmentation {
        partition,
        fits,
        total_cost,
    })
}
