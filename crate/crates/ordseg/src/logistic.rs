//! Time-indexed multinomial logistic proportions and their weighted
//! maximum-likelihood fit (Newton/IRLS).
//!
//! Class `k` carries an affine score `a_k(t) = w_k0 + w_k1 t`; proportions
//! are the softmax of the scores. Because every score is affine in `t`, the
//! pairwise log-odds are monotone in `t` and the per-point argmax labeling
//! is always time-ordered. Steep slopes approach hard ordered partitions.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::solve_spd;

use crate::model::WeightMatrix;
use crate::partition::{repair_non_decreasing, OrderedPartition};

/// Coefficient pairs `[intercept, slope]` of the class scores.
///
/// The softmax is invariant under a common shift, so the last class is
/// pinned to `(0, 0)`; a `K`-class process has `2(K - 1)` free parameters.
/// [`LogisticParams::from_pairs`] accepts arbitrary pairs and re-pins by
/// subtracting the last pair from every class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pairs: Vec<[f64; 2]>,
}

impl LogisticParams {
    /// All-zero scores: uniform proportions at every `t`.
    pub fn flat(num_classes: usize) -> Self {
        LogisticParams {
            pairs: vec![[0.0, 0.0]; num_classes.max(1)],
        }
    }

    /// Normalises arbitrary score pairs into pinned form (last pair zero).
    pub fn from_pairs(pairs: Vec<[f64; 2]>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidInput("need at least one class".into()));
        }
        if pairs.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite logistic coefficient".into()));
        }
        let last = *pairs.last().unwrap();
        let pairs = pairs
            .iter()
            .map(|p| [p[0] - last[0], p[1] - last[1]])
            .collect();
        Ok(LogisticParams { pairs })
    }

    pub fn num_classes(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[[f64; 2]] {
        &self.pairs
    }

    /// Steepness/centre form of class `k`'s score: `a_k(t) = l (t + g)`
    /// with steepness `l = w_k1` and centre `g = w_k0 / w_k1` (`None` for a
    /// flat score).
    pub fn steepness_center(&self, k: usize) -> (f64, Option<f64>) {
        let [w0, w1] = self.pairs[k];
        if w1 == 0.0 {
            (0.0, None)
        } else {
            (w1, Some(w0 / w1))
        }
    }

    /// Free parameters `[w_00, w_01, ..., w_{K-2,0}, w_{K-2,1}]`.
    fn free(&self) -> Vec<f64> {
        self.pairs[..self.pairs.len() - 1]
            .iter()
            .flatten()
            .copied()
            .collect()
    }

    fn from_free(num_classes: usize, theta: &[f64]) -> Self {
        debug_assert_eq!(theta.len(), 2 * (num_classes - 1));
        let mut pairs: Vec<[f64; 2]> =
            theta.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        pairs.push([0.0, 0.0]);
        LogisticParams { pairs }
    }
}

/// `n x K` matrix of log-proportions `log pi_k(t_i)`, computed as a shifted
/// log-softmax so it is finite-safe for arbitrary coefficient magnitudes.
pub fn log_probabilities(t: &[f64], params: &LogisticParams) -> Array2<f64> {
    let k = params.num_classes();
    let mut out = Array2::<f64>::zeros((t.len(), k));
    let mut scores = vec![0.0; k];
    for (i, &ti) in t.iter().enumerate() {
        let mut m = f64::NEG_INFINITY;
        for (c, [w0, w1]) in params.pairs.iter().enumerate() {
            scores[c] = w0 + w1 * ti;
            m = m.max(scores[c]);
        }
        let lse = m + scores.iter().map(|&s| (s - m).exp()).sum::<f64>().ln();
        for c in 0..k {
            out[[i, c]] = scores[c] - lse;
        }
    }
    out
}

/// `n x K` matrix of proportions `pi_k(t_i)`; rows sum to 1.
pub fn probabilities(t: &[f64], params: &LogisticParams) -> Array2<f64> {
    let mut out = log_probabilities(t, params);
    out.mapv_inplace(f64::exp);
    out
}

/// Hard ordered labeling induced by the proportions.
#[derive(Debug, Clone)]
pub struct LogisticLabeling {
    pub partition: OrderedPartition,
    /// Samples whose raw argmax was overruled to restore ordering. The raw
    /// argmax of affine scores is already ordered up to floating-point ties,
    /// so this is almost always 0.
    pub repaired: usize,
}

/// Labels every sample with its most probable class (lowest index on ties)
/// and repairs any out-of-order sample to its left neighbour's class.
/// The resulting partition may have empty classes; callers decide whether
/// that is an error.
pub fn ordered_labeling(t: &[f64], params: &LogisticParams) -> Result<LogisticLabeling> {
    if t.is_empty() {
        return Err(Error::InvalidInput("empty time grid".into()));
    }
    let probs = probabilities(t, params);
    let mut labels = Vec::with_capacity(t.len());
    for i in 0..t.len() {
        let row = probs.row(i);
        let mut best = 0;
        for c in 1..row.len() {
            if row[c] > row[best] {
                best = c;
            }
        }
        labels.push(best);
    }
    let repaired = repair_non_decreasing(&mut labels);
    let partition = OrderedPartition::from_labels(&labels, params.num_classes())?;
    Ok(LogisticLabeling { partition, repaired })
}

/// Knobs of the Newton/IRLS fit. Defaults match the estimators' contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrlsOptions {
    /// Newton iteration cap (the "M" of the fit's complexity).
    pub max_iterations: usize,
    /// Stop when the objective gain stays below this on two consecutive
    /// steps (the second step polishes the gradient before stopping).
    pub q1_tol: f64,
    /// Stop when the gradient infinity-norm falls below this.
    pub grad_tol: f64,
    /// Step-halving attempts per iteration before giving up on a direction.
    pub max_halvings: usize,
    /// Coefficient magnitude cap; hitting it declares saturation instead of
    /// letting a separable fit overflow.
    pub coeff_clamp: f64,
}

impl Default for IrlsOptions {
    fn default() -> Self {
        IrlsOptions {
            max_iterations: 50,
            q1_tol: 1e-8,
            grad_tol: 1e-7,
            max_halvings: 30,
            coeff_clamp: 1e4,
        }
    }
}

/// Result of a weighted logistic fit.
#[derive(Debug, Clone)]
pub struct IrlsFit {
    pub params: LogisticParams,
    /// Objective `Q1 = Σ_ik w_ik log pi_k(t_i)` after the initial point and
    /// each accepted Newton step; non-decreasing.
    pub q1_trace: Vec<f64>,
    pub iterations: usize,
    /// Set when the weights are (near-)separable: a coefficient hit the
    /// clamp, or the fitted proportions are numerically hard at every
    /// sample. The returned params are then a plateau point, not an
    /// interior maximum.
    pub saturated: bool,
}

fn q1_value(log_probs: &Array2<f64>, weights: &WeightMatrix) -> f64 {
    let w = weights.as_array();
    let mut q = 0.0;
    for i in 0..w.nrows() {
        for k in 0..w.ncols() {
            let wi = w[[i, k]];
            if wi > 0.0 {
                q += wi * log_probs[[i, k]];
            }
        }
    }
    q
}

/// Weighted multinomial logistic regression on `t` maximising
/// `Q1(w) = Σ_ik weights_ik log pi_k(t_i; w)` by damped Newton steps.
///
/// `Q1` is concave; each iteration solves the negated-Hessian system
/// (ridged by `1e-10` when ill-conditioned) and halves the step until the
/// objective increases. Warm-start via `init` to continue a previous fit.
pub fn irls_fit(t: &[f64], weights: &WeightMatrix, init: &LogisticParams) -> Result<IrlsFit> {
    irls_fit_with(t, weights, init, &IrlsOptions::default())
}

pub fn irls_fit_with(
    t: &[f64],
    weights: &WeightMatrix,
    init: &LogisticParams,
    opts: &IrlsOptions,
) -> Result<IrlsFit> {
    let n = t.len();
    let k = weights.num_classes();
    if n != weights.nrows() {
        return Err(Error::InvalidInput(format!(
            "{} time points but {} weight rows",
            n,
            weights.nrows()
        )));
    }
    if init.num_classes() != k {
        return Err(Error::InvalidInput(format!(
            "init has {} classes, weights have {k}",
            init.num_classes()
        )));
    }
    if n < k {
        return Err(Error::InvalidInput(format!(
            "need at least as many samples as classes ({n} < {k})"
        )));
    }

    if k == 1 {
        // No free parameters: pi = 1 everywhere and Q1 = 0.
        return Ok(IrlsFit {
            params: LogisticParams::flat(1),
            q1_trace: vec![0.0],
            iterations: 0,
            saturated: false,
        });
    }

    let dim = 2 * (k - 1);
    let mut theta = init.free();
    let mut saturated = clamp_theta(&mut theta, opts.coeff_clamp);
    let mut params = LogisticParams::from_free(k, &theta);
    let mut log_probs = log_probabilities(t, &params);
    let mut q1 = q1_value(&log_probs, weights);
    let mut trace = vec![q1];
    let w = weights.as_array();

    let mut iterations = 0;
    let mut prev_gain_small = false;
    for _ in 0..opts.max_iterations {
        // Gradient and negated Hessian of Q1 in the free parameters.
        let mut grad = Array1::<f64>::zeros(dim);
        let mut neg_hess = Array2::<f64>::zeros((dim, dim));
        for i in 0..n {
            let ti = t[i];
            for a in 0..k - 1 {
                let pa = log_probs[[i, a]].exp();
                let ra = w[[i, a]] - pa;
                grad[2 * a] += ra;
                grad[2 * a + 1] += ra * ti;
                for b in a..k - 1 {
                    let pb = log_probs[[i, b]].exp();
                    let h = if a == b { pa * (1.0 - pa) } else { -pa * pb };
                    neg_hess[[2 * a, 2 * b]] += h;
                    neg_hess[[2 * a, 2 * b + 1]] += h * ti;
                    neg_hess[[2 * a + 1, 2 * b]] += h * ti;
                    neg_hess[[2 * a + 1, 2 * b + 1]] += h * ti * ti;
                }
            }
        }
        for a in 0..dim {
            for b in 0..a {
                neg_hess[[a, b]] = neg_hess[[b, a]];
            }
        }

        let grad_norm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if grad_norm < opts.grad_tol {
            break;
        }

        let direction = solve_spd(&neg_hess, &grad, 1e-10)?;
        let mut accepted = false;
        let mut scale = 1.0;
        for _ in 0..=opts.max_halvings {
            let mut cand: Vec<f64> = theta
                .iter()
                .zip(direction.iter())
                .map(|(&th, &d)| th + scale * d)
                .collect();
            let cand_clamped = clamp_theta(&mut cand, opts.coeff_clamp);
            let cand_params = LogisticParams::from_free(k, &cand);
            let cand_log_probs = log_probabilities(t, &cand_params);
            let cand_q1 = q1_value(&cand_log_probs, weights);
            if cand_q1 > q1 {
                theta = cand;
                params = cand_params;
                log_probs = cand_log_probs;
                q1 = cand_q1;
                saturated |= cand_clamped;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            // No ascent direction survives halving: numerically stationary.
            break;
        }
        iterations += 1;
        trace.push(q1);
        let gain = trace[trace.len() - 1] - trace[trace.len() - 2];
        let gain_small = gain.abs() < opts.q1_tol;
        if gain_small && prev_gain_small {
            break;
        }
        prev_gain_small = gain_small;
    }

    // Separable weights push the optimum to infinity; if the fit stopped on
    // an all-hard plateau, report it as saturation even below the clamp.
    if !saturated {
        saturated = (0..n).all(|i| {
            (0..k).any(|c| log_probs[[i, c]] > (-1e-4f64).ln_1p())
        });
    }

    Ok(IrlsFit {
        params,
        q1_trace: trace,
        iterations,
        saturated,
    })
}

fn clamp_theta(theta: &mut [f64], clamp: f64) -> bool {
    let mut clamped = false;
    for v in theta.iter_mut() {
        if v.abs() > clamp {
            *v = v.signum() * clamp;
            clamped = true;
        }
    }
    clamped
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn probabilities_rows_sum_to_one_even_for_huge_coefficients() {
        let params =
            LogisticParams::from_pairs(vec![[900.0, -450.0], [10.0, -2.0], [0.0, 0.0]]).unwrap();
        let t: Vec<f64> = (0..101).map(|i| 5.0 * i as f64 / 100.0).collect();
        let p = probabilities(&t, &params);
        for row in p.rows() {
            let s: f64 = row.sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn steep_two_class_curve_crosses_at_the_centre() {
        // a_1(t) = -50 (t - 2): centre 2, steepness -50.
        let params = LogisticParams::from_pairs(vec![[100.0, -50.0], [0.0, 0.0]]).unwrap();
        let p_18 = probabilities(&[1.8], &params)[[0, 0]];
        let p_22 = probabilities(&[2.2], &params)[[0, 0]];
        let p_20 = probabilities(&[2.0], &params)[[0, 0]];
        assert!(p_18 > 0.999);
        assert!(p_22 < 0.001);
        assert_relative_eq!(p_20, 0.5, max_relative = 1e-12);
        let (steep, centre) = params.steepness_center(0);
        assert_relative_eq!(steep, -50.0);
        assert_relative_eq!(centre.unwrap(), -2.0);
    }

    #[test]
    fn pinning_is_a_pure_shift_that_preserves_probabilities() {
        let raw = vec![[3.0, -1.0], [1.0, 0.5], [2.0, 2.0]];
        let pinned = LogisticParams::from_pairs(raw.clone()).unwrap();
        assert_eq!(pinned.pairs()[2], [0.0, 0.0]);
        let t = [0.0, 1.0, 2.5, 4.0];
        // Reference softmax straight from the raw pairs.
        for (i, &ti) in t.iter().enumerate() {
            let scores: Vec<f64> = raw.iter().map(|[w0, w1]| w0 + w1 * ti).collect();
            let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = scores.iter().map(|s| (s - m).exp()).sum();
            let p = probabilities(&t, &pinned);
            for c in 0..3 {
                assert_relative_eq!(
                    p[[i, c]],
                    (scores[c] - m).exp() / z,
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn argmax_labeling_is_ordered_without_repair() {
        let params =
            LogisticParams::from_pairs(vec![[4.0, -3.0], [3.0, -1.5], [0.0, 0.0]]).unwrap();
        let t: Vec<f64> = (0..200).map(|i| 5.0 * i as f64 / 199.0).collect();
        let lab = ordered_labeling(&t, &params).unwrap();
        assert_eq!(lab.repaired, 0);
        let labels = lab.partition.labels();
        assert!(labels.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn uniform_weights_fit_to_flat_proportions() {
        let t: Vec<f64> = (0..30).map(|i| i as f64 / 29.0 * 5.0).collect();
        let weights = WeightMatrix::uniform(30, 3);
        let fit = irls_fit(&t, &weights, &LogisticParams::flat(3)).unwrap();
        assert_eq!(fit.iterations, 0);
        assert!(fit.params.pairs().iter().flatten().all(|&v| v == 0.0));
        assert_relative_eq!(fit.q1_trace[0], -(30.0 * 3.0f64.ln()), max_relative = 1e-12);
        assert!(!fit.saturated);
    }

    #[test]
    fn hard_split_saturates_and_crosses_within_one_sampling_step() {
        let n = 50;
        let t: Vec<f64> = (0..n).map(|i| 5.0 * i as f64 / (n - 1) as f64).collect();
        let dt = t[1] - t[0];
        let labels: Vec<usize> = t.iter().map(|&ti| usize::from(ti > 2.0)).collect();
        let weights = WeightMatrix::hard(&labels, 2).unwrap();
        let fit = irls_fit(&t, &weights, &LogisticParams::flat(2)).unwrap();
        assert!(fit.saturated, "perfect separation must be flagged");
        // Bisection on pi_1(t) - 0.5 to locate the fitted crossing.
        let cross = {
            let f = |x: f64| probabilities(&[x], &fit.params)[[0, 0]] - 0.5;
            let (mut lo, mut hi) = (0.0, 5.0);
            assert!(f(lo) > 0.0 && f(hi) < 0.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if f(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        assert!(
            (cross - 2.0).abs() <= dt,
            "crossing {cross} further than one step from 2"
        );
        // Ascent all the way up.
        for w in fit.q1_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-10);
        }
    }

    #[test]
    fn soft_random_weights_reach_an_interior_stationary_point() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 60;
        let t: Vec<f64> = (0..n).map(|i| 5.0 * i as f64 / (n - 1) as f64).collect();
        let mut w = Array2::<f64>::zeros((n, 3));
        for i in 0..n {
            let mut row = [0.0; 3];
            let mut s = 0.0;
            for v in row.iter_mut() {
                *v = rng.random_range(0.05..1.0);
                s += *v;
            }
            for (c, v) in row.iter().enumerate() {
                w[[i, c]] = v / s;
            }
        }
        let weights = WeightMatrix::new(w).unwrap();
        let fit = irls_fit(&t, &weights, &LogisticParams::flat(3)).unwrap();
        assert!(!fit.saturated);
        // Central finite differences of a naive Q1 evaluated without any
        // shared code path: plain exp/sum softmax.
        let naive_q1 = |theta: &[f64]| -> f64 {
            let mut q = 0.0;
            for (i, &ti) in t.iter().enumerate() {
                let scores = [
                    theta[0] + theta[1] * ti,
                    theta[2] + theta[3] * ti,
                    0.0,
                ];
                let z: f64 = scores.iter().map(|s| s.exp()).sum();
                for c in 0..3 {
                    q += weights.as_array()[[i, c]] * (scores[c].exp() / z).ln();
                }
            }
            q
        };
        let theta = fit.params.free();
        let h = 1e-5;
        for d in 0..4 {
            let mut up = theta.clone();
            let mut dn = theta.clone();
            up[d] += h;
            dn[d] -= h;
            let g = (naive_q1(&up) - naive_q1(&dn)) / (2.0 * h);
            assert!(g.abs() < 1e-5, "fd gradient component {d} = {g}");
        }
    }

    #[test]
    fn q1_trace_is_monotone_on_a_messy_problem() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let n = 80;
        let t: Vec<f64> = (0..n).map(|i| 5.0 * i as f64 / (n - 1) as f64).collect();
        let mut w = Array2::<f64>::zeros((n, 4));
        for i in 0..n {
            let mut s = 0.0;
            for c in 0..4 {
                let v: f64 = rng.random_range(0.0..1.0);
                w[[i, c]] = v * v;
                s += w[[i, c]];
            }
            for c in 0..4 {
                w[[i, c]] /= s;
            }
        }
        let weights = WeightMatrix::new(w).unwrap();
        let fit = irls_fit(&t, &weights, &LogisticParams::flat(4)).unwrap();
        for pair in fit.q1_trace.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-10);
        }
    }

    #[test]
    fn hardness_increases_with_steepness_towards_the_partition_limit() {
        // Crossings at t = 0.45625 and t = 3.14 fall strictly between the
        // grid points, so steepening drives every sampled row to 0/1.
        let base = vec![[2.3, -2.1], [1.57, -0.5], [0.0, 0.0]];
        let t: Vec<f64> = (0..161).map(|i| 5.0 * i as f64 / 160.0).collect();
        let mut softness_prev = f64::INFINITY;
        for scale in [1.0, 30.0, 3000.0] {
            let pairs: Vec<[f64; 2]> =
                base.iter().map(|[a, b]| [a * scale, b * scale]).collect();
            let params = LogisticParams::from_pairs(pairs).unwrap();
            let p = probabilities(&t, &params);
            let softness = (0..t.len())
                .map(|i| {
                    let top = p.row(i).iter().cloned().fold(0.0f64, f64::max);
                    (top.min(1.0 - top)) * 2.0
                })
                .fold(0.0f64, f64::max);
            assert!(softness <= softness_prev + 1e-12);
            softness_prev = softness;
        }
        assert!(softness_prev < 1e-3);
    }
}
