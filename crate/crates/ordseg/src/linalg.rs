//! Dense symmetric solves for the small normal-equation and Newton systems
//! that appear throughout the crate (dimension = degree + 1 or 2(K - 1),
//! both single digits in practice).

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// In-place Cholesky solve on a flat row-major `d x d` buffer: `a` is
/// overwritten with its lower factor and `b` with the solution. Returns
/// `false` (leaving the buffers partially clobbered) when a pivot is
/// non-positive or non-finite. Allocation-free for hot loops.
pub(crate) fn solve_spd_in_place(a: &mut [f64], b: &mut [f64], d: usize) -> bool {
    debug_assert_eq!(a.len(), d * d);
    debug_assert_eq!(b.len(), d);
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= a[i * d + k] * a[j * d + k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return false;
                }
                a[i * d + i] = s.sqrt();
            } else {
                a[i * d + j] = s / a[j * d + j];
            }
        }
    }
    // L z = b, then L' x = z, both in place.
    for i in 0..d {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * d + k] * b[k];
        }
        b[i] = s / a[i * d + i];
    }
    for i in (0..d).rev() {
        let mut s = b[i];
        for k in i + 1..d {
            s -= a[k * d + i] * b[k];
        }
        b[i] = s / a[i * d + i];
    }
    true
}

/// Solves the symmetric positive-definite system `a x = b`.
///
/// When the plain factorisation fails (rank-deficient or ill-conditioned
/// input) an additive ridge of `jitter` is placed on the diagonal and
/// escalated tenfold for a few attempts before giving up.
pub fn solve_spd(a: &Array2<f64>, b: &Array1<f64>, jitter: f64) -> Result<Array1<f64>> {
    debug_assert_eq!(a.nrows(), a.ncols());
    debug_assert_eq!(a.nrows(), b.len());
    let d = a.nrows();
    let flat: Vec<f64> = a.iter().copied().collect();
    let rhs: Vec<f64> = b.to_vec();
    let mut buf = flat.clone();
    let mut x = rhs.clone();
    if solve_spd_in_place(&mut buf, &mut x, d) {
        return Ok(Array1::from_vec(x));
    }
    let mut ridge = jitter.max(f64::MIN_POSITIVE);
    for _ in 0..6 {
        buf.copy_from_slice(&flat);
        x.copy_from_slice(&rhs);
        for i in 0..d {
            buf[i * d + i] += ridge;
        }
        if solve_spd_in_place(&mut buf, &mut x, d) {
            return Ok(Array1::from_vec(x));
        }
        ridge *= 10.0;
    }
    Err(Error::Domain(format!(
        "symmetric solve failed for a {d}x{d} system even after ridging"
    )))
}

/// Ordinary/weighted polynomial least squares on raw points.
///
/// Fits `y ~ Σ_d beta_d t^d` minimising `Σ w_i (y_i - Σ_d beta_d t_i^d)^2`;
/// `weights = None` means unit weights. Returns `(beta, weighted_sse,
/// total_weight)`. Segments shorter than `degree + 1` (or weight-degenerate
/// ones) are handled by the ridged solve.
pub fn weighted_polyfit(
    t: &[f64],
    y: &[f64],
    weights: Option<&[f64]>,
    degree: usize,
) -> Result<(Vec<f64>, f64, f64)> {
    debug_assert_eq!(t.len(), y.len());
    let d = degree + 1;
    let mut xtx = Array2::<f64>::zeros((d, d));
    let mut xty = Array1::<f64>::zeros(d);
    let mut total = 0.0;
    let mut pow = vec![0.0; d];
    for i in 0..t.len() {
        let w = weights.map_or(1.0, |ws| ws[i]);
        if w == 0.0 {
            continue;
        }
        let mut p = 1.0;
        for entry in pow.iter_mut() {
            *entry = p;
            p *= t[i];
        }
        for a in 0..d {
            for b in a..d {
                xtx[[a, b]] += w * pow[a] * pow[b];
            }
            xty[a] += w * pow[a] * y[i];
        }
        total += w;
    }
    for a in 0..d {
        for b in 0..a {
            xtx[[a, b]] = xtx[[b, a]];
        }
    }
    let trace: f64 = (0..d).map(|i| xtx[[i, i]]).sum();
    let beta = solve_spd(&xtx, &xty, 1e-10 * trace.max(1.0))?;
    let mut sse = 0.0;
    for i in 0..t.len() {
        let w = weights.map_or(1.0, |ws| ws[i]);
        if w == 0.0 {
            continue;
        }
        let mut pred = 0.0;
        let mut p = 1.0;
        for a in 0..d {
            pred += beta[a] * p;
            p *= t[i];
        }
        let r = y[i] - pred;
        sse += w * r * r;
    }
    Ok((beta.to_vec(), sse.max(0.0), total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    #[test]
    fn solves_a_known_spd_system() {
        let a = array![[4.0, 2.0], [2.0, 3.0]];
        let b = array![2.0, 5.0];
        let x = solve_spd(&a, &b, 1e-12).unwrap();
        // inverse = 1/8 [[3,-2],[-2,4]]; x = ( (6-10)/8, (-4+20)/8 ) = (-0.5, 2)
        assert_relative_eq!(x[0], -0.5, max_relative = 1e-12);
        assert_relative_eq!(x[1], 2.0, max_relative = 1e-12);
    }

    #[test]
    fn singular_system_is_rescued_by_the_ridge() {
        let a = array![[1.0, 1.0], [1.0, 1.0]];
        let b = array![2.0, 2.0];
        let x = solve_spd(&a, &b, 1e-10).unwrap();
        // Ridged answer spreads the solution across both coordinates.
        assert_relative_eq!(x[0] + x[1], 2.0, max_relative = 1e-6);
    }

    #[test]
    fn polyfit_recovers_an_exact_line() {
        let t: Vec<f64> = (0..10).map(|i| i as f64 / 3.0).collect();
        let y: Vec<f64> = t.iter().map(|&x| 2.0 + 3.0 * x).collect();
        let (beta, sse, total) = weighted_polyfit(&t, &y, None, 1).unwrap();
        assert_relative_eq!(beta[0], 2.0, max_relative = 1e-10);
        assert_relative_eq!(beta[1], 3.0, max_relative = 1e-10);
        assert!(sse < 1e-18);
        assert_eq!(total, 10.0);
    }

    #[test]
    fn polyfit_with_weights_matches_replicated_points() {
        // Weighting a point by 3 equals repeating it three times.
        let t = [0.0, 1.0, 2.0];
        let y = [1.0, 3.0, 2.0];
        let w = [1.0, 3.0, 1.0];
        let (beta_w, sse_w, _) = weighted_polyfit(&t, &y, Some(&w), 1).unwrap();
        let t_rep = [0.0, 1.0, 1.0, 1.0, 2.0];
        let y_rep = [1.0, 3.0, 3.0, 3.0, 2.0];
        let (beta_r, sse_r, _) = weighted_polyfit(&t_rep, &y_rep, None, 1).unwrap();
        assert_relative_eq!(beta_w[0], beta_r[0], max_relative = 1e-12);
        assert_relative_eq!(beta_w[1], beta_r[1], max_relative = 1e-12);
        assert_relative_eq!(sse_w, sse_r, max_relative = 1e-12);
    }

    #[test]
    fn underdetermined_fit_still_returns_finite_coefficients() {
        // One point, degree 1: ridge keeps the system solvable.
        let (beta, sse, _) = weighted_polyfit(&[2.0], &[5.0], None, 1).unwrap();
        assert!(beta.iter().all(|b| b.is_finite()));
        assert!(sse >= 0.0);
    }
}
