//! Symmetric tridiagonal eigen-solver: Sturm-sequence bisection for the
//! extreme eigenvalue, inverse iteration for its eigenvector.

use crate::error::{Error, Result};

const INVERSE_ITERATION_CAP: usize = 50;
const RESIDUAL_TOL: f64 = 1e-12;

/// Number of eigenvalues strictly below `lambda`.
///
/// `diag` has length `n`, `off` has length `n - 1`.
pub fn sturm_count(diag: &[f64], off: &[f64], lambda: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..diag.len() {
        let coupling = if i == 0 {
            0.0
        } else {
            off[i - 1] * off[i - 1] / q
        };
        q = diag[i] - lambda - coupling;
        if q == 0.0 {
            q = -f64::EPSILON * (lambda.abs() + 1.0);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn gershgorin(diag: &[f64], off: &[f64]) -> (f64, f64) {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let left = if i > 0 { off[i - 1].abs() } else { 0.0 };
        let right = if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - left - right);
        hi = hi.max(diag[i] + left + right);
    }
    (lo, hi)
}

/// Largest eigenvalue by bisection to full double precision.
pub fn largest_eigenvalue(diag: &[f64], off: &[f64]) -> f64 {
    let n = diag.len();
    let (mut lo, mut hi) = gershgorin(diag, off);
    // invariant: count(lo) < n, count(hi) == n
    hi += f64::EPSILON * (hi.abs() + 1.0);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off, mid) == n {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// LU factorization with partial pivoting of `T - shift·I`.
struct TridiagLu {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    upper2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagLu {
    fn factor(diag: &[f64], off: &[f64], shift: f64) -> Self {
        let n = diag.len();
        let mut lower = off.to_vec();
        let mut d: Vec<f64> = diag.iter().map(|v| v - shift).collect();
        let mut upper = off.to_vec();
        let mut upper2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= lower[i].abs() {
                if d[i] == 0.0 {
                    d[i] = f64::EPSILON;
                }
                let fact = lower[i] / d[i];
                lower[i] = fact;
                d[i + 1] -= fact * upper[i];
            } else {
                let fact = d[i] / lower[i];
                d[i] = lower[i];
                lower[i] = fact;
                let temp = upper[i];
                upper[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    upper2[i] = upper[i + 1];
                    upper[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        if let Some(last) = d.last_mut() {
            if *last == 0.0 {
                *last = f64::EPSILON;
            }
        }
        Self {
            lower,
            diag: d,
            upper,
            upper2,
            swapped,
        }
    }

    fn solve(&self, x: &mut [f64]) {
        let n = x.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = x[i];
                x[i] = x[i + 1];
                x[i + 1] = temp - self.lower[i] * x[i];
            } else {
                x[i + 1] -= self.lower[i] * x[i];
            }
        }
        for i in (0..n).rev() {
            let mut v = x[i];
            if i + 1 < n {
                v -= self.upper[i] * x[i + 1];
            }
            if i + 2 < n {
                v -= self.upper2[i] * x[i + 2];
            }
            x[i] = v / self.diag[i];
        }
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
}

/// `‖Tv − λv‖₂`.
pub fn residual_norm(diag: &[f64], off: &[f64], lambda: f64, v: &[f64]) -> f64 {
    let n = diag.len();
    (0..n)
        .map(|i| {
            let mut r = (diag[i] - lambda) * v[i];
            if i > 0 {
                r += off[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                r += off[i] * v[i + 1];
            }
            r * r
        })
        .sum::<f64>()
        .sqrt()
}

/// Largest eigenvalue and its unit eigenvector, sign chosen so the entries sum
/// to a positive number.
pub fn largest_eigenpair(diag: &[f64], off: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = diag.len();
    if n == 0 || off.len() + 1 != n {
        return Err(Error::Config(
            "tridiagonal bands have inconsistent lengths".into(),
        ));
    }
    let lambda = largest_eigenvalue(diag, off);
    if n == 1 {
        return Ok((lambda, vec![1.0]));
    }
    let lu = TridiagLu::factor(diag, off, lambda);
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    for iteration in 0..INVERSE_ITERATION_CAP {
        lu.solve(&mut v);
        normalize(&mut v);
        if iteration >= 1 && residual_norm(diag, off, lambda, &v) < RESIDUAL_TOL {
            if v.iter().sum::<f64>() < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            return Ok((lambda, v));
        }
    }
    Err(Error::NoConvergence {
        what: "inverse iteration",
        iterations: INVERSE_ITERATION_CAP,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn dense(diag: &[f64], off: &[f64]) -> DMatrix<f64> {
        let n = diag.len();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                diag[i]
            } else if i + 1 == j {
                off[i]
            } else if j + 1 == i {
                off[j]
            } else {
                0.0
            }
        })
    }

    #[test]
    fn two_by_two() {
        let (l, v) = largest_eigenpair(&[0.0, 0.0], &[0.5]).unwrap();
        assert_abs_diff_eq!(l, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(v[0], v[1], epsilon = 1e-15);
    }

    #[test]
    fn sturm_counts_all() {
        let diag = [2.0, -1.0, 0.5, 3.0];
        let off = [1.0, 0.3, -0.7];
        assert_eq!(sturm_count(&diag, &off, -100.0), 0);
        assert_eq!(sturm_count(&diag, &off, 100.0), 4);
    }

    #[test]
    fn one_by_one() {
        let (l, v) = largest_eigenpair(&[1.5], &[]).unwrap();
        assert_abs_diff_eq!(l, 1.5, epsilon = 1e-15);
        assert_eq!(v, vec![1.0]);
    }

    proptest! {
        #[test]
        fn matches_dense_solver(
            diag in prop::collection::vec(-2.0f64..2.0, 2..30),
            seed_off in prop::collection::vec(0.05f64..1.5, 29),
        ) {
            let n = diag.len();
            let off = &seed_off[..n - 1];
            let (l, v) = largest_eigenpair(&diag, off).unwrap();
            let eig = dense(&diag, off).symmetric_eigen();
            let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!((l - max).abs() < 1e-12);
            prop_assert!(residual_norm(&diag, off, l, &v) < 1e-12);
        }
    }
}
