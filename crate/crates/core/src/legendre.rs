//! Legendre polynomials, their largest zeros, Gauss-Legendre rules and the
//! first zero of the Bessel function J₀.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// First positive zero of J₀.
///
/// Embedded constant; `bessel_j0` and the tests re-derive it by root finding.
pub const BESSEL_J0_FIRST_ZERO: f64 = 2.404_825_557_695_773;

const NEWTON_CAP: usize = 100;

/// `P_0(x) ..= P_L(x)` at a single abscissa.
#[derive(Debug, Clone, PartialEq)]
pub struct LegendreTable {
    x: f64,
    values: Vec<f64>,
}

impl LegendreTable {
    pub fn abscissa(&self) -> f64 {
        self.x
    }

    pub fn max_degree(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `P_n(x)`; panics if `n` exceeds the table degree.
    pub fn get(&self, n: usize) -> f64 {
        self.values[n]
    }
}

/// Evaluates `P_0 ..= P_max_degree` at `x` with the three-term recurrence.
pub fn legendre_all(max_degree: usize, x: f64) -> Result<LegendreTable> {
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::AbscissaOutOfRange(x));
    }
    let mut values = Vec::with_capacity(max_degree + 1);
    values.push(1.0);
    if max_degree >= 1 {
        values.push(x);
    }
    for n in 1..max_degree {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0) * x * values[n] - nf * values[n - 1]) / (nf + 1.0);
        values.push(next);
    }
    Ok(LegendreTable { x, values })
}

/// `(P_n(x), P_{n-1}(x))` for `n >= 1` without allocating.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let (mut prev, mut cur) = (1.0, x);
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// `P_n(x)` and `P'_n(x)` for `|x| < 1`.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (p, q) = legendre_pair(n, x);
    let dp = n as f64 * (x * p - q) / (x * x - 1.0);
    (p, dp)
}

/// Largest zero of `P_n`.
///
/// Newton iteration from `cos(ξ₀ / (n + 1/2))`, kept inside the bracket
/// `[cos(π/(n+1/2)), 1]` and falling back to bisection whenever a step
/// would leave it.
pub fn legendre_largest_zero(n: usize) -> Result<f64> {
    match n {
        0 => return Err(Error::Config("P_0 has no zeros".into())),
        1 => return Ok(0.0),
        _ => {}
    }
    let half = n as f64 + 0.5;
    let mut lo = (PI / half).cos();
    let mut hi = 1.0;
    let mut x = (BESSEL_J0_FIRST_ZERO / half).cos();

    for _ in 0..NEWTON_CAP {
        let (p, dp) = legendre_with_derivative(n, x);
        if p == 0.0 {
            return Ok(x);
        }
        if p > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let newton = x - p / dp;
        let next = if newton > lo && newton < hi && dp.is_finite() {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(1e-300) || hi - lo <= f64::EPSILON {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::NoConvergence {
        what: "largest Legendre zero",
        iterations: NEWTON_CAP,
    })
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// nodes ascending.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("quadrature needs at least one node".into()));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let half = n as f64 + 0.5;
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / half).cos();
            let mut converged = false;
            for _ in 0..NEWTON_CAP {
                let (p, dp) = legendre_with_derivative(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() <= 1e-16 {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::NoConvergence {
                    what: "Gauss-Legendre node",
                    iterations: NEWTON_CAP,
                });
            }
            let (_, dp) = legendre_with_derivative(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[n - 1 - i] = x;
            nodes[i] = -x;
            weights[n - 1 - i] = w;
            weights[i] = w;
        }
        if n % 2 == 1 {
            // the middle node is exactly zero
            let mid = n / 2;
            nodes[mid] = 0.0;
            let (_, q) = legendre_pair(n, 0.0);
            weights[mid] = 2.0 / (n as f64 * q).powi(2);
        }
        Ok(Self { nodes, weights })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let (mid, rad) = (0.5 * (a + b), 0.5 * (b - a));
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + rad * x))
            .sum::<f64>()
            * rad
    }
}

/// J₀ by its power series; accurate to ~1e-15 for `|x| <= 8`.
pub fn bessel_j0(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..80 {
        let kf = k as f64;
        term *= q / (kf * kf);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

pub fn bessel_j0_first_zero() -> f64 {
    BESSEL_J0_FIRST_ZERO
}
