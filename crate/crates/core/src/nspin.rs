//! Encodings of a direction in `N` spin-1/2 systems.
//!
//! Two encodings are covered: `N` parallel copies `|n̂⟩^⊗N`, and the optimal
//! superposition `Σ_J Φ_J |J,0⟩`. `Φ` is the principal eigenvector of the
//! Jacobi matrix [`JacobiMatrix`]. Every quantity needed by a chain of
//! observers depends only on the angle between consecutive estimates, so
//! trajectories are simulated as a sequence of scalar tilts.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::chain::ChainRecord;
use crate::error::{Error, Result};
use crate::legendre::{legendre_largest_zero, GaussLegendre, BESSEL_J0_FIRST_ZERO};
use crate::rng::RandomStream;
use crate::sphere::{random_tilt, sample_cos_tilt, sample_uniform_sphere};
use crate::tridiag;

const NORM_TOL: f64 = 1e-12;
const INITIAL_GRID: usize = 4096;
const MAX_GRID: usize = 1 << 22;
const KS_TARGET: f64 = 1e-4;

/// Which encoding and measurement chain is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    /// Parallel copies, every observer uses `√(N+1)|m⟩⟨m|^⊗N`.
    Parallel,
    /// Optimal encoding and optimal measure-and-prepare measurement throughout.
    Optimal,
    /// Parallel copies; the first observer re-prepares the optimal state and
    /// every later observer uses the optimal measurement.
    ParallelStart,
}

impl Encoding {
    pub fn requires_even(self) -> bool {
        !matches!(self, Encoding::Parallel)
    }

    pub fn validate(self, spins: usize) -> Result<()> {
        if spins == 0 {
            return Err(Error::NoSpins(0));
        }
        if self.requires_even() && spins % 2 == 1 {
            return Err(Error::OddSpinCount(spins));
        }
        Ok(())
    }
}

fn check_even(spins: usize) -> Result<()> {
    if spins < 2 || spins % 2 == 1 {
        return Err(Error::OddSpinCount(spins));
    }
    Ok(())
}

fn check_observers(k: usize) -> Result<()> {
    if k == 0 {
        Err(Error::NoObservers)
    } else {
        Ok(())
    }
}

/// Symmetric tridiagonal matrix on `J = 0..=N/2` with zero diagonal and band
/// `b[J] = (J+1)/√(4(J+1)²−1)` linking `J` and `J+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiMatrix {
    band: Vec<f64>,
}

impl JacobiMatrix {
    pub fn dimension(&self) -> usize {
        self.band.len() + 1
    }

    pub fn band(&self) -> &[f64] {
        &self.band
    }

    /// `vᵗ M v`.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        2.0 * self
            .band
            .iter()
            .enumerate()
            .map(|(j, b)| b * v[j] * v[j + 1])
            .sum::<f64>()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dimension();
        let mut m = vec![vec![0.0; n]; n];
        for (j, &b) in self.band.iter().enumerate() {
            m[j][j + 1] = b;
            m[j + 1][j] = b;
        }
        m
    }
}

pub fn jacobi_matrix(spins: usize) -> Result<JacobiMatrix> {
    check_even(spins)?;
    let band = (1..=spins / 2)
        .map(|j| {
            let j = j as f64;
            j / (4.0 * j * j - 1.0).sqrt()
        })
        .collect();
    Ok(JacobiMatrix { band })
}

/// Largest eigenvalue of `M` and its unit eigenvector with positive entries.
pub fn principal_eigenpair(matrix: &JacobiMatrix) -> Result<(f64, Vec<f64>)> {
    let diag = vec![0.0; matrix.dimension()];
    tridiag::largest_eigenpair(&diag, &matrix.band)
}

/// Coefficients `Φ_J` of `Σ_J Φ_J |J,0⟩`, `J = 0..=N/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingSpec {
    spins: usize,
    phi: Vec<f64>,
}

impl EncodingSpec {
    pub fn new(spins: usize, phi: Vec<f64>) -> Result<Self> {
        check_even(spins)?;
        if phi.len() != spins / 2 + 1 {
            return Err(Error::Config(format!(
                "encoding for N = {spins} needs {} coefficients, got {}",
                spins / 2 + 1,
                phi.len()
            )));
        }
        let norm = phi.iter().map(|p| p * p).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotUnitNorm(norm));
        }
        Ok(Self { spins, phi })
    }

    pub fn spins(&self) -> usize {
        self.spins
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.phi
    }

    /// Components `√(2J+1)` of the measurement seed `|Ψ⟩`.
    pub fn seed_coefficients(&self) -> Vec<f64> {
        (0..self.phi.len())
            .map(|j| (2.0 * j as f64 + 1.0).sqrt())
            .collect()
    }
}

pub fn optimal_encoding(spins: usize) -> Result<EncodingSpec> {
    let matrix = jacobi_matrix(spins)?;
    let (_, phi) = principal_eigenpair(&matrix)?;
    EncodingSpec::new(spins, phi)
}

/// `N/(N+2)`.
pub fn parallel_tilde_delta(spins: usize) -> Result<f64> {
    if spins == 0 {
        return Err(Error::NoSpins(0));
    }
    let n = spins as f64;
    Ok(n / (n + 2.0))
}

/// `½[1 + (N/(N+2))^k]`.
pub fn fk_parallel(spins: usize, k: usize) -> Result<f64> {
    check_observers(k)?;
    Ok(0.5 * (1.0 + parallel_tilde_delta(spins)?.powi(k as i32)))
}

/// Largest zero of `P_{N/2+1}`.
pub fn optimal_tilde_delta(spins: usize) -> Result<f64> {
    check_even(spins)?;
    legendre_largest_zero(spins / 2 + 1)
}

/// `½[1 + x_{N/2+1}^k]`.
pub fn fk_optimal(spins: usize, k: usize) -> Result<f64> {
    check_observers(k)?;
    Ok(0.5 * (1.0 + optimal_tilde_delta(spins)?.powi(k as i32)))
}

/// `N/(N+2) · x_{N/2+1}^{k−1}`.
pub fn delta_k_parallel_start(spins: usize, k: usize) -> Result<f64> {
    check_observers(k)?;
    Ok(parallel_tilde_delta(spins)? * optimal_tilde_delta(spins)?.powi(k as i32 - 1))
}

/// Large-`N` form `½[1 + (1 − 2ξ₀²/N²)^k]`.
pub fn fk_asymptotic(spins: usize, k: usize) -> Result<f64> {
    check_observers(k)?;
    let n = spins as f64;
    let base = 1.0 - 2.0 * BESSEL_J0_FIRST_ZERO * BESSEL_J0_FIRST_ZERO / (n * n);
    if spins == 0 || base <= 0.0 {
        return Err(Error::AsymptoticUndefined(spins));
    }
    Ok(0.5 * (1.0 + base.powi(k as i32)))
}

/// Product of per-step shrink factors; 1 for an empty chain.
pub fn chain_delta(steps: &[f64]) -> f64 {
    steps.iter().product()
}

/// Mean estimate overlap `Δ_k` for the given encoding.
pub fn analytic_delta(encoding: Encoding, spins: usize, k: usize) -> Result<f64> {
    check_observers(k)?;
    encoding.validate(spins)?;
    match encoding {
        Encoding::Parallel => Ok(parallel_tilde_delta(spins)?.powi(k as i32)),
        Encoding::Optimal => Ok(optimal_tilde_delta(spins)?.powi(k as i32)),
        Encoding::ParallelStart => delta_k_parallel_start(spins, k),
    }
}

pub fn analytic_fidelity(encoding: Encoding, spins: usize, k: usize) -> Result<f64> {
    Ok(0.5 * (1.0 + analytic_delta(encoding, spins, k)?))
}

/// Smallest admissible `N` (even unless `encoding` is parallel) whose `k`-th
/// observer reaches fidelity `target`.
pub fn classical_threshold(k: usize, target: f64, encoding: Encoding) -> Result<usize> {
    check_observers(k)?;
    if !(target > 0.5 && target < 1.0) {
        return Err(Error::TargetOutOfRange(target));
    }
    let step = if encoding.requires_even() { 2 } else { 1 };
    let reaches =
        |m: usize| -> Result<bool> { Ok(analytic_fidelity(encoding, m * step, k)? >= target) };

    let mut hi = 1usize;
    while !reaches(hi)? {
        hi = hi
            .checked_mul(2)
            .filter(|&h| h * step <= 1 << 40)
            .ok_or(Error::NoConvergence {
                what: "threshold search",
                iterations: 40,
            })?;
    }
    let mut lo = hi / 2; // fails, or zero
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if reaches(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi * step)
}

/// Density of the cosine of the tilt between consecutive estimates when the
/// handed-on state is `Σ Φ_J|J,0⟩` and the measurement seed is `Σ √(2J+1)|J,0⟩`:
/// `g(x) = ½ (Σ_J √(2J+1) Φ_J P_J(x))²`.
///
/// The tabulated inverse CDF used for sampling is built on first use.
#[derive(Debug, Clone)]
pub struct OutcomeDensity {
    encoding: EncodingSpec,
    amplitudes: Vec<f64>,
    table: OnceLock<CdfTable>,
}

#[derive(Debug, Clone)]
struct CdfTable {
    grid: Vec<f64>,
    cdf: Vec<f64>,
    ks_distance: f64,
}

impl OutcomeDensity {
    pub fn encoding(&self) -> &EncodingSpec {
        &self.encoding
    }

    /// `Σ_J √(2J+1) Φ_J P_J(x)`.
    pub fn amplitude(&self, x: f64) -> f64 {
        let mut sum = self.amplitudes[0];
        let (mut prev, mut cur) = (1.0, x);
        for (j, a) in self.amplitudes.iter().enumerate().skip(1) {
            if j > 1 {
                let jf = (j - 1) as f64;
                let next = ((2.0 * jf + 1.0) * x * cur - jf * prev) / (jf + 1.0);
                prev = cur;
                cur = next;
            }
            sum += a * cur;
        }
        sum
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        let a = self.amplitude(x);
        0.5 * a * a
    }

    fn quadrature(&self) -> GaussLegendre {
        GaussLegendre::new(self.encoding.spins + 2).expect("non-empty rule")
    }

    /// `∫ g` with an `(N+2)`-point Gauss-Legendre rule.
    pub fn total_mass(&self) -> f64 {
        self.quadrature().integrate(-1.0, 1.0, |x| self.evaluate(x))
    }

    /// `∫ x g(x) dx`, the per-step shrink factor.
    pub fn mean_tilt(&self) -> f64 {
        self.quadrature()
            .integrate(-1.0, 1.0, |x| x * self.evaluate(x))
    }

    /// Exact CDF of `g` at `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        let x = x.clamp(-1.0, 1.0);
        self.quadrature().integrate(-1.0, x, |t| self.evaluate(t))
    }

    /// Largest deviation found between the tabulated and the exact CDF.
    pub fn table_ks_distance(&self) -> f64 {
        self.table().ks_distance
    }

    pub fn table_len(&self) -> usize {
        self.table().grid.len()
    }

    fn table(&self) -> &CdfTable {
        self.table.get_or_init(|| self.tabulate())
    }

    /// Inverse of the tabulated CDF at `u ∈ [0, 1]`.
    pub fn quantile(&self, u: f64) -> f64 {
        let CdfTable { grid, cdf, .. } = self.table();
        let u = u.clamp(0.0, 1.0);
        let i = cdf.partition_point(|&c| c <= u);
        if i == 0 {
            return grid[0];
        }
        if i >= grid.len() {
            return *grid.last().unwrap();
        }
        let (c0, c1) = (cdf[i - 1], cdf[i]);
        let (x0, x1) = (grid[i - 1], grid[i]);
        if c1 <= c0 {
            return x0;
        }
        (x0 + (u - c0) / (c1 - c0) * (x1 - x0)).clamp(-1.0, 1.0)
    }

    /// Linear interpolation of the exact CDF on a cosine grid, doubled until
    /// the interpolant is within `KS_TARGET` of the exact CDF.
    fn tabulate(&self) -> CdfTable {
        let rule = GaussLegendre::new(self.encoding.spins / 2 + 2).expect("non-empty rule");
        let mut cells = INITIAL_GRID;
        loop {
            // cosine grid: dense where the density peaks near x = 1
            let grid: Vec<f64> = (0..=cells)
                .map(|i| (std::f64::consts::PI * (cells - i) as f64 / cells as f64).cos())
                .map(|x| x.clamp(-1.0, 1.0))
                .collect();
            let mut cdf = Vec::with_capacity(cells + 1);
            cdf.push(0.0);
            let mut acc = 0.0;
            for w in grid.windows(2) {
                acc += rule.integrate(w[0], w[1], |t| self.evaluate(t));
                cdf.push(acc);
            }
            let total = acc;
            cdf.iter_mut().for_each(|c| *c /= total);
            *cdf.last_mut().unwrap() = 1.0;

            let mut ks: f64 = 0.0;
            for (i, w) in grid.windows(2).enumerate() {
                let (x0, x1) = (w[0], w[1]);
                for frac in [0.25, 0.5, 0.75] {
                    let t = x0 + frac * (x1 - x0);
                    let exact = cdf[i] + rule.integrate(x0, t, |s| self.evaluate(s)) / total;
                    let linear = cdf[i] + frac * (cdf[i + 1] - cdf[i]);
                    ks = ks.max((exact - linear).abs());
                }
            }
            if ks < KS_TARGET || cells >= MAX_GRID {
                return CdfTable {
                    grid,
                    cdf,
                    ks_distance: ks,
                };
            }
            cells *= 2;
        }
    }

    pub fn sample(&self, rng: &mut RandomStream) -> f64 {
        self.quantile(rng.uniform())
    }
}

pub fn outcome_density(encoding: &EncodingSpec) -> OutcomeDensity {
    let amplitudes = encoding
        .phi
        .iter()
        .enumerate()
        .map(|(j, p)| (2.0 * j as f64 + 1.0).sqrt() * p)
        .collect();
    OutcomeDensity {
        encoding: encoding.clone(),
        amplitudes,
        table: OnceLock::new(),
    }
}

pub fn sample_outcome_tilt(density: &OutcomeDensity, rng: &mut RandomStream) -> f64 {
    density.sample(rng)
}

/// A prepared chain of N-spin observers; build once, sample many trajectories.
#[derive(Debug, Clone)]
pub struct NSpinChain {
    spins: usize,
    encoding: Encoding,
    density: Option<OutcomeDensity>,
}

impl NSpinChain {
    pub fn new(spins: usize, encoding: Encoding) -> Result<Self> {
        encoding.validate(spins)?;
        let density = match encoding {
            Encoding::Parallel => None,
            Encoding::Optimal | Encoding::ParallelStart => {
                Some(outcome_density(&optimal_encoding(spins)?))
            }
        };
        Ok(Self {
            spins,
            encoding,
            density,
        })
    }

    pub fn spins(&self) -> usize {
        self.spins
    }

    pub fn encoding(&self) -> Encoding {
        self.encoding
    }

    pub fn density(&self) -> Option<&OutcomeDensity> {
        self.density.as_ref()
    }

    fn tilt(&self, step: usize, rng: &mut RandomStream) -> f64 {
        match (self.encoding, step, &self.density) {
            (Encoding::Parallel, _, _) | (Encoding::ParallelStart, 0, _) => {
                sample_cos_tilt(rng, self.spins).expect("validated spin count")
            }
            (_, _, Some(d)) => d.sample(rng),
            (_, _, None) => unreachable!("optimal chains carry a density"),
        }
    }

    pub fn simulate(&self, k: usize, rng: &mut RandomStream) -> Result<ChainRecord> {
        check_observers(k)?;
        let n = sample_uniform_sphere(rng);
        let mut record = ChainRecord::with_capacity(n, k);
        let mut axis = n;
        for step in 0..k {
            let x = self.tilt(step, rng);
            let estimate = random_tilt(&axis, x, rng)?;
            record.push(estimate, &estimate);
            axis = estimate;
        }
        Ok(record)
    }
}

/// One trajectory; builds the chain each call, prefer [`NSpinChain`] in loops.
pub fn simulate_chain_nspin(
    spins: usize,
    k: usize,
    encoding: Encoding,
    rng: &mut RandomStream,
) -> Result<ChainRecord> {
    NSpinChain::new(spins, encoding)?.simulate(k, rng)
}
