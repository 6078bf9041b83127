//! End-to-end acceptance checks.
//!
//! Every check pins its sample size, seed and tolerance. The `acceptance`
//! test target and `qrecycle selftest` both run [`run_all`].

use std::f64::consts::PI;
use std::fmt;
use std::time::{Duration, Instant};

use crate::error::Result;
use crate::legendre::{legendre_largest_zero, BESSEL_J0_FIRST_ZERO};
use crate::mc::{kraus_model, run_chain, Model, Workers};
use crate::nspin::{self, classical_threshold, Encoding};
use crate::qubit::{
    analytic_delta_single, analytic_state_shrink, disturbance_constant, eta_from_c,
    MeasurementScheme, QubitKrausFamily,
};
use crate::sweep::{run_sweep, write_records, OutputFormat, SweepConfig, SweepMode};

pub const SEED: u64 = 42;

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] criterion {}: {} ({:.2} s) {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

fn timed(
    id: u8,
    name: &'static str,
    check: impl FnOnce() -> Result<(bool, String)>,
) -> CriterionResult {
    let start = Instant::now();
    let (passed, detail) = match check() {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    CriterionResult {
        id,
        name,
        passed,
        detail,
        elapsed: start.elapsed(),
    }
}

/// Single-qubit law: `Δ̂_k` vs `3^{-k}`, k = 1..4, 10^6 trials, under 10 s.
pub fn criterion_1(workers: Workers) -> CriterionResult {
    let mut r = timed(1, "single-qubit exponential law", || {
        let stats = run_chain(Model::optimal_qubit(), 4, 1_000_000, SEED, workers)?;
        let mut zs = Vec::new();
        for k in 1..=4 {
            let est = stats.delta(k);
            zs.push(est.z_score(3f64.powi(-(k as i32))).unwrap_or(f64::INFINITY));
        }
        let within3 = zs.iter().filter(|z| z.abs() <= 3.0).count();
        let ok = within3 >= 3 && zs.iter().all(|z| z.abs() <= 4.0);
        Ok((ok, format!("z = {}", fmt_list(&zs))))
    });
    if r.elapsed >= Duration::from_secs(10) {
        r.passed = false;
        r.detail.push_str(" (over 10 s)");
    }
    r
}

/// Kraus family: after two observers the handed-on state has shrunk by
/// `((c−1)/3)² = (cos φ/3)²` for φ ∈ {0, π/4, π/2, 3π/4, π}; 10^5 trials.
///
/// The detail also reports the estimate overlap `Δ̂_2` against `(1/3)·η`.
pub fn criterion_2(workers: Workers) -> CriterionResult {
    timed(2, "Kraus-family depolarizing channel", || {
        let mut ok = true;
        let mut parts = Vec::new();
        for i in 0..=4 {
            let phi = PI * i as f64 / 4.0;
            let family = if i == 4 {
                QubitKrausFamily::worst()
            } else {
                QubitKrausFamily::new(phi)?
            };
            let c = disturbance_constant(&family);
            let eta = eta_from_c(c)?;
            let stats = run_chain(kraus_model(phi)?, 2, 100_000, SEED, workers)?;
            let z_state = stats
                .state_shrink(2)
                .z_score(analytic_state_shrink(2, eta)?)
                .unwrap_or(0.0);
            let z_est = stats
                .delta(2)
                .z_score(analytic_delta_single(2, eta)?)
                .unwrap_or(0.0);
            let closed_form = ((phi.cos() / 3.0).powi(2) - eta * eta).abs() < 1e-15;
            ok &= z_state.abs() <= 3.0 && z_est.abs() <= 4.0 && closed_form;
            parts.push(format!(
                "φ={i}π/4 c={c:.3} z_state={z_state:+.2} z_est={z_est:+.2}"
            ));
        }
        Ok((ok, parts.join("; ")))
    })
}

/// Stern-Gerlach and covariant chains agree within 3 combined stderr, k = 1..3.
pub fn criterion_3(workers: Workers) -> CriterionResult {
    timed(3, "Stern-Gerlach / covariant equivalence", || {
        let fam = QubitKrausFamily::optimal();
        let cov = run_chain(
            Model::SingleQubit {
                family: fam,
                scheme: MeasurementScheme::Covariant,
            },
            3,
            100_000,
            SEED,
            workers,
        )?;
        let sg = run_chain(
            Model::SingleQubit {
                family: fam,
                scheme: MeasurementScheme::SternGerlach,
            },
            3,
            100_000,
            SEED,
            workers,
        )?;
        let zs: Vec<f64> = (1..=3)
            .map(|k| {
                let (a, b) = (cov.delta(k), sg.delta(k));
                let se = (a.stderr.unwrap_or(0.0).powi(2) + b.stderr.unwrap_or(0.0).powi(2)).sqrt();
                (a.mean - b.mean) / se
            })
            .collect();
        Ok((
            zs.iter().all(|z| z.abs() <= 3.0),
            format!("z = {}", fmt_list(&zs)),
        ))
    })
}

/// Parallel encoding: `(N/(N+2))^k` for N ∈ {2, 4, 10}, k ∈ {1, 2}; 10^5 trials.
pub fn criterion_4(workers: Workers) -> CriterionResult {
    timed(4, "parallel encoding", || {
        let mut zs = Vec::new();
        for spins in [2usize, 4, 10] {
            let stats = run_chain(
                Model::NSpin {
                    spins,
                    encoding: Encoding::Parallel,
                },
                2,
                100_000,
                SEED,
                workers,
            )?;
            for k in 1..=2 {
                let want = nspin::parallel_tilde_delta(spins)?.powi(k as i32);
                zs.push(stats.delta(k).z_score(want).unwrap_or(f64::INFINITY));
            }
        }
        Ok((
            zs.iter().all(|z| z.abs() <= 3.0),
            format!("z = {}", fmt_list(&zs)),
        ))
    })
}

/// Eigenvalue / Legendre root / quadrature triangle for all even N ≤ 200, under 5 s.
pub fn criterion_5() -> CriterionResult {
    let mut r = timed(5, "optimal-encoding triangle identity", || {
        let (mut worst_root, mut worst_quad) = (0.0f64, 0.0f64);
        for spins in (2..=200).step_by(2) {
            let m = nspin::jacobi_matrix(spins)?;
            let (lambda, phi) = nspin::principal_eigenpair(&m)?;
            let root = legendre_largest_zero(spins / 2 + 1)?;
            let enc = nspin::EncodingSpec::new(spins, phi)?;
            let density = nspin::outcome_density(&enc);
            worst_root = worst_root.max((lambda - root).abs());
            worst_quad =
                worst_quad.max((m.quadratic_form(enc.coefficients()) - density.mean_tilt()).abs());
        }
        Ok((
            worst_root < 1e-11 && worst_quad < 1e-10,
            format!("max|λ−x| = {worst_root:.2e}, max|ΦᵗMΦ−∫xg| = {worst_quad:.2e}"),
        ))
    });
    if r.elapsed >= Duration::from_secs(5) {
        r.passed = false;
        r.detail.push_str(" (over 5 s)");
    }
    r
}

/// Parallel start then optimal: `Δ̂_2 = (4/6)√(3/5)` at N = 4; 10^6 trials.
pub fn criterion_6(workers: Workers) -> CriterionResult {
    timed(6, "mixed-start chain", || {
        let want = nspin::delta_k_parallel_start(4, 2)?;
        let four_sf = (want * 1e4).round() / 1e4;
        let stats = run_chain(
            Model::NSpin {
                spins: 4,
                encoding: Encoding::ParallelStart,
            },
            2,
            1_000_000,
            SEED,
            workers,
        )?;
        let est = stats.delta(2);
        let z = est.z_score(want).unwrap_or(f64::INFINITY);
        Ok((
            z.abs() <= 3.0 && four_sf == 0.5164,
            format!(
                "analytic = {want:.6}, mc = {:.6} ± {:.6}, z = {z:+.2}",
                est.mean,
                est.stderr.unwrap_or(f64::NAN)
            ),
        ))
    })
}

/// `(1 − x_n)·2n²` with n = N/2+1 approaches ξ₀² monotonically; within 2% at N = 200.
pub fn criterion_7() -> CriterionResult {
    timed(7, "large-N asymptotics", || {
        let target = BESSEL_J0_FIRST_ZERO * BESSEL_J0_FIRST_ZERO;
        let mut gaps = Vec::new();
        for spins in [20usize, 50, 100, 200] {
            let n = (spins / 2 + 1) as f64;
            let scaled = (1.0 - legendre_largest_zero(spins / 2 + 1)?) * 2.0 * n * n;
            gaps.push((scaled - target).abs() / target);
        }
        let monotone = gaps.windows(2).all(|w| w[1] < w[0]);
        let last = *gaps.last().unwrap();
        Ok((
            monotone && last < 0.02,
            format!("relative gaps = {}", fmt_list(&gaps)),
        ))
    })
}

/// Thresholds for F_k = 0.9: ratio threshold(256)/threshold(64) in [3.5, 4.5]
/// (parallel) and [1.7, 2.3] (optimal), under 1 s.
pub fn criterion_8() -> CriterionResult {
    let mut r = timed(8, "classical-transition scaling", || {
        let p64 = classical_threshold(64, 0.9, Encoding::Parallel)?;
        let p256 = classical_threshold(256, 0.9, Encoding::Parallel)?;
        let o64 = classical_threshold(64, 0.9, Encoding::Optimal)?;
        let o256 = classical_threshold(256, 0.9, Encoding::Optimal)?;
        let rp = p256 as f64 / p64 as f64;
        let ro = o256 as f64 / o64 as f64;
        Ok((
            (3.5..=4.5).contains(&rp) && (1.7..=2.3).contains(&ro),
            format!("parallel {p64}→{p256} (×{rp:.3}), optimal {o64}→{o256} (×{ro:.3})"),
        ))
    });
    if r.elapsed >= Duration::from_secs(1) {
        r.passed = false;
        r.detail.push_str(" (over 1 s)");
    }
    r
}

/// Two sweeps with the same config and seed give byte-identical output,
/// with one and with several worker threads.
pub fn criterion_9() -> CriterionResult {
    timed(9, "deterministic sweep output", || {
        let cfg = SweepConfig {
            mode: SweepMode::NspinOptimal,
            spins: vec![2, 4],
            ks: vec![1, 2, 3],
            trials: 20_000,
            ..Default::default()
        };
        let render = |workers: Workers, format: OutputFormat| -> Result<Vec<u8>> {
            let outcome = run_sweep(&cfg, workers)?;
            let mut buf = Vec::new();
            write_records(&outcome.records, format, &mut buf)?;
            Ok(buf)
        };
        let mut identical = true;
        for format in [OutputFormat::Csv, OutputFormat::Jsonl] {
            let a = render(Workers(Some(1)), format)?;
            let b = render(Workers(Some(1)), format)?;
            let c = render(Workers(Some(4)), format)?;
            identical &= a == b && a == c && !a.is_empty();
        }
        Ok((identical, "csv and jsonl, 1 vs 1 vs 4 workers".into()))
    })
}

pub fn run_all(workers: Workers) -> Vec<CriterionResult> {
    vec![
        criterion_1(workers),
        criterion_2(workers),
        criterion_3(workers),
        criterion_4(workers),
        criterion_5(),
        criterion_6(workers),
        criterion_7(),
        criterion_8(),
        criterion_9(),
    ]
}

fn fmt_list(xs: &[f64]) -> String {
    let items: Vec<String> = xs.iter().map(|x| format!("{x:+.3}")).collect();
    format!("[{}]", items.join(", "))
}
