//! Single-qubit chains: the depolarizing-channel picture, measure-and-prepare
//! Kraus realizations, and trajectory simulation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::chain::ChainRecord;
use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::sphere::{
    random_tilt, rotate_towards, sample_cos_tilt, sample_uniform_sphere, UnitVector,
};

/// Mean estimate overlap of an optimal measurement on one qubit.
pub const SINGLE_QUBIT_DELTA: f64 = 1.0 / 3.0;

const PURE_TOL: f64 = 1e-12;

/// A qubit state in Bloch-vector form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochState {
    r: [f64; 3],
}

impl BlochState {
    pub fn new(r: [f64; 3]) -> Result<Self> {
        let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm > 1.0 + PURE_TOL {
            return Err(Error::NotUnitNorm(norm));
        }
        Ok(Self { r })
    }

    pub fn pure(direction: UnitVector) -> Self {
        Self {
            r: direction.to_array(),
        }
    }

    pub fn maximally_mixed() -> Self {
        Self { r: [0.0; 3] }
    }

    pub fn vector(&self) -> [f64; 3] {
        self.r
    }

    pub fn norm(&self) -> f64 {
        self.r.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_pure(&self) -> bool {
        (self.norm() - 1.0).abs() <= PURE_TOL
    }
}

/// How the azimuth of the re-prepared state around the estimate is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AzimuthPolicy {
    Fixed(f64),
    Random,
}

/// Measure-and-prepare realization `A(m) = √2 |m_φ⟩⟨m|` of the covariant POVM,
/// where `m_φ` is tilted from `m` by the offset angle `φ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitKrausFamily {
    offset_angle: f64,
    azimuth_policy: AzimuthPolicy,
}

impl QubitKrausFamily {
    /// Uses a random azimuth unless `offset_angle` is zero.
    pub fn new(offset_angle: f64) -> Result<Self> {
        let policy = if offset_angle == 0.0 {
            AzimuthPolicy::Fixed(0.0)
        } else {
            AzimuthPolicy::Random
        };
        Self::with_policy(offset_angle, policy)
    }

    pub fn with_policy(offset_angle: f64, azimuth_policy: AzimuthPolicy) -> Result<Self> {
        if !(0.0..=PI).contains(&offset_angle) {
            return Err(Error::Config(format!(
                "offset angle {offset_angle} outside [0, π]"
            )));
        }
        Ok(Self {
            offset_angle,
            azimuth_policy,
        })
    }

    /// `A(m) = √2|m⟩⟨m|`.
    pub fn optimal() -> Self {
        Self {
            offset_angle: 0.0,
            azimuth_policy: AzimuthPolicy::Fixed(0.0),
        }
    }

    /// `A(m) = √2|−m⟩⟨m|`.
    pub fn worst() -> Self {
        Self {
            offset_angle: PI,
            azimuth_policy: AzimuthPolicy::Fixed(0.0),
        }
    }

    pub fn offset_angle(&self) -> f64 {
        self.offset_angle
    }

    pub fn azimuth_policy(&self) -> AzimuthPolicy {
        self.azimuth_policy
    }

    /// Direction of the state prepared after reporting `estimate`.
    pub fn prepare(&self, estimate: &UnitVector, rng: &mut RandomStream) -> UnitVector {
        if self.offset_angle == 0.0 {
            return *estimate;
        }
        if self.offset_angle == PI {
            return -*estimate;
        }
        let azimuth = match self.azimuth_policy {
            AzimuthPolicy::Fixed(a) => a,
            AzimuthPolicy::Random => rng.azimuth(),
        };
        rotate_towards(estimate, self.offset_angle.cos(), azimuth).expect("estimate is unit norm")
    }
}

/// Shrink factor `η` of a depolarizing channel, `ρ → ηρ + (1−η)𝟙/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepolarizingChannel {
    eta: f64,
}

impl DepolarizingChannel {
    pub fn new(eta: f64) -> Result<Self> {
        if !(-1.0 / 3.0 - 1e-15..=1.0 / 3.0 + 1e-15).contains(&eta) {
            return Err(Error::Config(format!(
                "shrink factor {eta} outside [-1/3, 1/3]"
            )));
        }
        Ok(Self { eta })
    }

    /// The average channel of a Kraus family.
    pub fn from_kraus(family: &QubitKrausFamily) -> Self {
        let eta =
            eta_from_c(disturbance_constant(family)).expect("c of a Kraus family lies in [0, 2]");
        Self { eta }
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// `c` with `η = (c − 1)/3`.
    pub fn disturbance(&self) -> f64 {
        3.0 * self.eta + 1.0
    }

    /// The channel applied `times` times in a row.
    pub fn compose(&self, times: u32) -> f64 {
        self.eta.powi(times as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementScheme {
    Covariant,
    SternGerlach,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverOutcome {
    pub estimate: UnitVector,
    pub prepared: UnitVector,
}

/// `(1 + m·n)/2`.
pub fn single_qubit_fidelity(m: &UnitVector, n: &UnitVector) -> f64 {
    0.5 * (1.0 + m.dot(n))
}

/// `F = (1 + Δ)/2`.
pub fn fidelity_from_delta(delta: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&delta) {
        return Err(Error::DeltaOutOfRange(delta));
    }
    Ok(0.5 * (1.0 + delta))
}

/// `c = ∫dm |tr A(m)|² = 1 + cos φ`.
pub fn disturbance_constant(family: &QubitKrausFamily) -> f64 {
    (1.0 + family.offset_angle.cos()).clamp(0.0, 2.0)
}

pub fn eta_from_c(c: f64) -> Result<f64> {
    if !(0.0..=2.0).contains(&c) {
        return Err(Error::DisturbanceOutOfRange(c));
    }
    Ok((c - 1.0) / 3.0)
}

pub fn apply_depolarizing(state: &BlochState, channel: &DepolarizingChannel) -> BlochState {
    let eta = channel.eta;
    BlochState {
        r: state.r.map(|v| eta * v),
    }
}

/// `(1 + η^k)/2`: the fidelity when the shrink accumulated after `k` steps is `η^k`.
pub fn analytic_fk_single(k: u32, eta: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::NoObservers);
    }
    Ok(0.5 * (1.0 + eta.powi(k as i32)))
}

/// Mean estimate overlap `n̂·m̂_k` of observer `k` when every observer uses the
/// optimal POVM and hands on the state through a channel with shrink `η`:
/// `Δ_k = (1/3) η^{k−1}`. Equals `3^{-k}` for the optimal realization.
pub fn analytic_delta_single(k: u32, eta: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::NoObservers);
    }
    Ok(SINGLE_QUBIT_DELTA * eta.powi(k as i32 - 1))
}

/// Projection on `n̂` of the mean Bloch vector after `k` observers: `η^k`.
pub fn analytic_state_shrink(k: u32, eta: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::NoObservers);
    }
    Ok(eta.powi(k as i32))
}

/// One covariant-POVM observer acting on the pure state along `state_dir`.
pub fn simulate_observer_covariant(
    state_dir: &UnitVector,
    family: &QubitKrausFamily,
    rng: &mut RandomStream,
) -> ObserverOutcome {
    let x = sample_cos_tilt(rng, 1).expect("one spin");
    let estimate = random_tilt(state_dir, x, rng).expect("state direction is unit norm");
    let prepared = family.prepare(&estimate, rng);
    ObserverOutcome { estimate, prepared }
}

/// One Stern-Gerlach observer: uniformly random axis, outcome `±` with
/// probability `(1 ± axis·state)/2`, estimate and posterior along `±axis`.
pub fn simulate_observer_sg(state_dir: &UnitVector, rng: &mut RandomStream) -> ObserverOutcome {
    let axis = sample_uniform_sphere(rng);
    sg_with_axis(state_dir, &axis, rng)
}

pub(crate) fn sg_with_axis(
    state_dir: &UnitVector,
    axis: &UnitVector,
    rng: &mut RandomStream,
) -> ObserverOutcome {
    let p_plus = 0.5 * (1.0 + axis.dot(state_dir));
    let estimate = if rng.uniform() < p_plus {
        *axis
    } else {
        -*axis
    };
    ObserverOutcome {
        estimate,
        prepared: estimate,
    }
}

/// Draws `n̂` uniformly and runs `k` observers in sequence.
///
/// With the Stern-Gerlach scheme the Kraus offset is applied on top of the
/// projective posterior.
pub fn simulate_chain_single(
    k: usize,
    family: &QubitKrausFamily,
    scheme: MeasurementScheme,
    rng: &mut RandomStream,
) -> Result<ChainRecord> {
    if k == 0 {
        return Err(Error::NoObservers);
    }
    let n = sample_uniform_sphere(rng);
    let mut record = ChainRecord::with_capacity(n, k);
    let mut state = n;
    for _ in 0..k {
        let outcome = match scheme {
            MeasurementScheme::Covariant => simulate_observer_covariant(&state, family, rng),
            MeasurementScheme::SternGerlach => {
                let o = simulate_observer_sg(&state, rng);
                ObserverOutcome {
                    estimate: o.estimate,
                    prepared: family.prepare(&o.estimate, rng),
                }
            }
        };
        record.push(outcome.estimate, &outcome.prepared);
        state = outcome.prepared;
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;
    use std::f64::consts::FRAC_PI_2;

    use crate::legendre::GaussLegendre;

    fn mean_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }

    #[test]
    fn fidelity_of_pairs() {
        let n = UnitVector::from_angles(1.1, 0.4);
        assert_abs_diff_eq!(single_qubit_fidelity(&n, &n), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(single_qubit_fidelity(&-n, &n), 0.0, epsilon = 1e-15);
        let perp = rotate_towards(&n, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(single_qubit_fidelity(&perp, &n), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn fidelity_delta_map() {
        assert_abs_diff_eq!(fidelity_from_delta(1.0 / 3.0).unwrap(), 2.0 / 3.0);
        assert_eq!(fidelity_from_delta(0.0).unwrap(), 0.5);
        assert_eq!(fidelity_from_delta(1.0).unwrap(), 1.0);
        assert!(matches!(
            fidelity_from_delta(1.5),
            Err(Error::DeltaOutOfRange(_))
        ));
    }

    #[test]
    fn disturbance_extremes() {
        assert_eq!(disturbance_constant(&QubitKrausFamily::optimal()), 2.0);
        assert_abs_diff_eq!(
            disturbance_constant(&QubitKrausFamily::worst()),
            0.0,
            epsilon = 1e-15
        );
        let mid = QubitKrausFamily::new(FRAC_PI_2).unwrap();
        assert_abs_diff_eq!(disturbance_constant(&mid), 1.0, epsilon = 1e-15);
    }

    fn spinor(m: &UnitVector) -> [Complex64; 2] {
        let theta = m.z().clamp(-1.0, 1.0).acos();
        let phi = m.y().atan2(m.x());
        [
            Complex64::new((theta / 2.0).cos(), 0.0),
            Complex64::from_polar((theta / 2.0).sin(), phi),
        ]
    }

    /// `∫dm |tr √2|m_φ⟩⟨m||²` by product quadrature over the sphere and the
    /// preparation azimuth.
    fn c_by_quadrature(phi_offset: f64) -> f64 {
        let gl = GaussLegendre::new(12).unwrap();
        let (n_az, n_prep) = (24, 8);
        let mut total = 0.0;
        for (&z, &w) in gl.nodes().iter().zip(gl.weights()) {
            for a in 0..n_az {
                let m = UnitVector::from_angles(
                    z.acos(),
                    std::f64::consts::TAU * a as f64 / n_az as f64,
                );
                for b in 0..n_prep {
                    let psi = std::f64::consts::TAU * b as f64 / n_prep as f64;
                    let mp = rotate_towards(&m, phi_offset.cos(), psi).unwrap();
                    let (km, kp) = (spinor(&m), spinor(&mp));
                    // tr(|mp⟩⟨m|) = ⟨m|mp⟩
                    let overlap = km[0].conj() * kp[0] + km[1].conj() * kp[1];
                    let tr = overlap * 2f64.sqrt();
                    // dm = dz dφ / 4π
                    total += w * tr.norm_sqr() / (2.0 * n_az as f64 * n_prep as f64);
                }
            }
        }
        total
    }

    #[test]
    fn disturbance_matches_quadrature() {
        for i in 0..=8 {
            let phi = PI * i as f64 / 8.0;
            let fam = QubitKrausFamily::new(phi).unwrap();
            assert_abs_diff_eq!(
                disturbance_constant(&fam),
                c_by_quadrature(phi),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn average_channel_matches_eta() {
        // ∫dm (1 + m·r) m_φ averaged over preparation azimuth equals η r.
        let r = [0.3, -0.2, 0.5];
        let gl = GaussLegendre::new(10).unwrap();
        for phi in [0.0, 0.9, FRAC_PI_2, 2.5, PI] {
            let (n_az, n_prep) = (16, 8);
            let mut avg = [0.0; 3];
            for (&z, &w) in gl.nodes().iter().zip(gl.weights()) {
                for a in 0..n_az {
                    let m = UnitVector::from_angles(
                        z.acos(),
                        std::f64::consts::TAU * a as f64 / n_az as f64,
                    );
                    let weight = 1.0 + m.x() * r[0] + m.y() * r[1] + m.z() * r[2];
                    for b in 0..n_prep {
                        let psi = std::f64::consts::TAU * b as f64 / n_prep as f64;
                        let mp = rotate_towards(&m, phi.cos(), psi).unwrap();
                        for (acc, v) in avg.iter_mut().zip(mp.to_array()) {
                            *acc += w * weight * v / (2.0 * n_az as f64 * n_prep as f64);
                        }
                    }
                }
            }
            let eta = DepolarizingChannel::from_kraus(&QubitKrausFamily::new(phi).unwrap()).eta();
            for (got, want) in avg.iter().zip(r) {
                assert_abs_diff_eq!(*got, eta * want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn eta_values() {
        assert_abs_diff_eq!(eta_from_c(2.0).unwrap(), 1.0 / 3.0);
        assert_eq!(eta_from_c(1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(eta_from_c(0.0).unwrap(), -1.0 / 3.0);
        assert!(matches!(
            eta_from_c(2.1),
            Err(Error::DisturbanceOutOfRange(_))
        ));
        assert!(matches!(
            eta_from_c(-0.1),
            Err(Error::DisturbanceOutOfRange(_))
        ));
    }

    #[test]
    fn depolarizing_application() {
        let s = BlochState::new([0.2, 0.4, -0.6]).unwrap();
        let third = DepolarizingChannel::new(1.0 / 3.0).unwrap();
        let mut out = s;
        for _ in 0..4 {
            out = apply_depolarizing(&out, &third);
        }
        for (a, b) in out.vector().iter().zip(s.vector()) {
            assert_abs_diff_eq!(*a, b / 81.0, epsilon = 1e-16);
        }
        let zero = DepolarizingChannel::new(0.0).unwrap();
        assert_eq!(apply_depolarizing(&s, &zero).vector(), [0.0; 3]);
        let flip = DepolarizingChannel::new(-1.0 / 3.0).unwrap();
        let z = apply_depolarizing(&BlochState::pure(UnitVector::Z), &flip);
        assert_abs_diff_eq!(z.vector()[2], -1.0 / 3.0);
    }

    #[test]
    fn composition_is_power() {
        for eta in [-1.0 / 3.0, -0.1, 0.0, 0.2, 1.0 / 3.0] {
            let ch = DepolarizingChannel::new(eta).unwrap();
            let start = BlochState::pure(UnitVector::from_angles(0.4, 0.8));
            let mut s = start;
            for k in 1..=6u32 {
                s = apply_depolarizing(&s, &ch);
                let once = DepolarizingChannel { eta: ch.compose(k) };
                for (a, b) in s
                    .vector()
                    .iter()
                    .zip(apply_depolarizing(&start, &once).vector())
                {
                    assert!((a - b).abs() <= 4.0 * f64::EPSILON * b.abs());
                }
            }
        }
    }

    #[test]
    fn bloch_state_bounds() {
        assert!(BlochState::new([1.0, 1.0, 0.0]).is_err());
        assert!(BlochState::pure(UnitVector::Y).is_pure());
        assert!(!BlochState::maximally_mixed().is_pure());
    }

    #[test]
    fn analytic_fk_values() {
        assert_abs_diff_eq!(
            analytic_fk_single(1, 1.0 / 3.0).unwrap(),
            2.0 / 3.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            analytic_fk_single(2, 1.0 / 3.0).unwrap(),
            5.0 / 9.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(analytic_fk_single(200, 0.3).unwrap(), 0.5, epsilon = 1e-15);
        assert!(analytic_fk_single(0, 0.3).is_err());
    }

    #[test]
    fn analytic_delta_optimal_is_power_of_third() {
        for k in 1..=6u32 {
            assert_abs_diff_eq!(
                analytic_delta_single(k, 1.0 / 3.0).unwrap(),
                3f64.powi(-(k as i32)),
                epsilon = 1e-16
            );
        }
    }

    #[test]
    fn optimal_and_worst_preparation() {
        let mut rng = RandomStream::new(1, 1);
        let n = UnitVector::from_angles(2.0, 1.0);
        for _ in 0..100 {
            let o = simulate_observer_covariant(&n, &QubitKrausFamily::optimal(), &mut rng);
            assert_eq!(o.prepared, o.estimate);
            let w = simulate_observer_covariant(&n, &QubitKrausFamily::worst(), &mut rng);
            assert_eq!(w.prepared, -w.estimate);
        }
    }

    #[test]
    fn prepared_tilt_matches_offset() {
        let mut rng = RandomStream::new(1, 2);
        let fam = QubitKrausFamily::new(1.0).unwrap();
        for _ in 0..100 {
            let o = simulate_observer_covariant(&UnitVector::Z, &fam, &mut rng);
            assert_abs_diff_eq!(o.estimate.dot(&o.prepared), 1f64.cos(), epsilon = 1e-12);
        }
    }

    #[test]
    fn covariant_observer_mean() {
        let mut rng = RandomStream::new(42, 20);
        let n = UnitVector::from_angles(0.3, 4.0);
        let fam = QubitKrausFamily::optimal();
        let xs: Vec<f64> = (0..100_000)
            .map(|_| {
                simulate_observer_covariant(&n, &fam, &mut rng)
                    .estimate
                    .dot(&n)
            })
            .collect();
        let (m, se) = mean_se(&xs);
        assert!((m - 1.0 / 3.0).abs() < 3.0 * se, "{m} ± {se}");
    }

    #[test]
    fn sg_forced_axis() {
        let mut rng = RandomStream::new(0, 0);
        let n = UnitVector::from_angles(1.3, 0.2);
        for _ in 0..1000 {
            assert_eq!(sg_with_axis(&n, &n, &mut rng).estimate, n);
        }
    }

    #[test]
    fn sg_observer_mean_and_posterior() {
        let mut rng = RandomStream::new(42, 21);
        let trials = 100_000;
        let mut dots = Vec::with_capacity(trials);
        let mut comps = [
            Vec::with_capacity(trials),
            Vec::with_capacity(trials),
            Vec::with_capacity(trials),
        ];
        for _ in 0..trials {
            let o = simulate_observer_sg(&UnitVector::Z, &mut rng);
            dots.push(o.estimate.z());
            for (c, v) in comps.iter_mut().zip(o.prepared.to_array()) {
                c.push(v);
            }
        }
        let (m, se) = mean_se(&dots);
        assert!((m - 1.0 / 3.0).abs() < 3.0 * se);
        let want = apply_depolarizing(
            &BlochState::pure(UnitVector::Z),
            &DepolarizingChannel::new(1.0 / 3.0).unwrap(),
        );
        for (c, w) in comps.iter().zip(want.vector()) {
            let (m, se) = mean_se(c);
            assert!((m - w).abs() < 3.0 * se, "{m} vs {w} ± {se}");
        }
    }

    #[test]
    fn chain_rejects_zero_observers() {
        let mut rng = RandomStream::new(0, 0);
        assert!(matches!(
            simulate_chain_single(
                0,
                &QubitKrausFamily::optimal(),
                MeasurementScheme::Covariant,
                &mut rng
            ),
            Err(Error::NoObservers)
        ));
    }

    #[test]
    fn chain_record_shape() {
        let mut rng = RandomStream::new(0, 3);
        for scheme in [
            MeasurementScheme::Covariant,
            MeasurementScheme::SternGerlach,
        ] {
            let r =
                simulate_chain_single(5, &QubitKrausFamily::new(0.7).unwrap(), scheme, &mut rng)
                    .unwrap();
            assert_eq!(r.observers(), 5);
            assert_eq!(r.dots.len(), 5);
            assert!(r.dots.iter().all(|d| (-1.0..=1.0).contains(d)));
            assert!((0.0..=1.0).contains(&r.fidelity(5)));
        }
    }

    #[test]
    fn worst_chain_second_observer() {
        // φ = π: estimates anti-correlate at step 2 (Δ₂ = −1/9) while the
        // handed-on state shrinks by (−1/3)² = +1/9.
        let mut rng = RandomStream::new(42, 30);
        let trials = 200_000;
        let (mut est, mut prep) = (Vec::with_capacity(trials), Vec::with_capacity(trials));
        for _ in 0..trials {
            let r = simulate_chain_single(
                2,
                &QubitKrausFamily::worst(),
                MeasurementScheme::Covariant,
                &mut rng,
            )
            .unwrap();
            est.push(r.dots[1]);
            prep.push(r.prepared_dots[1]);
        }
        let eta = -1.0 / 3.0;
        let (m, se) = mean_se(&est);
        assert!(
            (m - analytic_delta_single(2, eta).unwrap()).abs() < 3.0 * se,
            "{m}"
        );
        let (m, se) = mean_se(&prep);
        assert!(
            (m - analytic_state_shrink(2, eta).unwrap()).abs() < 3.0 * se,
            "{m}"
        );
        assert_abs_diff_eq!(
            2.0 * analytic_fk_single(2, eta).unwrap() - 1.0,
            1.0 / 9.0,
            epsilon = 1e-15
        );
    }
}
