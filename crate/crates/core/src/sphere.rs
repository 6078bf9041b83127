//! Directions on the 2-sphere and the samplers that move between them.

use std::ops::Neg;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomStream;

const UNIT_TOL: f64 = 1e-10;

/// A direction in three-dimensional space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitVector {
    x: f64,
    y: f64,
    z: f64,
}

impl UnitVector {
    pub const X: Self = Self {
        x: 1.0,
        y: 0.0,
        z: 0.0,
    };
    pub const Y: Self = Self {
        x: 0.0,
        y: 1.0,
        z: 0.0,
    };
    pub const Z: Self = Self {
        x: 0.0,
        y: 0.0,
        z: 1.0,
    };

    /// Scales an arbitrary non-zero vector onto the sphere.
    pub fn normalize(x: f64, y: f64, z: f64) -> Option<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return None;
        }
        Some(Self {
            x: x / norm,
            y: y / norm,
            z: z / norm,
        })
    }

    /// Accepts components that are already unit norm up to rounding.
    pub fn try_new(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::NotUnitNorm(norm));
        }
        Ok(Self {
            x: x / norm,
            y: y / norm,
            z: z / norm,
        })
    }

    /// Direction with polar angle `theta` from ẑ and azimuth `phi`.
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Self::normalize(st * cp, st * sp, ct).expect("angles give a non-zero vector")
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Dot product, clamped to `[-1, 1]` against rounding.
    pub fn dot(&self, other: &Self) -> f64 {
        (self.x * other.x + self.y * other.y + self.z * other.z).clamp(-1.0, 1.0)
    }

    fn cross(&self, other: &Self) -> [f64; 3] {
        [
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        ]
    }

    /// Right-handed orthonormal pair `(e1, e2)` perpendicular to `self`.
    ///
    /// `e1` is the projection of x̂ onto the plane orthogonal to `self`,
    /// or of ŷ when `self` is within ~25° of ±x̂.
    pub fn orthonormal_frame(&self) -> (Self, Self) {
        let reference = if self.x.abs() > 0.9 { Self::Y } else { Self::X };
        let d = self.dot(&reference);
        let e1 = Self::normalize(
            reference.x - d * self.x,
            reference.y - d * self.y,
            reference.z - d * self.z,
        )
        .expect("reference is never parallel to the axis");
        let [cx, cy, cz] = self.cross(&e1);
        let e2 = Self::normalize(cx, cy, cz).expect("cross product of orthonormal vectors");
        (e1, e2)
    }
}

impl Neg for UnitVector {
    type Output = Self;

    fn neg(self) -> Self {
        Self {
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }
}

/// Draws a direction uniformly with respect to `sinθ dθ dφ / 4π`.
pub fn sample_uniform_sphere(rng: &mut RandomStream) -> UnitVector {
    let z = 2.0 * rng.uniform() - 1.0;
    let phi = rng.azimuth();
    let r = (1.0 - z * z).max(0.0).sqrt();
    let (s, c) = phi.sin_cos();
    UnitVector::normalize(r * c, r * s, z).unwrap_or(UnitVector::Z)
}

/// Inverse CDF of the tilt density `(N+1)((1+x)/2)^N / 2` on `[-1, 1]`.
pub fn cos_tilt_from_uniform(u: f64, spins: usize) -> f64 {
    let x = 2.0 * u.powf(1.0 / (spins as f64 + 1.0)) - 1.0;
    x.clamp(-1.0, 1.0)
}

/// Cosine of the angle between the true direction and the estimate of an
/// optimal covariant measurement on `spins` parallel copies.
pub fn sample_cos_tilt(rng: &mut RandomStream, spins: usize) -> Result<f64> {
    if spins == 0 {
        return Err(Error::NoSpins(spins));
    }
    Ok(cos_tilt_from_uniform(rng.uniform_open_closed(), spins))
}

/// Returns the direction whose cosine with `axis` is `cos_tilt`, rotated by
/// `azimuth` about `axis` starting from the first vector of
/// [`UnitVector::orthonormal_frame`].
pub fn rotate_towards(axis: &UnitVector, cos_tilt: f64, azimuth: f64) -> Result<UnitVector> {
    let norm = axis.norm();
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::NotUnitNorm(norm));
    }
    if !(-1.0..=1.0).contains(&cos_tilt) {
        return Err(Error::CosineOutOfRange(cos_tilt));
    }
    if cos_tilt == 1.0 {
        return Ok(*axis);
    }
    if cos_tilt == -1.0 {
        return Ok(-*axis);
    }
    let sin_tilt = (1.0 - cos_tilt * cos_tilt).sqrt();
    let (e1, e2) = axis.orthonormal_frame();
    let (sa, ca) = azimuth.sin_cos();
    let (p, q) = (sin_tilt * ca, sin_tilt * sa);
    Ok(UnitVector::normalize(
        cos_tilt * axis.x + p * e1.x + q * e2.x,
        cos_tilt * axis.y + p * e1.y + q * e2.y,
        cos_tilt * axis.z + p * e1.z + q * e2.z,
    )
    .expect("rotation of a unit vector"))
}

/// [`rotate_towards`] with a uniformly random azimuth.
pub fn random_tilt(axis: &UnitVector, cos_tilt: f64, rng: &mut RandomStream) -> Result<UnitVector> {
    let azimuth = rng.azimuth();
    rotate_towards(axis, cos_tilt, azimuth)
}
