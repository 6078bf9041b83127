use serde::{Deserialize, Serialize};

use crate::sphere::UnitVector;

/// One simulated trajectory through a chain of `k` observers.
///
/// `dots[j]` is `n̂·m̂_{j+1}`, the overlap of observer `j+1`'s estimate with the
/// encoded direction. `prepared_dots[j]` is the overlap of the axis of the state
/// that observer hands on; averaged over trajectories it is the projection of the
/// mean post-measurement Bloch vector on `n̂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub true_direction: UnitVector,
    pub estimates: Vec<UnitVector>,
    pub dots: Vec<f64>,
    pub prepared_dots: Vec<f64>,
}

impl ChainRecord {
    pub(crate) fn with_capacity(true_direction: UnitVector, k: usize) -> Self {
        Self {
            true_direction,
            estimates: Vec::with_capacity(k),
            dots: Vec::with_capacity(k),
            prepared_dots: Vec::with_capacity(k),
        }
    }

    pub(crate) fn push(&mut self, estimate: UnitVector, prepared_axis: &UnitVector) {
        self.dots.push(self.true_direction.dot(&estimate));
        self.prepared_dots
            .push(self.true_direction.dot(prepared_axis));
        self.estimates.push(estimate);
    }

    pub fn observers(&self) -> usize {
        self.estimates.len()
    }

    /// Overlap of the last observer's estimate with the encoded direction.
    pub fn last_dot(&self) -> f64 {
        *self.dots.last().expect("chains have at least one observer")
    }

    /// Fidelity `(1 + n̂·m̂_j)/2` of observer `j` (1-based).
    pub fn fidelity(&self, observer: usize) -> f64 {
        0.5 * (1.0 + self.dots[observer - 1])
    }
}
