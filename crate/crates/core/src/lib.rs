//! Closed-form and Monte Carlo analysis of how much information about a
//! direction encoded in `N` spin-1/2 systems each member of a chain of
//! non-communicating observers can extract.
//!
//! Layout:
//! - [`sphere`], [`legendre`], [`rng`]: geometry on the sphere, Legendre
//!   polynomials and their zeros, seeded random streams.
//! - [`qubit`]: the single-qubit chain and its depolarizing-channel picture.
//! - [`nspin`]: parallel and optimal N-spin encodings.
//! - [`mc`], [`sweep`]: batched, reproducible Monte Carlo estimation and
//!   parameter sweeps with CSV / JSON-lines output.
//! - [`acceptance`]: the end-to-end checks run by `qrecycle selftest`.

pub mod acceptance;
pub mod chain;
pub mod error;
pub mod legendre;
pub mod mc;
pub mod nspin;
pub mod qubit;
pub mod rng;
pub mod sphere;
pub mod sweep;
pub mod tridiag;

pub use chain::ChainRecord;
pub use error::{Error, Result};
pub use rng::RandomStream;
pub use sphere::UnitVector;
