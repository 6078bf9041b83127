use thiserror::Error;

/// Errors raised by the numerical kernels and the Monte Carlo harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("abscissa {0} lies outside [-1, 1]")]
    AbscissaOutOfRange(f64),

    #[error("vector is not unit norm (|v| = {0})")]
    NotUnitNorm(f64),

    #[error("cosine {0} lies outside [-1, 1]")]
    CosineOutOfRange(f64),

    #[error("shrink factor {0} lies outside [-1, 1]")]
    DeltaOutOfRange(f64),

    #[error("disturbance constant {0} lies outside [0, 2]")]
    DisturbanceOutOfRange(f64),

    #[error("number of spins must be at least 1 (got {0})")]
    NoSpins(usize),

    #[error("optimal encoding needs an even number of spins >= 2 (got {0})")]
    OddSpinCount(usize),

    #[error("observer index must be at least 1")]
    NoObservers,

    #[error("asymptotic form is undefined for N = {0} (1 - 2 xi0^2 / N^2 <= 0)")]
    AsymptoticUndefined(usize),

    #[error("target fidelity {0} lies outside (1/2, 1)")]
    TargetOutOfRange(f64),

    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
