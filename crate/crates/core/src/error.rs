use thiserror::Error;

/// Errors raised by the design pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid transfer function: {0}")]
    InvalidTransferFunction(String),

    #[error("singular evaluation: denominator magnitude {magnitude:e} at grid index {index}")]
    SingularEvaluation { index: usize, magnitude: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),

    #[error("ill-conditioned spectral density: min {min:e}, max {max:e}")]
    IllConditionedDensity { min: f64, max: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("rank deficient: smallest/largest singular value ratio {ratio:e} at grid index {index}")]
    RankDeficient { index: usize, ratio: f64 },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("synthesis failed: {0}")]
    SynthesisFailure(String),

    #[error("spectral fit lost positive semidefiniteness (min eigenvalue {min_eig:e}, max {max_eig:e})")]
    FitError { min_eig: f64, max_eig: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("undefined certificate: {0}")]
    UndefinedCertificate(String),

    #[error("simulation diverged at sample {sample} (|value| = {magnitude:e})")]
    Divergence { sample: usize, magnitude: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
