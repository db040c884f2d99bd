use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("eigensolver did not converge for a {dim}x{dim} matrix")]
    EigenNoConvergence { dim: usize },

    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e} is below -{epsilon:e}")]
    NotPsd { eigenvalue: f64, epsilon: f64 },

    #[error("singular pencil: pivot {pivot:e} at or below threshold {threshold:e}")]
    SingularPencil { pivot: f64, threshold: f64 },

    #[error("interior point, decomposition not unique: block-Toeplitz matrix has full rank {rank}")]
    InteriorPoint { rank: usize },

    #[error("non-unimodular eigenvalue: modulus {modulus} deviates from 1 by more than {tolerance:e}")]
    NonUnimodular { modulus: f64, tolerance: f64 },

    #[error("no line-spectral structure found: T has full rank {rank}")]
    NoLineSpectrum { rank: usize },

    #[error("solver did not converge after {iterations} iterations (primal residual {primal:e}, dual residual {dual:e})")]
    NotConverged {
        iterations: usize,
        primal: f64,
        dual: f64,
    },

    #[error("solver diverged at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("format error: {0}")]
    Format(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
