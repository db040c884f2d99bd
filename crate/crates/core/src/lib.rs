pub mod angle;
pub mod atomic_norm;
pub mod error;
pub mod linalg;
pub mod signal;
pub mod tolerances;
pub mod toeplitz;
pub mod vandermonde;

pub use error::{Error, Result};
pub use tolerances::Tolerances;
