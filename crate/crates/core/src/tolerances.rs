//! Numerical thresholds shared by every module.

use serde::{Deserialize, Serialize};

/// Single source of truth for the numerical thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Eigenvalues at or below this are numerically zero.
    pub epsilon_rank: f64,
    /// Frequencies closer than this (circular distance, radians) are merged.
    pub delta_theta: f64,
    /// Allowed deviation of pencil eigenvalue moduli from one.
    pub unimodular: f64,
    /// Cholesky pivots must exceed `pd_relative * trace(B) / dim`.
    pub pd_relative: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        epsilon_rank: 1e-4,
        delta_theta: 1e-6,
        unimodular: 1e-6,
        pd_relative: 1e-10,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}
