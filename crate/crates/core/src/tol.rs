//! Global numerical tolerances.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Smallest admissible box entry is `-box_negativity`.
    pub box_negativity: f64,
    pub box_normalization: f64,
    pub box_signaling: f64,
    pub state_normalization: f64,
    /// Minimum eigenvalue allowed for a POVM element is `-povm_psd`.
    pub povm_psd: f64,
    pub povm_completeness: f64,
    pub imaginary_residual: f64,
    pub game_normalization: f64,
    pub vector_marginal: f64,
    pub vector_norm: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            box_negativity: 1e-12,
            box_normalization: 1e-10,
            box_signaling: 1e-10,
            state_normalization: 1e-12,
            povm_psd: 1e-10,
            povm_completeness: 1e-10,
            imaginary_residual: 1e-10,
            game_normalization: 1e-12,
            vector_marginal: 1e-10,
            vector_norm: 1e-10,
        }
    }
}
