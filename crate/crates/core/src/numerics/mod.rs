//! Discretization, eigen/singular-value solvers, essential-spectrum
//! threshold estimation and box-stability classification.

use thiserror::Error;

pub mod eigen;
pub mod grid;
pub mod matrix;
pub mod stability;
pub mod threshold;

pub use eigen::{
    hermitian_eigenvalues, lowest_eigenvalues, lowest_eigenvalues_with, max_singular_value_dense,
    min_singular_value, min_singular_value_dense, EigenConfig, SolverChoice, SpectrumResult,
};
pub use grid::{Boundary, Grid, DEFAULT_GRID_CAP};
pub use matrix::{discretize_hamiltonian, discretize_hamiltonian_capped, CsrMatrix, OperatorMatrix};
pub use stability::{classify_eigenvalue_stability, StabilityConfig, StabilityReport};
pub use threshold::{threshold_estimate, ThresholdConfig, ThresholdReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid has {points} points, cap is {cap}")]
    GridCapExceeded { points: usize, cap: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("{method} did not converge: {detail}")]
    NonConvergence { method: String, detail: String },
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}
