//! Essential spectra and Fredholm conditions for Hamiltonians of N-body type
//! with asymptotically homogeneous interactions.
//!
//! * [`lattice`]: exact subspace semilattices, strata of directions at infinity.
//! * [`model`]: potentials, Hamiltonians and their limit operators `τ_α`.
//! * [`numerics`]: discretization, eigen/singular-value solvers, threshold
//!   estimation and box-stability classification.
//! * [`algebra`]: order-zero elements `λ + Σ m_f a(D)`, symbols, compactness
//!   probes and the Fredholm check.
//! * [`problem`] and [`report`]: file formats.

pub mod algebra;
pub mod lattice;
pub mod model;
pub mod numerics;
pub mod problem;
pub mod report;
