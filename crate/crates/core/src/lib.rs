//! Matrix scaling by Sinkhorn iteration and by a box-constrained Newton
//! method on a regularized potential, with simulated noisy oracles, a
//! query-cost ledger, and generators for lower-bound instances.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the sparse
//! container also accepts exact rationals. The aliases below fix `f64`.

pub mod analysis;
pub mod boxoracle;
pub mod error;
pub mod hardgen;
pub mod matcore;
pub mod oraclesim;
pub mod potential;
pub mod scalar;
pub mod solvers;

pub use error::{Error, Result};
pub use matcore::{Norm, ScalingPair, SparseNonNegMatrix, TargetMarginals};
pub use scalar::{Entry, Real};

/// Double-precision sparse matrix.
pub type Matrix = SparseNonNegMatrix<f64>;
/// Single-precision sparse matrix.
pub type Matrix32 = SparseNonNegMatrix<f32>;
/// Sparse matrix with exact rational entries.
pub type RationalMatrix = SparseNonNegMatrix<num_rational::Ratio<i64>>;
/// Double-precision scaling vectors.
pub type Scaling = ScalingPair<f64>;
/// Double-precision target marginals.
pub type Targets = TargetMarginals<f64>;
