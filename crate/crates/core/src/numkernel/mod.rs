//! Small dense linear-algebra kernel: matrices, symmetric and general
//! eigenvalues, Cholesky/LU, and frequency-response singular values.
//!
//! Everything here is sized for the estimator problems (≤ ~40 rows) and is
//! generic over [`Real`](crate::Real).

mod complex;
mod decomp;
mod matrix;

pub use complex::{frequency_response, max_sv_freq, ComplexMatrix};
pub use decomp::{
    chol_posdef, determinant, eigenvalues, forward_subst, inverse, is_posdef, max_singular_value, min_singular_value,
    singular_values, solve, spectral_abscissa, sym_eig, sym_max_eig, Lu, SymEig, SYMMETRY_TOL,
};
pub use matrix::Matrix;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric (relative asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("matrix is singular (pivot {pivot})")]
    Singular { pivot: usize },
    #[error("resolvent jωI - A is singular at ω = {omega}")]
    SingularResolvent { omega: f64 },
    #[error("{0} iteration did not converge")]
    NoConvergence(&'static str),
}
