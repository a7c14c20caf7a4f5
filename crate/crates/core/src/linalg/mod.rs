//! Sparse matrices and the generalized symmetric eigensolver.

mod cholesky;
mod lanczos;
mod sparse;

pub use cholesky::{reverse_cuthill_mckee, EnvelopeCholesky};
pub use lanczos::{dense_smallest, lanczos_smallest, EigenPairs, LanczosOptions};
pub use sparse::CsrMatrix;
