//! Linear algebra kernels: dense symmetric eigensolver, star-structured sparse
//! matrices, and a shift-invert Lanczos driver.

pub mod dense;
pub mod lanczos;
pub mod star;

pub use dense::{symmetric_eigen, DenseEigenError, SymmetricEigen};
pub use lanczos::{lowest_eigenpairs, EigenPairs, EigenSolveError, LanczosOptions};
pub use star::{Scalar, StarFactor, StarMatrix, StarMatrixError};
