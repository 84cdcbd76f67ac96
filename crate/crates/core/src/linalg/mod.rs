//! Dense and sparse symmetric linear algebra.

mod dense;
pub mod dense_eig;
pub mod lanczos;
pub mod qr;
mod sparse;

pub use dense::DenseMatrix;
pub use dense_eig::{dense_eig, nullity, SymmetricEigen};
pub use lanczos::{smallest_eigenpairs, smallest_eigenpairs_with, EigenBasis, LanczosOptions};
pub use sparse::SparseSymMatrix;
