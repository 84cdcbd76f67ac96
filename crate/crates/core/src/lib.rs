// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datagen;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod mbo;
pub mod pipeline;
pub mod pl_family;
pub mod scalar;
pub mod simplicial;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use scalar::Scalar;
pub use linalg::{DenseMatrix, SparseSymMatrix};

pub type DenseMatrix64 = DenseMatrix<f64>;
pub type DenseMatrix32 = DenseMatrix<f32>;
pub type SparseSymMatrix64 = SparseSymMatrix<f64>;
pub type SparseSymMatrix32 = SparseSymMatrix<f32>;
pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
