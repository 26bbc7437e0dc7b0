//! Sparse approximate matrix multiply (SpAMM) on linkless quadtrees.
//!
//! Matrices are stored as [`QuadtreeMatrix`] values: a sparse set of 16x16
//! leaf blocks addressed by Morton keys, plus per-tier Frobenius norms. A
//! product runs in two phases. [`symbolic_multiply`] builds a
//! [`MultiplyPlan`] of leaf pairs whose norm product reaches `tau`, and
//! [`execute_plan`] carries it out with 4x4 micro-kernels.

pub mod bench;
pub mod error;
pub mod matrix;
pub mod morton;
pub mod numeric;
pub mod reference;
pub mod symbolic;

pub use error::{Result, SpammError};
pub use matrix::{DenseMatrix, LeafBlock, QuadtreeMatrix};
pub use morton::LinearIndex;
pub use numeric::{execute_plan, spamm_multiply, ExecCounters, Granularity, MultiplyConfig};
pub use symbolic::{symbolic_multiply, MultiplyPlan};
