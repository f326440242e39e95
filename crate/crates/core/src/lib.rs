//! Random-projection dimensionality reduction for affine variational
//! inequalities over polytopes.
//!
//! An `AVI(K, M, q)` in dimension `n` is mapped to a `k`-dimensional AVI with
//! a Gram–Schmidt-orthonormalized Gaussian projection, solved there with a
//! complementary pivoting method, lifted back by ℓ1 minimization and
//! projected onto `K`. The quality of the result is measured by the natural
//! map residual, the angle metric and the distance to a full solve.

pub mod avi;
pub mod bench;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod pipeline;
pub mod polytope;
pub mod randproj;
pub mod rng;
pub mod solvers;

pub use avi::AviProblem;
pub use error::{Error, Result};
pub use polytope::Polytope;
pub use randproj::ProjectionOperator;
