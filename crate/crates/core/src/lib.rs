//! Numerical operator algebra for connected inclusions of multi-matrix algebras.
//!
//! The crate builds a unital inclusion `N ⊆ M` from its Bratteli inclusion
//! matrix, computes the Markov trace, and iterates the Jones basic
//! construction `N ⊆ M ⊆ M₁ ⊆ M₂ ⊆ …` concretely: every level `k ≥ 1` is a
//! *-algebra of matrices acting on the GNS space of level `k − 1`. On top of
//! the tower it constructs Pimsner–Popa bases, extends automorphisms level by
//! level, and evaluates the multi-step Jones projections.
//!
//! Every identity the crate relies on is also exposed as a residual check so
//! that it can be verified numerically (see [`suites`]).

pub mod automorphisms;
pub mod bases;
pub mod catalog;
mod error;
pub mod inclusion;
pub mod linalg;
pub mod multimatrix;
pub mod multistep;
pub mod par;
pub mod report;
pub mod specfile;
pub mod suites;
pub mod tower;

pub use error::{Error, Result};
pub use inclusion::{Inclusion, InclusionMatrix, MarkovData};
pub use linalg::{Mat, C64};
pub use multimatrix::{AlgebraElement, MultiMatrixAlgebra};
pub use tower::Tower;

/// Default relative tolerance for identity residuals.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;
