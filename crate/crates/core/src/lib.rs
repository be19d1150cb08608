//! Positive semidefinite rank of nonnegative matrices.
//!
//! The crate computes lower and upper bounds on psd rank, exact square-root
//! rank by sign enumeration, and decides psd rank at most two with a small
//! semidefinite feasibility test on a planar polytope pair. Psd factorizations
//! can be built, combined, rescaled, verified and turned into quantum
//! correlation protocols.
//!
//! ```
//! use psdrank::matgen::{generate, FamilySpec};
//! use psdrank::bounds::{psd_rank_interval, BoundsOptions};
//!
//! let d4 = generate(&FamilySpec::Derangement { n: 4 }).unwrap().into_nonnegative().unwrap();
//! let iv = psd_rank_interval(&d4, &BoundsOptions::default()).unwrap();
//! assert_eq!((iv.lower, iv.upper), (3, 3));
//! ```

pub mod bounds;
pub mod catalog;
pub mod cpsd;
pub mod factorization;
pub mod format;
pub mod geometry;
pub mod linalg;
pub mod matgen;
pub mod quantum;
pub mod sdp;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("search needs {required} free sign bits but the budget is {budget}")]
    Budget { required: usize, budget: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub use factorization::{PsdFactorization, VerificationReport};
pub use linalg::{DenseMatrix, HermMatrix, SymMatrix, Tolerance};
pub use matgen::NonnegativeMatrix;
