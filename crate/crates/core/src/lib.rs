//! Observability tooling for linear state-space models.
//!
//! The crate checks whether a pair `(C, A)` is observable, builds relu-style
//! losses whose zero set implies observability, and provides the structured
//! parameterizations and trainers that keep learned systems observable.

#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(test, allow(clippy::needless_range_loop))]

pub mod coupling;
pub mod enforce;
pub mod error;
pub mod fourier;
pub mod io;
pub mod matcore;
pub mod observability;
pub mod optimize;
pub mod permutation;
pub mod sampling;
pub mod ssm;
pub mod vandermonde;

pub use error::{Error, Result};
pub use matcore::{Complex, ComplexMatrix};
