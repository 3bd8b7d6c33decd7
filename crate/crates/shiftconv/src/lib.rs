//! Smoothed shifted convolutions of generalised divisor functions.
//!
//! The crate computes sums of the form `sum_n w(n/x) d_k(n) d(n+h)` directly,
//! evaluates their predicted main terms, and checks the combinatorial
//! identities (coset bijections, determinant correspondence, partition cases)
//! that the asymptotic analysis of these sums rests on.

pub mod arith;
pub mod detmat;
pub mod error;
pub mod experiments;
pub mod mainterm;
pub mod numeric;
pub mod sl2;
pub mod sums;
pub mod weights;

pub use error::{Error, Result};
