//! Cauchy proximal splitting for linear imaging inverse problems.
//!
//! The crate is organised around a single forward-backward solver
//! ([`solver::cps_solve`]) that accepts any [`operators::LinearOperator`]
//! and any penalty from [`penalty`]. The [`problems`] module wires the
//! solver into super-resolution, image formation, despeckling and wake
//! detection pipelines; [`simulate`] produces seeded test data and
//! [`metrics`] scores the results. [`bench`] runs the seeded comparison
//! suites.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod image;
pub mod metrics;
pub mod operators;
pub mod penalty;
pub mod problems;
pub mod simulate;
pub mod solver;

pub use error::{Error, Result};
pub use image::{Image, Shape};
