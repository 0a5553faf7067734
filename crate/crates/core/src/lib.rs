//! Deterministic simulator of governance-constrained wildfire monitoring.

// `!(x > 0.0)` is how validation rejects NaN alongside non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversary;
pub mod belief;
pub mod coordination;
pub mod crypto;
pub mod error;
pub mod governance;
pub mod grid;
pub mod harness;
pub mod ledger;
pub mod rng;
pub mod sensing;
pub mod verification;
pub mod world;

pub use error::{Error, Result};
