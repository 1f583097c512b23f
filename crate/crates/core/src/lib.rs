//! Simulator and verification harness for the 1+1 dimensional Born-Infeld
//! quasilinear wave equation.

// Negated float comparisons are used on purpose so that NaN takes the error path.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod harness;
pub mod identity;
pub mod integrator;
pub mod weights;

pub use error::{BiError, Result};
