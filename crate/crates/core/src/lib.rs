//! Numerical laboratory for one-dimensional cognitive animal-movement
//! models: nonlocal perception, cognitive maps, memory through delays,
//! satisfaction-driven movement, success measures, linear stability and a
//! master-equation oracle for the drift-diffusion limit.

// `!(x > 0.0)` is written on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod config;
pub mod error;
pub mod expr;
pub mod grid;
pub mod kernels;
pub mod linalg;
pub mod measures;
pub mod memory;
pub mod models;
pub mod oracle;
pub mod output;
pub mod stability;
pub mod stepper;

pub use error::{Error, Result};
