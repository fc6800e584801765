//! Last-passage percolation laboratory.

// `!(a < b)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod busemann;
pub mod config;
pub mod environment;
pub mod error;
pub mod instability;
pub mod io;
pub mod lpp;
pub mod render;
pub mod run;
pub mod shocks;

pub use error::{LabError, Result};
