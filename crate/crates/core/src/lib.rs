// `!(a < b)` guards below are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cones;
pub mod demos;
pub mod error;
pub mod fibers;
pub mod linalg;
pub mod nonlinear;
pub mod operators;
pub mod scenario;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
