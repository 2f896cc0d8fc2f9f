#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assignment;
pub mod error;
pub mod fit;
pub mod geometry;
pub mod harness;
pub mod log;
pub mod models;
pub mod optimize;
pub mod planner;
pub mod quadrature;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod traffic;

pub use error::{Error, Result};
