// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cachesim;
pub mod controller;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod par;
pub mod predictor;
pub mod rng;
pub mod workload;

pub use error::{Error, Result};
