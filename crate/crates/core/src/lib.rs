//! Distribution-aware batch scheduling for requests with data-dependent
//! execution times.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cost;
pub mod dist;
pub mod error;
pub mod experiment;
pub mod hull;
pub mod scheduler;
pub mod sim;
pub mod workload;

pub use error::{Error, Result};
