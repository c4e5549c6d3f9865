#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chains;
pub mod clock;
pub mod dynamics;
pub mod env;
pub mod error;
pub mod rng;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub mod limits;
pub mod estimators;
pub mod parallel;
pub mod aging;
pub mod experiment;
