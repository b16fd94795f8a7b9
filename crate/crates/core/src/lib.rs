#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod editing;
pub mod error;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod render;
pub mod service;
pub mod shape;
pub mod trainer;

pub use error::{Error, Result};
