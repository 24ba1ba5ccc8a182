//! Feature-engineering pipeline for labeled image datasets.

pub mod classify;
pub mod colorspace;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod featstore;
pub mod pipeline;
pub mod preprocess;
pub mod rng;
pub mod select;

pub use error::{Error, Result};
