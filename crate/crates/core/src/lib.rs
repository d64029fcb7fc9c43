//! Decoding workbench for rotated surface codes built around a hierarchical
//! qubit-merging transformer decoder.

pub mod baselines;
pub mod error;
pub mod eval;
pub mod kv;
pub mod model;
pub mod noise;
pub mod parallel;
pub mod stabilizer;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
