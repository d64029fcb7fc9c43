//! Reference decoders.

pub mod ml;
pub mod mwpm;

pub use ml::{build_ml_table, CosetEnumerator, MlTable, MAX_EXHAUSTIVE_DISTANCE};
pub use mwpm::{mwpm_decode, DefectGraph, MwpmDecoder, EXACT_MATCHING_LIMIT};
