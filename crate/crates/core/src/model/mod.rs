//! The hierarchical qubit-merging transformer decoder.

pub mod checkpoint;
pub mod config;
pub mod hqmt;
pub mod params;
pub mod patches;

pub use checkpoint::{
    checkpoint_bytes, checkpoint_hash, load_checkpoint, read_checkpoint, save_checkpoint,
    write_checkpoint,
};
pub use config::{Activation, ModelConfig, NormPlacement, StageMode};
pub use hqmt::{
    affine, attention, embed_tokens, predict, qubit_merge, transformer_block, Affine, BlockParams,
    ForwardTrace, Hqmt, NormParams, INIT_STD, NUM_CLASSES,
};
pub use params::{truncated_normal, ParamId, ParamStore};
pub use patches::{build_patches, PatchSet};
