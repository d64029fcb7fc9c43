//! Logical-error-rate estimation, pseudothresholds, and ablations.

mod ablation;
mod decoder;
mod ler;
mod sweep;
mod threshold;

pub use ablation::{
    parse_variants, run_ablation, train_and_sweep, AblationOutcome, AblationRun, EvalSettings,
    Variant,
};
pub use decoder::{tabulate, DecodeBatch, Decoder, HqmtDecoder, TableDecoder};
pub use ler::{estimate_ler, exact_ler_d3, exact_point, wilson_interval, LerPoint};
pub use sweep::{
    default_grid, exact_sweep, log_grid, parse_grid, plot_svg, sweep, SweepResult,
    DEFAULT_GRID_HI, DEFAULT_GRID_LO, DEFAULT_GRID_POINTS, DEFAULT_TRIALS,
};
pub use threshold::{estimate_pseudothreshold, Pseudothreshold};
