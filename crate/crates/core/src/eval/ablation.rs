use std::fmt;
use std::str::FromStr;

use super::decoder::{tabulate, HqmtDecoder};
use super::sweep::{exact_sweep, sweep, SweepResult};
use crate::error::{Error, Result};
use crate::model::{checkpoint_hash, Hqmt, StageMode};
use crate::stabilizer::build_layout;
use crate::train::{train_fresh, TrainConfig, TrainData, TrainLog};

/// One architectural change applied to a base configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Stage(StageMode),
    Blocks(usize),
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Stage(mode) => write!(f, "{mode}"),
            Variant::Blocks(n) => write!(f, "N={n}"),
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(n) = s.strip_prefix("N=").or_else(|| s.strip_prefix("n=")) {
            let n = n
                .parse()
                .map_err(|_| Error::Config(format!("bad block count in {s:?}")))?;
            return Ok(Variant::Blocks(n));
        }
        s.parse().map(Variant::Stage)
    }
}

/// Parses a comma-separated variant list such as `full,stage1_only` or
/// `N=1,N=3`.
pub fn parse_variants(list: &str) -> Result<Vec<Variant>> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

impl Variant {
    pub fn apply(self, cfg: &mut TrainConfig) {
        match self {
            Variant::Stage(mode) => cfg.model.stage_mode = mode,
            Variant::Blocks(n) => cfg.model.n_blocks = n,
        }
    }
}

/// How variant sweeps are evaluated. Distance-3 variants use exact sums
/// and ignore `trials`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSettings {
    pub trials: u64,
    pub seed: u64,
    pub workers: usize,
}

#[derive(Debug, Clone)]
pub struct AblationRun {
    pub model: Hqmt,
    pub log: TrainLog,
    pub sweep: SweepResult,
}

#[derive(Debug)]
pub struct AblationOutcome {
    pub variant: Variant,
    pub result: Result<AblationRun>,
}

/// Trains and evaluates one model.
pub fn train_and_sweep(
    cfg: &TrainConfig,
    data: &TrainData,
    grid: &[f64],
    eval: &EvalSettings,
) -> Result<AblationRun> {
    let out = train_fresh(cfg, data)?;
    let layout = build_layout(cfg.model.distance)?;
    let dec = HqmtDecoder::new(&out.model);
    let mut result = if layout.distance() == 3 {
        exact_sweep(&layout, &tabulate(&dec, &layout)?, grid)?
    } else {
        sweep(&dec, &layout, grid, eval.trials, eval.seed, eval.workers)?
    };
    result.checkpoint_hash = Some(checkpoint_hash(&out.model));
    result.config = Some(cfg.to_kv().to_text());
    Ok(AblationRun {
        model: out.model,
        log: out.log,
        sweep: result,
    })
}

/// Trains every variant from the same seed and data stream, then evaluates
/// each on `grid`. A failing variant does not stop the others.
pub fn run_ablation(
    base: &TrainConfig,
    data: &TrainData,
    variants: &[Variant],
    grid: &[f64],
    eval: &EvalSettings,
) -> Vec<AblationOutcome> {
    variants
        .iter()
        .map(|&variant| {
            let mut cfg = base.clone();
            variant.apply(&mut cfg);
            let result = train_and_sweep(&cfg, data, grid, eval).map(|mut run| {
                run.sweep.decoder = format!("hqmt[{variant}]");
                run
            });
            AblationOutcome { variant, result }
        })
        .collect()
}
