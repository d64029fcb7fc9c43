use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kv::KvMap;

/// Which transformer stages run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StageMode {
    Full,
    /// Fine-grained stage, then the merge and pooling.
    Stage1Only,
    /// Merge applied to the embedded tokens, then the coarse stage.
    Stage2Only,
}

impl StageMode {
    pub const ALL: [StageMode; 3] = [StageMode::Full, StageMode::Stage1Only, StageMode::Stage2Only];

    pub fn runs_stage1(self) -> bool {
        matches!(self, StageMode::Full | StageMode::Stage1Only)
    }

    pub fn runs_stage2(self) -> bool {
        matches!(self, StageMode::Full | StageMode::Stage2Only)
    }
}

impl fmt::Display for StageMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StageMode::Full => "full",
            StageMode::Stage1Only => "stage1_only",
            StageMode::Stage2Only => "stage2_only",
        })
    }
}

impl FromStr for StageMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(StageMode::Full),
            "stage1_only" => Ok(StageMode::Stage1Only),
            "stage2_only" => Ok(StageMode::Stage2Only),
            other => Err(Error::Config(format!("unknown stage mode {other:?}"))),
        }
    }
}

/// Placement of layer normalization within a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormPlacement {
    /// `x + f(LN(x))`, with a final LN before pooling.
    Pre,
    /// `LN(x + f(x))`.
    Post,
}

impl fmt::Display for NormPlacement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormPlacement::Pre => "pre",
            NormPlacement::Post => "post",
        })
    }
}

impl FromStr for NormPlacement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pre" => Ok(NormPlacement::Pre),
            "post" => Ok(NormPlacement::Post),
            other => Err(Error::Config(format!("unknown norm placement {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Gelu,
    Relu,
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Gelu => "gelu",
            Activation::Relu => "relu",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gelu" => Ok(Activation::Gelu),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::Config(format!("unknown activation {other:?}"))),
        }
    }
}

/// Hyperparameters of one decoder instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Code distance the model decodes.
    pub distance: usize,
    pub d_model: usize,
    /// Transformer blocks per stage.
    pub n_blocks: usize,
    pub n_heads: usize,
    /// FFN inner width as a multiple of `d_model`.
    pub ffn_mult: usize,
    /// Stage-1 block j and stage-2 block j use the same parameters.
    pub share_weights: bool,
    /// Z and X patches use one embedding projection instead of two.
    pub share_embedding: bool,
    pub stage_mode: StageMode,
    pub norm: NormPlacement,
    pub activation: Activation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            distance: 3,
            d_model: 128,
            n_blocks: 3,
            n_heads: 4,
            ffn_mult: 4,
            share_weights: true,
            share_embedding: false,
            stage_mode: StageMode::Full,
            norm: NormPlacement::Pre,
            activation: Activation::Gelu,
        }
    }
}

const KEYS: &[&str] = &[
    "distance",
    "d_model",
    "n_blocks",
    "n_heads",
    "ffn_mult",
    "share_weights",
    "share_embedding",
    "stage_mode",
    "norm",
    "activation",
];

impl ModelConfig {
    pub fn for_distance(distance: usize) -> Self {
        Self {
            distance,
            ..Self::default()
        }
    }

    /// Per-head width.
    pub fn d_head(&self) -> usize {
        self.d_model / self.n_heads.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.distance < 3 || self.distance % 2 == 0 {
            return Err(Error::InvalidDistance(self.distance));
        }
        if self.n_blocks == 0 {
            return Err(Error::Config("n_blocks must be at least 1".into()));
        }
        if self.n_heads == 0 || self.d_model == 0 || self.d_model % self.n_heads != 0 {
            return Err(Error::Config(format!(
                "n_heads · d_h must equal d_model (d_model = {}, n_heads = {})",
                self.d_model, self.n_heads
            )));
        }
        if self.ffn_mult == 0 {
            return Err(Error::Config("ffn_mult must be at least 1".into()));
        }
        Ok(())
    }

    pub fn to_kv(&self) -> KvMap {
        let mut kv = KvMap::new();
        kv.set("distance", self.distance);
        kv.set("d_model", self.d_model);
        kv.set("n_blocks", self.n_blocks);
        kv.set("n_heads", self.n_heads);
        kv.set("ffn_mult", self.ffn_mult);
        kv.set("share_weights", self.share_weights);
        kv.set("share_embedding", self.share_embedding);
        kv.set("stage_mode", self.stage_mode);
        kv.set("norm", self.norm);
        kv.set("activation", self.activation);
        kv
    }

    /// Overlays the model keys present in `kv` onto `self`; other keys are
    /// ignored.
    pub fn apply_kv(&mut self, kv: &KvMap) -> Result<()> {
        if let Some(v) = kv.parse_opt("distance")? {
            self.distance = v;
        }
        if let Some(v) = kv.parse_opt("d_model")? {
            self.d_model = v;
        }
        if let Some(v) = kv.parse_opt("n_blocks")? {
            self.n_blocks = v;
        }
        if let Some(v) = kv.parse_opt("n_heads")? {
            self.n_heads = v;
        }
        if let Some(v) = kv.parse_opt("ffn_mult")? {
            self.ffn_mult = v;
        }
        if let Some(v) = kv.parse_opt("share_weights")? {
            self.share_weights = v;
        }
        if let Some(v) = kv.parse_opt("share_embedding")? {
            self.share_embedding = v;
        }
        if let Some(v) = kv.parse_opt("stage_mode")? {
            self.stage_mode = v;
        }
        if let Some(v) = kv.parse_opt("norm")? {
            self.norm = v;
        }
        if let Some(v) = kv.parse_opt("activation")? {
            self.activation = v;
        }
        Ok(())
    }

    pub fn keys() -> &'static [&'static str] {
        KEYS
    }

    pub fn from_kv(kv: &KvMap) -> Result<Self> {
        kv.reject_unknown(KEYS)?;
        let mut cfg = Self::default();
        cfg.apply_kv(kv)?;
        cfg.validate()?;
        Ok(cfg)
    }
}
