use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::kv::KvMap;
use crate::model::ModelConfig;
use crate::noise::NoiseSource;

/// Learning-rate schedule over the configured number of steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    Constant,
    /// `lr · ½ (1 + cos(π t / T))`.
    Cosine,
}

impl std::fmt::Display for Schedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Schedule::Constant => "constant",
            Schedule::Cosine => "cosine",
        })
    }
}

impl std::str::FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Schedule::Constant),
            "cosine" => Ok(Schedule::Cosine),
            other => Err(Error::Config(format!("unknown schedule {other:?}"))),
        }
    }
}

/// Where training batches come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataRef {
    /// Fresh samples for every batch; batch `k` is drawn from stream `k`.
    OnTheFly(NoiseSource),
    /// A `.qsd` file, cycled with a per-epoch shuffle.
    Dataset(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub batch_size: usize,
    pub steps: usize,
    pub lr: f64,
    pub schedule: Schedule,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    pub data: DataRef,
    /// Write a checkpoint every this many steps (0 disables intermediate
    /// checkpoints).
    pub checkpoint_every: usize,
    pub checkpoint_dir: Option<PathBuf>,
    /// Validation LER cadence in steps (0 disables validation).
    pub val_every: usize,
    pub val_p: f64,
    pub val_trials: usize,
    /// Merge identical syndromes inside a batch into one weighted row.
    pub dedup: bool,
    /// Generate batches inline instead of on a producer thread.
    pub strict_deterministic: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            batch_size: 256,
            steps: 8000,
            lr: 1e-3,
            schedule: Schedule::Cosine,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
            data: DataRef::OnTheFly(NoiseSource::Uniform { lo: 0.05, hi: 0.15 }),
            checkpoint_every: 0,
            checkpoint_dir: None,
            val_every: 0,
            val_p: 0.1,
            val_trials: 10_000,
            dedup: true,
            strict_deterministic: false,
        }
    }
}

const TRAIN_KEYS: &[&str] = &[
    "batch_size",
    "steps",
    "lr",
    "schedule",
    "beta1",
    "beta2",
    "eps",
    "seed",
    "p",
    "p_lo",
    "p_hi",
    "dataset",
    "checkpoint_every",
    "checkpoint_dir",
    "val_every",
    "val_p",
    "val_trials",
    "dedup",
    "strict_deterministic",
];

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("invalid learning rate {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        if self.eps <= 0.0 {
            return Err(Error::Config("eps must be positive".into()));
        }
        if let DataRef::OnTheFly(src) = &self.data {
            src.validate()?;
        }
        Ok(())
    }

    /// Learning rate used at step `t` (0-based).
    pub fn lr_at(&self, t: usize) -> f64 {
        match self.schedule {
            Schedule::Constant => self.lr,
            Schedule::Cosine => {
                let frac = t as f64 / self.steps.max(1) as f64;
                self.lr * 0.5 * (1.0 + (std::f64::consts::PI * frac).cos())
            }
        }
    }

    pub fn all_keys() -> Vec<&'static str> {
        TRAIN_KEYS.iter().chain(ModelConfig::keys()).copied().collect()
    }

    pub fn to_kv(&self) -> KvMap {
        let mut kv = self.model.to_kv();
        kv.set("batch_size", self.batch_size);
        kv.set("steps", self.steps);
        kv.set("lr", self.lr);
        kv.set("schedule", self.schedule);
        kv.set("beta1", self.beta1);
        kv.set("beta2", self.beta2);
        kv.set("eps", self.eps);
        kv.set("seed", self.seed);
        match &self.data {
            DataRef::OnTheFly(NoiseSource::Fixed(p)) => kv.set("p", p),
            DataRef::OnTheFly(NoiseSource::Uniform { lo, hi }) => {
                kv.set("p_lo", lo);
                kv.set("p_hi", hi);
            }
            DataRef::Dataset(path) => kv.set("dataset", path.display()),
        }
        kv.set("checkpoint_every", self.checkpoint_every);
        if let Some(dir) = &self.checkpoint_dir {
            kv.set("checkpoint_dir", dir.display());
        }
        kv.set("val_every", self.val_every);
        kv.set("val_p", self.val_p);
        kv.set("val_trials", self.val_trials);
        kv.set("dedup", self.dedup);
        kv.set("strict_deterministic", self.strict_deterministic);
        kv
    }

    /// Overlays `kv` onto `self`. Unknown keys are rejected.
    pub fn apply_kv(&mut self, kv: &KvMap) -> Result<()> {
        kv.reject_unknown(&Self::all_keys())?;
        self.model.apply_kv(kv)?;
        macro_rules! field {
            ($key:literal, $field:expr) => {
                if let Some(v) = kv.parse_opt($key)? {
                    $field = v;
                }
            };
        }
        field!("batch_size", self.batch_size);
        field!("steps", self.steps);
        field!("lr", self.lr);
        field!("schedule", self.schedule);
        field!("beta1", self.beta1);
        field!("beta2", self.beta2);
        field!("eps", self.eps);
        field!("seed", self.seed);
        field!("checkpoint_every", self.checkpoint_every);
        field!("val_every", self.val_every);
        field!("val_p", self.val_p);
        field!("val_trials", self.val_trials);
        field!("dedup", self.dedup);
        field!("strict_deterministic", self.strict_deterministic);
        if let Some(dir) = kv.get("checkpoint_dir") {
            self.checkpoint_dir = Some(PathBuf::from(dir));
        }

        let p: Option<f64> = kv.parse_opt("p")?;
        let lo: Option<f64> = kv.parse_opt("p_lo")?;
        let hi: Option<f64> = kv.parse_opt("p_hi")?;
        let dataset = kv.get("dataset");
        let given = p.is_some() as u8 + (lo.is_some() || hi.is_some()) as u8 + dataset.is_some() as u8;
        if given > 1 {
            return Err(Error::Config(
                "at most one of p, p_lo/p_hi, dataset may be set".into(),
            ));
        }
        if let Some(p) = p {
            self.data = DataRef::OnTheFly(NoiseSource::Fixed(p));
        }
        if lo.is_some() || hi.is_some() {
            let (dlo, dhi) = match &self.data {
                DataRef::OnTheFly(src) => src.bounds(),
                DataRef::Dataset(_) => (0.05, 0.15),
            };
            self.data = DataRef::OnTheFly(NoiseSource::Uniform {
                lo: lo.unwrap_or(dlo),
                hi: hi.unwrap_or(dhi),
            });
        }
        if let Some(path) = dataset {
            self.data = DataRef::Dataset(PathBuf::from(path));
        }
        Ok(())
    }

    pub fn from_kv(kv: &KvMap) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_kv(kv)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_round_trip() {
        let cfg = TrainConfig {
            steps: 17,
            lr: 3e-4,
            data: DataRef::OnTheFly(NoiseSource::Fixed(0.07)),
            checkpoint_dir: Some("ck".into()),
            ..TrainConfig::default()
        };
        let back = TrainConfig::from_kv(&KvMap::parse(&cfg.to_kv().to_text()).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn cosine_schedule_endpoints() {
        let cfg = TrainConfig {
            steps: 100,
            ..TrainConfig::default()
        };
        assert_eq!(cfg.lr_at(0), 1e-3);
        assert!((cfg.lr_at(50) - 5e-4).abs() < 1e-12);
        assert!(cfg.lr_at(100).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(TrainConfig::from_kv(&KvMap::parse("batch_size = 0").unwrap()).is_err());
        assert!(TrainConfig::from_kv(&KvMap::parse("lr = -1").unwrap()).is_err());
        assert!(TrainConfig::from_kv(&KvMap::parse("bogus = 1").unwrap()).is_err());
        assert!(TrainConfig::from_kv(&KvMap::parse("p = 0.1\ndataset = x.qsd").unwrap()).is_err());
    }
}
