//! End-to-end cross-entropy training.

mod adam;
mod config;
mod log;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::mpsc::sync_channel;
use std::time::Instant;

use rand::seq::SliceRandom;

pub use adam::Adam;
pub use config::{DataRef, Schedule, TrainConfig};
pub use log::{LogEntry, TrainLog};

use crate::error::{Error, Result};
use crate::eval::{estimate_ler, HqmtDecoder};
use crate::model::{save_checkpoint, Hqmt, NUM_CLASSES};
use crate::noise::{read_dataset_file, sample_chunk, stream_rng, NoiseSource, Sample};
use crate::stabilizer::{build_layout, CodeLayout, LogicalClass, Syndrome};
use crate::tensor::{Graph, Scalar, Var};

/// Stream offset that keeps the fixed-dataset shuffles apart from sampling.
const SHUFFLE_STREAM: u64 = 1 << 62;
/// Seed offset of the validation sampler.
const VALIDATION_SEED: u64 = 0x5641_4c49_4441_5445;

/// Mean cross entropy of `[B, 4]` logits against integer labels.
pub fn cross_entropy<T: Scalar>(
    g: &mut Graph<T>,
    logits: Var,
    labels: &[LogicalClass],
) -> Result<Var> {
    let sh = g.shape(logits);
    if labels.is_empty() {
        return Err(Error::InvalidArgument("cross entropy over an empty batch".into()));
    }
    if sh.len() != 2 || sh[0] != labels.len() || sh[1] != NUM_CLASSES {
        return Err(Error::shape("cross_entropy", sh, &[labels.len(), NUM_CLASSES]));
    }
    let mut w = vec![T::zero(); labels.len() * NUM_CLASSES];
    for (b, l) in labels.iter().enumerate() {
        w[b * NUM_CLASSES + l.index()] = T::one();
    }
    g.softmax_cross_entropy(logits, w, labels.len() as f64)
}

/// Training samples already resolved to memory or to a noise model.
#[derive(Debug, Clone)]
pub enum TrainData {
    OnTheFly(NoiseSource),
    Samples(Vec<Sample>),
}

impl TrainData {
    /// Resolves a config reference, checking a dataset's distance.
    pub fn resolve(data: &DataRef, distance: usize) -> Result<Self> {
        match data {
            DataRef::OnTheFly(src) => Ok(TrainData::OnTheFly(*src)),
            DataRef::Dataset(path) => {
                let (header, samples) = read_dataset_file(path)?;
                if header.d as usize != distance {
                    return Err(Error::DistanceMismatch {
                        checkpoint: distance,
                        requested: header.d as usize,
                    });
                }
                Ok(TrainData::Samples(samples))
            }
        }
    }
}

/// One optimizer step's worth of distinct syndromes with per-class counts.
#[derive(Debug, Clone)]
pub struct Batch {
    pub syndromes: Vec<Syndrome>,
    /// Row-major `[U, 4]` label counts.
    pub counts: Vec<f32>,
    pub size: usize,
}

impl Batch {
    /// Groups samples by syndrome when `dedup` is set. Rows are ordered by
    /// syndrome bits so the result does not depend on sample order.
    pub fn from_samples(samples: &[Sample], dedup: bool) -> Self {
        let mut syndromes = Vec::new();
        let mut counts = Vec::new();
        if dedup {
            let mut groups: BTreeMap<Vec<u64>, (usize, [f32; NUM_CLASSES])> = BTreeMap::new();
            for (i, s) in samples.iter().enumerate() {
                let key = s.syndrome.concat().words().to_vec();
                groups.entry(key).or_insert((i, [0.0; NUM_CLASSES])).1[s.label.index()] += 1.0;
            }
            for (first, c) in groups.into_values() {
                syndromes.push(samples[first].syndrome.clone());
                counts.extend_from_slice(&c);
            }
        } else {
            for s in samples {
                syndromes.push(s.syndrome.clone());
                let mut c = [0.0; NUM_CLASSES];
                c[s.label.index()] = 1.0;
                counts.extend_from_slice(&c);
            }
        }
        Batch {
            syndromes,
            counts,
            size: samples.len(),
        }
    }
}

/// Loss, accuracy, and per-parameter gradients on one batch.
pub fn loss_and_grads(
    model: &Hqmt,
    layout: &CodeLayout,
    batch: &Batch,
) -> Result<(f64, f64, Vec<Vec<f32>>)> {
    let (pz, px) = model.patch_tensors::<f32>(layout, &batch.syndromes)?;
    let mut g = Graph::<f32>::new();
    let p = model.bind(&mut g, true);
    let z = g.constant(pz);
    let x = g.constant(px);
    let trace = model.forward_graph(&mut g, &p, z, x)?;
    let loss = g.softmax_cross_entropy(trace.logits, batch.counts.clone(), batch.size as f64)?;
    let loss_value = g.value(loss).item() as f64;

    let mut correct = 0.0f64;
    for (row, c) in g
        .value(trace.logits)
        .data()
        .chunks(NUM_CLASSES)
        .zip(batch.counts.chunks(NUM_CLASSES))
    {
        let pred = crate::model::predict(&[row[0], row[1], row[2], row[3]]);
        correct += c[pred.index()] as f64;
    }
    let acc = correct / batch.size as f64;

    if !loss_value.is_finite() {
        return Ok((loss_value, acc, Vec::new()));
    }
    g.backward(loss)?;
    let grads = p
        .iter()
        .zip(model.params().values())
        .map(|(&v, t)| match g.grad(v) {
            Some(gr) => gr.to_vec(),
            None => vec![0.0; t.numel()],
        })
        .collect();
    Ok((loss_value, acc, grads))
}

/// Deterministic batch `k` of a run.
fn make_batch(
    layout: &CodeLayout,
    data: &TrainData,
    cfg: &TrainConfig,
    k: usize,
) -> Result<Batch> {
    let samples = match data {
        TrainData::OnTheFly(src) => {
            sample_chunk(layout, src, cfg.seed, k as u64, cfg.batch_size, false)?
        }
        TrainData::Samples(all) => {
            if all.is_empty() {
                return Err(Error::InvalidArgument("empty training dataset".into()));
            }
            let b = cfg.batch_size.min(all.len());
            let per_epoch = all.len() / b;
            let epoch = k / per_epoch;
            let offset = (k % per_epoch) * b;
            let mut order: Vec<usize> = (0..all.len()).collect();
            order.shuffle(&mut stream_rng(cfg.seed, SHUFFLE_STREAM + epoch as u64));
            order[offset..offset + b].iter().map(|&i| all[i].clone()).collect()
        }
    };
    Ok(Batch::from_samples(&samples, cfg.dedup))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Hqmt,
    pub log: TrainLog,
}

/// Trains `model` and returns it with the run log.
pub fn train(model: Hqmt, cfg: &TrainConfig, data: &TrainData) -> Result<TrainOutcome> {
    train_with(model, cfg, data, |_| {})
}

/// [`train`] with a callback invoked after every logged step.
pub fn train_with(
    mut model: Hqmt,
    cfg: &TrainConfig,
    data: &TrainData,
    mut observer: impl FnMut(&LogEntry),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if model.config() != &cfg.model {
        return Err(Error::Config(
            "model configuration differs from the training configuration".into(),
        ));
    }
    let layout = build_layout(cfg.model.distance)?;
    if let Some(dir) = &cfg.checkpoint_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut adam = Adam::new(model.params(), cfg.beta1, cfg.beta2, cfg.eps);
    let mut log = TrainLog::default();
    let start = Instant::now();

    let mut step_fn = |k: usize, batch: Batch, model: &mut Hqmt| -> Result<()> {
        let (loss, acc, grads) = loss_and_grads(model, &layout, &batch)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { step: k, loss });
        }
        adam.step(model.params_mut(), &grads, cfg.lr_at(k) as f32);
        let step = k + 1;
        let val_ler = if cfg.val_every > 0 && (step % cfg.val_every == 0 || step == cfg.steps) {
            let dec = HqmtDecoder::new(model);
            Some(estimate_ler(&dec, &layout, cfg.val_p, cfg.val_trials as u64, cfg.seed ^ VALIDATION_SEED, 1)?.ler)
        } else {
            None
        };
        let entry = LogEntry {
            step,
            loss,
            acc,
            val_ler,
            seconds: start.elapsed().as_secs_f64(),
        };
        observer(&entry);
        log.push(entry)?;
        if let Some(dir) = &cfg.checkpoint_dir {
            if cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 && step != cfg.steps {
                save_checkpoint(model, &dir.join(format!("step_{step:07}.hqmt")))?;
            }
        }
        Ok(())
    };

    let concurrent = !cfg.strict_deterministic && matches!(data, TrainData::OnTheFly(_));
    if concurrent {
        std::thread::scope(|scope| -> Result<()> {
            let (tx, rx) = sync_channel::<Result<Batch>>(4);
            let producer_layout = &layout;
            scope.spawn(move || {
                for k in 0..cfg.steps {
                    if tx.send(make_batch(producer_layout, data, cfg, k)).is_err() {
                        break;
                    }
                }
            });
            for k in 0..cfg.steps {
                let batch = rx
                    .recv()
                    .map_err(|_| Error::Inconsistent("batch producer stopped early".into()))??;
                step_fn(k, batch, &mut model)?;
            }
            Ok(())
        })?;
    } else {
        for k in 0..cfg.steps {
            let batch = make_batch(&layout, data, cfg, k)?;
            step_fn(k, batch, &mut model)?;
        }
    }

    if let Some(dir) = &cfg.checkpoint_dir {
        save_checkpoint(&model, &dir.join("final.hqmt"))?;
    }
    Ok(TrainOutcome { model, log })
}

/// Convenience: fresh model from `cfg.model` and `cfg.seed`, then [`train`].
pub fn train_fresh(cfg: &TrainConfig, data: &TrainData) -> Result<TrainOutcome> {
    train(Hqmt::new(cfg.model.clone(), cfg.seed)?, cfg, data)
}

/// Writes `log` as CSV to `path`.
pub fn write_log(log: &TrainLog, path: &Path) -> Result<()> {
    std::fs::write(path, log.to_csv())?;
    Ok(())
}
