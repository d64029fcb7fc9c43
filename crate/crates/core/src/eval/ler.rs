use serde::{Deserialize, Serialize};

use super::decoder::{Decoder, TableDecoder};
use crate::baselines::CosetEnumerator;
use crate::error::{Error, Result};
use crate::noise::{sample_chunk, NoiseSource, CHUNK_SIZE};
use crate::parallel::map_ordered;
use crate::stabilizer::{CodeLayout, Syndrome};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;
/// Chunks sampled before each decode call.
const BLOCK_CHUNKS: usize = 64;

/// One logical-error-rate estimate. `trials == 0` marks an exact sum, whose
/// interval collapses to the value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LerPoint {
    pub decoder: String,
    pub d: usize,
    pub p: f64,
    pub trials: u64,
    pub failures: u64,
    pub ler: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Fraction of trials decoded by an approximate fallback path.
    pub fallback_fraction: f64,
}

impl LerPoint {
    pub fn is_exact(&self) -> bool {
        self.trials == 0
    }
}

/// Wilson score interval at 95% for `failures` out of `trials`.
pub fn wilson_interval(failures: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let phat = failures as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (phat + z2 / (2.0 * n)) / denom;
    let half = Z95 * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // The bounds are exactly 0 and 1 at the extremes; clamp away round-off.
    let lo = if failures == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if failures == trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Monte-Carlo LER at rate `p`. Trials are drawn in [`CHUNK_SIZE`] streams of
/// `seed`, so counts do not depend on `workers`.
pub fn estimate_ler(
    decoder: &dyn Decoder,
    layout: &CodeLayout,
    p: f64,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<LerPoint> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let source = NoiseSource::Fixed(p);
    source.validate()?;
    let chunk = CHUNK_SIZE as u64;
    let n_chunks = trials.div_ceil(chunk);
    let (mut failures, mut fallbacks) = (0u64, 0u64);
    let mut start = 0u64;
    while start < n_chunks {
        let end = (start + BLOCK_CHUNKS as u64).min(n_chunks);
        let ids: Vec<u64> = (start..end).collect();
        let parts = map_ordered(&ids, workers, |&k| {
            let len = chunk.min(trials - k * chunk) as usize;
            sample_chunk(layout, &source, seed, k, len, false)
        });
        let mut syndromes: Vec<Syndrome> = Vec::new();
        let mut labels = Vec::new();
        for part in parts {
            for s in part? {
                syndromes.push(s.syndrome);
                labels.push(s.label);
            }
        }
        let per = syndromes.len().div_ceil(workers.max(1)).max(1);
        let slices: Vec<&[Syndrome]> = syndromes.chunks(per).collect();
        let decoded = map_ordered(&slices, workers, |sl| decoder.decode_batch(layout, sl));
        let mut offset = 0;
        for batch in decoded {
            let batch = batch?;
            for (c, t) in batch.classes.iter().zip(&labels[offset..]) {
                failures += (c != t) as u64;
            }
            offset += batch.classes.len();
            fallbacks += batch.fallbacks as u64;
        }
        start = end;
    }
    let (ci_lo, ci_hi) = wilson_interval(failures, trials);
    Ok(LerPoint {
        decoder: decoder.id(),
        d: layout.distance(),
        p,
        trials,
        failures,
        ler: failures as f64 / trials as f64,
        ci_lo,
        ci_hi,
        fallback_fraction: fallbacks as f64 / trials as f64,
    })
}

/// Exact LER of a distance-3 lookup decoder: the probability mass of every
/// error whose class differs from the table entry of its syndrome.
pub fn exact_ler_d3(layout: &CodeLayout, table: &TableDecoder, p: f64) -> Result<f64> {
    if table.distance != 3 {
        return Err(Error::ExhaustiveTooLarge(table.distance));
    }
    CosetEnumerator::d3(layout)?.failure_probability(&table.table, p)
}

/// [`exact_ler_d3`] as a [`LerPoint`].
pub fn exact_point(layout: &CodeLayout, table: &TableDecoder, p: f64) -> Result<LerPoint> {
    let ler = exact_ler_d3(layout, table, p)?;
    Ok(LerPoint {
        decoder: table.name.clone(),
        d: 3,
        p,
        trials: 0,
        failures: 0,
        ler,
        ci_lo: ler,
        ci_hi: ler,
        fallback_fraction: 0.0,
    })
}
