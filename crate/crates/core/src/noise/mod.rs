//! Depolarizing noise sampling and labeled syndrome datasets.

mod dataset;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use dataset::{
    generate_dataset, read_dataset, read_dataset_file, sidecar_path, write_dataset_file,
    write_samples, DatasetHeader, DATASET_MAGIC,
};

use crate::error::{Error, Result};
use crate::stabilizer::{CodeLayout, LogicalClass, Pauli, PauliOp, Syndrome};

/// Samples per independently seeded RNG stream.
pub const CHUNK_SIZE: usize = 1024;

/// The generator used everywhere randomness is consumed.
pub type StreamRng = ChaCha8Rng;

/// RNG for stream `stream` of a run seeded with `seed`.
///
/// Streams are independent ChaCha keystreams, so any partition of work
/// across threads reproduces the same draws.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Depolarizing channel: X, Y, Z each with probability `p / 3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub p: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(p: f64, seed: u64) -> Result<Self> {
        check_p(p)?;
        Ok(Self { p, seed })
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "physical error rate must lie in [0, 1), got {p}"
        )));
    }
    Ok(())
}

/// Where each sample's physical error rate comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseSource {
    Fixed(f64),
    /// `p` drawn uniformly from `[lo, hi]` per sample.
    Uniform { lo: f64, hi: f64 },
}

impl NoiseSource {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseSource::Fixed(p) => check_p(p),
            NoiseSource::Uniform { lo, hi } => {
                check_p(lo)?;
                check_p(hi)?;
                if lo > hi {
                    return Err(Error::InvalidArgument(format!(
                        "empty p-range [{lo}, {hi}]"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            NoiseSource::Fixed(p) => (p, p),
            NoiseSource::Uniform { lo, hi } => (lo, hi),
        }
    }

    fn draw_p<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseSource::Fixed(p) => p,
            NoiseSource::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        }
    }
}

/// Draws one single-qubit depolarizing Pauli.
#[inline]
pub fn sample_pauli<R: Rng>(p: f64, rng: &mut R) -> Pauli {
    let u: f64 = rng.random();
    if u >= p {
        return Pauli::I;
    }
    match ((3.0 * u / p) as usize).min(2) {
        0 => Pauli::X,
        1 => Pauli::Y,
        _ => Pauli::Z,
    }
}

/// Independent depolarizing error on every qubit of the layout.
pub fn sample_error<R: Rng>(layout: &CodeLayout, p: f64, rng: &mut R) -> PauliOp {
    let n = layout.num_qubits();
    let mut e = PauliOp::identity(n);
    for q in 0..n {
        let pauli = sample_pauli(p, rng);
        if pauli != Pauli::I {
            e.set(q, pauli);
        }
    }
    e
}

/// A labeled syndrome, optionally with the error that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub syndrome: Syndrome,
    pub label: LogicalClass,
    pub error: Option<PauliOp>,
}

impl Sample {
    pub fn from_error(layout: &CodeLayout, error: PauliOp, keep_error: bool) -> Result<Self> {
        let syndrome = layout.syndrome_of(&error)?;
        let label = layout.logical_label(&error)?;
        Ok(Sample {
            syndrome,
            label,
            error: keep_error.then_some(error),
        })
    }
}

/// 1 iff the predicted class differs from the true class.
pub fn logical_failure(predicted: LogicalClass, truth: LogicalClass) -> bool {
    predicted != truth
}

/// Samples chunk `chunk` of a run: at most [`CHUNK_SIZE`] samples drawn from
/// stream `chunk` of `seed`.
pub fn sample_chunk(
    layout: &CodeLayout,
    source: &NoiseSource,
    seed: u64,
    chunk: u64,
    len: usize,
    keep_errors: bool,
) -> Result<Vec<Sample>> {
    let mut rng = stream_rng(seed, chunk);
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let p = source.draw_p(&mut rng);
        let e = sample_error(layout, p, &mut rng);
        out.push(Sample::from_error(layout, e, keep_errors)?);
    }
    Ok(out)
}

/// `count` samples split into [`CHUNK_SIZE`] streams, evaluated on up to
/// `workers` threads and concatenated in chunk order.
pub fn generate_samples(
    layout: &CodeLayout,
    source: &NoiseSource,
    seed: u64,
    count: usize,
    keep_errors: bool,
    workers: usize,
) -> Result<Vec<Sample>> {
    source.validate()?;
    let chunks: Vec<(u64, usize)> = (0..count.div_ceil(CHUNK_SIZE))
        .map(|k| (k as u64, CHUNK_SIZE.min(count - k * CHUNK_SIZE)))
        .collect();
    let parts = crate::parallel::map_ordered(&chunks, workers, |&(k, len)| {
        sample_chunk(layout, source, seed, k, len, keep_errors)
    });
    let mut out = Vec::with_capacity(count);
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stabilizer::build_layout;

    #[test]
    fn zero_rate_gives_identity() {
        let layout = build_layout(3).unwrap();
        let mut rng = stream_rng(1, 0);
        for _ in 0..100 {
            assert!(sample_error(&layout, 0.0, &mut rng).is_identity());
        }
    }

    #[test]
    fn single_qubit_frequencies_match_binomial_bounds() {
        let p = 0.12;
        let draws = 1_000_000usize;
        let mut rng = stream_rng(2024, 0);
        let mut counts = [0usize; 4];
        for _ in 0..draws {
            counts[sample_pauli(p, &mut rng) as usize] += 1;
        }
        let q = p / 3.0;
        let sigma = (draws as f64 * q * (1.0 - q)).sqrt();
        for &c in &counts[1..] {
            assert!(
                (c as f64 - draws as f64 * q).abs() < 3.0 * sigma,
                "count {c} outside 3σ of {}",
                draws as f64 * q
            );
        }
    }

    #[test]
    fn fixed_seed_reproduces_stream() {
        let layout = build_layout(5).unwrap();
        let a: Vec<_> = {
            let mut rng = stream_rng(7, 3);
            (0..50).map(|_| sample_error(&layout, 0.1, &mut rng)).collect()
        };
        let b: Vec<_> = {
            let mut rng = stream_rng(7, 3);
            (0..50).map(|_| sample_error(&layout, 0.1, &mut rng)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn worker_count_does_not_change_samples() {
        let layout = build_layout(3).unwrap();
        let src = NoiseSource::Uniform { lo: 0.05, hi: 0.15 };
        let a = generate_samples(&layout, &src, 11, 3000, true, 1).unwrap();
        let b = generate_samples(&layout, &src, 11, 3000, true, 3).unwrap();
        assert_eq!(a, b);
        for s in &a {
            let e = s.error.as_ref().unwrap();
            assert_eq!(s.label, layout.logical_label(e).unwrap());
        }
    }

    #[test]
    fn logical_failure_is_inequality() {
        assert!(!logical_failure(LogicalClass::I, LogicalClass::I));
        assert!(logical_failure(LogicalClass::X, LogicalClass::Y));
    }

    #[test]
    fn rejects_out_of_range_rates() {
        assert!(NoiseSpec::new(1.0, 0).is_err());
        assert!(NoiseSpec::new(-0.1, 0).is_err());
        assert!(NoiseSource::Uniform { lo: 0.2, hi: 0.1 }.validate().is_err());
    }
}
