//! Exhaustive maximum-likelihood decoding for the distance-3 code.

use std::fmt::Write as _;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::stabilizer::{CodeLayout, LogicalClass, Pauli, PauliOp, Syndrome};

/// Largest distance whose `4^n` error set is enumerated.
pub const MAX_EXHAUSTIVE_DISTANCE: usize = 3;

/// Number of errors of each Hamming weight in every `(syndrome, class)`
/// bucket of the distance-3 code.
///
/// Syndrome and class are both linear in the error, so each error's bucket
/// is the XOR of its single-qubit contributions.
#[derive(Debug, Clone, PartialEq)]
pub struct CosetEnumerator {
    n: usize,
    /// `counts[(s * 4 + c) * (n + 1) + w]`.
    counts: Vec<u32>,
}

impl CosetEnumerator {
    pub fn build(layout: &CodeLayout) -> Result<Self> {
        let d = layout.distance();
        if d > MAX_EXHAUSTIVE_DISTANCE {
            return Err(Error::ExhaustiveTooLarge(d));
        }
        let n = layout.num_qubits();
        let m = layout.num_checks();
        // contrib[q][k] for k in X, Y, Z: (syndrome index, packed class bits).
        let mut contrib = vec![[(0u64, 0usize); 3]; n];
        for (q, row) in contrib.iter_mut().enumerate() {
            for (k, pauli) in [Pauli::X, Pauli::Y, Pauli::Z].into_iter().enumerate() {
                let e = PauliOp::single(n, q, pauli);
                let s = layout.syndrome_of(&e)?;
                row[k] = (s.index(), dc_bits(layout.logical_label(&e)?.index()));
            }
        }
        let syndromes = 1usize << (2 * m);
        let mut counts = vec![0u32; syndromes * 4 * (n + 1)];
        let total = 4usize.pow(n as u32);
        for code in 0..total {
            let (mut s, mut c, mut w) = (0u64, 0usize, 0usize);
            let mut rest = code;
            for row in &contrib {
                let digit = rest & 3;
                rest >>= 2;
                if digit != 0 {
                    let (ds, dc) = row[digit - 1];
                    s ^= ds;
                    c ^= dc;
                    w += 1;
                }
            }
            counts[(s as usize * 4 + from_bits_index(c)) * (n + 1) + w] += 1;
        }
        Ok(Self { n, counts })
    }

    /// Shared instance for the distance-3 code.
    pub fn d3(layout: &CodeLayout) -> Result<&'static CosetEnumerator> {
        static CELL: OnceLock<CosetEnumerator> = OnceLock::new();
        if layout.distance() != 3 {
            return Err(Error::ExhaustiveTooLarge(layout.distance()));
        }
        if let Some(e) = CELL.get() {
            return Ok(e);
        }
        let built = Self::build(layout)?;
        Ok(CELL.get_or_init(|| built))
    }

    pub fn num_syndromes(&self) -> usize {
        self.counts.len() / (4 * (self.n + 1))
    }

    pub fn count(&self, syndrome: usize, class: LogicalClass, weight: usize) -> u32 {
        self.counts[(syndrome * 4 + class.index()) * (self.n + 1) + weight]
    }

    /// `P(s, c)` under depolarizing noise `p`, for every syndrome index.
    pub fn coset_probabilities(&self, p: f64) -> Vec<[f64; 4]> {
        let n = self.n;
        let weight_prob: Vec<f64> = (0..=n)
            .map(|w| (p / 3.0).powi(w as i32) * (1.0 - p).powi((n - w) as i32))
            .collect();
        (0..self.num_syndromes())
            .map(|s| {
                let mut out = [0.0; 4];
                for (c, slot) in out.iter_mut().enumerate() {
                    let base = (s * 4 + c) * (n + 1);
                    *slot = self.counts[base..base + n + 1]
                        .iter()
                        .zip(&weight_prob)
                        .map(|(&k, &pw)| k as f64 * pw)
                        .sum();
                }
                out
            })
            .collect()
    }

    /// `Σ_s Σ_{c ≠ table[s]} P(s, c)`.
    pub fn failure_probability(&self, table: &[LogicalClass], p: f64) -> Result<f64> {
        if table.len() != self.num_syndromes() {
            return Err(Error::LengthMismatch {
                expected: self.num_syndromes(),
                actual: table.len(),
            });
        }
        let probs = self.coset_probabilities(p);
        Ok(probs
            .iter()
            .zip(table)
            .map(|(pc, &t)| pc.iter().sum::<f64>() - pc[t.index()])
            .sum())
    }
}

// Class index ↔ (x, z) bit pair, packed as `x | z << 1` for XOR.
fn dc_bits(class_index: usize) -> usize {
    let (x, z) = LogicalClass::ALL[class_index].bits();
    x as usize | (z as usize) << 1
}

fn from_bits_index(bits: usize) -> usize {
    LogicalClass::from_bits(bits & 1 == 1, bits & 2 == 2).index()
}

/// Most likely class and coset probabilities of every distance-3 syndrome.
#[derive(Debug, Clone, PartialEq)]
pub struct MlTable {
    p: f64,
    m: usize,
    best: Vec<LogicalClass>,
    probs: Vec<[f64; 4]>,
}

/// Exhaustive ML table at depolarizing rate `p`. Ties go to the earlier
/// class in `I, X, Y, Z` order.
pub fn build_ml_table(layout: &CodeLayout, p: f64) -> Result<MlTable> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("p = {p} outside [0, 1]")));
    }
    let probs = CosetEnumerator::d3(layout)?.coset_probabilities(p);
    let best = probs.iter().map(argmax).collect();
    Ok(MlTable {
        p,
        m: layout.num_checks(),
        best,
        probs,
    })
}

fn argmax(pc: &[f64; 4]) -> LogicalClass {
    let mut best = 0;
    for c in 1..4 {
        if pc[c] > pc[best] {
            best = c;
        }
    }
    LogicalClass::ALL[best]
}

impl MlTable {
    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn len(&self) -> usize {
        self.best.len()
    }

    pub fn is_empty(&self) -> bool {
        self.best.is_empty()
    }

    pub fn best(&self, s: &Syndrome) -> LogicalClass {
        self.best[s.index() as usize]
    }

    /// Argmax classes indexed by [`Syndrome::index`].
    pub fn classes(&self) -> &[LogicalClass] {
        &self.best
    }

    pub fn probabilities(&self, s: &Syndrome) -> [f64; 4] {
        self.probs[s.index() as usize]
    }

    pub fn all_probabilities(&self) -> &[[f64; 4]] {
        &self.probs
    }

    pub fn total_probability(&self) -> f64 {
        self.probs.iter().flatten().sum()
    }

    /// `1 − Σ_s max_c P(s, c)`.
    pub fn exact_ler(&self) -> f64 {
        1.0 - self
            .probs
            .iter()
            .map(|pc| pc.iter().copied().fold(0.0, f64::max))
            .sum::<f64>()
    }

    /// One line per syndrome: `s_z s_x` bits, argmax class, then
    /// `P(s, I), P(s, X), P(s, Y), P(s, Z)`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (i, (c, pc)) in self.best.iter().zip(&self.probs).enumerate() {
            let s = Syndrome::from_index(i as u64, self.m);
            let _ = writeln!(
                out,
                "{},{},{:e},{:e},{:e},{:e}",
                s.concat(),
                c,
                pc[0],
                pc[1],
                pc[2],
                pc[3]
            );
        }
        out
    }
}
