//! `.qsd` dataset files: a fixed binary preamble followed by bit-packed
//! sample records, plus a JSON sidecar mirroring the header.
//!
//! Preamble (little-endian): magic `QSD1`, `u16 d`, `u32 count`,
//! `f32 p_lo`, `f32 p_hi`, `u64 seed`, `u8 flags`. Each record packs, in
//! order, the `m` bits of `s_z`, the `m` bits of `s_x`, the 2-bit class index,
//! and (when flag bit 0 is set) the `n` x-bits and `n` z-bits of the error.
//! Bit `k` of a record lives in byte `k / 8` at position `k % 8`; records are
//! padded to whole bytes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{generate_samples, NoiseSource, Sample};
use crate::error::{Error, Result};
use crate::stabilizer::{BitVec, CodeLayout, LogicalClass, PauliOp, Syndrome};

pub const DATASET_MAGIC: &[u8; 4] = b"QSD1";
pub const FORMAT_VERSION: u32 = 1;
const FLAG_ERRORS: u8 = 1;
const PREAMBLE_LEN: usize = 4 + 2 + 4 + 4 + 4 + 8 + 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format_version: u32,
    pub d: usize,
    pub p_lo: f32,
    pub p_hi: f32,
    pub count: usize,
    pub seed: u64,
    pub retains_errors: bool,
}

impl DatasetHeader {
    fn record_bits(&self) -> usize {
        let n = self.d * self.d;
        let m = (n - 1) / 2;
        2 * m + 2 + if self.retains_errors { 2 * n } else { 0 }
    }

    fn record_bytes(&self) -> usize {
        self.record_bits().div_ceil(8)
    }

    fn write_preamble<W: Write>(&self, w: &mut W) -> Result<()> {
        let d = u16::try_from(self.d)
            .map_err(|_| Error::Format(format!("distance {} does not fit u16", self.d)))?;
        let count = u32::try_from(self.count)
            .map_err(|_| Error::Format(format!("count {} does not fit u32", self.count)))?;
        w.write_all(DATASET_MAGIC)?;
        w.write_all(&d.to_le_bytes())?;
        w.write_all(&count.to_le_bytes())?;
        w.write_all(&self.p_lo.to_le_bytes())?;
        w.write_all(&self.p_hi.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&[if self.retains_errors { FLAG_ERRORS } else { 0 }])?;
        Ok(())
    }

    fn read_preamble<R: Read>(r: &mut R) -> Result<Self> {
        let mut buf = [0u8; PREAMBLE_LEN];
        r.read_exact(&mut buf)
            .map_err(|e| Error::Format(format!("truncated dataset preamble: {e}")))?;
        if &buf[0..4] != DATASET_MAGIC {
            return Err(Error::Format("bad dataset magic".into()));
        }
        let d = u16::from_le_bytes([buf[4], buf[5]]) as usize;
        let count = u32::from_le_bytes(buf[6..10].try_into().unwrap()) as usize;
        let p_lo = f32::from_le_bytes(buf[10..14].try_into().unwrap());
        let p_hi = f32::from_le_bytes(buf[14..18].try_into().unwrap());
        let seed = u64::from_le_bytes(buf[18..26].try_into().unwrap());
        let flags = buf[26];
        if d < 3 || d % 2 == 0 {
            return Err(Error::Format(format!("invalid distance {d} in dataset")));
        }
        Ok(DatasetHeader {
            format_version: FORMAT_VERSION,
            d,
            p_lo,
            p_hi,
            count,
            seed,
            retains_errors: flags & FLAG_ERRORS != 0,
        })
    }
}

fn encode_record(sample: &Sample, header: &DatasetHeader, out: &mut Vec<u8>) -> Result<()> {
    let start = out.len();
    out.resize(start + header.record_bytes(), 0);
    let rec = &mut out[start..];
    let mut k = 0usize;
    let mut push = |bit: bool| {
        if bit {
            rec[k / 8] |= 1 << (k % 8);
        }
        k += 1;
    };
    sample.syndrome.s_z().iter().for_each(&mut push);
    sample.syndrome.s_x().iter().for_each(&mut push);
    let label = sample.label.index();
    push(label & 1 == 1);
    push(label & 2 == 2);
    if header.retains_errors {
        let e = sample
            .error
            .as_ref()
            .ok_or_else(|| Error::Format("dataset retains errors but sample has none".into()))?;
        e.x_bits().iter().for_each(&mut push);
        e.z_bits().iter().for_each(&mut push);
    }
    Ok(())
}

fn decode_record(rec: &[u8], header: &DatasetHeader) -> Sample {
    let n = header.d * header.d;
    let m = (n - 1) / 2;
    let mut k = 0usize;
    let mut next = || {
        let b = (rec[k / 8] >> (k % 8)) & 1 == 1;
        k += 1;
        b
    };
    let mut read_bits = |len: usize| {
        let mut v = BitVec::zeros(len);
        for i in 0..len {
            v.set(i, next());
        }
        v
    };
    let s_z = read_bits(m);
    let s_x = read_bits(m);
    let lbits = read_bits(2);
    let label = LogicalClass::from_index(lbits.get(0) as usize | (lbits.get(1) as usize) << 1)
        .expect("2-bit index");
    let error = header.retains_errors.then(|| {
        let x = read_bits(n);
        let z = read_bits(n);
        PauliOp::from_bits(x, z).expect("equal lengths")
    });
    Sample {
        syndrome: Syndrome::new(s_z, s_x).expect("equal lengths"),
        label,
        error,
    }
}

/// Writes the preamble and `samples` to `sink`.
pub fn write_samples<W: Write>(
    header: &DatasetHeader,
    samples: &[Sample],
    sink: &mut W,
) -> Result<()> {
    if samples.len() != header.count {
        return Err(Error::Format(format!(
            "header count {} does not match {} samples",
            header.count,
            samples.len()
        )));
    }
    header.write_preamble(sink)?;
    let mut buf = Vec::with_capacity(header.record_bytes() * samples.len());
    for s in samples {
        encode_record(s, header, &mut buf)?;
    }
    sink.write_all(&buf)?;
    sink.flush()?;
    Ok(())
}

/// Samples `count` labeled syndromes and streams them to `sink`.
#[allow(clippy::too_many_arguments)]
pub fn generate_dataset<W: Write>(
    layout: &CodeLayout,
    source: &NoiseSource,
    count: usize,
    seed: u64,
    keep_errors: bool,
    workers: usize,
    sink: &mut W,
) -> Result<DatasetHeader> {
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let samples = generate_samples(layout, source, seed, count, keep_errors, workers)?;
    let (lo, hi) = source.bounds();
    let header = DatasetHeader {
        format_version: FORMAT_VERSION,
        d: layout.distance(),
        p_lo: lo as f32,
        p_hi: hi as f32,
        count,
        seed,
        retains_errors: keep_errors,
    };
    write_samples(&header, &samples, sink)?;
    Ok(header)
}

/// Reads a dataset; the body must hold exactly `count` records.
pub fn read_dataset<R: Read>(reader: &mut R) -> Result<(DatasetHeader, Vec<Sample>)> {
    let header = DatasetHeader::read_preamble(reader)?;
    let mut body = Vec::new();
    reader.read_to_end(&mut body)?;
    let rb = header.record_bytes();
    if body.len() != rb * header.count {
        return Err(Error::Format(format!(
            "dataset body holds {} bytes, header promises {} records of {} bytes",
            body.len(),
            header.count,
            rb
        )));
    }
    let samples = body.chunks_exact(rb).map(|r| decode_record(r, &header)).collect();
    Ok((header, samples))
}

/// Path of the JSON sidecar for a dataset file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes `<path>` and its `.json` sidecar.
pub fn write_dataset_file(
    path: &Path,
    layout: &CodeLayout,
    source: &NoiseSource,
    count: usize,
    seed: u64,
    keep_errors: bool,
    workers: usize,
) -> Result<DatasetHeader> {
    let mut w = BufWriter::new(File::create(path)?);
    let header = generate_dataset(layout, source, count, seed, keep_errors, workers, &mut w)?;
    drop(w);
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&header)? + "\n")?;
    Ok(header)
}

pub fn read_dataset_file(path: &Path) -> Result<(DatasetHeader, Vec<Sample>)> {
    read_dataset(&mut BufReader::new(File::open(path)?))
}
