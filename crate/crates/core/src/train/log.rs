use std::fmt::Write;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    /// Number of optimizer updates applied so far (1-based).
    pub step: usize,
    pub loss: f64,
    pub acc: f64,
    pub val_ler: Option<f64>,
    pub seconds: f64,
}

/// Per-step training record with strictly increasing step indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    entries: Vec<LogEntry>,
}

impl TrainLog {
    pub fn push(&mut self, entry: LogEntry) -> Result<()> {
        if let Some(last) = self.entries.last() {
            if entry.step <= last.step {
                return Err(Error::Inconsistent(format!(
                    "log step {} does not follow {}",
                    entry.step, last.step
                )));
            }
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn last(&self) -> Option<&LogEntry> {
        self.entries.last()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Equality on everything except wall-clock time.
    pub fn same_trajectory(&self, other: &TrainLog) -> bool {
        self.entries.len() == other.entries.len()
            && self.entries.iter().zip(&other.entries).all(|(a, b)| {
                a.step == b.step
                    && a.loss.to_bits() == b.loss.to_bits()
                    && a.acc.to_bits() == b.acc.to_bits()
                    && a.val_ler.map(f64::to_bits) == b.val_ler.map(f64::to_bits)
            })
    }

    /// `step,loss,acc,val_ler,seconds`; `val_ler` is empty on steps without
    /// validation.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,loss,acc,val_ler,seconds\n");
        for e in &self.entries {
            let val = e.val_ler.map(|v| v.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{},{:.3}", e.step, e.loss, e.acc, val, e.seconds)
                .expect("writing to a String cannot fail");
        }
        out
    }
}
