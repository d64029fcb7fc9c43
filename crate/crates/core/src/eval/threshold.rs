use serde::{Deserialize, Serialize};

use super::sweep::SweepResult;

/// Crossing of the LER curve with the un-coded line `LER = p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Pseudothreshold {
    /// Interpolated crossing between grid points `lower` and `lower + 1`.
    Crossing { p: f64, lower: usize },
    /// No adjacent pair of points brackets the crossing.
    NoCrossing,
}

impl Pseudothreshold {
    pub fn value(self) -> Option<f64> {
        match self {
            Pseudothreshold::Crossing { p, .. } => Some(p),
            Pseudothreshold::NoCrossing => None,
        }
    }
}

/// First sign change of `ln LER − ln p` from below to at-or-above the
/// identity line, located by linear interpolation in log-log coordinates.
pub fn estimate_pseudothreshold(sweep: &SweepResult) -> Pseudothreshold {
    let pts = &sweep.points;
    for i in 0..pts.len().saturating_sub(1) {
        let (a, b) = (&pts[i], &pts[i + 1]);
        if !(a.ler < a.p && b.ler >= b.p) {
            continue;
        }
        let p = if a.ler > 0.0 {
            let (x0, x1) = (a.p.ln(), b.p.ln());
            let f0 = a.ler.ln() - x0;
            let f1 = b.ler.ln() - x1;
            (x0 - f0 * (x1 - x0) / (f1 - f0)).exp()
        } else {
            // Zero failures below: fall back to linear coordinates.
            let f0 = a.ler - a.p;
            let f1 = b.ler - b.p;
            a.p - f0 * (b.p - a.p) / (f1 - f0)
        };
        return Pseudothreshold::Crossing { p, lower: i };
    }
    Pseudothreshold::NoCrossing
}
