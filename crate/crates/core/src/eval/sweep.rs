use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::decoder::{Decoder, TableDecoder};
use super::ler::{estimate_ler, exact_point, LerPoint};
use crate::error::{Error, Result};
use crate::stabilizer::CodeLayout;

pub const DEFAULT_GRID_LO: f64 = 0.02;
pub const DEFAULT_GRID_HI: f64 = 0.18;
pub const DEFAULT_GRID_POINTS: usize = 14;
pub const DEFAULT_TRIALS: u64 = 100_000;

const CSV_HEADER: &str = "decoder,d,p,trials,failures,ler,ci_lo,ci_hi";

/// `count` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && hi < 1.0) || count < 2 {
        if count == 1 && lo > 0.0 && lo == hi && lo < 1.0 {
            return Ok(vec![lo]);
        }
        return Err(Error::InvalidArgument(format!(
            "p-grid needs 0 < lo < hi < 1 and at least 2 points (got {lo}:{hi}:{count})"
        )));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..count)
        .map(|i| match i {
            0 => lo,
            _ if i == count - 1 => hi,
            _ => (a + (b - a) * i as f64 / (count - 1) as f64).exp(),
        })
        .collect())
}

/// Parses `lo:hi:count`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::InvalidArgument(format!("p-grid must look like lo:hi:count, got {spec:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    log_grid(lo, hi, count)
}

pub fn default_grid() -> Vec<f64> {
    log_grid(DEFAULT_GRID_LO, DEFAULT_GRID_HI, DEFAULT_GRID_POINTS).expect("valid default grid")
}

/// LER points over a strictly increasing p-grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub decoder: String,
    pub d: usize,
    pub seed: u64,
    pub checkpoint_hash: Option<String>,
    pub config: Option<String>,
    pub points: Vec<LerPoint>,
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("p-grid must be nonempty and strictly increasing".into()));
    }
    Ok(())
}

/// Sampled sweep; every point uses the same `seed`.
pub fn sweep(
    decoder: &dyn Decoder,
    layout: &CodeLayout,
    grid: &[f64],
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<SweepResult> {
    check_grid(grid)?;
    let points = grid
        .iter()
        .map(|&p| estimate_ler(decoder, layout, p, trials, seed, workers))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        decoder: decoder.id(),
        d: layout.distance(),
        seed,
        checkpoint_hash: None,
        config: None,
        points,
    })
}

/// Exact-sum sweep of a distance-3 lookup decoder.
pub fn exact_sweep(layout: &CodeLayout, table: &TableDecoder, grid: &[f64]) -> Result<SweepResult> {
    check_grid(grid)?;
    let points = grid
        .iter()
        .map(|&p| exact_point(layout, table, p))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        decoder: table.name.clone(),
        d: 3,
        seed: 0,
        checkpoint_hash: None,
        config: None,
        points,
    })
}

impl SweepResult {
    pub fn grid(&self) -> Vec<f64> {
        self.points.iter().map(|pt| pt.p).collect()
    }

    /// `decoder,d,p,trials,failures,ler,ci_lo,ci_hi`, one row per point.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{CSV_HEADER}\n");
        for pt in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                pt.decoder, pt.d, pt.p, pt.trials, pt.failures, pt.ler, pt.ci_lo, pt.ci_hi
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == CSV_HEADER => {}
            _ => return Err(Error::Format("missing sweep CSV header".into())),
        }
        let mut points = Vec::new();
        for (i, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = |what: &str| Error::Format(format!("sweep row {}: bad {what}", i + 1));
            if f.len() != 8 {
                return Err(bad("field count"));
            }
            points.push(LerPoint {
                decoder: f[0].to_string(),
                d: f[1].parse().map_err(|_| bad("d"))?,
                p: f[2].parse().map_err(|_| bad("p"))?,
                trials: f[3].parse().map_err(|_| bad("trials"))?,
                failures: f[4].parse().map_err(|_| bad("failures"))?,
                ler: f[5].parse().map_err(|_| bad("ler"))?,
                ci_lo: f[6].parse().map_err(|_| bad("ci_lo"))?,
                ci_hi: f[7].parse().map_err(|_| bad("ci_hi"))?,
                fallback_fraction: 0.0,
            });
        }
        let first = points
            .first()
            .ok_or_else(|| Error::Format("sweep CSV has no rows".into()))?;
        let sweep = SweepResult {
            decoder: first.decoder.clone(),
            d: first.d,
            seed: 0,
            checkpoint_hash: None,
            config: None,
            points,
        };
        check_grid(&sweep.grid()).map_err(|e| Error::Format(e.to_string()))?;
        Ok(sweep)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Standalone log-log plot with the un-coded line `LER = p`.
    pub fn to_svg(&self) -> String {
        plot_svg(std::slice::from_ref(self))
    }
}

/// Log-log SVG of several sweeps on shared axes.
pub fn plot_svg(sweeps: &[SweepResult]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const PAD: f64 = 60.0;
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    let pts: Vec<&LerPoint> = sweeps.iter().flat_map(|s| &s.points).collect();
    let px: Vec<f64> = pts.iter().map(|p| p.p).collect();
    let xmin = px.iter().copied().fold(f64::INFINITY, f64::min).max(1e-6);
    let xmax = px.iter().copied().fold(0.0, f64::max).max(xmin * 10.0);
    let ymin = pts
        .iter()
        .map(|p| p.ler)
        .filter(|&l| l > 0.0)
        .fold(xmin, f64::min)
        .max(1e-9);
    let ymax = pts.iter().map(|p| p.ler).fold(xmax, f64::max).min(1.0);
    let sx = |x: f64| PAD + (x.ln() - xmin.ln()) / (xmax.ln() - xmin.ln()) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y.ln() - ymin.ln()) / (ymax.ln() - ymin.ln()) * (H - 2.0 * PAD);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    // Un-coded reference over the overlapping range.
    let (lo, hi) = (xmin.max(ymin), xmax.min(ymax));
    if hi > lo {
        let _ = writeln!(
            out,
            r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="gray" stroke-dasharray="4 4"/>"#,
            sx(lo),
            sy(lo),
            sx(hi),
            sy(hi)
        );
    }
    for (i, s) in sweeps.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.ler > 0.0)
            .map(|p| format!("{:.1},{:.1}", sx(p.p), sy(p.ler)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            coords.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" fill="{color}">{} d={}</text>"#,
            W - PAD - 110.0,
            PAD + 16.0 * (i + 1) as f64,
            s.decoder,
            s.d
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">physical error rate p</text>"#,
        W / 2.0,
        H - 20.0
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" font-size="12" transform="rotate(-90 16 {:.1})" text-anchor="middle">logical error rate</text>"#,
        H / 2.0,
        H / 2.0
    );
    out.push_str("</svg>\n");
    out
}
