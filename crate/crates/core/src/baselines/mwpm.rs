//! Minimum-weight perfect matching on the per-sector lattice graph.
//!
//! Each sector is decoded on its own: nodes are that sector's generators plus
//! one virtual boundary node, and every qubit is an edge between the
//! generators it touches (or a generator and the boundary). Y errors are
//! treated as independent X and Z flips.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::stabilizer::{BitVec, CodeLayout, LogicalClass, PauliOp, Sector, Syndrome};

/// Defect count up to which matching is exact.
pub const EXACT_MATCHING_LIMIT: usize = 10;

const UNREACHABLE: u32 = u32::MAX;

/// Shortest paths between every pair of nodes of one sector's graph.
#[derive(Debug, Clone)]
pub struct DefectGraph {
    /// Generators in the sector; node `m` is the boundary.
    m: usize,
    n: usize,
    /// `dist[a][b]`, symmetric, in units of qubits.
    dist: Vec<Vec<u32>>,
    /// `parent[src][v] = (previous node, qubit)` on a shortest path from `src`.
    parent: Vec<Vec<Option<(usize, usize)>>>,
}

impl DefectGraph {
    pub fn build(layout: &CodeLayout, sector: Sector) -> Self {
        let m = layout.num_checks();
        let n = layout.num_qubits();
        let boundary = m;
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); m + 1];
        for (q, checks) in layout.adjacency(sector).iter().enumerate() {
            match checks.as_slice() {
                [a] => {
                    adj[*a].push((boundary, q));
                    adj[boundary].push((*a, q));
                }
                [a, b] => {
                    adj[*a].push((*b, q));
                    adj[*b].push((*a, q));
                }
                _ => {}
            }
        }
        let mut dist = vec![vec![UNREACHABLE; m + 1]; m + 1];
        let mut parent = vec![vec![None; m + 1]; m + 1];
        for src in 0..=m {
            let (d, p) = (&mut dist[src], &mut parent[src]);
            d[src] = 0;
            let mut queue = VecDeque::from([src]);
            while let Some(u) = queue.pop_front() {
                for &(v, q) in &adj[u] {
                    if d[v] == UNREACHABLE {
                        d[v] = d[u] + 1;
                        p[v] = Some((u, q));
                        queue.push_back(v);
                    }
                }
            }
        }
        Self { m, n, dist, parent }
    }

    pub fn boundary(&self) -> usize {
        self.m
    }

    pub fn distance(&self, a: usize, b: usize) -> u32 {
        self.dist[a][b]
    }

    /// Qubits on the stored shortest path from `a` to `b`.
    pub fn path(&self, a: usize, b: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut v = b;
        while v != a {
            let (u, q) = self.parent[a][v].expect("graph is connected");
            out.push(q);
            v = u;
        }
        out
    }

    /// Pairs every defect with another defect or the boundary at minimum
    /// total path length. Returns the pairing and whether the greedy
    /// fallback was used.
    pub fn match_defects(&self, defects: &[usize]) -> (Vec<(usize, usize)>, bool) {
        if defects.len() <= EXACT_MATCHING_LIMIT {
            (self.exact_matching(defects), false)
        } else {
            (self.greedy_matching(defects), true)
        }
    }

    fn exact_matching(&self, defects: &[usize]) -> Vec<(usize, usize)> {
        let k = defects.len();
        let full = (1usize << k) - 1;
        // best[mask]: cost of matching the defects in `mask`; choice[mask]:
        // partner of the lowest defect (k means the boundary).
        let mut best = vec![u32::MAX; full + 1];
        let mut choice = vec![0usize; full + 1];
        best[0] = 0;
        for mask in 1..=full {
            let i = mask.trailing_zeros() as usize;
            let rest = mask & !(1 << i);
            let mut cost = best[rest].saturating_add(self.dist[defects[i]][self.m]);
            let mut pick = k;
            let mut others = rest;
            while others != 0 {
                let j = others.trailing_zeros() as usize;
                others &= others - 1;
                let c = best[rest & !(1 << j)].saturating_add(self.dist[defects[i]][defects[j]]);
                if c < cost {
                    cost = c;
                    pick = j;
                }
            }
            best[mask] = cost;
            choice[mask] = pick;
        }
        let mut pairs = Vec::with_capacity(k);
        let mut mask = full;
        while mask != 0 {
            let i = mask.trailing_zeros() as usize;
            let j = choice[mask];
            mask &= !(1 << i);
            if j == k {
                pairs.push((defects[i], self.m));
            } else {
                mask &= !(1 << j);
                pairs.push((defects[i], defects[j]));
            }
        }
        pairs
    }

    fn greedy_matching(&self, defects: &[usize]) -> Vec<(usize, usize)> {
        let mut open: Vec<usize> = defects.to_vec();
        let mut pairs = Vec::new();
        while !open.is_empty() {
            let mut best = (u32::MAX, 0, None);
            for (a, &u) in open.iter().enumerate() {
                let db = self.dist[u][self.m];
                if db < best.0 {
                    best = (db, a, None);
                }
                for (b, &v) in open.iter().enumerate().skip(a + 1) {
                    if self.dist[u][v] < best.0 {
                        best = (self.dist[u][v], a, Some(b));
                    }
                }
            }
            let (_, a, b) = best;
            match b {
                Some(b) => {
                    pairs.push((open[a], open[b]));
                    open.remove(b);
                    open.remove(a);
                }
                None => {
                    pairs.push((open[a], self.m));
                    open.remove(a);
                }
            }
        }
        pairs
    }

    /// Qubit flips reproducing the defect set `fired`.
    pub fn correction(&self, fired: &BitVec) -> (BitVec, bool) {
        let defects: Vec<usize> = fired.ones().collect();
        let (pairs, fallback) = self.match_defects(&defects);
        let mut flips = BitVec::zeros(self.n);
        for (a, b) in pairs {
            for q in self.path(a, b) {
                flips.flip(q);
            }
        }
        (flips, fallback)
    }
}

/// MWPM decoder bound to one code layout.
#[derive(Debug, Clone)]
pub struct MwpmDecoder {
    d: usize,
    /// Z generators; matches produce X flips.
    z_graph: DefectGraph,
    /// X generators; matches produce Z flips.
    x_graph: DefectGraph,
}

impl MwpmDecoder {
    pub fn new(layout: &CodeLayout) -> Self {
        Self {
            d: layout.distance(),
            z_graph: DefectGraph::build(layout, Sector::Z),
            x_graph: DefectGraph::build(layout, Sector::X),
        }
    }

    pub fn distance(&self) -> usize {
        self.d
    }

    pub fn graph(&self, sector: Sector) -> &DefectGraph {
        match sector {
            Sector::Z => &self.z_graph,
            Sector::X => &self.x_graph,
        }
    }

    /// Matched correction operator and whether either sector fell back to
    /// greedy pairing.
    pub fn correction(&self, layout: &CodeLayout, s: &Syndrome) -> Result<(PauliOp, bool)> {
        if layout.distance() != self.d {
            return Err(Error::DistanceMismatch {
                checkpoint: self.d,
                requested: layout.distance(),
            });
        }
        if s.m() != layout.num_checks() {
            return Err(Error::LengthMismatch {
                expected: layout.num_checks(),
                actual: s.m(),
            });
        }
        let (x, fz) = self.z_graph.correction(s.s_z());
        let (z, fx) = self.x_graph.correction(s.s_x());
        Ok((PauliOp::from_bits(x, z)?, fz || fx))
    }

    /// Class implied by the matched correction relative to the pure error.
    pub fn decode(&self, layout: &CodeLayout, s: &Syndrome) -> Result<(LogicalClass, bool)> {
        let (c, fallback) = self.correction(layout, s)?;
        Ok((layout.logical_label(&c)?, fallback))
    }
}

/// Free-function form of [`MwpmDecoder::decode`] that rebuilds the graphs.
pub fn mwpm_decode(layout: &CodeLayout, s: &Syndrome) -> Result<LogicalClass> {
    Ok(MwpmDecoder::new(layout).decode(layout, s)?.0)
}
