//! Qubit-centric patch embedding input.

use crate::error::{Error, Result};
use crate::stabilizer::{CodeLayout, Syndrome};

/// A `2n × m` matrix with entries in `{-1, 0, +1}`.
///
/// Row `i < n` is the Z-type patch of qubit `i`; row `n + i` its X-type
/// patch. Column `j` of a Z row is `1 - 2 s_z[j]` when Z check `j` touches the
/// qubit and 0 otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet {
    n: usize,
    m: usize,
    data: Vec<f32>,
}

impl PatchSet {
    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> usize {
        self.m
    }

    /// Row-major `2n × m` entries.
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.m..(r + 1) * self.m]
    }

    pub fn z_rows(&self) -> &[f32] {
        &self.data[..self.n * self.m]
    }

    pub fn x_rows(&self) -> &[f32] {
        &self.data[self.n * self.m..]
    }
}

pub fn build_patches(layout: &CodeLayout, s: &Syndrome) -> Result<PatchSet> {
    let (n, m) = (layout.num_qubits(), layout.num_checks());
    if s.m() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            actual: s.m(),
        });
    }
    let mut data = vec![0.0f32; 2 * n * m];
    fill_patches(layout, s, &mut data);
    Ok(PatchSet { n, m, data })
}

/// Writes the `2n × m` patch matrix of `s` into `out`.
pub(crate) fn fill_patches(layout: &CodeLayout, s: &Syndrome, out: &mut [f32]) {
    let (n, m) = (layout.num_qubits(), layout.num_checks());
    out.iter_mut().for_each(|x| *x = 0.0);
    let sign = |bit: bool| if bit { -1.0 } else { 1.0 };
    for q in 0..n {
        for &j in &layout.nz_adj()[q] {
            out[q * m + j] = sign(s.s_z().get(j));
        }
        for &j in &layout.nx_adj()[q] {
            out[(n + q) * m + j] = sign(s.s_x().get(j));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stabilizer::{build_layout, BitVec};

    #[test]
    fn zero_syndrome_marks_adjacency_with_plus_one() {
        let layout = build_layout(3).unwrap();
        let p = build_patches(&layout, &Syndrome::zeros(4)).unwrap();
        for q in 0..9 {
            for j in 0..4 {
                let expect_z = if layout.nz_adj()[q].contains(&j) { 1.0 } else { 0.0 };
                let expect_x = if layout.nx_adj()[q].contains(&j) { 1.0 } else { 0.0 };
                assert_eq!(p.row(q)[j], expect_z);
                assert_eq!(p.row(9 + q)[j], expect_x);
            }
        }
    }

    #[test]
    fn single_fired_check_flips_its_neighbours() {
        let layout = build_layout(3).unwrap();
        for j in 0..4 {
            let s = Syndrome::new(BitVec::from_support(4, &[j]), BitVec::zeros(4)).unwrap();
            let p = build_patches(&layout, &s).unwrap();
            let neg: Vec<usize> = (0..18).filter(|&r| p.row(r).contains(&-1.0)).collect();
            let expected: Vec<usize> = (0..9).filter(|&q| layout.nz_adj()[q].contains(&j)).collect();
            assert_eq!(neg, expected);
            assert!(expected.len() <= 4);
            for &r in &neg {
                assert_eq!(p.row(r)[j], -1.0);
            }
        }
    }

    #[test]
    fn nonzero_count_matches_adjacency_for_every_z_syndrome() {
        let layout = build_layout(3).unwrap();
        for sz in 0..16u64 {
            let s = Syndrome::from_index(sz, 4);
            let p = build_patches(&layout, &s).unwrap();
            for q in 0..9 {
                let nz = p.row(q).iter().filter(|&&v| v != 0.0).count();
                assert_eq!(nz, layout.nz_adj()[q].len());
                assert!(nz <= 2);
                for (j, &v) in p.row(q).iter().enumerate() {
                    if v != 0.0 {
                        assert_eq!(v, 1.0 - 2.0 * s.s_z().get(j) as u8 as f32);
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_wrong_syndrome_length() {
        let layout = build_layout(3).unwrap();
        assert!(build_patches(&layout, &Syndrome::zeros(12)).is_err());
    }
}
