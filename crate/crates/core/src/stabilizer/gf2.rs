//! Gaussian elimination over GF(2).

use super::bits::BitVec;

/// Echelon basis for the row space of a set of GF(2) vectors.
#[derive(Debug, Clone)]
pub struct RowSpace {
    width: usize,
    rows: Vec<BitVec>,
    pivots: Vec<usize>,
}

impl RowSpace {
    pub fn new(width: usize) -> Self {
        Self {
            width,
            rows: Vec::new(),
            pivots: Vec::new(),
        }
    }

    pub fn from_rows<'a>(width: usize, rows: impl IntoIterator<Item = &'a BitVec>) -> Self {
        let mut space = Self::new(width);
        for r in rows {
            space.insert(r.clone());
        }
        space
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Reduces `v` against the basis. The result is zero iff `v` is in the span.
    pub fn reduce(&self, mut v: BitVec) -> BitVec {
        for (row, &p) in self.rows.iter().zip(&self.pivots) {
            if v.get(p) {
                v.xor_assign(row);
            }
        }
        v
    }

    pub fn contains(&self, v: &BitVec) -> bool {
        self.reduce(v.clone()).is_zero()
    }

    /// Adds `v` to the basis. Returns false if it was already in the span.
    pub fn insert(&mut self, v: BitVec) -> bool {
        assert_eq!(v.len(), self.width, "row width mismatch");
        let r = self.reduce(v);
        match r.first_one() {
            Some(p) => {
                self.rows.push(r);
                self.pivots.push(p);
                true
            }
            None => false,
        }
    }
}

/// For a full-row-rank matrix `a` (r rows of width c), returns r vectors
/// `x_j` of width c with `a · x_j = e_j`.
///
/// Returns `None` if the rows of `a` are linearly dependent.
pub fn right_inverse(a: &[BitVec]) -> Option<Vec<BitVec>> {
    let r = a.len();
    if r == 0 {
        return Some(Vec::new());
    }
    let c = a[0].len();
    // Row-reduce [a | I] to reduced echelon form.
    let mut rows: Vec<(BitVec, BitVec)> = a
        .iter()
        .enumerate()
        .map(|(i, row)| (row.clone(), BitVec::from_support(r, &[i])))
        .collect();
    let mut pivot_cols = Vec::with_capacity(r);
    let mut lead = 0;
    for col in 0..c {
        if lead == r {
            break;
        }
        let Some(sel) = (lead..r).find(|&i| rows[i].0.get(col)) else {
            continue;
        };
        rows.swap(lead, sel);
        let (pr, pt) = rows[lead].clone();
        for (i, (row, tr)) in rows.iter_mut().enumerate() {
            if i != lead && row.get(col) {
                row.xor_assign(&pr);
                tr.xor_assign(&pt);
            }
        }
        pivot_cols.push(col);
        lead += 1;
    }
    if lead < r {
        return None;
    }
    // With T a = R, the solution of a x = e_j sets x[pivot_i] = T[i][j].
    let mut out = vec![BitVec::zeros(c); r];
    for (i, (_, t)) in rows.iter().enumerate() {
        for j in t.ones() {
            out[j].set(pivot_cols[i], true);
        }
    }
    Some(out)
}
