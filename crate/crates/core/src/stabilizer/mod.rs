//! Rotated surface code construction and exact symplectic GF(2) algebra.

mod bits;
pub mod gf2;
mod layout;
mod pauli;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use bits::BitVec;
pub use layout::{build_layout, CodeLayout, Sector};
pub use pauli::{symplectic_product, Pauli, PauliOp};

use crate::error::{Error, Result};

/// Measured outcomes of the Z-type (`s_z`) and X-type (`s_x`) generators.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Syndrome {
    s_z: BitVec,
    s_x: BitVec,
}

impl Syndrome {
    pub fn new(s_z: BitVec, s_x: BitVec) -> Result<Self> {
        if s_z.len() != s_x.len() {
            return Err(Error::LengthMismatch {
                expected: s_z.len(),
                actual: s_x.len(),
            });
        }
        Ok(Self { s_z, s_x })
    }

    pub(crate) fn new_unchecked(s_z: BitVec, s_x: BitVec) -> Self {
        Self { s_z, s_x }
    }

    pub fn zeros(m: usize) -> Self {
        Self {
            s_z: BitVec::zeros(m),
            s_x: BitVec::zeros(m),
        }
    }

    /// Splits a `2m` vector laid out as `s_z ++ s_x`.
    pub fn from_concat(bits: &BitVec, m: usize) -> Result<Self> {
        if bits.len() != 2 * m {
            return Err(Error::LengthMismatch {
                expected: 2 * m,
                actual: bits.len(),
            });
        }
        let mut s_z = BitVec::zeros(m);
        let mut s_x = BitVec::zeros(m);
        for i in bits.ones() {
            if i < m {
                s_z.set(i, true);
            } else {
                s_x.set(i - m, true);
            }
        }
        Ok(Self { s_z, s_x })
    }

    /// Syndrome whose bit `j` of `s_z` is bit `j` of `index` and bit `j` of
    /// `s_x` is bit `m + j`. Requires `2m ≤ 64`.
    pub fn from_index(index: u64, m: usize) -> Self {
        assert!(2 * m <= 64, "syndrome too long for a u64 index");
        let mut s = Self::zeros(m);
        for j in 0..m {
            s.s_z.set(j, (index >> j) & 1 == 1);
            s.s_x.set(j, (index >> (m + j)) & 1 == 1);
        }
        s
    }

    /// Inverse of [`Syndrome::from_index`].
    pub fn index(&self) -> u64 {
        let m = self.s_z.len();
        assert!(2 * m <= 64, "syndrome too long for a u64 index");
        let mut idx = 0u64;
        for j in self.s_z.ones() {
            idx |= 1 << j;
        }
        for j in self.s_x.ones() {
            idx |= 1 << (m + j);
        }
        idx
    }

    pub fn m(&self) -> usize {
        self.s_z.len()
    }

    pub fn s_z(&self) -> &BitVec {
        &self.s_z
    }

    pub fn s_x(&self) -> &BitVec {
        &self.s_x
    }

    pub fn sector(&self, sector: Sector) -> &BitVec {
        match sector {
            Sector::Z => &self.s_z,
            Sector::X => &self.s_x,
        }
    }

    pub fn concat(&self) -> BitVec {
        self.s_z.concat(&self.s_x)
    }

    pub fn weight(&self) -> usize {
        self.s_z.count_ones() + self.s_x.count_ones()
    }

    pub fn xor(&self, other: &Syndrome) -> Syndrome {
        Syndrome {
            s_z: self.s_z.xor(&other.s_z),
            s_x: self.s_x.xor(&other.s_x),
        }
    }
}

impl fmt::Debug for Syndrome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Syndrome(z={}, x={})", self.s_z, self.s_x)
    }
}

/// Logical coset representative, ordered `I < X < Y < Z`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default,
)]
pub enum LogicalClass {
    #[default]
    I,
    X,
    Y,
    Z,
}

impl LogicalClass {
    pub const ALL: [LogicalClass; 4] = [
        LogicalClass::I,
        LogicalClass::X,
        LogicalClass::Y,
        LogicalClass::Z,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// `(x, z)` components: whether the class contains logical X and/or Z.
    pub fn bits(self) -> (bool, bool) {
        match self {
            LogicalClass::I => (false, false),
            LogicalClass::X => (true, false),
            LogicalClass::Y => (true, true),
            LogicalClass::Z => (false, true),
        }
    }

    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => LogicalClass::I,
            (true, false) => LogicalClass::X,
            (true, true) => LogicalClass::Y,
            (false, true) => LogicalClass::Z,
        }
    }

    /// Product of cosets (phase dropped).
    pub fn compose(self, other: LogicalClass) -> LogicalClass {
        let (ax, az) = self.bits();
        let (bx, bz) = other.bits();
        Self::from_bits(ax ^ bx, az ^ bz)
    }

    pub fn as_char(self) -> char {
        match self {
            LogicalClass::I => 'I',
            LogicalClass::X => 'X',
            LogicalClass::Y => 'Y',
            LogicalClass::Z => 'Z',
        }
    }
}

impl fmt::Display for LogicalClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl FromStr for LogicalClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "I" => Ok(LogicalClass::I),
            "X" => Ok(LogicalClass::X),
            "Y" => Ok(LogicalClass::Y),
            "Z" => Ok(LogicalClass::Z),
            other => Err(Error::Format(format!("unknown logical class {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_multiplication_table_is_a_group() {
        for a in LogicalClass::ALL {
            assert_eq!(a.compose(LogicalClass::I), a);
            assert_eq!(a.compose(a), LogicalClass::I);
            for b in LogicalClass::ALL {
                assert_eq!(a.compose(b), b.compose(a));
            }
        }
        assert_eq!(LogicalClass::X.compose(LogicalClass::Z), LogicalClass::Y);
    }

    #[test]
    fn syndrome_index_round_trip() {
        for idx in 0..256u64 {
            assert_eq!(Syndrome::from_index(idx, 4).index(), idx);
        }
    }
}
