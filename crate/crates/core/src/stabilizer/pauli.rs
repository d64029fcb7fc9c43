//! Pauli strings in symplectic form, modulo phase.

use std::fmt;
use std::str::FromStr;

use super::bits::BitVec;
use crate::error::{Error, Result};

/// Single-qubit Pauli, without phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    /// `(x, z)` symplectic bits.
    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// An n-qubit Pauli operator `x_bits`/`z_bits`; Y sets both.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PauliOp {
    x: BitVec,
    z: BitVec,
}

impl PauliOp {
    pub fn identity(n: usize) -> Self {
        Self {
            x: BitVec::zeros(n),
            z: BitVec::zeros(n),
        }
    }

    pub fn from_bits(x: BitVec, z: BitVec) -> Result<Self> {
        if x.len() != z.len() {
            return Err(Error::LengthMismatch {
                expected: x.len(),
                actual: z.len(),
            });
        }
        Ok(Self { x, z })
    }

    /// Single-qubit Pauli `p` on `qubit`, identity elsewhere.
    pub fn single(n: usize, qubit: usize, p: Pauli) -> Self {
        let mut op = Self::identity(n);
        op.set(qubit, p);
        op
    }

    /// `p` on every qubit of `support`.
    pub fn on_support(n: usize, support: &[usize], p: Pauli) -> Self {
        let mut op = Self::identity(n);
        for &q in support {
            op.set(q, p);
        }
        op
    }

    pub fn from_paulis(paulis: &[Pauli]) -> Self {
        let mut op = Self::identity(paulis.len());
        for (q, &p) in paulis.iter().enumerate() {
            op.set(q, p);
        }
        op
    }

    #[inline]
    pub fn num_qubits(&self) -> usize {
        self.x.len()
    }

    pub fn x_bits(&self) -> &BitVec {
        &self.x
    }

    pub fn z_bits(&self) -> &BitVec {
        &self.z
    }

    #[inline]
    pub fn get(&self, qubit: usize) -> Pauli {
        Pauli::from_bits(self.x.get(qubit), self.z.get(qubit))
    }

    #[inline]
    pub fn set(&mut self, qubit: usize, p: Pauli) {
        let (x, z) = p.bits();
        self.x.set(qubit, x);
        self.z.set(qubit, z);
    }

    pub fn weight(&self) -> usize {
        self.x
            .words()
            .iter()
            .zip(self.z.words())
            .map(|(a, b)| (a | b).count_ones() as usize)
            .sum()
    }

    pub fn is_identity(&self) -> bool {
        self.x.is_zero() && self.z.is_zero()
    }

    /// Product modulo phase (componentwise XOR).
    pub fn mul(&self, other: &PauliOp) -> Result<PauliOp> {
        self.check_len(other)?;
        Ok(PauliOp {
            x: self.x.xor(&other.x),
            z: self.z.xor(&other.z),
        })
    }

    /// In-place product; panics on length mismatch.
    pub fn mul_assign(&mut self, other: &PauliOp) {
        self.x.xor_assign(&other.x);
        self.z.xor_assign(&other.z);
    }

    fn check_len(&self, other: &PauliOp) -> Result<()> {
        if self.num_qubits() != other.num_qubits() {
            return Err(Error::LengthMismatch {
                expected: self.num_qubits(),
                actual: other.num_qubits(),
            });
        }
        Ok(())
    }

    /// The symplectic form as a single `2n` vector `(x | z)`.
    pub fn to_symplectic(&self) -> BitVec {
        self.x.concat(&self.z)
    }

    pub fn from_symplectic(v: &BitVec) -> Result<PauliOp> {
        if v.len() % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "symplectic vector of odd length {}",
                v.len()
            )));
        }
        let n = v.len() / 2;
        let mut op = PauliOp::identity(n);
        for i in v.ones() {
            if i < n {
                op.x.set(i, true);
            } else {
                op.z.set(i - n, true);
            }
        }
        Ok(op)
    }
}

/// `<a.x, b.z> + <a.z, b.x> mod 2`; true iff `a` and `b` anticommute.
pub fn symplectic_product(a: &PauliOp, b: &PauliOp) -> Result<bool> {
    a.check_len(b)?;
    Ok(a.x.dot(&b.z) ^ a.z.dot(&b.x))
}

/// Panicking variant for callers that have already checked lengths.
#[inline]
pub(crate) fn anticommutes(a: &PauliOp, b: &PauliOp) -> bool {
    a.x.dot(&b.z) ^ a.z.dot(&b.x)
}

impl fmt::Display for PauliOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.num_qubits() {
            write!(f, "{}", self.get(q).as_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliOp({self})")
    }
}

impl FromStr for PauliOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let paulis = s
            .chars()
            .map(|c| match c {
                'I' | '_' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(Error::Format(format!("invalid Pauli character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PauliOp::from_paulis(&paulis))
    }
}
