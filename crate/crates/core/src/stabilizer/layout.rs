//! The distance-d rotated surface code and its symplectic bookkeeping.

use std::fmt::Write as _;

use super::bits::BitVec;
use super::gf2::{right_inverse, RowSpace};
use super::pauli::{anticommutes, Pauli, PauliOp};
use super::{LogicalClass, Syndrome};
use crate::error::{Error, Result};

/// Stabilizer type of a plaquette.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sector {
    /// Z-type generators; they detect X and Y errors.
    Z,
    /// X-type generators; they detect Z and Y errors.
    X,
}

/// The `[[d², 1, d]]` rotated surface code.
///
/// Data qubit `i` sits at lattice coordinate `(i / d, i % d)`. Plaquette
/// `(r, c)` covers qubits `(r, c), (r, c+1), (r+1, c), (r+1, c+1)` that lie
/// inside the lattice; bulk plaquettes with `r + c` even are X-type and odd
/// are Z-type. Weight-2 X plaquettes sit on the top and bottom edges,
/// weight-2 Z plaquettes on the left and right edges. Generators are indexed
/// in row-major plaquette order within each sector.
#[derive(Debug, Clone)]
pub struct CodeLayout {
    d: usize,
    n: usize,
    m: usize,
    z_stabilizers: Vec<PauliOp>,
    x_stabilizers: Vec<PauliOp>,
    nz_adj: Vec<Vec<usize>>,
    nx_adj: Vec<Vec<usize>>,
    logical_x: PauliOp,
    logical_z: PauliOp,
    /// Entries `0..m` pair with Z generators, `m..2m` with X generators.
    pure_error_table: Vec<PauliOp>,
    stabilizer_space: RowSpace,
}

impl CodeLayout {
    pub fn new(d: usize) -> Result<Self> {
        build_layout(d)
    }

    pub fn distance(&self) -> usize {
        self.d
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    /// Generators per sector, `(n - 1) / 2`.
    pub fn num_checks(&self) -> usize {
        self.m
    }

    pub fn z_stabilizers(&self) -> &[PauliOp] {
        &self.z_stabilizers
    }

    pub fn x_stabilizers(&self) -> &[PauliOp] {
        &self.x_stabilizers
    }

    pub fn stabilizers(&self, sector: Sector) -> &[PauliOp] {
        match sector {
            Sector::Z => &self.z_stabilizers,
            Sector::X => &self.x_stabilizers,
        }
    }

    /// All `2m` generators, Z-type first.
    pub fn generators(&self) -> impl Iterator<Item = &PauliOp> {
        self.z_stabilizers.iter().chain(&self.x_stabilizers)
    }

    /// Ordered Z-generator indices adjacent to each qubit.
    pub fn nz_adj(&self) -> &[Vec<usize>] {
        &self.nz_adj
    }

    pub fn nx_adj(&self) -> &[Vec<usize>] {
        &self.nx_adj
    }

    pub fn adjacency(&self, sector: Sector) -> &[Vec<usize>] {
        match sector {
            Sector::Z => &self.nz_adj,
            Sector::X => &self.nx_adj,
        }
    }

    pub fn logical_x(&self) -> &PauliOp {
        &self.logical_x
    }

    pub fn logical_z(&self) -> &PauliOp {
        &self.logical_z
    }

    pub fn pure_error_table(&self) -> &[PauliOp] {
        &self.pure_error_table
    }

    pub fn stabilizer_space(&self) -> &RowSpace {
        &self.stabilizer_space
    }

    /// Weight-d representative of a logical class.
    pub fn logical_representative(&self, class: LogicalClass) -> PauliOp {
        let mut op = PauliOp::identity(self.n);
        let (x, z) = class.bits();
        if x {
            op.mul_assign(&self.logical_x);
        }
        if z {
            op.mul_assign(&self.logical_z);
        }
        op
    }

    fn check_op(&self, e: &PauliOp) -> Result<()> {
        if e.num_qubits() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                actual: e.num_qubits(),
            });
        }
        Ok(())
    }

    fn check_syndrome(&self, s: &Syndrome) -> Result<()> {
        for len in [s.s_z().len(), s.s_x().len()] {
            if len != self.m {
                return Err(Error::LengthMismatch {
                    expected: self.m,
                    actual: len,
                });
            }
        }
        Ok(())
    }

    pub fn syndrome_of(&self, e: &PauliOp) -> Result<Syndrome> {
        self.check_op(e)?;
        Ok(self.syndrome_unchecked(e))
    }

    pub(crate) fn syndrome_unchecked(&self, e: &PauliOp) -> Syndrome {
        let mut s_z = BitVec::zeros(self.m);
        let mut s_x = BitVec::zeros(self.m);
        for (j, g) in self.z_stabilizers.iter().enumerate() {
            if g.z_bits().dot(e.x_bits()) {
                s_z.set(j, true);
            }
        }
        for (j, g) in self.x_stabilizers.iter().enumerate() {
            if g.x_bits().dot(e.z_bits()) {
                s_x.set(j, true);
            }
        }
        Syndrome::new_unchecked(s_z, s_x)
    }

    /// `T(s)`: the product of table entries for each fired generator.
    pub fn pure_error(&self, s: &Syndrome) -> Result<PauliOp> {
        self.check_syndrome(s)?;
        let mut t = PauliOp::identity(self.n);
        for j in s.s_z().ones() {
            t.mul_assign(&self.pure_error_table[j]);
        }
        for j in s.s_x().ones() {
            t.mul_assign(&self.pure_error_table[self.m + j]);
        }
        Ok(t)
    }

    /// Logical coset of `e` relative to the pure error of its syndrome.
    pub fn logical_label(&self, e: &PauliOp) -> Result<LogicalClass> {
        let s = self.syndrome_of(e)?;
        let mut r = self.pure_error(&s)?;
        r.mul_assign(e);
        if let Some(j) = self.generators().position(|g| anticommutes(g, &r)) {
            return Err(Error::Inconsistent(format!(
                "residual error anticommutes with generator {j}; pure-error table is broken"
            )));
        }
        Ok(LogicalClass::from_bits(
            anticommutes(&r, &self.logical_z),
            anticommutes(&r, &self.logical_x),
        ))
    }

    /// `R = T(s) · L̂`.
    pub fn recovery_operator(&self, s: &Syndrome, class: LogicalClass) -> Result<PauliOp> {
        let mut r = self.pure_error(s)?;
        r.mul_assign(&self.logical_representative(class));
        Ok(r)
    }

    /// GF(2) row-space membership of `e` in the stabilizer group.
    pub fn in_stabilizer_group(&self, e: &PauliOp) -> Result<bool> {
        self.check_op(e)?;
        Ok(self.stabilizer_space.contains(&e.to_symplectic()))
    }

    /// Text dump: one Pauli string per generator, grouped by role.
    pub fn debug_dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# rotated surface code d={} n={} k=1 m={}",
            self.d, self.n, self.m
        );
        out.push_str("# z_stabilizers\n");
        for g in &self.z_stabilizers {
            let _ = writeln!(out, "{g}");
        }
        out.push_str("# x_stabilizers\n");
        for g in &self.x_stabilizers {
            let _ = writeln!(out, "{g}");
        }
        let _ = writeln!(out, "# logical_x\n{}", self.logical_x);
        let _ = writeln!(out, "# logical_z\n{}", self.logical_z);
        out.push_str("# pure_errors\n");
        for t in &self.pure_error_table {
            let _ = writeln!(out, "{t}");
        }
        out
    }
}

/// Constructs the rotated surface code of odd distance `d ≥ 3`.
pub fn build_layout(d: usize) -> Result<CodeLayout> {
    if d < 3 || d % 2 == 0 {
        return Err(Error::InvalidDistance(d));
    }
    let n = d * d;
    let m = (n - 1) / 2;
    let di = d as i64;
    let qubit = |r: i64, c: i64| -> Option<usize> {
        (0..di)
            .contains(&r)
            .then_some(())
            .filter(|_| (0..di).contains(&c))
            .map(|_| (r * di + c) as usize)
    };

    let mut z_stabilizers = Vec::with_capacity(m);
    let mut x_stabilizers = Vec::with_capacity(m);
    for r in -1..di {
        for c in -1..di {
            let support: Vec<usize> = [(r, c), (r, c + 1), (r + 1, c), (r + 1, c + 1)]
                .into_iter()
                .filter_map(|(rr, cc)| qubit(rr, cc))
                .collect();
            let x_type = (r + c).rem_euclid(2) == 0;
            let keep = match support.len() {
                4 => true,
                // top/bottom edges host X plaquettes, left/right host Z
                2 if r == -1 || r == di - 1 => x_type,
                2 => !x_type,
                _ => false,
            };
            if !keep {
                continue;
            }
            if x_type {
                x_stabilizers.push(PauliOp::on_support(n, &support, Pauli::X));
            } else {
                z_stabilizers.push(PauliOp::on_support(n, &support, Pauli::Z));
            }
        }
    }
    if z_stabilizers.len() != m || x_stabilizers.len() != m {
        return Err(Error::Inconsistent(format!(
            "expected {m} generators per sector, got {} Z and {} X",
            z_stabilizers.len(),
            x_stabilizers.len()
        )));
    }

    let adjacency = |gens: &[PauliOp]| -> Vec<Vec<usize>> {
        (0..n)
            .map(|q| {
                gens.iter()
                    .enumerate()
                    .filter(|(_, g)| g.get(q) != Pauli::I)
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect()
    };
    let nz_adj = adjacency(&z_stabilizers);
    let nx_adj = adjacency(&x_stabilizers);

    // Logical Z along the top row, logical X down the left column.
    let row0: Vec<usize> = (0..d).collect();
    let col0: Vec<usize> = (0..d).map(|r| r * d).collect();
    let logical_z = PauliOp::on_support(n, &row0, Pauli::Z);
    let logical_x = PauliOp::on_support(n, &col0, Pauli::X);

    // Destabilizers per sector: X-type partners for Z checks, Z-type for X checks.
    let hz: Vec<BitVec> = z_stabilizers.iter().map(|g| g.z_bits().clone()).collect();
    let hx: Vec<BitVec> = x_stabilizers.iter().map(|g| g.x_bits().clone()).collect();
    let inv_z = right_inverse(&hz)
        .ok_or_else(|| Error::Inconsistent("Z generators are dependent".into()))?;
    let inv_x = right_inverse(&hx)
        .ok_or_else(|| Error::Inconsistent("X generators are dependent".into()))?;
    let mut pure_error_table = Vec::with_capacity(2 * m);
    for t in inv_z {
        pure_error_table.push(PauliOp::from_bits(t, BitVec::zeros(n))?);
    }
    for t in inv_x {
        pure_error_table.push(PauliOp::from_bits(BitVec::zeros(n), t)?);
    }

    let symplectic_rows: Vec<BitVec> = z_stabilizers
        .iter()
        .chain(&x_stabilizers)
        .map(PauliOp::to_symplectic)
        .collect();
    let stabilizer_space = RowSpace::from_rows(2 * n, &symplectic_rows);

    let layout = CodeLayout {
        d,
        n,
        m,
        z_stabilizers,
        x_stabilizers,
        nz_adj,
        nx_adj,
        logical_x,
        logical_z,
        pure_error_table,
        stabilizer_space,
    };
    layout.verify()?;
    Ok(layout)
}

impl CodeLayout {
    /// Checks the structural invariants that do not require enumeration.
    pub fn verify(&self) -> Result<()> {
        let gens: Vec<&PauliOp> = self.generators().collect();
        for (i, a) in gens.iter().enumerate() {
            for b in &gens[i + 1..] {
                if anticommutes(a, b) {
                    return Err(Error::Inconsistent("generators do not commute".into()));
                }
            }
        }
        if self.stabilizer_space.rank() != 2 * self.m {
            return Err(Error::Inconsistent("generators are dependent".into()));
        }
        for adj in self.nz_adj.iter().chain(&self.nx_adj) {
            if adj.len() > 2 {
                return Err(Error::Inconsistent(
                    "qubit adjacent to more than two same-type checks".into(),
                ));
            }
        }
        if !anticommutes(&self.logical_x, &self.logical_z) {
            return Err(Error::Inconsistent("logical X and Z commute".into()));
        }
        for l in [&self.logical_x, &self.logical_z] {
            if gens.iter().any(|g| anticommutes(g, l)) {
                return Err(Error::Inconsistent("logical fails to commute with a generator".into()));
            }
            if self.stabilizer_space.contains(&l.to_symplectic()) {
                return Err(Error::Inconsistent("logical lies in the stabilizer group".into()));
            }
        }
        for (j, t) in self.pure_error_table.iter().enumerate() {
            for (i, g) in gens.iter().enumerate() {
                if anticommutes(g, t) != (i == j) {
                    return Err(Error::Inconsistent(format!(
                        "pure error {j} has wrong commutation with generator {i}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_even_and_small_distances() {
        for d in [0, 1, 2, 4, 6] {
            assert!(matches!(build_layout(d), Err(Error::InvalidDistance(_))));
        }
    }

    #[test]
    fn d3_counts() {
        let l = build_layout(3).unwrap();
        assert_eq!(l.num_qubits(), 9);
        assert_eq!(l.num_checks(), 4);
        assert_eq!(l.z_stabilizers().len(), 4);
        assert_eq!(l.x_stabilizers().len(), 4);
        assert_eq!(l.pure_error_table().len(), 8);
    }

    #[test]
    fn d3_golden_dump() {
        let l = build_layout(3).unwrap();
        let dump = l.debug_dump();
        let gens: Vec<&str> = dump
            .lines()
            .skip(2)
            .take(4)
            .chain(dump.lines().skip(7).take(4))
            .collect();
        assert_eq!(
            gens,
            vec![
                "ZIIZIIIII",
                "IZZIZZIII",
                "IIIZZIZZI",
                "IIIIIZIIZ",
                "IXXIIIIII",
                "XXIXXIIII",
                "IIIIXXIXX",
                "IIIIIIXXI",
            ]
        );
        assert!(dump.contains("# logical_x\nXIIXIIXII\n"));
        assert!(dump.contains("# logical_z\nZZZIIIIII\n"));
    }

    #[test]
    fn adjacency_is_bounded_and_consistent() {
        for d in [3, 5, 7] {
            let l = build_layout(d).unwrap();
            for q in 0..l.num_qubits() {
                assert!(l.nz_adj()[q].len() <= 2 && !l.nz_adj()[q].is_empty());
                assert!(l.nx_adj()[q].len() <= 2 && !l.nx_adj()[q].is_empty());
                for &j in &l.nz_adj()[q] {
                    assert_eq!(l.z_stabilizers()[j].get(q), Pauli::Z);
                }
            }
        }
    }

    #[test]
    fn identity_has_trivial_label() {
        let l = build_layout(3).unwrap();
        let id = PauliOp::identity(9);
        assert_eq!(l.logical_label(&id).unwrap(), LogicalClass::I);
        assert_eq!(l.logical_label(l.logical_x()).unwrap(), LogicalClass::X);
        assert_eq!(l.logical_label(l.logical_z()).unwrap(), LogicalClass::Z);
        let y = l.logical_x().mul(l.logical_z()).unwrap();
        assert_eq!(l.logical_label(&y).unwrap(), LogicalClass::Y);
    }

    #[test]
    fn single_bit_pure_error_is_table_entry() {
        let l = build_layout(5).unwrap();
        let m = l.num_checks();
        for j in 0..2 * m {
            let mut bits = BitVec::zeros(2 * m);
            bits.set(j, true);
            let s = Syndrome::from_concat(&bits, m).unwrap();
            assert_eq!(l.pure_error(&s).unwrap(), l.pure_error_table()[j]);
        }
        let zero = Syndrome::zeros(m);
        assert!(l.pure_error(&zero).unwrap().is_identity());
    }

    #[test]
    fn broken_table_is_detected() {
        let mut l = build_layout(3).unwrap();
        l.pure_error_table[0] = PauliOp::identity(9);
        let e = PauliOp::single(9, 0, Pauli::X);
        let s = l.syndrome_of(&e).unwrap();
        if s.s_z().get(0) {
            assert!(matches!(l.logical_label(&e), Err(Error::Inconsistent(_))));
        }
        assert!(l.verify().is_err());
    }
}
