use hqmt_core::stabilizer::gf2::RowSpace;
use hqmt_core::stabilizer::{
    build_layout, symplectic_product, BitVec, CodeLayout, LogicalClass, Pauli, PauliOp, Syndrome,
};
use proptest::prelude::*;

type C = (f64, f64);

fn cmul(a: C, b: C) -> C {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

fn pauli_matrix(p: Pauli) -> [[C; 2]; 2] {
    let (o, z, i) = ((1.0, 0.0), (0.0, 0.0), (0.0, 1.0));
    match p {
        Pauli::I => [[o, z], [z, o]],
        Pauli::X => [[z, o], [o, z]],
        Pauli::Y => [[z, (0.0, -1.0)], [i, z]],
        Pauli::Z => [[o, z], [z, (-1.0, 0.0)]],
    }
}

/// Dense `2^n × 2^n` matrix of a Pauli string (qubit 0 most significant).
fn dense(op: &PauliOp) -> Vec<Vec<C>> {
    let n = op.num_qubits();
    let dim = 1 << n;
    let mut out = vec![vec![(0.0, 0.0); dim]; dim];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            let mut v = (1.0, 0.0);
            for q in 0..n {
                let shift = n - 1 - q;
                let m = pauli_matrix(op.get(q));
                v = cmul(v, m[(r >> shift) & 1][(c >> shift) & 1]);
            }
            *cell = v;
        }
    }
    out
}

fn matmul(a: &[Vec<C>], b: &[Vec<C>]) -> Vec<Vec<C>> {
    let dim = a.len();
    (0..dim)
        .map(|r| {
            (0..dim)
                .map(|c| {
                    (0..dim).fold((0.0, 0.0), |acc, k| {
                        let p = cmul(a[r][k], b[k][c]);
                        (acc.0 + p.0, acc.1 + p.1)
                    })
                })
                .collect()
        })
        .collect()
}

fn pauli_strategy(n: usize) -> impl Strategy<Value = PauliOp> {
    prop::collection::vec(0u8..4, n).prop_map(|v| {
        let ps: Vec<Pauli> = v
            .into_iter()
            .map(|k| [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][k as usize])
            .collect();
        PauliOp::from_paulis(&ps)
    })
}

/// Commutation by counting positions where both act nontrivially and differ.
fn overlap_anticommutes(a: &PauliOp, b: &PauliOp) -> bool {
    (0..a.num_qubits())
        .filter(|&q| {
            let (x, y) = (a.get(q), b.get(q));
            x != Pauli::I && y != Pauli::I && x != y
        })
        .count()
        % 2
        == 1
}

proptest! {
    #[test]
    fn symplectic_product_matches_dense_matrices(
        (a, b) in (1usize..=4).prop_flat_map(|n| (pauli_strategy(n), pauli_strategy(n)))
    ) {
        let (ma, mb) = (dense(&a), dense(&b));
        let (ab, ba) = (matmul(&ma, &mb), matmul(&mb, &ma));
        let commute = ab.iter().flatten().zip(ba.iter().flatten())
            .all(|(x, y)| (x.0 - y.0).abs() < 1e-12 && (x.1 - y.1).abs() < 1e-12);
        let anti = ab.iter().flatten().zip(ba.iter().flatten())
            .all(|(x, y)| (x.0 + y.0).abs() < 1e-12 && (x.1 + y.1).abs() < 1e-12);
        prop_assert!(commute ^ anti);
        prop_assert_eq!(symplectic_product(&a, &b).unwrap(), anti);
    }

    #[test]
    fn symplectic_product_matches_overlap_parity(a in pauli_strategy(25), b in pauli_strategy(25)) {
        prop_assert_eq!(symplectic_product(&a, &b).unwrap(), overlap_anticommutes(&a, &b));
    }

    #[test]
    fn labels_are_invariant_under_stabilizers(
        d in prop::sample::select(vec![3usize, 5, 7]),
        e_bits in prop::collection::vec(0u8..4, 49),
        subset in prop::collection::vec(any::<bool>(), 48),
    ) {
        let layout = build_layout(d).unwrap();
        let n = d * d;
        let e = PauliOp::from_paulis(&e_bits[..n].iter()
            .map(|&k| [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][k as usize]).collect::<Vec<_>>());
        let mut g = PauliOp::identity(n);
        for (gen, &take) in layout.generators().zip(&subset) {
            if take {
                g.mul_assign(gen);
            }
        }
        prop_assert!(layout.in_stabilizer_group(&g).unwrap());
        let eg = e.mul(&g).unwrap();
        prop_assert_eq!(layout.syndrome_of(&eg).unwrap(), layout.syndrome_of(&e).unwrap());
        prop_assert_eq!(layout.logical_label(&eg).unwrap(), layout.logical_label(&e).unwrap());
        for class in LogicalClass::ALL {
            let el = e.mul(&layout.logical_representative(class)).unwrap();
            prop_assert_eq!(
                layout.logical_label(&el).unwrap(),
                layout.logical_label(&e).unwrap().compose(class)
            );
        }
        // e · R(s, label(e)) is a stabilizer.
        let s = layout.syndrome_of(&e).unwrap();
        let r = layout.recovery_operator(&s, layout.logical_label(&e).unwrap()).unwrap();
        prop_assert!(layout.in_stabilizer_group(&e.mul(&r).unwrap()).unwrap());
    }
}

fn check_layout_algebra(layout: &CodeLayout) {
    let d = layout.distance();
    let (n, m) = (d * d, (d * d - 1) / 2);
    assert_eq!(layout.num_qubits(), n);
    assert_eq!(layout.num_checks(), m);
    let gens: Vec<&PauliOp> = layout.generators().collect();
    assert_eq!(gens.len(), n - 1);
    for a in &gens {
        for b in &gens {
            assert!(!symplectic_product(a, b).unwrap());
        }
        assert!(!symplectic_product(a, layout.logical_x()).unwrap());
        assert!(!symplectic_product(a, layout.logical_z()).unwrap());
    }
    assert!(symplectic_product(layout.logical_x(), layout.logical_z()).unwrap());
    let space = RowSpace::from_rows(2 * n, gens.iter().map(|g| g.to_symplectic()).collect::<Vec<_>>().iter());
    assert_eq!(space.rank(), n - 1, "generators are independent");
    for class in &LogicalClass::ALL[1..] {
        let l = layout.logical_representative(*class);
        assert!(!layout.in_stabilizer_group(&l).unwrap());
        assert_eq!(layout.logical_label(&l).unwrap(), *class);
    }
    assert_eq!(layout.logical_x().weight(), d);
    assert_eq!(layout.logical_z().weight(), d);
    for g in layout.z_stabilizers() {
        assert!(g.x_bits().is_zero() && [2, 4].contains(&g.weight()));
    }
    for g in layout.x_stabilizers() {
        assert!(g.z_bits().is_zero() && [2, 4].contains(&g.weight()));
    }
    for q in 0..n {
        assert!((1..=2).contains(&layout.nz_adj()[q].len()));
        assert!((1..=2).contains(&layout.nx_adj()[q].len()));
    }
}

#[test]
fn layouts_have_the_expected_algebra() {
    for d in [3, 5, 7, 9] {
        check_layout_algebra(&build_layout(d).unwrap());
    }
}

#[test]
fn even_or_small_distances_are_rejected() {
    for d in [0, 1, 2, 4, 6] {
        assert!(build_layout(d).is_err(), "d = {d}");
    }
}

#[test]
fn every_d3_syndrome_round_trips_through_its_pure_error() {
    let layout = build_layout(3).unwrap();
    for idx in 0..256u64 {
        let s = Syndrome::from_index(idx, 4);
        assert_eq!(s.index(), idx);
        let t = layout.pure_error(&s).unwrap();
        assert_eq!(layout.syndrome_of(&t).unwrap(), s);
        assert_eq!(layout.logical_label(&t).unwrap(), LogicalClass::I);
        assert_eq!(Syndrome::from_concat(&s.concat(), 4).unwrap(), s);
    }
}

#[test]
fn pure_errors_reproduce_single_generator_syndromes() {
    for d in [3, 5, 7] {
        let layout = build_layout(d).unwrap();
        let m = layout.num_checks();
        for j in 0..2 * m {
            let mut bits = BitVec::zeros(2 * m);
            bits.set(j, true);
            let s = Syndrome::from_concat(&bits, m).unwrap();
            assert_eq!(layout.syndrome_of(&layout.pure_error(&s).unwrap()).unwrap(), s);
        }
    }
}

/// Smallest weight of an operator with zero syndrome outside the stabilizer
/// group, searched exhaustively up to `max_w`.
fn min_logical_weight(layout: &CodeLayout, max_w: usize) -> Option<usize> {
    let n = layout.num_qubits();
    fn rec(layout: &CodeLayout, op: &mut PauliOp, start: usize, left: usize) -> bool {
        if left == 0 {
            return layout.syndrome_of(op).unwrap().weight() == 0
                && !layout.in_stabilizer_group(op).unwrap();
        }
        for q in start..op.num_qubits() {
            for p in [Pauli::X, Pauli::Y, Pauli::Z] {
                op.set(q, p);
                if rec(layout, op, q + 1, left - 1) {
                    return true;
                }
            }
            op.set(q, Pauli::I);
        }
        false
    }
    (1..=max_w).find(|&w| rec(layout, &mut PauliOp::identity(n), 0, w))
}

#[test]
fn minimum_logical_weight_equals_distance() {
    for d in [3usize, 5] {
        let layout = build_layout(d).unwrap();
        assert_eq!(min_logical_weight(&layout, d), Some(d), "d = {d}");
    }
}

#[test]
fn golden_d3_layout_dump_is_stable() {
    let a = build_layout(3).unwrap().debug_dump();
    let b = build_layout(3).unwrap().debug_dump();
    assert_eq!(a, b);
    assert!(a.lines().count() >= 10);
}
