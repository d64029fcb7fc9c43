mod common;

use common::{random_tensor, rng, tiny_config};
use hqmt_core::model::{attention, build_patches, embed_tokens, qubit_merge, Hqmt, ModelConfig};
use hqmt_core::stabilizer::{build_layout, Syndrome};
use hqmt_core::tensor::{Graph, Tensor};
use rand::Rng;

fn random_syndromes(m: usize, count: usize, seed: u64) -> Vec<Syndrome> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| Syndrome::from_index(r.random_range(0..1u64 << (2 * m).min(63)), m))
        .collect()
}

#[test]
fn stage_shapes_follow_the_token_chain() {
    for d in [3usize, 5, 7] {
        let cfg = ModelConfig {
            distance: d,
            d_model: 16,
            n_blocks: 1,
            n_heads: 2,
            ..ModelConfig::default()
        };
        let layout = build_layout(d).unwrap();
        let model = Hqmt::new(cfg, 0).unwrap();
        let n = d * d;
        let s = random_syndromes(layout.num_checks(), 2, d as u64);
        let (pz, px) = model.patch_tensors::<f32>(&layout, &s).unwrap();
        assert_eq!(pz.shape(), &[2, n, (d * d - 1) / 2]);
        let mut g = Graph::new();
        let p = model.bind(&mut g, false);
        let z = g.constant(pz);
        let x = g.constant(px);
        let trace = model.forward_graph(&mut g, &p, z, x).unwrap();
        let expected: Vec<(&str, Vec<usize>)> = vec![
            ("embed", vec![2, 2 * n, 16]),
            ("stage1", vec![2, 2 * n, 16]),
            ("merge", vec![2, n, 16]),
            ("stage2", vec![2, n, 16]),
            ("pool", vec![2, 16]),
            ("logits", vec![2, 4]),
        ];
        assert_eq!(trace.shapes, expected, "d = {d}");
        for a in &trace.attention {
            for row in g.value(*a).data().chunks(*g.shape(*a).last().unwrap()) {
                let sum: f32 = row.iter().sum();
                assert!((sum - 1.0).abs() < 1e-5);
            }
        }
    }
}

#[test]
fn shared_weights_are_one_tensor() {
    let shared = Hqmt::new(ModelConfig { d_model: 16, n_blocks: 2, n_heads: 2, ..ModelConfig::default() }, 1).unwrap();
    let separate = Hqmt::new(
        ModelConfig { d_model: 16, n_blocks: 2, n_heads: 2, share_weights: false, ..ModelConfig::default() },
        1,
    )
    .unwrap();
    let per_block: usize = shared.stage1_blocks()[0]
        .ids()
        .iter()
        .map(|&id| shared.params().get(id).numel())
        .sum();
    assert_eq!(
        separate.params().num_scalars() - shared.params().num_scalars(),
        2 * per_block
    );

    // Writing through a stage-1 handle is visible from stage 2.
    let mut model = shared;
    let layout = build_layout(3).unwrap();
    let s = random_syndromes(4, 3, 2);
    let before = model.logits(&layout, &s).unwrap();
    for j in 0..2 {
        assert_eq!(model.stage1_blocks()[j].wq, model.stage2_blocks()[j].wq);
    }
    let id = model.stage1_blocks()[1].w2;
    for x in model.params_mut().get_mut(id).data_mut() {
        *x += 0.5;
    }
    let id2 = model.stage2_blocks()[1].w2;
    assert!(model.params().get(id2).data().iter().all(|&x| x.abs() > 0.2));
    assert_ne!(before, model.logits(&layout, &s).unwrap());
}

fn permute_rows(t: &Tensor<f64>, perm: &[usize]) -> Tensor<f64> {
    let sh = t.shape();
    let (b, r, c) = (sh[0], sh[1], sh[2]);
    Tensor::from_fn(sh, |i| {
        let (bi, rest) = (i / (r * c), i % (r * c));
        let (ri, ci) = (rest / c, rest % c);
        t.data()[bi * r * c + perm[ri] * c + ci]
    })
    .reshape(&[b, r, c])
    .unwrap()
}

#[test]
fn blocks_are_permutation_equivariant() {
    let cfg = ModelConfig { d_model: 8, n_blocks: 1, n_heads: 2, ..ModelConfig::default() };
    let mut model = Hqmt::new(cfg.clone(), 4).unwrap();
    let mut r = rng(4);
    let ids: Vec<_> = model.params().ids().collect();
    for id in ids {
        for x in model.params_mut().get_mut(id).data_mut() {
            *x += r.random_range(-0.3..0.3);
        }
    }
    let x = random_tensor::<f64>(&[2, 6, 8], &mut r);
    let perm = [3usize, 0, 5, 1, 4, 2];
    let run = |x: Tensor<f64>| {
        let mut g = Graph::<f64>::new();
        let p = model.bind(&mut g, false);
        let xv = g.constant(x);
        let mut maps = Vec::new();
        let y = hqmt_core::model::transformer_block(&mut g, &p, &model.stage1_blocks()[0], &cfg, xv, &mut maps).unwrap();
        g.value(y).clone()
    };
    let a = permute_rows(&run(x.clone()), &perm);
    let b = run(permute_rows(&x, &perm));
    for (u, v) in a.data().iter().zip(b.data()) {
        assert!((u - v).abs() < 1e-10);
    }
}

#[test]
fn pooled_logits_ignore_qubit_order() {
    // Permuting qubits in both patch tensors together leaves the logits fixed:
    // merge pairs token i with token n + i, and nothing else sees positions.
    let mut model = Hqmt::new(tiny_config(), 6).unwrap();
    let mut r = rng(6);
    let ids: Vec<_> = model.params().ids().collect();
    for id in ids {
        for x in model.params_mut().get_mut(id).data_mut() {
            *x += r.random_range(-0.3..0.3);
        }
    }
    let layout = build_layout(3).unwrap();
    let s = random_syndromes(4, 4, 7);
    let (pz, px) = model.patch_tensors::<f64>(&layout, &s).unwrap();
    let perm = [8usize, 2, 4, 0, 7, 1, 6, 3, 5];
    let run = |pz: Tensor<f64>, px: Tensor<f64>| {
        let mut g = Graph::<f64>::new();
        let p = model.bind(&mut g, false);
        let z = g.constant(pz);
        let x = g.constant(px);
        let t = model.forward_graph(&mut g, &p, z, x).unwrap();
        g.value(t.logits).clone()
    };
    let a = run(pz.clone(), px.clone());
    let b = run(permute_rows(&pz, &perm), permute_rows(&px, &perm));
    for (u, v) in a.data().iter().zip(b.data()) {
        assert!((u - v).abs() < 1e-10);
    }
}

#[test]
fn single_token_attention_returns_values() {
    let mut r = rng(8);
    let mut g = Graph::<f64>::new();
    let q = g.constant(random_tensor(&[1, 4], &mut r));
    let k = g.constant(random_tensor(&[1, 4], &mut r));
    let vt = random_tensor::<f64>(&[1, 4], &mut r);
    let v = g.constant(vt.clone());
    let (out, _) = attention(&mut g, q, k, v).unwrap();
    assert_eq!(g.value(out), &vt);
}

#[test]
fn zero_scores_average_the_values() {
    let mut r = rng(9);
    let mut g = Graph::<f64>::new();
    let q = g.constant(Tensor::zeros(&[3, 4]));
    let k = g.constant(Tensor::zeros(&[5, 4]));
    let vt = random_tensor::<f64>(&[5, 2], &mut r);
    let v = g.constant(vt.clone());
    let (out, _) = attention(&mut g, q, k, v).unwrap();
    for row in g.value(out).data().chunks(2) {
        for c in 0..2 {
            let mean: f64 = (0..5).map(|i| vt.data()[i * 2 + c]).sum::<f64>() / 5.0;
            assert!((row[c] - mean).abs() < 1e-12);
        }
    }
}

#[test]
fn attention_matches_a_direct_reference() {
    let mut r = rng(10);
    let qt = random_tensor::<f32>(&[3, 4], &mut r);
    let kt = random_tensor::<f32>(&[3, 4], &mut r);
    let vt = random_tensor::<f32>(&[3, 4], &mut r);
    let mut g = Graph::<f32>::new();
    let (q, k, v) = (g.constant(qt.clone()), g.constant(kt.clone()), g.constant(vt.clone()));
    let (out, _) = attention(&mut g, q, k, v).unwrap();
    let at = |t: &Tensor<f32>, i: usize, j: usize| t.data()[i * 4 + j] as f64;
    for i in 0..3 {
        let scores: Vec<f64> = (0..3)
            .map(|j| (0..4).map(|c| at(&qt, i, c) * at(&kt, j, c)).sum::<f64>() / 2.0)
            .collect();
        let max = scores.iter().cloned().fold(f64::MIN, f64::max);
        let z: f64 = scores.iter().map(|s| (s - max).exp()).sum();
        for c in 0..4 {
            let want: f64 = (0..3).map(|j| (scores[j] - max).exp() / z * at(&vt, j, c)).sum();
            let got = g.value(out).data()[i * 4 + c] as f64;
            assert!((got - want).abs() < 1e-5, "{got} vs {want}");
        }
    }
}

#[test]
fn merge_output_depends_only_on_its_pair() {
    let model = Hqmt::new(ModelConfig { d_model: 8, n_blocks: 1, n_heads: 1, ..ModelConfig::default() }, 11).unwrap();
    let mut r = rng(11);
    let x = random_tensor::<f64>(&[1, 18, 8], &mut r);
    let run = |x: Tensor<f64>| {
        let mut g = Graph::<f64>::new();
        let p = model.bind(&mut g, false);
        let xv = g.constant(x);
        let y = qubit_merge(&mut g, &p, model.merge_layer(), xv).unwrap();
        g.value(y).clone()
    };
    let base = run(x.clone());
    assert_eq!(base.shape(), &[1, 9, 8]);
    // Perturb token 2 + 9: only merged token 2 moves.
    let mut y = x.clone();
    for c in 0..8 {
        y.data_mut()[11 * 8 + c] += 1.0;
    }
    let moved = run(y);
    for i in 0..9 {
        let changed = (0..8).any(|c| base.data()[i * 8 + c] != moved.data()[i * 8 + c]);
        assert_eq!(changed, i == 2, "token {i}");
    }
    let mut g = Graph::<f64>::new();
    let p = model.bind(&mut g, false);
    let odd = g.constant(Tensor::zeros(&[1, 7, 8]));
    assert!(qubit_merge(&mut g, &p, model.merge_layer(), odd).is_err());
}

#[test]
fn embedding_is_affine_in_the_patches() {
    let model = Hqmt::new(ModelConfig { d_model: 8, n_blocks: 1, n_heads: 1, ..ModelConfig::default() }, 12).unwrap();
    let (ez, ex) = model.embed();
    let mut r = rng(12);
    let a = random_tensor::<f64>(&[1, 9, 4], &mut r);
    let b = random_tensor::<f64>(&[1, 9, 4], &mut r);
    let run = |z: Tensor<f64>| {
        let mut g = Graph::<f64>::new();
        let p = model.bind(&mut g, false);
        let zv = g.constant(z);
        let xv = g.constant(Tensor::zeros(&[1, 9, 4]));
        let t = embed_tokens(&mut g, &p, ez, ex, zv, xv).unwrap();
        g.value(t).clone()
    };
    let zero = run(Tensor::zeros(&[1, 9, 4]));
    let (alpha, beta) = (0.7, -1.3);
    let mix = Tensor::from_fn(&[1, 9, 4], |i| alpha * a.data()[i] + beta * b.data()[i]);
    let (ya, yb, ym) = (run(a), run(b), run(mix));
    for i in 0..ym.numel() {
        // f(αa + βb) − f(0) = α(f(a) − f(0)) + β(f(b) − f(0))
        let lhs = ym.data()[i] - zero.data()[i];
        let rhs = alpha * (ya.data()[i] - zero.data()[i]) + beta * (yb.data()[i] - zero.data()[i]);
        assert!((lhs - rhs).abs() < 1e-12);
    }
}

#[test]
fn patch_rows_feed_the_embedding() {
    let layout = build_layout(3).unwrap();
    let model = Hqmt::new(tiny_config(), 0).unwrap();
    let s = Syndrome::from_index(0b1001_0110, 4);
    let (pz, px) = model.patch_tensors::<f32>(&layout, std::slice::from_ref(&s)).unwrap();
    let patches = build_patches(&layout, &s).unwrap();
    assert_eq!(pz.data(), patches.z_rows());
    assert_eq!(px.data(), patches.x_rows());
}
