//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use hqmt_core::model::{Hqmt, ModelConfig};
use hqmt_core::stabilizer::{build_layout, Syndrome};
use hqmt_core::tensor::{Graph, Scalar, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor<T: Scalar>(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<T> {
    Tensor::from_fn(shape, |_| T::lit(rng.random_range(-1.0..1.0)))
}

/// Random values bounded away from zero, for kinked activations.
pub fn random_tensor_off_zero<T: Scalar>(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<T> {
    Tensor::from_fn(shape, |_| {
        let mag = rng.random_range(0.1..1.0);
        T::lit(if rng.random::<bool>() { mag } else { -mag })
    })
}

/// `Σ out ⊙ R` for a fixed pseudo-random `R`, so every output entry carries
/// a distinct weight into the scalar loss.
pub fn project<T: Scalar>(g: &mut Graph<T>, out: Var, seed: u64) -> Var {
    let mut r = rng(seed ^ 0x9e37_79b9);
    let w = random_tensor::<T>(g.shape(out), &mut r);
    let w = g.constant(w);
    let prod = g.mul(out, w).unwrap();
    g.sum(prod)
}

/// Normwise relative error `‖a − n‖ / max(‖a‖, ‖n‖, 1e-12)` between the
/// analytic gradient of `loss(inputs)` and central differences with step
/// `eps`.
pub fn grad_check<T: Scalar>(
    inputs: &[Tensor<T>],
    eps: f64,
    loss: impl Fn(&mut Graph<T>, &[Var]) -> Var,
) -> f64 {
    let mut g = Graph::<T>::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let l = loss(&mut g, &vars);
    g.backward(l).unwrap();
    let analytic: Vec<f64> = vars
        .iter()
        .zip(inputs)
        .flat_map(|(&v, t)| match g.grad(v) {
            Some(gr) => gr.iter().map(|&x| Scalar::to_f64(x)).collect::<Vec<_>>(),
            None => vec![0.0; t.numel()],
        })
        .collect();

    let eval = |ins: &[Tensor<T>]| -> f64 {
        let mut g = Graph::<T>::new();
        let vars: Vec<Var> = ins.iter().map(|t| g.constant(t.clone())).collect();
        let l = loss(&mut g, &vars);
        Scalar::to_f64(g.value(l).item())
    };
    let mut numeric = Vec::with_capacity(analytic.len());
    let mut work = inputs.to_vec();
    for i in 0..inputs.len() {
        for j in 0..inputs[i].numel() {
            let orig = work[i].data()[j];
            work[i].data_mut()[j] = orig + T::lit(eps);
            let up = eval(&work);
            work[i].data_mut()[j] = orig - T::lit(eps);
            let down = eval(&work);
            work[i].data_mut()[j] = orig;
            numeric.push((up - down) / (2.0 * eps));
        }
    }
    let diff: f64 = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let na: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nn: f64 = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
    diff / na.max(nn).max(1e-12)
}

/// Central-difference errors of every autodiff primitive, each on three
/// input shapes.
pub fn primitive_grad_errors<T: Scalar>(eps: f64, seed: u64) -> Vec<(String, f64)> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    let mut push = |name: String, err: f64| out.push((name, err));

    for (a, b) in [(vec![2, 3], vec![3, 4]), (vec![2, 3, 4], vec![4, 2]), (vec![2, 2, 3], vec![2, 3, 5])] {
        let ins = vec![random_tensor::<T>(&a, &mut r), random_tensor::<T>(&b, &mut r)];
        let e = grad_check(&ins, eps, |g, v| {
            let y = g.matmul(v[0], v[1]).unwrap();
            project(g, y, 1)
        });
        push(format!("matmul {a:?}x{b:?}"), e);
    }
    for (a, b) in [(vec![3, 4], vec![3, 4]), (vec![2, 3, 4], vec![4]), (vec![2, 3, 4], vec![3, 4])] {
        let ins = vec![random_tensor::<T>(&a, &mut r), random_tensor::<T>(&b, &mut r)];
        let e = grad_check(&ins, eps, |g, v| {
            let y = g.add(v[0], v[1]).unwrap();
            project(g, y, 2)
        });
        push(format!("add {a:?}+{b:?}"), e);
        let e = grad_check(&ins, eps, |g, v| {
            let y = g.mul(v[0], v[1]).unwrap();
            project(g, y, 3)
        });
        push(format!("mul {a:?}*{b:?}"), e);
    }
    let unary_shapes = [vec![5], vec![3, 4], vec![2, 3, 4]];
    for sh in &unary_shapes {
        let ins = vec![random_tensor::<T>(sh, &mut r)];
        let e = grad_check(&ins, eps, |g, v| {
            let y = g.scale(v[0], -1.7);
            project(g, y, 4)
        });
        push(format!("scale {sh:?}"), e);
        let e = grad_check(&ins, eps, |g, v| {
            let y = g.softmax(v[0]);
            project(g, y, 5)
        });
        push(format!("softmax {sh:?}"), e);
        let e = grad_check(&ins, eps, |g, v| {
            let y = g.layer_norm(v[0]);
            project(g, y, 6)
        });
        push(format!("layer_norm {sh:?}"), e);
        let e = grad_check(&ins, eps, |g, v| {
            let y = g.gelu(v[0]);
            project(g, y, 7)
        });
        push(format!("gelu {sh:?}"), e);
        let e = grad_check(&ins, eps, |g, v| project(g, v[0], 8)).max(0.0);
        let e2 = grad_check(&ins, eps, |g, v| g.sum(v[0]));
        push(format!("sum {sh:?}"), e.max(e2));
        let off = vec![random_tensor_off_zero::<T>(sh, &mut r)];
        let e = grad_check(&off, eps, |g, v| {
            let y = g.relu(v[0]);
            project(g, y, 9)
        });
        push(format!("relu {sh:?}"), e);
    }
    for sh in [vec![3, 4], vec![2, 3, 4], vec![2, 2, 3, 2]] {
        let ins = vec![random_tensor::<T>(&sh, &mut r)];
        let e = grad_check(&ins, eps, |g, v| {
            let y = g.transpose(v[0]).unwrap();
            project(g, y, 10)
        });
        push(format!("transpose {sh:?}"), e);
        let axis = sh.len() - 2;
        let e = grad_check(&ins, eps, |g, v| {
            let y = g.mean(v[0], axis).unwrap();
            project(g, y, 11)
        });
        push(format!("mean axis {axis} {sh:?}"), e);
        let e = grad_check(&ins, eps, |g, v| {
            let rows = g.shape(v[0])[g.shape(v[0]).len() - 2];
            let idx: Vec<usize> = (0..rows).rev().chain([0, rows - 1]).collect();
            let y = g.gather_rows(v[0], &idx).unwrap();
            project(g, y, 12)
        });
        push(format!("gather_rows {sh:?}"), e);
    }
    for (a, b) in [(vec![2, 3], vec![2, 2]), (vec![2, 3, 1], vec![2, 3, 4]), (vec![3, 2, 2], vec![3, 2, 3])] {
        let ins = vec![random_tensor::<T>(&a, &mut r), random_tensor::<T>(&b, &mut r)];
        let e = grad_check(&ins, eps, |g, v| {
            let y = g.concat_last(&[v[0], v[1]]).unwrap();
            let w = *g.shape(y).last().unwrap();
            let parts = g.split_last(y, &[1, w - 1]).unwrap();
            let s = g.slice(parts[1], g.shape(parts[1]).len() - 1, 0, w - 2).unwrap();
            let a = project(g, parts[0], 13);
            let b = project(g, s, 14);
            g.add(a, b).unwrap()
        });
        push(format!("concat/split/slice last {a:?},{b:?}"), e);
    }
    for (a, b) in [(vec![2, 3], vec![1, 3]), (vec![2, 3, 4], vec![2, 1, 4]), (vec![1, 2, 2], vec![1, 3, 2])] {
        let ins = vec![random_tensor::<T>(&a, &mut r), random_tensor::<T>(&b, &mut r)];
        let axis = a.len() - 2;
        let e = grad_check(&ins, eps, |g, v| {
            let y = g.concat(&[v[0], v[1]], axis).unwrap();
            let n = g.shape(y)[axis];
            let parts = g.split(y, axis, &[1, n - 1]).unwrap();
            let a = project(g, parts[0], 15);
            let b = project(g, parts[1], 16);
            g.add(a, b).unwrap()
        });
        push(format!("concat/split axis {axis} {a:?},{b:?}"), e);
    }
    for (b, c) in [(1, 4), (3, 4), (5, 2)] {
        let ins = vec![random_tensor::<T>(&[b, c], &mut r)];
        let weights: Vec<T> = (0..b * c).map(|i| T::lit(((i * 7) % 3) as f64)).collect();
        let e = grad_check(&ins, eps, |g, v| {
            g.softmax_cross_entropy(v[0], weights.clone(), 2.5).unwrap()
        });
        push(format!("softmax_cross_entropy [{b}, {c}]"), e);
    }
    out
}

pub fn tiny_config() -> ModelConfig {
    ModelConfig {
        distance: 3,
        d_model: 8,
        n_blocks: 1,
        n_heads: 1,
        ffn_mult: 4,
        ..ModelConfig::default()
    }
}

/// Gradient error of the full model's cross-entropy loss with respect to
/// every parameter, on four fixed syndromes.
pub fn end_to_end_grad_error<T: Scalar>(cfg: ModelConfig, eps: f64, seed: u64) -> f64 {
    let layout = build_layout(cfg.distance).unwrap();
    let mut model = Hqmt::new(cfg, seed).unwrap();
    // Larger weights than the 0.02 init keep the loss surface non-trivial.
    let mut r = rng(seed);
    let ids: Vec<_> = model.params().ids().collect();
    for id in ids {
        for x in model.params_mut().get_mut(id).data_mut() {
            *x += r.random_range(-0.3..0.3);
        }
    }
    let m = layout.num_checks();
    let syndromes: Vec<Syndrome> = [0u64, 0b1001_0010, 0b0110_0001, 0xff]
        .iter()
        .map(|&i| Syndrome::from_index(i, m))
        .collect();
    let (pz, px) = model.patch_tensors::<T>(&layout, &syndromes).unwrap();
    let params: Vec<Tensor<T>> = model.params().values().iter().map(|t| t.cast::<T>()).collect();
    let labels = [0usize, 1, 2, 3];
    grad_check(&params, eps, |g, p| {
        let z = g.constant(pz.clone());
        let x = g.constant(px.clone());
        let trace = model.forward_graph(g, p, z, x).unwrap();
        let mut w = vec![T::zero(); 16];
        for (b, &l) in labels.iter().enumerate() {
            w[b * 4 + l] = T::one();
        }
        g.softmax_cross_entropy(trace.logits, w, 4.0).unwrap()
    })
}

/// Fraction of `samples` the best syndrome-to-class lookup gets right.
pub fn achievable_accuracy(samples: &[hqmt_core::noise::Sample]) -> f64 {
    let mut counts: std::collections::HashMap<Vec<u64>, [usize; 4]> = Default::default();
    for s in samples {
        counts.entry(s.syndrome.concat().words().to_vec()).or_default()[s.label.index()] += 1;
    }
    let best: usize = counts.values().map(|c| *c.iter().max().unwrap()).sum();
    best as f64 / samples.len() as f64
}

/// Fraction of `samples` whose label is the most common label.
pub fn majority_accuracy(samples: &[hqmt_core::noise::Sample]) -> f64 {
    let mut c = [0usize; 4];
    for s in samples {
        c[s.label.index()] += 1;
    }
    *c.iter().max().unwrap() as f64 / samples.len() as f64
}

/// Accuracy of `model` on `samples`.
pub fn accuracy(model: &Hqmt, samples: &[hqmt_core::noise::Sample]) -> f64 {
    let layout = build_layout(model.config().distance).unwrap();
    let syndromes: Vec<Syndrome> = samples.iter().map(|s| s.syndrome.clone()).collect();
    let pred = model.predict_batch(&layout, &syndromes, 512).unwrap();
    pred.iter().zip(samples).filter(|(p, s)| **p == s.label).count() as f64 / samples.len() as f64
}
