mod common;

use common::{end_to_end_grad_error, primitive_grad_errors, random_tensor, rng, tiny_config};
use hqmt_core::tensor::{Graph, Tensor};

#[test]
fn every_primitive_passes_f64_gradient_check() {
    for (name, err) in primitive_grad_errors::<f64>(1e-6, 11) {
        assert!(err < 1e-5, "{name}: relative error {err:e}");
    }
}

#[test]
fn every_primitive_passes_f32_gradient_check() {
    for (name, err) in primitive_grad_errors::<f32>(1e-2, 12) {
        assert!(err < 1e-2, "{name}: relative error {err:e}");
    }
}

#[test]
fn full_model_loss_passes_f64_gradient_check() {
    let err = end_to_end_grad_error::<f64>(tiny_config(), 1e-6, 5);
    assert!(err < 1e-5, "relative error {err:e}");
}

#[test]
fn softmax_rows_sum_to_one() {
    let mut r = rng(1);
    for shape in [vec![7], vec![4, 9], vec![2, 3, 5]] {
        let mut g = Graph::<f32>::new();
        let mut t = random_tensor::<f32>(&shape, &mut r);
        // Large logits must not overflow.
        t.data_mut()[0] = 80.0;
        let x = g.constant(t);
        let y = g.softmax(x);
        for row in g.value(y).data().chunks(*shape.last().unwrap()) {
            let s: f64 = row.iter().map(|&v| v as f64).sum();
            assert!((s - 1.0).abs() <= 1e-6, "row sum {s}");
            assert!(row.iter().all(|&v| v >= 0.0));
        }
    }
}

#[test]
fn layer_norm_output_is_standardized() {
    let mut r = rng(2);
    let mut g = Graph::<f32>::new();
    let mut t = random_tensor::<f32>(&[6, 32], &mut r);
    for x in t.data_mut() {
        *x = *x * 5.0 + 3.0;
    }
    let x = g.constant(t);
    let y = g.layer_norm(x);
    for row in g.value(y).data().chunks(32) {
        let mean: f64 = row.iter().map(|&v| v as f64).sum::<f64>() / 32.0;
        let var: f64 = row.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / 32.0;
        assert!(mean.abs() < 1e-5, "mean {mean}");
        assert!((var - 1.0).abs() < 1e-4, "variance {var}");
    }
}

#[test]
fn second_backward_doubles_gradients() {
    let mut r = rng(3);
    let mut g = Graph::<f64>::new();
    let a = g.param(random_tensor(&[3, 4], &mut r));
    let b = g.param(random_tensor(&[4, 2], &mut r));
    let y = g.matmul(a, b).unwrap();
    let y = g.gelu(y);
    let l = g.sum(y);
    g.backward(l).unwrap();
    let first: Vec<f64> = g.grad(a).unwrap().to_vec();
    g.backward(l).unwrap();
    for (x, y) in g.grad(a).unwrap().iter().zip(&first) {
        assert!((x - 2.0 * y).abs() < 1e-12);
    }
    g.zero_grad();
    g.backward(l).unwrap();
    assert_eq!(g.grad(a).unwrap(), first.as_slice());
}

#[test]
fn backward_rejects_non_scalar_output() {
    let mut g = Graph::<f32>::new();
    let a = g.param(Tensor::full(&[2, 2], 1.0));
    let y = g.scale(a, 2.0);
    assert!(g.backward(y).is_err());
}

#[test]
fn constants_receive_no_gradient() {
    let mut g = Graph::<f32>::new();
    let a = g.constant(Tensor::full(&[3], 2.0));
    let b = g.param(Tensor::full(&[3], 1.0));
    let y = g.mul(a, b).unwrap();
    let l = g.sum(y);
    g.backward(l).unwrap();
    assert!(g.grad(a).is_none());
    assert_eq!(g.grad(b).unwrap(), &[2.0, 2.0, 2.0]);
}

#[test]
fn shape_mismatches_are_errors() {
    let mut g = Graph::<f32>::new();
    let a = g.constant(Tensor::zeros(&[2, 3]));
    let b = g.constant(Tensor::zeros(&[2, 3]));
    assert!(g.matmul(a, b).is_err());
    let c = g.constant(Tensor::zeros(&[4]));
    assert!(g.add(a, c).is_err());
    assert!(g.mean(a, 5).is_err());
    assert!(g.gather_rows(a, &[2]).is_err());
}
