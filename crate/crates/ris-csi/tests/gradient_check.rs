//! Finite-difference verification of every layer kind and of the three
//! stage architectures.
//!
//! The oracle is a central difference of the MSE loss in `f64` (step 1e-5);
//! analytic gradients must agree to a relative error below 1e-3. Running
//! statistics are frozen during probing so repeated forwards are pure.

use ris_csi::nn::{
    are_dnn_spec, de_dnn_spec, irp_dnn_spec, mse_loss, mse_loss_grad, zero_branch_residual_spec,
    ActivationOrder, Checkpoint, LayerSpec, NetworkSpec, Tensor,
};
use ris_csi::numerics::RngStream;

const FD_STEP: f64 = 1e-5;
const REL_TOL: f64 = 1e-3;

fn fill(stream: RngStream, n: usize, scale: f64) -> Vec<f64> {
    use rand::Rng;
    let mut rng = stream.rng();
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

fn loss_of(ckpt: &mut Checkpoint<f64>, x: &Tensor<f64>, y: &Tensor<f64>) -> f64 {
    let (out, _) = ckpt.forward_train(x, false).unwrap();
    mse_loss(&out, y).unwrap()
}

/// Checks analytic vs central-difference gradients on a deterministic
/// subset of parameters (at most `max_checks` per array).
fn check_gradients(spec: NetworkSpec, seed: u64, batch: usize, max_checks: usize) {
    let in_len: usize = spec.input_shape.iter().product();
    let mut sample_shape = vec![batch];
    sample_shape.extend_from_slice(&spec.input_shape);
    let mut ckpt: Checkpoint<f64> = Checkpoint::init(spec, RngStream::new(seed, 0)).unwrap();
    let x = Tensor::new(
        sample_shape.clone(),
        fill(RngStream::new(seed, 1), batch * in_len, 1.0),
    )
    .unwrap();
    let out_shape = {
        let (out, _) = ckpt.forward_train(&x, false).unwrap();
        out.shape().to_vec()
    };
    let y = Tensor::new(
        out_shape.clone(),
        fill(RngStream::new(seed, 2), out_shape.iter().product(), 1.0),
    )
    .unwrap();

    let (out, cache) = ckpt.forward_train(&x, false).unwrap();
    let (_, gout) = mse_loss_grad(&out, &y).unwrap();
    let grads = ckpt.backward(&cache, &gout).unwrap();

    let n_layers = ckpt.spec.layers.len();
    let mut checked = 0usize;
    for layer in 0..n_layers {
        let n_arrays = grads.layers[layer].len();
        for array in 0..n_arrays {
            let len = grads.layers[layer][array].len();
            if len == 0 {
                continue;
            }
            let stride = (len / max_checks).max(1);
            for idx in (0..len).step_by(stride) {
                let analytic = grads.layers[layer][array][idx];
                let orig = ckpt.params[layer].learnable_mut()[array][idx];
                ckpt.params[layer].learnable_mut()[array][idx] = orig + FD_STEP;
                let lp = loss_of(&mut ckpt, &x, &y);
                ckpt.params[layer].learnable_mut()[array][idx] = orig - FD_STEP;
                let lm = loss_of(&mut ckpt, &x, &y);
                ckpt.params[layer].learnable_mut()[array][idx] = orig;
                let numeric = (lp - lm) / (2.0 * FD_STEP);
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
                assert!(
                    rel < REL_TOL,
                    "layer {layer} array {array} index {idx}: analytic {analytic}, \
                     numeric {numeric}, rel {rel}"
                );
                checked += 1;
            }
        }
    }
    assert!(checked > 0, "no parameters were checked");
}

#[test]
fn dense_layer_gradients() {
    let spec = NetworkSpec::new(
        vec![LayerSpec::Dense { inputs: 5, outputs: 4 }],
        vec![5],
    )
    .unwrap();
    check_gradients(spec, 101, 3, usize::MAX);
}

#[test]
fn dense_gradient_closed_form_single_sample() {
    // One sample, one dense layer: dL/dW[i][o] = 2 (ŷ - y)[o] * x[i].
    let spec = NetworkSpec::new(
        vec![LayerSpec::Dense { inputs: 3, outputs: 2 }],
        vec![3],
    )
    .unwrap();
    let mut ckpt: Checkpoint<f64> = Checkpoint::init(spec, RngStream::new(102, 0)).unwrap();
    let x = Tensor::new(vec![1, 3], vec![0.4, -1.2, 2.0]).unwrap();
    let y = Tensor::new(vec![1, 2], vec![0.3, -0.7]).unwrap();
    let (out, cache) = ckpt.forward_train(&x, false).unwrap();
    let (_, gout) = mse_loss_grad(&out, &y).unwrap();
    let grads = ckpt.backward(&cache, &gout).unwrap();
    for i in 0..3 {
        for o in 0..2 {
            let expect = 2.0 * (out.data()[o] - y.data()[o]) * x.data()[i];
            let got = grads.layers[0][0][i * 2 + o];
            assert!((got - expect).abs() < 1e-12, "dW[{i}][{o}]: {got} vs {expect}");
        }
    }
    for o in 0..2 {
        let expect = 2.0 * (out.data()[o] - y.data()[o]);
        assert!((grads.layers[0][1][o] - expect).abs() < 1e-12);
    }
}

#[test]
fn conv_layer_gradients() {
    let spec = NetworkSpec::new(
        vec![LayerSpec::ConvZp { kernel: (3, 3), in_channels: 2, out_channels: 3 }],
        vec![3, 4, 2],
    )
    .unwrap();
    check_gradients(spec, 103, 2, usize::MAX);
}

#[test]
fn batchnorm_layer_gradients() {
    let spec = NetworkSpec::new(
        vec![LayerSpec::BatchNorm { features: 4 }],
        vec![4],
    )
    .unwrap();
    check_gradients(spec, 104, 6, usize::MAX);
}

#[test]
fn relu_composition_gradients() {
    let spec = NetworkSpec::new(
        vec![
            LayerSpec::Dense { inputs: 4, outputs: 6 },
            LayerSpec::Relu,
            LayerSpec::Dense { inputs: 6, outputs: 3 },
        ],
        vec![4],
    )
    .unwrap();
    check_gradients(spec, 105, 4, usize::MAX);
}

#[test]
fn residual_subtract_gradients() {
    check_gradients(zero_branch_residual_spec(3, 3, 2), 106, 2, usize::MAX);
}

#[test]
fn de_dnn_gradients() {
    check_gradients(de_dnn_spec(2, ActivationOrder::NormThenRelu), 107, 4, 40);
}

#[test]
fn are_dnn_gradients() {
    check_gradients(are_dnn_spec(3, 3, ActivationOrder::NormThenRelu), 108, 2, 12);
}

#[test]
fn irp_dnn_gradients() {
    check_gradients(irp_dnn_spec(3, 2, ActivationOrder::NormThenRelu), 109, 4, 30);
}

#[test]
fn alternative_activation_order_gradients() {
    check_gradients(de_dnn_spec(2, ActivationOrder::ReluThenNorm), 110, 4, 40);
    check_gradients(are_dnn_spec(2, 3, ActivationOrder::ReluThenNorm), 111, 2, 10);
}
