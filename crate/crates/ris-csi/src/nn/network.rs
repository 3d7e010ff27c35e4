//! Checkpoints (spec + parameters), forward/backward orchestration and
//! weight initialization.

use crate::error::{Error, Result};
use crate::nn::layers::{
    bn_backward, bn_forward_infer, bn_forward_train, conv_backward, conv_forward, dense_backward,
    dense_forward, relu_backward, relu_forward, residual_subtract_backward,
    residual_subtract_forward, ConvDims, BN_MOMENTUM,
};
use crate::nn::real::Real;
use crate::nn::spec::{LayerSpec, NetworkSpec};
use crate::nn::tensor::Tensor;
use crate::numerics::RngStream;

/// Parameter block of one layer.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerParams<T> {
    /// `w[in][out]` row-major over the input index, bias per output.
    Dense { w: Vec<T>, b: Vec<T> },
    /// `w[kh][kw][cin][cout]`, bias per output channel.
    Conv { w: Vec<T>, b: Vec<T> },
    BatchNorm { gamma: Vec<T>, beta: Vec<T>, running_mean: Vec<T>, running_var: Vec<T> },
    Stateless,
}

impl<T: Real> LayerParams<T> {
    /// Learnable arrays in declaration order (running statistics excluded).
    pub fn learnable(&self) -> Vec<&[T]> {
        match self {
            LayerParams::Dense { w, b } | LayerParams::Conv { w, b } => vec![w, b],
            LayerParams::BatchNorm { gamma, beta, .. } => vec![gamma, beta],
            LayerParams::Stateless => vec![],
        }
    }

    pub fn learnable_mut(&mut self) -> Vec<&mut Vec<T>> {
        match self {
            LayerParams::Dense { w, b } | LayerParams::Conv { w, b } => vec![w, b],
            LayerParams::BatchNorm { gamma, beta, .. } => vec![gamma, beta],
            LayerParams::Stateless => vec![],
        }
    }
}

/// Gradient arrays mirroring the learnable structure of a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<Vec<Vec<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(ckpt: &Checkpoint<T>) -> Self {
        let layers = ckpt
            .params
            .iter()
            .map(|p| p.learnable().iter().map(|a| vec![T::zero(); a.len()]).collect())
            .collect();
        Self { layers }
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .flatten()
            .all(|arr| arr.iter().all(|v| v.is_finite()))
    }

    pub fn all_zero(&self) -> bool {
        self.layers
            .iter()
            .flatten()
            .all(|arr| arr.iter().all(|v| *v == T::zero()))
    }
}

enum LayerCache<T> {
    /// Input tensor of the layer (dense, conv, relu).
    Input(Tensor<T>),
    Bn { xhat: Tensor<T>, inv_std: Vec<f64> },
    None,
}

/// Activations recorded by a train-mode forward pass.
pub struct ForwardCache<T> {
    network_input: Tensor<T>,
    per_layer: Vec<LayerCache<T>>,
}

/// A network description bound to one set of parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub spec: NetworkSpec,
    pub params: Vec<LayerParams<T>>,
}

impl<T: Real> Checkpoint<T> {
    /// Initializes parameters: He-uniform for dense/conv layers that feed a
    /// ReLU, Glorot-uniform otherwise; BN starts as the identity transform.
    pub fn init(spec: NetworkSpec, stream: RngStream) -> Result<Self> {
        use rand::Rng;
        spec.output_shape()?;
        let mut params = Vec::with_capacity(spec.layers.len());
        for (idx, layer) in spec.layers.iter().enumerate() {
            let p = match layer {
                LayerSpec::Dense { inputs, outputs } => {
                    let limit = init_limit(*inputs, *outputs, feeds_relu(&spec.layers, idx));
                    let mut rng = stream.derive(7, idx as u16, 0).rng();
                    let w = (0..inputs * outputs)
                        .map(|_| T::from_f64(rng.gen_range(-limit..limit)))
                        .collect();
                    LayerParams::Dense { w, b: vec![T::zero(); *outputs] }
                }
                LayerSpec::ConvZp { kernel, in_channels, out_channels } => {
                    let fan_in = kernel.0 * kernel.1 * in_channels;
                    let fan_out = kernel.0 * kernel.1 * out_channels;
                    let limit = init_limit(fan_in, fan_out, feeds_relu(&spec.layers, idx));
                    let mut rng = stream.derive(7, idx as u16, 0).rng();
                    let w = (0..fan_in * out_channels)
                        .map(|_| T::from_f64(rng.gen_range(-limit..limit)))
                        .collect();
                    LayerParams::Conv { w, b: vec![T::zero(); *out_channels] }
                }
                LayerSpec::BatchNorm { features } => LayerParams::BatchNorm {
                    gamma: vec![T::one(); *features],
                    beta: vec![T::zero(); *features],
                    running_mean: vec![T::zero(); *features],
                    running_var: vec![T::one(); *features],
                },
                LayerSpec::Relu | LayerSpec::ResidualSubtractInput => LayerParams::Stateless,
            };
            params.push(p);
        }
        Ok(Self { spec, params })
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<()> {
        if input.sample_shape() != self.spec.input_shape.as_slice() {
            return Err(Error::Shape(format!(
                "network expects input {:?}, got {:?}",
                self.spec.input_shape,
                input.sample_shape()
            )));
        }
        Ok(())
    }

    /// Inference-mode forward pass: pure function of (checkpoint, input);
    /// BN layers use running statistics.
    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(input)?;
        let mut act = input.clone();
        for (layer, params) in self.spec.layers.iter().zip(&self.params) {
            act = match (layer, params) {
                (LayerSpec::Dense { outputs, .. }, LayerParams::Dense { w, b }) => {
                    dense_forward(w, b, &act, *outputs)
                }
                (LayerSpec::ConvZp { kernel, in_channels, out_channels }, LayerParams::Conv { w, b }) => {
                    let dims = conv_dims(&act, *kernel, *in_channels, *out_channels);
                    conv_forward(w, b, &act, &dims)
                }
                (
                    LayerSpec::BatchNorm { .. },
                    LayerParams::BatchNorm { gamma, beta, running_mean, running_var },
                ) => bn_forward_infer(gamma, beta, running_mean, running_var, &act),
                (LayerSpec::Relu, _) => relu_forward(&act),
                (LayerSpec::ResidualSubtractInput, _) => residual_subtract_forward(input, &act),
                _ => return Err(Error::State("checkpoint params do not match spec".into())),
            };
        }
        if !act.all_finite() {
            return Err(Error::Numeric("non-finite activation in forward pass".into()));
        }
        Ok(act)
    }

    /// Train-mode forward pass: BN layers normalize with batch statistics
    /// and (when `update_running`) fold them into the running estimates.
    /// Returns the output and the cache `backward` needs.
    pub fn forward_train(
        &mut self,
        input: &Tensor<T>,
        update_running: bool,
    ) -> Result<(Tensor<T>, ForwardCache<T>)> {
        self.check_input(input)?;
        let mut act = input.clone();
        let mut per_layer = Vec::with_capacity(self.spec.layers.len());
        for (layer, params) in self.spec.layers.iter().zip(self.params.iter_mut()) {
            let (next, cache) = match (layer, &mut *params) {
                (LayerSpec::Dense { outputs, .. }, LayerParams::Dense { w, b }) => {
                    let out = dense_forward(w, b, &act, *outputs);
                    (out, LayerCache::Input(act))
                }
                (LayerSpec::ConvZp { kernel, in_channels, out_channels }, LayerParams::Conv { w, b }) => {
                    let dims = conv_dims(&act, *kernel, *in_channels, *out_channels);
                    let out = conv_forward(w, b, &act, &dims);
                    (out, LayerCache::Input(act))
                }
                (
                    LayerSpec::BatchNorm { .. },
                    LayerParams::BatchNorm { gamma, beta, running_mean, running_var },
                ) => {
                    let bn = bn_forward_train(gamma, beta, &act);
                    if update_running {
                        for k in 0..running_mean.len() {
                            let rm = BN_MOMENTUM * running_mean[k].into_f64()
                                + (1.0 - BN_MOMENTUM) * bn.batch_mean[k];
                            let rv = BN_MOMENTUM * running_var[k].into_f64()
                                + (1.0 - BN_MOMENTUM) * bn.batch_var[k];
                            running_mean[k] = T::from_f64(rm);
                            running_var[k] = T::from_f64(rv);
                        }
                    }
                    (bn.output, LayerCache::Bn { xhat: bn.xhat, inv_std: bn.inv_std })
                }
                (LayerSpec::Relu, _) => {
                    let out = relu_forward(&act);
                    (out, LayerCache::Input(act))
                }
                (LayerSpec::ResidualSubtractInput, _) => {
                    let out = residual_subtract_forward(input, &act);
                    (out, LayerCache::None)
                }
                _ => return Err(Error::State("checkpoint params do not match spec".into())),
            };
            per_layer.push(cache);
            act = next;
        }
        if !act.all_finite() {
            return Err(Error::Numeric("non-finite activation in forward pass".into()));
        }
        Ok((act, ForwardCache { network_input: input.clone(), per_layer }))
    }

    /// Reverse-mode gradients of every learnable parameter given the loss
    /// gradient w.r.t. the network output.
    pub fn backward(&self, cache: &ForwardCache<T>, out_grad: &Tensor<T>) -> Result<Gradients<T>> {
        if cache.per_layer.len() != self.spec.layers.len() {
            return Err(Error::State(
                "forward cache does not match this checkpoint's layer count".into(),
            ));
        }
        let mut grads = Gradients::zeros_like(self);
        let mut g = out_grad.clone();
        for idx in (0..self.spec.layers.len()).rev() {
            let layer = &self.spec.layers[idx];
            let params = &self.params[idx];
            let lcache = &cache.per_layer[idx];
            g = match (layer, params, lcache) {
                (
                    LayerSpec::Dense { inputs, outputs },
                    LayerParams::Dense { w, .. },
                    LayerCache::Input(x),
                ) => {
                    let (gx, dw, db) = dense_backward(w, x, &g, *inputs, *outputs);
                    grads.layers[idx] = vec![dw, db];
                    gx
                }
                (
                    LayerSpec::ConvZp { kernel, in_channels, out_channels },
                    LayerParams::Conv { w, .. },
                    LayerCache::Input(x),
                ) => {
                    let dims = conv_dims(x, *kernel, *in_channels, *out_channels);
                    let (gx, dw, db) = conv_backward(w, x, &g, &dims);
                    grads.layers[idx] = vec![dw, db];
                    gx
                }
                (
                    LayerSpec::BatchNorm { .. },
                    LayerParams::BatchNorm { gamma, .. },
                    LayerCache::Bn { xhat, inv_std },
                ) => {
                    let (gx, dgamma, dbeta) = bn_backward(gamma, xhat, inv_std, &g);
                    grads.layers[idx] = vec![dgamma, dbeta];
                    gx
                }
                (LayerSpec::Relu, _, LayerCache::Input(x)) => relu_backward(x, &g),
                (LayerSpec::ResidualSubtractInput, _, LayerCache::None) => {
                    residual_subtract_backward(&g)
                }
                _ => {
                    return Err(Error::State(format!(
                        "cache entry for layer {idx} does not match its kind"
                    )))
                }
            };
        }
        let _ = &cache.network_input;
        Ok(grads)
    }
}

fn conv_dims<T: Real>(
    input: &Tensor<T>,
    kernel: (usize, usize),
    cin: usize,
    cout: usize,
) -> ConvDims {
    let s = input.sample_shape();
    ConvDims { kh: kernel.0, kw: kernel.1, cin, cout, h: s[0], w: s[1] }
}

fn init_limit(fan_in: usize, fan_out: usize, relu_next: bool) -> f64 {
    if relu_next {
        (6.0 / fan_in as f64).sqrt()
    } else {
        (6.0 / (fan_in + fan_out) as f64).sqrt()
    }
}

/// Does a ReLU follow this layer before the next weighted layer?
fn feeds_relu(layers: &[LayerSpec], idx: usize) -> bool {
    for layer in &layers[idx + 1..] {
        match layer {
            LayerSpec::Relu => return true,
            LayerSpec::BatchNorm { .. } => continue,
            _ => return false,
        }
    }
    false
}
