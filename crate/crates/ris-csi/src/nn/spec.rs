//! Layer-by-layer network descriptions and the three stage architectures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One layer of a network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerSpec {
    Dense { inputs: usize, outputs: usize },
    /// Zero-padded (same-size) convolution, stride 1, odd kernel sides.
    ConvZp { kernel: (usize, usize), in_channels: usize, out_channels: usize },
    /// Per-feature (dense) / per-channel (conv) batch normalization.
    BatchNorm { features: usize },
    Relu,
    /// Emits `network_input - current_activation`; the denoising head.
    ResidualSubtractInput,
}

/// Where batch normalization sits relative to the activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ActivationOrder {
    /// conv/dense → BN → ReLU (the default).
    #[default]
    NormThenRelu,
    /// conv/dense → ReLU → BN (the alternative reading of the paper's wording).
    ReluThenNorm,
}

/// Ordered layer list plus the per-sample input shape.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub layers: Vec<LayerSpec>,
    pub input_shape: Vec<usize>,
}

impl NetworkSpec {
    pub fn new(layers: Vec<LayerSpec>, input_shape: Vec<usize>) -> Result<Self> {
        let spec = Self { layers, input_shape };
        spec.output_shape()?;
        Ok(spec)
    }

    /// Walks the shape chain, failing on any inconsistency.
    pub fn output_shape(&self) -> Result<Vec<usize>> {
        let mut shape = self.input_shape.clone();
        for (idx, layer) in self.layers.iter().enumerate() {
            shape = layer_output_shape(layer, &shape, &self.input_shape).map_err(|e| {
                Error::Shape(format!("layer {idx} ({layer:?}): {e}"))
            })?;
        }
        Ok(shape)
    }
}

fn layer_output_shape(
    layer: &LayerSpec,
    shape: &[usize],
    input_shape: &[usize],
) -> std::result::Result<Vec<usize>, String> {
    match layer {
        LayerSpec::Dense { inputs, outputs } => {
            if shape != [*inputs] {
                return Err(format!("expects [{inputs}], got {shape:?}"));
            }
            if *outputs == 0 {
                return Err("zero output width".into());
            }
            Ok(vec![*outputs])
        }
        LayerSpec::ConvZp { kernel, in_channels, out_channels } => {
            if kernel.0 % 2 == 0 || kernel.1 % 2 == 0 || kernel.0 == 0 || kernel.1 == 0 {
                return Err(format!("kernel sides must be odd, got {kernel:?}"));
            }
            match shape {
                [h, w, c] if c == in_channels => Ok(vec![*h, *w, *out_channels]),
                _ => Err(format!("expects [H, W, {in_channels}], got {shape:?}")),
            }
        }
        LayerSpec::BatchNorm { features } => {
            if shape.last() != Some(features) {
                return Err(format!("expects trailing dim {features}, got {shape:?}"));
            }
            Ok(shape.to_vec())
        }
        LayerSpec::Relu => Ok(shape.to_vec()),
        LayerSpec::ResidualSubtractInput => {
            if shape != input_shape {
                return Err(format!(
                    "branch shape {shape:?} must match network input {input_shape:?}"
                ));
            }
            Ok(shape.to_vec())
        }
    }
}

fn dense_block(spec: &mut Vec<LayerSpec>, inputs: usize, outputs: usize, order: ActivationOrder) {
    spec.push(LayerSpec::Dense { inputs, outputs });
    match order {
        ActivationOrder::NormThenRelu => {
            spec.push(LayerSpec::BatchNorm { features: outputs });
            spec.push(LayerSpec::Relu);
        }
        ActivationOrder::ReluThenNorm => {
            spec.push(LayerSpec::Relu);
            spec.push(LayerSpec::BatchNorm { features: outputs });
        }
    }
}

/// Direct-channel refiner: dense 2M → 64 → 128 → 64 → 2M, hidden layers
/// with BN + ReLU, linear output.
pub fn de_dnn_spec(m: usize, order: ActivationOrder) -> NetworkSpec {
    let io = 2 * m;
    let mut layers = Vec::new();
    dense_block(&mut layers, io, 64, order);
    dense_block(&mut layers, 64, 128, order);
    dense_block(&mut layers, 128, 64, order);
    layers.push(LayerSpec::Dense { inputs: 64, outputs: io });
    NetworkSpec::new(layers, vec![io]).expect("builder shapes always chain")
}

/// Active-cascade denoiser: eight zero-padded 3x3 conv layers (seven of 64
/// channels with BN + ReLU, one linear 2-channel output) whose result is
/// subtracted from the input.
pub fn are_dnn_spec(m: usize, n1: usize, order: ActivationOrder) -> NetworkSpec {
    let mut layers = Vec::new();
    let mut push_block = |cin: usize| {
        layers.push(LayerSpec::ConvZp { kernel: (3, 3), in_channels: cin, out_channels: 64 });
        match order {
            ActivationOrder::NormThenRelu => {
                layers.push(LayerSpec::BatchNorm { features: 64 });
                layers.push(LayerSpec::Relu);
            }
            ActivationOrder::ReluThenNorm => {
                layers.push(LayerSpec::Relu);
                layers.push(LayerSpec::BatchNorm { features: 64 });
            }
        }
    };
    push_block(2);
    for _ in 0..6 {
        push_block(64);
    }
    layers.push(LayerSpec::ConvZp { kernel: (3, 3), in_channels: 64, out_channels: 2 });
    layers.push(LayerSpec::ResidualSubtractInput);
    NetworkSpec::new(layers, vec![m, n1, 2]).expect("builder shapes always chain")
}

/// Inactive-column predictor: dense 2N1 → 128 → 256 → 256 → 2N2, hidden
/// layers with BN + ReLU, linear output.
pub fn irp_dnn_spec(n1: usize, n2: usize, order: ActivationOrder) -> NetworkSpec {
    let mut layers = Vec::new();
    dense_block(&mut layers, 2 * n1, 128, order);
    dense_block(&mut layers, 128, 256, order);
    dense_block(&mut layers, 256, 256, order);
    layers.push(LayerSpec::Dense { inputs: 256, outputs: 2 * n2 });
    NetworkSpec::new(layers, vec![2 * n1]).expect("builder shapes always chain")
}

/// Single dense layer sized for an exact identity configuration (test stub).
pub fn identity_dense_spec(width: usize) -> NetworkSpec {
    NetworkSpec::new(
        vec![LayerSpec::Dense { inputs: width, outputs: width }],
        vec![width],
    )
    .expect("square dense layer always chains")
}

/// Minimal residual net whose branch can be zeroed: conv (cin → cin) then
/// subtract from input (test stub).
pub fn zero_branch_residual_spec(h: usize, w: usize, channels: usize) -> NetworkSpec {
    NetworkSpec::new(
        vec![
            LayerSpec::ConvZp { kernel: (3, 3), in_channels: channels, out_channels: channels },
            LayerSpec::ResidualSubtractInput,
        ],
        vec![h, w, channels],
    )
    .expect("conv stub always chains")
}
