//! Minimal trainable neural-network engine.
//!
//! Exactly the five layer kinds the three stage networks need: dense,
//! zero-padded convolution, batch normalization, ReLU and a residual
//! subtract-input head. Backpropagation is written out by hand and verified
//! against central finite differences; no general autodiff.
//!
//! The engine is generic over the scalar type: the simulation pipeline runs
//! it in `f32`, while gradient-check tests instantiate `f64` so the
//! finite-difference oracle is not drowned in rounding noise.

mod adam;
mod checkpoint_io;
mod kernels;
mod layers;
mod loss;
mod network;
mod pack;
mod real;
mod spec;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint_io::{load_checkpoint, save_checkpoint, RCKP_MAGIC, RCKP_VERSION};
pub use loss::{mse_loss, mse_loss_grad};
pub use network::{Checkpoint, ForwardCache, Gradients, LayerParams};
pub use pack::{
    cmat_to_real, cmat_to_rtensor3, cvec_to_real, real_to_cmat, real_to_cvec, rtensor3_to_cmat,
};
pub use real::Real;
pub use spec::{
    are_dnn_spec, de_dnn_spec, identity_dense_spec, irp_dnn_spec, zero_branch_residual_spec,
    ActivationOrder, LayerSpec, NetworkSpec,
};
pub use tensor::Tensor;
