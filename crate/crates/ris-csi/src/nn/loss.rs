//! MSE loss: mean over the batch of the squared Euclidean feature error.

use crate::error::{Error, Result};
use crate::nn::real::Real;
use crate::nn::tensor::Tensor;

/// `(1/B) Σ_b ||pred_b - target_b||²`, accumulated in f64.
pub fn mse_loss<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "mse: {:?} vs {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let mut acc = 0.0f64;
    for (&p, &t) in pred.data().iter().zip(target.data()) {
        let d = p.into_f64() - t.into_f64();
        acc += d * d;
    }
    Ok(acc / pred.batch() as f64)
}

/// Loss and its gradient w.r.t. the prediction: `2 (pred - target) / B`.
pub fn mse_loss_grad<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(f64, Tensor<T>)> {
    let loss = mse_loss(pred, target)?;
    let scale = T::from_f64(2.0 / pred.batch() as f64);
    let mut grad = pred.clone();
    for (g, &t) in grad.data_mut().iter_mut().zip(target.data()) {
        *g = (*g - t) * scale;
    }
    Ok((loss, grad))
}
