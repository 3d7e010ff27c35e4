//! Adam optimizer with bias correction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::network::{Checkpoint, Gradients};
use crate::nn::real::Real;

/// Optimizer hyperparameters. The learning rate passed to [`adam_step`]
/// comes from the caller's schedule, not from this struct.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
}

impl AdamConfig {
    pub fn new(beta1: f64, beta2: f64, epsilon: f64, batch_size: usize) -> Result<Self> {
        if !(0.0 < beta1 && beta1 < 1.0) || !(0.0 < beta2 && beta2 < 1.0) {
            return Err(Error::Parameter(format!(
                "Adam betas must lie in (0, 1), got ({beta1}, {beta2})"
            )));
        }
        if !(epsilon > 0.0) {
            return Err(Error::Parameter(format!("Adam epsilon must be positive, got {epsilon}")));
        }
        if batch_size == 0 {
            return Err(Error::Parameter("Adam batch size must be at least 1".into()));
        }
        Ok(Self { beta1, beta2, epsilon, batch_size })
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, epsilon: 1e-8, batch_size: 128 }
    }
}

/// First/second moment estimates, shaped like the checkpoint's learnables.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    m: Gradients<T>,
    v: Gradients<T>,
}

impl<T: Real> AdamState<T> {
    pub fn new(ckpt: &Checkpoint<T>) -> Self {
        Self { m: Gradients::zeros_like(ckpt), v: Gradients::zeros_like(ckpt) }
    }
}

/// One Adam update at step `t` (1-based) with the scheduled learning rate.
pub fn adam_step<T: Real>(
    ckpt: &mut Checkpoint<T>,
    grads: &Gradients<T>,
    state: &mut AdamState<T>,
    cfg: &AdamConfig,
    lr: f64,
    t: u64,
) -> Result<()> {
    if t == 0 {
        return Err(Error::Parameter("Adam step index is 1-based".into()));
    }
    if !grads.all_finite() {
        return Err(Error::Numeric(format!("non-finite gradient at Adam step {t}")));
    }
    let b1 = T::from_f64(cfg.beta1);
    let b2 = T::from_f64(cfg.beta2);
    let one_m_b1 = T::from_f64(1.0 - cfg.beta1);
    let one_m_b2 = T::from_f64(1.0 - cfg.beta2);
    let eps = T::from_f64(cfg.epsilon);
    let corr1 = 1.0 - cfg.beta1.powi(t as i32);
    let corr2 = 1.0 - cfg.beta2.powi(t as i32);
    // Folding both corrections into the step size: lr_t * m / (sqrt(v) + ε̂).
    let lr_t = T::from_f64(lr * corr2.sqrt() / corr1);
    let eps_hat = T::from_f64(cfg.epsilon * corr2.sqrt());
    let _ = eps;

    for (layer_idx, layer_grads) in grads.layers.iter().enumerate() {
        let mut arrays = ckpt.params[layer_idx].learnable_mut();
        if arrays.len() != layer_grads.len() {
            return Err(Error::State(format!(
                "gradient structure does not match checkpoint at layer {layer_idx}"
            )));
        }
        for (a_idx, g_arr) in layer_grads.iter().enumerate() {
            let m_arr = &mut state.m.layers[layer_idx][a_idx];
            let v_arr = &mut state.v.layers[layer_idx][a_idx];
            let p_arr: &mut Vec<T> = arrays[a_idx];
            for k in 0..g_arr.len() {
                let g = g_arr[k];
                m_arr[k] = b1 * m_arr[k] + one_m_b1 * g;
                v_arr[k] = b2 * v_arr[k] + one_m_b2 * g * g;
                p_arr[k] = p_arr[k] - lr_t * m_arr[k] / (v_arr[k].sqrt() + eps_hat);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::spec::identity_dense_spec;
    use crate::nn::{LayerParams, Tensor};
    use crate::numerics::RngStream;

    fn single_param_ckpt(value: f64) -> Checkpoint<f64> {
        let mut ckpt: Checkpoint<f64> =
            Checkpoint::init(identity_dense_spec(1), RngStream::new(0, 0)).unwrap();
        if let LayerParams::Dense { w, b } = &mut ckpt.params[0] {
            w[0] = value;
            b[0] = 0.0;
        }
        ckpt
    }

    fn grad_for(ckpt: &Checkpoint<f64>, g_w: f64) -> Gradients<f64> {
        let mut g = Gradients::zeros_like(ckpt);
        g.layers[0][0][0] = g_w;
        g
    }

    #[test]
    fn zero_gradients_leave_parameters_unchanged() {
        let mut ckpt = single_param_ckpt(0.7);
        let before = ckpt.params.clone();
        let mut state = AdamState::new(&ckpt);
        let cfg = AdamConfig::default();
        for t in 1..=5 {
            let g = Gradients::zeros_like(&ckpt);
            adam_step(&mut ckpt, &g, &mut state, &cfg, 1e-3, t).unwrap();
        }
        assert_eq!(ckpt.params, before);
    }

    #[test]
    fn constant_gradient_update_magnitude_approaches_lr() {
        // With constant g the bias-corrected update tends to lr * sign(g).
        let mut ckpt = single_param_ckpt(0.0);
        let mut state = AdamState::new(&ckpt);
        let cfg = AdamConfig::default();
        let lr = 0.01;
        let mut prev = 0.0;
        for t in 1..=200 {
            let g = grad_for(&ckpt, 0.37);
            adam_step(&mut ckpt, &g, &mut state, &cfg, lr, t).unwrap();
            let now = match &ckpt.params[0] {
                LayerParams::Dense { w, .. } => w[0],
                _ => unreachable!(),
            };
            let delta = (now - prev).abs();
            assert!(delta <= lr * 1.05, "step {t}: |Δ| = {delta}");
            prev = now;
        }
        // After warmup the step size is essentially lr.
        assert!((prev.abs() - 200.0 * lr).abs() < 0.02 * 200.0 * lr);
    }

    #[test]
    fn rejects_non_finite_gradients_and_zero_step() {
        let mut ckpt = single_param_ckpt(0.0);
        let mut state = AdamState::new(&ckpt);
        let cfg = AdamConfig::default();
        let g = grad_for(&ckpt, f64::NAN);
        assert!(adam_step(&mut ckpt, &g, &mut state, &cfg, 1e-3, 1).is_err());
        let g = grad_for(&ckpt, 1.0);
        assert!(adam_step(&mut ckpt, &g, &mut state, &cfg, 1e-3, 0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(AdamConfig::new(0.9, 0.999, 1e-8, 128).is_ok());
        assert!(AdamConfig::new(1.0, 0.999, 1e-8, 128).is_err());
        assert!(AdamConfig::new(0.9, 0.0, 1e-8, 128).is_err());
        assert!(AdamConfig::new(0.9, 0.999, 0.0, 128).is_err());
        assert!(AdamConfig::new(0.9, 0.999, 1e-8, 0).is_err());
    }

    #[test]
    fn descends_a_quadratic() {
        // L(θ) = (θ - 3)², gradient 2(θ - 3); loss must strictly decrease.
        let mut ckpt = single_param_ckpt(0.0);
        let mut state = AdamState::new(&ckpt);
        let cfg = AdamConfig::default();
        let theta = |c: &Checkpoint<f64>| match &c.params[0] {
            LayerParams::Dense { w, .. } => w[0],
            _ => unreachable!(),
        };
        let mut last_loss = (theta(&ckpt) - 3.0) * (theta(&ckpt) - 3.0);
        for t in 1..=50 {
            let g = grad_for(&ckpt, 2.0 * (theta(&ckpt) - 3.0));
            adam_step(&mut ckpt, &g, &mut state, &cfg, 0.05, t).unwrap();
            let loss = (theta(&ckpt) - 3.0) * (theta(&ckpt) - 3.0);
            assert!(loss < last_loss, "step {t}: {loss} !< {last_loss}");
            last_loss = loss;
        }
    }

    #[test]
    fn training_updates_are_bit_deterministic() {
        let run = || {
            let mut ckpt: Checkpoint<f32> =
                Checkpoint::init(identity_dense_spec(4), RngStream::new(9, 9)).unwrap();
            let mut state = AdamState::new(&ckpt);
            let cfg = AdamConfig::default();
            let x = Tensor::new(vec![2, 4], (0..8).map(|k| k as f32 * 0.19).collect()).unwrap();
            let y = Tensor::new(vec![2, 4], (0..8).map(|k| (k as f32 * 0.11).cos()).collect())
                .unwrap();
            for t in 1..=20 {
                let (out, cache) = ckpt.forward_train(&x, true).unwrap();
                let (_, grad) = crate::nn::mse_loss_grad(&out, &y).unwrap();
                let grads = ckpt.backward(&cache, &grad).unwrap();
                adam_step(&mut ckpt, &grads, &mut state, &cfg, 1e-2, t).unwrap();
            }
            ckpt
        };
        assert_eq!(run(), run());
    }
}
