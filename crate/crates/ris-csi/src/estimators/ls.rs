//! Least-squares estimators for the direct and cascaded channels.
//!
//! `ls_direct` reads the all-off instant: `ĥ_UB,ls = y_1 / sqrt(P)`.
//! `ls_cascaded` inverts the DFT block:
//! `Ĝ_A,ls = (Y_A / sqrt(P) - ĥ_UB 1^T) Φ^H / N1`,
//! which equals `G_A + ((h_UB - ĥ_UB) 1^T + Z_A / sqrt(P)) Φ^H / N1`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{hermitian, matmul, CMat, CVec};
use crate::pilot::{dft_matrix, ActiveSet, PilotObservation};

/// LS estimate of the direct channel.
#[derive(Debug, Clone)]
pub struct LsDirectEstimate {
    pub h_hat: CVec,
    pub power: f64,
}

/// LS estimate of the cascaded channel restricted to the active columns.
#[derive(Debug, Clone)]
pub struct LsCascadedEstimate {
    pub g_hat_active: CMat,
    pub active: ActiveSet,
}

impl LsCascadedEstimate {
    /// Expands to the full M x N grid with zeros on the inactive columns —
    /// the reduced-overhead LS baseline with its characteristic error floor.
    pub fn zero_filled(&self) -> CMat {
        let m = self.g_hat_active.rows();
        let n = self.active.n();
        let mut full = CMat::zeros(m, n);
        for (k, &col) in self.active.indices().iter().enumerate() {
            for i in 0..m {
                full.set(i, col, self.g_hat_active.get(i, k));
            }
        }
        full
    }
}

/// `ĥ_UB,ls = y_1 / sqrt(P)` from the all-off pilot instant.
pub fn ls_direct(obs: &PilotObservation) -> Result<LsDirectEstimate> {
    if obs.y.cols() == 0 {
        return Err(Error::Shape("observation has no pilot instants".into()));
    }
    let scale = Complex64::new(1.0 / obs.power.sqrt(), 0.0);
    Ok(LsDirectEstimate { h_hat: obs.y.col(0).scale(scale), power: obs.power })
}

/// LS estimate of G_A given an estimate of the direct channel.
pub fn ls_cascaded(obs: &PilotObservation, h_ub_est: &CVec) -> Result<LsCascadedEstimate> {
    let active = obs.schedule.active().clone();
    let n1 = active.n1();
    let m = obs.y.rows();
    if obs.y.cols() != n1 + 1 {
        return Err(Error::Shape(format!(
            "observation has {} instants, schedule expects {}",
            obs.y.cols(),
            n1 + 1
        )));
    }
    if h_ub_est.len() != m {
        return Err(Error::Shape(format!(
            "direct estimate has length {}, observation has {m} antennas",
            h_ub_est.len()
        )));
    }
    let inv_sqrt_p = 1.0 / obs.power.sqrt();
    // (Y_A / sqrt(P) - ĥ 1^T)
    let centered = CMat::from_fn(m, n1, |i, t| {
        obs.y.get(i, t + 1) * inv_sqrt_p - h_ub_est.get(i)
    });
    let phi_h = hermitian(&dft_matrix(n1));
    let g_hat = matmul(&centered, &phi_h)?.scale(Complex64::new(1.0 / n1 as f64, 0.0));
    Ok(LsCascadedEstimate { g_hat_active: g_hat, active })
}

/// Full-activation LS estimate of G (the schedule must activate every element).
pub fn ls_full(obs_full: &PilotObservation, h_ub_est: &CVec) -> Result<CMat> {
    let active = obs_full.schedule.active();
    if active.n1() != active.n() {
        return Err(Error::Parameter(format!(
            "ls_full needs full activation, got N1={} of N={}",
            active.n1(),
            active.n()
        )));
    }
    let est = ls_cascaded(obs_full, h_ub_est)?;
    // With A = {0..N-1} the active-column order is already the natural order.
    Ok(est.zero_filled())
}
