//! NMSE metrics.
//!
//! Per-sample NMSE is `||truth - est||² / ||truth||²` (Euclidean for
//! vectors, Frobenius for matrices). Ensemble curves aggregate as the ratio
//! of summed error energy to summed signal energy, which is what the
//! analytic LS oracles (σ0²/P and σ0²/(P·N1)) predict; the standard error
//! of that ratio comes from the delta method.

use crate::error::{Error, Result};
use crate::numerics::{frob_norm, CMat, CVec};

/// Per-sample NMSE of a vector estimate.
pub fn nmse_direct(truth: &CVec, est: &CVec) -> Result<f64> {
    if truth.len() != est.len() {
        return Err(Error::Shape(format!(
            "nmse: lengths {} vs {}",
            truth.len(),
            est.len()
        )));
    }
    let sig = truth.norm_sqr();
    if sig == 0.0 {
        return Err(Error::Domain("nmse is undefined for a zero-norm truth".into()));
    }
    Ok(truth.sub(est)?.norm_sqr() / sig)
}

/// Per-sample NMSE of a matrix estimate.
pub fn nmse_cascaded(truth: &CMat, est: &CMat) -> Result<f64> {
    if truth.rows() != est.rows() || truth.cols() != est.cols() {
        return Err(Error::Shape(format!(
            "nmse: {}x{} vs {}x{}",
            truth.rows(),
            truth.cols(),
            est.rows(),
            est.cols()
        )));
    }
    let sig = frob_norm(truth).powi(2);
    if sig == 0.0 {
        return Err(Error::Domain("nmse is undefined for a zero-norm truth".into()));
    }
    Ok(frob_norm(&truth.sub(est)?).powi(2) / sig)
}

/// Ensemble NMSE statistics over per-sample (error-energy, signal-energy)
/// pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmseStats {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

/// Accumulates squared error and signal energies sample by sample.
#[derive(Debug, Clone, Default)]
pub struct NmseAccumulator {
    pairs: Vec<(f64, f64)>,
}

impl NmseAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, err_energy: f64, sig_energy: f64) {
        self.pairs.push((err_energy, sig_energy));
    }

    pub fn push_vec(&mut self, truth: &CVec, est: &CVec) -> Result<()> {
        let diff = truth.sub(est)?;
        self.push(diff.norm_sqr(), truth.norm_sqr());
        Ok(())
    }

    pub fn push_mat(&mut self, truth: &CMat, est: &CMat) -> Result<()> {
        let diff = truth.sub(est)?;
        self.push(frob_norm(&diff).powi(2), frob_norm(truth).powi(2));
        Ok(())
    }

    /// Ratio-of-sums NMSE with a delta-method standard error.
    pub fn stats(&self) -> Result<NmseStats> {
        let n = self.pairs.len();
        if n == 0 {
            return Err(Error::Domain("no samples accumulated".into()));
        }
        let sum_err: f64 = self.pairs.iter().map(|p| p.0).sum();
        let sum_sig: f64 = self.pairs.iter().map(|p| p.1).sum();
        if sum_sig == 0.0 {
            return Err(Error::Domain("zero total signal energy".into()));
        }
        let mean = sum_err / sum_sig;
        let mean_sig = sum_sig / n as f64;
        let var_d = self
            .pairs
            .iter()
            .map(|&(e, s)| {
                let d = e - mean * s;
                d * d
            })
            .sum::<f64>()
            / n as f64;
        let stderr = var_d.sqrt() / (mean_sig * (n as f64).sqrt());
        Ok(NmseStats { mean, stderr, n_samples: n })
    }
}
