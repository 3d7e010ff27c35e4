//! Row-wise orthogonal matching pursuit over an oversampled angular
//! dictionary.
//!
//! Each row of the cascaded channel is a superposition of complex
//! exponentials in the RIS element index (products of the RIS-BS departure
//! response and the user-RIS channel), so a row restricted to the active
//! elements is sparsely decomposed on a grid of such exponentials and then
//! re-expanded on all N columns.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::estimators::ls::ls_cascaded;
use crate::numerics::{lstsq, CMat, CVec};
use crate::pilot::PilotObservation;

/// Sparse estimate of the full M x N cascaded channel.
///
/// `grid_size` is the number of dictionary frequencies (at least N; 2N is
/// the usual 2x oversampling). `sparsity` caps the number of atoms per row
/// and must not exceed the N1 measurements.
pub fn omp_cascaded(
    obs: &PilotObservation,
    h_ub_est: &CVec,
    grid_size: usize,
    sparsity: usize,
) -> Result<CMat> {
    let active = obs.schedule.active();
    let n = active.n();
    let n1 = active.n1();
    if sparsity == 0 {
        return Err(Error::Parameter("OMP sparsity must be at least 1".into()));
    }
    if sparsity > n1 {
        return Err(Error::Parameter(format!(
            "OMP sparsity {sparsity} exceeds the {n1} measurements per row"
        )));
    }
    if grid_size < n {
        return Err(Error::Parameter(format!(
            "OMP grid size {grid_size} must be at least N = {n}"
        )));
    }

    let de_noised = ls_cascaded(obs, h_ub_est)?;
    let dict = Dictionary::new(grid_size, n, active.indices());

    let m = de_noised.g_hat_active.rows();
    let mut out = CMat::zeros(m, n);
    for row in 0..m {
        let target = CVec::from(de_noised.g_hat_active.row(row).to_vec());
        let fit = omp_row(&dict, &target, sparsity)?;
        for (k, &atom) in fit.support.iter().enumerate() {
            let coeff = fit.coeffs.get(k);
            for col in 0..n {
                let v = out.get(row, col) + coeff * dict.full_atom(atom, col);
                out.set(row, col, v);
            }
        }
    }
    Ok(out)
}

struct Dictionary {
    grid_size: usize,
    n: usize,
    /// Restricted atoms, atom-major: entry (q, t) at q*n1 + t.
    restricted: Vec<Complex64>,
    n1: usize,
}

impl Dictionary {
    fn new(grid_size: usize, n: usize, active: &[usize]) -> Self {
        let n1 = active.len();
        let mut restricted = Vec::with_capacity(grid_size * n1);
        for q in 0..grid_size {
            for &elem in active {
                restricted.push(atom_value(q, elem, grid_size));
            }
        }
        Self { grid_size, n, restricted, n1 }
    }

    fn restricted_atom(&self, q: usize) -> &[Complex64] {
        &self.restricted[q * self.n1..(q + 1) * self.n1]
    }

    fn full_atom(&self, q: usize, elem: usize) -> Complex64 {
        debug_assert!(elem < self.n);
        atom_value(q, elem, self.grid_size)
    }
}

fn atom_value(q: usize, elem: usize, grid_size: usize) -> Complex64 {
    let phase = 2.0 * std::f64::consts::PI * (q as f64) * (elem as f64) / grid_size as f64;
    Complex64::from_polar(1.0, phase)
}

struct RowFit {
    support: Vec<usize>,
    coeffs: CVec,
    #[cfg_attr(not(test), allow(dead_code))]
    residual_norms: Vec<f64>,
}

fn omp_row(dict: &Dictionary, target: &CVec, sparsity: usize) -> Result<RowFit> {
    let n1 = dict.n1;
    let mut residual = target.clone();
    let mut support: Vec<usize> = Vec::with_capacity(sparsity);
    let mut coeffs = CVec::zeros(0);
    let mut residual_norms = vec![residual.norm()];

    let scale = target.norm().max(1.0);
    for _ in 0..sparsity {
        if residual.norm() <= 1e-12 * scale {
            break;
        }
        // All restricted atoms share norm sqrt(N1), so the raw inner product
        // ranks them; ties resolve to the lowest grid index.
        let mut best_q = usize::MAX;
        let mut best_corr = -1.0;
        for q in 0..dict.grid_size {
            if support.contains(&q) {
                continue;
            }
            let atom = dict.restricted_atom(q);
            let mut inner = Complex64::new(0.0, 0.0);
            for t in 0..n1 {
                inner += atom[t].conj() * residual.get(t);
            }
            let corr = inner.norm();
            if corr > best_corr {
                best_corr = corr;
                best_q = q;
            }
        }
        if best_q == usize::MAX {
            break;
        }
        support.push(best_q);

        // Re-fit all selected coefficients against the original target.
        let a = CMat::from_fn(n1, support.len(), |t, k| dict.restricted_atom(support[k])[t]);
        coeffs = lstsq(&a, target)?;
        let mut new_res = Vec::with_capacity(n1);
        for t in 0..n1 {
            let mut fitted = Complex64::new(0.0, 0.0);
            for (k, &q) in support.iter().enumerate() {
                fitted += coeffs.get(k) * dict.restricted_atom(q)[t];
            }
            new_res.push(target.get(t) - fitted);
        }
        residual = CVec::from(new_res);
        residual_norms.push(residual.norm());
    }

    Ok(RowFit { support, coeffs, residual_norms })
}
