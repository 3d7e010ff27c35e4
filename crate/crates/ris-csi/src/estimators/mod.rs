//! Closed-form LS estimators feeding the DNN stages, plus the comparison
//! baselines (full-activation LS, zero-filled truncated LS, angular OMP).

mod ls;
mod omp;

pub use ls::{ls_cascaded, ls_direct, ls_full, LsCascadedEstimate, LsDirectEstimate};
pub use omp::omp_cascaded;
