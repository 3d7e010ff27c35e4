//! Pilot transmission: RIS reflection scheduling and noisy reception.
//!
//! A pilot block spans `N1 + 1` time instants. At the first instant every
//! RIS element is off (`φ_1 = 0`), exposing the direct channel; the next
//! `N1` instants drive the active elements with the columns of an
//! `N1 x N1` DFT matrix while inactive elements stay off.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::numerics::{cgauss, CMat, RngStream};

/// How the active subset of RIS elements is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActivePolicy {
    /// Indices `floor(i*N/N1)`: preserves spatial sampling of the aperture.
    EvenlySpaced,
    /// Indices `0..N1`: one contiguous block at the array edge.
    Contiguous,
}

/// The set A of active RIS elements (and implicitly its complement B).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSet {
    indices: Vec<usize>,
    n: usize,
}

impl ActiveSet {
    /// Builds an active set from explicit indices; they must be unique and
    /// lie in `[0, n)`.
    pub fn new(mut indices: Vec<usize>, n: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Parameter("active set needs at least one element".into()));
        }
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Parameter("active set indices must be unique".into()));
        }
        if *indices.last().unwrap() >= n {
            return Err(Error::Parameter(format!(
                "active index {} out of range for {} RIS elements",
                indices.last().unwrap(),
                n
            )));
        }
        Ok(Self { indices, n })
    }

    /// Builds the active set for `n1` of `n` elements under a policy.
    pub fn from_policy(policy: ActivePolicy, n1: usize, n: usize) -> Result<Self> {
        if n1 == 0 || n1 > n {
            return Err(Error::Parameter(format!("need 1 <= N1 <= N, got N1={n1}, N={n}")));
        }
        let indices = match policy {
            ActivePolicy::EvenlySpaced => (0..n1).map(|i| i * n / n1).collect(),
            ActivePolicy::Contiguous => (0..n1).collect(),
        };
        Self::new(indices, n)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn n1(&self) -> usize {
        self.indices.len()
    }

    pub fn n2(&self) -> usize {
        self.n - self.indices.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Complement set B, sorted ascending.
    pub fn inactive_indices(&self) -> Vec<usize> {
        let mut mask = vec![true; self.n];
        for &i in &self.indices {
            mask[i] = false;
        }
        (0..self.n).filter(|&i| mask[i]).collect()
    }

    /// Pilot overhead ratio r = N1/N.
    pub fn overhead_ratio(&self) -> f64 {
        self.n1() as f64 / self.n as f64
    }
}

/// Per-instant RIS coefficients for one pilot block.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionSchedule {
    psi: CMat,
    active: ActiveSet,
}

impl ReflectionSchedule {
    /// The N x (N1+1) coefficient matrix Ψ.
    pub fn psi(&self) -> &CMat {
        &self.psi
    }

    pub fn active(&self) -> &ActiveSet {
        &self.active
    }

    /// Number of pilot instants (N1 + 1, including the all-off instant).
    pub fn num_instants(&self) -> usize {
        self.psi.cols()
    }

    /// Overhead reduction relative to full activation: (N1+1)/(N+1).
    pub fn overhead_reduction(&self) -> f64 {
        self.num_instants() as f64 / (self.active.n() as f64 + 1.0)
    }
}

/// N1 x N1 DFT matrix with (k,l) entry `exp(-j 2π k l / N1)`.
pub fn dft_matrix(n1: usize) -> CMat {
    CMat::from_fn(n1, n1, |k, l| {
        Complex64::from_polar(1.0, -2.0 * PI * (k * l) as f64 / n1 as f64)
    })
}

/// Builds the reflection schedule: all-off first column, then the DFT block
/// on the active rows.
pub fn build_schedule(active: &ActiveSet, n: usize) -> Result<ReflectionSchedule> {
    if active.n() != n {
        return Err(Error::Parameter(format!(
            "active set was built for N={}, schedule requested N={n}",
            active.n()
        )));
    }
    let n1 = active.n1();
    let dft = dft_matrix(n1);
    let mut psi = CMat::zeros(n, n1 + 1);
    for (row_in_dft, &elem) in active.indices().iter().enumerate() {
        for t in 0..n1 {
            psi.set(elem, t + 1, dft.get(row_in_dft, t));
        }
    }
    Ok(ReflectionSchedule { psi, active: active.clone() })
}

/// Received pilot block with the metadata needed to evaluate estimators on it.
#[derive(Debug, Clone)]
pub struct PilotObservation {
    pub y: CMat,
    pub power: f64,
    pub noise_variance: f64,
    pub schedule: Arc<ReflectionSchedule>,
    pub truth: Arc<ChannelRealization>,
}

/// Simulates `Y = sqrt(P) (h_UB 1^T + G Ψ) + Z` with `Z ~ CN(0, σ0² I)`.
pub fn transmit(
    truth: Arc<ChannelRealization>,
    schedule: Arc<ReflectionSchedule>,
    power: f64,
    noise_variance: f64,
    stream: RngStream,
) -> Result<PilotObservation> {
    if !(power > 0.0) || !power.is_finite() {
        return Err(Error::Parameter(format!("transmit power must be positive, got {power}")));
    }
    let m = truth.h_ub.len();
    let n = truth.g.cols();
    if schedule.psi().rows() != n {
        return Err(Error::Shape(format!(
            "schedule is for {} RIS elements, channel has {n}",
            schedule.psi().rows()
        )));
    }
    let instants = schedule.num_instants();
    let gpsi = crate::numerics::matmul(&truth.g, schedule.psi())?;
    let noise = cgauss(stream, m * instants, noise_variance)?;
    let sqrt_p = power.sqrt();
    let mut y = CMat::zeros(m, instants);
    for i in 0..m {
        let hub_i = truth.h_ub.get(i);
        for t in 0..instants {
            let signal = sqrt_p * (hub_i + gpsi.get(i, t));
            y.set(i, t, signal + noise.get(i * instants + t));
        }
    }
    Ok(PilotObservation { y, power, noise_variance, schedule, truth })
}
