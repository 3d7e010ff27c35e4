//! Link-level simulation laboratory for deep multi-stage CSI acquisition in
//! RIS-aided MIMO uplink systems.
//!
//! The crate simulates the full chain from geometric channel synthesis to
//! trained-network channel reconstruction:
//!
//! * [`numerics`] — complex matrices/vectors, real tensors, seeded RNG streams.
//! * [`channel`] — Saleh-Valenzuela channel realizations and the cascaded
//!   channel `G = H_RB diag(h_UR)`.
//! * [`pilot`] — RIS reflection schedules (all-off instant + DFT block) and
//!   noisy pilot reception.
//! * [`estimators`] — closed-form LS estimators and an angular-dictionary OMP
//!   baseline.
//! * [`nn`] — a minimal trainable neural-network engine (dense, zero-padded
//!   conv, batch norm, ReLU, residual subtraction, Adam, manual backprop).
//! * [`pipeline`] — three-stage dataset construction, sequential training and
//!   the online inference chain (DE-DNN → ARE-DNN → IRP-DNN).
//! * [`metrics`] / [`sweep`] — NMSE evaluation, SNR and pilot-ratio sweeps,
//!   CSV persistence.
//! * [`config`] — experiment configuration (desk-scale and paper-scale
//!   profiles).

pub mod channel;
pub mod config;
pub mod error;
pub mod estimators;
pub mod metrics;
pub mod nn;
pub mod numerics;
pub mod pilot;
pub mod pipeline;
pub mod sweep;

pub use error::{Error, Result};
