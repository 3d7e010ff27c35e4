//! Multiply-accumulate counts of the online inference chain.
//!
//! Dense stages cost the sum of consecutive layer-size products; the ARE
//! stage costs the LS de-spreading term `M·N1²` plus `M·N1` times the sum
//! of `K²·F_{i-1}·F_i` over its convolutional layers; the IRP stage runs
//! its dense cost once per BS antenna row.

use crate::nn::{LayerSpec, NetworkSpec};
use crate::pipeline::model::PipelineModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlopReport {
    pub de_macs: u64,
    pub are_ls_macs: u64,
    pub are_conv_macs: u64,
    pub irp_macs: u64,
}

impl FlopReport {
    pub fn are_macs(&self) -> u64 {
        self.are_ls_macs + self.are_conv_macs
    }

    pub fn total(&self) -> u64 {
        self.de_macs + self.are_macs() + self.irp_macs
    }
}

fn dense_mac_sum(spec: &NetworkSpec) -> u64 {
    spec.layers
        .iter()
        .map(|l| match l {
            LayerSpec::Dense { inputs, outputs } => (inputs * outputs) as u64,
            _ => 0,
        })
        .sum()
}

fn conv_kernel_sum(spec: &NetworkSpec) -> u64 {
    spec.layers
        .iter()
        .map(|l| match l {
            LayerSpec::ConvZp { kernel, in_channels, out_channels } => {
                (kernel.0 * kernel.1 * in_channels * out_channels) as u64
            }
            _ => 0,
        })
        .sum()
}

/// MAC counts from explicit network specs and the geometry (M, N1).
pub fn flop_report_for_specs(
    de: &NetworkSpec,
    are: &NetworkSpec,
    irp: Option<&NetworkSpec>,
    m: usize,
    n1: usize,
) -> FlopReport {
    FlopReport {
        de_macs: dense_mac_sum(de),
        are_ls_macs: (m * n1 * n1) as u64,
        are_conv_macs: (m * n1) as u64 * conv_kernel_sum(are),
        irp_macs: m as u64 * irp.map(dense_mac_sum).unwrap_or(0),
    }
}

/// MAC counts of a trained pipeline.
pub fn flop_report<T: crate::nn::Real>(model: &PipelineModel<T>) -> FlopReport {
    let m = model.de.spec.input_shape[0] / 2;
    flop_report_for_specs(
        &model.de.spec,
        &model.are.spec,
        model.irp.as_ref().map(|c| &c.spec),
        m,
        model.active.n1(),
    )
}
