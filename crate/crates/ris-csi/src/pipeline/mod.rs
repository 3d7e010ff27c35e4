//! The three-stage CSI acquisition pipeline: dataset construction with
//! live error propagation, sequential training (DE-DNN → ARE-DNN →
//! IRP-DNN) and the online inference chain.

mod dataset;
mod flops;
mod infer;
mod model;
mod train;

pub use dataset::{
    build_stage_dataset, load_dataset, save_dataset, DatasetRequest, DirectSource, LinkSetup,
    Provenance, Split, Stage, StageDataset, UpstreamNets, RISD_MAGIC, RISD_VERSION,
};
pub use flops::{flop_report, flop_report_for_specs, FlopReport};
pub use infer::{infer, infer_batch, CsiEstimate};
pub use model::{
    load_pipeline, save_pipeline, sha256_file, train_pipeline, PipelineModel, PipelineReport,
    PipelineSettings,
};
pub use train::{evaluate_loss, evaluate_nmse, train_stage, TrainReport, TrainSchedule};
