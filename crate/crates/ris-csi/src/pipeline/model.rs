//! Pipeline assembly: sequential three-stage training, shape-chain
//! validation and on-disk persistence (three "RCKP" files plus a JSON
//! manifest with content hashes).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::PathCounts;
use crate::error::{Error, Result};
use crate::nn::{
    are_dnn_spec, de_dnn_spec, irp_dnn_spec, load_checkpoint, save_checkpoint, ActivationOrder,
    Checkpoint, Real,
};
use crate::numerics::RngStream;
use crate::pilot::{ActivePolicy, ActiveSet};
use crate::pipeline::dataset::{
    build_stage_dataset, DatasetRequest, DirectSource, LinkSetup, Split, Stage, UpstreamNets,
};
use crate::pipeline::train::{train_stage, TrainReport, TrainSchedule};

/// Everything needed to train one pipeline operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSettings {
    pub m: usize,
    pub n: usize,
    pub n1: usize,
    pub active_policy: ActivePolicy,
    pub bs_spacing: f64,
    pub ris_spacing: f64,
    pub paths: PathCounts,
    pub noise_variance: f64,
    /// One entry = per-SNR model (the default); several = mixed-SNR training.
    pub train_snrs_db: Vec<f64>,
    pub train_samples: usize,
    pub val_samples: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_initial: f64,
    pub lr_final: f64,
    pub lr_switch_epoch: usize,
    pub activation_order: ActivationOrder,
    pub seed: u64,
}

impl PipelineSettings {
    pub fn link(&self) -> Result<LinkSetup> {
        Ok(LinkSetup {
            bs: crate::channel::ArrayGeometry::new(self.m, self.bs_spacing)?,
            ris: crate::channel::ArrayGeometry::new(self.n, self.ris_spacing)?,
            paths: self.paths,
            active: ActiveSet::from_policy(self.active_policy, self.n1, self.n)?,
            noise_variance: self.noise_variance,
        })
    }

    pub fn schedule(&self) -> TrainSchedule {
        TrainSchedule {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr_initial: self.lr_initial,
            lr_final: self.lr_final,
            lr_switch_epoch: self.lr_switch_epoch,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    /// Representative SNR (the first training SNR).
    pub fn snr_db(&self) -> f64 {
        self.train_snrs_db[0]
    }

    /// Canonical content hash of the settings.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("settings are serializable");
        hex_digest(text.as_bytes())
    }
}

/// The trained three-stage model for one (SNR, r) operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineModel<T> {
    pub de: Checkpoint<T>,
    pub are: Checkpoint<T>,
    /// Absent when every RIS element is active (N2 = 0).
    pub irp: Option<Checkpoint<T>>,
    pub active: ActiveSet,
    pub snr_db: f64,
    pub noise_variance: f64,
    pub config_hash: String,
}

impl<T: Real> PipelineModel<T> {
    /// Validates the M/N1/N2 shape chain across the three networks.
    pub fn validate(&self) -> Result<()> {
        let m2 = self.de.spec.input_shape[0];
        if self.de.spec.output_shape()? != vec![m2] {
            return Err(Error::Shape("DE network must map 2M to 2M".into()));
        }
        let m = m2 / 2;
        let n1 = self.active.n1();
        let n2 = self.active.n2();
        if self.are.spec.input_shape != vec![m, n1, 2] {
            return Err(Error::Shape(format!(
                "ARE network input {:?} does not match geometry [{m}, {n1}, 2]",
                self.are.spec.input_shape
            )));
        }
        match (&self.irp, n2) {
            (None, 0) => {}
            (None, _) => {
                return Err(Error::Shape(
                    "pipeline with inactive elements needs an IRP network".into(),
                ))
            }
            (Some(irp), _) => {
                if irp.spec.input_shape != vec![2 * n1] {
                    return Err(Error::Shape(format!(
                        "IRP network input {:?} does not match 2·N1 = {}",
                        irp.spec.input_shape,
                        2 * n1
                    )));
                }
                if irp.spec.output_shape()? != vec![2 * n2] {
                    return Err(Error::Shape(format!(
                        "IRP network output does not match 2·N2 = {}",
                        2 * n2
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Per-stage loss trajectories of one pipeline training run.
#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub de: TrainReport,
    pub are: TrainReport,
    pub irp: Option<TrainReport>,
}

/// Trains DE → ARE → IRP in order, threading live checkpoints.
pub fn train_pipeline(settings: &PipelineSettings) -> Result<(PipelineModel<f32>, PipelineReport)> {
    let link = settings.link()?;
    let schedule = settings.schedule();
    let stream = RngStream::new(settings.seed, 0);
    let order = settings.activation_order;

    let request = |stage, split, n_samples| DatasetRequest {
        stage,
        split,
        n_samples,
        snrs_db: settings.train_snrs_db.clone(),
        direct_source: DirectSource::DeDnn,
    };

    // Stage 1: direct-channel refiner.
    let de_train = build_stage_dataset::<f32>(
        &request(Stage::De, Split::Train, settings.train_samples),
        &link,
        &UpstreamNets::default(),
        stream,
    )?;
    let de_val = build_stage_dataset::<f32>(
        &request(Stage::De, Split::Val, settings.val_samples),
        &link,
        &UpstreamNets::default(),
        stream,
    )?;
    let (de, de_report) =
        train_stage(&de_train, &de_val, de_dnn_spec(settings.m, order), &schedule, stream)?;

    // Stage 2: active-cascade denoiser, trained on live DE outputs.
    let upstream_de = UpstreamNets { de: Some(&de), are: None };
    let are_train = build_stage_dataset::<f32>(
        &request(Stage::Are, Split::Train, settings.train_samples),
        &link,
        &upstream_de,
        stream,
    )?;
    let are_val = build_stage_dataset::<f32>(
        &request(Stage::Are, Split::Val, settings.val_samples),
        &link,
        &upstream_de,
        stream,
    )?;
    let (are, are_report) = train_stage(
        &are_train,
        &are_val,
        are_dnn_spec(settings.m, settings.n1, order),
        &schedule,
        stream,
    )?;

    // Stage 3: inactive-column predictor, trained on live ARE output rows.
    let n2 = link.active.n2();
    let (irp, irp_report) = if n2 == 0 {
        (None, None)
    } else {
        let upstream_both = UpstreamNets { de: Some(&de), are: Some(&are) };
        let irp_train = build_stage_dataset::<f32>(
            &request(Stage::Irp, Split::Train, settings.train_samples),
            &link,
            &upstream_both,
            stream,
        )?;
        let irp_val = build_stage_dataset::<f32>(
            &request(Stage::Irp, Split::Val, settings.val_samples),
            &link,
            &upstream_both,
            stream,
        )?;
        let (irp, report) = train_stage(
            &irp_train,
            &irp_val,
            irp_dnn_spec(settings.n1, n2, order),
            &schedule,
            stream,
        )?;
        (Some(irp), Some(report))
    };

    let model = PipelineModel {
        de,
        are,
        irp,
        active: link.active.clone(),
        snr_db: settings.snr_db(),
        noise_variance: settings.noise_variance,
        config_hash: settings.hash(),
    };
    model.validate()?;
    Ok((model, PipelineReport { de: de_report, are: are_report, irp: irp_report }))
}

// ------------------------------------------------------------ persistence

#[derive(Serialize, Deserialize)]
struct PipelineManifest {
    format_version: u32,
    m: usize,
    n: usize,
    n1: usize,
    active_indices: Vec<usize>,
    snr_db: f64,
    noise_variance: f64,
    config_hash: String,
    checkpoints: Vec<CheckpointRef>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointRef {
    stage: Stage,
    file: String,
    sha256: String,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex_digest(&bytes))
}

fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `de.rckp`, `are.rckp`, optionally `irp.rckp` and `pipeline.json`
/// into `dir` (created if needed).
pub fn save_pipeline(model: &PipelineModel<f32>, dir: &Path) -> Result<()> {
    model.validate()?;
    std::fs::create_dir_all(dir)?;
    let mut checkpoints = Vec::new();
    let mut write = |stage: Stage, name: &str, ckpt: &Checkpoint<f32>| -> Result<()> {
        let path = dir.join(name);
        save_checkpoint(ckpt, &path)?;
        checkpoints.push(CheckpointRef {
            stage,
            file: name.to_string(),
            sha256: sha256_file(&path)?,
        });
        Ok(())
    };
    write(Stage::De, "de.rckp", &model.de)?;
    write(Stage::Are, "are.rckp", &model.are)?;
    if let Some(irp) = &model.irp {
        write(Stage::Irp, "irp.rckp", irp)?;
    }
    let manifest = PipelineManifest {
        format_version: 1,
        m: model.de.spec.input_shape[0] / 2,
        n: model.active.n(),
        n1: model.active.n1(),
        active_indices: model.active.indices().to_vec(),
        snr_db: model.snr_db,
        noise_variance: model.noise_variance,
        config_hash: model.config_hash.clone(),
        checkpoints,
    };
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(dir.join("pipeline.json"), text)?;
    Ok(())
}

/// Loads a pipeline directory, verifying checkpoint content hashes.
pub fn load_pipeline(dir: &Path) -> Result<PipelineModel<f32>> {
    let manifest_path = dir.join("pipeline.json");
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| {
        Error::State(format!("missing pipeline manifest {}: {e}", manifest_path.display()))
    })?;
    let manifest: PipelineManifest = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", manifest_path.display())))?;

    let mut de = None;
    let mut are = None;
    let mut irp = None;
    for c in &manifest.checkpoints {
        let path: PathBuf = dir.join(&c.file);
        let actual = sha256_file(&path).map_err(|_| {
            Error::State(format!("missing checkpoint {}", path.display()))
        })?;
        if actual != c.sha256 {
            return Err(Error::Format(format!(
                "{}: content hash mismatch (expected {}, found {actual})",
                path.display(),
                c.sha256
            )));
        }
        let ckpt = load_checkpoint(&path)?;
        match c.stage {
            Stage::De => de = Some(ckpt),
            Stage::Are => are = Some(ckpt),
            Stage::Irp => irp = Some(ckpt),
        }
    }
    let model = PipelineModel {
        de: de.ok_or_else(|| Error::State(format!("{}: no DE checkpoint listed", dir.display())))?,
        are: are
            .ok_or_else(|| Error::State(format!("{}: no ARE checkpoint listed", dir.display())))?,
        irp,
        active: ActiveSet::new(manifest.active_indices, manifest.n)?,
        snr_db: manifest.snr_db,
        noise_variance: manifest.noise_variance,
        config_hash: manifest.config_hash,
    };
    model.validate()?;
    Ok(model)
}
