//! Experiment configuration: TOML-backed, with desk-scale defaults and the
//! paper-scale profile behind one switch.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::PathCounts;
use crate::error::{Error, Result};
use crate::nn::ActivationOrder;
use crate::pilot::ActivePolicy;
use crate::pipeline::PipelineSettings;

/// Estimation methods the sweep layer knows how to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// LS on the all-off instant; metric target is h_UB.
    LsDirect,
    /// LS refined by the trained DE-DNN; metric target is h_UB.
    DeDnn,
    /// Reduced-overhead LS with zeros on inactive columns (the error-floor
    /// baseline); metric target is G.
    LsZeroFill,
    /// Full-activation LS (r = 1 overhead); metric target is G.
    LsFull,
    /// Row-wise angular-dictionary OMP; metric target is G.
    Omp,
    /// The trained three-stage pipeline; metric target is G.
    Pipeline,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::LsDirect => "ls-direct",
            Method::DeDnn => "de-dnn",
            Method::LsZeroFill => "ls-zero-fill",
            Method::LsFull => "ls-full",
            Method::Omp => "omp",
            Method::Pipeline => "pipeline",
        }
    }

    /// Does this method need a trained pipeline checkpoint?
    pub fn needs_model(self) -> bool {
        matches!(self, Method::DeDnn | Method::Pipeline)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeometryConfig {
    /// M, BS antennas.
    pub bs_antennas: usize,
    /// N, RIS elements.
    pub ris_elements: usize,
    /// N1, active RIS elements during pilots.
    pub active_elements: usize,
    pub active_policy: ActivePolicy,
    pub bs_spacing_over_wavelength: f64,
    pub ris_spacing_over_wavelength: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            bs_antennas: 8,
            ris_elements: 32,
            active_elements: 8,
            active_policy: ActivePolicy::EvenlySpaced,
            bs_spacing_over_wavelength: 0.5,
            ris_spacing_over_wavelength: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelConfig {
    pub paths_ub: usize,
    pub paths_ur: usize,
    pub paths_rb: usize,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self { paths_ub: 3, paths_ur: 3, paths_rb: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    /// SNR(s) the pipeline trains at; one entry per-SNR (default), several
    /// entries switch on mixed-SNR training.
    pub snrs_db: Vec<f64>,
    pub train_samples: usize,
    pub val_samples: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_initial: f64,
    pub lr_final: f64,
    /// Epochs spent at `lr_initial` (the paper's 200-of-300 split scaled).
    pub lr_switch_epoch: usize,
    pub activation_order: ActivationOrder,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            snrs_db: vec![10.0],
            train_samples: 9_000,
            val_samples: 1_000,
            epochs: 50,
            batch_size: 128,
            lr_initial: 1e-3,
            lr_final: 1e-4,
            lr_switch_epoch: 33,
            activation_order: ActivationOrder::NormThenRelu,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub snrs_db: Vec<f64>,
    /// Pilot overhead ratios r = N1/N for the ratio sweep.
    pub ratios: Vec<f64>,
    pub methods: Vec<Method>,
    /// Monte-Carlo test samples per sweep cell.
    pub mc_samples: usize,
    /// Record real wall-clock times in result rows. Off by default so the
    /// emitted CSV is byte-reproducible from (config, seed).
    pub record_timing: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            snrs_db: vec![0.0, 5.0, 10.0, 15.0, 20.0],
            ratios: vec![0.125, 0.25, 0.5],
            methods: vec![
                Method::LsDirect,
                Method::DeDnn,
                Method::LsZeroFill,
                Method::Omp,
                Method::Pipeline,
            ],
            mc_samples: 1_000,
            record_timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OmpConfig {
    /// Dictionary size as a multiple of N (2 = the usual 2x oversampling).
    pub grid_oversampling: usize,
    /// Atoms per row; 0 selects min(paths_ur * paths_rb, N1).
    pub sparsity: usize,
}

impl Default for OmpConfig {
    fn default() -> Self {
        Self { grid_oversampling: 2, sparsity: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub noise_variance: f64,
    pub out_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { seed: 7, noise_variance: 1.0, out_dir: "out".into() }
    }
}

/// Complete experiment description. The default is the desk-scale profile
/// (M = 8, N = 32, N1 = 8, 9k/1k samples, 50 epochs); [`ExperimentConfig::paper_scale`]
/// switches every parameter to its full-scale value (M = 16, N = 128,
/// N1 = 32, 90k/10k samples, 300 epochs, lr switch at 200).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub geometry: GeometryConfig,
    pub channel: ChannelConfig,
    pub training: TrainingConfig,
    pub eval: EvalConfig,
    pub omp: OmpConfig,
    pub run: RunConfig,
}

impl ExperimentConfig {
    pub fn desk_scale() -> Self {
        Self::default()
    }

    pub fn paper_scale() -> Self {
        Self {
            geometry: GeometryConfig {
                bs_antennas: 16,
                ris_elements: 128,
                active_elements: 32,
                ..GeometryConfig::default()
            },
            training: TrainingConfig {
                train_samples: 90_000,
                val_samples: 10_000,
                epochs: 300,
                lr_switch_epoch: 200,
                ..TrainingConfig::default()
            },
            eval: EvalConfig { mc_samples: 10_000, ..EvalConfig::default() },
            ..Self::default()
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: Self = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is serializable")
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        if g.bs_antennas == 0 || g.ris_elements == 0 {
            return Err(Error::Config("geometry needs at least one antenna and element".into()));
        }
        if g.active_elements == 0 || g.active_elements > g.ris_elements {
            return Err(Error::Config(format!(
                "need 1 <= N1 <= N, got N1={} N={}",
                g.active_elements, g.ris_elements
            )));
        }
        if self.eval.snrs_db.is_empty() {
            return Err(Error::Config("eval.snrs_db must be non-empty".into()));
        }
        if self.eval.mc_samples == 0 || self.training.train_samples == 0 {
            return Err(Error::Config("sample counts must be at least 1".into()));
        }
        if self
            .eval
            .ratios
            .iter()
            .any(|&r| !(r > 0.0 && r <= 1.0))
        {
            return Err(Error::Config("eval.ratios must lie in (0, 1]".into()));
        }
        if self.training.snrs_db.is_empty() {
            return Err(Error::Config("training.snrs_db must be non-empty".into()));
        }
        Ok(())
    }

    pub fn paths(&self) -> PathCounts {
        PathCounts {
            ub: self.channel.paths_ub,
            ur: self.channel.paths_ur,
            rb: self.channel.paths_rb,
        }
    }

    /// N1 for a requested overhead ratio.
    pub fn n1_for_ratio(&self, r: f64) -> usize {
        ((r * self.geometry.ris_elements as f64).round() as usize)
            .clamp(1, self.geometry.ris_elements)
    }

    /// OMP sparsity with the `0 = auto` rule resolved.
    pub fn omp_sparsity(&self, n1: usize) -> usize {
        if self.omp.sparsity > 0 {
            self.omp.sparsity.min(n1)
        } else {
            (self.channel.paths_ur * self.channel.paths_rb).min(n1)
        }
    }

    /// Training settings for one (SNR, N1) operating point.
    pub fn pipeline_settings(&self, snrs_db: Vec<f64>, n1: usize) -> PipelineSettings {
        PipelineSettings {
            m: self.geometry.bs_antennas,
            n: self.geometry.ris_elements,
            n1,
            active_policy: self.geometry.active_policy,
            bs_spacing: self.geometry.bs_spacing_over_wavelength,
            ris_spacing: self.geometry.ris_spacing_over_wavelength,
            paths: self.paths(),
            noise_variance: self.run.noise_variance,
            train_snrs_db: snrs_db,
            train_samples: self.training.train_samples,
            val_samples: self.training.val_samples,
            epochs: self.training.epochs,
            batch_size: self.training.batch_size,
            lr_initial: self.training.lr_initial,
            lr_final: self.training.lr_final,
            lr_switch_epoch: self.training.lr_switch_epoch,
            activation_order: self.training.activation_order,
            seed: self.run.seed,
        }
    }

    /// Directory name for the model trained at one (SNR, N1) point.
    pub fn model_dir_name(snr_db: f64, n1: usize) -> String {
        format!("snr{snr_db}_n1_{n1}")
    }
}
