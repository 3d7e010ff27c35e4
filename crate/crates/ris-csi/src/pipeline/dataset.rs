//! Stage dataset construction and the "RISD" dataset file format.
//!
//! Training inputs are produced exactly the way the online chain produces
//! them: the ARE stage consumes LS estimates built from the *live* DE-DNN
//! output, and the IRP stage consumes rows of the *live* ARE-DNN output, so
//! residual upstream error is part of every training distribution. Each
//! stage and split draws its own channel realizations.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ArrayGeometry, ChannelRealization, PathCounts};
use crate::error::{Error, Result};
use crate::estimators::{ls_cascaded, ls_direct};
use crate::nn::{cmat_to_real, cvec_to_real, Checkpoint, Real, Tensor};
use crate::numerics::{CVec, RngStream};
use crate::pilot::{build_schedule, transmit, ActiveSet, ReflectionSchedule};

/// Pipeline stage identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    De,
    Are,
    Irp,
}

impl Stage {
    pub fn tag(self) -> u32 {
        match self {
            Stage::De => 0,
            Stage::Are => 1,
            Stage::Irp => 2,
        }
    }

    pub fn from_tag(tag: u32) -> Result<Self> {
        Ok(match tag {
            0 => Stage::De,
            1 => Stage::Are,
            2 => Stage::Irp,
            other => return Err(Error::Format(format!("unknown stage tag {other}"))),
        })
    }
}

/// Which split of the data a stream belongs to; keeps train/val/test
/// randomness disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    fn id(self) -> u16 {
        match self {
            Split::Train => 0,
            Split::Val => 1,
            Split::Test => 2,
        }
    }
}

/// Physical link configuration shared by dataset builders and sweeps.
#[derive(Debug, Clone)]
pub struct LinkSetup {
    pub bs: ArrayGeometry,
    pub ris: ArrayGeometry,
    pub paths: PathCounts,
    pub active: ActiveSet,
    pub noise_variance: f64,
}

impl LinkSetup {
    pub fn schedule(&self) -> Result<Arc<ReflectionSchedule>> {
        Ok(Arc::new(build_schedule(&self.active, self.ris.num_elements)?))
    }
}

/// Where the direct-channel estimate used in Eq.-(8)-style centering comes
/// from: the trained DE-DNN (production) or the ground truth (oracle tests).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectSource {
    DeDnn,
    Oracle,
}

/// Upstream checkpoints available when building a stage dataset.
#[derive(Default)]
pub struct UpstreamNets<'a, T> {
    pub de: Option<&'a Checkpoint<T>>,
    pub are: Option<&'a Checkpoint<T>>,
}

/// What to generate.
#[derive(Debug, Clone)]
pub struct DatasetRequest {
    pub stage: Stage,
    pub split: Split,
    pub n_samples: usize,
    /// One entry trains at a fixed SNR; several entries draw one per sample.
    pub snrs_db: Vec<f64>,
    pub direct_source: DirectSource,
}

/// Generation metadata persisted alongside every dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub snrs_db: Vec<f64>,
    pub active_indices: Vec<usize>,
    pub upstream_checkpoints: Vec<String>,
}

/// Input/label pairs for one training stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageDataset<T> {
    pub stage: Stage,
    pub input_shape: Vec<usize>,
    pub label_shape: Vec<usize>,
    pub inputs: Vec<T>,
    pub labels: Vec<T>,
    pub provenance: Provenance,
}

impl<T: Real> StageDataset<T> {
    pub fn len(&self) -> usize {
        let f: usize = self.input_shape.iter().product();
        self.inputs.len() / f
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_row(&self, i: usize) -> &[T] {
        let f: usize = self.input_shape.iter().product();
        &self.inputs[i * f..(i + 1) * f]
    }

    pub fn label_row(&self, i: usize) -> &[T] {
        let f: usize = self.label_shape.iter().product();
        &self.labels[i * f..(i + 1) * f]
    }

    /// Gathers the listed samples into batch tensors (inputs, labels).
    pub fn gather(&self, indices: &[usize]) -> Result<(Tensor<T>, Tensor<T>)> {
        let in_rows: Vec<&[T]> = indices.iter().map(|&i| self.input_row(i)).collect();
        let lab_rows: Vec<&[T]> = indices.iter().map(|&i| self.label_row(i)).collect();
        Ok((
            Tensor::from_rows(&self.input_shape, &in_rows)?,
            Tensor::from_rows(&self.label_shape, &lab_rows)?,
        ))
    }
}

// Stream domains within a dataset build.
const DOM_CHANNEL: u16 = 1;
const DOM_NOISE: u16 = 2;
const DOM_ROW: u16 = 5;
const DOM_SNR: u16 = 6;

fn ctx_of(stage: Stage, split: Split) -> u16 {
    stage.tag() as u16 * 4 + split.id()
}

/// Raw per-sample material shared by all three stages.
struct RawSample {
    truth: Arc<ChannelRealization>,
    h_ub_ls: CVec,
    power: f64,
    obs: crate::pilot::PilotObservation,
}

/// Builds the input/label pairs for one stage.
///
/// DE pairs are ⟨ĥ_UB,ls, h_UB⟩; ARE pairs are ⟨Ĝ_A,ls, G_A⟩ with the LS
/// estimate centered on the live DE output; IRP pairs are ⟨ĝ_A,m,dnn,
/// g_B,m⟩ with m drawn uniformly per sample and the input taken verbatim
/// from the ARE output rows.
pub fn build_stage_dataset<T: Real>(
    req: &DatasetRequest,
    link: &LinkSetup,
    upstream: &UpstreamNets<'_, T>,
    stream: RngStream,
) -> Result<StageDataset<T>> {
    use rand::Rng;

    match req.stage {
        Stage::De => {}
        Stage::Are => {
            if req.direct_source == DirectSource::DeDnn && upstream.de.is_none() {
                return Err(Error::State(
                    "ARE dataset needs a trained DE checkpoint (or an oracle direct source)".into(),
                ));
            }
        }
        Stage::Irp => {
            if req.direct_source == DirectSource::DeDnn && upstream.de.is_none() {
                return Err(Error::State(
                    "IRP dataset needs a trained DE checkpoint (or an oracle direct source)".into(),
                ));
            }
            if upstream.are.is_none() {
                return Err(Error::State("IRP dataset needs a trained ARE checkpoint".into()));
            }
        }
    }
    if req.snrs_db.is_empty() {
        return Err(Error::Parameter("dataset needs at least one SNR".into()));
    }
    if req.n_samples == 0 {
        return Err(Error::Parameter("dataset needs at least one sample".into()));
    }
    let n = req.n_samples;
    let m = link.bs.num_elements;
    let n1 = link.active.n1();
    let n2 = link.active.n2();
    let ctx = ctx_of(req.stage, req.split);
    let schedule = link.schedule()?;

    // Phase 1: independent per-sample channel draws and pilot observations.
    let raw: Vec<RawSample> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<RawSample> {
            let snr_db = if req.snrs_db.len() == 1 {
                req.snrs_db[0]
            } else {
                let mut rng = stream.derive(DOM_SNR, ctx, i as u64).rng();
                req.snrs_db[rng.gen_range(0..req.snrs_db.len())]
            };
            let power = 10f64.powf(snr_db / 10.0) * link.noise_variance.max(f64::MIN_POSITIVE);
            let truth = Arc::new(ChannelRealization::draw(
                stream.derive(DOM_CHANNEL, ctx, i as u64),
                link.bs,
                link.ris,
                link.paths,
            )?);
            let obs = transmit(
                truth.clone(),
                schedule.clone(),
                power,
                link.noise_variance,
                stream.derive(DOM_NOISE, ctx, i as u64),
            )?;
            let h_ub_ls = ls_direct(&obs)?.h_hat;
            Ok(RawSample { truth, h_ub_ls, power, obs })
        })
        .collect::<Result<Vec<_>>>()?;

    let provenance = Provenance {
        seed: stream.seed(),
        snrs_db: req.snrs_db.clone(),
        active_indices: link.active.indices().to_vec(),
        upstream_checkpoints: Vec::new(),
    };

    match req.stage {
        Stage::De => {
            let mut inputs = Vec::with_capacity(n * 2 * m);
            let mut labels = Vec::with_capacity(n * 2 * m);
            for s in &raw {
                inputs.extend(cvec_to_real::<T>(&s.h_ub_ls));
                labels.extend(cvec_to_real::<T>(&s.truth.h_ub));
            }
            Ok(StageDataset {
                stage: Stage::De,
                input_shape: vec![2 * m],
                label_shape: vec![2 * m],
                inputs,
                labels,
                provenance,
            })
        }
        Stage::Are => {
            let ls_inputs = cascaded_ls_inputs(&raw, req.direct_source, upstream.de, m, n1)?;
            let mut labels = Vec::with_capacity(n * m * n1 * 2);
            for s in &raw {
                let g_a = s.truth.g.select_cols(link.active.indices())?;
                labels.extend(cmat_to_real::<T>(&g_a));
            }
            Ok(StageDataset {
                stage: Stage::Are,
                input_shape: vec![m, n1, 2],
                label_shape: vec![m, n1, 2],
                inputs: ls_inputs.data().to_vec(),
                labels,
                provenance,
            })
        }
        Stage::Irp => {
            let ls_inputs = cascaded_ls_inputs(&raw, req.direct_source, upstream.de, m, n1)?;
            let are = upstream.are.expect("checked above");
            let g_a_dnn = forward_chunked(are, &ls_inputs)?;

            let mut inputs = Vec::with_capacity(n * 2 * n1);
            let mut labels = Vec::with_capacity(n * 2 * n2);
            let inactive = link.active.inactive_indices();
            for (i, s) in raw.iter().enumerate() {
                let mut rng = stream.derive(DOM_ROW, ctx, i as u64).rng();
                let row = rng.gen_range(0..m);
                extract_packed_row(g_a_dnn.sample(i), row, n1, &mut inputs);
                // Label: row of G_B packed as [re; im].
                for &col in &inactive {
                    labels.push(T::from_f64(s.truth.g.get(row, col).re));
                }
                for &col in &inactive {
                    labels.push(T::from_f64(s.truth.g.get(row, col).im));
                }
            }
            Ok(StageDataset {
                stage: Stage::Irp,
                input_shape: vec![2 * n1],
                label_shape: vec![2 * n2],
                inputs,
                labels,
                provenance,
            })
        }
    }
}

/// Ĝ_A,ls inputs for all samples, packed as a [n, M, N1, 2] tensor.
fn cascaded_ls_inputs<T: Real>(
    raw: &[RawSample],
    source: DirectSource,
    de: Option<&Checkpoint<T>>,
    m: usize,
    n1: usize,
) -> Result<Tensor<T>> {
    let n = raw.len();
    let h_estimates: Vec<CVec> = match source {
        DirectSource::Oracle => raw.iter().map(|s| s.truth.h_ub.clone()).collect(),
        DirectSource::DeDnn => {
            let de = de.ok_or_else(|| Error::State("DE checkpoint missing".into()))?;
            let packed: Vec<Vec<T>> = raw.iter().map(|s| cvec_to_real::<T>(&s.h_ub_ls)).collect();
            let rows: Vec<&[T]> = packed.iter().map(|r| r.as_slice()).collect();
            let input = Tensor::from_rows(&[2 * m], &rows)?;
            let output = forward_chunked(de, &input)?;
            (0..n)
                .map(|i| crate::nn::real_to_cvec(output.sample(i)))
                .collect::<Result<Vec<_>>>()?
        }
    };

    let mut data = Vec::with_capacity(n * m * n1 * 2);
    for (s, h_est) in raw.iter().zip(&h_estimates) {
        let est = ls_cascaded(&s.obs, h_est)?;
        debug_assert_eq!(est.g_hat_active.rows(), m);
        let _ = s.power;
        data.extend(cmat_to_real::<T>(&est.g_hat_active));
    }
    Tensor::new(vec![n, m, n1, 2], data)
}

/// Runs an inference forward pass in fixed-size chunks (bounded memory,
/// identical results to any other chunking since BN uses running stats).
pub(crate) fn forward_chunked<T: Real>(
    ckpt: &Checkpoint<T>,
    input: &Tensor<T>,
) -> Result<Tensor<T>> {
    const CHUNK: usize = 512;
    let n = input.batch();
    let feat = input.feature_len();
    let sample_shape = input.sample_shape().to_vec();
    let mut out_data: Vec<T> = Vec::new();
    let mut out_shape: Vec<usize> = Vec::new();
    let mut lo = 0;
    while lo < n {
        let hi = (lo + CHUNK).min(n);
        let chunk = Tensor::new(
            std::iter::once(hi - lo).chain(sample_shape.iter().copied()).collect(),
            input.data()[lo * feat..hi * feat].to_vec(),
        )?;
        let out = ckpt.forward(&chunk)?;
        if out_shape.is_empty() {
            out_shape = out.sample_shape().to_vec();
            out_data.reserve(n * out.feature_len());
        }
        out_data.extend_from_slice(out.data());
        lo = hi;
    }
    Tensor::new(std::iter::once(n).chain(out_shape.iter().copied()).collect(), out_data)
}

/// Copies row `row` of a packed [M, N1, 2] sample into `out` as the
/// `[re; im]` concatenation, preserving the stored scalar values exactly.
pub(crate) fn extract_packed_row<T: Real>(
    sample: &[T],
    row: usize,
    n1: usize,
    out: &mut Vec<T>,
) {
    let base = row * n1 * 2;
    for k in 0..n1 {
        out.push(sample[base + 2 * k]);
    }
    for k in 0..n1 {
        out.push(sample[base + 2 * k + 1]);
    }
}

// ------------------------------------------------------------- file format

pub const RISD_MAGIC: &[u8; 4] = b"RISD";
pub const RISD_VERSION: u32 = 1;

/// Writes the dataset (binary) plus a `<path>.meta.json` sidecar.
pub fn save_dataset(ds: &StageDataset<f32>, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(RISD_MAGIC)?;
    w.write_all(&RISD_VERSION.to_le_bytes())?;
    w.write_all(&ds.stage.tag().to_le_bytes())?;
    w.write_all(&(ds.len() as u32).to_le_bytes())?;
    for shape in [&ds.input_shape, &ds.label_shape] {
        w.write_all(&(shape.len() as u32).to_le_bytes())?;
        for &d in shape.iter() {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
    }
    for v in ds.inputs.iter().chain(ds.labels.iter()) {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;

    let sidecar = sidecar_path(path);
    let meta = SidecarMeta {
        stage: ds.stage,
        n_samples: ds.len(),
        input_shape: ds.input_shape.clone(),
        label_shape: ds.label_shape.clone(),
        provenance: ds.provenance.clone(),
    };
    std::fs::write(&sidecar, serde_json::to_string_pretty(&meta).map_err(io_err)?)?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<StageDataset<f32>> {
    let file = File::open(path)
        .map_err(|e| Error::State(format!("missing dataset {}: {e}", path.display())))?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != RISD_MAGIC {
        return Err(Error::Format(format!("{}: bad magic, expected \"RISD\"", path.display())));
    }
    let version = read_u32(&mut r)?;
    if version != RISD_VERSION {
        return Err(Error::Format(format!("{}: unsupported version {version}", path.display())));
    }
    let stage = Stage::from_tag(read_u32(&mut r)?)?;
    let n = read_u32(&mut r)? as usize;
    let mut shapes = Vec::new();
    for _ in 0..2 {
        let rank = read_u32(&mut r)? as usize;
        let mut s = Vec::with_capacity(rank);
        for _ in 0..rank {
            s.push(read_u32(&mut r)? as usize);
        }
        shapes.push(s);
    }
    let input_shape = shapes.remove(0);
    let label_shape = shapes.remove(0);
    let in_len: usize = n * input_shape.iter().product::<usize>();
    let lab_len: usize = n * label_shape.iter().product::<usize>();
    let inputs = read_f32s(&mut r, in_len, path)?;
    let labels = read_f32s(&mut r, lab_len, path)?;

    let sidecar = sidecar_path(path);
    let meta_text = std::fs::read_to_string(&sidecar)
        .map_err(|e| Error::State(format!("missing dataset sidecar {}: {e}", sidecar.display())))?;
    let meta: SidecarMeta = serde_json::from_str(&meta_text)
        .map_err(|e| Error::Format(format!("{}: {e}", sidecar.display())))?;
    if meta.stage != stage || meta.input_shape != input_shape || meta.label_shape != label_shape {
        return Err(Error::Format(format!(
            "{}: sidecar metadata disagrees with the binary header",
            sidecar.display()
        )));
    }

    Ok(StageDataset {
        stage,
        input_shape,
        label_shape,
        inputs,
        labels,
        provenance: meta.provenance,
    })
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_os_string();
    os.push(".meta.json");
    std::path::PathBuf::from(os)
}

#[derive(Serialize, Deserialize)]
struct SidecarMeta {
    stage: Stage,
    n_samples: usize,
    input_shape: Vec<usize>,
    label_shape: Vec<usize>,
    provenance: Provenance,
}

fn io_err(e: serde_json::Error) -> Error {
    Error::Format(e.to_string())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated dataset: {e}")))?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f32s(r: &mut impl Read, n: usize, path: &Path) -> Result<Vec<f32>> {
    let mut bytes = vec![0u8; n * 4];
    r.read_exact(&mut bytes)
        .map_err(|e| Error::Format(format!("{}: truncated arrays: {e}", path.display())))?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}
