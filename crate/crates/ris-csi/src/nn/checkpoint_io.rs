//! Binary checkpoint format ("RCKP").
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   b"RCKP"
//! u32     format version (currently 1)
//! u32     input-shape rank, then that many u32 dims
//! u32     layer count, then per layer a u32 kind tag and its shape params:
//!           0 = dense     (u32 inputs, u32 outputs)
//!           1 = conv-zp   (u32 kh, u32 kw, u32 cin, u32 cout)
//!           2 = batchnorm (u32 features)
//!           3 = relu
//!           4 = residual-subtract-input
//! f32[]   parameter arrays in declaration order:
//!           dense: w[in][out], b;  conv: w[kh][kw][cin][cout], b;
//!           batchnorm: gamma, beta, then its running mean and variance
//! ```
//!
//! Round-trips are bit-exact: save → load → save reproduces identical bytes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::network::{Checkpoint, LayerParams};
use crate::nn::spec::{LayerSpec, NetworkSpec};

pub const RCKP_MAGIC: &[u8; 4] = b"RCKP";
pub const RCKP_VERSION: u32 = 1;

pub fn save_checkpoint(ckpt: &Checkpoint<f32>, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(RCKP_MAGIC)?;
    w.write_all(&RCKP_VERSION.to_le_bytes())?;

    w.write_all(&(ckpt.spec.input_shape.len() as u32).to_le_bytes())?;
    for &d in &ckpt.spec.input_shape {
        w.write_all(&(d as u32).to_le_bytes())?;
    }

    w.write_all(&(ckpt.spec.layers.len() as u32).to_le_bytes())?;
    for layer in &ckpt.spec.layers {
        match layer {
            LayerSpec::Dense { inputs, outputs } => {
                w.write_all(&0u32.to_le_bytes())?;
                w.write_all(&(*inputs as u32).to_le_bytes())?;
                w.write_all(&(*outputs as u32).to_le_bytes())?;
            }
            LayerSpec::ConvZp { kernel, in_channels, out_channels } => {
                w.write_all(&1u32.to_le_bytes())?;
                for v in [kernel.0, kernel.1, *in_channels, *out_channels] {
                    w.write_all(&(v as u32).to_le_bytes())?;
                }
            }
            LayerSpec::BatchNorm { features } => {
                w.write_all(&2u32.to_le_bytes())?;
                w.write_all(&(*features as u32).to_le_bytes())?;
            }
            LayerSpec::Relu => w.write_all(&3u32.to_le_bytes())?,
            LayerSpec::ResidualSubtractInput => w.write_all(&4u32.to_le_bytes())?,
        }
    }

    for params in &ckpt.params {
        match params {
            LayerParams::Dense { w: wt, b } | LayerParams::Conv { w: wt, b } => {
                write_f32s(&mut w, wt)?;
                write_f32s(&mut w, b)?;
            }
            LayerParams::BatchNorm { gamma, beta, running_mean, running_var } => {
                write_f32s(&mut w, gamma)?;
                write_f32s(&mut w, beta)?;
                write_f32s(&mut w, running_mean)?;
                write_f32s(&mut w, running_var)?;
            }
            LayerParams::Stateless => {}
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint<f32>> {
    let file = File::open(path)
        .map_err(|e| Error::State(format!("missing checkpoint {}: {e}", path.display())))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != RCKP_MAGIC {
        return Err(Error::Format(format!(
            "{}: bad magic {magic:?}, expected \"RCKP\"",
            path.display()
        )));
    }
    let version = read_u32(&mut r)?;
    if version != RCKP_VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported checkpoint version {version}",
            path.display()
        )));
    }

    let rank = read_u32(&mut r)? as usize;
    let mut input_shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        input_shape.push(read_u32(&mut r)? as usize);
    }

    let n_layers = read_u32(&mut r)? as usize;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let tag = read_u32(&mut r)?;
        layers.push(match tag {
            0 => LayerSpec::Dense {
                inputs: read_u32(&mut r)? as usize,
                outputs: read_u32(&mut r)? as usize,
            },
            1 => LayerSpec::ConvZp {
                kernel: (read_u32(&mut r)? as usize, read_u32(&mut r)? as usize),
                in_channels: read_u32(&mut r)? as usize,
                out_channels: read_u32(&mut r)? as usize,
            },
            2 => LayerSpec::BatchNorm { features: read_u32(&mut r)? as usize },
            3 => LayerSpec::Relu,
            4 => LayerSpec::ResidualSubtractInput,
            other => {
                return Err(Error::Format(format!(
                    "{}: unknown layer tag {other}",
                    path.display()
                )))
            }
        });
    }
    let spec = NetworkSpec::new(layers, input_shape)
        .map_err(|e| Error::Format(format!("{}: inconsistent spec: {e}", path.display())))?;

    let mut params = Vec::with_capacity(n_layers);
    for layer in &spec.layers {
        params.push(match layer {
            LayerSpec::Dense { inputs, outputs } => LayerParams::Dense {
                w: read_f32s(&mut r, inputs * outputs)?,
                b: read_f32s(&mut r, *outputs)?,
            },
            LayerSpec::ConvZp { kernel, in_channels, out_channels } => LayerParams::Conv {
                w: read_f32s(&mut r, kernel.0 * kernel.1 * in_channels * out_channels)?,
                b: read_f32s(&mut r, *out_channels)?,
            },
            LayerSpec::BatchNorm { features } => {
                let gamma = read_f32s(&mut r, *features)?;
                let beta = read_f32s(&mut r, *features)?;
                let running_mean = read_f32s(&mut r, *features)?;
                let running_var = read_f32s(&mut r, *features)?;
                if running_var.iter().any(|&v| !(v > 0.0)) {
                    return Err(Error::Format(format!(
                        "{}: BN running variance must be positive",
                        path.display()
                    )));
                }
                LayerParams::BatchNorm { gamma, beta, running_mean, running_var }
            }
            LayerSpec::Relu | LayerSpec::ResidualSubtractInput => LayerParams::Stateless,
        });
    }

    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Format(format!(
            "{}: trailing bytes after parameter arrays",
            path.display()
        )));
    }
    Ok(Checkpoint { spec, params })
}

fn write_f32s(w: &mut impl Write, values: &[f32]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated checkpoint: {e}")))?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f32s(r: &mut impl Read, n: usize) -> Result<Vec<f32>> {
    let mut bytes = vec![0u8; n * 4];
    r.read_exact(&mut bytes)
        .map_err(|e| Error::Format(format!("truncated checkpoint arrays: {e}")))?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}
