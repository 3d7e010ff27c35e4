//! Per-layer forward and backward math.
//!
//! Dense layers run straight through the accumulate-GEMM; convolutions are
//! lowered to it per sample via im2col/col2im. Batch-norm statistics are
//! accumulated in `f64` regardless of the engine scalar. Parallel sections
//! either write disjoint per-sample slices or reduce fixed-order chunk
//! partials, so results do not depend on thread scheduling.

use rayon::prelude::*;

use crate::nn::kernels::{axpy, gemm_accum, transpose_into};
use crate::nn::real::Real;
use crate::nn::tensor::Tensor;

pub(crate) const BN_EPSILON: f64 = 1e-5;
pub(crate) const BN_MOMENTUM: f64 = 0.9;

/// Number of chunks used for deterministic parallel reductions.
const REDUCE_CHUNKS: usize = 8;

fn chunk_ranges(batch: usize) -> Vec<(usize, usize)> {
    let size = batch.div_ceil(REDUCE_CHUNKS).max(1);
    (0..batch)
        .step_by(size)
        .map(|lo| (lo, (lo + size).min(batch)))
        .collect()
}

// ---------------------------------------------------------------- dense

pub(crate) fn dense_forward<T: Real>(
    w: &[T],
    b: &[T],
    input: &Tensor<T>,
    outputs: usize,
) -> Tensor<T> {
    let batch = input.batch();
    let inputs = input.feature_len();
    let mut out = Tensor::zeros(vec![batch, outputs]);
    const ROWS: usize = 64;
    out.data_mut()
        .par_chunks_mut(ROWS * outputs)
        .zip(input.data().par_chunks(ROWS * inputs))
        .for_each(|(o_rows, x_rows)| {
            let rows = o_rows.len() / outputs;
            for r in 0..rows {
                o_rows[r * outputs..(r + 1) * outputs].copy_from_slice(b);
            }
            gemm_accum(x_rows, w, o_rows, rows, inputs, outputs);
        });
    out
}

pub(crate) fn dense_backward<T: Real>(
    w: &[T],
    input: &Tensor<T>,
    grad_out: &Tensor<T>,
    inputs: usize,
    outputs: usize,
) -> (Tensor<T>, Vec<T>, Vec<T>) {
    let batch = input.batch();

    // dX = dY · Wᵀ
    let mut w_t = vec![T::zero(); inputs * outputs];
    transpose_into(w, &mut w_t, inputs, outputs);
    let mut grad_in = Tensor::zeros(vec![batch, inputs]);
    const ROWS: usize = 64;
    grad_in
        .data_mut()
        .par_chunks_mut(ROWS * inputs)
        .zip(grad_out.data().par_chunks(ROWS * outputs))
        .for_each(|(gx_rows, gy_rows)| {
            let rows = gx_rows.len() / inputs;
            gemm_accum(gy_rows, &w_t, gx_rows, rows, outputs, inputs);
        });

    // dW = Xᵀ · dY and db = column sums of dY, chunked deterministically.
    let partials: Vec<(Vec<T>, Vec<T>)> = chunk_ranges(batch)
        .into_par_iter()
        .map(|(lo, hi)| {
            let rows = hi - lo;
            let mut x_t = vec![T::zero(); rows * inputs];
            transpose_into(
                &input.data()[lo * inputs..hi * inputs],
                &mut x_t,
                rows,
                inputs,
            );
            let gy = &grad_out.data()[lo * outputs..hi * outputs];
            let mut dw = vec![T::zero(); inputs * outputs];
            gemm_accum(&x_t, gy, &mut dw, inputs, rows, outputs);
            let mut db = vec![T::zero(); outputs];
            for r in 0..rows {
                axpy(&mut db, T::one(), &gy[r * outputs..(r + 1) * outputs]);
            }
            (dw, db)
        })
        .collect();

    let mut dw = vec![T::zero(); inputs * outputs];
    let mut db = vec![T::zero(); outputs];
    for (pw, pb) in partials {
        axpy(&mut dw, T::one(), &pw);
        axpy(&mut db, T::one(), &pb);
    }
    (grad_in, dw, db)
}

// ------------------------------------------------------------------ conv

pub(crate) struct ConvDims {
    pub kh: usize,
    pub kw: usize,
    pub cin: usize,
    pub cout: usize,
    pub h: usize,
    pub w: usize,
}

impl ConvDims {
    fn pixels(&self) -> usize {
        self.h * self.w
    }

    fn patch_len(&self) -> usize {
        self.kh * self.kw * self.cin
    }
}

/// Gathers zero-padded 3x3-style patches: row p of `patches` holds the
/// receptive field of output pixel p, tap-major then channel.
fn im2col<T: Real>(x: &[T], patches: &mut [T], d: &ConvDims) {
    let (ph, pw) = (d.kh / 2, d.kw / 2);
    let cin = d.cin;
    let mut dst = 0usize;
    for y in 0..d.h {
        for xx in 0..d.w {
            for dy in 0..d.kh {
                let sy = (y + dy).wrapping_sub(ph);
                for dx in 0..d.kw {
                    let sx = (xx + dx).wrapping_sub(pw);
                    let out = &mut patches[dst..dst + cin];
                    if sy < d.h && sx < d.w {
                        let src = (sy * d.w + sx) * cin;
                        out.copy_from_slice(&x[src..src + cin]);
                    } else {
                        out.fill(T::zero());
                    }
                    dst += cin;
                }
            }
        }
    }
}

/// Scatter-adds patch-space gradients back onto the input grid.
fn col2im_add<T: Real>(patches: &[T], gx: &mut [T], d: &ConvDims) {
    let (ph, pw) = (d.kh / 2, d.kw / 2);
    let cin = d.cin;
    let mut src = 0usize;
    for y in 0..d.h {
        for xx in 0..d.w {
            for dy in 0..d.kh {
                let sy = (y + dy).wrapping_sub(ph);
                for dx in 0..d.kw {
                    let sx = (xx + dx).wrapping_sub(pw);
                    if sy < d.h && sx < d.w {
                        let dst = (sy * d.w + sx) * cin;
                        axpy(&mut gx[dst..dst + cin], T::one(), &patches[src..src + cin]);
                    }
                    src += cin;
                }
            }
        }
    }
}

pub(crate) fn conv_forward<T: Real>(
    weights: &[T],
    bias: &[T],
    input: &Tensor<T>,
    d: &ConvDims,
) -> Tensor<T> {
    let batch = input.batch();
    let feat_in = input.feature_len();
    let feat_out = d.pixels() * d.cout;
    let mut out = Tensor::zeros(vec![batch, d.h, d.w, d.cout]);
    out.data_mut()
        .par_chunks_mut(feat_out)
        .zip(input.data().par_chunks(feat_in))
        .for_each_init(
            || vec![T::zero(); d.pixels() * d.patch_len()],
            |patches, (o_s, x_s)| {
                im2col(x_s, patches, d);
                for p in 0..d.pixels() {
                    o_s[p * d.cout..(p + 1) * d.cout].copy_from_slice(bias);
                }
                gemm_accum(patches, weights, o_s, d.pixels(), d.patch_len(), d.cout);
            },
        );
    out
}

pub(crate) fn conv_backward<T: Real>(
    weights: &[T],
    input: &Tensor<T>,
    grad_out: &Tensor<T>,
    d: &ConvDims,
) -> (Tensor<T>, Vec<T>, Vec<T>) {
    let batch = input.batch();
    let feat_in = input.feature_len();
    let feat_out = grad_out.feature_len();
    let wlen = d.patch_len() * d.cout;

    // dX = col2im(dY · Wᵀ)
    let mut w_t = vec![T::zero(); wlen];
    transpose_into(weights, &mut w_t, d.patch_len(), d.cout);
    let mut grad_in = Tensor::zeros(vec![batch, d.h, d.w, d.cin]);
    grad_in
        .data_mut()
        .par_chunks_mut(feat_in)
        .zip(grad_out.data().par_chunks(feat_out))
        .for_each_init(
            || vec![T::zero(); d.pixels() * d.patch_len()],
            |dpatches, (gx_s, gy_s)| {
                dpatches.fill(T::zero());
                gemm_accum(gy_s, &w_t, dpatches, d.pixels(), d.cout, d.patch_len());
                col2im_add(dpatches, gx_s, d);
            },
        );

    // dW = Σ_samples patchesᵀ · dY, chunked deterministically.
    let partials: Vec<(Vec<T>, Vec<T>)> = chunk_ranges(batch)
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut patches = vec![T::zero(); d.pixels() * d.patch_len()];
            let mut patches_t = vec![T::zero(); d.pixels() * d.patch_len()];
            let mut dw = vec![T::zero(); wlen];
            let mut db = vec![T::zero(); d.cout];
            for s in lo..hi {
                let x_s = &input.data()[s * feat_in..(s + 1) * feat_in];
                let gy_s = &grad_out.data()[s * feat_out..(s + 1) * feat_out];
                im2col(x_s, &mut patches, d);
                transpose_into(&patches, &mut patches_t, d.pixels(), d.patch_len());
                gemm_accum(&patches_t, gy_s, &mut dw, d.patch_len(), d.pixels(), d.cout);
                for p in 0..d.pixels() {
                    axpy(&mut db, T::one(), &gy_s[p * d.cout..(p + 1) * d.cout]);
                }
            }
            (dw, db)
        })
        .collect();

    let mut dw = vec![T::zero(); wlen];
    let mut db = vec![T::zero(); d.cout];
    for (pw_, pb) in partials {
        axpy(&mut dw, T::one(), &pw_);
        axpy(&mut db, T::one(), &pb);
    }
    (grad_in, dw, db)
}

// ------------------------------------------------------------ batch norm

pub(crate) struct BnTrainOutput<T> {
    pub output: Tensor<T>,
    pub xhat: Tensor<T>,
    pub inv_std: Vec<f64>,
    pub batch_mean: Vec<f64>,
    pub batch_var: Vec<f64>,
}

/// Train-mode batch norm: normalize with batch statistics (two-pass, f64).
pub(crate) fn bn_forward_train<T: Real>(
    gamma: &[T],
    beta: &[T],
    input: &Tensor<T>,
) -> BnTrainOutput<T> {
    let f = *input.shape().last().unwrap();
    let rows = input.data().len() / f;
    let n = rows as f64;

    let mut mean = vec![0.0f64; f];
    for row in input.data().chunks(f) {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v.into_f64();
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0f64; f];
    for row in input.data().chunks(f) {
        for (k, &v) in row.iter().enumerate() {
            let d = v.into_f64() - mean[k];
            var[k] += d * d;
        }
    }
    for v in &mut var {
        *v /= n;
    }
    let inv_std: Vec<f64> = var.iter().map(|&v| 1.0 / (v + BN_EPSILON).sqrt()).collect();

    let mut xhat = Tensor::zeros(input.shape().to_vec());
    let mut output = Tensor::zeros(input.shape().to_vec());
    for ((xh_row, out_row), in_row) in xhat
        .data_mut()
        .chunks_mut(f)
        .zip(output.data_mut().chunks_mut(f))
        .zip(input.data().chunks(f))
    {
        for k in 0..f {
            let h = (in_row[k].into_f64() - mean[k]) * inv_std[k];
            xh_row[k] = T::from_f64(h);
            out_row[k] = gamma[k] * xh_row[k] + beta[k];
        }
    }
    BnTrainOutput { output, xhat, inv_std, batch_mean: mean, batch_var: var }
}

/// Infer-mode batch norm: per-feature affine map from running statistics.
pub(crate) fn bn_forward_infer<T: Real>(
    gamma: &[T],
    beta: &[T],
    running_mean: &[T],
    running_var: &[T],
    input: &Tensor<T>,
) -> Tensor<T> {
    let f = *input.shape().last().unwrap();
    let scale: Vec<T> = (0..f)
        .map(|k| {
            let inv = 1.0 / (running_var[k].into_f64() + BN_EPSILON).sqrt();
            T::from_f64(gamma[k].into_f64() * inv)
        })
        .collect();
    let shift: Vec<T> = (0..f)
        .map(|k| T::from_f64(beta[k].into_f64() - scale[k].into_f64() * running_mean[k].into_f64()))
        .collect();
    let mut out = Tensor::zeros(input.shape().to_vec());
    for (o_row, in_row) in out.data_mut().chunks_mut(f).zip(input.data().chunks(f)) {
        for k in 0..f {
            o_row[k] = scale[k] * in_row[k] + shift[k];
        }
    }
    out
}

pub(crate) fn bn_backward<T: Real>(
    gamma: &[T],
    xhat: &Tensor<T>,
    inv_std: &[f64],
    grad_out: &Tensor<T>,
) -> (Tensor<T>, Vec<T>, Vec<T>) {
    let f = *xhat.shape().last().unwrap();
    let rows = xhat.data().len() / f;
    let n = rows as f64;

    let mut sum_g = vec![0.0f64; f];
    let mut sum_gx = vec![0.0f64; f];
    for (g_row, x_row) in grad_out.data().chunks(f).zip(xhat.data().chunks(f)) {
        for k in 0..f {
            let g = g_row[k].into_f64();
            sum_g[k] += g;
            sum_gx[k] += g * x_row[k].into_f64();
        }
    }

    let mut grad_in = Tensor::zeros(xhat.shape().to_vec());
    for (gx_row, (g_row, x_row)) in grad_in
        .data_mut()
        .chunks_mut(f)
        .zip(grad_out.data().chunks(f).zip(xhat.data().chunks(f)))
    {
        for k in 0..f {
            let g = g_row[k].into_f64();
            let centered = g - sum_g[k] / n - x_row[k].into_f64() * sum_gx[k] / n;
            gx_row[k] = T::from_f64(gamma[k].into_f64() * inv_std[k] * centered);
        }
    }
    let dgamma: Vec<T> = sum_gx.iter().map(|&v| T::from_f64(v)).collect();
    let dbeta: Vec<T> = sum_g.iter().map(|&v| T::from_f64(v)).collect();
    (grad_in, dgamma, dbeta)
}

// ----------------------------------------------------------------- relu

pub(crate) fn relu_forward<T: Real>(input: &Tensor<T>) -> Tensor<T> {
    let mut out = input.clone();
    for v in out.data_mut() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
    out
}

pub(crate) fn relu_backward<T: Real>(input: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    let mut grad_in = grad_out.clone();
    for (g, &x) in grad_in.data_mut().iter_mut().zip(input.data()) {
        if x <= T::zero() {
            *g = T::zero();
        }
    }
    grad_in
}

// ------------------------------------------------------------- residual

pub(crate) fn residual_subtract_forward<T: Real>(
    network_input: &Tensor<T>,
    branch: &Tensor<T>,
) -> Tensor<T> {
    let mut out = network_input.clone();
    for (o, &b) in out.data_mut().iter_mut().zip(branch.data()) {
        *o -= b;
    }
    out
}

pub(crate) fn residual_subtract_backward<T: Real>(grad_out: &Tensor<T>) -> Tensor<T> {
    let mut g = grad_out.clone();
    for v in g.data_mut() {
        *v = -*v;
    }
    g
}
