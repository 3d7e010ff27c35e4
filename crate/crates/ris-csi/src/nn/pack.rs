//! Complex/real packing at the simulation ↔ network boundary.
//!
//! Vectors pack as the `[re; im]` concatenation (length 2n). Matrices pack
//! as two feature maps of shape `M x N1 x 2`, channel 0 real, channel 1
//! imaginary. Both directions are exact when the values are representable
//! in the target scalar, so they round-trip bit-for-bit.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::nn::real::Real;
use crate::numerics::{CMat, CVec, RTensor3};

/// `[re(v); im(v)]` of length `2n`.
pub fn cvec_to_real<T: Real>(v: &CVec) -> Vec<T> {
    let n = v.len();
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        out.push(T::from_f64(v.get(i).re));
    }
    for i in 0..n {
        out.push(T::from_f64(v.get(i).im));
    }
    out
}

pub fn real_to_cvec<T: Real>(t: &[T]) -> Result<CVec> {
    if t.len() % 2 != 0 {
        return Err(Error::Shape(format!(
            "packed vector length must be even, got {}",
            t.len()
        )));
    }
    let n = t.len() / 2;
    Ok(CVec::from_fn(n, |i| {
        Complex64::new(t[i].into_f64(), t[n + i].into_f64())
    }))
}

/// Flat `[row][col][channel]` packing of an M x N1 matrix (length M·N1·2).
pub fn cmat_to_real<T: Real>(a: &CMat) -> Vec<T> {
    let mut out = Vec::with_capacity(a.rows() * a.cols() * 2);
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            let z = a.get(i, j);
            out.push(T::from_f64(z.re));
            out.push(T::from_f64(z.im));
        }
    }
    out
}

pub fn real_to_cmat<T: Real>(t: &[T], rows: usize, cols: usize) -> Result<CMat> {
    if t.len() != rows * cols * 2 {
        return Err(Error::Shape(format!(
            "packed matrix of {rows}x{cols} needs {} entries, got {}",
            rows * cols * 2,
            t.len()
        )));
    }
    Ok(CMat::from_fn(rows, cols, |i, j| {
        let off = (i * cols + j) * 2;
        Complex64::new(t[off].into_f64(), t[off + 1].into_f64())
    }))
}

/// The matrix packing as an explicit rank-3 tensor (map 0 real, map 1 imag).
pub fn cmat_to_rtensor3(a: &CMat) -> RTensor3 {
    RTensor3::new((a.rows(), a.cols(), 2), cmat_to_real::<f32>(a))
        .expect("packing always produces a consistent tensor")
}

pub fn rtensor3_to_cmat(t: &RTensor3) -> Result<CMat> {
    let (rows, cols, ch) = t.dims();
    if ch != 2 {
        return Err(Error::Shape(format!("expected 2 channels, got {ch}")));
    }
    real_to_cmat(t.entries(), rows, cols)
}
