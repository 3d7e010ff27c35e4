//! Batched real tensor for layer inputs/outputs.
//!
//! The first axis is always the batch; per-sample payloads are `[D]` for
//! dense layers and `[H, W, C]` (channels last) for convolutional layers.

use crate::error::{Error, Result};
use crate::nn::real::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let need: usize = shape.iter().product();
        if data.len() != need {
            return Err(Error::Shape(format!(
                "tensor {shape:?} needs {need} entries, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![T::zero(); n] }
    }

    /// Stacks per-sample rows (all of `sample_shape`) into a batch tensor.
    pub fn from_rows(sample_shape: &[usize], rows: &[&[T]]) -> Result<Self> {
        let feat: usize = sample_shape.iter().product();
        let mut data = Vec::with_capacity(feat * rows.len());
        for row in rows {
            if row.len() != feat {
                return Err(Error::Shape(format!(
                    "sample of {} entries does not match shape {sample_shape:?}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        let mut shape = vec![rows.len()];
        shape.extend_from_slice(sample_shape);
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    /// Entries per sample.
    pub fn feature_len(&self) -> usize {
        self.shape[1..].iter().product()
    }

    /// Per-sample shape (everything after the batch axis).
    pub fn sample_shape(&self) -> &[usize] {
        &self.shape[1..]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn sample(&self, b: usize) -> &[T] {
        let f = self.feature_len();
        &self.data[b * f..(b + 1) * f]
    }

    pub fn sample_mut(&mut self, b: usize) -> &mut [T] {
        let f = self.feature_len();
        &mut self.data[b * f..(b + 1) * f]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Reinterprets the per-sample shape without moving data.
    pub fn with_sample_shape(mut self, sample_shape: &[usize]) -> Result<Self> {
        let feat: usize = sample_shape.iter().product();
        if feat != self.feature_len() {
            return Err(Error::Shape(format!(
                "cannot view {:?} samples as {sample_shape:?}",
                self.sample_shape()
            )));
        }
        let b = self.batch();
        self.shape = std::iter::once(b).chain(sample_shape.iter().copied()).collect();
        Ok(self)
    }
}
