//! Rank-3 real tensor used at the complex/real packing boundary.

use crate::error::{Error, Result};

/// Dense rank-3 real tensor, innermost-last layout:
/// `t[i][j][k]` lives at `(i * d1 + j) * d2 + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RTensor3 {
    dims: (usize, usize, usize),
    entries: Vec<f32>,
}

impl RTensor3 {
    pub fn new(dims: (usize, usize, usize), entries: Vec<f32>) -> Result<Self> {
        let need = dims.0 * dims.1 * dims.2;
        if entries.len() != need {
            return Err(Error::Shape(format!(
                "RTensor3 {dims:?} needs {need} entries, got {}",
                entries.len()
            )));
        }
        if !entries.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric("RTensor3 entries must be finite".into()));
        }
        Ok(Self { dims, entries })
    }

    pub fn zeros(dims: (usize, usize, usize)) -> Self {
        Self { dims, entries: vec![0.0; dims.0 * dims.1 * dims.2] }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f32 {
        self.entries[(i * self.dims.1 + j) * self.dims.2 + k]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f32) {
        self.entries[(i * self.dims.1 + j) * self.dims.2 + k] = v;
    }

    pub fn entries(&self) -> &[f32] {
        &self.entries
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_innermost_last() {
        let mut t = RTensor3::zeros((2, 3, 2));
        t.set(1, 2, 1, 5.0);
        assert_eq!(t.entries()[(1 * 3 + 2) * 2 + 1], 5.0);
        assert_eq!(t.get(1, 2, 1), 5.0);
    }

    #[test]
    fn new_validates_len_and_finiteness() {
        assert!(RTensor3::new((1, 2, 2), vec![0.0; 3]).is_err());
        assert!(RTensor3::new((1, 1, 1), vec![f32::INFINITY]).is_err());
        assert!(RTensor3::new((1, 2, 2), vec![0.0; 4]).is_ok());
    }
}
