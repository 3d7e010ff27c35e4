//! Dense complex matrices and vectors.
//!
//! Storage is dense row-major `Complex<f64>` throughout the simulation path;
//! the problem sizes involved (tens of antennas, a few hundred RIS elements)
//! make anything fancier unnecessary.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
}

impl CMat {
    /// Builds a matrix from row-major entries, validating length and finiteness.
    pub fn new(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::Shape(format!(
                "CMat {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        if !entries.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::Numeric("CMat entries must be finite".into()));
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.entries[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix by evaluating `f(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        Self { rows, cols, entries }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.entries[i * self.cols + j] = v;
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// Row `i` as a slice (row-major storage makes this free).
    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> CVec {
        CVec::from((0..self.rows).map(|i| self.get(i, j)).collect::<Vec<_>>())
    }

    /// Gathers the listed columns into a new matrix, in the given order.
    pub fn select_cols(&self, idx: &[usize]) -> Result<CMat> {
        if let Some(&bad) = idx.iter().find(|&&j| j >= self.cols) {
            return Err(Error::Shape(format!(
                "column index {bad} out of range for {}x{} matrix",
                self.rows, self.cols
            )));
        }
        Ok(CMat::from_fn(self.rows, idx.len(), |i, k| self.get(i, idx[k])))
    }

    pub fn scale(&self, s: Complex64) -> CMat {
        CMat {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|z| z * s).collect(),
        }
    }

    pub fn add(&self, other: &CMat) -> Result<CMat> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Shape(format!(
                "add: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(CMat {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &CMat) -> Result<CMat> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }
}

/// Dense complex vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CVec {
    entries: Vec<Complex64>,
}

impl CVec {
    pub fn new(entries: Vec<Complex64>) -> Result<Self> {
        if !entries.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::Numeric("CVec entries must be finite".into()));
        }
        Ok(Self { entries })
    }

    pub fn zeros(n: usize) -> Self {
        Self { entries: vec![Complex64::new(0.0, 0.0); n] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize) -> Complex64) -> Self {
        Self { entries: (0..n).map(|i| f(i)).collect() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize) -> Complex64 {
        self.entries[i]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn scale(&self, s: Complex64) -> CVec {
        CVec { entries: self.entries.iter().map(|z| z * s).collect() }
    }

    pub fn add(&self, other: &CVec) -> Result<CVec> {
        if self.len() != other.len() {
            return Err(Error::Shape(format!("add: len {} vs {}", self.len(), other.len())));
        }
        Ok(CVec {
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &CVec) -> Result<CVec> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }
}

impl From<Vec<Complex64>> for CVec {
    fn from(entries: Vec<Complex64>) -> Self {
        Self { entries }
    }
}

/// Standard matrix product.
pub fn matmul(a: &CMat, b: &CMat) -> Result<CMat> {
    if a.cols != b.rows {
        return Err(Error::Shape(format!(
            "matmul: {}x{} * {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut out = CMat::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = a.get(i, k);
            if aik.re == 0.0 && aik.im == 0.0 {
                continue;
            }
            let brow = b.row(k);
            let orow = &mut out.entries[i * b.cols..(i + 1) * b.cols];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += aik * bv;
            }
        }
    }
    Ok(out)
}

/// Conjugate transpose.
pub fn hermitian(a: &CMat) -> CMat {
    CMat::from_fn(a.cols, a.rows, |i, j| a.get(j, i).conj())
}

/// Frobenius norm.
pub fn frob_norm(a: &CMat) -> f64 {
    a.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn matmul_identity_leaves_matrix_unchanged() {
        let a = CMat::from_fn(3, 2, |i, j| c(i as f64 + 1.0, j as f64 - 0.5));
        let prod = matmul(&CMat::identity(3), &a).unwrap();
        assert_eq!(prod, a);
    }

    #[test]
    fn matmul_rejects_dimension_mismatch() {
        let a = CMat::zeros(2, 3);
        let b = CMat::zeros(2, 3);
        assert!(matches!(matmul(&a, &b), Err(Error::Shape(_))));
    }

    #[test]
    fn frob_norm_of_zero_matrix_is_zero() {
        assert_eq!(frob_norm(&CMat::zeros(2, 2)), 0.0);
    }

    #[test]
    fn hermitian_is_an_involution() {
        let a = CMat::from_fn(3, 4, |i, j| c(i as f64, 2.0 * j as f64 - 1.0));
        assert_eq!(hermitian(&hermitian(&a)), a);
    }

    #[test]
    fn cmat_new_validates_shape_and_finiteness() {
        assert!(CMat::new(2, 2, vec![c(1.0, 0.0); 3]).is_err());
        assert!(CMat::new(1, 1, vec![c(f64::NAN, 0.0)]).is_err());
        assert!(CMat::new(2, 2, vec![c(1.0, 0.0); 4]).is_ok());
    }

    #[test]
    fn select_cols_gathers_in_order() {
        let a = CMat::from_fn(2, 4, |i, j| c((10 * i + j) as f64, 0.0));
        let s = a.select_cols(&[3, 0]).unwrap();
        assert_eq!(s.get(0, 0), c(3.0, 0.0));
        assert_eq!(s.get(1, 1), c(10.0, 0.0));
        assert!(a.select_cols(&[4]).is_err());
    }
}
