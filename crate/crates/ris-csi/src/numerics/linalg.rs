//! Small dense complex least-squares solver (Householder QR).
//!
//! Sized for the tiny systems the OMP baseline produces (a handful of
//! dictionary atoms against at most a few hundred measurements).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{CMat, CVec};

/// Solves `min ||a x - b||` for a tall full-rank `a` (rows >= cols).
pub fn lstsq(a: &CMat, b: &CVec) -> Result<CVec> {
    let m = a.rows();
    let k = a.cols();
    if b.len() != m {
        return Err(Error::Shape(format!("lstsq: {}x{} vs rhs of length {}", m, k, b.len())));
    }
    if k == 0 {
        return Ok(CVec::zeros(0));
    }
    if m < k {
        return Err(Error::Parameter(format!("lstsq: underdetermined system {m}x{k}")));
    }

    let mut r: Vec<Complex64> = a.entries().to_vec();
    let mut y: Vec<Complex64> = b.entries().to_vec();
    let mut v = vec![Complex64::new(0.0, 0.0); m];

    for j in 0..k {
        let mut norm2 = 0.0;
        for i in j..m {
            norm2 += r[i * k + j].norm_sqr();
        }
        let norm = norm2.sqrt();
        if norm == 0.0 {
            return Err(Error::Numeric(format!("lstsq: rank-deficient column {j}")));
        }
        let x0 = r[j * k + j];
        let sign = if x0.norm() == 0.0 { Complex64::new(1.0, 0.0) } else { x0 / x0.norm() };
        let alpha = -sign * norm;

        // Householder vector v = x - alpha*e1 over the active segment.
        v[j] = x0 - alpha;
        let mut vhv = v[j].norm_sqr();
        for i in j + 1..m {
            v[i] = r[i * k + j];
            vhv += v[i].norm_sqr();
        }
        let beta = 2.0 / vhv;

        r[j * k + j] = alpha;
        for i in j + 1..m {
            r[i * k + j] = Complex64::new(0.0, 0.0);
        }

        for c in j + 1..k {
            let mut w = Complex64::new(0.0, 0.0);
            for i in j..m {
                w += v[i].conj() * r[i * k + c];
            }
            w *= beta;
            for i in j..m {
                r[i * k + c] -= w * v[i];
            }
        }
        let mut w = Complex64::new(0.0, 0.0);
        for i in j..m {
            w += v[i].conj() * y[i];
        }
        w *= beta;
        for i in j..m {
            y[i] -= w * v[i];
        }
    }

    // Back-substitution on the k x k upper-triangular block.
    let mut x = vec![Complex64::new(0.0, 0.0); k];
    for j in (0..k).rev() {
        let mut acc = y[j];
        for l in j + 1..k {
            acc -= r[j * k + l] * x[l];
        }
        x[j] = acc / r[j * k + j];
    }
    Ok(CVec::from(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{cgauss, hermitian, matmul, RngStream};

    fn random_mat(rows: usize, cols: usize, stream: u64) -> CMat {
        let v = cgauss(RngStream::new(11, stream), rows * cols, 1.0).unwrap();
        CMat::new(rows, cols, v.entries().to_vec()).unwrap()
    }

    #[test]
    fn recovers_exact_solution_of_consistent_system() {
        let a = random_mat(6, 3, 0);
        let x_true = cgauss(RngStream::new(11, 99), 3, 1.0).unwrap();
        let xm = CMat::new(3, 1, x_true.entries().to_vec()).unwrap();
        let b = matmul(&a, &xm).unwrap().col(0);
        let x = lstsq(&a, &b).unwrap();
        for i in 0..3 {
            assert!((x.get(i) - x_true.get(i)).norm() < 1e-12);
        }
    }

    #[test]
    fn residual_is_orthogonal_to_column_span() {
        // Normal-equation optimality: a^H (a x - b) == 0.
        let a = random_mat(8, 4, 1);
        let b = cgauss(RngStream::new(11, 98), 8, 1.0).unwrap();
        let x = lstsq(&a, &b).unwrap();
        let ax = matmul(&a, &CMat::new(4, 1, x.entries().to_vec()).unwrap()).unwrap().col(0);
        let resid = CMat::new(8, 1, ax.sub(&b).unwrap().entries().to_vec()).unwrap();
        let proj = matmul(&hermitian(&a), &resid).unwrap();
        for i in 0..4 {
            assert!(proj.get(i, 0).norm() < 1e-10);
        }
    }

    #[test]
    fn rejects_underdetermined_and_mismatched_inputs() {
        let a = random_mat(3, 5, 2);
        let b = CVec::zeros(3);
        assert!(lstsq(&a, &b).is_err());
        let a = random_mat(5, 3, 3);
        let b = CVec::zeros(4);
        assert!(lstsq(&a, &b).is_err());
    }
}
