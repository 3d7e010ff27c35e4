//! Hot inner loops of the engine.
//!
//! Dense and convolution layers funnel into one primitive: the accumulating
//! matrix product `C += A·B` on row-major slices. The `f32` path uses a
//! register-blocked AVX2+FMA micro-kernel when the CPU supports it (decided
//! once at startup); everything else, including the whole `f64` path, goes
//! through portable loops the compiler can auto-vectorize.

use super::real::Real;

/// C[m×n] += A[m×k] · B[k×n], all row-major and densely packed.
pub fn gemm_accum<T: Real>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if let (Some(af), Some(bf), Some(cf)) =
        (T::as_f32_slice(a), T::as_f32_slice(b), T::as_f32_slice_mut(c))
    {
        return f32_impl::gemm_accum(af, bf, cf, m, k, n);
    }
    gemm_accum_portable(a, b, c, m, k, n);
}

fn gemm_accum_portable<T: Real>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let crow = &mut c[i * n..(i + 1) * n];
        for (l, &ail) in arow.iter().enumerate() {
            if ail == T::zero() {
                continue;
            }
            let brow = &b[l * n..(l + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += ail * bv;
            }
        }
    }
}

/// acc[i] += s * v[i]
pub fn axpy<T: Real>(acc: &mut [T], s: T, v: &[T]) {
    debug_assert_eq!(acc.len(), v.len());
    if let (Some(af), Some(vf)) = (T::as_f32_slice_mut(acc), T::as_f32_slice(v)) {
        return f32_impl::axpy(af, s.into_f64() as f32, vf);
    }
    for (a, &x) in acc.iter_mut().zip(v) {
        *a += s * x;
    }
}

/// Dense row-major transpose: dst[j*m + i] = src[i*n + j].
pub fn transpose_into<T: Real>(src: &[T], dst: &mut [T], m: usize, n: usize) {
    debug_assert_eq!(src.len(), m * n);
    debug_assert_eq!(dst.len(), m * n);
    for i in 0..m {
        for j in 0..n {
            dst[j * m + i] = src[i * n + j];
        }
    }
}

mod f32_impl {
    #[cfg(target_arch = "x86_64")]
    fn use_avx2() -> bool {
        use std::sync::OnceLock;
        static AVX2: OnceLock<bool> = OnceLock::new();
        *AVX2.get_or_init(|| {
            std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma")
        })
    }

    #[cfg(target_arch = "x86_64")]
    fn use_avx512() -> bool {
        use std::sync::OnceLock;
        static AVX512: OnceLock<bool> = OnceLock::new();
        *AVX512.get_or_init(|| {
            std::arch::is_x86_feature_detected!("avx512f")
                && std::arch::is_x86_feature_detected!("avx2")
                && std::arch::is_x86_feature_detected!("fma")
        })
    }

    pub fn gemm_accum(a: &[f32], b: &[f32], c: &mut [f32], m: usize, k: usize, n: usize) {
        // Safety (both arms): feature presence checked; all offsets stay
        // inside the slices by the tiling bounds below.
        #[cfg(target_arch = "x86_64")]
        if use_avx512() {
            unsafe { avx512::gemm_accum(a, b, c, m, k, n) };
            return;
        }
        #[cfg(target_arch = "x86_64")]
        if use_avx2() {
            unsafe { avx2::gemm_accum(a, b, c, m, k, n) };
            return;
        }
        super::gemm_accum_portable(a, b, c, m, k, n);
    }

    pub fn axpy(acc: &mut [f32], s: f32, v: &[f32]) {
        #[cfg(target_arch = "x86_64")]
        if use_avx2() {
            unsafe { avx2::axpy(acc, s, v) };
            return;
        }
        for (a, &x) in acc.iter_mut().zip(v) {
            *a += s * x;
        }
    }

    #[cfg(target_arch = "x86_64")]
    mod avx512 {
        use std::arch::x86_64::*;

        const MR: usize = 8;
        const NR: usize = 32;

        /// 8x32 register-blocked accumulate-GEMM (16 zmm accumulators);
        /// remaining columns fall through to the AVX2 kernels.
        #[target_feature(enable = "avx512f,avx2,fma")]
        pub unsafe fn gemm_accum(a: &[f32], b: &[f32], c: &mut [f32], m: usize, k: usize, n: usize) {
            let ap = a.as_ptr();
            let bp = b.as_ptr();
            let cp = c.as_mut_ptr();
            let mut j = 0usize;
            while j + NR <= n {
                let mut i = 0usize;
                while i + MR <= m {
                    kernel_8x32(ap.add(i * k), bp.add(j), cp.add(i * n + j), k, n);
                    i += MR;
                }
                while i < m {
                    kernel_1x32(ap.add(i * k), bp.add(j), cp.add(i * n + j), k, n);
                    i += 1;
                }
                j += NR;
            }
            if j < n {
                super::avx2::gemm_accum_cols(ap, bp, cp, m, k, n, j);
            }
        }

        #[target_feature(enable = "avx512f")]
        unsafe fn kernel_8x32(a: *const f32, b: *const f32, c: *mut f32, k: usize, ldb: usize) {
            let mut acc = [_mm512_setzero_ps(); 16];
            for r in 0..8 {
                acc[2 * r] = _mm512_loadu_ps(c.add(r * ldb));
                acc[2 * r + 1] = _mm512_loadu_ps(c.add(r * ldb + 16));
            }
            for l in 0..k {
                let b0 = _mm512_loadu_ps(b.add(l * ldb));
                let b1 = _mm512_loadu_ps(b.add(l * ldb + 16));
                let a0 = _mm512_set1_ps(*a.add(l));
                acc[0] = _mm512_fmadd_ps(a0, b0, acc[0]);
                acc[1] = _mm512_fmadd_ps(a0, b1, acc[1]);
                let a1 = _mm512_set1_ps(*a.add(k + l));
                acc[2] = _mm512_fmadd_ps(a1, b0, acc[2]);
                acc[3] = _mm512_fmadd_ps(a1, b1, acc[3]);
                let a2 = _mm512_set1_ps(*a.add(2 * k + l));
                acc[4] = _mm512_fmadd_ps(a2, b0, acc[4]);
                acc[5] = _mm512_fmadd_ps(a2, b1, acc[5]);
                let a3 = _mm512_set1_ps(*a.add(3 * k + l));
                acc[6] = _mm512_fmadd_ps(a3, b0, acc[6]);
                acc[7] = _mm512_fmadd_ps(a3, b1, acc[7]);
                let a4 = _mm512_set1_ps(*a.add(4 * k + l));
                acc[8] = _mm512_fmadd_ps(a4, b0, acc[8]);
                acc[9] = _mm512_fmadd_ps(a4, b1, acc[9]);
                let a5 = _mm512_set1_ps(*a.add(5 * k + l));
                acc[10] = _mm512_fmadd_ps(a5, b0, acc[10]);
                acc[11] = _mm512_fmadd_ps(a5, b1, acc[11]);
                let a6 = _mm512_set1_ps(*a.add(6 * k + l));
                acc[12] = _mm512_fmadd_ps(a6, b0, acc[12]);
                acc[13] = _mm512_fmadd_ps(a6, b1, acc[13]);
                let a7 = _mm512_set1_ps(*a.add(7 * k + l));
                acc[14] = _mm512_fmadd_ps(a7, b0, acc[14]);
                acc[15] = _mm512_fmadd_ps(a7, b1, acc[15]);
            }
            for r in 0..8 {
                _mm512_storeu_ps(c.add(r * ldb), acc[2 * r]);
                _mm512_storeu_ps(c.add(r * ldb + 16), acc[2 * r + 1]);
            }
        }

        #[target_feature(enable = "avx512f")]
        unsafe fn kernel_1x32(a: *const f32, b: *const f32, c: *mut f32, k: usize, ldb: usize) {
            let mut c0 = _mm512_loadu_ps(c);
            let mut c1 = _mm512_loadu_ps(c.add(16));
            for l in 0..k {
                let av = _mm512_set1_ps(*a.add(l));
                c0 = _mm512_fmadd_ps(av, _mm512_loadu_ps(b.add(l * ldb)), c0);
                c1 = _mm512_fmadd_ps(av, _mm512_loadu_ps(b.add(l * ldb + 16)), c1);
            }
            _mm512_storeu_ps(c, c0);
            _mm512_storeu_ps(c.add(16), c1);
        }
    }

    #[cfg(target_arch = "x86_64")]
    mod avx2 {
        use std::arch::x86_64::*;

        const MR: usize = 6;
        const NR: usize = 16;

        /// 6x16 register-blocked accumulate-GEMM with 1-row and narrow-tile
        /// edge paths.
        #[target_feature(enable = "avx2,fma")]
        pub unsafe fn gemm_accum(a: &[f32], b: &[f32], c: &mut [f32], m: usize, k: usize, n: usize) {
            gemm_accum_cols(a.as_ptr(), b.as_ptr(), c.as_mut_ptr(), m, k, n, 0);
        }

        /// Same kernel starting at column `j` (used as the tail of wider
        /// vector paths).
        #[target_feature(enable = "avx2,fma")]
        pub unsafe fn gemm_accum_cols(
            ap: *const f32,
            bp: *const f32,
            cp: *mut f32,
            m: usize,
            k: usize,
            n: usize,
            mut j: usize,
        ) {
            while j + NR <= n {
                let mut i = 0usize;
                while i + MR <= m {
                    kernel_6x16(ap.add(i * k), bp.add(j), cp.add(i * n + j), k, n);
                    i += MR;
                }
                while i < m {
                    kernel_1x16(ap.add(i * k), bp.add(j), cp.add(i * n + j), k, n);
                    i += 1;
                }
                j += NR;
            }
            while j + 8 <= n {
                for i in 0..m {
                    kernel_1x8(ap.add(i * k), bp.add(j), cp.add(i * n + j), k, n);
                }
                j += 8;
            }
            if j < n {
                for i in 0..m {
                    for l in 0..k {
                        let ail = *ap.add(i * k + l);
                        if ail == 0.0 {
                            continue;
                        }
                        for jj in j..n {
                            *cp.add(i * n + jj) += ail * *bp.add(l * n + jj);
                        }
                    }
                }
            }
        }

        #[target_feature(enable = "avx2,fma")]
        unsafe fn kernel_6x16(a: *const f32, b: *const f32, c: *mut f32, k: usize, ldb: usize) {
            let mut c00 = _mm256_loadu_ps(c);
            let mut c01 = _mm256_loadu_ps(c.add(8));
            let mut c10 = _mm256_loadu_ps(c.add(ldb));
            let mut c11 = _mm256_loadu_ps(c.add(ldb + 8));
            let mut c20 = _mm256_loadu_ps(c.add(2 * ldb));
            let mut c21 = _mm256_loadu_ps(c.add(2 * ldb + 8));
            let mut c30 = _mm256_loadu_ps(c.add(3 * ldb));
            let mut c31 = _mm256_loadu_ps(c.add(3 * ldb + 8));
            let mut c40 = _mm256_loadu_ps(c.add(4 * ldb));
            let mut c41 = _mm256_loadu_ps(c.add(4 * ldb + 8));
            let mut c50 = _mm256_loadu_ps(c.add(5 * ldb));
            let mut c51 = _mm256_loadu_ps(c.add(5 * ldb + 8));
            for l in 0..k {
                let b0 = _mm256_loadu_ps(b.add(l * ldb));
                let b1 = _mm256_loadu_ps(b.add(l * ldb + 8));
                let a0 = _mm256_set1_ps(*a.add(l));
                c00 = _mm256_fmadd_ps(a0, b0, c00);
                c01 = _mm256_fmadd_ps(a0, b1, c01);
                let a1 = _mm256_set1_ps(*a.add(k + l));
                c10 = _mm256_fmadd_ps(a1, b0, c10);
                c11 = _mm256_fmadd_ps(a1, b1, c11);
                let a2 = _mm256_set1_ps(*a.add(2 * k + l));
                c20 = _mm256_fmadd_ps(a2, b0, c20);
                c21 = _mm256_fmadd_ps(a2, b1, c21);
                let a3 = _mm256_set1_ps(*a.add(3 * k + l));
                c30 = _mm256_fmadd_ps(a3, b0, c30);
                c31 = _mm256_fmadd_ps(a3, b1, c31);
                let a4 = _mm256_set1_ps(*a.add(4 * k + l));
                c40 = _mm256_fmadd_ps(a4, b0, c40);
                c41 = _mm256_fmadd_ps(a4, b1, c41);
                let a5 = _mm256_set1_ps(*a.add(5 * k + l));
                c50 = _mm256_fmadd_ps(a5, b0, c50);
                c51 = _mm256_fmadd_ps(a5, b1, c51);
            }
            _mm256_storeu_ps(c, c00);
            _mm256_storeu_ps(c.add(8), c01);
            _mm256_storeu_ps(c.add(ldb), c10);
            _mm256_storeu_ps(c.add(ldb + 8), c11);
            _mm256_storeu_ps(c.add(2 * ldb), c20);
            _mm256_storeu_ps(c.add(2 * ldb + 8), c21);
            _mm256_storeu_ps(c.add(3 * ldb), c30);
            _mm256_storeu_ps(c.add(3 * ldb + 8), c31);
            _mm256_storeu_ps(c.add(4 * ldb), c40);
            _mm256_storeu_ps(c.add(4 * ldb + 8), c41);
            _mm256_storeu_ps(c.add(5 * ldb), c50);
            _mm256_storeu_ps(c.add(5 * ldb + 8), c51);
        }

        #[target_feature(enable = "avx2,fma")]
        unsafe fn kernel_1x16(a: *const f32, b: *const f32, c: *mut f32, k: usize, ldb: usize) {
            let mut c0 = _mm256_loadu_ps(c);
            let mut c1 = _mm256_loadu_ps(c.add(8));
            for l in 0..k {
                let av = _mm256_set1_ps(*a.add(l));
                c0 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b.add(l * ldb)), c0);
                c1 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b.add(l * ldb + 8)), c1);
            }
            _mm256_storeu_ps(c, c0);
            _mm256_storeu_ps(c.add(8), c1);
        }

        #[target_feature(enable = "avx2,fma")]
        unsafe fn kernel_1x8(a: *const f32, b: *const f32, c: *mut f32, k: usize, ldb: usize) {
            let mut c0 = _mm256_loadu_ps(c);
            for l in 0..k {
                let av = _mm256_set1_ps(*a.add(l));
                c0 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b.add(l * ldb)), c0);
            }
            _mm256_storeu_ps(c, c0);
        }

        #[target_feature(enable = "avx2,fma")]
        pub unsafe fn axpy(acc: &mut [f32], s: f32, v: &[f32]) {
            let n = acc.len();
            let ap = acc.as_mut_ptr();
            let vp = v.as_ptr();
            let sv = _mm256_set1_ps(s);
            let mut i = 0usize;
            while i + 8 <= n {
                let r = _mm256_fmadd_ps(sv, _mm256_loadu_ps(vp.add(i)), _mm256_loadu_ps(ap.add(i)));
                _mm256_storeu_ps(ap.add(i), r);
                i += 8;
            }
            while i < n {
                *acc.get_unchecked_mut(i) += s * *v.get_unchecked(i);
                i += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_gemm(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
        for i in 0..m {
            for l in 0..k {
                for j in 0..n {
                    c[i * n + j] += a[i * k + l] * b[l * n + j];
                }
            }
        }
    }

    #[test]
    fn gemm_matches_naive_reference_across_edge_shapes() {
        // Shapes chosen to exercise the 6x16 tiles, 1-row edges, 8-wide
        // tails and scalar tails.
        for &(m, k, n) in &[
            (1usize, 1usize, 1usize),
            (6, 4, 16),
            (7, 5, 17),
            (13, 9, 33),
            (64, 576, 64),
            (5, 3, 8),
            (12, 7, 2),
            (128, 16, 64),
        ] {
            let a64: Vec<f64> = (0..m * k).map(|x| ((x * 13 % 23) as f64 - 11.0) * 0.07).collect();
            let b64: Vec<f64> = (0..k * n).map(|x| ((x * 7 % 19) as f64 - 9.0) * 0.05).collect();
            let mut c64: Vec<f64> = (0..m * n).map(|x| (x % 5) as f64 * 0.21).collect();

            let a32: Vec<f32> = a64.iter().map(|&v| v as f32).collect();
            let b32: Vec<f32> = b64.iter().map(|&v| v as f32).collect();
            let mut c32: Vec<f32> = c64.iter().map(|&v| v as f32).collect();

            naive_gemm(&a64, &b64, &mut c64, m, k, n);
            gemm_accum(&a32, &b32, &mut c32, m, k, n);
            for idx in 0..m * n {
                assert!(
                    (c32[idx] as f64 - c64[idx]).abs() < 1e-3,
                    "({m},{k},{n}) at {idx}: {} vs {}",
                    c32[idx],
                    c64[idx]
                );
            }

            // The f64 path goes through the portable loop.
            let mut c64b: Vec<f64> = (0..m * n).map(|x| (x % 5) as f64 * 0.21).collect();
            gemm_accum(&a64, &b64, &mut c64b, m, k, n);
            for idx in 0..m * n {
                assert!((c64b[idx] - c64[idx]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn axpy_matches_naive_reference() {
        let a: Vec<f32> = (0..37).map(|x| (x as f32).sin()).collect();
        let mut acc: Vec<f32> = (0..37).map(|x| (x as f32 * 0.7).cos()).collect();
        let expect: Vec<f32> = acc.iter().zip(&a).map(|(&c, &v)| c + 0.5 * v).collect();
        axpy(&mut acc, 0.5, &a);
        for i in 0..37 {
            assert!((acc[i] - expect[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn transpose_round_trips() {
        let m = 5;
        let n = 7;
        let src: Vec<f32> = (0..m * n).map(|x| x as f32).collect();
        let mut t = vec![0.0f32; m * n];
        let mut back = vec![0.0f32; m * n];
        transpose_into(&src, &mut t, m, n);
        transpose_into(&t, &mut back, n, m);
        assert_eq!(src, back);
        assert_eq!(t[0 * m + 1], src[1 * n + 0]);
    }
}
