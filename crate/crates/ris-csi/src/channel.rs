//! Saleh-Valenzuela channel synthesis for the RIS-aided uplink.
//!
//! Generates the direct channel `h_UB`, the user-RIS channel `h_UR`, the
//! RIS-BS channel `H_RB` and the equivalent cascaded channel
//! `G = H_RB diag(h_UR)`. Normalizations are chosen so every channel entry
//! has unit second moment in expectation: `H_RB` carries `sqrt(M N / L)`,
//! the vector channels carry `sqrt(n / L)`, and path gains are CN(0, 1).

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{CMat, CVec, RngStream};

/// Uniform linear array described by its element count and spacing ratio d/λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub num_elements: usize,
    pub spacing_over_wavelength: f64,
}

impl ArrayGeometry {
    pub fn new(num_elements: usize, spacing_over_wavelength: f64) -> Result<Self> {
        if num_elements == 0 {
            return Err(Error::Parameter("array needs at least one element".into()));
        }
        if !(spacing_over_wavelength > 0.0) || !spacing_over_wavelength.is_finite() {
            return Err(Error::Parameter(format!(
                "spacing d/lambda must be positive and finite, got {spacing_over_wavelength}"
            )));
        }
        Ok(Self { num_elements, spacing_over_wavelength })
    }

    /// Half-wavelength ULA, the default for both the BS and the RIS.
    pub fn half_wavelength(num_elements: usize) -> Result<Self> {
        Self::new(num_elements, 0.5)
    }
}

/// One multipath cluster set: complex gains plus arrival/departure angles.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub gains: Vec<Complex64>,
    pub aoa: Vec<f64>,
    pub aod: Vec<f64>,
}

impl PathSet {
    pub fn num_paths(&self) -> usize {
        self.gains.len()
    }
}

/// One draw of all three constituent channels plus the cascaded channel.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub h_ub: CVec,
    pub h_ur: CVec,
    pub h_rb: CMat,
    pub g: CMat,
    pub paths_ub: PathSet,
    pub paths_ur: PathSet,
    pub paths_rb: PathSet,
}

/// Per-link path counts (the paper's L parameters).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathCounts {
    pub ub: usize,
    pub ur: usize,
    pub rb: usize,
}

impl Default for PathCounts {
    fn default() -> Self {
        Self { ub: 3, ur: 3, rb: 3 }
    }
}

/// Array steering vector: entry k is `(1/sqrt(n)) exp(-j 2π (d/λ) k sin(angle))`.
pub fn steering(geom: ArrayGeometry, angle: f64) -> Result<CVec> {
    if !angle.is_finite() {
        return Err(Error::Parameter(format!("steering angle must be finite, got {angle}")));
    }
    let n = geom.num_elements;
    let scale = 1.0 / (n as f64).sqrt();
    let step = -2.0 * PI * geom.spacing_over_wavelength * angle.sin();
    Ok(CVec::from_fn(n, |k| {
        Complex64::from_polar(scale, step * k as f64)
    }))
}

/// Draws a path set: gains i.i.d. CN(0,1), angles i.i.d. Uniform[-π/2, π/2).
pub fn draw_paths(stream: RngStream, num_paths: usize) -> Result<PathSet> {
    if num_paths == 0 {
        return Err(Error::Parameter("path set needs at least one path".into()));
    }
    let mut rng = stream.rng();
    let sigma = (0.5f64).sqrt();
    let mut gains = Vec::with_capacity(num_paths);
    let mut aoa = Vec::with_capacity(num_paths);
    let mut aod = Vec::with_capacity(num_paths);
    for _ in 0..num_paths {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        gains.push(Complex64::new(sigma * re, sigma * im));
        aoa.push(rng.gen_range(-PI / 2.0..PI / 2.0));
        aod.push(rng.gen_range(-PI / 2.0..PI / 2.0));
    }
    Ok(PathSet { gains, aoa, aod })
}

/// RIS-to-BS matrix channel: `sqrt(MN/L) Σ_l α_l a_B(θ_l) a_R(φ_l)^H`.
pub fn synthesize_hrb(paths: &PathSet, bs: ArrayGeometry, ris: ArrayGeometry) -> Result<CMat> {
    let l = paths.num_paths();
    if paths.aoa.len() != l || paths.aod.len() != l {
        return Err(Error::Parameter("path set arrays must share one length".into()));
    }
    let m = bs.num_elements;
    let n = ris.num_elements;
    let scale = ((m * n) as f64 / l as f64).sqrt();
    let mut h = CMat::zeros(m, n);
    for p in 0..l {
        let a_b = steering(bs, paths.aoa[p])?;
        let a_r = steering(ris, paths.aod[p])?;
        let g = paths.gains[p] * scale;
        for i in 0..m {
            let left = g * a_b.get(i);
            for j in 0..n {
                let v = h.get(i, j) + left * a_r.get(j).conj();
                h.set(i, j, v);
            }
        }
    }
    Ok(h)
}

/// Single-hop vector channel: `sqrt(n/L) Σ_l α_l a(θ_l)`.
pub fn synthesize_hvec(paths: &PathSet, geom: ArrayGeometry) -> Result<CVec> {
    let l = paths.num_paths();
    let n = geom.num_elements;
    let scale = (n as f64 / l as f64).sqrt();
    let mut h = CVec::zeros(n);
    for p in 0..l {
        let a = steering(geom, paths.aoa[p])?;
        h = h.add(&a.scale(paths.gains[p] * scale))?;
    }
    Ok(h)
}

/// User-to-BS direct channel.
pub fn synthesize_hub(paths: &PathSet, bs: ArrayGeometry) -> Result<CVec> {
    synthesize_hvec(paths, bs)
}

/// User-to-RIS channel.
pub fn synthesize_hur(paths: &PathSet, ris: ArrayGeometry) -> Result<CVec> {
    synthesize_hvec(paths, ris)
}

/// Cascaded channel `G = H_RB diag(h_UR)`: column n scaled by `h_UR[n]`.
pub fn cascade(h_rb: &CMat, h_ur: &CVec) -> Result<CMat> {
    if h_rb.cols() != h_ur.len() {
        return Err(Error::Shape(format!(
            "cascade: {}x{} vs diag of length {}",
            h_rb.rows(),
            h_rb.cols(),
            h_ur.len()
        )));
    }
    Ok(CMat::from_fn(h_rb.rows(), h_rb.cols(), |i, j| h_rb.get(i, j) * h_ur.get(j)))
}

impl ChannelRealization {
    /// Draws all three links and forms the cascaded channel.
    ///
    /// Three child streams are split off the supplied one so each link's
    /// randomness is independent.
    pub fn draw(
        stream: RngStream,
        bs: ArrayGeometry,
        ris: ArrayGeometry,
        paths: PathCounts,
    ) -> Result<Self> {
        let paths_ub = draw_paths(stream.derive(0, 0, 0), paths.ub)?;
        let paths_ur = draw_paths(stream.derive(0, 1, 0), paths.ur)?;
        let paths_rb = draw_paths(stream.derive(0, 2, 0), paths.rb)?;
        let h_ub = synthesize_hub(&paths_ub, bs)?;
        let h_ur = synthesize_hur(&paths_ur, ris)?;
        let h_rb = synthesize_hrb(&paths_rb, bs, ris)?;
        let g = cascade(&h_rb, &h_ur)?;
        Ok(Self { h_ub, h_ur, h_rb, g, paths_ub, paths_ur, paths_rb })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{frob_norm, matmul};

    #[test]
    fn steering_broadside_is_uniform() {
        let v = steering(ArrayGeometry::half_wavelength(4).unwrap(), 0.0).unwrap();
        for k in 0..4 {
            assert!((v.get(k) - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn steering_endfire_two_elements() {
        // sin(π/2) = 1: second entry is exp(-jπ) = -1, scaled by 1/sqrt(2).
        let v = steering(ArrayGeometry::half_wavelength(2).unwrap(), PI / 2.0).unwrap();
        let s = 1.0 / 2.0f64.sqrt();
        assert!((v.get(0) - Complex64::new(s, 0.0)).norm() < 1e-12);
        assert!((v.get(1) - Complex64::new(-s, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn steering_norm_is_one() {
        for &(n, angle) in &[(1usize, 0.3), (5, -1.2), (16, 0.9), (64, 1.5)] {
            let v = steering(ArrayGeometry::half_wavelength(n).unwrap(), angle).unwrap();
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn draw_paths_is_deterministic_with_angles_in_range() {
        let s = RngStream::new(3, 5);
        let a = draw_paths(s, 3).unwrap();
        let b = draw_paths(s, 3).unwrap();
        assert_eq!(a, b);
        for p in 0..3 {
            assert!((-PI / 2.0..PI / 2.0).contains(&a.aoa[p]));
            assert!((-PI / 2.0..PI / 2.0).contains(&a.aod[p]));
        }
    }

    #[test]
    fn path_gain_power_is_unit_on_average() {
        let base = RngStream::new(4, 0);
        let mut acc = 0.0;
        let mut count = 0usize;
        for i in 0..40_000u64 {
            let p = draw_paths(base.derive(1, 0, i), 3).unwrap();
            acc += p.gains.iter().map(|g| g.norm_sqr()).sum::<f64>();
            count += 3;
        }
        let mean = acc / count as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean |gain|^2 = {mean}");
    }

    #[test]
    fn single_zero_angle_path_gives_all_ones_hrb() {
        // Entry magnitude: sqrt(MN/L) * (1/sqrt(M)) * (1/sqrt(N)) = 1 for L=1.
        let paths = PathSet {
            gains: vec![Complex64::new(1.0, 0.0)],
            aoa: vec![0.0],
            aod: vec![0.0],
        };
        let g2 = ArrayGeometry::half_wavelength(2).unwrap();
        let h = synthesize_hrb(&paths, g2, g2).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((h.get(i, j) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn single_path_hrb_is_rank_one() {
        // All 2x2 minors of a rank-1 matrix vanish.
        let paths = draw_paths(RngStream::new(8, 1), 1).unwrap();
        let bs = ArrayGeometry::half_wavelength(4).unwrap();
        let ris = ArrayGeometry::half_wavelength(6).unwrap();
        let h = synthesize_hrb(&paths, bs, ris).unwrap();
        for i in 0..3 {
            for j in 0..5 {
                let det = h.get(i, j) * h.get(i + 1, j + 1) - h.get(i, j + 1) * h.get(i + 1, j);
                assert!(det.norm() < 1e-10, "minor ({i},{j}) = {det}");
            }
        }
    }

    #[test]
    fn hrb_entries_have_unit_second_moment() {
        let bs = ArrayGeometry::half_wavelength(4).unwrap();
        let ris = ArrayGeometry::half_wavelength(8).unwrap();
        let base = RngStream::new(5, 0);
        let mut acc = 0.0;
        let n_draws = 10_000u64;
        for i in 0..n_draws {
            let p = draw_paths(base.derive(1, 1, i), 3).unwrap();
            let h = synthesize_hrb(&p, bs, ris).unwrap();
            acc += frob_norm(&h).powi(2);
        }
        let per_entry = acc / (n_draws as f64 * 32.0);
        assert!((per_entry - 1.0).abs() < 0.03, "per-entry moment = {per_entry}");
    }

    #[test]
    fn single_zero_angle_path_gives_all_ones_hub() {
        let paths = PathSet {
            gains: vec![Complex64::new(1.0, 0.0)],
            aoa: vec![0.0],
            aod: vec![0.0],
        };
        let h = synthesize_hub(&paths, ArrayGeometry::half_wavelength(4).unwrap()).unwrap();
        for k in 0..4 {
            assert!((h.get(k) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn hub_energy_matches_antenna_count() {
        let bs = ArrayGeometry::half_wavelength(8).unwrap();
        let base = RngStream::new(6, 0);
        let mut acc = 0.0;
        let n_draws = 10_000u64;
        for i in 0..n_draws {
            let p = draw_paths(base.derive(1, 2, i), 3).unwrap();
            acc += synthesize_hub(&p, bs).unwrap().norm_sqr();
        }
        let mean = acc / n_draws as f64;
        assert!((mean / 8.0 - 1.0).abs() < 0.03, "E||h_UB||^2 = {mean}");
    }

    #[test]
    fn hvec_synthesis_is_deterministic() {
        let s = RngStream::new(7, 2);
        let bs = ArrayGeometry::half_wavelength(4).unwrap();
        let a = synthesize_hub(&draw_paths(s, 3).unwrap(), bs).unwrap();
        let b = synthesize_hub(&draw_paths(s, 3).unwrap(), bs).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cascade_with_all_ones_is_identity() {
        let h = CMat::from_fn(3, 4, |i, j| Complex64::new(i as f64, j as f64));
        let ones = CVec::from_fn(4, |_| Complex64::new(1.0, 0.0));
        assert_eq!(cascade(&h, &ones).unwrap(), h);
        let zeros = CVec::zeros(4);
        assert_eq!(cascade(&h, &zeros).unwrap(), CMat::zeros(3, 4));
    }

    #[test]
    fn cascade_matches_explicit_diagonal_matmul() {
        let stream = RngStream::new(9, 0);
        let h = {
            let v = crate::numerics::cgauss(stream.derive(2, 0, 0), 12, 1.0).unwrap();
            CMat::new(3, 4, v.entries().to_vec()).unwrap()
        };
        let d = crate::numerics::cgauss(stream.derive(2, 1, 0), 4, 1.0).unwrap();
        let diag = CMat::from_fn(4, 4, |i, j| {
            if i == j { d.get(i) } else { Complex64::new(0.0, 0.0) }
        });
        let by_matmul = matmul(&h, &diag).unwrap();
        let by_cascade = cascade(&h, &d).unwrap();
        for i in 0..3 {
            for j in 0..4 {
                assert!((by_matmul.get(i, j) - by_cascade.get(i, j)).norm() < 1e-14);
            }
        }
        assert!(cascade(&h, &CVec::zeros(3)).is_err());
    }

    #[test]
    fn rows_of_g_are_hrb_rows_scaled_by_hur() {
        // The row structure stage 3 exploits: g_m = h_RB,m ∘ h_UR^T.
        let bs = ArrayGeometry::half_wavelength(4).unwrap();
        let ris = ArrayGeometry::half_wavelength(8).unwrap();
        for i in 0..100u64 {
            let r = ChannelRealization::draw(
                RngStream::new(10, 0).derive(3, 0, i),
                bs,
                ris,
                PathCounts::default(),
            )
            .unwrap();
            for m in 0..4 {
                for n in 0..8 {
                    let expect = r.h_rb.get(m, n) * r.h_ur.get(n);
                    assert!((r.g.get(m, n) - expect).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn cascaded_energy_matches_mn() {
        let bs = ArrayGeometry::half_wavelength(4).unwrap();
        let ris = ArrayGeometry::half_wavelength(8).unwrap();
        let mut acc = 0.0;
        let n_draws = 10_000u64;
        for i in 0..n_draws {
            let r = ChannelRealization::draw(
                RngStream::new(12, 0).derive(3, 1, i),
                bs,
                ris,
                PathCounts::default(),
            )
            .unwrap();
            acc += frob_norm(&r.g).powi(2);
        }
        let mean = acc / n_draws as f64;
        assert!((mean / 32.0 - 1.0).abs() < 0.03, "E||G||_F^2 = {mean}");
    }
}
