//! Rough-surface statistics and Gaussian height-field realizations.
//!
//! Heights are sampled at cell centers of a regular grid over the plane patch,
//! stored row-major with rows along `axis_v` (index `iv * n_u + iu`).
//!
//! Correlated fields (`corr_len > 0`) are synthesized spectrally on a padded
//! periodic grid: white complex Gaussian spectrum, shaped by the square root
//! of the Gaussian power spectrum, inverse FFT, real part. When the
//! correlation length spans many grid cells the synthesis runs on a coarser
//! grid (ℓ/16) and is bilinearly interpolated onto the requested one.
//! Uncorrelated surfaces (`corr_len = 0`) draw i.i.d. heights per cell.

use std::io::Read;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::PlaneSpec;

/// Statistical description of a reflecting surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoughSurface {
    pub plane: PlaneSpec,
    /// Height standard deviation σ_z, m.
    pub sigma_z: f64,
    /// Gaussian correlation length ℓ, m (0 = uncorrelated).
    pub corr_len: f64,
    /// Passivity factor ζ in (0, 1].
    pub passivity: f64,
    /// Specular loss l̄ in (0, 1].
    pub loss_factor: f64,
}

impl RoughSurface {
    pub fn new(plane: PlaneSpec, sigma_z: f64, corr_len: f64, passivity: f64, loss_factor: f64) -> Result<Self> {
        let s = Self { plane, sigma_z, corr_len, passivity, loss_factor };
        s.validate()?;
        Ok(s)
    }

    /// Smooth, lossless, perfectly reflecting patch.
    pub fn flat(plane: PlaneSpec) -> Self {
        Self { plane, sigma_z: 0.0, corr_len: 0.0, passivity: 1.0, loss_factor: 1.0 }
    }

    pub fn with_sigma(mut self, sigma_z: f64) -> Self {
        self.sigma_z = sigma_z;
        self
    }

    pub fn with_corr_len(mut self, corr_len: f64) -> Self {
        self.corr_len = corr_len;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.plane.validate()?;
        if !(self.sigma_z >= 0.0 && self.sigma_z.is_finite()) {
            return invalid(format!("sigma_z must be >= 0, got {}", self.sigma_z));
        }
        if !(self.corr_len >= 0.0 && self.corr_len.is_finite()) {
            return invalid(format!("corr_len must be >= 0, got {}", self.corr_len));
        }
        if !(self.passivity > 0.0 && self.passivity <= 1.0) {
            return invalid(format!("passivity must lie in (0, 1], got {}", self.passivity));
        }
        if !(self.loss_factor > 0.0 && self.loss_factor <= 1.0) {
            return invalid(format!("loss_factor must lie in (0, 1], got {}", self.loss_factor));
        }
        Ok(())
    }
}

/// One sampled height field.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceRealization {
    pub surface: RoughSurface,
    pub seed: u64,
    n_u: usize,
    n_v: usize,
    step_u: f64,
    step_v: f64,
    heights: Vec<f64>,
}

impl SurfaceRealization {
    /// Flat (all-zero) realization with the given grid step.
    pub fn flat(surface: RoughSurface, grid_step: f64) -> Result<Self> {
        let (n_u, n_v, step_u, step_v) = grid_dims(&surface.plane, grid_step)?;
        Ok(Self { surface, seed: 0, n_u, n_v, step_u, step_v, heights: vec![0.0; n_u * n_v] })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n_u, self.n_v)
    }

    /// Cell sizes along `axis_u` and `axis_v`.
    pub fn steps(&self) -> (f64, f64) {
        (self.step_u, self.step_v)
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn height(&self, iu: usize, iv: usize) -> f64 {
        self.heights[iv * self.n_u + iu]
    }

    /// In-plane coordinate of cell column `iu`.
    pub fn u_coord(&self, iu: usize) -> f64 {
        -0.5 * self.surface.plane.length_u + (iu as f64 + 0.5) * self.step_u
    }

    /// In-plane coordinate of cell row `iv`.
    pub fn v_coord(&self, iv: usize) -> f64 {
        -0.5 * self.surface.plane.length_v + (iv as f64 + 0.5) * self.step_v
    }

    /// Height of the cell containing plane coordinates `(s, t)` (clamped to the patch).
    pub fn height_at(&self, s: f64, t: f64) -> f64 {
        let iu = ((s + 0.5 * self.surface.plane.length_u) / self.step_u).floor();
        let iv = ((t + 0.5 * self.surface.plane.length_v) / self.step_v).floor();
        let iu = (iu.max(0.0) as usize).min(self.n_u - 1);
        let iv = (iv.max(0.0) as usize).min(self.n_v - 1);
        self.height(iu, iv)
    }

    /// Sample mean and (population) variance of the heights.
    pub fn moments(&self) -> (f64, f64) {
        let n = self.heights.len() as f64;
        let mean = self.heights.iter().sum::<f64>() / n;
        let var = self.heights.iter().map(|h| (h - mean).powi(2)).sum::<f64>() / n;
        (mean, var)
    }

    /// Writes the flat binary export: little-endian `n_u, n_v` (u64), `step_u, step_v,
    /// sigma_z, corr_len` (f64), `seed` (u64), then the heights row-major as f64.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(56 + 8 * self.heights.len());
        buf.extend_from_slice(&(self.n_u as u64).to_le_bytes());
        buf.extend_from_slice(&(self.n_v as u64).to_le_bytes());
        for v in [self.step_u, self.step_v, self.surface.sigma_z, self.surface.corr_len] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&self.seed.to_le_bytes());
        for h in &self.heights {
            buf.extend_from_slice(&h.to_le_bytes());
        }
        crate::io::write_atomic(path, &buf)
    }

    /// Reads a field written by [`write_binary`](Self::write_binary). The plane and
    /// the remaining surface parameters are taken from `surface`.
    pub fn read_binary(path: &Path, surface: RoughSurface) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let word = |i: usize| -> Result<[u8; 8]> {
            bytes
                .get(8 * i..8 * i + 8)
                .map(|s| s.try_into().unwrap())
                .ok_or_else(|| Error::Validation("truncated surface file".into()))
        };
        let n_u = u64::from_le_bytes(word(0)?) as usize;
        let n_v = u64::from_le_bytes(word(1)?) as usize;
        let step_u = f64::from_le_bytes(word(2)?);
        let step_v = f64::from_le_bytes(word(3)?);
        let seed = u64::from_le_bytes(word(6)?);
        if bytes.len() != 56 + 8 * n_u * n_v {
            return invalid("surface file size does not match its header");
        }
        let heights = (0..n_u * n_v).map(|i| f64::from_le_bytes(word(7 + i).unwrap())).collect();
        Ok(Self { surface, seed, n_u, n_v, step_u, step_v, heights })
    }
}

fn grid_dims(plane: &PlaneSpec, grid_step: f64) -> Result<(usize, usize, f64, f64)> {
    if !(grid_step > 0.0 && grid_step.is_finite()) {
        return invalid(format!("grid_step must be positive, got {grid_step}"));
    }
    if grid_step > plane.length_u.min(plane.length_v) / 4.0 {
        return invalid("grid_step must not exceed a quarter of the smaller surface extent");
    }
    let n_u = (plane.length_u / grid_step - 1e-9).ceil() as usize;
    let n_v = (plane.length_v / grid_step - 1e-9).ceil() as usize;
    Ok((n_u, n_v, plane.length_u / n_u as f64, plane.length_v / n_v as f64))
}

/// Derives the seed of realization `k` from a scenario seed.
pub fn split_seed(base: u64, k: u64) -> u64 {
    splitmix64(base ^ splitmix64(k.wrapping_add(0x632B_E59B_D9B4_E019)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Samples a height field on a grid of (at most) `grid_step` cells.
pub fn sample_surface(surface: &RoughSurface, grid_step: f64, seed: u64) -> Result<SurfaceRealization> {
    surface.validate()?;
    let mut real = SurfaceRealization::flat(*surface, grid_step)?;
    real.seed = seed;
    if surface.sigma_z == 0.0 {
        return Ok(real);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if surface.corr_len == 0.0 {
        for h in real.heights.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *h = surface.sigma_z * z;
        }
        return Ok(real);
    }
    if grid_step > 0.5 * surface.corr_len {
        log::warn!(
            "grid step {grid_step:.3e} m does not resolve correlation length {:.3e} m",
            surface.corr_len
        );
    }
    correlated_field(&mut real, &mut rng);
    Ok(real)
}

/// Smallest integer ≥ n whose only prime factors are 2, 3 and 5.
fn smooth_size(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

struct Axis {
    /// Synthesis node spacing.
    h: f64,
    /// Position (plane coordinate) of synthesis node 0.
    x0: f64,
    /// Periodic grid size.
    m: usize,
    /// Nodes actually needed to cover the patch.
    used: usize,
    direct: bool,
}

fn synth_axis(length: f64, step: f64, ell: f64) -> Axis {
    let direct = ell / step <= 16.0;
    let (h, x0) = if direct { (step, -0.5 * length + 0.5 * step) } else { (ell / 16.0, -0.5 * length) };
    let used = if direct { (length / step).round() as usize } else { (length / h).ceil() as usize + 2 };
    let m = smooth_size(used + (4.0 * ell / h).ceil() as usize);
    Axis { h, x0, m, used, direct }
}

fn correlated_field(real: &mut SurfaceRealization, rng: &mut ChaCha8Rng) {
    let ell = real.surface.corr_len;
    let ax_u = synth_axis(real.surface.plane.length_u, real.step_u, ell);
    let ax_v = synth_axis(real.surface.plane.length_v, real.step_v, ell);
    let (mu, mv) = (ax_u.m, ax_v.m);

    let wavenumbers = |ax: &Axis| -> Vec<f64> {
        (0..ax.m)
            .map(|i| {
                let k = if i <= ax.m / 2 { i as f64 } else { i as f64 - ax.m as f64 };
                2.0 * std::f64::consts::PI * k / (ax.m as f64 * ax.h)
            })
            .collect()
    };
    let ku = wavenumbers(&ax_u);
    let kv = wavenumbers(&ax_v);
    // Gaussian covariance exp(-ρ²/ℓ²) has power spectrum ∝ exp(-k²ℓ²/4).
    let q = 0.25 * ell * ell;
    let amp_u: Vec<f64> = ku.iter().map(|k| (-0.5 * q * k * k).exp()).collect();
    let amp_v: Vec<f64> = kv.iter().map(|k| (-0.5 * q * k * k).exp()).collect();
    let power: f64 = amp_u.iter().map(|a| a * a).sum::<f64>() * amp_v.iter().map(|a| a * a).sum::<f64>();
    // Re of a CN(0,1)-weighted sum has variance ½ Σ A².
    let scale = real.surface.sigma_z * (2.0 / power).sqrt();

    let mut grid = vec![Complex64::new(0.0, 0.0); mu * mv];
    for iv in 0..mv {
        for iu in 0..mu {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let a = scale * amp_u[iu] * amp_v[iv] * std::f64::consts::FRAC_1_SQRT_2;
            grid[iv * mu + iu] = Complex64::new(re * a, im * a);
        }
    }

    let mut planner = FftPlanner::<f64>::new();
    let fu = planner.plan_fft_inverse(mu);
    for row in grid.chunks_exact_mut(mu) {
        fu.process(row);
    }
    let fv = planner.plan_fft_inverse(mv);
    let mut col = vec![Complex64::new(0.0, 0.0); mv];
    for iu in 0..ax_u.used.min(mu) {
        for iv in 0..mv {
            col[iv] = grid[iv * mu + iu];
        }
        fv.process(&mut col);
        for iv in 0..mv {
            grid[iv * mu + iu] = col[iv];
        }
    }
    let node = |iu: usize, iv: usize| grid[iv * mu + iu].re;

    let (n_u, n_v) = (real.n_u, real.n_v);
    if ax_u.direct && ax_v.direct {
        for iv in 0..n_v {
            for iu in 0..n_u {
                real.heights[iv * n_u + iu] = node(iu, iv);
            }
        }
        return;
    }
    // Bilinear interpolation from synthesis nodes to cell centers.
    let locate = |ax: &Axis, x: f64| -> (usize, f64) {
        let f = ((x - ax.x0) / ax.h).max(0.0);
        let i = (f.floor() as usize).min(ax.used.saturating_sub(2));
        (i, (f - i as f64).clamp(0.0, 1.0))
    };
    for iv in 0..n_v {
        let (jv, tv) = locate(&ax_v, real.v_coord(iv));
        for iu in 0..n_u {
            let (ju, tu) = locate(&ax_u, real.u_coord(iu));
            let a = node(ju, jv) * (1.0 - tu) + node(ju + 1, jv) * tu;
            let b = node(ju, jv + 1) * (1.0 - tu) + node(ju + 1, jv + 1) * tu;
            real.heights[iv * n_u + iu] = a * (1.0 - tv) + b * tv;
        }
    }
}

/// Normalized spatial autocorrelation at `lag`, averaged over the u and v directions.
pub fn empirical_autocorr(real: &SurfaceRealization, lag: f64) -> Result<f64> {
    let (mean, var) = real.moments();
    if var <= 0.0 {
        return invalid("autocorrelation undefined for a zero-variance field");
    }
    let lag_index = |step: f64, n: usize| -> Result<usize> {
        let f = lag / step;
        let k = f.round();
        if lag < 0.0 || (f - k).abs() > 1e-6 || k as usize > n / 2 {
            return invalid(format!("lag {lag} must be a grid multiple within half the extent"));
        }
        Ok(k as usize)
    };
    let ku = lag_index(real.step_u, real.n_u)?;
    let kv = lag_index(real.step_v, real.n_v)?;
    let (n_u, n_v) = (real.n_u, real.n_v);
    let z = |iu: usize, iv: usize| real.heights[iv * n_u + iu] - mean;
    let mut su = 0.0;
    for iv in 0..n_v {
        for iu in 0..n_u - ku {
            su += z(iu, iv) * z(iu + ku, iv);
        }
    }
    let mut sv = 0.0;
    for iv in 0..n_v - kv {
        for iu in 0..n_u {
            sv += z(iu, iv) * z(iu, iv + kv);
        }
    }
    let cu = su / ((n_u - ku) * n_v) as f64;
    let cv = sv / ((n_v - kv) * n_u) as f64;
    Ok(0.5 * (cu + cv) / var)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn patch(side: f64) -> PlaneSpec {
        PlaneSpec::xy_square(side).unwrap()
    }

    #[test]
    fn zero_sigma_gives_flat_field() {
        let s = RoughSurface::flat(patch(1.0));
        let r = sample_surface(&s, 0.01, 3).unwrap();
        assert!(r.heights().iter().all(|&h| h == 0.0));
        assert_eq!(r.dims(), (100, 100));
    }

    #[test]
    fn same_seed_is_bit_identical() {
        for ell in [0.0, 0.05] {
            let s = RoughSurface::flat(patch(1.0)).with_sigma(0.002).with_corr_len(ell);
            let a = sample_surface(&s, 0.01, 42).unwrap();
            let b = sample_surface(&s, 0.01, 42).unwrap();
            let c = sample_surface(&s, 0.01, 43).unwrap();
            assert_eq!(a, b);
            assert_ne!(a.heights(), c.heights());
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let s = RoughSurface::flat(patch(1.0));
        assert!(sample_surface(&s, 0.0, 1).is_err());
        assert!(sample_surface(&s, 0.3, 1).is_err());
        assert!(RoughSurface::new(patch(1.0), -1.0, 0.0, 1.0, 1.0).is_err());
        assert!(RoughSurface::new(patch(1.0), 0.0, 0.0, 0.0, 1.0).is_err());
        assert!(RoughSurface::new(patch(1.0), 0.0, 0.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn autocorr_lag_zero_and_errors() {
        let s = RoughSurface::flat(patch(1.0)).with_sigma(1e-3);
        let r = sample_surface(&s, 0.01, 9).unwrap();
        assert!((empirical_autocorr(&r, 0.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(empirical_autocorr(&r, 0.015).is_err());
        assert!(empirical_autocorr(&r, 0.9).is_err());
        // i.i.d. cells decorrelate after one step.
        assert!(empirical_autocorr(&r, 0.01).unwrap().abs() < 0.05);
        let flat = sample_surface(&RoughSurface::flat(patch(1.0)), 0.01, 9).unwrap();
        assert!(empirical_autocorr(&flat, 0.0).is_err());
    }

    #[test]
    fn gaussian_correlation_at_one_length() {
        // σ = 1 mm, ℓ = 10 mm, 1 × 1 m at 1 mm, 50 realizations.
        let s = RoughSurface::flat(patch(1.0)).with_sigma(1e-3).with_corr_len(0.01);
        let mut acc = 0.0;
        let mut var = 0.0;
        for k in 0..50 {
            let r = sample_surface(&s, 1e-3, split_seed(11, k)).unwrap();
            acc += empirical_autocorr(&r, 0.01).unwrap();
            var += r.moments().1;
        }
        let rho = acc / 50.0;
        assert!((rho - (-1.0f64).exp()).abs() < 0.05, "C(ℓ) = {rho}");
        assert!((var / 50.0 / 1e-6 - 1.0).abs() < 0.05);
    }

    #[test]
    fn interpolated_synthesis_keeps_statistics() {
        // ℓ spans 40 cells, so the coarse synthesis path is used.
        let s = RoughSurface::flat(patch(2.0)).with_sigma(2e-3).with_corr_len(0.2);
        let (mut acc, mut var) = (0.0, 0.0);
        let n = 60;
        for k in 0..n {
            let r = sample_surface(&s, 5e-3, split_seed(5, k)).unwrap();
            acc += empirical_autocorr(&r, 0.2).unwrap();
            var += r.heights().iter().map(|h| h * h).sum::<f64>() / r.heights().len() as f64;
        }
        assert!((acc / n as f64 - (-1.0f64).exp()).abs() < 0.05);
        assert!((var / n as f64 / 4e-6 - 1.0).abs() < 0.1);
    }

    #[test]
    fn binary_round_trip() {
        let s = RoughSurface::flat(patch(1.0)).with_sigma(1e-3);
        let r = sample_surface(&s, 0.05, 77).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.bin");
        r.write_binary(&p).unwrap();
        let back = SurfaceRealization::read_binary(&p, s).unwrap();
        assert_eq!(back, r);
        assert_eq!(std::fs::metadata(&p).unwrap().len(), 56 + 8 * 400);
    }

    #[test]
    fn split_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|k| split_seed(7, k)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(split_seed(7, 0), split_seed(8, 0));
    }
}
