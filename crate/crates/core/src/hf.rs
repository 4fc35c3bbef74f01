//! Huygens-Fresnel reference integrator.
//!
//! Evaluates
//!
//! ```text
//! c = ζ/(jλ) ∬ (h_tx/r₁²)(h_rx/r₂²) exp(jκ(r₁ + r₂)) dA
//! ```
//!
//! over a sampled height field with the midpoint rule, where r₁, r₂ are the
//! exact distances from each (height-displaced) surface sample to the Tx and
//! Rx and h_tx, h_rx their heights above the mean plane. No phase expansion
//! is used anywhere in this module.
//!
//! The integration grid is set by [`HFConfig::grid_step`] and may be finer
//! than the realization grid; heights are then looked up per surface cell
//! (piecewise constant). Rows are reduced in fixed-size blocks whose partial
//! sums are combined in index order, so results do not depend on the number
//! of worker threads.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::{ChannelMatrix, Provenance};
use crate::error::{invalid, Result};
use crate::geometry::{ArrayGeometry, Point3};
use crate::surface::SurfaceRealization;

const ROWS_PER_BLOCK: usize = 8;

/// Oracle settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HFConfig {
    /// Integration step, m. Must not exceed λ/4.
    pub grid_step: f64,
    /// Full 1/r² amplitudes; `false` freezes them at the surface-center values.
    pub use_exact_amplitude: bool,
    /// Replace dA = dx dy by the slope-corrected element √(1 + z_x² + z_y²) dx dy.
    pub include_area_correction: bool,
}

impl HFConfig {
    /// Default configuration: λ/8 step, exact amplitudes, dA = dx dy.
    pub fn for_wavenumber(wavenumber: f64) -> Self {
        Self::with_step(2.0 * PI / wavenumber / 8.0)
    }

    pub fn with_step(grid_step: f64) -> Self {
        Self { grid_step, use_exact_amplitude: true, include_area_correction: false }
    }
}

#[derive(Clone, Copy)]
struct Local {
    s: f64,
    t: f64,
    h: f64,
}

struct Grid<'a> {
    real: &'a SurfaceRealization,
    n_u: usize,
    n_v: usize,
    du: f64,
    dv: f64,
    /// Integration cell -> realization column / row.
    col: Vec<usize>,
    row: Vec<usize>,
}

impl<'a> Grid<'a> {
    fn new(real: &'a SurfaceRealization, step: f64) -> Self {
        let plane = &real.surface.plane;
        let (n_u, n_v) = if (real.steps().0 - step).abs() <= 1e-12 * step
            && (real.steps().1 - step).abs() <= 1e-12 * step
        {
            real.dims()
        } else {
            (
                (plane.length_u / step - 1e-9).ceil() as usize,
                (plane.length_v / step - 1e-9).ceil() as usize,
            )
        };
        let du = plane.length_u / n_u as f64;
        let dv = plane.length_v / n_v as f64;
        let (ru, rv) = real.dims();
        let (su, sv) = real.steps();
        let map = |n: usize, d: f64, sr: f64, nr: usize| -> Vec<usize> {
            (0..n).map(|i| ((((i as f64 + 0.5) * d) / sr).floor() as usize).min(nr - 1)).collect()
        };
        let col = map(n_u, du, su, ru);
        let row = map(n_v, dv, sv, rv);
        Self { real, n_u, n_v, du, dv, col, row }
    }

    fn s(&self, iu: usize) -> f64 {
        -0.5 * self.real.surface.plane.length_u + (iu as f64 + 0.5) * self.du
    }

    fn t(&self, iv: usize) -> f64 {
        -0.5 * self.real.surface.plane.length_v + (iv as f64 + 0.5) * self.dv
    }

    fn slope_factor(&self, iu: usize, iv: usize) -> f64 {
        let r = self.real;
        let (nu, nv) = r.dims();
        let (su, sv) = r.steps();
        let (cu, cv) = (self.col[iu], self.row[iv]);
        let d = |a: usize, b: usize, c: usize, e: usize, h: f64, n: f64| (r.height(a, b) - r.height(c, e)) / (h * n);
        let zx = match (cu > 0, cu + 1 < nu) {
            (true, true) => d(cu + 1, cv, cu - 1, cv, su, 2.0),
            (false, true) => d(cu + 1, cv, cu, cv, su, 1.0),
            (true, false) => d(cu, cv, cu - 1, cv, su, 1.0),
            _ => 0.0,
        };
        let zy = match (cv > 0, cv + 1 < nv) {
            (true, true) => d(cu, cv + 1, cu, cv - 1, sv, 2.0),
            (false, true) => d(cu, cv + 1, cu, cv, sv, 1.0),
            (true, false) => d(cu, cv, cu, cv - 1, sv, 1.0),
            _ => 0.0,
        };
        (1.0 + zx * zx + zy * zy).sqrt()
    }
}

/// cos/sin of `phase` through a branch-free reduction to [−π, π] and
/// Taylor polynomials (error below 2e-13), written so the calling loops
/// vectorize.
#[inline(always)]
fn cis(phase: f64) -> (f64, f64) {
    const MAGIC: f64 = 6_755_399_441_055_744.0; // 1.5 · 2^52
    let t = phase * (0.5 / PI);
    let n = (t + MAGIC) - MAGIC;
    let y = (t - n) * (2.0 * PI);
    cis_taylor(y, y * y)
}

#[inline(always)]
fn cis_taylor(y: f64, y2: f64) -> (f64, f64) {
    // sin y = y Σ (−1)^k y^{2k}/(2k+1)!, cos y = Σ (−1)^k y^{2k}/(2k)!, k ≤ 12.
    const S: [f64; 13] = [
        1.0,
        -1.666_666_666_666_666_6e-1,
        8.333_333_333_333_333e-3,
        -1.984_126_984_126_984e-4,
        2.755_731_922_398_589e-6,
        -2.505_210_838_544_172e-8,
        1.605_904_383_682_161_3e-10,
        -7.647_163_731_819_816e-13,
        2.811_457_254_345_520_6e-15,
        -8.220_635_246_624_329e-18,
        1.957_294_106_339_126e-20,
        -3.868_170_170_630_684e-23,
        6.446_950_284_384_474e-26,
    ];
    const C: [f64; 13] = [
        1.0,
        -0.5,
        4.166_666_666_666_666_4e-2,
        -1.388_888_888_888_889e-3,
        2.480_158_730_158_730_2e-5,
        -2.755_731_922_398_589e-7,
        2.087_675_698_786_81e-9,
        -1.147_074_559_772_972_5e-11,
        4.779_477_332_387_385e-14,
        -1.561_920_696_858_623_6e-16,
        4.110_317_623_312_165e-19,
        -8.896_790_955_222_1e-22,
        1.611_737_571_610_887e-24,
    ];
    let mut s = S[12];
    let mut c = C[12];
    for k in (0..12).rev() {
        s = s * y2 + S[k];
        c = c * y2 + C[k];
    }
    (c, s * y)
}

fn validate(tx: Point3, rxs: &[Point3], real: &SurfaceRealization, wavenumber: f64, cfg: &HFConfig) -> Result<()> {
    if !(wavenumber > 0.0 && wavenumber.is_finite()) {
        return invalid("wavenumber must be positive");
    }
    let lambda = 2.0 * PI / wavenumber;
    if !(cfg.grid_step > 0.0) {
        return invalid("grid_step must be positive");
    }
    if cfg.grid_step > 0.25 * lambda * (1.0 + 1e-9) {
        return invalid(format!(
            "grid_step {:.4e} m exceeds λ/4 = {:.4e} m (phase aliasing)",
            cfg.grid_step,
            0.25 * lambda
        ));
    }
    let plane = &real.surface.plane;
    for (name, p) in std::iter::once(("tx", tx)).chain(rxs.iter().map(|&r| ("rx", r))) {
        if !p.is_finite() || plane.height_of(p) <= 0.0 {
            return invalid(format!("{name} at {p:?} is not strictly in front of the surface"));
        }
    }
    Ok(())
}

/// Oracle coefficients from one Tx to several Rx points over the same realization.
///
/// Sharing the Tx-side terms makes this much cheaper than separate calls.
pub fn hf_coefficients(
    tx: Point3,
    rxs: &[Point3],
    real: &SurfaceRealization,
    wavenumber: f64,
    cfg: &HFConfig,
) -> Result<Vec<Complex64>> {
    validate(tx, rxs, real, wavenumber, cfg)?;
    let plane = real.surface.plane;
    let grid = Grid::new(real, cfg.grid_step);
    let lt = {
        let l = plane.to_local(tx);
        Local { s: l.x, t: l.y, h: l.z }
    };
    let lrs: Vec<Local> = rxs
        .iter()
        .map(|&r| {
            let l = plane.to_local(r);
            Local { s: l.x, t: l.y, h: l.z }
        })
        .collect();
    let n_rx = lrs.len();
    let nu = grid.n_u;

    // Column-only terms.
    let s_coords: Vec<f64> = (0..nu).map(|iu| grid.s(iu)).collect();
    let dx2_tx: Vec<f64> = s_coords.iter().map(|s| (s - lt.s).powi(2)).collect();
    let dx2_rx: Vec<Vec<f64>> = lrs.iter().map(|r| s_coords.iter().map(|s| (s - r.s).powi(2)).collect()).collect();
    // Frozen amplitudes for the constant-amplitude mode.
    let const_amp_tx = lt.h / (lt.s * lt.s + lt.t * lt.t + lt.h * lt.h);
    let const_amp_rx: Vec<f64> = lrs.iter().map(|r| r.h / (r.s * r.s + r.t * r.t + r.h * r.h)).collect();

    let n_blocks = grid.n_v.div_ceil(ROWS_PER_BLOCK);
    let partials: Vec<Vec<Complex64>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = vec![Complex64::new(0.0, 0.0); n_rx];
            let mut z = vec![0.0; nu];
            let mut w = vec![1.0; nu];
            let mut tre = vec![0.0; nu];
            let mut tim = vec![0.0; nu];
            let mut r2 = vec![0.0; nu];
            let v_end = ((b + 1) * ROWS_PER_BLOCK).min(grid.n_v);
            for iv in b * ROWS_PER_BLOCK..v_end {
                let t = grid.t(iv);
                let rr = grid.row[iv];
                for (iu, zi) in z.iter_mut().enumerate() {
                    *zi = real.height(grid.col[iu], rr);
                }
                if cfg.include_area_correction {
                    for (iu, wi) in w.iter_mut().enumerate() {
                        *wi = grid.slope_factor(iu, iv);
                    }
                }
                let dy2 = (t - lt.t).powi(2);
                for i in 0..nu {
                    let dz = lt.h - z[i];
                    let q = dx2_tx[i] + dy2 + dz * dz;
                    let r = q.sqrt();
                    let amp = if cfg.use_exact_amplitude { lt.h / q } else { const_amp_tx } * w[i];
                    let (c, s) = cis(wavenumber * r);
                    tre[i] = amp * c;
                    tim[i] = amp * s;
                }
                for (m, lr) in lrs.iter().enumerate() {
                    let dy2 = (t - lr.t).powi(2);
                    let dx2 = &dx2_rx[m];
                    for i in 0..nu {
                        let dz = lr.h - z[i];
                        r2[i] = dx2[i] + dy2 + dz * dz;
                    }
                    let (mut sre, mut sim) = (0.0, 0.0);
                    for i in 0..nu {
                        let q = r2[i];
                        let r = q.sqrt();
                        let amp = if cfg.use_exact_amplitude { lr.h / q } else { const_amp_rx[m] };
                        let (c, s) = cis(wavenumber * r);
                        let (ar, ai) = (amp * c, amp * s);
                        sre += tre[i] * ar - tim[i] * ai;
                        sim += tre[i] * ai + tim[i] * ar;
                    }
                    acc[m] += Complex64::new(sre, sim);
                }
            }
            acc
        })
        .collect();

    let mut total = vec![Complex64::new(0.0, 0.0); n_rx];
    for p in &partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    let lambda = 2.0 * PI / wavenumber;
    let pre = Complex64::new(0.0, -real.surface.passivity / lambda) * (grid.du * grid.dv);
    let out: Vec<Complex64> = total.into_iter().map(|v| v * pre).collect();
    if out.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(crate::Error::Numerical("non-finite oracle coefficient".into()));
    }
    Ok(out)
}

/// Oracle coefficient for one Tx/Rx pair.
pub fn hf_coefficient(
    tx: Point3,
    rx: Point3,
    real: &SurfaceRealization,
    wavenumber: f64,
    cfg: &HFConfig,
) -> Result<Complex64> {
    Ok(hf_coefficients(tx, &[rx], real, wavenumber, cfg)?[0])
}

/// Oracle matrix: entry (m, n) is the coefficient from Tx element n to Rx element m.
pub fn hf_channel_matrix(
    tx_array: &ArrayGeometry,
    rx_array: &ArrayGeometry,
    real: &SurfaceRealization,
    wavenumber: f64,
    cfg: &HFConfig,
) -> Result<ChannelMatrix> {
    let cols = tx_array
        .elements()
        .iter()
        .map(|&tx| hf_coefficients(tx, rx_array.elements(), real, wavenumber, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(ChannelMatrix::from_fn(rx_array.len(), tx_array.len(), Provenance::Oracle, |m, n| cols[n][m]))
}
