//! Near-field beam focusing, per-user SINR, sum rate and side-lobe ratios.
//!
//! Row-channel convention: a user with row channel `h` (length N_tx) receives
//! `y = Σ_n h_n q_n x`, so a focus beamformer conjugates the phases of `h`.

use std::f64::consts::PI;
use std::ops::Range;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{make_ula, mirror_point, ArrayGeometry, PlaneSpec, Point3};
use crate::special::{quad_phase_integral, sinc};

/// What a beamformer is focused on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BeamKind {
    LosFocus,
    /// Focused on the mirror image of the user behind a reflector.
    NlosFocus,
}

/// Unit-norm transmit weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Beamformer {
    pub weights: Vec<Complex64>,
    pub focus: Point3,
    pub kind: BeamKind,
}

fn focus_weights(array: &ArrayGeometry, focus: Point3, wavenumber: f64) -> Vec<Complex64> {
    let s = 1.0 / (array.len() as f64).sqrt();
    array.elements().iter().map(|p| Complex64::from_polar(s, -wavenumber * p.distance(focus))).collect()
}

/// Weights (1/√N)·exp(−jκ‖u_n − focus‖) on the real user position.
pub fn nf_focus_beamformer(array: &ArrayGeometry, focus: Point3, wavenumber: f64) -> Beamformer {
    Beamformer { weights: focus_weights(array, focus, wavenumber), focus, kind: BeamKind::LosFocus }
}

/// Focus beamformer on a virtual (mirrored) user position.
pub fn nlos_focus_beamformer(array: &ArrayGeometry, virtual_focus: Point3, wavenumber: f64) -> Beamformer {
    Beamformer { weights: focus_weights(array, virtual_focus, wavenumber), focus: virtual_focus, kind: BeamKind::NlosFocus }
}

impl Beamformer {
    /// Keeps only the elements in `active` (sub-array mode), renormalized to unit norm.
    pub fn restricted(&self, active: Range<usize>) -> Result<Self> {
        if active.start >= active.end || active.end > self.weights.len() {
            return invalid(format!("invalid sub-array range {active:?} for {} elements", self.weights.len()));
        }
        let mut w = vec![Complex64::new(0.0, 0.0); self.weights.len()];
        w[active.clone()].copy_from_slice(&self.weights[active.clone()]);
        let norm = w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        w.iter_mut().for_each(|c| *c /= norm);
        Ok(Self { weights: w, ..self.clone() })
    }

    pub fn norm(&self) -> f64 {
        self.weights.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Multiplies all weights by a common phase.
    pub fn rotated(&self, phase: f64) -> Self {
        let r = Complex64::from_polar(1.0, phase);
        Self { weights: self.weights.iter().map(|w| w * r).collect(), ..self.clone() }
    }
}

/// Effective scalar gain Σ h_n q_n.
pub fn beam_gain(h: &[Complex64], q: &Beamformer) -> Result<Complex64> {
    if h.len() != q.weights.len() {
        return invalid(format!("channel has {} entries, beamformer {}", h.len(), q.weights.len()));
    }
    Ok(h.iter().zip(&q.weights).map(|(a, b)| a * b).sum())
}

/// Thermal noise: σ² = W·10^{(N0 + Nf − 30)/10} W.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub bandwidth_hz: f64,
    pub n0_dbm_per_hz: f64,
    pub noise_figure_db: f64,
}

impl NoiseModel {
    pub fn sigma2_w(&self) -> f64 {
        self.bandwidth_hz * 10f64.powf((self.n0_dbm_per_hz + self.noise_figure_db - 30.0) / 10.0)
    }
}

pub fn dbm_to_w(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn lin_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// A user's channel and allocated power.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserLink {
    pub channel: Vec<Complex64>,
    pub position: Point3,
    pub power_w: f64,
}

/// |h q_own|² P / (Σ_i |h q_i|² P + σ²).
pub fn sinr(h: &[Complex64], own: &Beamformer, others: &[&Beamformer], power_w: f64, sigma2_w: f64) -> Result<f64> {
    if power_w < 0.0 || sigma2_w < 0.0 {
        return invalid("power and noise must be non-negative");
    }
    let s = beam_gain(h, own)?.norm_sqr() * power_w;
    let mut i = sigma2_w;
    for q in others {
        i += beam_gain(h, q)?.norm_sqr() * power_w;
    }
    if i == 0.0 {
        return Ok(if s == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(s / i)
}

/// Σ_k log2(1 + SINR_k) with the power split equally over the users.
pub fn sum_rate(channels: &[Vec<Complex64>], beams: &[Beamformer], total_power_w: f64, sigma2_w: f64) -> Result<f64> {
    if channels.len() != beams.len() || channels.is_empty() {
        return invalid("need one beamformer per user");
    }
    let p = total_power_w / channels.len() as f64;
    let mut rate = 0.0;
    for (k, h) in channels.iter().enumerate() {
        let others: Vec<&Beamformer> = beams.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, b)| b).collect();
        rate += (1.0 + sinr(h, &beams[k], &others, p, sigma2_w)?).log2();
    }
    Ok(rate)
}

/// Side-lobe to main-lobe ratio |h_side q|²/|h_main q|².
pub fn smr(q: &Beamformer, main_path: &[Complex64], side_path: &[Complex64]) -> Result<f64> {
    let m = beam_gain(main_path, q)?.norm_sqr();
    if m == 0.0 {
        return invalid("main-path gain is zero");
    }
    Ok(beam_gain(side_path, q)?.norm_sqr() / m)
}

/// LOS SINR of the first user: (|Q(a1, 0, Ly)|² + σ²/(P|c0|²))⁻¹.
pub fn sinr_los_closed_form(a1: f64, ly: f64, noise_ratio: f64) -> Result<f64> {
    if !(ly > 0.0) {
        return invalid("Ly must be positive");
    }
    Ok(1.0 / (quad_phase_integral(a1, 0.0, ly).norm_sqr() + noise_ratio))
}

/// NLOS SINR of the first user: (|Q(a2, b, Ly)|² + σ²/(P|c0|²k̄²))⁻¹.
pub fn sinr_nlos_closed_form(a2: f64, b: f64, ly: f64, k_bar: f64, noise_ratio: f64) -> Result<f64> {
    if !(ly > 0.0) {
        return invalid("Ly must be positive");
    }
    if !(k_bar > 0.0 && k_bar <= 1.0) {
        return invalid(format!("k_bar must lie in (0, 1], got {k_bar}"));
    }
    Ok(1.0 / (quad_phase_integral(a2, b, ly).norm_sqr() + noise_ratio / (k_bar * k_bar)))
}

/// Small-curvature form (sinc²(Ly b/2π) + σ²/(P|c0|²k̄²))⁻¹.
pub fn sinr_nlos_sinc_approx(b: f64, ly: f64, k_bar: f64, noise_ratio: f64) -> f64 {
    1.0 / (sinc(ly * b / (2.0 * PI)).powi(2) + noise_ratio / (k_bar * k_bar))
}

/// Two users on a common ray from a ULA along the y axis, with a wall
/// parallel to the y–z plane a fixed gap behind the farther user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoUserLine {
    pub wavenumber_rad_per_m: f64,
    pub n_tx: usize,
    /// Angle of the user ray measured from the +y axis.
    pub phi0_rad: f64,
    pub d1_m: f64,
    pub d_m: f64,
    pub wall_gap_m: f64,
    pub noise_ratio: f64,
}

/// Derived quantities of [`TwoUserLine`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoUserTerms {
    pub ly_m: f64,
    pub a1: f64,
    pub a2: f64,
    pub b: f64,
    pub k_bar: f64,
    pub user1: Point3,
    pub user2: Point3,
    pub virtual1: Point3,
    pub virtual2: Point3,
}

impl TwoUserLine {
    fn wavelength(&self) -> f64 {
        2.0 * PI / self.wavenumber_rad_per_m
    }

    pub fn array(&self) -> Result<ArrayGeometry> {
        make_ula(Point3::ORIGIN, self.n_tx, self.wavelength() / 2.0, Point3::new(0.0, 1.0, 0.0))
    }

    pub fn wall(&self) -> PlaneSpec {
        let dir = Point3::new(self.phi0_rad.sin(), self.phi0_rad.cos(), 0.0);
        let u2 = dir * (self.d1_m + self.d_m);
        let origin = Point3::new(u2.x + self.wall_gap_m, u2.y, 0.0);
        // Normal −x faces the array.
        PlaneSpec {
            origin,
            normal: Point3::new(-1.0, 0.0, 0.0),
            axis_u: Point3::new(0.0, 0.0, 1.0),
            axis_v: Point3::new(0.0, 1.0, 0.0),
            length_u: 1e4,
            length_v: 1e4,
        }
    }

    pub fn terms(&self) -> Result<TwoUserTerms> {
        if !(self.d1_m > 0.0 && self.d_m > 0.0 && self.wall_gap_m > 0.0 && self.n_tx > 0) {
            return invalid("distances, gap and n_tx must be positive");
        }
        let k = self.wavenumber_rad_per_m;
        let dir = Point3::new(self.phi0_rad.sin(), self.phi0_rad.cos(), 0.0);
        if !(dir.x > 0.0) {
            return invalid("users must lie on the +x side of the array");
        }
        let (d1, d2) = (self.d1_m, self.d1_m + self.d_m);
        let user1 = dir * d1;
        let user2 = dir * d2;
        let wall = self.wall();
        let virtual1 = mirror_point(user1, &wall);
        let virtual2 = mirror_point(user2, &wall);
        let (dv1, dv2) = (virtual1.norm(), virtual2.norm());
        let (c1, c2) = (virtual1.y / dv1, virtual2.y / dv2);
        let (s1, s2) = (1.0 - c1 * c1, 1.0 - c2 * c2);
        Ok(TwoUserTerms {
            ly_m: self.n_tx as f64 * self.wavelength() / 2.0,
            a1: k * self.phi0_rad.sin().powi(2) / 2.0 * self.d_m / (d1 * d2),
            a2: 0.5 * k * (s1 / dv1 - s2 / dv2).abs(),
            b: k * (c1 - c2),
            k_bar: d1 / dv1,
            user1,
            user2,
            virtual1,
            virtual2,
        })
    }

    /// Closed-form LOS and NLOS SINR of user 1.
    pub fn closed_form_sinr(&self) -> Result<(f64, f64)> {
        let t = self.terms()?;
        Ok((
            sinr_los_closed_form(t.a1, t.ly_m, self.noise_ratio)?,
            sinr_nlos_closed_form(t.a2, t.b, t.ly_m, t.k_bar, self.noise_ratio)?,
        ))
    }

    /// Element-wise evaluation with exact distances: both beams from the same
    /// aperture, normalized channel and weights, side lobes through the other
    /// path neglected.
    pub fn discrete_sinr(&self) -> Result<(f64, f64)> {
        let t = self.terms()?;
        let array = self.array()?;
        let k = self.wavenumber_rad_per_m;
        let cross = |a: Point3, b: Point3| -> f64 {
            let n = array.len() as f64;
            let s: Complex64 = array
                .elements()
                .iter()
                .map(|p| Complex64::from_polar(1.0, k * (p.distance(a) - p.distance(b))))
                .sum();
            (s / n).norm_sqr()
        };
        let los = 1.0 / (cross(t.user1, t.user2) + self.noise_ratio);
        let nlos = 1.0 / (cross(t.virtual1, t.virtual2) + self.noise_ratio / (t.k_bar * t.k_bar));
        Ok((los, nlos))
    }

    /// Element-wise evaluation with each distance expanded to second order
    /// about the array center: r ≈ d − y cos φ + y² sin²φ/(2d).
    pub fn discrete_sinr_expanded(&self) -> Result<(f64, f64)> {
        let t = self.terms()?;
        let array = self.array()?;
        let k = self.wavenumber_rad_per_m;
        let approx = |p: Point3, y: f64| -> f64 {
            let d = p.norm();
            let c = p.y / d;
            d - y * c + y * y * (1.0 - c * c) / (2.0 * d)
        };
        let cross = |a: Point3, b: Point3| -> f64 {
            let n = array.len() as f64;
            let s: Complex64 = array
                .elements()
                .iter()
                .map(|p| Complex64::from_polar(1.0, k * (approx(a, p.y) - approx(b, p.y))))
                .sum();
            (s / n).norm_sqr()
        };
        let los = 1.0 / (cross(t.user1, t.user2) + self.noise_ratio);
        let nlos = 1.0 / (cross(t.virtual1, t.virtual2) + self.noise_ratio / (t.k_bar * t.k_bar));
        Ok((los, nlos))
    }
}
