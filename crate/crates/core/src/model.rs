//! Closed-form channel components.
//!
//! Covers the LOS and point-scatterer matrices, the image-theory reflector
//! term with its roughness attenuation, spatial-correlation kernels, the
//! diffuse power laws (uncorrelated and Gaussian-correlated surfaces) and a
//! sampler for the deterministic-plus-stochastic reflector channel.
//!
//! Gain conventions. [`deterministic_reflector`] returns
//! c̄(g) = (ζ/(jλ))·e^{−g/2}/‖u_vrx − u_tx‖. The diffuse floor |c̃_∞|² is
//! expressed in the same units: the received-power ratio of the diffuse
//! (D_r = 2) scatterer divided by the received-power ratio of the specular
//! path, times |c̄(0)|². All comparisons against the oracle are made on
//! ratios to the flat-surface value, so only this dimensionless ratio
//! matters. [`specular_field_coefficient`] gives the flat-surface limit of
//! the oracle integral itself.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelMatrix, Provenance};
use crate::error::{invalid, Error, Result};
use crate::geometry::{mirror_point, nf_array_response, ArrayGeometry, PlaneSpec, Point3};
use crate::special::gauss_legendre;
use crate::surface::RoughSurface;

// ---------------------------------------------------------------------------
// LOS and scatterers
// ---------------------------------------------------------------------------

/// `[H]_{m,n} = exp(jκ‖u_rx,m − u_tx,n‖)`.
pub fn los_matrix(tx: &ArrayGeometry, rx: &ArrayGeometry, wavenumber: f64) -> ChannelMatrix {
    ChannelMatrix::from_fn(rx.len(), tx.len(), Provenance::AnalyticDeterministic, |m, n| {
        Complex64::from_polar(1.0, wavenumber * rx.elements()[m].distance(tx.elements()[n]))
    })
}

/// Rank-one point-scatterer matrix a_rx(u_s) a_txᵀ(u_s).
pub fn scatterer_matrix(
    tx: &ArrayGeometry,
    rx: &ArrayGeometry,
    scatterer: Point3,
    wavenumber: f64,
) -> Result<ChannelMatrix> {
    if tx.elements().iter().chain(rx.elements()).any(|&p| p.distance(scatterer) == 0.0) {
        return invalid("scatterer coincides with an array element");
    }
    let a_tx = nf_array_response(tx, scatterer, wavenumber);
    let a_rx = nf_array_response(rx, scatterer, wavenumber);
    Ok(ChannelMatrix::from_fn(rx.len(), tx.len(), Provenance::AnalyticDeterministic, |m, n| a_rx[m] * a_tx[n]))
}

// ---------------------------------------------------------------------------
// Roughness and image theory
// ---------------------------------------------------------------------------

/// Specular attenuation e^{−g/2}.
pub fn roughness_attenuation(g: f64) -> f64 {
    (-0.5 * g).exp()
}

/// κ_z = κ(cos θ_tx + cos θ_rx) with angles measured from the surface normal at the patch center.
pub fn kappa_z(tx: Point3, rx: Point3, plane: &PlaneSpec, wavenumber: f64) -> f64 {
    let cos = |p: Point3| plane.height_of(p) / p.distance(plane.origin);
    wavenumber * (cos(tx) + cos(rx))
}

/// Roughness parameter g = (κ_z σ_z)² for the array centers.
pub fn roughness_g(tx: Point3, rx: Point3, surface: &RoughSurface, wavenumber: f64) -> f64 {
    (kappa_z(tx, rx, &surface.plane, wavenumber) * surface.sigma_z).powi(2)
}

fn check_front(points: impl IntoIterator<Item = Point3>, plane: &PlaneSpec) -> Result<()> {
    for p in points {
        if plane.height_of(p) <= 0.0 {
            return invalid(format!("point {p:?} is not in front of the reflecting surface"));
        }
    }
    Ok(())
}

/// Deterministic reflector term: c̄(g) = (ζ/(jλ)) e^{−g/2}/‖u_vrx − u_tx‖ (array centers)
/// and H̄ with entries exp(jκ‖u_vrx,m − u_tx,n‖).
pub fn deterministic_reflector(
    tx: &ArrayGeometry,
    rx: &ArrayGeometry,
    surface: &RoughSurface,
    wavenumber: f64,
) -> Result<(Complex64, ChannelMatrix)> {
    surface.validate()?;
    let plane = &surface.plane;
    check_front(tx.elements().iter().chain(rx.elements()).copied(), plane)?;
    let lambda = 2.0 * PI / wavenumber;
    let g = roughness_g(tx.center(), rx.center(), surface, wavenumber);
    let d = mirror_point(rx.center(), plane).distance(tx.center());
    let c = Complex64::new(0.0, -surface.passivity / lambda) * (roughness_attenuation(g) / d);
    let vrx = rx.mirrored(plane);
    let h = ChannelMatrix::from_fn(rx.len(), tx.len(), Provenance::AnalyticDeterministic, |m, n| {
        Complex64::from_polar(1.0, wavenumber * vrx.elements()[m].distance(tx.elements()[n]))
    });
    Ok((c, h))
}

/// H̄ built from the mirrored transmitter instead of the mirrored receiver.
pub fn image_matrix_from_virtual_tx(
    tx: &ArrayGeometry,
    rx: &ArrayGeometry,
    plane: &PlaneSpec,
    wavenumber: f64,
) -> ChannelMatrix {
    let vtx = tx.mirrored(plane);
    ChannelMatrix::from_fn(rx.len(), tx.len(), Provenance::AnalyticDeterministic, |m, n| {
        Complex64::from_polar(1.0, wavenumber * rx.elements()[m].distance(vtx.elements()[n]))
    })
}

/// Flat-surface limit of the oracle integral by stationary phase:
/// ζ cos²θ_i e^{jκd'}/d', with d' the image distance and θ_i the incidence
/// angle at the specular point. Equals jλ cos²θ_i · c̄(0) e^{jκd'}.
pub fn specular_field_coefficient(tx: Point3, rx: Point3, surface: &RoughSurface, wavenumber: f64) -> Result<Complex64> {
    let plane = &surface.plane;
    check_front([tx, rx], plane)?;
    let d = mirror_point(rx, plane).distance(tx);
    let cos_i = (plane.height_of(tx) + plane.height_of(rx)) / d;
    Ok(Complex64::from_polar(surface.passivity * cos_i * cos_i / d, wavenumber * d))
}

// ---------------------------------------------------------------------------
// Spatial correlation
// ---------------------------------------------------------------------------

fn pair_frame(pair: (Point3, Point3)) -> (f64, Point3, Point3) {
    let d = pair.1 - pair.0;
    let len = d.norm();
    let axis = d.normalized().unwrap_or(Point3::new(0.0, 0.0, 1.0));
    (len, axis, (pair.0 + pair.1) * 0.5)
}

/// Sine of the local elevation of surface point `u` seen from the pair midpoint,
/// in the frame whose polar axis runs from the first to the second element.
fn local_sin_elevation(u: Point3, axis: Point3, mid: Point3) -> f64 {
    let r = u - mid;
    axis.dot(r) / r.norm()
}

/// Normalized spatial correlation between element pairs under diffuse scattering:
/// (1/|U|)∬ exp(jκ(d_rx sin θ_rx(u) + d_tx sin θ_tx(u))) dx dy over the patch.
///
/// Pairs are ordered: `(u_m, u_m')` correlates c_m with c_m'^*. Swapping the order
/// of both pairs conjugates the result.
pub fn spatial_correlation_integral(
    tx_pair: (Point3, Point3),
    rx_pair: (Point3, Point3),
    plane: &PlaneSpec,
    wavenumber: f64,
) -> Result<Complex64> {
    if !(plane.area() > 0.0) {
        return invalid("zero-area surface");
    }
    let lambda = 2.0 * PI / wavenumber;
    let (d_tx, ax_tx, mid_tx) = pair_frame(tx_pair);
    let (d_rx, ax_rx, mid_rx) = pair_frame(rx_pair);
    for (d, mid) in [(d_tx, mid_tx), (d_rx, mid_rx)] {
        let h = plane.height_of(mid);
        if d > 0.0 && 2.0 * d * d / lambda >= h {
            log::warn!("pair separation {d:.3e} m violates 2d²/λ < {h:.3} m");
        }
    }
    if d_tx == 0.0 && d_rx == 0.0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    // Phase varies by at most 2κ(d_tx + d_rx) across the patch.
    let span = 2.0 * wavenumber * (d_tx + d_rx);
    let panels = ((span / PI).ceil() as usize).clamp(4, 400);
    let (x, w) = gauss_legendre(8);
    let nodes = |len: f64| -> Vec<(f64, f64)> {
        let h = len / panels as f64;
        (0..panels)
            .flat_map(|p| {
                let c = -0.5 * len + (p as f64 + 0.5) * h;
                x.iter().zip(&w).map(move |(xi, wi)| (c + 0.5 * h * xi, 0.5 * h * wi)).collect::<Vec<_>>()
            })
            .collect()
    };
    let nu = nodes(plane.length_u);
    let nv = nodes(plane.length_v);
    let mut acc = Complex64::new(0.0, 0.0);
    for &(t, wt) in &nv {
        let mut row = Complex64::new(0.0, 0.0);
        for &(s, ws) in &nu {
            let u = plane.from_local(Point3::new(s, t, 0.0));
            let mut ph = 0.0;
            if d_rx > 0.0 {
                ph += d_rx * local_sin_elevation(u, ax_rx, mid_rx);
            }
            if d_tx > 0.0 {
                ph += d_tx * local_sin_elevation(u, ax_tx, mid_tx);
            }
            row += Complex64::from_polar(ws, wavenumber * ph);
        }
        acc += row * wt;
    }
    Ok(acc / plane.area())
}

/// |R| = sinc((2d/λ) cos((θ₂+θ₁)/2) sin((θ₂−θ₁)/2)) for isotropic scattering
/// within local elevations θ₁ < θ < θ₂. May be negative (signed sinc).
pub fn spatial_correlation_sinc(d: f64, theta1: f64, theta2: f64, wavelength: f64) -> f64 {
    crate::special::sinc(2.0 * d / wavelength * (0.5 * (theta2 + theta1)).cos() * (0.5 * (theta2 - theta1)).sin())
}

/// Pair axis along the direction to the scattering region: sinc((2d/λ) sin²(θ_c/2)).
pub fn correlation_aligned(d: f64, theta_c: f64, wavelength: f64) -> f64 {
    spatial_correlation_sinc(d, -0.5 * PI, -0.5 * PI + theta_c, wavelength)
}

/// Pair axis perpendicular to the direction to the scattering region: sinc((2d/λ) sin(θ_c/2)).
pub fn correlation_perpendicular(d: f64, theta_c: f64, wavelength: f64) -> f64 {
    spatial_correlation_sinc(d, -0.5 * theta_c, 0.5 * theta_c, wavelength)
}

/// Range `(θ₁, θ₂)` of local elevations of the patch seen from `point` with
/// polar axis `axis`, scanned on a dense grid (edges included).
pub fn angular_window(point: Point3, axis: Point3, plane: &PlaneSpec) -> (f64, f64) {
    let axis = axis.normalized().unwrap_or(Point3::new(0.0, 0.0, 1.0));
    let n = 400;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..=n {
        for j in 0..=n {
            let s = plane.length_u * (i as f64 / n as f64 - 0.5);
            let t = plane.length_v * (j as f64 / n as f64 - 0.5);
            let v = local_sin_elevation(plane.from_local(Point3::new(s, t, 0.0)), axis, point);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    (lo.clamp(-1.0, 1.0).asin(), hi.clamp(-1.0, 1.0).asin())
}

// ---------------------------------------------------------------------------
// Diffuse power laws
// ---------------------------------------------------------------------------

/// Inputs of the diffuse-floor law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiffuseParams {
    /// Effective Rx aperture A_rx, m².
    pub rx_aperture: f64,
    /// Reflector area A_r, m².
    pub reflector_area: f64,
    /// Tx directivity toward the reflector.
    pub tx_directivity: f64,
    /// Reflector directivity D_r.
    pub reflector_directivity: f64,
}

impl DiffuseParams {
    /// Single isotropic elements (A_rx = λ²/4π, D_tx = 1), D_r = 2.
    pub fn isotropic(wavelength: f64, reflector_area: f64) -> Self {
        Self {
            rx_aperture: wavelength * wavelength / (4.0 * PI),
            reflector_area,
            tx_directivity: 1.0,
            reflector_directivity: 2.0,
        }
    }
}

/// Received-to-transmitted power ratio of a diffusely re-radiating reflector,
/// with the passivity factor applied to the field (ζ²).
pub fn diffuse_power_ratio(params: &DiffuseParams, passivity: f64, u_tx: f64, u_rx: f64) -> f64 {
    passivity
        * passivity
        * (params.rx_aperture * params.reflector_directivity / (4.0 * PI * u_rx * u_rx))
        * (params.reflector_area * params.tx_directivity / (4.0 * PI * u_tx * u_tx))
}

/// Diffuse power laws for an uncorrelated surface.
///
/// Returns `(|c̃_∞|², E|c̃(g)|², E|c|²)` in the units of `|c̄(0)|²`:
/// |c̃_∞|² = |c̄(0)|² · P_diffuse / P_specular with P_specular = ζ²A_rx/(4π d'²),
/// E|c̃(g)|² = (1 − e^{−g/2})² |c̃_∞|², E|c|² = |c̄(0)|² e^{−g} + E|c̃(g)|².
pub fn power_gain_uncorrelated(
    c_bar_flat_sq: f64,
    g: f64,
    d_virtual: f64,
    u_tx: f64,
    u_rx: f64,
    passivity: f64,
    params: &DiffuseParams,
) -> (f64, f64, f64) {
    let p_spec = passivity * passivity * params.rx_aperture / (4.0 * PI * d_virtual * d_virtual);
    let c_inf = c_bar_flat_sq * diffuse_power_ratio(params, passivity, u_tx, u_rx) / p_spec;
    let stoch = (1.0 - roughness_attenuation(g)).powi(2) * c_inf;
    (c_inf, stoch, c_bar_flat_sq * (-g).exp() + stoch)
}

/// The two closed forms offered for the in-plane amplitude A, and the
/// amplitude fitted numerically from the phase term cos Ψ_tx + cos Ψ_rx.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KappaRhoFit {
    /// √((a_tx + a_rx cos φ_c)² + a_rx²).
    pub a_literal: f64,
    /// √((a_tx + a_rx cos φ_c)² + a_rx² sin²φ_c).
    pub a_projected: f64,
    pub a_fitted: f64,
    /// κ·A for whichever closed form is closer to the fit.
    pub kappa_rho: f64,
    pub projected_selected: bool,
}

fn in_plane_direction(p: Point3, plane: &PlaneSpec) -> (f64, f64) {
    let l = plane.to_local(p);
    let r = l.norm();
    let (x, y) = (l.x / r, l.y / r);
    ((x * x + y * y).sqrt(), y.atan2(x))
}

/// Evaluates both closed forms for A and the numerical amplitude fit.
pub fn kappa_rho_fit(tx: Point3, rx: Point3, plane: &PlaneSpec, wavenumber: f64) -> KappaRhoFit {
    let (a_tx, phi_tx) = in_plane_direction(tx, plane);
    let (a_rx, phi_rx) = in_plane_direction(rx, plane);
    let phi_c = phi_rx - phi_tx;
    let lead = a_tx + a_rx * phi_c.cos();
    let a_literal = (lead * lead + a_rx * a_rx).sqrt();
    let a_projected = (lead * lead + (a_rx * phi_c.sin()).powi(2)).sqrt();

    // cos Ψ for a vanishing in-plane step ρ̂ from the patch center, projected on cos φ, sin φ.
    let dir_tx = (tx - plane.origin).normalized().unwrap_or(plane.normal);
    let dir_rx = (rx - plane.origin).normalized().unwrap_or(plane.normal);
    let n = 3600;
    let (mut ca, mut sa) = (0.0, 0.0);
    for i in 0..n {
        let phi = 2.0 * PI * i as f64 / n as f64;
        let rho = plane.axis_u * phi.cos() + plane.axis_v * phi.sin();
        let f = rho.dot(dir_tx) + rho.dot(dir_rx);
        ca += f * phi.cos();
        sa += f * phi.sin();
    }
    let a_fitted = 2.0 / n as f64 * (ca * ca + sa * sa).sqrt();
    let projected_selected = (a_projected - a_fitted).abs() <= (a_literal - a_fitted).abs();
    let a = if projected_selected { a_projected } else { a_literal };
    KappaRhoFit { a_literal, a_projected, a_fitted, kappa_rho: wavenumber * a, projected_selected }
}

/// In-plane wavenumber κ_ρ = κA.
pub fn kappa_rho(tx: Point3, rx: Point3, plane: &PlaneSpec, wavenumber: f64) -> f64 {
    kappa_rho_fit(tx, rx, plane, wavenumber).kappa_rho
}

/// Closed-form parameter bundle of one reflector for a Tx/Rx array pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReflectorModel {
    pub surface: RoughSurface,
    pub g: f64,
    pub kappa_z: f64,
    pub kappa_rho: f64,
    /// Smoothness index S = (κ_ρ ℓ)²/(2κ_z σ_z)²; infinite for σ_z = 0 with ℓ > 0.
    pub s: f64,
    /// c̄(0).
    pub c_bar_flat: Complex64,
    /// |c̃_∞|² in the units of |c̄(0)|².
    pub c_tilde_inf_sq: f64,
    pub virtual_tx: ArrayGeometry,
    pub virtual_rx: ArrayGeometry,
}

/// S = (κ_ρ ℓ)²/(2κ_z σ_z)².
pub fn s_parameter(kappa_rho: f64, corr_len: f64, kappa_z: f64, sigma_z: f64) -> f64 {
    let num = (kappa_rho * corr_len).powi(2);
    let den = (2.0 * kappa_z * sigma_z).powi(2);
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

impl ReflectorModel {
    pub fn new(
        surface: &RoughSurface,
        tx: &ArrayGeometry,
        rx: &ArrayGeometry,
        wavenumber: f64,
        params: &DiffuseParams,
    ) -> Result<Self> {
        let flat = RoughSurface { sigma_z: 0.0, ..*surface };
        let (c_bar_flat, _) = deterministic_reflector(tx, rx, &flat, wavenumber)?;
        let plane = &surface.plane;
        let (tc, rc) = (tx.center(), rx.center());
        let kz = kappa_z(tc, rc, plane, wavenumber);
        let krho = kappa_rho(tc, rc, plane, wavenumber);
        let g = (kz * surface.sigma_z).powi(2);
        let d_virtual = mirror_point(rc, plane).distance(tc);
        let (c_inf, _, _) = power_gain_uncorrelated(
            c_bar_flat.norm_sqr(),
            g,
            d_virtual,
            tc.distance(plane.origin),
            rc.distance(plane.origin),
            surface.passivity,
            params,
        );
        Ok(Self {
            surface: *surface,
            g,
            kappa_z: kz,
            kappa_rho: krho,
            s: s_parameter(krho, surface.corr_len, kz, surface.sigma_z),
            c_bar_flat,
            c_tilde_inf_sq: c_inf,
            virtual_tx: tx.mirrored(plane),
            virtual_rx: rx.mirrored(plane),
        })
    }

    /// c̄(g) = c̄(0) e^{−g/2}.
    pub fn c_bar(&self) -> Complex64 {
        self.c_bar_flat * roughness_attenuation(self.g)
    }

    /// E|c̃(g)|² for an uncorrelated surface.
    pub fn stochastic_power(&self) -> f64 {
        (1.0 - roughness_attenuation(self.g)).powi(2) * self.c_tilde_inf_sq
    }

    /// Rescales both gains so that c̄(0) becomes `c_bar_flat`, keeping their ratio.
    pub fn with_flat_gain(mut self, c_bar_flat: Complex64) -> Self {
        let ratio = self.c_tilde_inf_sq / self.c_bar_flat.norm_sqr();
        self.c_bar_flat = c_bar_flat;
        self.c_tilde_inf_sq = ratio * c_bar_flat.norm_sqr();
        self
    }

    /// |c̃_∞|²/|c̄(0)|².
    pub fn floor_ratio(&self) -> f64 {
        self.c_tilde_inf_sq / self.c_bar_flat.norm_sqr()
    }
}

/// Lower root of S e^{1−S} = ratio on (0, 1), bisected until the bracket collapses.
pub fn s_min(ratio: f64) -> Result<f64> {
    if !(ratio > 0.0) {
        return invalid(format!("floor ratio must be positive, got {ratio}"));
    }
    if ratio >= 1.0 {
        return invalid(format!(
            "diffuse floor |c̃_∞|²/|c̄(0)|² = {ratio} is not below the specular level"
        ));
    }
    let f = |s: f64| s * (1.0 - s).exp() - ratio;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = if f(lo).abs() <= f(hi).abs() { lo } else { hi };
    if (f(root) / ratio).abs() > 1e-10 {
        return Err(Error::Numerical(format!("S_min bisection stalled at residual {}", f(root))));
    }
    Ok(root)
}

/// Piecewise power law in S: |c̄(0)|² for S ≥ 1, |c̄(0)|² S e^{1−S} for
/// S_min < S < 1, |c̃_∞|² for S ≤ S_min.
pub fn power_gain_from_s(s: f64, c_bar_flat_sq: f64, c_tilde_inf_sq: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return invalid("S must be non-negative");
    }
    let smin = s_min(c_tilde_inf_sq / c_bar_flat_sq)?;
    Ok(if s >= 1.0 {
        c_bar_flat_sq
    } else if s > smin {
        c_bar_flat_sq * s * (1.0 - s).exp()
    } else {
        c_tilde_inf_sq
    })
}

/// Channel power gain of a reflector whose surface has correlation length `corr_len`.
pub fn power_gain_correlated(reflector: &ReflectorModel, corr_len: f64) -> Result<f64> {
    if !(reflector.kappa_z > 0.0 && reflector.surface.sigma_z > 0.0) {
        return invalid("correlated power law needs κ_z > 0 and σ_z > 0");
    }
    if !(corr_len >= 0.0 && corr_len.is_finite()) {
        return invalid("corr_len must be finite and non-negative");
    }
    let s = s_parameter(reflector.kappa_rho, corr_len, reflector.kappa_z, reflector.surface.sigma_z);
    power_gain_from_s(s, reflector.c_bar_flat.norm_sqr(), reflector.c_tilde_inf_sq)
}

// ---------------------------------------------------------------------------
// Sampled reflector channel
// ---------------------------------------------------------------------------

/// How the stochastic entries of a sampled reflector channel are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StochasticMode {
    /// I.i.d. CN(0, 1) entries.
    #[default]
    Iid,
    /// Entries colored with the spatial-correlation kernel of the element pairs.
    Correlated,
}

fn cn01(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Lower Cholesky factor of a Hermitian positive semi-definite matrix (row-major),
/// with a small diagonal load if needed.
fn cholesky(a: &[Complex64], n: usize) -> Result<Vec<Complex64>> {
    for jitter in [0.0, 1e-12, 1e-9, 1e-6] {
        let mut l = vec![Complex64::new(0.0, 0.0); n * n];
        let mut ok = true;
        'outer: for i in 0..n {
            for j in 0..=i {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                if i == j {
                    let d = s.re + jitter;
                    if d <= 0.0 {
                        ok = false;
                        break 'outer;
                    }
                    l[i * n + i] = Complex64::new(d.sqrt(), 0.0);
                } else {
                    l[i * n + j] = s / l[j * n + j].re;
                }
            }
        }
        if ok {
            return Ok(l);
        }
    }
    Err(Error::Numerical("correlation matrix is not positive semi-definite".into()))
}

/// Draws c̄(g)·H̄ + √(E|c̃(g)|²)·H̃ for the model's reflector.
pub fn sample_reflector_channel(
    model: &ReflectorModel,
    tx: &ArrayGeometry,
    rx: &ArrayGeometry,
    wavenumber: f64,
    seed: u64,
    mode: StochasticMode,
) -> Result<ChannelMatrix> {
    let (_, hbar) = deterministic_reflector(tx, rx, &model.surface, wavenumber)?;
    let mut h = hbar.scaled(model.c_bar());
    h.provenance = Provenance::AnalyticSampled;
    let sd = model.stochastic_power().sqrt();
    if sd == 0.0 {
        return Ok(h);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n_rx, n_tx) = h.shape();
    let n = n_rx * n_tx;
    let white: Vec<Complex64> = (0..n).map(|_| cn01(&mut rng)).collect();
    let draw = match mode {
        StochasticMode::Iid => white,
        StochasticMode::Correlated => {
            let mut cov = vec![Complex64::new(0.0, 0.0); n * n];
            let idx = |m: usize, k: usize| m * n_tx + k;
            for m in 0..n_rx {
                for k in 0..n_tx {
                    for m2 in 0..n_rx {
                        for k2 in 0..n_tx {
                            let r = spatial_correlation_integral(
                                (tx.elements()[k], tx.elements()[k2]),
                                (rx.elements()[m], rx.elements()[m2]),
                                &model.surface.plane,
                                wavenumber,
                            )?;
                            cov[idx(m, k) * n + idx(m2, k2)] = r;
                        }
                    }
                }
            }
            let l = cholesky(&cov, n)?;
            (0..n).map(|i| (0..=i).map(|j| l[i * n + j] * white[j]).sum()).collect()
        }
    };
    for m in 0..n_rx {
        for k in 0..n_tx {
            let v = h.get(m, k) + draw[m * n_tx + k] * sd;
            h.set(m, k, v);
        }
    }
    Ok(h)
}

