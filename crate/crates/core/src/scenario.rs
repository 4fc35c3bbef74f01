//! Scenario files and channel assembly.
//!
//! A scenario is a strict JSON document: unknown fields are rejected and
//! every physical quantity carries its unit in the field name. Optional
//! sections are filled with defaults, so serializing a loaded scenario
//! echoes the complete resolved configuration.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::Path;
use std::sync::Mutex;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelMatrix, Provenance};
use crate::error::{invalid, Error, Result};
use crate::geometry::{make_ula, make_upa, mirror_point, wavelength, wavenumber, ArrayGeometry, PlaneSpec, Point3};
use crate::model::{los_matrix, sample_reflector_channel, scatterer_matrix, DiffuseParams, ReflectorModel, StochasticMode};
use crate::multiuser::{
    dbm_to_w, nf_focus_beamformer, nlos_focus_beamformer, smr, sum_rate as rate_of, Beamformer, NoiseModel,
};
use crate::surface::{split_seed, RoughSurface};

fn d_one() -> f64 {
    1.0
}
fn d_half() -> f64 {
    0.5
}
fn d_count() -> usize {
    1
}
fn d_seed() -> u64 {
    1
}
fn d_axis_x() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}
fn d_axis_y() -> [f64; 3] {
    [0.0, 1.0, 0.0]
}

/// Uniform planar array; `n_u` elements along `axis_u`, `n_v` along `axis_v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySpec {
    pub center_m: [f64; 3],
    #[serde(default = "d_count")]
    pub n_u: usize,
    #[serde(default = "d_count")]
    pub n_v: usize,
    #[serde(default = "d_half")]
    pub spacing_wavelengths: f64,
    #[serde(default = "d_axis_x")]
    pub axis_u: [f64; 3],
    #[serde(default = "d_axis_y")]
    pub axis_v: [f64; 3],
}

impl ArraySpec {
    pub fn single(center_m: [f64; 3]) -> Self {
        Self { center_m, n_u: 1, n_v: 1, spacing_wavelengths: 0.5, axis_u: d_axis_x(), axis_v: d_axis_y() }
    }

    pub fn build(&self, lambda: f64) -> Result<ArrayGeometry> {
        make_upa(
            Point3::from_array(self.center_m),
            self.n_u,
            self.n_v,
            self.spacing_wavelengths * lambda,
            (Point3::from_array(self.axis_u), Point3::from_array(self.axis_v)),
        )
    }

    /// Extent along `axis_u`, m.
    pub fn length_u(&self, lambda: f64) -> f64 {
        self.n_u as f64 * self.spacing_wavelengths * lambda
    }
}

/// A mobile user with an `n_rx`-element ULA along `array_axis`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserSpec {
    pub position_m: [f64; 3],
    #[serde(default = "d_count")]
    pub n_rx: usize,
    #[serde(default = "d_axis_x")]
    pub array_axis: [f64; 3],
}

impl UserSpec {
    pub fn position(&self) -> Point3 {
        Point3::from_array(self.position_m)
    }

    pub fn build(&self, lambda: f64) -> Result<ArrayGeometry> {
        if self.n_rx == 1 {
            return Ok(ArrayGeometry::single(self.position()));
        }
        make_ula(self.position(), self.n_rx, 0.5 * lambda, Point3::from_array(self.array_axis))
    }
}

/// Point scatterer with a loss factor l̂.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScattererSpec {
    pub position_m: [f64; 3],
    #[serde(default = "d_one")]
    pub loss: f64,
}

/// Rectangular reflecting surface. `axis_u × axis_v` must point toward the users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReflectorSpec {
    pub center_m: [f64; 3],
    pub axis_u: [f64; 3],
    pub axis_v: [f64; 3],
    pub length_u_m: f64,
    pub length_v_m: f64,
    #[serde(default)]
    pub sigma_z_m: f64,
    #[serde(default)]
    pub corr_len_m: f64,
    #[serde(default = "d_one")]
    pub passivity: f64,
    /// Specular loss l̄. Ignored when `k_bar_target` is set.
    #[serde(default = "d_one")]
    pub loss_factor: f64,
    /// Requested specular Rician factor k̄ of the first user; l̄ is solved from it.
    #[serde(default)]
    pub k_bar_target: Option<f64>,
}

impl ReflectorSpec {
    pub fn plane(&self) -> Result<PlaneSpec> {
        PlaneSpec::new(
            Point3::from_array(self.center_m),
            Point3::from_array(self.axis_u),
            Point3::from_array(self.axis_v),
            self.length_u_m,
            self.length_v_m,
        )
    }

    /// Surface statistics; the loss factor lives at scenario level and is not stored here.
    pub fn surface(&self) -> Result<RoughSurface> {
        RoughSurface::new(self.plane()?, self.sigma_z_m, self.corr_len_m, self.passivity, 1.0)
    }
}

/// |c0|² = β·(d/d0)^{−η}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLossSpec {
    pub beta_db: f64,
    #[serde(default = "d_one")]
    pub d0_m: f64,
    pub exponent: f64,
}

impl PathLossSpec {
    /// Amplitude √β·(d/d0)^{−η/2}.
    pub fn amplitude(&self, d: f64) -> f64 {
        10f64.powf(self.beta_db / 20.0) * (d / self.d0_m).powf(-0.5 * self.exponent)
    }
}

impl Default for PathLossSpec {
    /// Free space at the given carrier is frequency dependent; this default is
    /// only a placeholder when no path-loss section is given.
    fn default() -> Self {
        Self { beta_db: 0.0, d0_m: 1.0, exponent: 2.0 }
    }
}

/// HF-oracle discretization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSpec {
    pub integration_step_wavelengths: f64,
    /// Side of the i.i.d. height cells for uncorrelated surfaces.
    pub surface_cell_wavelengths: f64,
    pub realizations: usize,
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self {
            integration_step_wavelengths: 0.125,
            surface_cell_wavelengths: 1.0 / (2.0 * PI).sqrt(),
            realizations: crate::stats::DEFAULT_REALIZATIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegimesSpec {
    pub rx_m: [f64; 3],
    pub kappa_sigma_z: Vec<f64>,
}

impl Default for RegimesSpec {
    fn default() -> Self {
        Self { rx_m: [1.0, 0.5, 30.0], kappa_sigma_z: vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdfSpec {
    pub rx_m: [f64; 3],
    pub kappa_sigma_z: Vec<f64>,
    pub realizations: usize,
    pub integration_step_wavelengths: f64,
}

impl Default for PdfSpec {
    fn default() -> Self {
        Self { rx_m: [1.0, 0.5, 30.0], kappa_sigma_z: vec![0.0, 0.5, 3.0], realizations: 500, integration_step_wavelengths: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrelationSpec {
    /// Reference antenna; the second antenna is displaced along the surface
    /// normal (aligned) or along `axis_u` (perpendicular).
    pub rx_reference_m: [f64; 3],
    pub kappa_sigma_z: f64,
    pub separations_wavelengths: Vec<f64>,
    pub realizations: usize,
    pub integration_step_wavelengths: f64,
}

impl Default for CorrelationSpec {
    fn default() -> Self {
        Self {
            rx_reference_m: [0.0, 0.0, 5.0],
            kappa_sigma_z: 3.0,
            separations_wavelengths: (1..=12).map(|i| 0.25 * i as f64).collect(),
            realizations: 200,
            integration_step_wavelengths: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LengthCorrelationSpec {
    pub rx_m: [f64; 3],
    pub kappa_sigma_z: f64,
    /// S grid; S_min is always added.
    pub s_values: Vec<f64>,
    pub realizations: usize,
    pub integration_step_wavelengths: f64,
}

impl Default for LengthCorrelationSpec {
    fn default() -> Self {
        Self {
            rx_m: [1.0, 0.0, 20.0],
            kappa_sigma_z: 3.0,
            s_values: vec![0.01, 0.03, 0.1, 0.2, 0.3, 0.45, 0.6, 0.8, 1.0, 1.25, 1.5, 2.0],
            realizations: 200,
            integration_step_wavelengths: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SinrTradeoffSpec {
    pub n_tx: usize,
    /// Angle of the user ray from the array axis, rad.
    pub phi0_rad: f64,
    pub wall_gap_m: f64,
    pub noise_ratio: f64,
    /// d1 used while sweeping d.
    pub fixed_d1_m: f64,
    pub d_values_m: Vec<f64>,
    /// d used while sweeping d1.
    pub fixed_d_m: f64,
    pub d1_values_m: Vec<f64>,
}

impl Default for SinrTradeoffSpec {
    fn default() -> Self {
        Self {
            n_tx: 400,
            phi0_rad: 0.75 * PI,
            wall_gap_m: 1.0,
            noise_ratio: 0.1,
            fixed_d1_m: 5.0 * 2f64.sqrt(),
            d_values_m: (1..=40).map(|i| 0.25 * i as f64).collect(),
            fixed_d_m: 5.0,
            d1_values_m: (0..40).map(|i| 1.0 + 0.5 * i as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmrSpec {
    /// Element counts along the array's u axis; the v count is kept from the scenario.
    pub n_u_values: Vec<usize>,
    pub k_bar: f64,
}

impl Default for SmrSpec {
    fn default() -> Self {
        Self { n_u_values: (1..=200).map(|i| 2 * i).collect(), k_bar: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SumrateSpec {
    pub k_bar_targets: Vec<f64>,
}

impl Default for SumrateSpec {
    fn default() -> Self {
        Self { k_bar_targets: vec![1.0, 0.6, 0.2] }
    }
}

/// Per-experiment parameters; every section defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentParams {
    pub regimes: RegimesSpec,
    pub pdf: PdfSpec,
    pub correlation: CorrelationSpec,
    pub length_correlation: LengthCorrelationSpec,
    pub sinr_tradeoff: SinrTradeoffSpec,
    pub smr: SmrSpec,
    pub sumrate: SumrateSpec,
}

/// Complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub frequency_hz: f64,
    #[serde(default = "d_seed")]
    pub seed: u64,
    pub transmitter: ArraySpec,
    #[serde(default)]
    pub users: Vec<UserSpec>,
    #[serde(default)]
    pub scatterers: Vec<ScattererSpec>,
    #[serde(default)]
    pub reflectors: Vec<ReflectorSpec>,
    #[serde(default)]
    pub path_loss: PathLossSpec,
    #[serde(default)]
    pub noise: Option<NoiseModel>,
    #[serde(default)]
    pub power_grid_dbm: Vec<f64>,
    #[serde(default)]
    pub stochastic_mode: StochasticMode,
    #[serde(default)]
    pub oracle: OracleSpec,
    #[serde(default)]
    pub experiments: ExperimentParams,
}

fn finite3(name: &str, v: [f64; 3]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        invalid(format!("{name} must be finite"))
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Validation(format!("scenario: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn wavelength(&self) -> f64 {
        wavelength(self.frequency_hz)
    }

    pub fn wavenumber(&self) -> f64 {
        wavenumber(self.frequency_hz)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.frequency_hz > 0.0 && self.frequency_hz.is_finite()) {
            return invalid(format!("frequency_hz must be positive, got {}", self.frequency_hz));
        }
        let lam = self.wavelength();
        finite3("transmitter.center_m", self.transmitter.center_m)?;
        if !(self.transmitter.spacing_wavelengths > 0.0) {
            return invalid("transmitter.spacing_wavelengths must be positive");
        }
        let bs = self.transmitter.build(lam)?;
        for (i, u) in self.users.iter().enumerate() {
            finite3(&format!("users[{i}].position_m"), u.position_m)?;
            if u.n_rx == 0 {
                return invalid(format!("users[{i}].n_rx must be at least 1"));
            }
            let ua = u.build(lam)?;
            if ua.elements().iter().any(|p| bs.elements().iter().any(|q| q.distance(*p) == 0.0)) {
                return invalid(format!("users[{i}] overlaps the transmitter array"));
            }
        }
        for (i, s) in self.scatterers.iter().enumerate() {
            finite3(&format!("scatterers[{i}].position_m"), s.position_m)?;
            if !(s.loss > 0.0) {
                return invalid(format!("scatterers[{i}].loss must be positive"));
            }
        }
        for (i, r) in self.reflectors.iter().enumerate() {
            let surf = r.surface().map_err(|e| Error::Validation(format!("reflectors[{i}]: {e}")))?;
            if !(r.loss_factor > 0.0) {
                return invalid(format!("reflectors[{i}].loss_factor must be positive"));
            }
            if let Some(k) = r.k_bar_target {
                if !(k > 0.0 && k.is_finite()) {
                    return invalid(format!("reflectors[{i}].k_bar_target must be positive"));
                }
            }
            for p in bs.elements() {
                if surf.plane.height_of(*p) <= 0.0 {
                    return invalid(format!("reflectors[{i}]: transmitter is not in front of the surface"));
                }
            }
            for (j, u) in self.users.iter().enumerate() {
                if surf.plane.height_of(u.position()) <= 0.0 {
                    return invalid(format!("reflectors[{i}]: users[{j}] is not in front of the surface"));
                }
            }
        }
        if !(self.path_loss.d0_m > 0.0 && self.path_loss.exponent >= 0.0 && self.path_loss.beta_db.is_finite()) {
            return invalid("path_loss needs d0_m > 0, exponent >= 0 and finite beta_db");
        }
        if let Some(n) = &self.noise {
            if !(n.bandwidth_hz > 0.0 && n.n0_dbm_per_hz.is_finite() && n.noise_figure_db.is_finite()) {
                return invalid("noise needs bandwidth_hz > 0 and finite densities");
            }
        }
        if self.power_grid_dbm.iter().any(|p| !p.is_finite()) {
            return invalid("power_grid_dbm must be finite");
        }
        let o = &self.oracle;
        if !(o.integration_step_wavelengths > 0.0 && o.integration_step_wavelengths <= 0.25) {
            return invalid("oracle.integration_step_wavelengths must lie in (0, 0.25]");
        }
        if !(o.surface_cell_wavelengths > 0.0) || o.realizations == 0 {
            return invalid("oracle needs surface_cell_wavelengths > 0 and realizations >= 1");
        }
        let e = &self.experiments;
        for (name, step) in [
            ("pdf", e.pdf.integration_step_wavelengths),
            ("correlation", e.correlation.integration_step_wavelengths),
            ("length_correlation", e.length_correlation.integration_step_wavelengths),
        ] {
            if !(step > 0.0 && step <= 0.25) {
                return invalid(format!("experiments.{name}.integration_step_wavelengths must lie in (0, 0.25]"));
            }
        }
        if e.sinr_tradeoff.n_tx == 0 || !(e.sinr_tradeoff.noise_ratio >= 0.0) {
            return invalid("experiments.sinr_tradeoff needs n_tx >= 1 and noise_ratio >= 0");
        }
        if e.smr.n_u_values.contains(&0) || !(e.smr.k_bar > 0.0) {
            return invalid("experiments.smr needs positive element counts and k_bar");
        }
        if e.sumrate.k_bar_targets.iter().any(|k| !(*k > 0.0)) {
            return invalid("experiments.sumrate.k_bar_targets must be positive");
        }
        Ok(())
    }

    /// The first reflector, required by reflector-based experiments.
    pub fn primary_reflector(&self) -> Result<&ReflectorSpec> {
        self.reflectors.first().ok_or_else(|| Error::Validation("scenario has no reflector".into()))
    }

    pub fn noise_model(&self) -> Result<NoiseModel> {
        self.noise.ok_or_else(|| Error::Validation("scenario has no noise section".into()))
    }

    /// Copy with every reflector's k̄ target replaced.
    pub fn with_k_bar_target(&self, k_bar: f64) -> Self {
        let mut c = self.clone();
        for r in &mut c.reflectors {
            r.k_bar_target = Some(k_bar);
        }
        c
    }
}

/// Reads, parses and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Validation(format!("cannot read scenario {}: {e}", path.display())))?;
    let cfg = ScenarioConfig::from_json(&text)?;
    log::info!("loaded scenario '{}' from {}", cfg.name, path.display());
    log::debug!("resolved scenario: {}", cfg.to_json()?);
    Ok(cfg)
}

/// Generalized Rician factors of one user (gains relative to c0).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RicianFactors {
    pub c0: f64,
    pub k_hat: Vec<f64>,
    pub k_bar: Vec<f64>,
    pub k_tilde: Vec<f64>,
}

/// Channel of one user split into its components.
#[derive(Debug, Clone)]
pub struct UserChannel {
    pub los: ChannelMatrix,
    pub scatterers: Vec<ChannelMatrix>,
    /// Deterministic part c̄_r H̄_r per reflector.
    pub specular: Vec<ChannelMatrix>,
    /// Stochastic part c̃_r H̃_r per reflector.
    pub diffuse: Vec<ChannelMatrix>,
    pub factors: RicianFactors,
}

impl UserChannel {
    /// H = c0 H^LOS + Σ ĉ H^scr + Σ (c̄ H̄ + c̃ H̃).
    pub fn total(&self) -> Result<ChannelMatrix> {
        let mut h = self.los.clone();
        let one = Complex64::new(1.0, 0.0);
        for m in self.scatterers.iter().chain(&self.specular).chain(&self.diffuse) {
            h.add_scaled(m, one)?;
        }
        if !(self.scatterers.is_empty() && self.diffuse.iter().all(|m| m.as_slice().iter().all(|c| c.norm() == 0.0))) {
            h.provenance = Provenance::AnalyticSampled;
        }
        Ok(h)
    }

    /// Sum of the specular reflector components.
    pub fn nlos(&self) -> Result<ChannelMatrix> {
        let (r, t) = self.los.shape();
        let mut h = ChannelMatrix::zeros(r, t, Provenance::AnalyticDeterministic);
        for m in &self.specular {
            h.add_scaled(m, Complex64::new(1.0, 0.0))?;
        }
        Ok(h)
    }
}

/// Specular loss l̄ realizing `k_bar` for a user: k̄ = l̄·e^{−g/2}·(d/d′)^{η/2}.
pub fn solve_loss_factor(k_bar: f64, d_los: f64, d_virtual: f64, g: f64, exponent: f64) -> f64 {
    k_bar * (d_virtual / d_los).powf(0.5 * exponent) * (0.5 * g).exp()
}

fn specular_point_inside(tx: Point3, rx: Point3, plane: &PlaneSpec) -> bool {
    let v = mirror_point(rx, plane);
    let (ht, hv) = (plane.height_of(tx), plane.height_of(v));
    let t = ht / (ht - hv);
    let p = plane.to_local(Point3::new(tx.x + t * (v.x - tx.x), tx.y + t * (v.y - tx.y), tx.z + t * (v.z - tx.z)));
    p.x.abs() <= 0.5 * plane.length_u && p.y.abs() <= 0.5 * plane.length_v
}

/// Logs each distinct message once per process (sweeps rebuild channels per point).
fn warn_once(msg: String) {
    static SEEN: Mutex<BTreeSet<String>> = Mutex::new(BTreeSet::new());
    let mut seen = SEEN.lock().unwrap_or_else(|e| e.into_inner());
    if seen.insert(msg.clone()) {
        log::warn!("{msg}");
    }
}

/// Builds the channel of every user.
///
/// Reflector losses: when a reflector sets `k_bar_target`, l̄ is solved on the
/// first user and the same l̄ is applied to all users.
pub fn assemble_channels(cfg: &ScenarioConfig, seed: u64) -> Result<Vec<UserChannel>> {
    cfg.validate()?;
    if cfg.users.is_empty() {
        return invalid("scenario has no users");
    }
    let lam = cfg.wavelength();
    let k = cfg.wavenumber();
    let bs = cfg.transmitter.build(lam)?;
    let pl = &cfg.path_loss;
    let tc = bs.center();

    let mut losses = Vec::with_capacity(cfg.reflectors.len());
    for (i, r) in cfg.reflectors.iter().enumerate() {
        let surf = r.surface()?;
        let u0 = cfg.users[0].position();
        let g = crate::model::roughness_g(tc, u0, &surf, k);
        let l = match r.k_bar_target {
            Some(kb) => {
                let l = solve_loss_factor(kb, tc.distance(u0), mirror_point(u0, &surf.plane).distance(tc), g, pl.exponent);
                if l > 1.0 {
                    warn_once(format!("reflectors[{i}]: k_bar target {kb} needs specular loss {l:.4} > 1"));
                }
                l
            }
            None => r.loss_factor,
        };
        losses.push(l);
    }

    let mut out = Vec::with_capacity(cfg.users.len());
    for (ui, user) in cfg.users.iter().enumerate() {
        let ua = user.build(lam)?;
        let uc = ua.center();
        let d = tc.distance(uc);
        let c0 = pl.amplitude(d);
        let los = los_matrix(&bs, &ua, k).scaled(Complex64::new(c0, 0.0));

        let mut scatterers = Vec::new();
        let mut k_hat = Vec::new();
        for s in &cfg.scatterers {
            let sp = Point3::from_array(s.position_m);
            let c = s.loss * pl.amplitude(tc.distance(sp)) * pl.amplitude(sp.distance(uc));
            scatterers.push(scatterer_matrix(&bs, &ua, sp, k)?.scaled(Complex64::new(c, 0.0)));
            k_hat.push(c / c0);
        }

        let mut specular = Vec::new();
        let mut diffuse = Vec::new();
        let (mut k_bar, mut k_tilde) = (Vec::new(), Vec::new());
        for (ri, r) in cfg.reflectors.iter().enumerate() {
            let surf = r.surface()?;
            if !specular_point_inside(tc, uc, &surf.plane) {
                warn_once(format!("reflectors[{ri}]: specular point of users[{ui}] lies outside the finite surface; using the infinite plane"));
            }
            let dv = mirror_point(uc, &surf.plane).distance(tc);
            let flat = losses[ri] * pl.amplitude(dv);
            let model = ReflectorModel::new(&surf, &bs, &ua, k, &DiffuseParams::isotropic(lam, surf.plane.area()))?
                .with_flat_gain(Complex64::new(flat, 0.0));
            let rseed = split_seed(seed, (ui * cfg.reflectors.len() + ri) as u64);
            let full = sample_reflector_channel(&model, &bs, &ua, k, rseed, cfg.stochastic_mode)?;
            let (_, hbar) = crate::model::deterministic_reflector(&bs, &ua, &surf, k)?;
            let det = hbar.scaled(model.c_bar());
            let mut sto = full.clone();
            sto.add_scaled(&det, Complex64::new(-1.0, 0.0))?;
            sto.provenance = Provenance::AnalyticSampled;
            k_bar.push(model.c_bar().norm() / c0);
            k_tilde.push(model.stochastic_power().sqrt() / c0);
            specular.push(det);
            diffuse.push(sto);
        }
        out.push(UserChannel { los, scatterers, specular, diffuse, factors: RicianFactors { c0, k_hat, k_bar, k_tilde } });
    }
    Ok(out)
}

/// Beamforming strategy for the multi-user experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Focus every user's beam on the user itself.
    LosOnly,
    /// Focus every user's beam on its image behind the first reflector.
    NlosOnly,
}

/// Focus beamformers of all users for a strategy.
pub fn strategy_beams(cfg: &ScenarioConfig, strategy: Strategy) -> Result<Vec<Beamformer>> {
    let bs = cfg.transmitter.build(cfg.wavelength())?;
    let k = cfg.wavenumber();
    cfg.users
        .iter()
        .map(|u| match strategy {
            Strategy::LosOnly => Ok(nf_focus_beamformer(&bs, u.position(), k)),
            Strategy::NlosOnly => {
                let plane = cfg.primary_reflector()?.plane()?;
                Ok(nlos_focus_beamformer(&bs, mirror_point(u.position(), &plane), k))
            }
        })
        .collect()
}

/// Row channels (single-antenna users) and both strategies' beams.
pub struct SumRateSetup {
    pub channels: Vec<Vec<Complex64>>,
    pub los_beams: Vec<Beamformer>,
    pub nlos_beams: Vec<Beamformer>,
    pub sigma2_w: f64,
    pub factors: Vec<RicianFactors>,
}

impl SumRateSetup {
    pub fn new(cfg: &ScenarioConfig, seed: u64) -> Result<Self> {
        if cfg.users.len() < 2 {
            return invalid("sum rate needs at least two users");
        }
        if cfg.users.iter().any(|u| u.n_rx != 1) {
            return invalid("sum rate supports single-antenna users only");
        }
        cfg.primary_reflector()?;
        let sigma2_w = cfg.noise_model()?.sigma2_w();
        let users = assemble_channels(cfg, seed)?;
        let mut channels = Vec::new();
        let mut factors = Vec::new();
        for u in &users {
            channels.push(u.total()?.row(0).to_vec());
            factors.push(u.factors.clone());
        }
        Ok(Self {
            channels,
            los_beams: strategy_beams(cfg, Strategy::LosOnly)?,
            nlos_beams: strategy_beams(cfg, Strategy::NlosOnly)?,
            sigma2_w,
            factors,
        })
    }

    /// Sum rate in bit/s/Hz at total transmit power `pt_dbm`.
    pub fn rate(&self, strategy: Strategy, pt_dbm: f64) -> Result<f64> {
        let beams = match strategy {
            Strategy::LosOnly => &self.los_beams,
            Strategy::NlosOnly => &self.nlos_beams,
        };
        rate_of(&self.channels, beams, dbm_to_w(pt_dbm), self.sigma2_w)
    }
}

/// Σ_k log2(1 + SINR_k) for one strategy and total power in watts.
pub fn sum_rate(cfg: &ScenarioConfig, strategy: Strategy, pt_w: f64, seed: u64) -> Result<f64> {
    let s = SumRateSetup::new(cfg, seed)?;
    let beams = match strategy {
        Strategy::LosOnly => &s.los_beams,
        Strategy::NlosOnly => &s.nlos_beams,
    };
    rate_of(&s.channels, beams, pt_w, s.sigma2_w)
}

/// Side-lobe to main-lobe ratios of the first user for one array size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmrPoint {
    pub n_u: usize,
    pub ly_m: f64,
    /// LOS beams: NLOS-path leakage over LOS main lobe, own beam.
    pub los_desired: f64,
    /// LOS beams: the other user's beam leaking through the NLOS path, over the own main lobe.
    pub los_interference: f64,
    /// NLOS beams: LOS-path leakage over NLOS main lobe, own beam.
    pub nlos_desired: f64,
    pub nlos_interference: f64,
}

/// |h_side q_other|² / |h_main q_own|².
fn leak(other: &Beamformer, own: &Beamformer, main: &[Complex64], side: &[Complex64]) -> Result<f64> {
    let m = crate::multiuser::beam_gain(main, own)?.norm_sqr();
    if m == 0.0 {
        return invalid("main-path gain is zero");
    }
    Ok(crate::multiuser::beam_gain(side, other)?.norm_sqr() / m)
}

/// SMR of the first user with the transmitter resized to `n_u` elements along its u axis.
pub fn smr_point(cfg: &ScenarioConfig, n_u: usize, k_bar: f64) -> Result<SmrPoint> {
    let mut c = cfg.with_k_bar_target(k_bar);
    c.transmitter.n_u = n_u;
    c.stochastic_mode = StochasticMode::Iid;
    if c.users.len() < 2 {
        return invalid("SMR needs two users");
    }
    let users = assemble_channels(&c, c.seed)?;
    let los = users[0].los.row(0).to_vec();
    let nlos = users[0].nlos()?.row(0).to_vec();
    let lb = strategy_beams(&c, Strategy::LosOnly)?;
    let nb = strategy_beams(&c, Strategy::NlosOnly)?;
    Ok(SmrPoint {
        n_u,
        ly_m: c.transmitter.length_u(c.wavelength()),
        los_desired: smr(&lb[0], &los, &nlos)?,
        los_interference: leak(&lb[1], &lb[0], &los, &nlos)?,
        nlos_desired: smr(&nb[0], &nlos, &los)?,
        nlos_interference: leak(&nb[1], &nb[0], &nlos, &los)?,
    })
}
