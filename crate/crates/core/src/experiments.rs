//! Named experiments producing CSV tables and a JSON sidecar.
//!
//! Seeds: sweep point `i` of an experiment draws realization `k` from
//! `split_seed(split_seed(seed, i), k)`, so every table is reproducible from
//! the scenario seed alone and independent of the thread count.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{invalid, Error, Result};
use crate::geometry::{mirror_point, Point3};
use crate::hf::{hf_coefficient, hf_coefficients, HFConfig};
use crate::io::write_atomic;
use crate::model::{
    angular_window, power_gain_correlated, roughness_attenuation, roughness_g, s_min, spatial_correlation_integral,
    DiffuseParams, ReflectorModel,
};
use crate::multiuser::{lin_to_db, TwoUserLine};
use crate::scenario::{smr_point, ScenarioConfig, SmrPoint, Strategy, SumRateSetup};
use crate::special::sinc;
use crate::stats::{collect_seeded, sample_correlation, EnsembleSummary};
use crate::surface::{sample_surface, split_seed, RoughSurface, SurfaceRealization};

/// Experiment names accepted by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Regimes,
    Pdf,
    Correlation,
    LengthCorrelation,
    SinrTradeoff,
    Smr,
    Sumrate,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Regimes,
        Experiment::Pdf,
        Experiment::Correlation,
        Experiment::LengthCorrelation,
        Experiment::SinrTradeoff,
        Experiment::Smr,
        Experiment::Sumrate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Regimes => "regimes",
            Experiment::Pdf => "pdf",
            Experiment::Correlation => "correlation",
            Experiment::LengthCorrelation => "length-correlation",
            Experiment::SinrTradeoff => "sinr-tradeoff",
            Experiment::Smr => "smr",
            Experiment::Sumrate => "sumrate",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Validation(format!("unknown experiment '{s}'")))
    }
}

/// Run-time overrides.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct RunOptions {
    /// Replaces the scenario seed.
    pub seed: Option<u64>,
    /// Halves realization counts and doubles integration steps (capped at λ/4).
    pub fast: bool,
}

impl RunOptions {
    pub fn seed(&self, cfg: &ScenarioConfig) -> u64 {
        self.seed.unwrap_or(cfg.seed)
    }

    pub fn realizations(&self, n: usize) -> usize {
        if self.fast {
            (n / 2).max(2)
        } else {
            n
        }
    }

    pub fn step_wavelengths(&self, step: f64) -> f64 {
        if self.fast {
            (2.0 * step).min(0.25)
        } else {
            step
        }
    }
}

/// A numeric table with a header row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    /// File stem.
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// CSV bytes: header, then rows; shortest round-trip decimal formatting.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|v| format!("{v}")))?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

/// Tables plus a free-form JSON summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentOutput {
    pub experiment: Experiment,
    pub tables: Vec<Table>,
    pub summary: Value,
}

impl ExperimentOutput {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

fn finite(x: f64, what: &str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Numerical(format!("{what} is not finite")))
    }
}

pub fn run_experiment(exp: Experiment, cfg: &ScenarioConfig, opts: &RunOptions) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let (tables, summary) = match exp {
        Experiment::Regimes => regimes(cfg, opts)?,
        Experiment::Pdf => pdf(cfg, opts)?,
        Experiment::Correlation => correlation(cfg, opts)?,
        Experiment::LengthCorrelation => length_correlation(cfg, opts)?,
        Experiment::SinrTradeoff => sinr_tradeoff(cfg)?,
        Experiment::Smr => smr(cfg)?,
        Experiment::Sumrate => sumrate(cfg, opts)?,
    };
    for t in &tables {
        for r in &t.rows {
            for v in r {
                if v.is_nan() {
                    return Err(Error::Numerical(format!("NaN in table {}", t.name)));
                }
            }
        }
    }
    Ok(ExperimentOutput { experiment: exp, tables, summary })
}

/// Writes `<name>.csv` per table and `<experiment>.json`, each atomically.
pub fn write_outputs(
    out_dir: &Path,
    cfg: &ScenarioConfig,
    opts: &RunOptions,
    output: &ExperimentOutput,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for t in &output.tables {
        let p = out_dir.join(format!("{}.csv", t.name));
        write_atomic(&p, &t.to_csv()?)?;
        written.push(p);
    }
    let sidecar = json!({
        "experiment": output.experiment,
        "seed": opts.seed(cfg),
        "seed_rule": "realization k of sweep point i uses split_seed(split_seed(seed, i), k)",
        "fast": opts.fast,
        "tables": output.tables.iter().map(|t| json!({"file": format!("{}.csv", t.name), "columns": t.columns})).collect::<Vec<_>>(),
        "summary": output.summary,
        "scenario": cfg,
    });
    let p = out_dir.join(format!("{}.json", output.experiment.name()));
    let mut bytes = serde_json::to_vec_pretty(&sidecar)?;
    bytes.push(b'\n');
    write_atomic(&p, &bytes)?;
    written.push(p);
    Ok(written)
}

// ---------------------------------------------------------------------------
// Oracle experiments on a single Tx/Rx pair
// ---------------------------------------------------------------------------

struct OracleSetup {
    tx: Point3,
    surface: RoughSurface,
    k: f64,
    lambda: f64,
    hf: HFConfig,
    cell: f64,
}

impl OracleSetup {
    fn new(cfg: &ScenarioConfig, step_wavelengths: f64) -> Result<Self> {
        let lambda = cfg.wavelength();
        if cfg.transmitter.n_u * cfg.transmitter.n_v != 1 {
            return invalid("oracle experiments need a single-element transmitter");
        }
        Ok(Self {
            tx: Point3::from_array(cfg.transmitter.center_m),
            surface: cfg.primary_reflector()?.surface()?,
            k: cfg.wavenumber(),
            lambda,
            hf: HFConfig::with_step(step_wavelengths * lambda),
            cell: cfg.oracle.surface_cell_wavelengths * lambda,
        })
    }

    fn rough(&self, kappa_sigma: f64) -> RoughSurface {
        RoughSurface { sigma_z: kappa_sigma / self.k, corr_len: 0.0, ..self.surface }
    }

    fn flat_value(&self, rx: Point3) -> Result<Complex64> {
        let flat = RoughSurface { sigma_z: 0.0, ..self.surface };
        let c = hf_coefficient(self.tx, rx, &SurfaceRealization::flat(flat, self.hf.grid_step)?, self.k, &self.hf)?;
        if c.norm() == 0.0 {
            return Err(Error::Numerical("flat-surface reference is zero".into()));
        }
        Ok(c)
    }

    /// Normalized oracle samples c/c_flat over `n` realizations of `surface`.
    fn normalized_samples(&self, surface: &RoughSurface, rx: Point3, n: usize, base: u64) -> Result<Vec<Complex64>> {
        let flat = self.flat_value(rx)?;
        let realization_step = if surface.corr_len > 0.0 { self.hf.grid_step } else { self.cell };
        collect_seeded(n, base, |seed| {
            let real = sample_surface(surface, realization_step, seed)?;
            Ok(hf_coefficient(self.tx, rx, &real, self.k, &self.hf)? / flat)
        })
    }

    fn model(&self, surface: &RoughSurface, rx: Point3) -> Result<ReflectorModel> {
        ReflectorModel::new(
            surface,
            &crate::geometry::ArrayGeometry::single(self.tx),
            &crate::geometry::ArrayGeometry::single(rx),
            self.k,
            &DiffuseParams::isotropic(self.lambda, surface.plane.area()),
        )
    }
}

type Produced = (Vec<Table>, Value);

fn regimes(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<Produced> {
    let spec = &cfg.experiments.regimes;
    let o = OracleSetup::new(cfg, opts.step_wavelengths(cfg.oracle.integration_step_wavelengths))?;
    let rx = Point3::from_array(spec.rx_m);
    let n = opts.realizations(cfg.oracle.realizations);
    let seed = opts.seed(cfg);
    let mut t = Table::new(
        "regimes",
        &[
            "kappa_sigma_z",
            "g",
            "mean_re",
            "mean_im",
            "mean_abs",
            "single_re",
            "single_im",
            "single_abs",
            "theory_exp",
            "theory_floor",
            "theory_rms",
        ],
    );
    for (i, &ks) in spec.kappa_sigma_z.iter().enumerate() {
        let surf = o.rough(ks);
        let g = roughness_g(o.tx, rx, &surf, o.k);
        let samples = o.normalized_samples(&surf, rx, n, split_seed(seed, i as u64))?;
        let s = EnsembleSummary::from_samples(&samples)?;
        let m = o.model(&surf, rx)?;
        let floor = m.floor_ratio().sqrt();
        let rms = (roughness_attenuation(g).powi(2) + m.stochastic_power() / m.c_bar_flat.norm_sqr()).sqrt();
        t.push(vec![
            ks,
            g,
            s.mean_re,
            s.mean_im,
            s.mean_abs,
            samples[0].re,
            samples[0].im,
            samples[0].norm(),
            roughness_attenuation(g),
            finite(floor, "diffuse floor")?,
            rms,
        ]);
        log::info!("regimes: kappa*sigma = {ks}: mean {:.4}{:+.4}j, e^(-g/2) = {:.4}", s.mean_re, s.mean_im, roughness_attenuation(g));
    }
    let summary = json!({
        "rx_m": spec.rx_m,
        "realizations": n,
        "integration_step_m": o.hf.grid_step,
        "surface_cell_m": o.cell,
    });
    Ok((vec![t], summary))
}

fn gauss_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    if sd == 0.0 {
        return 0.0;
    }
    let z = (x - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

fn pdf(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<Produced> {
    let spec = &cfg.experiments.pdf;
    let o = OracleSetup::new(cfg, opts.step_wavelengths(spec.integration_step_wavelengths))?;
    let rx = Point3::from_array(spec.rx_m);
    let n = opts.realizations(spec.realizations);
    let seed = opts.seed(cfg);
    let mut hist = Table::new("pdf", &["kappa_sigma_z", "bin_center", "density_re", "density_im", "gauss_re", "gauss_im"]);
    let mut mom = Table::new(
        "pdf_moments",
        &["kappa_sigma_z", "n", "mean_re", "mean_im", "sd_re", "sd_im", "skew_re", "skew_im", "kurt_re", "kurt_im"],
    );
    for (i, &ks) in spec.kappa_sigma_z.iter().enumerate() {
        let samples = o.normalized_samples(&o.rough(ks), rx, n, split_seed(seed, i as u64))?;
        let s = EnsembleSummary::from_samples(&samples)?;
        let sd = |f: fn(&Complex64) -> f64, m: f64| {
            (samples.iter().map(|c| (f(c) - m).powi(2)).sum::<f64>() / samples.len() as f64).sqrt()
        };
        let (sd_re, sd_im) = (sd(|c| c.re, s.mean_re), sd(|c| c.im, s.mean_im));
        let h = &s.histogram;
        for b in 0..h.counts_re.len() {
            let (lo, hi) = (h.edges[b], h.edges[b + 1]);
            let w = hi - lo;
            let c = 0.5 * (lo + hi);
            let dens = |k: u64| if w > 0.0 { k as f64 / (n as f64 * w) } else { 0.0 };
            hist.push(vec![
                ks,
                c,
                dens(h.counts_re[b]),
                dens(h.counts_im[b]),
                gauss_pdf(c, s.mean_re, sd_re),
                gauss_pdf(c, s.mean_im, sd_im),
            ]);
        }
        // Degenerate (constant) ensembles have undefined shape moments; report 0.
        let z = |x: f64| if x.is_nan() { 0.0 } else { x };
        mom.push(vec![ks, n as f64, s.mean_re, s.mean_im, sd_re, sd_im, z(s.skew_re), z(s.skew_im), z(s.kurt_re), z(s.kurt_im)]);
    }
    let summary = json!({
        "rx_m": spec.rx_m,
        "realizations": n,
        "integration_step_m": o.hf.grid_step,
        "surface_cell_m": o.cell,
        "note": "shape moments of a constant ensemble are reported as 0",
    });
    Ok((vec![hist, mom], summary))
}

/// Oracle and closed-form correlation for aligned and perpendicular Rx pairs.
fn correlation(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<Produced> {
    let spec = &cfg.experiments.correlation;
    let o = OracleSetup::new(cfg, opts.step_wavelengths(spec.integration_step_wavelengths))?;
    let n = opts.realizations(spec.realizations);
    let seed = opts.seed(cfg);
    let p = Point3::from_array(spec.rx_reference_m);
    let plane = o.surface.plane;
    let axes = [("P", plane.axis_u), ("A", plane.normal)];
    let windows: Vec<(f64, f64)> = axes.iter().map(|(_, a)| angular_window(p, *a, &plane)).collect();

    // One realization evaluates every Rx position at once.
    let mut rxs = Vec::new();
    for &dl in &spec.separations_wavelengths {
        let d = dl * o.lambda;
        for (_, a) in &axes {
            rxs.push(p - *a * (0.5 * d));
            rxs.push(p + *a * (0.5 * d));
        }
    }
    let surf = o.rough(spec.kappa_sigma_z);
    let runs = collect_seeded(n, split_seed(seed, 0), |s| {
        let real = sample_surface(&surf, o.cell, s)?;
        hf_coefficients(o.tx, &rxs, &real, o.k, &o.hf)
    })?;

    let mut t = Table::new(
        "correlation",
        &["d_over_lambda", "numeric_P", "numeric_A", "sinc_P", "sinc_A", "integral_P", "integral_A"],
    );
    for (i, &dl) in spec.separations_wavelengths.iter().enumerate() {
        let d = dl * o.lambda;
        let mut row = vec![dl];
        let mut numeric = [0.0; 2];
        let mut closed = [0.0; 2];
        let mut integral = [0.0; 2];
        for (j, (_, a)) in axes.iter().enumerate() {
            let base = 4 * i + 2 * j;
            let c1: Vec<Complex64> = runs.iter().map(|r| r[base]).collect();
            let c2: Vec<Complex64> = runs.iter().map(|r| r[base + 1]).collect();
            numeric[j] = sample_correlation(&c1, &c2)?.norm();
            let (t1, t2) = windows[j];
            closed[j] = sinc(dl * (t2.sin() - t1.sin())).abs();
            integral[j] =
                spatial_correlation_integral((o.tx, o.tx), (p - *a * (0.5 * d), p + *a * (0.5 * d)), &plane, o.k)?.norm();
        }
        row.extend(numeric);
        row.extend(closed);
        row.extend(integral);
        t.push(row);
    }
    let summary = json!({
        "rx_reference_m": spec.rx_reference_m,
        "kappa_sigma_z": spec.kappa_sigma_z,
        "realizations": n,
        "integration_step_m": o.hf.grid_step,
        "surface_cell_m": o.cell,
        "window_P_rad": windows[0],
        "window_A_rad": windows[1],
        "sinc_form": "|sinc((d/lambda)(sin theta2 - sin theta1))| over the angular window of the patch",
    });
    Ok((vec![t], summary))
}

/// Correlation length ℓ realizing smoothness index S: S = (κ_ρℓ)²/(2κ_zσ_z)².
pub fn corr_len_for_s(s: f64, kappa_rho: f64, kappa_z: f64, sigma_z: f64) -> f64 {
    s.sqrt() * 2.0 * kappa_z * sigma_z / kappa_rho
}

fn length_correlation(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<Produced> {
    let spec = &cfg.experiments.length_correlation;
    let o = OracleSetup::new(cfg, opts.step_wavelengths(spec.integration_step_wavelengths))?;
    let rx = Point3::from_array(spec.rx_m);
    let n = opts.realizations(spec.realizations);
    let seed = opts.seed(cfg);
    let base = o.model(&o.rough(spec.kappa_sigma_z), rx)?;
    let smin = s_min(base.floor_ratio())?;
    let mut grid: Vec<f64> = spec.s_values.iter().copied().filter(|&s| s > smin).collect();
    grid.insert(0, smin);

    let mut t = Table::new("length_correlation", &["s", "corr_len_m", "numeric_power", "single_power", "theory_power"]);
    for (i, &s) in grid.iter().enumerate() {
        let ell = corr_len_for_s(s, base.kappa_rho, base.kappa_z, base.surface.sigma_z);
        let surf = base.surface.with_corr_len(ell);
        let samples = o.normalized_samples(&surf, rx, n, split_seed(seed, i as u64))?;
        let power = samples.iter().map(|c| c.norm_sqr()).sum::<f64>() / samples.len() as f64;
        let theory = power_gain_correlated(&base, ell)? / base.c_bar_flat.norm_sqr();
        log::info!("length-correlation: S = {s:.4}, l = {ell:.4e} m: oracle {power:.4e}, model {theory:.4e}");
        t.push(vec![s, ell, power, samples[0].norm_sqr(), theory]);
    }
    let summary = json!({
        "rx_m": spec.rx_m,
        "kappa_sigma_z": spec.kappa_sigma_z,
        "realizations": n,
        "integration_step_m": o.hf.grid_step,
        "s_min": smin,
        "kappa_z": base.kappa_z,
        "kappa_rho": base.kappa_rho,
        "floor_ratio": base.floor_ratio(),
    });
    Ok((vec![t], summary))
}

// ---------------------------------------------------------------------------
// Multi-user experiments
// ---------------------------------------------------------------------------

/// Two-user line geometry of the trade-off experiment for given d1, d.
pub fn two_user_line(cfg: &ScenarioConfig, d1: f64, d: f64) -> TwoUserLine {
    let s = &cfg.experiments.sinr_tradeoff;
    TwoUserLine {
        wavenumber_rad_per_m: cfg.wavenumber(),
        n_tx: s.n_tx,
        phi0_rad: s.phi0_rad,
        d1_m: d1,
        d_m: d,
        wall_gap_m: s.wall_gap_m,
        noise_ratio: s.noise_ratio,
    }
}

const TRADEOFF_COLUMNS: [&str; 9] = [
    "d1_m",
    "d_m",
    "k_bar",
    "sinr_los_closed",
    "sinr_nlos_closed",
    "sinr_los_expanded",
    "sinr_nlos_expanded",
    "sinr_los_exact",
    "sinr_nlos_exact",
];

fn tradeoff_row(line: &TwoUserLine) -> Result<Vec<f64>> {
    let terms = line.terms()?;
    let (cl, cn) = line.closed_form_sinr()?;
    let (el, en) = line.discrete_sinr_expanded()?;
    let (xl, xn) = line.discrete_sinr()?;
    Ok(vec![line.d1_m, line.d_m, terms.k_bar, cl, cn, el, en, xl, xn])
}

fn sinr_tradeoff(cfg: &ScenarioConfig) -> Result<Produced> {
    let s = &cfg.experiments.sinr_tradeoff;
    let mut by_d = Table::new("sinr_tradeoff_d", &TRADEOFF_COLUMNS);
    for &d in &s.d_values_m {
        by_d.push(tradeoff_row(&two_user_line(cfg, s.fixed_d1_m, d))?);
    }
    let mut by_d1 = Table::new("sinr_tradeoff_d1", &TRADEOFF_COLUMNS);
    for &d1 in &s.d1_values_m {
        by_d1.push(tradeoff_row(&two_user_line(cfg, d1, s.fixed_d_m))?);
    }
    let summary = json!({
        "n_tx": s.n_tx,
        "ly_m": two_user_line(cfg, s.fixed_d1_m, s.fixed_d_m).terms()?.ly_m,
        "phi0_rad": s.phi0_rad,
        "noise_ratio": s.noise_ratio,
        "columns": "closed: erfi closed forms; expanded: element sums with second-order phase; exact: element sums with exact distances",
    });
    Ok((vec![by_d, by_d1], summary))
}

/// SMR sweep over the array length.
pub fn smr_sweep(cfg: &ScenarioConfig) -> Result<Vec<SmrPoint>> {
    let spec = &cfg.experiments.smr;
    let pts: Vec<Result<SmrPoint>> = {
        use rayon::prelude::*;
        spec.n_u_values.par_iter().map(|&n| smr_point(cfg, n, spec.k_bar)).collect()
    };
    pts.into_iter().collect()
}

/// Largest Ly at which `values` is at or above `threshold` (0 if never).
pub fn last_crossing(ly: &[f64], values: &[f64], threshold: f64) -> f64 {
    ly.iter().zip(values).filter(|(_, v)| **v >= threshold).map(|(l, _)| *l).fold(0.0, f64::max)
}

/// Maxima of `values` over consecutive Ly bins of width `width` (side-lobe envelope).
pub fn binned_envelope(ly: &[f64], values: &[f64], width: f64) -> Vec<f64> {
    let mut out: Vec<(i64, f64)> = Vec::new();
    for (l, v) in ly.iter().zip(values) {
        let b = (l / width).floor() as i64;
        match out.last_mut() {
            Some((lb, m)) if *lb == b => *m = m.max(*v),
            _ => out.push((b, *v)),
        }
    }
    out.into_iter().map(|(_, m)| m).collect()
}

/// Bin width of the SMR side-lobe envelope, m.
pub const SMR_ENVELOPE_BIN_M: f64 = 0.1;
/// SMR level regarded as negligible, dB.
pub const SMR_NEGLIGIBLE_DB: f64 = -20.0;

fn smr(cfg: &ScenarioConfig) -> Result<Produced> {
    let pts = smr_sweep(cfg)?;
    let mut t = Table::new(
        "smr",
        &["n_u", "Ly_m", "smr_los_desired_db", "smr_los_interference_db", "smr_nlos_desired_db", "smr_nlos_interference_db"],
    );
    for p in &pts {
        t.push(vec![
            p.n_u as f64,
            p.ly_m,
            lin_to_db(p.los_desired),
            lin_to_db(p.los_interference),
            lin_to_db(p.nlos_desired),
            lin_to_db(p.nlos_interference),
        ]);
    }
    let ly = t.column("Ly_m").unwrap_or_default();
    let mut thresholds = serde_json::Map::new();
    for c in &t.columns[2..] {
        let v = t.column(c).unwrap_or_default();
        thresholds.insert(c.clone(), json!(last_crossing(&ly, &v, SMR_NEGLIGIBLE_DB)));
    }
    let summary = json!({
        "k_bar": cfg.experiments.smr.k_bar,
        "n_v": cfg.transmitter.n_v,
        "definitions": {
            "desired": "own beam: leakage through the other path over the main lobe",
            "interference": "other user's beam leaking through the other path, over the own main lobe",
        },
        "last_ly_at_or_above_minus_20_db_m": thresholds,
    });
    Ok((vec![t], summary))
}

/// Lowest grid power at which NLOS beats LOS after LOS led at the low end.
pub fn crossover_power(pt_dbm: &[f64], los: &[f64], nlos: &[f64]) -> Option<f64> {
    let first = *los.first()? > *nlos.first()?;
    if !first {
        return None;
    }
    pt_dbm.iter().zip(los.iter().zip(nlos)).find(|(_, (l, n))| n > l).map(|(p, _)| *p)
}

fn kbar_label(k: f64) -> String {
    format!("{k}").replace('.', "p")
}

fn sumrate(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<Produced> {
    if cfg.power_grid_dbm.is_empty() {
        return invalid("sumrate needs power_grid_dbm");
    }
    let seed = opts.seed(cfg);
    let mut tables = Vec::new();
    let mut per_k = Vec::new();
    for &kb in &cfg.experiments.sumrate.k_bar_targets {
        let c = cfg.with_k_bar_target(kb);
        let setup = SumRateSetup::new(&c, seed)?;
        let mut t = Table::new(format!("sumrate_kbar_{}", kbar_label(kb)), &["Pt_dBm", "rate_los", "rate_nlos"]);
        for &p in &cfg.power_grid_dbm {
            t.push(vec![
                p,
                finite(setup.rate(Strategy::LosOnly, p)?, "LOS sum rate")?,
                finite(setup.rate(Strategy::NlosOnly, p)?, "NLOS sum rate")?,
            ]);
        }
        let cross = crossover_power(
            &t.column("Pt_dBm").unwrap_or_default(),
            &t.column("rate_los").unwrap_or_default(),
            &t.column("rate_nlos").unwrap_or_default(),
        );
        per_k.push(json!({"k_bar_target": kb, "crossover_dbm": cross, "rician": setup.factors}));
        tables.push(t);
    }
    let plane = cfg.primary_reflector()?.plane()?;
    let virtual_users: Vec<[f64; 3]> = cfg.users.iter().map(|u| mirror_point(u.position(), &plane).to_array()).collect();
    let summary = json!({
        "sigma2_w": cfg.noise_model()?.sigma2_w(),
        "virtual_users_m": virtual_users,
        "k_bar": per_k,
    });
    Ok((tables, summary))
}
