//! Monte Carlo ensembles over surface realizations and the summary
//! statistics used to compare them with closed forms.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::surface::{sample_surface, split_seed, RoughSurface, SurfaceRealization};

/// Default ensemble size.
pub const DEFAULT_REALIZATIONS: usize = 100;

const HIST_BINS: usize = 40;
const HIST_SPAN_SD: f64 = 4.0;

/// Binned counts of the real and imaginary parts on a shared axis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts_re: Vec<u64>,
    pub counts_im: Vec<u64>,
}

/// Moments of a complex-valued ensemble.
///
/// Skewness and excess kurtosis are `NaN` (serialized as `null`) when the
/// corresponding component has zero variance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSummary {
    #[serde(rename = "n")]
    pub n_samples: usize,
    pub mean_re: f64,
    pub mean_im: f64,
    /// E|x − mean|².
    #[serde(rename = "var")]
    pub variance: f64,
    /// Mean of |x|.
    pub mean_abs: f64,
    /// Mean of |x|².
    pub mean_power: f64,
    pub skew_re: f64,
    pub skew_im: f64,
    pub kurt_re: f64,
    pub kurt_im: f64,
    pub histogram: Histogram,
}

struct Moments {
    mean: f64,
    var: f64,
    skew: f64,
    kurt: f64,
}

fn moments(x: impl Iterator<Item = f64> + Clone, n: f64) -> Moments {
    let mean = x.clone().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    // Relative floor: rounding noise around a constant must not read as spread.
    let degenerate = m2 <= (mean * mean) * 1e-28 || m2 == 0.0;
    let (skew, kurt) = if degenerate { (f64::NAN, f64::NAN) } else { (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0) };
    Moments { mean, var: m2, skew, kurt }
}

impl EnsembleSummary {
    pub fn from_samples(samples: &[Complex64]) -> Result<Self> {
        if samples.len() < 2 {
            return invalid(format!("ensemble needs at least 2 samples, got {}", samples.len()));
        }
        let n = samples.len() as f64;
        let re = moments(samples.iter().map(|c| c.re), n);
        let im = moments(samples.iter().map(|c| c.im), n);
        let sd = re.var.max(im.var).sqrt();
        let half = if sd > 0.0 { HIST_SPAN_SD * sd } else { 1.0 };
        let lo = re.mean.min(im.mean) - half;
        let hi = re.mean.max(im.mean) + half;
        let width = (hi - lo) / HIST_BINS as f64;
        let edges: Vec<f64> = (0..=HIST_BINS).map(|i| lo + width * i as f64).collect();
        let bin = |v: f64| -> Option<usize> {
            let b = ((v - lo) / width).floor();
            (b >= 0.0 && b < HIST_BINS as f64).then_some(b as usize)
        };
        let mut counts_re = vec![0u64; HIST_BINS];
        let mut counts_im = vec![0u64; HIST_BINS];
        for c in samples {
            if let Some(b) = bin(c.re) {
                counts_re[b] += 1;
            }
            if let Some(b) = bin(c.im) {
                counts_im[b] += 1;
            }
        }
        Ok(Self {
            n_samples: samples.len(),
            mean_re: re.mean,
            mean_im: im.mean,
            variance: re.var + im.var,
            mean_abs: samples.iter().map(|c| c.norm()).sum::<f64>() / n,
            mean_power: samples.iter().map(|c| c.norm_sqr()).sum::<f64>() / n,
            skew_re: re.skew,
            skew_im: im.skew,
            kurt_re: re.kurt,
            kurt_im: im.kurt,
            histogram: Histogram { edges, counts_re, counts_im },
        })
    }

    pub fn mean(&self) -> Complex64 {
        Complex64::new(self.mean_re, self.mean_im)
    }

    /// Standard error of the complex mean, √(var/n).
    pub fn standard_error(&self) -> f64 {
        (self.variance / self.n_samples as f64).sqrt()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Evaluates `f(seed_k)` for k = 0..n with `seed_k = split_seed(base_seed, k)`, in parallel,
/// returning results in index order.
pub fn collect_seeded<T, F>(n: usize, base_seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    (0..n as u64).into_par_iter().map(|k| f(split_seed(base_seed, k))).collect()
}

/// Summary of `n` draws of a seed-indexed complex evaluator.
pub fn run_seeded_ensemble<F>(n: usize, base_seed: u64, f: F) -> Result<EnsembleSummary>
where
    F: Fn(u64) -> Result<Complex64> + Sync,
{
    if n < 2 {
        return invalid("ensemble needs n >= 2");
    }
    EnsembleSummary::from_samples(&collect_seeded(n, base_seed, f)?)
}

/// Summary of an evaluator applied to `n` independent realizations of `surface`.
pub fn run_ensemble<F>(
    evaluator: F,
    surface: &RoughSurface,
    grid_step: f64,
    n: usize,
    base_seed: u64,
) -> Result<EnsembleSummary>
where
    F: Fn(&SurfaceRealization) -> Result<Complex64> + Sync,
{
    run_seeded_ensemble(n, base_seed, |seed| evaluator(&sample_surface(surface, grid_step, seed)?))
}

/// Result of the moment-based Gaussianity check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalityReport {
    pub n: usize,
    pub skew_re: f64,
    pub skew_im: f64,
    pub kurt_re: f64,
    pub kurt_im: f64,
    pub max_abs_skew: f64,
    pub max_abs_excess_kurtosis: f64,
    pub passed: bool,
    /// Set when a moment is undefined (zero-variance component).
    pub degenerate: bool,
}

pub const SKEW_LIMIT: f64 = 0.3;
pub const KURTOSIS_LIMIT: f64 = 0.5;

/// |skewness| < 0.3 and |excess kurtosis| < 0.5 for both components.
pub fn normality_check(summary: &EnsembleSummary) -> Result<NormalityReport> {
    if summary.n_samples < 100 {
        return invalid(format!("normality check needs at least 100 samples, got {}", summary.n_samples));
    }
    let vals = [summary.skew_re, summary.skew_im, summary.kurt_re, summary.kurt_im];
    let degenerate = vals.iter().any(|v| !v.is_finite());
    let max_abs_skew = summary.skew_re.abs().max(summary.skew_im.abs());
    let max_abs_excess_kurtosis = summary.kurt_re.abs().max(summary.kurt_im.abs());
    Ok(NormalityReport {
        n: summary.n_samples,
        skew_re: summary.skew_re,
        skew_im: summary.skew_im,
        kurt_re: summary.kurt_re,
        kurt_im: summary.kurt_im,
        max_abs_skew,
        max_abs_excess_kurtosis,
        passed: !degenerate && max_abs_skew < SKEW_LIMIT && max_abs_excess_kurtosis < KURTOSIS_LIMIT,
        degenerate,
    })
}

/// Normalized sample covariance E{(a − ā)(b − b̄)*}/√(var a · var b).
pub fn sample_correlation(a: &[Complex64], b: &[Complex64]) -> Result<Complex64> {
    if a.len() != b.len() || a.len() < 2 {
        return invalid("correlation needs two equal-length streams of at least 2 samples");
    }
    let n = a.len() as f64;
    let ma: Complex64 = a.iter().sum::<Complex64>() / n;
    let mb: Complex64 = b.iter().sum::<Complex64>() / n;
    let mut cov = Complex64::new(0.0, 0.0);
    let (mut va, mut vb) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        cov += dx * dy.conj();
        va += dx.norm_sqr();
        vb += dy.norm_sqr();
    }
    if va == 0.0 || vb == 0.0 {
        return invalid("correlation of a constant stream is undefined");
    }
    Ok(cov / (va * vb).sqrt())
}

/// Spatial correlation between two coefficients evaluated jointly on each of
/// `n` realizations.
pub fn pairwise_correlation<F>(
    evaluator: F,
    surface: &RoughSurface,
    grid_step: f64,
    n: usize,
    base_seed: u64,
) -> Result<Complex64>
where
    F: Fn(&SurfaceRealization) -> Result<(Complex64, Complex64)> + Sync,
{
    let pairs = collect_seeded(n, base_seed, |seed| evaluator(&sample_surface(surface, grid_step, seed)?))?;
    let (a, b): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    sample_correlation(&a, &b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp, StandardNormal};

    fn cn(seed: u64) -> Complex64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: f64 = StandardNormal.sample(&mut rng);
        let b: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(a, b) * std::f64::consts::FRAC_1_SQRT_2
    }

    #[test]
    fn constant_evaluator_has_zero_variance() {
        let s = run_seeded_ensemble(50, 1, |_| Ok(Complex64::new(0.3, -0.2))).unwrap();
        assert!(s.variance < 1e-30);
        assert!(s.skew_re.is_nan());
        let r = normality_check(&run_seeded_ensemble(200, 1, |_| Ok(Complex64::new(1.0, 0.0))).unwrap()).unwrap();
        assert!(!r.passed && r.degenerate);
    }

    #[test]
    fn standard_complex_normal_ensemble() {
        let n = 20_000;
        let s = run_seeded_ensemble(n, 7, |seed| Ok(cn(seed))).unwrap();
        let tol = 3.0 / (n as f64).sqrt();
        assert!(s.mean().norm() < tol);
        assert!((s.variance - 1.0).abs() < 3.0 * tol);
        assert!(normality_check(&s).unwrap().passed);
        assert_eq!(s, run_seeded_ensemble(n, 7, |seed| Ok(cn(seed))).unwrap());
        let total: u64 = s.histogram.counts_re.iter().sum();
        assert!(total as f64 > 0.999 * n as f64);
    }

    #[test]
    fn heavy_tail_fails_kurtosis() {
        let s = run_seeded_ensemble(10_000, 3, |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m: f64 = Exp::new(1.0).unwrap().sample(&mut rng);
            let z: f64 = StandardNormal.sample(&mut rng);
            Ok(Complex64::new(m * z, m * z.signum()))
        })
        .unwrap();
        let r = normality_check(&s).unwrap();
        assert!(!r.passed && r.max_abs_excess_kurtosis > KURTOSIS_LIMIT);
        assert!(normality_check(&EnsembleSummary::from_samples(&[Complex64::new(1.0, 0.0); 10]).unwrap()).is_err());
    }

    #[test]
    fn correlation_estimators() {
        let a: Vec<Complex64> = (0..4000).map(|k| cn(split_seed(1, k))).collect();
        assert!((sample_correlation(&a, &a).unwrap() - 1.0).norm() < 1e-12);
        let b: Vec<Complex64> = (0..4000).map(|k| cn(split_seed(2, k))).collect();
        assert!(sample_correlation(&a, &b).unwrap().norm() < 3.0 / (4000f64).sqrt());
        assert!(sample_correlation(&a[..1], &b[..1]).is_err());
    }

    #[test]
    fn standard_error_shrinks_with_n() {
        let se = |n| {
            // Spread of the sample mean over 200 independent batches.
            let means: Vec<Complex64> = (0..200u64)
                .map(|b| run_seeded_ensemble(n, 100 + b, |seed| Ok(cn(seed))).unwrap().mean())
                .collect();
            means.iter().map(|m| m.norm_sqr()).sum::<f64>() / 200.0
        };
        let ratio = (se(400) / se(800)).sqrt();
        assert!((ratio - std::f64::consts::SQRT_2).abs() < 0.25, "{ratio}");
    }

    #[test]
    fn consecutive_seeds_are_uncorrelated() {
        let n = 5000;
        let x: Vec<Complex64> = (0..n as u64 + 1).map(|k| cn(split_seed(9, k))).collect();
        let r = sample_correlation(&x[..n], &x[1..]).unwrap();
        assert!(r.norm() < 3.0 / (n as f64).sqrt());
    }
}
