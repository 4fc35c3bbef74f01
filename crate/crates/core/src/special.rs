//! Scalar special functions used by the closed forms.
//!
//! * [`sinc`]: normalized sinc.
//! * [`bessel_j0`]: Miller backward recurrence below x = 25, Hankel asymptotics above.
//! * [`faddeeva`], [`erf`], [`erfi`]: complex error functions built on the
//!   Poppe-Wijers evaluation of w(z) (power series / truncated Taylor /
//!   continued fraction depending on |z|).
//! * [`quad_phase_integral`]: (1/L)∫ exp(j(a y² + b y)) dy over [-L/2, L/2],
//!   in closed form, with [`quad_phase_integral_quadrature`] as the
//!   independent adaptive Gauss-Kronrod reference.

use std::f64::consts::{FRAC_2_SQRT_PI, PI};

use num_complex::Complex64;

const J: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// sin(πx)/(πx) with sinc(0) = 1.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    let px = PI * x;
    if px.abs() < 1e-4 {
        let p2 = px * px;
        return 1.0 - p2 / 6.0 + p2 * p2 / 120.0;
    }
    // sin(πx) via the reduced argument keeps exact zeros at the integers.
    let r = x - 2.0 * (x / 2.0).round();
    (PI * r).sin() / px
}

// ---------------------------------------------------------------------------
// Bessel J0
// ---------------------------------------------------------------------------

/// Bessel function of the first kind, order zero.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x < 2.0 {
        j0_series(x)
    } else if x <= 25.0 {
        j0_miller(x)
    } else {
        j0_hankel(x)
    }
}

fn j0_series(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..40 {
        term *= q / (k * k) as f64;
        sum += term;
        if term.abs() < 1e-18 {
            break;
        }
    }
    sum
}

fn j0_miller(x: f64) -> f64 {
    // Backward recurrence J_{k-1} = (2k/x) J_k - J_{k+1}, normalized by
    // J_0 + 2 Σ J_{2k} = 1.
    let start = x + 15.0 + (40.0 * x).sqrt();
    let mut n = start as usize;
    n += n % 2;
    let (mut jp1, mut jk) = (0.0f64, 1e-300f64);
    let mut norm = 0.0;
    let mut j0 = 0.0;
    for k in (1..=n).rev() {
        let jm1 = (2.0 * k as f64 / x) * jk - jp1;
        jp1 = jk;
        jk = jm1;
        let idx = k - 1;
        if idx == 0 {
            j0 = jk;
        } else if idx % 2 == 0 {
            norm += 2.0 * jk;
        }
        if jk.abs() > 1e250 {
            jk *= 1e-250;
            jp1 *= 1e-250;
            norm *= 1e-250;
        }
    }
    norm += j0;
    j0 / norm
}

fn j0_hankel(x: f64) -> f64 {
    // J0(x) = sqrt(2/(πx)) (P cos χ − Q sin χ), χ = x − π/4.
    let mut a = 1.0;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut prev = f64::INFINITY;
    for k in 1..200 {
        let kf = k as f64;
        a *= (2.0 * kf - 1.0).powi(2) / (8.0 * kf * x);
        if a > prev || a < 1e-18 {
            break;
        }
        prev = a;
        // a_k(0) carries (−1)^k on top of the alternating P/Q series signs.
        let sign = if (k / 2 + k) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * a;
        } else {
            q += sign * a;
        }
    }
    let (s, c) = x.sin_cos();
    let cos_chi = (c + s) * std::f64::consts::FRAC_1_SQRT_2;
    let sin_chi = (s - c) * std::f64::consts::FRAC_1_SQRT_2;
    (2.0 / (PI * x)).sqrt() * (p * cos_chi - q * sin_chi)
}

// ---------------------------------------------------------------------------
// Complex error functions
// ---------------------------------------------------------------------------

/// Faddeeva function w(z) = exp(−z²) erfc(−jz).
pub fn faddeeva(z: Complex64) -> Complex64 {
    let (xi, yi) = (z.re, z.im);
    let xabs = xi.abs();
    let yabs = yi.abs();
    let x = xabs / 6.3;
    let y = yabs / 4.4;
    let mut qrho = x * x + y * y;
    let xquad0 = xabs * xabs - yabs * yabs;
    let yquad = 2.0 * xabs * yabs;

    let small = qrho < 0.085264;
    let (mut u, mut v);
    let (mut u2, mut v2) = (0.0, 0.0);
    if small {
        // Power series of erf around the origin.
        qrho = (1.0 - 0.85 * y) * qrho.sqrt();
        let n = (6.0 + 72.0 * qrho).round() as i64;
        let mut j = 2 * n + 1;
        let mut xsum = 1.0 / j as f64;
        let mut ysum = 0.0;
        for i in (1..=n).rev() {
            j -= 2;
            let fi = i as f64;
            let xaux = (xsum * xquad0 - ysum * yquad) / fi;
            ysum = (xsum * yquad + ysum * xquad0) / fi;
            xsum = xaux + 1.0 / j as f64;
        }
        let u1 = -FRAC_2_SQRT_PI * (xsum * yabs + ysum * xabs) + 1.0;
        let v1 = FRAC_2_SQRT_PI * (xsum * xabs - ysum * yabs);
        let daux = (-xquad0).exp();
        u2 = daux * yquad.cos();
        v2 = -daux * yquad.sin();
        u = u1 * u2 - v1 * v2;
        v = u1 * v2 + v1 * u2;
    } else {
        // Laplace continued fraction (far) or Gautschi's truncated Taylor (middle).
        let (h, kapn, nu);
        if qrho > 1.0 {
            h = 0.0;
            kapn = 0i64;
            qrho = qrho.sqrt();
            nu = (3.0 + 1442.0 / (26.0 * qrho + 77.0)) as i64;
        } else {
            qrho = (1.0 - y) * (1.0 - qrho).sqrt();
            h = 1.88 * qrho;
            kapn = (7.0 + 34.0 * qrho).round() as i64;
            nu = (16.0 + 26.0 * qrho).round() as i64;
        }
        let h2 = 2.0 * h;
        let use_h = h > 0.0;
        let mut qlambda = if use_h { h2.powi(kapn as i32) } else { 0.0 };
        let (mut rx, mut ry, mut sx, mut sy) = (0.0, 0.0, 0.0, 0.0);
        for n in (0..=nu).rev() {
            let np1 = (n + 1) as f64;
            let tx = yabs + h + np1 * rx;
            let ty = xabs - np1 * ry;
            let c = 0.5 / (tx * tx + ty * ty);
            rx = c * tx;
            ry = c * ty;
            if use_h && n <= kapn {
                let tx = qlambda + sx;
                sx = rx * tx - ry * sy;
                sy = ry * tx + rx * sy;
                qlambda /= h2;
            }
        }
        if use_h {
            u = FRAC_2_SQRT_PI * sx;
            v = FRAC_2_SQRT_PI * sy;
        } else {
            u = FRAC_2_SQRT_PI * rx;
            v = FRAC_2_SQRT_PI * ry;
        }
        if yabs == 0.0 {
            u = (-xabs * xabs).exp();
        }
    }

    if yi < 0.0 {
        if small {
            u2 *= 2.0;
            v2 *= 2.0;
        } else {
            let w1 = 2.0 * (-xquad0).exp();
            u2 = w1 * yquad.cos();
            v2 = -w1 * yquad.sin();
        }
        u = u2 - u;
        v = v2 - v;
        if xi > 0.0 {
            v = -v;
        }
    } else if xi < 0.0 {
        v = -v;
    }
    Complex64::new(u, v)
}

/// Complex error function.
pub fn erf(z: Complex64) -> Complex64 {
    if z.re < 0.0 {
        return -erf(-z);
    }
    // j·z lies in the closed upper half-plane, where w is well conditioned.
    Complex64::new(1.0, 0.0) - (-z * z).exp() * faddeeva(J * z)
}

/// Imaginary error function erfi(z) = −j·erf(jz).
pub fn erfi(z: Complex64) -> Complex64 {
    -J * erf(J * z)
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        k += s * WGK[i];
        if i % 2 == 1 {
            g += s * WG[i / 2];
        }
    }
    (k * h, ((k - g) * h).norm())
}

/// Adaptive 15-point Gauss-Kronrod integration of a complex integrand.
///
/// The interval is first cut into `panels` equal pieces; each piece is
/// bisected until its Kronrod/Gauss difference falls below its share of
/// `abs_tol`. Returns the integral and the summed error estimate.
pub fn integrate_gk<F: Fn(f64) -> Complex64>(
    f: F,
    a: f64,
    b: f64,
    panels: usize,
    abs_tol: f64,
) -> (Complex64, f64) {
    fn rec<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> (Complex64, f64) {
        let (v, e) = gk15(f, a, b);
        // Round-off floor: the Kronrod/Gauss difference cannot drop much below
        // a few ulps of the panel contribution.
        let floor = 64.0 * f64::EPSILON * v.norm().max(f(0.5 * (a + b)).norm() * (b - a).abs());
        if e <= tol.max(floor) || depth == 0 {
            return (v, e);
        }
        let m = 0.5 * (a + b);
        let (v1, e1) = rec(f, a, m, 0.5 * tol, depth - 1);
        let (v2, e2) = rec(f, m, b, 0.5 * tol, depth - 1);
        (v1 + v2, e1 + e2)
    }
    let panels = panels.max(1);
    let w = (b - a) / panels as f64;
    let tol = abs_tol / panels as f64;
    let mut total = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    for p in 0..panels {
        let lo = a + w * p as f64;
        let hi = if p + 1 == panels { b } else { lo + w };
        let (v, e) = rec(&f, lo, hi, tol, 30);
        total += v;
        err += e;
    }
    (total, err)
}

/// Gauss-Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for k in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * k + 1) as f64 * z * p1 - k as f64 * p2) / (k + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

// ---------------------------------------------------------------------------
// Quadratic-phase integral
// ---------------------------------------------------------------------------

/// (1/L)∫_{−L/2}^{L/2} exp(j(a y² + b y)) dy in closed form.
///
/// Completing the square gives a difference of erfi values at
/// √(ja)·(y + b/2a). The result does not depend on which square root of ja
/// is taken (erfi is odd). When the parabola vertex sits far outside the
/// interval, or the curvature is negligible, the square completion is badly
/// conditioned and the Gauss-Kronrod path is used instead.
pub fn quad_phase_integral(a: f64, b: f64, l: f64) -> Complex64 {
    assert!(l > 0.0, "quad_phase_integral needs L > 0");
    if a == 0.0 {
        return Complex64::new(sinc(l * b / (2.0 * PI)), 0.0);
    }
    if !erfi_form_is_conditioned(a, b, l) {
        return quad_phase_integral_quadrature(a, b, l);
    }
    quad_phase_integral_erfi(a, b, l)
}

/// Whether [`quad_phase_integral`] uses the erfi form for these arguments.
pub fn erfi_form_is_conditioned(a: f64, b: f64, l: f64) -> bool {
    a != 0.0 && a.abs() * l * l >= 1e-6 && (b / (2.0 * a)).abs() <= 4.0 * l
}

/// Square-completion (erfi) form of [`quad_phase_integral`], without the
/// quadrature fallback. Requires `a != 0`.
pub fn quad_phase_integral_erfi(a: f64, b: f64, l: f64) -> Complex64 {
    assert!(l > 0.0 && a != 0.0, "erfi form needs L > 0 and a != 0");
    let shift = b / (2.0 * a);
    let c = (J * a).sqrt();
    let t1 = -0.5 * l + shift;
    let t2 = 0.5 * l + shift;
    let diff = erfi(c * t2) - erfi(c * t1);
    let pre = Complex64::from_polar(1.0, -b * b / (4.0 * a)) * (PI.sqrt() / 2.0) / c;
    pre * diff / l
}

/// Reference evaluation of [`quad_phase_integral`] by adaptive quadrature.
pub fn quad_phase_integral_quadrature(a: f64, b: f64, l: f64) -> Complex64 {
    assert!(l > 0.0, "quad_phase_integral needs L > 0");
    let span = 0.25 * a.abs() * l * l + 0.5 * b.abs() * l;
    let panels = (span / PI).ceil() as usize + 1;
    let (v, _) = integrate_gk(
        |y| Complex64::from_polar(1.0, a * y * y + b * y),
        -0.5 * l,
        0.5 * l,
        panels,
        1e-14 * l,
    );
    v / l
}
