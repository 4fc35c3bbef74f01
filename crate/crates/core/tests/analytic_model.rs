use std::f64::consts::PI;

use num_complex::Complex64;
use nfchan::geometry::{make_upa, mirror_point, nf_array_response, wavelength, wavenumber, ArrayGeometry, PlaneSpec, Point3};
use nfchan::model::*;
use nfchan::surface::RoughSurface;
use nfchan::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const F: f64 = 28e9;

fn axes() -> (Point3, Point3) {
    (Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0))
}

fn small_arrays() -> (ArrayGeometry, ArrayGeometry) {
    let lam = wavelength(F);
    let tx = make_upa(Point3::new(0.0, 0.0, 9.0), 2, 3, lam / 2.0, axes()).unwrap();
    let rx = make_upa(Point3::new(1.0, 0.5, 3.0), 3, 2, lam / 2.0, axes()).unwrap();
    (tx, rx)
}

#[test]
fn los_single_pair_and_unit_modulus() {
    let k = wavenumber(F);
    let tx = ArrayGeometry::single(Point3::new(0.0, 0.0, 0.0));
    let rx = ArrayGeometry::single(Point3::new(3.0, 4.0, 0.0));
    let h = los_matrix(&tx, &rx, k);
    assert!((h.get(0, 0) - Complex64::from_polar(1.0, 5.0 * k)).norm() < 1e-12);

    let (tx, rx) = small_arrays();
    let h = los_matrix(&tx, &rx, k);
    assert_eq!(h.shape(), (rx.len(), tx.len()));
    assert!(h.as_slice().iter().all(|c| (c.norm() - 1.0).abs() < 1e-14));
    // Each column is the Rx response focused on that Tx element.
    for n in 0..tx.len() {
        let a = nf_array_response(&rx, tx.elements()[n], k);
        for m in 0..rx.len() {
            assert!((h.get(m, n) - a[m]).norm() < 1e-12);
        }
    }
}

#[test]
fn scatterer_matrix_is_rank_one_outer_product() {
    let k = wavenumber(F);
    let (tx, rx) = small_arrays();
    let s = Point3::new(2.0, -1.0, 5.0);
    let h = scatterer_matrix(&tx, &rx, s, k).unwrap();
    let a_tx = nf_array_response(&tx, s, k);
    let a_rx = nf_array_response(&rx, s, k);
    for m in 0..rx.len() {
        for n in 0..tx.len() {
            assert!((h.get(m, n) - a_rx[m] * a_tx[n]).norm() < 1e-12);
        }
    }
    // Rank one: every 2×2 minor vanishes.
    for m in 1..rx.len() {
        for n in 1..tx.len() {
            let minor = h.get(0, 0) * h.get(m, n) - h.get(0, n) * h.get(m, 0);
            assert!(minor.norm() < 1e-10);
        }
    }
    let t = Point3::new(0.0, 0.0, 0.0);
    let r = Point3::new(1.0, 0.0, 0.0);
    let one = scatterer_matrix(&ArrayGeometry::single(t), &ArrayGeometry::single(r), s, k).unwrap();
    assert!((one.get(0, 0) - Complex64::from_polar(1.0, k * (t.distance(s) + r.distance(s)))).norm() < 1e-9);
    assert!(matches!(
        scatterer_matrix(&ArrayGeometry::single(s), &rx, s, k),
        Err(Error::Validation(_))
    ));
}

#[test]
fn roughness_attenuation_limits() {
    assert_eq!(roughness_attenuation(0.0), 1.0);
    assert!(roughness_attenuation(1e4) < 1e-300);
    assert!((roughness_attenuation(1.0) - 0.6065306597126334).abs() < 1e-15);
}

#[test]
fn gaussian_phase_average_matches_attenuation() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 1_000_000;
    for g in [0.25, 1.0, 4.0] {
        let kz_sigma: f64 = f64::sqrt(g);
        let mut acc = Complex64::new(0.0, 0.0);
        for _ in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            acc += Complex64::from_polar(1.0, -kz_sigma * z);
        }
        let mean = acc / n as f64;
        assert!((mean.re - roughness_attenuation(g)).abs() < 0.002, "g {g}: {mean}");
        assert!(mean.im.abs() < 0.002);
    }
}

#[test]
fn deterministic_reflector_flat_magnitude_and_mirror_symmetry() {
    let k = wavenumber(F);
    let lam = wavelength(F);
    let (tx, rx) = small_arrays();
    let surf = RoughSurface::new(PlaneSpec::xy_square(3.0).unwrap(), 0.0, 0.0, 0.7, 1.0).unwrap();
    let (c, h) = deterministic_reflector(&tx, &rx, &surf, k).unwrap();
    let d = mirror_point(rx.center(), &surf.plane).distance(tx.center());
    assert!((c.norm() - 0.7 / (lam * d)).abs() < 1e-12 * c.norm());
    // ζ/(jλ) carries phase −π/2.
    assert!((c.arg() + PI / 2.0).abs() < 1e-12);
    let alt = image_matrix_from_virtual_tx(&tx, &rx, &surf.plane, k);
    assert!(h.max_abs_diff(&alt) < 1e-10);

    let rough = surf.with_sigma(1.0 / k);
    let (cr, _) = deterministic_reflector(&tx, &rx, &rough, k).unwrap();
    let g = roughness_g(tx.center(), rx.center(), &rough, k);
    assert!((cr.norm() / c.norm() - (-g / 2.0).exp()).abs() < 1e-12);

    let behind = ArrayGeometry::single(Point3::new(0.0, 0.0, -1.0));
    assert!(matches!(deterministic_reflector(&behind, &rx, &surf, k), Err(Error::Validation(_))));
}

#[test]
fn passivity_scales_gains_only() {
    let k = wavenumber(F);
    let (tx, rx) = small_arrays();
    let a = RoughSurface::flat(PlaneSpec::xy_square(3.0).unwrap()).with_sigma(0.5 / k);
    let b = RoughSurface { passivity: 0.25, ..a };
    let (ca, ha) = deterministic_reflector(&tx, &rx, &a, k).unwrap();
    let (cb, hb) = deterministic_reflector(&tx, &rx, &b, k).unwrap();
    assert!((cb - ca * 0.25).norm() < 1e-15);
    assert_eq!(ha.max_abs_diff(&hb), 0.0);
    let p = DiffuseParams::isotropic(wavelength(F), 9.0);
    let ma = ReflectorModel::new(&a, &tx, &rx, k, &p).unwrap();
    let mb = ReflectorModel::new(&b, &tx, &rx, k, &p).unwrap();
    assert!((mb.c_tilde_inf_sq / ma.c_tilde_inf_sq - 0.0625).abs() < 1e-12);
}

#[test]
fn correlation_integral_basic_identities() {
    let k = wavenumber(F);
    let lam = wavelength(F);
    let plane = PlaneSpec::xy_square(3.0).unwrap();
    let p = Point3::new(0.0, 0.0, 5.0);
    let r = spatial_correlation_integral((p, p), (p, p), &plane, k).unwrap();
    assert_eq!(r, Complex64::new(1.0, 0.0));

    let q = p + Point3::new(0.7 * lam, 0.2 * lam, 0.3 * lam);
    let t0 = Point3::new(0.0, 0.0, 90.0);
    let t1 = t0 + Point3::new(0.0, 0.5 * lam, 0.0);
    let fwd = spatial_correlation_integral((t0, t1), (p, q), &plane, k).unwrap();
    let rev = spatial_correlation_integral((t1, t0), (q, p), &plane, k).unwrap();
    assert!((fwd - rev.conj()).norm() < 1e-12);
    assert!(fwd.norm() <= 1.0 + 1e-12);

    let empty = PlaneSpec { length_u: 0.0, ..plane };
    assert!(spatial_correlation_integral((t0, t1), (p, q), &empty, k).is_err());
}

#[test]
fn correlation_integral_matches_sinc_on_matched_window() {
    let k = wavenumber(F);
    let lam = wavelength(F);
    let plane = PlaneSpec::xy_square(3.0).unwrap();
    let p = Point3::new(0.0, 0.0, 5.0);
    let t = Point3::new(0.0, 0.0, 90.0);
    for (axis, label) in [(Point3::new(1.0, 0.0, 0.0), "perpendicular"), (Point3::new(0.0, 0.0, 1.0), "aligned")] {
        let (th1, th2) = angular_window(p, axis, &plane);
        for i in 1..=12 {
            let d = 0.25 * i as f64 * lam;
            let r = spatial_correlation_integral((t, t), (p - axis * (d / 2.0), p + axis * (d / 2.0)), &plane, k).unwrap();
            // Isotropic-cap prediction uses sin θ uniform over the window.
            let cap = nfchan::special::sinc(d / lam * (th2.sin() - th1.sin()));
            assert!((r.norm() - cap.abs()).abs() < 0.05, "{label} d={d}: {} vs {}", r.norm(), cap);
        }
    }
}

#[test]
fn sinc_forms() {
    let lam = wavelength(F);
    assert_eq!(spatial_correlation_sinc(0.0, -0.3, 0.4, lam), 1.0);
    assert!(spatial_correlation_sinc(lam / 2.0, -PI / 2.0, PI / 2.0, lam).abs() < 1e-15);
    let tc = PI / 3.0;
    // Perpendicular main lobe: 2(d/λ) sin(θc/2) ≤ 1, i.e. d ≤ λ.
    for i in 1..=30 {
        let d = i as f64 / 30.0 * lam;
        let a = correlation_aligned(d, tc, lam);
        let p = correlation_perpendicular(d, tc, lam);
        assert!(a >= p - 1e-15, "d={d}");
    }
    for i in 1..=30 {
        let d = 0.1 * i as f64 * lam;
        let a = correlation_aligned(d, tc, lam);
        let p = correlation_perpendicular(d, tc, lam);
        assert!((a - nfchan::special::sinc(2.0 * d / lam * (tc / 2.0).sin().powi(2))).abs() < 1e-12);
        assert!((p - nfchan::special::sinc(2.0 * d / lam * (tc / 2.0).sin())).abs() < 1e-12);
    }
}

#[test]
fn uncorrelated_power_law() {
    let lam = wavelength(F);
    let p = DiffuseParams::isotropic(lam, 9.0);
    let (inf, stoch, total) = power_gain_uncorrelated(2.0, 0.0, 100.0, 90.0, 30.0, 1.0, &p);
    assert_eq!(stoch, 0.0);
    assert_eq!(total, 2.0);
    let (inf2, stoch2, total2) = power_gain_uncorrelated(2.0, 800.0, 100.0, 90.0, 30.0, 1.0, &p);
    assert_eq!(inf, inf2);
    assert!((stoch2 - inf).abs() < 1e-15 * inf && (total2 - inf).abs() < 1e-15 * inf);
    let (far, _, _) = power_gain_uncorrelated(2.0, 1.0, 100.0, 90.0, 60.0, 1.0, &p);
    assert!((inf / far - 4.0).abs() < 1e-12);
    let direct = diffuse_power_ratio(&p, 1.0, 90.0, 30.0);
    let half = diffuse_power_ratio(&p, 1.0, 90.0, 60.0);
    assert!((direct / half - 4.0).abs() < 1e-12);
}

#[test]
fn kappa_rho_candidates_and_fit() {
    let k = wavenumber(F);
    let plane = PlaneSpec::xy_square(3.0).unwrap();
    let normal = kappa_rho_fit(Point3::new(0.0, 0.0, 9.0), Point3::new(0.0, 0.0, 4.0), &plane, k);
    assert!(normal.kappa_rho.abs() < 1e-9);

    // Specular pair: the in-plane components cancel.
    let tx = Point3::new(-3.0, 0.0, 4.0);
    let rx = Point3::new(3.0, 0.0, 4.0);
    let fit = kappa_rho_fit(tx, rx, &plane, k);
    assert!((fit.a_literal - 0.6).abs() < 1e-12);
    assert!(fit.a_projected.abs() < 1e-12);
    assert!(fit.a_fitted.abs() < 1e-9);
    assert!(fit.projected_selected);
    assert!(fit.kappa_rho.abs() < 1e-6);

    // Generic geometry: the fit tracks the projected form.
    let tx = Point3::new(1.0, 2.0, 6.0);
    let rx = Point3::new(-2.0, 0.5, 3.0);
    let fit = kappa_rho_fit(tx, rx, &plane, k);
    assert!((fit.a_fitted - fit.a_projected).abs() < 1e-9);
    assert!((fit.a_fitted - fit.a_literal).abs() > 1e-3);
    let swapped = kappa_rho(rx, tx, &plane, k);
    assert!((swapped - fit.kappa_rho).abs() < 1e-9 * fit.kappa_rho);
}

#[test]
fn s_min_and_branch_continuity() {
    let s = s_min(0.1).unwrap();
    assert!(s > 0.0 && s < 1.0);
    assert!((s * (1.0 - s).exp() - 0.1).abs() < 1e-10);
    assert!(matches!(s_min(1.0), Err(Error::Validation(_))));
    assert!(matches!(s_min(1.5), Err(Error::Validation(_))));

    let (c0, floor) = (3.0, 0.3);
    let at_one = power_gain_from_s(1.0, c0, floor).unwrap();
    let below_one = power_gain_from_s(1.0 - 1e-12, c0, floor).unwrap();
    assert_eq!(at_one, c0);
    assert!((below_one - c0).abs() < 1e-11 * c0);
    let sm = s_min(floor / c0).unwrap();
    assert_eq!(power_gain_from_s(sm, c0, floor).unwrap(), floor);
    let above = power_gain_from_s(sm * (1.0 + 1e-12), c0, floor).unwrap();
    assert!((above - floor).abs() < 1e-9 * floor);
    assert_eq!(power_gain_from_s(0.0, c0, floor).unwrap(), floor);
    assert_eq!(power_gain_from_s(5.0, c0, floor).unwrap(), c0);
}

#[test]
fn correlated_power_from_reflector_model() {
    let k = wavenumber(F);
    let lam = wavelength(F);
    let plane = PlaneSpec::xy_square(3.0).unwrap();
    let surf = RoughSurface::flat(plane).with_sigma(3.0 / k);
    let tx = ArrayGeometry::single(Point3::new(0.0, 0.0, 90.0));
    let rx = ArrayGeometry::single(Point3::new(1.0, 0.0, 20.0));
    let m = ReflectorModel::new(&surf, &tx, &rx, k, &DiffuseParams::isotropic(lam, 9.0)).unwrap();
    assert!(m.g > 0.0 && m.s == 0.0);
    let c0 = m.c_bar_flat.norm_sqr();
    let ell_max = 2.0 * surf.sigma_z * m.kappa_z / m.kappa_rho;
    assert!((power_gain_correlated(&m, ell_max).unwrap() / c0 - 1.0).abs() < 1e-12);
    assert_eq!(power_gain_correlated(&m, 2.0 * ell_max).unwrap(), c0);
    assert_eq!(power_gain_correlated(&m, 0.0).unwrap(), m.c_tilde_inf_sq);
    let mid = power_gain_correlated(&m, 0.5 * ell_max).unwrap();
    assert!((mid / c0 - 0.25 * (0.75f64).exp()).abs() < 1e-12);
    let flat = ReflectorModel::new(&RoughSurface::flat(plane), &tx, &rx, k, &DiffuseParams::isotropic(lam, 9.0)).unwrap();
    assert!(power_gain_correlated(&flat, 0.1).is_err());
}

#[test]
fn sampled_channel_moments() {
    let k = wavenumber(F);
    let lam = wavelength(F);
    let tx = ArrayGeometry::single(Point3::new(0.0, 0.0, 9.0));
    let rx = make_upa(Point3::new(0.5, 0.0, 3.0), 2, 1, lam / 2.0, axes()).unwrap();
    let plane = PlaneSpec::xy_square(3.0).unwrap();
    let params = DiffuseParams::isotropic(lam, 9.0);

    let flat = ReflectorModel::new(&RoughSurface::flat(plane), &tx, &rx, k, &params).unwrap();
    let h = sample_reflector_channel(&flat, &tx, &rx, k, 1, StochasticMode::Iid).unwrap();
    let (c, hbar) = deterministic_reflector(&tx, &rx, &RoughSurface::flat(plane), k).unwrap();
    assert!(h.max_abs_diff(&hbar.scaled(c)) == 0.0);

    let surf = RoughSurface::flat(plane).with_sigma(0.5 / k);
    let m = ReflectorModel::new(&surf, &tx, &rx, k, &params).unwrap().with_flat_gain(Complex64::new(0.0, -1.0));
    let mean_ref = hbar.scaled(m.c_bar());
    let var = m.stochastic_power();
    let n = 10_000;
    let mut sum = [Complex64::new(0.0, 0.0); 2];
    let mut sq = [0.0; 2];
    for s in 0..n {
        let h = sample_reflector_channel(&m, &tx, &rx, k, s, StochasticMode::Iid).unwrap();
        for i in 0..2 {
            let v = h.get(i, 0);
            sum[i] += v;
            sq[i] += (v - mean_ref.get(i, 0)).norm_sqr();
        }
    }
    let se = (var / n as f64).sqrt();
    for i in 0..2 {
        let mean = sum[i] / n as f64;
        assert!((mean - mean_ref.get(i, 0)).norm() < 3.0 * se, "entry {i}");
        assert!((sq[i] / n as f64 / var - 1.0).abs() < 0.05);
    }
}

#[test]
fn correlated_sampling_follows_kernel() {
    let k = wavenumber(F);
    let lam = wavelength(F);
    let plane = PlaneSpec::xy_square(3.0).unwrap();
    let tx = ArrayGeometry::single(Point3::new(0.0, 0.0, 90.0));
    let rx = make_upa(Point3::new(0.0, 0.0, 5.0), 2, 1, lam / 2.0, axes()).unwrap();
    let surf = RoughSurface::flat(plane).with_sigma(3.0 / k);
    let m = ReflectorModel::new(&surf, &tx, &rx, k, &DiffuseParams::isotropic(lam, 9.0)).unwrap();
    let kernel = spatial_correlation_integral(
        (tx.center(), tx.center()),
        (rx.elements()[0], rx.elements()[1]),
        &plane,
        k,
    )
    .unwrap();
    let (_, hbar) = deterministic_reflector(&tx, &rx, &surf, k).unwrap();
    let mean = hbar.scaled(m.c_bar());
    let n = 4000;
    let mut cross = Complex64::new(0.0, 0.0);
    for s in 0..n {
        let h = sample_reflector_channel(&m, &tx, &rx, k, s, StochasticMode::Correlated).unwrap();
        cross += (h.get(0, 0) - mean.get(0, 0)) * (h.get(1, 0) - mean.get(1, 0)).conj();
    }
    let est = cross / (n as f64 * m.stochastic_power());
    assert!((est - kernel).norm() < 0.06, "{est} vs {kernel}");
}
