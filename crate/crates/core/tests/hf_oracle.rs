use nfchan::geometry::{make_upa, wavelength, wavenumber, ArrayGeometry, PlaneSpec, Point3};
use nfchan::hf::{hf_channel_matrix, hf_coefficient, hf_coefficients, HFConfig};
use nfchan::model::{deterministic_reflector, specular_field_coefficient};
use nfchan::surface::{sample_surface, RoughSurface, SurfaceRealization};
use nfchan::Error;

const F: f64 = 28e9;

fn va_plane() -> PlaneSpec {
    PlaneSpec::xy_square(3.0).unwrap()
}

fn flat_real(side: f64, step: f64) -> SurfaceRealization {
    SurfaceRealization::flat(RoughSurface::flat(PlaneSpec::xy_square(side).unwrap()), step).unwrap()
}

#[test]
fn flat_surface_matches_image_theory() {
    let k = wavenumber(F);
    let cfg = HFConfig::for_wavenumber(k);
    let real = SurfaceRealization::flat(RoughSurface::flat(va_plane()), cfg.grid_step).unwrap();
    let tx = Point3::new(0.0, 0.0, 90.0);
    let rx = Point3::new(0.3, 0.2, 1.0);
    let c = hf_coefficient(tx, rx, &real, k, &cfg).unwrap();
    let img = specular_field_coefficient(tx, rx, &real.surface, k).unwrap();
    assert!((c.norm() / img.norm() - 1.0).abs() < 0.05, "ratio {}", c.norm() / img.norm());
    assert!((c - img).norm() / img.norm() < 0.1);

    // Same check through the closed-form reflector gain: |c| = λ cos²θ |c̄(0)|.
    let (cbar, hbar) =
        deterministic_reflector(&ArrayGeometry::single(tx), &ArrayGeometry::single(rx), &real.surface, k).unwrap();
    let d = Point3::new(rx.x, rx.y, -rx.z).distance(tx);
    let cos = (tx.z + rx.z) / d;
    let predicted = wavelength(F) * cos * cos * cbar.norm() * hbar.get(0, 0).norm();
    assert!((c.norm() / predicted - 1.0).abs() < 0.05);
}

#[test]
fn reciprocity_and_passivity_scaling() {
    let k = wavenumber(F);
    let cfg = HFConfig::for_wavenumber(k);
    let surf = RoughSurface::flat(PlaneSpec::xy_square(0.6).unwrap()).with_sigma(0.002);
    let real = sample_surface(&surf, cfg.grid_step, 5).unwrap();
    let a = Point3::new(0.1, -0.2, 2.0);
    let b = Point3::new(-0.3, 0.25, 1.5);
    let ab = hf_coefficient(a, b, &real, k, &cfg).unwrap();
    let ba = hf_coefficient(b, a, &real, k, &cfg).unwrap();
    assert!((ab - ba).norm() <= 1e-12 * ab.norm());

    let mut half = real.clone();
    half.surface.passivity = 0.5;
    let h = hf_coefficient(a, b, &half, k, &cfg).unwrap();
    assert!((h - ab * 0.5).norm() <= 1e-12 * ab.norm());
}

#[test]
fn matrix_is_consistent_with_pairwise_coefficients() {
    let k = wavenumber(F);
    let lam = wavelength(F);
    let cfg = HFConfig::for_wavenumber(k);
    let real = flat_real(0.8, cfg.grid_step);
    let tx = ArrayGeometry::single(Point3::new(0.0, 0.0, 3.0));
    let rx = ArrayGeometry::single(Point3::new(0.2, 0.1, 2.0));
    let m = hf_channel_matrix(&tx, &rx, &real, k, &cfg).unwrap();
    assert_eq!(m.shape(), (1, 1));
    let c = hf_coefficient(tx.center(), rx.center(), &real, k, &cfg).unwrap();
    assert_eq!(m.get(0, 0), c);

    let a = make_upa(Point3::new(0.0, 0.0, 3.0), 2, 1, lam / 2.0, (Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)))
        .unwrap();
    let b = make_upa(Point3::new(0.1, 0.1, 2.0), 1, 2, lam / 2.0, (Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)))
        .unwrap();
    let ab = hf_channel_matrix(&a, &b, &real, k, &cfg).unwrap();
    let ba = hf_channel_matrix(&b, &a, &real, k, &cfg).unwrap();
    assert!(ab.max_abs_diff(&ba.transpose()) <= 1e-12 * ab.get(0, 0).norm());
}

#[test]
fn flat_two_by_two_has_equal_magnitudes() {
    let k = wavenumber(F);
    let lam = wavelength(F);
    let cfg = HFConfig::for_wavenumber(k);
    let real = SurfaceRealization::flat(RoughSurface::flat(va_plane()), cfg.grid_step).unwrap();
    let axes = (Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0));
    let tx = make_upa(Point3::new(0.0, 0.0, 90.0), 2, 1, lam / 2.0, axes).unwrap();
    let rx = make_upa(Point3::new(0.3, 0.2, 1.0), 1, 2, lam / 2.0, axes).unwrap();
    let h = hf_channel_matrix(&tx, &rx, &real, k, &cfg).unwrap();
    let mags: Vec<f64> = h.as_slice().iter().map(|c| c.norm()).collect();
    let max = mags.iter().cloned().fold(0.0, f64::max);
    let min = mags.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(max / min - 1.0 < 0.01, "{mags:?}");
}

#[test]
fn grid_convergence_lambda_8_to_16() {
    let k = wavenumber(F);
    let lam = wavelength(F);
    let tx = Point3::new(0.0, 0.0, 90.0);
    let rx = Point3::new(1.0, 0.5, 30.0);
    for sigma in [0.0, lam / 8.0, lam / 2.0] {
        let surf = RoughSurface::flat(va_plane()).with_sigma(sigma);
        let real = sample_surface(&surf, lam / 8.0, 11).unwrap();
        let c8 = hf_coefficient(tx, rx, &real, k, &HFConfig::with_step(lam / 8.0)).unwrap();
        let c16 = hf_coefficient(tx, rx, &real, k, &HFConfig::with_step(lam / 16.0)).unwrap();
        let rel = (c16.norm() / c8.norm() - 1.0).abs();
        assert!(rel < 0.01, "sigma {sigma}: relative change {rel}");
    }
}

#[test]
fn multi_rx_matches_single_evaluations() {
    let k = wavenumber(F);
    let cfg = HFConfig::for_wavenumber(k);
    let surf = RoughSurface::flat(PlaneSpec::xy_square(0.5).unwrap()).with_sigma(0.003);
    let real = sample_surface(&surf, cfg.grid_step, 9).unwrap();
    let tx = Point3::new(0.0, 0.0, 2.0);
    let rxs: Vec<Point3> = (0..5).map(|i| Point3::new(0.05 * i as f64, 0.0, 1.0)).collect();
    let all = hf_coefficients(tx, &rxs, &real, k, &cfg).unwrap();
    for (rx, c) in rxs.iter().zip(&all) {
        assert_eq!(*c, hf_coefficient(tx, *rx, &real, k, &cfg).unwrap());
    }
}

#[test]
fn invalid_inputs_are_rejected() {
    let k = wavenumber(F);
    let lam = wavelength(F);
    let real = flat_real(0.5, lam / 8.0);
    let cfg = HFConfig::with_step(lam / 8.0);
    let front = Point3::new(0.0, 0.0, 1.0);
    for bad in [Point3::new(0.0, 0.0, 0.0), Point3::new(0.1, 0.0, -1.0)] {
        assert!(matches!(hf_coefficient(bad, front, &real, k, &cfg), Err(Error::Validation(_))));
        assert!(matches!(hf_coefficient(front, bad, &real, k, &cfg), Err(Error::Validation(_))));
    }
    let coarse = HFConfig::with_step(lam / 3.0);
    assert!(matches!(hf_coefficient(front, front, &real, k, &coarse), Err(Error::Validation(_))));
}

#[test]
fn constant_amplitude_mode_is_close_for_distant_points() {
    let k = wavenumber(F);
    let cfg = HFConfig::for_wavenumber(k);
    let real = SurfaceRealization::flat(RoughSurface::flat(va_plane()), cfg.grid_step).unwrap();
    let tx = Point3::new(0.0, 0.0, 90.0);
    let rx = Point3::new(1.0, 0.5, 30.0);
    let exact = hf_coefficient(tx, rx, &real, k, &cfg).unwrap();
    let frozen = hf_coefficient(tx, rx, &real, k, &HFConfig { use_exact_amplitude: false, ..cfg }).unwrap();
    assert!((frozen.norm() / exact.norm() - 1.0).abs() < 0.05);
}
