use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use num_complex::Complex64;
use nfchan::geometry::{wavelength, wavenumber, PlaneSpec, Point3};
use nfchan::hf::{hf_coefficient, HFConfig};
use nfchan::special::{erfi, quad_phase_integral};
use nfchan::surface::{sample_surface, RoughSurface};

fn special(c: &mut Criterion) {
    c.bench_function("erfi", |b| b.iter(|| erfi(black_box(Complex64::new(1.3, -2.1)))));
    c.bench_function("quad_phase_integral/erfi", |b| {
        b.iter(|| quad_phase_integral(black_box(120.0), black_box(15.0), black_box(1.0)))
    });
    c.bench_function("quad_phase_integral/quadrature", |b| {
        b.iter(|| quad_phase_integral(black_box(0.5), black_box(30.0), black_box(1.0)))
    });
}

fn surfaces(c: &mut Criterion) {
    let lam = wavelength(28e9);
    let plane = PlaneSpec::xy_square(1.0).unwrap();
    let iid = RoughSurface::flat(plane).with_sigma(lam / 10.0);
    let corr = RoughSurface::flat(plane).with_sigma(lam / 10.0).with_corr_len(5.0 * lam);
    c.bench_function("sample_surface/iid", |b| b.iter(|| sample_surface(&iid, lam / 4.0, black_box(3)).unwrap()));
    c.bench_function("sample_surface/correlated", |b| {
        b.iter(|| sample_surface(&corr, lam / 4.0, black_box(3)).unwrap())
    });
}

fn oracle(c: &mut Criterion) {
    let f = 28e9;
    let lam = wavelength(f);
    let surface = RoughSurface::flat(PlaneSpec::xy_square(1.0).unwrap()).with_sigma(lam / 10.0);
    let real = sample_surface(&surface, lam / 4.0, 1).unwrap();
    let hf = HFConfig::with_step(lam / 4.0);
    let (tx, rx) = (Point3::new(0.0, 0.0, 20.0), Point3::new(0.5, 0.0, 10.0));
    let mut g = c.benchmark_group("hf_coefficient");
    g.sample_size(20);
    g.bench_function("1m_patch_quarter_wavelength", |b| {
        b.iter(|| hf_coefficient(black_box(tx), black_box(rx), &real, wavenumber(f), &hf).unwrap())
    });
    g.finish();
}

criterion_group!(benches, special, surfaces, oracle);
criterion_main!(benches);
