use nfchan::bundled;
use nfchan::geometry::wavelength;
use nfchan::multiuser::{db_to_lin, dbm_to_w};
use nfchan::scenario::*;
use nfchan::{Error, Point3, ScenarioConfig};

fn minimal(extra: &str) -> String {
    format!(
        r#"{{
  "name": "t",
  "frequency_hz": 28e9,
  "transmitter": {{ "center_m": [0, 0, 10] }}{extra}
}}"#
    )
}

#[test]
fn bundled_single_pair_scenario_matches_stated_setup() {
    let cfg = bundled::load("paper_va").unwrap();
    assert_eq!(cfg.frequency_hz, 28e9);
    assert_eq!(cfg.transmitter.center_m, [0.0, 0.0, 90.0]);
    assert_eq!((cfg.transmitter.n_u, cfg.transmitter.n_v), (1, 1));
    let r = cfg.primary_reflector().unwrap();
    assert_eq!((r.length_u_m, r.length_v_m), (3.0, 3.0));
    assert_eq!(r.center_m, [0.0, 0.0, 0.0]);
    assert_eq!(r.passivity, 1.0);
}

#[test]
fn bundled_multi_user_scenario_matches_stated_setup() {
    let cfg = bundled::load("paper_vb.json").unwrap();
    assert_eq!(cfg.frequency_hz, 60e9);
    assert_eq!((cfg.transmitter.n_u, cfg.transmitter.n_v), (400, 10));
    assert_eq!(cfg.transmitter.spacing_wavelengths, 0.5);
    let lam = wavelength(60e9);
    // Aperture convention: N elements each covering one spacing.
    assert!((cfg.transmitter.length_u(lam) - 400.0 * lam / 2.0).abs() < 1e-12);
    assert_eq!(cfg.users[0].position_m, [13.0, -13.0, -5.0]);
    assert_eq!(cfg.users[1].position_m, [11.0, -11.0, -5.0]);
    let wall = cfg.primary_reflector().unwrap().plane().unwrap();
    // Wall at x = 15 m, 10 m high, y in [-27, -17].
    assert!((wall.origin.x - 15.0).abs() < 1e-12);
    assert!((wall.normal.x.abs() - 1.0).abs() < 1e-12);
    assert_eq!((wall.length_u, wall.length_v), (10.0, 10.0));
    assert_eq!(cfg.path_loss.beta_db, -68.0);
    assert_eq!(cfg.path_loss.exponent, 2.0);
    let n = cfg.noise_model().unwrap();
    // σ² = 20 MHz · 10^{(−174 + 6 − 30)/10} W.
    assert!((n.sigma2_w() / (20e6 * 10f64.powf(-19.8)) - 1.0).abs() < 1e-12);
    assert_eq!(cfg.power_grid_dbm.first(), Some(&-40.0));
    assert_eq!(cfg.power_grid_dbm.last(), Some(&40.0));
}

#[test]
fn every_bundled_scenario_round_trips_through_json() {
    for (name, _) in bundled::ALL {
        let cfg = bundled::load(name).unwrap();
        let again = ScenarioConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(cfg, again, "{name}");
    }
}

#[test]
fn unknown_field_is_rejected() {
    let e = ScenarioConfig::from_json(&minimal(r#", "frequency": 1"#)).unwrap_err();
    assert!(matches!(&e, Error::Validation(m) if m.contains("unknown field")), "{e}");
    let e = ScenarioConfig::from_json(&minimal(r#", "users": [{"position_m": [1, 0, 0], "pos": 1}]"#)).unwrap_err();
    assert!(matches!(e, Error::Validation(_)));
}

#[test]
fn missing_or_bad_frequency_is_rejected() {
    let e = ScenarioConfig::from_json(r#"{"name": "t", "transmitter": {"center_m": [0, 0, 0]}}"#).unwrap_err();
    assert!(matches!(&e, Error::Validation(m) if m.contains("frequency_hz")), "{e}");
    let e = ScenarioConfig::from_json(&minimal("").replace("28e9", "-1")).unwrap_err();
    assert!(matches!(e, Error::Validation(_)));
}

#[test]
fn user_behind_reflector_is_rejected() {
    let r = r#", "users": [{"position_m": [1, 0, -2]}],
  "reflectors": [{"center_m": [0, 0, 0], "axis_u": [1, 0, 0], "axis_v": [0, 1, 0], "length_u_m": 3, "length_v_m": 3}]"#;
    let e = ScenarioConfig::from_json(&minimal(r)).unwrap_err();
    assert!(matches!(&e, Error::Validation(m) if m.contains("in front")), "{e}");
}

#[test]
fn no_reflectors_gives_pure_los_with_path_loss_magnitude() {
    let cfg = ScenarioConfig::from_json(&minimal(
        r#", "users": [{"position_m": [3, 4, 10]}], "path_loss": {"beta_db": -60, "d0_m": 1, "exponent": 2}"#,
    ))
    .unwrap();
    let users = assemble_channels(&cfg, 1).unwrap();
    let h = users[0].total().unwrap();
    let c0 = db_to_lin(-60.0).sqrt() / 5.0;
    assert!((h.get(0, 0).norm() - c0).abs() < 1e-15);
    assert!((users[0].factors.c0 - c0).abs() < 1e-15);
    assert!(users[0].specular.is_empty() && users[0].diffuse.is_empty());
}

#[test]
fn loss_factor_reproduces_target_rician_factor() {
    let cfg = bundled::load("paper_vb").unwrap();
    for kb in [1.0, 0.6, 0.2] {
        let users = assemble_channels(&cfg.with_k_bar_target(kb), 7).unwrap();
        assert!((users[0].factors.k_bar[0] - kb).abs() < 1e-10, "k_bar {kb}");
        // Second user shares the loss factor, so its factor differs.
        assert!(users[1].factors.k_bar[0] > 0.0);
    }
    let l = solve_loss_factor(0.5, 10.0, 20.0, 0.0, 2.0);
    assert!((l - 1.0).abs() < 1e-15);
}

#[test]
fn multi_user_los_distance_is_three_dimensional() {
    let cfg = bundled::load("paper_vb").unwrap();
    let d = Point3::from_array(cfg.users[0].position_m).norm();
    assert!((d - 363f64.sqrt()).abs() < 1e-12);
    let users = assemble_channels(&cfg, 7).unwrap();
    assert!((users[0].factors.c0 - db_to_lin(-68.0).sqrt() / d).abs() < 1e-15);
}

#[test]
fn zero_power_gives_zero_rate_and_rate_grows_with_power() {
    let cfg = bundled::load("paper_vb").unwrap();
    let setup = SumRateSetup::new(&cfg, 7).unwrap();
    assert_eq!(sum_rate(&cfg, Strategy::LosOnly, 0.0, 7).unwrap(), 0.0);
    let mut prev = 0.0;
    for p in [-40.0, -20.0, 0.0, 20.0] {
        let r = setup.rate(Strategy::LosOnly, p).unwrap();
        assert!(r > prev);
        prev = r;
    }
}

#[test]
fn single_user_rate_is_log_of_snr() {
    let mut cfg = bundled::load("paper_vb").unwrap();
    let setup = SumRateSetup::new(&cfg, 7).unwrap();
    let q = &setup.los_beams[0];
    let g = nfchan::multiuser::beam_gain(&setup.channels[0], q).unwrap().norm_sqr();
    let p = dbm_to_w(10.0);
    let expected = (1.0 + g * p / setup.sigma2_w).log2();
    let r = nfchan::multiuser::sum_rate(&setup.channels[..1], &setup.los_beams[..1], p, setup.sigma2_w).unwrap();
    assert!((r - expected).abs() < 1e-12);
    cfg.users.truncate(1);
    assert!(matches!(SumRateSetup::new(&cfg, 7), Err(Error::Validation(_))));
}

#[test]
fn smr_point_decreases_from_small_to_large_arrays() {
    let cfg = bundled::load("paper_vb").unwrap();
    let small = smr_point(&cfg, 4, 1.0).unwrap();
    let large = smr_point(&cfg, 400, 1.0).unwrap();
    assert!(small.ly_m < large.ly_m);
    assert!(large.los_desired < small.los_desired);
    assert!(large.nlos_desired < small.nlos_desired);
    assert!(10.0 * large.los_desired.log10() < -20.0);
}
