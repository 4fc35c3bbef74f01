use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nfchan"))
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/scenarios")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env("RUST_LOG", "error").output().expect("spawn nfchan")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn unknown_scenario_field_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let base = std::fs::read_to_string(scenarios().join("paper_vb.json")).unwrap();
    let bad = base.replacen("\"seed\": 7,", "\"seed\": 7, \"speed\": 1,", 1);
    let f = write(dir.path(), "bad.json", &bad);
    let out = run(&["run", "sumrate", "--scenario", &f, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown field"));
}

#[test]
fn missing_frequency_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "nofreq.json", r#"{"name": "x", "transmitter": {"center_m": [0, 0, 1]}}"#);
    let out = run(&["run", "regimes", "--scenario", &f, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("frequency_hz"));
}

#[test]
fn unknown_experiment_and_missing_file_exit_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().to_str().unwrap();
    assert_eq!(run(&["run", "nope", "--scenario", "paper_vb", "--out", o]).status.code(), Some(1));
    assert_eq!(run(&["run", "smr", "--scenario", "/no/such/file.json", "--out", o]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn sumrate_writes_tables_and_sidecar_deterministically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let sc = scenarios().join("paper_vb.json");
    for d in [&a, &b] {
        let out = run(&["run", "sumrate", "--scenario", sc.to_str().unwrap(), "--out", d.path().to_str().unwrap(), "--seed", "11"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["sumrate_kbar_1.csv", "sumrate_kbar_0p6.csv", "sumrate_kbar_0p2.csv", "sumrate.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs between runs");
    }
    let csv = std::fs::read_to_string(a.path().join("sumrate_kbar_1.csv")).unwrap();
    assert!(csv.starts_with("Pt_dBm,rate_los,rate_nlos\n"));
    assert_eq!(csv.lines().count(), 18);
    let side: serde_json::Value =
        serde_json::from_slice(&std::fs::read(a.path().join("sumrate.json")).unwrap()).unwrap();
    assert_eq!(side["seed"], 11);
    assert_eq!(side["scenario"]["frequency_hz"], 60e9);
    // No temporary files left behind.
    assert!(std::fs::read_dir(a.path()).unwrap().all(|e| !e.unwrap().file_name().to_string_lossy().starts_with('.')));
}

#[test]
fn bundled_scenario_names_resolve_and_sinr_tradeoff_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["run", "sinr-tradeoff", "--scenario", "two_user_line", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sinr_tradeoff_d.csv")).unwrap();
    assert!(csv.lines().next().unwrap().contains("sinr_los_closed"));
}

#[test]
fn verify_subset_passes_and_reports_one_line_per_criterion() {
    let out = run(&["verify", "--only", "5,6,8"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("criterion ")).count(), 3);
    assert!(text.lines().all(|l| l.contains("[PASS]")));
}

#[test]
fn scenario_subcommand_prints_bundled_json() {
    let out = run(&["scenario", "paper_va"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["frequency_hz"], 28e9);
}
