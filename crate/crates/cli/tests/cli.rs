//! End-to-end runs of the `entangle-sense` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_entangle-sense"));
    c.env_remove("ENTANGLE_SENSE_OUT");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn seeded_run_is_byte_identical() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let o = run(&["--scenario", "fig3a", "--seed", "7", "--out", d.path().to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        let listed = String::from_utf8_lossy(&o.stdout);
        assert!(listed.lines().any(|l| l.ends_with("fig3a.csv")), "{listed}");
    }
    for name in ["fig3a.csv", "fig3a.json"] {
        assert_eq!(
            fs::read(dirs[0].path().join(name)).unwrap(),
            fs::read(dirs[1].path().join(name)).unwrap(),
            "{name}"
        );
    }
    let doc = json(&dirs[0].path().join("fig3a.json"));
    assert_eq!(doc["config"]["seed"], 7);
}

#[test]
fn fig4c_experimental_cell_outside_without_repetitive_readout() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["--scenario", "fig4c", "--quiet", "--out", d.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let doc = json(&d.path().join("fig4c.json"));
    let cell = &doc["results"]["experimental_cell"];
    assert!(cell["without_rr"]["g_tilde"].as_f64().unwrap() <= 1.0);
    assert_eq!(doc["results"]["inside_without_rr"], false);
    let csv = fs::read_to_string(d.path().join("fig4c.csv")).unwrap();
    assert!(csv.starts_with("d[Hz],ratio[1],g_tilde[1]"));
    assert_eq!(csv.lines().count(), 1 + 50 * 50);
}

#[test]
fn fig2b_peak_at_sum_frequency() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["--scenario", "fig2b", "--out", d.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = &json(&d.path().join("fig2b.json"))["results"];
    let f = r["peak_frequency"].as_f64().unwrap();
    let res = r["resolution_hz"].as_f64().unwrap();
    assert!((f - 750e3).abs() <= res, "{f} ({res})");
}

#[test]
fn config_file_and_flag_overrides() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("c.json");
    fs::write(&cfg, r#"{"scenario": "fig4a", "budget": {"tau_s": 2.0e-5}}"#).unwrap();
    let out = d.path().join("out");
    let o = run(&["--config", cfg.to_str().unwrap(), "--seed", "9", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc = json(&out.join("fig4a.json"));
    assert_eq!(doc["config"]["seed"], 9);
    assert_eq!(doc["config"]["budget"]["tau_s"], 2.0e-5);
    let meta = json(&out.join("fig4a.meta.json"));
    assert_eq!(meta["scenario"], "fig4a");
}

#[test]
fn out_directory_from_environment() {
    let d = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["--scenario", "fig4a", "--quiet"])
        .env("ENTANGLE_SENSE_OUT", d.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(d.path().join("fig4a.csv").exists());
}

#[test]
fn bad_polarization_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("bad.json");
    fs::write(&cfg, "{\n  \"scenario\": \"fig4a\",\n  \"nuclear\": {\"polarization\": 1.5}\n}\n").unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "--out", d.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.lines().any(|l| l.contains("line 3") && l.contains("nuclear.polarization")), "{err}");
    assert!(!d.path().join("fig4a.csv").exists());

    let o = run(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nuclear.polarization"));
}

#[test]
fn missing_coupling_for_gate_scenario() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("c.json");
    fs::write(&cfg, "{\"scenario\": \"fig1f\"}\n").unwrap();
    let o = run(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("coupling.d_hz"), "{err}");
    let o = run(&["--config", cfg.to_str().unwrap(), "--out", d.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn several_violations_are_all_listed() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("c.json");
    fs::write(
        &cfg,
        "{\n\"nuclear\": {\"polarization\": -1},\n\"sweep\": {\"d_hz\": {\"start\": 5, \"stop\": 1, \"points\": 4}}\n}\n",
    )
    .unwrap();
    let o = run(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("nuclear.polarization") && err.contains("sweep.d_hz"), "{err}");
}

#[test]
fn malformed_json_reports_its_line() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("c.json");
    fs::write(&cfg, "{\n  \"seed\": 1,\n  \"bogus\": true\n}\n").unwrap();
    let o = run(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("line 3") && err.contains("bogus"), "{err}");
}

#[test]
fn default_config_validates() {
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.json");
    let o = run(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains(": ok"));
}

#[test]
fn missing_scenario_and_missing_file() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["--out", d.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no scenario"));
    let o = run(&["--config", "/nonexistent/c.json", "--scenario", "fig4a"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unknown_scenario_rejected_by_argument_parser() {
    let o = run(&["--scenario", "fig9z"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("fig9z"));
}
