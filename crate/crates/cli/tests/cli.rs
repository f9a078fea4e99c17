use std::path::Path;
use std::process::{Command as Process, Output as ProcessOutput};

use pcsft::correspondence::classical_average_exact;
use pcsft_cli::output::Format;
use pcsft_cli::{run, Command, CommandError, ExperimentConfig, Plan};
use serde_json::Value;

fn plan(json: &str) -> Plan {
    ExperimentConfig::from_json(json).unwrap().validate().unwrap()
}

fn csv_rows(body: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = body.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<f64>], name: &str) -> Vec<f64> {
    let k = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[k]).collect()
}

fn pcsft(args: &[&str]) -> ProcessOutput {
    Process::new(env!("CARGO_BIN_EXE_pcsft"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn default_verify_passes_and_reports_every_check() {
    let out = run(Command::Verify, &plan("{}"), Format::Json).unwrap();
    assert!(out.passed);
    let report: Value = serde_json::from_str(&out.body).unwrap();
    assert_eq!(report["n"], 4);
    assert_eq!(report["seed"], 42);
    let checks = report["checks"].as_array().unwrap();
    assert!(checks.len() > 20);
    for c in checks {
        assert_eq!(c["status"], "pass", "{c}");
    }
    let equality = checks.iter().find(|c| c["check"] == "average_equality").unwrap();
    assert!(equality["max_residual"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn negative_control_expects_a_non_invariant_state() {
    let state = r#""state": {"kind": "real_covariance", "B": [[0.02, 0.0], [0.0, 0.005]]}"#;
    let control = plan(&format!(r#"{{"n": 1, "negative_control": true, {state}}}"#));
    let out = run(Command::Verify, &control, Format::Json).unwrap();
    assert!(out.passed);
    let report: Value = serde_json::from_str(&out.body).unwrap();
    let check = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["check"] == "state_invariance_negative_control")
        .unwrap()
        .clone();
    assert_eq!(check["status"], "pass");

    // Without the flag the same state fails the suite.
    let plain = plan(&format!(r#"{{"n": 1, {state}}}"#));
    assert!(!run(Command::Verify, &plain, Format::Json).unwrap().passed);
}

#[test]
fn quadratic_correspondence_agrees_within_sampling_error() {
    let out = run(Command::Correspondence, &plan("{}"), Format::Csv).unwrap();
    let (header, rows) = csv_rows(&out.body);
    assert_eq!(header, ["h", "classical_exact", "classical_mc", "mc_stderr", "quantum"]);
    let r = &rows[0];
    let (exact, mc, se, quantum) = (r[1], r[2], r[3], r[4]);
    assert!((exact - quantum).abs() <= 1e-10 * exact.abs());
    assert!((mc - exact).abs() <= 4.0 * se);
}

#[test]
fn zero_variable_gives_zeros() {
    let out = run(
        Command::Correspondence,
        &plan(r#"{"variable": {"terms": []}}"#),
        Format::Csv,
    )
    .unwrap();
    let (_, rows) = csv_rows(&out.body);
    assert_eq!(&rows[0][1..], &[0.0, 0.0, 0.0, 0.0]);
}

#[test]
fn quartic_variable_has_zero_observable() {
    let p = plan(
        r#"{"variable": {"terms": [{"coeff": 1.5,
            "factors": [{"kind": "random_scommuting"}, {"kind": "harmonic", "k": 2.0}]}]}}"#,
    );
    let out = run(Command::Correspondence, &p, Format::Csv).unwrap();
    let (_, rows) = csv_rows(&out.body);
    assert_eq!(rows[0][4], 0.0);
    let wick = classical_average_exact(&p.variable, &p.state).unwrap();
    assert_eq!(rows[0][1], wick);
}

#[test]
fn scaling_slope_and_exact_flag() {
    let mixed = plan(
        r#"{"variable": {"terms": [
            {"factors": [{"kind": "harmonic", "k": 1.0}]},
            {"factors": [{"kind": "harmonic", "k": 1.0}, {"kind": "harmonic", "k": 2.0}]}]}}"#,
    );
    let out = run(Command::Scaling, &mixed, Format::Csv).unwrap();
    let (header, rows) = csv_rows(&out.body);
    assert_eq!(header, ["h", "classical", "quantum", "abs_error"]);
    assert_eq!(rows.len(), 4);
    let summary: Value = serde_json::from_str(out.summary.as_deref().unwrap()).unwrap();
    let slope = summary["slope"].as_f64().unwrap();
    assert!((slope - 2.0).abs() < 0.02, "slope {slope}");
    assert!(summary["r2"].as_f64().unwrap() > 0.999);
    assert_eq!(summary["exact"], false);

    let quadratic = run(Command::Scaling, &plan("{}"), Format::Json).unwrap();
    let doc: Value = serde_json::from_str(&quadratic.body).unwrap();
    assert_eq!(doc["exact"], true);
    assert!(doc["slope"].is_null());
    for row in doc["table"]["rows"].as_array().unwrap() {
        let (h, err) = (row[0].as_f64().unwrap(), row[3].as_f64().unwrap());
        assert!(err <= 1e-12 * h.max(1e-3), "h {h}: error {err}");
    }
}

#[test]
fn harmonic_dynamics_keeps_dispersion_and_starts_at_the_initial_state() {
    let p = plan(
        r#"{"n": 2, "generator": {"kind": "harmonic", "k": 1.5},
            "point": {"q": [1.0, -0.5], "p": [0.25, 2.0]}}"#,
    );
    let out = run(Command::Dynamics, &p, Format::Csv).unwrap();
    let (header, rows) = csv_rows(&out.body);
    assert_eq!(header, ["t", "q1", "q2", "p1", "p2", "dispersion", "observable"]);
    assert_eq!(rows[0][..5], [0.0, 1.0, -0.5, 0.25, 2.0]);
    let disp = column(&header, &rows, "dispersion");
    assert!((disp[0] - p.state.dispersion()).abs() <= 1e-15);
    for d in &disp {
        assert!((d - disp[0]).abs() <= 1e-9 * disp[0]);
    }
    let obs = column(&header, &rows, "observable");
    for o in &obs {
        assert!((o - obs[0]).abs() <= 1e-9 * obs[0].abs().max(p.h));
    }
}

#[test]
fn generic_generator_moves_the_dispersion() {
    let p = plan(r#"{"generator": {"kind": "random_symmetric"}}"#);
    let out = run(Command::Dynamics, &p, Format::Csv).unwrap();
    let (header, rows) = csv_rows(&out.body);
    let disp = column(&header, &rows, "dispersion");
    let drift = disp
        .iter()
        .map(|d| (d - disp[0]).abs() / disp[0])
        .fold(0.0, f64::max);
    assert!(drift > 1e-3, "drift {drift}");
}

#[test]
fn ensemble_rows_track_the_exact_covariance() {
    let p = plan(r#"{"samples": 20000, "times": [0.0, 1.0, 5.0]}"#);
    let out = run(Command::Ensemble, &p, Format::Csv).unwrap();
    let (header, rows) = csv_rows(&out.body);
    assert_eq!(rows.len(), 3);
    for z in column(&header, &rows, "max_z") {
        assert!(z < 5.0);
    }
    let generic = plan(r#"{"generator": {"kind": "random_symmetric"}}"#);
    assert!(matches!(
        run(Command::Ensemble, &generic, Format::Csv),
        Err(CommandError::Config(_))
    ));
}

#[test]
fn overflowing_flow_is_reported_instead_of_printed() {
    let p = plan(
        r#"{"n": 1, "generator": {"kind": "dense", "matrix": [[-50.0, 0.0], [0.0, 50.0]]}}"#,
    );
    assert!(matches!(
        run(Command::Dynamics, &p, Format::Csv),
        Err(CommandError::Failure(_))
    ));
}

#[test]
fn exit_codes_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let ok = pcsft(&["verify", "--format", "csv"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8(ok.stdout).unwrap().starts_with("check,status,max_residual"));

    let syntax = write_config(dir.path(), "syntax.json", "{\n  \"n\": 4,\n  \"h\": ,\n}");
    let out = pcsft(&["verify", "--config", &syntax]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("line 3"));

    let field = write_config(dir.path(), "field.json", r#"{"h_grid": [0.1, 0.2, 0.01]}"#);
    let out = pcsft(&["scaling", "--config", &field]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("h_grid[1]"));

    let broken = write_config(
        dir.path(),
        "broken.json",
        r#"{"n": 1, "state": {"kind": "real_covariance", "B": [[1.0, 0.0], [0.0, 2.0]]}}"#,
    );
    assert_eq!(pcsft(&["verify", "--config", &broken]).status.code(), Some(1));
    assert_eq!(pcsft(&["correspondence", "--config", &broken]).status.code(), Some(2));
}

#[test]
fn out_file_seed_override_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let c = dir.path().join("c.csv");
    for (path, seed) in [(&a, "5"), (&b, "5"), (&c, "6")] {
        let out = pcsft(&[
            "correspondence",
            "--format",
            "csv",
            "--seed",
            seed,
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        assert!(out.stdout.is_empty());
    }
    let read = |p: &Path| std::fs::read(p).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));

    let s = dir.path().join("s.csv");
    let out = pcsft(&["scaling", "--format", "csv", "--out", s.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let summary: Value =
        serde_json::from_slice(&read(&dir.path().join("s.csv.summary.json"))).unwrap();
    assert_eq!(summary["exact"], true);
}
