use serde_json::Value;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use tempfile::TempDir;

const Y_GRAPH: &str = r#""graph": {"edges": 3, "incoming": 1, "alphas": [1, 1.4142135623730951, 1.4142135623730951], "p": 1}"#;
const N4_GRAPH: &str = r#""graph": {"edges": 4, "incoming": 2, "alphas": [1, 1, 1, 1], "p": 1}"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_star-nls"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn spectrum_n4_matches_theorem() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(
        tmp.path(),
        "n4.json",
        &format!(r#"{{{N4_GRAPH}, "a": 0.7, "h": 0.02, "window": [-4, 0.5]}}"#),
    );
    let out = tmp.path().join("out");
    let o = run(&[
        "spectrum",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--assert-theorem",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = json(&out.join("spectrum.json"));
    assert_eq!(r["morse_index"], 2);
    assert_eq!(r["zero_multiplicity"], 1);
    assert_eq!(r["entries"][1]["case"], "B");
    assert_eq!(r["seed"], 7);
    let table = fs::read_to_string(out.join("spectrum.txt")).unwrap();
    assert!(table.contains("abs diff") && table.contains("predicted (2, 1)"));
    assert!(r["cross_validation"][0]["abs_diff"].as_f64().unwrap() < 1e-3);
}

#[test]
fn spectrum_y_graph_negative_shift() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(
        tmp.path(),
        "y.json",
        &format!(r#"{{{Y_GRAPH}, "a": -0.7, "h": 0.02, "window": [-4, 0.5]}}"#),
    );
    let out = tmp.path().join("out");
    let o = run(&[
        "spectrum",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--assert-theorem",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = json(&out.join("spectrum.json"));
    assert_eq!(r["morse_index"], 1);
    assert_eq!(r["stability"]["real_positive"].as_array().unwrap().len(), 0);
}

#[test]
fn theorem_mismatch_exits_2() {
    // a badly truncated grid loses the discrete zero mode
    let tmp = TempDir::new().unwrap();
    let cfg = config(
        tmp.path(),
        "short.json",
        &format!(r#"{{{N4_GRAPH}, "a": 0.7, "h": 0.05, "length": 2, "window": [-4, 0.5]}}"#),
    );
    let out = tmp.path().join("out");
    let o = run(&[
        "spectrum",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--assert-theorem",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("assertion failed"));
    // the report is still written
    assert!(out.join("spectrum.json").exists());
    let o = run(&["spectrum", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn malformed_json_exits_1_with_position() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(
        tmp.path(),
        "bad.json",
        &format!("{{\n  {N4_GRAPH},\n  \"a\": 0.7,,\n}}"),
    );
    let o = run(&["spectrum", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.json:3:"), "{}", stderr(&o));
}

#[test]
fn unknown_field_and_bad_values_exit_1() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(
        tmp.path(),
        "typo.json",
        &format!(r#"{{{N4_GRAPH}, "shfit": 0.7}}"#),
    );
    let o = run(&["shoot", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("shfit"));

    let cfg = config(
        tmp.path(),
        "neg.json",
        &format!(r#"{{{N4_GRAPH}, "h": -0.1}}"#),
    );
    let o = run(&["shoot", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("field `h`"));

    let cfg = config(
        tmp.path(),
        "violated.json",
        r#"{"graph": {"edges": 4, "incoming": 2, "alphas": [1, 1, 1, 2], "p": 1}}"#,
    );
    assert_eq!(run(&["shoot", "--config", &cfg]).status.code(), Some(1));
    assert_eq!(
        run(&["shoot", "--config", "/nonexistent/x.json"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn orbit_run_conserves_and_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(
        tmp.path(),
        "orbit.json",
        &format!(
            r#"{{{Y_GRAPH}, "a": -0.7, "h": 0.05,
                "evolve": {{"kind": "orbit", "tau": 0.01, "t_end": 2, "phase": 0.3}}}}"#
        ),
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let o = run(&[
            "evolve",
            "--config",
            &cfg,
            "--out",
            dir.to_str().unwrap(),
            "--seed",
            "11",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(stdout(&o).starts_with("Q drift"));
    }
    let s = json(&a.join("evolve.json"));
    assert!(s["mass_drift"].as_f64().unwrap() < 1e-8);
    assert_eq!(s["seed"], 11);
    let csv = fs::read(a.join("evolve.csv")).unwrap();
    assert_eq!(csv, fs::read(b.join("evolve.csv")).unwrap());
    assert_eq!(
        fs::read(a.join("evolve.json")).unwrap(),
        fs::read(b.join("evolve.json")).unwrap()
    );
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("# seed=11\n"));
    assert!(text.contains("t,Q,E,P,deviation,rhs_dPdt"));
}

#[test]
fn nonconvergence_exits_3() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(
        tmp.path(),
        "cap.json",
        &format!(
            r#"{{{Y_GRAPH}, "a": -0.7, "h": 0.05,
                "evolve": {{"kind": "orbit", "tau": 0.1, "t_end": 1, "max_iterations": 2}}}}"#
        ),
    );
    let o = run(&[
        "evolve",
        "--config",
        &cfg,
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("diverged"));
}

#[test]
fn transit_prints_transmitted_fraction() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(
        tmp.path(),
        "transit.json",
        &format!(
            r#"{{{Y_GRAPH}, "h": 0.05, "length": 16,
                "evolve": {{"kind": "transit", "tau": 0.01, "c": 2.0, "x_start": -5}}}}"#
        ),
    );
    let out = tmp.path().join("out");
    let o = run(&["evolve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("transmitted_mass_fraction"));
    let r = json(&out.join("transit.json"));
    assert!(r["transmitted_mass_fraction"].as_f64().unwrap() > 0.99);
}

#[test]
fn growth_reports_fitted_and_spectral_rates() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(
        tmp.path(),
        "growth.json",
        &format!(
            r#"{{{N4_GRAPH}, "a": 0.7, "h": 0.05,
                "evolve": {{"kind": "growth", "tau": 0.005, "t_end": 30}}}}"#
        ),
    );
    let out = tmp.path().join("out");
    let o = run(&[
        "evolve",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("relative gap"));
    let r = json(&out.join("growth.json"));
    assert!(r["relative_gap"].as_f64().unwrap() < 0.05, "{r}");
    let csv = fs::read_to_string(out.join("growth.csv")).unwrap();
    assert!(csv.starts_with("# seed=3\n"));
}

#[test]
fn families_counts() {
    let tmp = TempDir::new().unwrap();
    let o = run(&[
        "families",
        "--edges",
        "6",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let r = json(&tmp.path().join("families.json"));
    assert_eq!(r["count_families"], 10);
    assert_eq!(r["admissible_patterns"].as_array().unwrap().len(), 20);
    assert_eq!(run(&["families"]).status.code(), Some(1));
}

#[test]
fn verify_filter_runs_selected_checks() {
    let tmp = TempDir::new().unwrap();
    let o = run(&[
        "verify",
        "--filter",
        "families",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 2);
    assert!(text.contains("A13") && text.contains("A14") && !text.contains("A5 "));
    let r = json(&tmp.path().join("verify.json"));
    assert_eq!(r["failed"], 0);
    assert_eq!(
        run(&["verify", "--filter", "nothing"]).status.code(),
        Some(1)
    );
}
