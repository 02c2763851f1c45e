use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn tfhj(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tfhj"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

#[test]
fn exit_code_contract() {
    let dir = tempfile::tempdir().unwrap();
    let pass = tfhj(&["cell", "--config", fixture("pass.json").to_str().unwrap()], dir.path());
    assert_eq!(pass.status.code(), Some(0), "{}", String::from_utf8_lossy(&pass.stderr));

    let fail = tfhj(&["cell", "--config", fixture("fail.json").to_str().unwrap()], dir.path());
    assert_eq!(fail.status.code(), Some(2), "{}", String::from_utf8_lossy(&fail.stdout));

    let err = tfhj(&["solve", "--config", fixture("error.json").to_str().unwrap()], dir.path());
    assert_eq!(err.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&err.stderr);
    assert!(msg.contains("alpha") && msg.contains("classical"), "{msg}");
}

#[test]
fn eikonal_cell_table_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let out = tfhj(&["cell", "--set", "hamiltonian.kind=eikonal"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("hbar.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("p,hbar,fit_slope"));
    let mut rows = 0;
    for line in lines {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert!((cols[1] - cols[0].abs()).abs() <= 1e-6, "{line}");
        rows += 1;
    }
    assert_eq!(rows, 33);
}

#[test]
fn lemmas_subcommand_reports_hold() {
    let dir = tempfile::tempdir().unwrap();
    let out = tfhj(&["lemmas"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    for name in ["lemma36_report.json", "lemma51_report.json"] {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        let json: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(json["all_hold"], serde_json::Value::Bool(true), "{name}");
    }
}

#[test]
fn caputo_check_is_seeded() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = tfhj(&["caputo-check", "--set", "seed=7"], dir.path());
        assert_eq!(out.status.code(), Some(0));
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("caputo_check.json")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn solve_writes_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let out = tfhj(
        &["solve", "--set", "n_cells=64", "--set", "n_steps=100", "--set", "snapshots=[0, 1]"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("solution.csv")).unwrap();
    assert!(csv.starts_with("t,x,u\n"));
    assert_eq!(csv.lines().count(), 1 + 2 * 64);
    assert!(dir.path().join("solve_summary.json").exists());
}

#[test]
fn bad_input_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["solve", "--set", "alhpa=0.5"][..],
        &["homogenize", "--set", "eps_ladder=[0.25, 0.3, 0.0625]"][..],
        &["solve", "--config", "/nonexistent/config.json"][..],
        &["solve", "--set", "novalue"][..],
    ] {
        let out = tfhj(args, dir.path());
        assert_eq!(out.status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn small_sweep_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = tfhj(
        &[
            "homogenize",
            "--set",
            "n_cells=256",
            "--set",
            "n_steps=100",
            "--set",
            "eps_ladder=[0.25, 0.125, 0.0625]",
        ],
        dir.path(),
    );
    assert!(matches!(out.status.code(), Some(0) | Some(2)));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("rate_report.json")).unwrap()).unwrap();
    for key in ["eps", "error", "fitted_order", "nu", "theorem_exponent", "pass"] {
        assert!(json.get(key).is_some(), "{key}");
    }
    let csv = std::fs::read_to_string(dir.path().join("errors.csv")).unwrap();
    assert!(csv.starts_with("eps,error\n"));
    let svg = std::fs::read_to_string(dir.path().join("rate_plot.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<polyline"));
}
