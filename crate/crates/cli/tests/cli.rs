use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn polyode(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polyode"))
        .current_dir(dir)
        .env_remove("POLYODE_SEED")
        .args(args)
        .output()
        .expect("spawn polyode")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn generate_defaults() {
    let dir = tempfile::tempdir().unwrap();
    ok(&polyode(dir.path(), &["generate", "lotka_volterra"]));
    let csv = fs::read_to_string(dir.path().join("lotka_volterra.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,x,y"));
    assert_eq!(lines.count(), 200);
    assert!(dir.path().join("lotka_volterra.spec.json").exists());

    ok(&polyode(dir.path(), &["generate", "quartic", "-o", "q.csv"]));
    let csv = fs::read_to_string(dir.path().join("q.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x,f"));
    assert_eq!(csv.lines().count(), 21);
}

#[test]
fn generate_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    ok(&polyode(dir.path(), &["generate", "van_der_pol", "-o", "a.csv"]));
    ok(&polyode(dir.path(), &["generate", "van_der_pol", "-o", "b.csv"]));
    assert_eq!(
        fs::read(dir.path().join("a.csv")).unwrap(),
        fs::read(dir.path().join("b.csv")).unwrap()
    );
}

#[test]
fn train_then_extract() {
    let dir = tempfile::tempdir().unwrap();
    ok(&polyode(dir.path(), &["generate", "lv", "-o", "lv.csv"]));
    let train = [
        "train", "lv.csv", "--degree", "2", "--epochs", "40", "--seed", "3", "-o", "m.json",
    ];
    ok(&polyode(dir.path(), &train));
    for f in ["m.json", "m.loss.csv", "m.manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("m.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["dataset_sha256"].as_str().unwrap().len(), 64);

    let first = fs::read(dir.path().join("m.json")).unwrap();
    ok(&polyode(dir.path(), &train));
    assert_eq!(first, fs::read(dir.path().join("m.json")).unwrap());

    let out = ok(&polyode(
        dir.path(),
        &["extract", "m.json", "--truth", "lotka_volterra", "--report", "r.json"],
    ));
    assert!(out.contains("dx/dt ="), "{out}");
    assert!(dir.path().join("m.poly.json").exists());
    let rep: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert!(rep.is_object());
}

#[test]
fn extract_rejects_mlp() {
    let dir = tempfile::tempdir().unwrap();
    ok(&polyode(dir.path(), &["generate", "lv", "--points", "20", "-o", "lv.csv"]));
    ok(&polyode(
        dir.path(),
        &["train", "lv.csv", "--arch", "mlp", "--widths", "2x8x2", "--epochs", "3", "-o", "mlp.json"],
    ));
    let out = polyode(dir.path(), &["extract", "mlp.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not symbolically expandable"));
}

#[test]
fn bad_arguments_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["generate", "no_such_system"][..],
        &["train", "missing.csv", "--bogus"],
        &["field", "lotka_volterra", "--x-range", "1:0", "--y-range", "0:1"],
        &["frobnicate"],
    ] {
        let out = polyode(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn predict_zero_span_echoes_initial_state() {
    let dir = tempfile::tempdir().unwrap();
    ok(&polyode(dir.path(), &["generate", "lv", "--points", "20", "-o", "lv.csv"]));
    ok(&polyode(dir.path(), &["train", "lv.csv", "--degree", "2", "--epochs", "2", "-o", "m.json"]));
    ok(&polyode(
        dir.path(),
        &["predict", "m.json", "--y0", "1.25,-0.5", "--t-end", "0", "-o", "p.csv"],
    ));
    let csv = fs::read_to_string(dir.path().join("p.csv")).unwrap();
    assert_eq!(csv, "t,x,y\n0.0,1.25,-0.5\n");

    ok(&polyode(
        dir.path(),
        &["predict", "m.json", "--y0", "1,1", "--t-end", "2", "--points", "5", "-o", "q.csv", "--plot", "q.svg"],
    ));
    assert_eq!(fs::read_to_string(dir.path().join("q.csv")).unwrap().lines().count(), 6);
    assert!(fs::read_to_string(dir.path().join("q.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn field_of_a_system() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&polyode(
        dir.path(),
        &["field", "lv", "--x-range", "0:2", "--y-range", "0:2", "--n", "4", "--truth", "lv"],
    ));
    assert!(out.contains("RMS error vs lv: 0e0"), "{out}");
    let csv = fs::read_to_string(dir.path().join("field.csv")).unwrap();
    assert_eq!(csv.lines().count(), 17);
}

#[test]
fn bench_only_filters_systems() {
    let dir = tempfile::tempdir().unwrap();
    ok(&polyode(
        dir.path(),
        &["bench", "--only", "quartic", "--epochs", "5", "--no-mlp", "--restarts", "1", "--out-dir", "b"],
    ));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("b/report.json")).unwrap()).unwrap();
    let exps = report["experiments"].as_array().unwrap();
    assert_eq!(exps.len(), 1);
    assert_eq!(exps[0]["system"], "quartic_static");
    assert!(dir.path().join("b/report.md").exists());
}
