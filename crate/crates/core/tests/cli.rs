use std::path::Path;
use std::process::Command;

use kinsplit::harness::io::{list_csv, RunManifest};

fn kinsplit(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_kinsplit")).args(args).output().unwrap()
}

fn out_arg(dir: &Path) -> String {
    dir.to_string_lossy().into_owned()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let idx = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

#[test]
fn validate_builtin_exits_zero_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = kinsplit(&["validate", "--problem", "burgers-noise", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("validation.json")).unwrap()).unwrap();
    let checks = report["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    assert!(checks.iter().all(|c| c["passed"] == true));
}

#[test]
fn pure_noise_run_has_uniform_partition() {
    let dir = tempfile::tempdir().unwrap();
    let o = kinsplit(&[
        "run", "--problem", "pure-sde", "--epsilon", "0.1", "--samples", "8", "--grid", "16", "--out",
        &out_arg(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = RunManifest::load(&dir.path().join("manifest.json")).unwrap();
    let times = &m.partitions[0].times;
    assert_eq!(times.len(), 11);
    for (k, t) in times.iter().enumerate() {
        assert!((t - 0.1 * k as f64).abs() <= 1e-14, "{t} at {k}");
    }
    assert!(dir.path().join("fields/v_mean_t000.csv").exists());
    assert!(dir.path().join("fields/v_mean_t000.json").exists());
}

#[test]
fn cauchy_distances_are_positive_and_decreasing() {
    let dir = tempfile::tempdir().unwrap();
    let o = kinsplit(&[
        "cauchy", "--problem", "degenerate-transport", "--ladder", "0.2,0.1,0.05", "--samples", "24",
        "--grid", "32", "--out", &out_arg(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let d = column(&std::fs::read_to_string(dir.path().join("tables/cauchy.csv")).unwrap(), "sup_distance");
    assert_eq!(d.len(), 2);
    assert!(d[0] > d[1] && d[1] > 0.0, "{d:?}");
}

#[test]
fn manifest_rerun_is_bitwise_identical_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let o = kinsplit(&[
        "cauchy", "--problem", "burgers-noise", "--ladder", "0.2,0.1", "--samples", "10", "--grid", "32",
        "--threads", "1", "--out", &out_arg(a.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = a.path().join("manifest.json");
    let o = kinsplit(&["--manifest", &out_arg(&manifest), "--threads", "3", "--out", &out_arg(b.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let files = list_csv(a.path()).unwrap();
    assert_eq!(files, list_csv(b.path()).unwrap());
    assert!(!files.is_empty());
    for f in files {
        assert_eq!(std::fs::read(a.path().join(&f)).unwrap(), std::fs::read(b.path().join(&f)).unwrap(), "{f:?}");
    }
}

#[test]
fn doubling_and_contraction_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = kinsplit(&[
        "doubling", "--problem", "degenerate-transport", "--ladder", "0.1,0.05", "--samples", "8", "--grid",
        "32", "--eta", "0.2,0.1", "--time", "0.25", "--out", &out_arg(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("tables/doubling.csv")).unwrap();
    assert!(column(&csv, "product_value").iter().all(|v| *v >= -1e-10));
    assert!(column(&csv, "time").iter().all(|t| (t - 0.25).abs() < 1e-12));

    let dir = tempfile::tempdir().unwrap();
    let o = kinsplit(&[
        "contraction", "--problem", "degenerate-transport", "--ladder", "0.1", "--samples", "8", "--grid", "32",
        "--out", &out_arg(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("tables/contraction.csv").exists());
}

#[test]
fn bad_input_exits_two_with_context() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[problem]\nbase = \"heat\"\n[split]\nepsilom = 0.1\n").unwrap();
    let o = kinsplit(&["run", "--config", &out_arg(&cfg), "--out", &out_arg(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("epsilom") && err.contains("line 4"), "{err}");

    let o = kinsplit(&["run", "--problem", "nonesuch"]);
    assert_eq!(o.status.code(), Some(2));
    let o = kinsplit(&["cauchy", "--problem", "heat", "--ladder", "0.1,0.2", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}
