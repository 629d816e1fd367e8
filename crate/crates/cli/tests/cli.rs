use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use eqanis::sysfn::SystemMatrix;

const TINY: &str = r#"{
  "particle": { "diameter_nm": 19.0 },
  "anisotropy": { "type": "fluid_b3", "K_max": 3500.0, "q": 2.0 },
  "sequence": { "gradient_Tm": [-1.0, -1.0, 2.0], "amplitudes_mT": [12.0, 12.0],
                "f_base_Hz": 2.5e6, "dividers": [102, 96], "sample_rate_Hz": 2.5e6 },
  "grid": { "nx": 3, "ny": 3, "fov_mm": [12.0, 12.0] },
  "phantom": { "kind": "disk", "radius_mm": 3.0 },
  "seed": 3
}"#;

fn eqanis(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eqanis"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn tiny_config(dir: &Path) -> PathBuf {
    let p = dir.join("tiny.json");
    std::fs::write(&p, TINY).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_sm_writes_a_readable_matrix_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("eq.sm");
    let o = eqanis(&[
        "simulate-sm",
        "--config",
        s(&cfg),
        "--model",
        "eqanis",
        "-o",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let sm = SystemMatrix::read_from(std::fs::File::open(&out).unwrap()).unwrap();
    assert_eq!(sm.n_pos, 9);
    assert_eq!(sm.channels.len(), 2);
    assert_eq!(sm.model, "eqanis");
    let manifest = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    assert!(manifest.contains("config_sha256"));
    assert!(manifest.contains("eq.sm"));
}

#[test]
fn compare_sm_of_identical_matrices_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("a.sm");
    let o = eqanis(&[
        "simulate-sm",
        "--config",
        s(&cfg),
        "--model",
        "eq",
        "-o",
        s(&out),
    ]);
    assert!(o.status.success());
    let o = eqanis(&["compare-sm", s(&out), s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let values: Vec<f64> = text
        .lines()
        .filter_map(|l| l.split_whitespace().last()?.parse().ok())
        .collect();
    assert!(!values.is_empty(), "{text}");
    assert!(values.iter().all(|v| *v == 0.0), "{text}");
}

#[test]
fn bench_reports_a_speedup() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let o = eqanis(&[
        "bench",
        "--config",
        s(&cfg),
        "--models",
        "eq,eqanis",
        "--threads",
        "1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("eq: "), "{text}");
    assert!(text.contains("speedup"), "{text}");
}

#[test]
fn usage_and_validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(eqanis(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(eqanis(&["bench", "--no-such-flag"]).status.code(), Some(1));
    let missing = dir.path().join("missing.json");
    let o = eqanis(&["bench", "--config", s(&missing)]);
    assert_eq!(o.status.code(), Some(1));
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, TINY.replace("19.0", "-1.0")).unwrap();
    let o = eqanis(&[
        "simulate-sm",
        "--config",
        s(&bad),
        "--model",
        "eq",
        "-o",
        s(&dir.path().join("x.sm")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
}

#[test]
fn exceeded_oracle_tolerance_exits_with_two() {
    let o = eqanis(&["oracle-check", "--points", "5", "--tol", "0"]);
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let o = eqanis(&["oracle-check", "--points", "5", "--tol", "1e-8"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}
