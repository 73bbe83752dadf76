//! End-to-end CLI checks: exit codes, artifacts, determinism.

use std::path::Path;
use std::process::Command;

fn neckflow() -> Command {
    Command::new(env!("CARGO_BIN_EXE_neckflow"))
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn fields_check_default_passes() {
    let dir = tempdir("fields_ok");
    let out = neckflow()
        .args(["fields", "check", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(dir.join("fields_check.json")).unwrap();
    assert!(report.contains("\"pass\": true"));
}

#[test]
fn fields_check_detects_tampered_kappa() {
    let dir = tempdir("fields_tamper");
    let cfg = dir.join("config.json");
    write(
        &cfg,
        r#"{"geometry": {"epsilon": 0.01, "profile": "quadratic", "kappa2": 1.0},
            "fields": {"kappa2_override": 1.6}, "samples": 3000}"#,
    );
    let out = neckflow()
        .args(["fields", "check", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("divergence"), "stderr: {stderr}");
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempdir("bad_json");
    let cfg = dir.join("config.json");
    write(&cfg, "{this is not json");
    let out = neckflow()
        .args(["fields", "check", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn short_eps_list_sweep_exits_2() {
    let dir = tempdir("short_sweep");
    let cfg = dir.join("config.json");
    write(&cfg, r#"{"eps_list": [0.08, 0.04]}"#);
    let out = neckflow()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn incompatible_datum_refused_with_warning() {
    let dir = tempdir("bad_phi");
    let cfg = dir.join("config.json");
    write(&cfg, r#"{"phi": {"linear": [[0.0, 0.0], [0.0, 1.0]]}}"#);
    let out = neckflow()
        .args(["solve", "--epsilon", "0.04", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("nonzero boundary flux"), "stderr: {stderr}");
}

#[test]
fn solve_rotation_gives_equal_rotation_amplitudes() {
    let dir = tempdir("solve_rot");
    let cfg = dir.join("config.json");
    write(&cfg, r#"{"phi": "rotation", "geometry": {"epsilon": 0.04}}"#);
    let out = neckflow()
        .args(["solve", "--epsilon", "0.04", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("interaction.json")).unwrap())
            .unwrap();
    let c = report["c"].as_array().unwrap();
    let c13 = c[2].as_f64().unwrap();
    let c23 = c[5].as_f64().unwrap();
    assert!((c13 - c23).abs() < 1e-8, "C1^3 = {c13}, C2^3 = {c23}");
    assert!((c13 - 1.0).abs() < 1e-6);
    // artifacts exist
    assert!(dir.join("mesh.txt").exists());
    assert!(dir.join("samples.csv").exists());
}

#[test]
fn quick_sweep_is_byte_deterministic() {
    let d1 = tempdir("sweep_a");
    let d2 = tempdir("sweep_b");
    let cfg = d1.join("config.json");
    write(
        &cfg,
        r#"{"eps_list": [0.08, 0.04, 0.02], "phi": "shear",
            "tolerances": [{"id": "pressure_rate", "bounds": [-2.0, 2.0]},
                           {"id": "a11_11_scaling", "bounds": [1.0, 9.0]},
                           {"id": "a11_33_scaling", "bounds": [1.0, 9.0]},
                           {"id": "grad_rate", "bounds": [-2.0, 2.0]},
                           {"id": "grad_rate_r2", "bounds": [0.5, 1.0]}]}"#,
    );
    for dir in [&d1, &d2] {
        let out = neckflow()
            .args(["sweep", "--quick", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(dir)
            .output()
            .unwrap();
        assert!(
            out.status.code() == Some(0),
            "sweep exit {:?}, stderr: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let a = std::fs::read(d1.join("sweep.csv")).unwrap();
    let b = std::fs::read(d2.join("sweep.csv")).unwrap();
    assert_eq!(a, b, "sweep.csv bytes differ between identical runs");
    let report = neckflow().arg("report").arg(&d1).output().unwrap();
    assert!(report.status.success());
}

fn tempdir(tag: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("neckflow-test-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
