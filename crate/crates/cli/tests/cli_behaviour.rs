//! Exit-code contract and interface behaviour of the binary.

use std::process::Command;

fn sigprop() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sigprop"))
}

#[test]
fn help_available_at_every_level() {
    for args in [
        vec!["--help"],
        vec!["theory", "--help"],
        vec!["theory", "curve", "--help"],
        vec!["sim", "--help"],
        vec!["sim", "depth", "--help"],
        vec!["diagram", "--help"],
        vec!["effective-beta", "--help"],
    ] {
        let out = sigprop().args(&args).output().unwrap();
        assert!(out.status.success(), "--help failed for {args:?}");
        assert!(!out.stdout.is_empty());
    }
}

#[test]
fn missing_required_flag_is_usage_error() {
    let out = sigprop().args(["theory", "curve", "--rho", "0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = sigprop()
        .args(["theory", "curve", "--beta", "1", "--rho", "0", "--frobnicate"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_heads_is_usage_error() {
    let out = sigprop()
        .args(["effective-beta", "-d", "768", "--heads", "0", "--t", "512"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_config_file_is_usage_error() {
    let dir = std::env::temp_dir().join("sigprop_cli_test_cfg");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.toml");
    std::fs::write(&path, "[block]\nsigma_w2 = -2.0\n").unwrap();
    let out = sigprop()
        .args(["--config", path.to_str().unwrap(), "theory", "depth"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sigma_w2"), "stderr: {err}");
}

#[test]
fn assert_max_dev_violation_exits_one() {
    let out = sigprop()
        .args([
            "sim", "depth", "-d", "32", "--t", "48", "--seeds", "1", "--layers", "2",
            "--seed", "3", "--assert-max-dev", "0.0",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("assertion failed"));
}

#[test]
fn assert_max_dev_pass_exits_zero() {
    let out = sigprop()
        .args([
            "sim", "depth", "-d", "64", "--t", "64", "--seeds", "2", "--layers", "2",
            "--seed", "3", "--assert-max-dev", "0.2",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn effective_beta_reproduces_reference_values() {
    let out = sigprop()
        .args(["effective-beta", "-d", "768", "--heads", "12", "--t", "512", "--log-base", "ten"])
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    let value: f64 = text
        .lines()
        .last()
        .unwrap()
        .parse()
        .expect("scalar output");
    assert!((value - 0.016).abs() < 1e-3, "got {value}");

    let out = sigprop()
        .args(["effective-beta", "-d", "768", "--heads", "12", "--t", "512"])
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    let value: f64 = text.lines().last().unwrap().parse().unwrap();
    assert!((value - 0.01025).abs() < 1e-4, "got {value}");
}

#[test]
fn theory_curve_reference_row() {
    let out = sigprop()
        .args(["theory", "curve", "--beta", "2", "--rho", "0"])
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    let data = text.lines().last().unwrap();
    let fields: Vec<f64> = data.split(',').map(|f| f.parse().unwrap()).collect();
    // rho, beta_c, y_q, sa_rho
    assert_eq!(fields[0], 0.0);
    assert!((fields[1] - std::f64::consts::SQRT_2).abs() < 1e-9);
    assert!((fields[2] - (1.0 - std::f64::consts::SQRT_2 / 2.0)).abs() < 1e-9);
}

#[test]
fn json_format_mirrors_csv_content() {
    let out = sigprop()
        .args(["theory", "curve", "--beta", "2", "--rho", "0.5", "--format", "json"])
        .output()
        .unwrap();
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(doc["metadata"]["command"].is_string());
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert!((rows[0]["rho"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((rows[0]["beta_c"].as_f64().unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn output_flag_writes_file() {
    let dir = std::env::temp_dir().join("sigprop_cli_test_out");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("curve.csv");
    let out = sigprop()
        .args([
            "theory", "curve", "--beta", "1", "--rho-range", "0:0.8:5",
            "--output", path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    // header + 5 rows + metadata comments
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 6);
}

#[test]
fn theory_depth_fig_config_is_monotone() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let path = root.join("fig1d.toml");
    let out = sigprop()
        .args(["--config", path.to_str().unwrap(), "theory", "depth"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rhos: Vec<f64> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("layer"))
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(rhos.len(), 61);
    for w in rhos.windows(2) {
        assert!(w[1] + 1e-12 >= w[0], "similarity decreased: {} -> {}", w[0], w[1]);
    }
    assert!(rhos[60] >= 0.99, "alpha_sa = 1 should collapse by layer 60");
}

#[test]
fn checked_in_config_examples_parse_and_run() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["fig1d.toml", "fig4_tanh.toml"] {
        let path = root.join(name);
        let out = sigprop()
            .args(["--config", path.to_str().unwrap(), "theory", "depth", "--layers", "4"])
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{name}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}
