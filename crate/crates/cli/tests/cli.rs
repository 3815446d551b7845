use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

use nwp_core::lattice::{load_state, StoredState};

fn nwp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nwp")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn ring(dir: &TempDir, name: &str, extra: &[&str]) -> std::path::PathBuf {
    let path = dir.path().join(name);
    let mut args = vec!["make-state", "--out", p(&path)];
    args.extend_from_slice(extra);
    let o = nwp(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    path
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&nwp(&["--help"])), 0);
    assert_eq!(code(&nwp(&["--version"])), 0);
    assert_eq!(code(&nwp(&["verify-all", "--help"])), 0);
}

#[test]
fn bad_subcommand_is_a_usage_error() {
    let o = nwp(&["frobnicate"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(stdout_json(&o)["error"]["code"], "usage");
    assert_eq!(code(&nwp(&[])), 1);
}

#[test]
fn unknown_profile_is_a_config_error() {
    let o = nwp(&["verify-kernels", "--tol-profile", "nope"]);
    assert_eq!(code(&o), 1);
    assert_eq!(stdout_json(&o)["error"]["code"], "config");
}

#[test]
fn malformed_config_file_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"grid": 16, "bogus": 1}"#).unwrap();
    let o = nwp(&["verify-kernels", "--config", p(&cfg)]);
    assert_eq!(code(&o), 1);
    assert_eq!(stdout_json(&o)["error"]["code"], "config");
}

#[test]
fn kernel_suite_passes_and_carries_the_table() {
    let o = nwp(&["verify-kernels"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = stdout_json(&o);
    assert_eq!(r["schema"], "nwp-report/1");
    assert_eq!(r["suite"], "kernels");
    let table = r["kernel_table"].as_array().unwrap();
    assert_eq!(table.len(), 6);
    for row in table {
        assert!(row["relative_error"].as_f64().unwrap() < 1e-4);
        assert_eq!(row["eps_ladder"].as_array().unwrap().len(), 5);
    }
}

#[test]
fn reports_are_deterministic_up_to_the_timestamp() {
    let run = || {
        let mut v = stdout_json(&nwp(&["verify-kernels", "--seed", "3"]));
        v["timestamp"] = Value::Null;
        serde_json::to_string(&v).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn csv_format_and_out_file() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("k.csv");
    let o = nwp(&["verify-kernels", "--format", "csv", "--out", p(&out)]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "check,residual,tolerance,pass,coarse_residual,slope,error,note");
    assert!(lines.count() >= 10);
}

#[test]
fn under_resolved_algebra_exits_two() {
    let o = nwp(&["verify-algebra", "--grid", "8"]);
    assert_eq!(code(&o), 2);
    let r = stdout_json(&o);
    assert!(r["rows"].as_array().unwrap().iter().any(|row| row["pass"] == false));
}

#[test]
fn transform_reports_norm_energy_and_momentum() {
    let dir = TempDir::new().unwrap();
    let a = ring(&dir, "a.nwp", &["--grid", "64", "--box", "20", "--along", "0.6,0,0.8"]);
    let b = dir.path().join("b.nwp");
    let o = nwp(&["transform", "--state", p(&a), "--element", r#"{"y": [0.5, 0.1, 0, 0], "R": "quarter-z", "alpha": 0.2}"#, "--out", p(&b)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = stdout_json(&o);
    assert!(r["relative_norm_change"].as_f64().unwrap() < 1e-12);
    let e_in = r["input"]["energy"].as_f64().unwrap();
    let e_out = r["output"]["energy"].as_f64().unwrap();
    assert!((e_out / e_in - (-0.2f64).exp()).abs() < 1e-6);
    let m_in: Vec<f64> = r["input"]["momentum"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let m_out: Vec<f64> = r["output"]["momentum"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let s = (-0.2f64).exp();
    let expected = [-m_in[1] * s, m_in[0] * s, m_in[2] * s];
    for (x, y) in m_out.iter().zip(expected) {
        assert!((x - y).abs() < 1e-6, "{m_out:?} vs {expected:?}");
    }
    match load_state(&b).unwrap() {
        StoredState::Momentum(s) => assert_eq!(s.grid.points, 64),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn transform_then_inverse_restores_the_state() {
    let dir = TempDir::new().unwrap();
    let a = ring(&dir, "a.nwp", &[]);
    let b = dir.path().join("b.nwp");
    let c = dir.path().join("c.nwp");
    let el = dir.path().join("el.json");
    std::fs::write(&el, r#"{"y": [0.7, 0.375, 0, -0.75], "R": {"axis": "x", "angle": 1.5707963267948966}}"#).unwrap();
    assert_eq!(code(&nwp(&["transform", "--state", p(&a), "--element", p(&el), "--out", p(&b), "--report", p(&dir.path().join("r.json"))])), 0);
    // Undo the translation first, then the rotation.
    let mid = dir.path().join("mid.nwp");
    let o = nwp(&["transform", "--state", p(&b), "--element", r#"{"y": [-0.7, -0.375, 0, 0.75]}"#, "--out", p(&mid)]);
    assert_eq!(code(&o), 0);
    let o = nwp(&["transform", "--state", p(&mid), "--element", r#"{"R": [[1,0,0],[0,0,1],[0,-1,0]]}"#, "--out", p(&c)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (StoredState::Momentum(x), StoredState::Momentum(y)) = (load_state(&a).unwrap(), load_state(&c).unwrap()) else { panic!("momentum states expected") };
    let diff: f64 = x.data.iter().zip(&y.data).map(|(u, v)| (u - v).norm_sqr()).sum::<f64>().sqrt();
    let nrm: f64 = x.data.iter().map(|u| u.norm_sqr()).sum::<f64>().sqrt();
    assert!(diff / nrm < 1e-12, "{}", diff / nrm);
}

#[test]
fn transform_rejects_improper_rotation() {
    let dir = TempDir::new().unwrap();
    let a = ring(&dir, "a.nwp", &[]);
    let o = nwp(&["transform", "--state", p(&a), "--element", r#"{"R": [[-1,0,0],[0,1,0],[0,0,1]]}"#, "--out", p(&dir.path().join("b.nwp"))]);
    assert_eq!(code(&o), 1);
    assert_eq!(stdout_json(&o)["error"]["code"], "argument");
}

#[test]
fn amplitude_csv_and_density() {
    let dir = TempDir::new().unwrap();
    let a = ring(&dir, "a.nwp", &[]);
    let pts = dir.path().join("p.json");
    std::fs::write(&pts, r#"[[0, 0, 0], {"t": 0.5, "x": [0.3, 0, 0]}, {"x": [0, -1, 0.5]}]"#).unwrap();
    let dens = dir.path().join("d.nwp");
    let o = nwp(&["amplitude", "--state", p(&a), "--points", p(&pts), "--time", "0.25", "--density", p(&dens)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "point,re,im,abs2");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("0.25 0 0 0,"));
    assert!(lines[2].starts_with("0.5 0.3 0 0,"));
    for l in &lines[1..] {
        let f: Vec<f64> = l.split(',').skip(1).map(|v| v.parse().unwrap()).collect();
        assert!((f[0] * f[0] + f[1] * f[1] - f[2]).abs() < 1e-12 * f[2].max(1.0));
    }
    let StoredState::Coordinate(d) = load_state(&dens).unwrap() else { panic!("coordinate container expected") };
    let total: f64 = d.data.iter().map(|v| v.re).sum::<f64>() * d.grid.dx().powi(3);
    assert!((total - 1.0).abs() < 1e-10, "{total}");
}

#[test]
fn amplitude_from_fock_manifest() {
    let dir = TempDir::new().unwrap();
    ring(&dir, "a.nwp", &["--along", "1,0,0"]);
    ring(&dir, "b.nwp", &["--along", "0,1,0"]);
    let manifest = dir.path().join("m.json");
    std::fs::write(&manifest, r#"{"k": 2, "terms": [{"weight": [1, 0], "factors": ["a.nwp", "b.nwp"]}]}"#).unwrap();
    let pts = dir.path().join("p.json");
    std::fs::write(&pts, r#"[[[0.2, 0, 0], [0, 0.4, 0]], [[0, 0.4, 0], [0.2, 0, 0]]]"#).unwrap();
    let o = nwp(&["amplitude", "--fock", p(&manifest), "--points", p(&pts)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][1..], rows[1][1..], "amplitude must be symmetric under point exchange");

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"[[0.2, 0, 0]]"#).unwrap();
    let o = nwp(&["amplitude", "--fock", p(&manifest), "--points", p(&bad)]);
    assert_eq!(code(&o), 1);
    assert_eq!(stdout_json(&o)["error"]["code"], "shape");
}

#[test]
fn amplitude_rejects_points_outside_the_box() {
    let dir = TempDir::new().unwrap();
    let a = ring(&dir, "a.nwp", &[]);
    let pts = dir.path().join("p.json");
    std::fs::write(&pts, r#"[[100, 0, 0]]"#).unwrap();
    let o = nwp(&["amplitude", "--state", p(&a), "--points", p(&pts)]);
    assert_eq!(code(&o), 1);
    assert_eq!(stdout_json(&o)["error"]["code"], "domain");
}
