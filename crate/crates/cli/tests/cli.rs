use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn chaosbath(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_chaosbath"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("CHAOSBATH_THREADS", t),
        None => cmd.env_remove("CHAOSBATH_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn dir_arg(dir: &Path) -> String {
    format!("--output.dir={}", dir.display())
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Numeric rows of a CSV written by the tool.
fn read_table(path: PathBuf) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with(|c: char| c.is_ascii_alphabetic()))
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect()
}

fn sorted_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

const SMALL: [&str; 2] = ["--ensemble.n_traj=150", "--integrator.t_max=60"];

#[test]
fn missing_output_dir_exits_2_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("absent");
    let out = chaosbath(&["correlations", &dir_arg(&missing), SMALL[0], SMALL[1]], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(!missing.exists());
    assert!(fs::read_dir(tmp.path()).unwrap().next().is_none());
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not exist"));
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let d = dir_arg(tmp.path());
    assert_eq!(chaosbath(&["roots", &d, "--model.bogus=1"], None).status.code(), Some(2));
    assert_eq!(chaosbath(&["roots", &d, "--model.omega0=-1"], None).status.code(), Some(2));
    assert_eq!(chaosbath(&["roots", &d], Some("0")).status.code(), Some(2));
    assert_eq!(chaosbath(&["roots", &d, "--config=/nonexistent/c.json"], None).status.code(), Some(2));
    assert!(fs::read_dir(tmp.path()).unwrap().next().is_none());
}

#[test]
fn config_file_and_overrides_combine() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    fs::write(&cfg, r#"{"quantum": {"points": 11}, "output": {"svg": false}}"#).unwrap();
    let out = chaosbath(
        &["decoherence", "--config", cfg.to_str().unwrap(), &dir_arg(tmp.path()), "--quantum.decoherence_gamma=20"],
        None,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_table(tmp.path().join("fig4.csv"));
    assert_eq!(rows.len(), 11);
    assert!(fs::read_to_string(tmp.path().join("fig4.csv")).unwrap().contains("Gamma=20"));
    assert!(!tmp.path().join("fig4.svg").exists());
}

#[test]
fn single_trajectory_runs_with_infinite_stderr() {
    let tmp = tempfile::tempdir().unwrap();
    let out = chaosbath(&["correlations", &dir_arg(tmp.path()), "--ensemble.n_traj=1"], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_table(tmp.path().join("corr_xx.csv"));
    assert!(rows.len() > 100);
    assert!(rows.iter().all(|r| r[2].is_infinite()));
    assert!(tmp.path().join("fit.json").exists());
}

#[test]
fn outputs_are_byte_identical_across_runs_and_worker_counts() {
    let runs: Vec<_> = [Some("1"), Some("3"), None]
        .into_iter()
        .map(|threads| {
            let tmp = tempfile::tempdir().unwrap();
            let out = chaosbath(&["correlations", &dir_arg(tmp.path()), SMALL[0], SMALL[1]], threads);
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
            tmp
        })
        .collect();
    let reference = sorted_files(runs[0].path());
    assert!(reference.len() >= 3);
    for other in &runs[1..] {
        let files = sorted_files(other.path());
        assert_eq!(files.len(), reference.len());
        for (a, b) in reference.iter().zip(&files) {
            assert_eq!(a.file_name(), b.file_name());
            assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap(), "{:?} differs", a.file_name());
        }
    }
}

#[test]
fn every_file_carries_the_header() {
    let tmp = tempfile::tempdir().unwrap();
    let d = dir_arg(tmp.path());
    for cmd in ["gaussian", "decoherence", "roots"] {
        let out = chaosbath(&[cmd, &d, "--quantum.points=21"], None);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let version = env!("CARGO_PKG_VERSION");
    let files = sorted_files(tmp.path());
    assert!(files.len() >= 9);
    for f in files {
        let text = fs::read_to_string(&f).unwrap();
        assert!(text.contains(&format!("chaosbath {version} config=")), "{f:?}");
        if f.extension().is_some_and(|e| e == "csv") {
            assert!(text.starts_with("# chaosbath "), "{f:?}");
        }
    }
}

#[test]
fn width_and_decoherence_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let d = dir_arg(tmp.path());
    assert!(chaosbath(&["gaussian", &d], None).status.success());
    assert!(chaosbath(&["decoherence", &d], None).status.success());
    for g in ["0.5", "1", "2"] {
        assert!(tmp.path().join(format!("fig3_gamma{g}.csv")).exists());
    }
    let flat = read_table(tmp.path().join("fig3_gamma1.csv"));
    assert_eq!(flat[0][2], 1.0);
    assert!(flat.iter().all(|r| (r[2] - 1.0).abs() < 0.05));
    let fig4 = read_table(tmp.path().join("fig4.csv"));
    assert_eq!((fig4[0][2], fig4[0][3]), (0.0, 0.0));
    assert!(fig4.windows(2).all(|w| w[1][2] >= w[0][2]));
    let cat = read_table(tmp.path().join("cat_density.csv"));
    assert!(cat.iter().all(|r| (r[1] + r[2] + r[3] - r[4]).abs() < 1e-12 * r[4].abs().max(1.0)));
}

#[test]
fn roots_file_matches_reference_values() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(chaosbath(&["roots", &dir_arg(tmp.path())], None).status.success());
    let v = read_json(tmp.path().join("roots.json"));
    let roots = v["reference_centre"]["roots"]["roots"].as_array().unwrap();
    let pair = |i: usize| (roots[i][0].as_f64().unwrap(), roots[i][1].as_f64().unwrap());
    let (re, im) = pair(1);
    assert!((re + 1.0).abs() < 0.01 && (im - 5.0).abs() < 0.01);
    let (re, im) = pair(3);
    assert!(re < 0.0 && (re / -4e-5) > 0.5 && (re / -4e-5) < 2.0);
    assert!((im - 0.12).abs() < 0.005);
    assert!(v["fitted_centre"].is_object());
}

#[test]
fn energy_flow_columns_and_slope_signs() {
    let fit_dir = tempfile::tempdir().unwrap();
    let out = chaosbath(&["correlations", &dir_arg(fit_dir.path()), "--ensemble.n_traj=400"], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fit_file = format!("--fit_file={}", fit_dir.path().join("fit.json").display());

    let tmp = tempfile::tempdir().unwrap();
    let out = chaosbath(
        &["energy-flow", &dir_arg(tmp.path()), &fit_file, "--ensemble.n_traj=8", "--integrator.t_max=100"],
        None,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = read_json(tmp.path().join("energy_flow.json"));
    let slope = |i: usize| summary["runs"][i]["predicted_slope"].as_f64().unwrap();
    assert!(slope(0) < 0.0);
    assert!(slope(1).abs() < 0.1 * slope(0).abs());
    assert!(slope(2) > 0.0);
    assert!(summary["runs"][0]["measured_slope"].is_null());
    for (ratio, i) in [("1", 0), ("0.25", 1), ("0.1", 2)] {
        let rows = read_table(tmp.path().join(format!("energy_{ratio}.csv")));
        assert_eq!(rows.len(), 101);
        let e0 = rows[0][5];
        assert!((rows[0][1] - e0).abs() < 1e-12);
        let t = rows[100][0];
        assert!((rows[100][5] - (e0 + slope(i) * t)).abs() < 1e-12);
    }
}

#[test]
fn decoupled_energy_flow_is_flat() {
    let tmp = tempfile::tempdir().unwrap();
    let out = chaosbath(
        &[
            "energy-flow",
            &dir_arg(tmp.path()),
            "--model.gamma=0",
            "--ensemble.n_traj=300",
            "--integrator.t_max=200",
            "--energy_flow.ratios=[1.0]",
        ],
        None,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_table(tmp.path().join("energy_1.csv"));
    let e0 = 0.38;
    for r in &rows {
        assert!((r[1] - e0).abs() < 1e-12, "{r:?}");
        assert!((r[3] - e0).abs() < 1e-12, "{r:?}");
        assert_eq!(r[5], e0);
    }
}
