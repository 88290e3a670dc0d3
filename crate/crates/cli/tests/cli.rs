//! End-to-end tests of the flocksim binary: flags, exit codes, CSV output,
//! and summary/CSV consistency.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_flocksim"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn temp_path(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("flocksim-test-{}-{name}", std::process::id()));
    p
}

/// Small quadratic config used by the file-based tests.
fn small_config_toml() -> String {
    r#"
mode = "flocking"
engine = "event"
gamma_tilde = 0.02
gamma = 0.02
horizon = 1.0
record_interval = 0.02
replicates = 3
seed = 5

[objective.quadratic]
m = 2
kappa = 1.0

[potential]
a = 1.0
repulsion = "none"

[topology]
n = 10
kind = "complete"

[timing]
kind = "constant"
mean = 0.02

[noise]
sigma = 21.213203435596427

[init]
lo = [10.0, 10.0]
hi = [15.0, 15.0]
"#
    .to_string()
}

#[test]
fn bounds_flag_prints_phi_star() {
    let out = run(&["--preset", "quad-bounds", "--bounds"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let phi_line = text
        .lines()
        .find(|l| l.starts_with("bound.phi_star"))
        .expect("phi_star line present");
    let value: f64 = phi_line.split('=').nth(1).unwrap().trim().parse().unwrap();
    assert!((value - 0.45).abs() < 1e-12, "phi* = {value}");
    assert!(text.contains("bound.psi2_star"));
}

#[test]
fn unknown_preset_exits_2() {
    let out = run(&["--preset", "never-heard-of-it"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unknown preset"));
}

#[test]
fn missing_selection_exits_2() {
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--preset"));
}

#[test]
fn invalid_config_reports_all_errors_and_exits_2() {
    let path = temp_path("bad.toml");
    let text = small_config_toml()
        .replace("gamma_tilde = 0.02", "gamma_tilde = 0.0")
        .replace("horizon = 1.0", "horizon = -1.0");
    std::fs::write(&path, text).unwrap();
    let out = run(&["--config", path.to_str().unwrap()]);
    std::fs::remove_file(&path).ok();
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("gamma_tilde"), "{err}");
    assert!(err.contains("horizon"), "{err}");
}

#[test]
fn unknown_key_rejected() {
    let path = temp_path("typo.toml");
    let mut text = small_config_toml();
    text.push_str("\nnot_a_key = 1\n");
    std::fs::write(&path, text).unwrap();
    let out = run(&["--config", path.to_str().unwrap()]);
    std::fs::remove_file(&path).ok();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("not_a_key"));
}

#[test]
fn beta_below_one_rejected() {
    let path = temp_path("beta.toml");
    let mut text = small_config_toml();
    text.push_str("\nbeta = 0.5\n");
    std::fs::write(&path, text).unwrap();
    let out = run(&["--config", path.to_str().unwrap()]);
    std::fs::remove_file(&path).ok();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("beta"));
}

#[test]
fn csv_runs_are_byte_identical() {
    let cfg_path = temp_path("det.toml");
    std::fs::write(&cfg_path, small_config_toml()).unwrap();
    let out_a = temp_path("det-a.csv");
    let out_b = temp_path("det-b.csv");
    for out_path in [&out_a, &out_b] {
        let out = run(&[
            "--config",
            cfg_path.to_str().unwrap(),
            "--seed",
            "7",
            "--replicas",
            "3",
            "--out",
            out_path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let a = std::fs::read(&out_a).unwrap();
    let b = std::fs::read(&out_b).unwrap();
    std::fs::remove_file(&cfg_path).ok();
    std::fs::remove_file(&out_a).ok();
    std::fs::remove_file(&out_b).ok();
    assert!(!a.is_empty());
    assert_eq!(a, b, "CSV output must be byte-identical across runs");
}

#[test]
fn summary_matches_recomputation_from_csv() {
    let cfg_path = temp_path("sum.toml");
    std::fs::write(&cfg_path, small_config_toml()).unwrap();
    let csv_path = temp_path("sum.csv");
    let out = run(&[
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        csv_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let summary = stdout(&out);
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    std::fs::remove_file(&cfg_path).ok();
    std::fs::remove_file(&csv_path).ok();

    // Recompute the long-run means from the CSV rows (final 25% of the
    // 1-second horizon) and compare to the printed summary values.
    let mut per_rep_u: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    let mut per_rep_v: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    for line in csv.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let rep: usize = cols[0].parse().unwrap();
        let t: f64 = cols[1].parse().unwrap();
        if t >= 0.75 {
            per_rep_u.entry(rep).or_default().push(cols[2].parse().unwrap());
            per_rep_v.entry(rep).or_default().push(cols[3].parse().unwrap());
        }
    }
    let rep_mean = |m: &std::collections::BTreeMap<usize, Vec<f64>>| -> f64 {
        let means: Vec<f64> = m
            .values()
            .map(|v| v.iter().sum::<f64>() / v.len() as f64)
            .collect();
        means.iter().sum::<f64>() / means.len() as f64
    };
    let u_from_csv = rep_mean(&per_rep_u);
    let v_from_csv = rep_mean(&per_rep_v);

    let parse_summary = |key: &str| -> f64 {
        summary
            .lines()
            .find(|l| l.starts_with(key))
            .unwrap_or_else(|| panic!("summary key {key} missing in:\n{summary}"))
            .split('=')
            .nth(1)
            .unwrap()
            .trim()
            .parse()
            .unwrap()
    };
    let u_printed = parse_summary("summary.longrun_u_mean");
    let v_printed = parse_summary("summary.longrun_vbar_mean");
    assert!(
        (u_printed - u_from_csv).abs() <= 1e-12 * (1.0 + u_from_csv.abs()),
        "summary U {u_printed} vs CSV {u_from_csv}"
    );
    assert!(
        (v_printed - v_from_csv).abs() <= 1e-12 * (1.0 + v_from_csv.abs()),
        "summary V {v_printed} vs CSV {v_from_csv}"
    );
}

#[test]
fn all_replicates_diverged_exits_3() {
    let cfg_path = temp_path("div.toml");
    let text = small_config_toml().replace("gamma_tilde = 0.02", "gamma_tilde = 1000000.0");
    std::fs::write(&cfg_path, text).unwrap();
    let csv_path = temp_path("div.csv");
    let out = run(&[
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        csv_path.to_str().unwrap(),
    ]);
    std::fs::remove_file(&cfg_path).ok();
    std::fs::remove_file(&csv_path).ok();
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("diverged"));
}

#[test]
fn mode_and_engine_overrides_apply() {
    // quad-bounds defaults to the SDE engine; forcing event + centralized
    // runs the discrete baseline.
    let csv_path = temp_path("mode.csv");
    let out = run(&[
        "--preset",
        "quad-bounds",
        "--mode",
        "centralized",
        "--engine",
        "event",
        "--replicas",
        "2",
        "--out",
        csv_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    std::fs::remove_file(&csv_path).ok();
    assert!(csv.contains("# mode = \"centralized\""));
    assert!(csv.contains("# engine = \"event\""));
    // Centralized traces have zero cohesion throughout.
    for line in csv.lines().filter(|l| !l.starts_with('#')).skip(1).take(5) {
        let v: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert_eq!(v, 0.0);
    }
}

#[test]
fn centralized_under_parallel_engine_rejected() {
    let out = run(&[
        "--preset",
        "quad-bounds",
        "--mode",
        "centralized",
        "--engine",
        "parallel",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("parallel"));
}
