//! Harness outputs and the command-line tool.

use std::fs;
use std::path::Path;
use std::process::Command;

use mb4nls::harness::{compare_methods, run, RunConfig};
use mb4nls::methods::MethodId;

fn small() -> RunConfig {
    RunConfig {
        nx: 12,
        ny: 10,
        t_end: 0.05,
        dt: 0.01,
        ..RunConfig::default()
    }
}

fn csv_without_wall(cfg: &RunConfig) -> String {
    let mut buf = Vec::new();
    run(cfg).unwrap().write_csv(&mut buf).unwrap();
    String::from_utf8(buf)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn single_step_run_has_two_rows() {
    let cfg = RunConfig { t_end: 0.01, ..small() };
    let tr = run(&cfg).unwrap();
    assert_eq!(tr.rows.len(), 2);
    assert_eq!(tr.rows[0].t, 0.0);
    assert_eq!(tr.rows[1].t, 0.01);
}

#[test]
fn csv_is_deterministic_apart_from_wall_time() {
    for m in [MethodId::Mb4, MethodId::Avf4] {
        let cfg = RunConfig { method: m, ..small() };
        let a = csv_without_wall(&cfg);
        assert_eq!(a, csv_without_wall(&cfg));
        assert!(a.starts_with("t,UK,UI,UE,H,prob,participation,newton_iters"));
        assert_eq!(a.lines().count(), 7);
    }
}

#[test]
fn snapshot_mass_matches_probability_column() {
    let cfg = RunConfig {
        snapshot_times: vec![0.0, 0.02, 0.049],
        ..small()
    };
    let tr = run(&cfg).unwrap();
    assert_eq!(tr.snapshots.len(), 3);
    for s in &tr.snapshots {
        let row = tr.rows.iter().find(|r| r.t == s.t).expect("snapshot time is a step time");
        let p = row.observables.probability;
        assert!((s.mass() - p).abs() <= 1e-12 * p, "t={}: {} vs {p}", s.t, s.mass());
    }
    // 0.049 snaps to the nearest step.
    assert_eq!(tr.snapshots[2].t, 0.05);
}

#[test]
fn snapshot_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        snapshot_times: vec![0.03],
        ..small()
    };
    let tr = run(&cfg).unwrap();
    let files = tr.write_outputs(dir.path()).unwrap();
    assert_eq!(files.len(), 2);
    let text = fs::read_to_string(dir.path().join(tr.snapshots[0].file_name())).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "# 0.03 12 10");
    let values: Vec<f64> = lines
        .inspect(|l| assert_eq!(l.split_whitespace().count(), 12))
        .flat_map(|l| l.split_whitespace().map(|v| v.parse::<f64>().unwrap()).collect::<Vec<_>>())
        .collect();
    assert_eq!(values, tr.snapshots[0].density);
}

#[test]
fn comparison_records_failures_instead_of_aborting() {
    let mut cfg = small();
    cfg.newton.max_iters = 1;
    cfg.newton.max_halvings = 0;
    let rep = compare_methods(&cfg, &[MethodId::Rk4, MethodId::Mb4]).unwrap();
    assert!(rep.get(MethodId::Rk4).unwrap().failure.is_none());
    let mb4 = rep.get(MethodId::Mb4).unwrap();
    assert!(mb4.failure.as_deref().unwrap().contains("did not converge"));
    assert!(mb4.energy_drift.is_infinite());
}

fn cli(args: &[&str], out: &Path) -> (i32, String, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_mb4nls"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap();
    (
        o.status.code().unwrap(),
        String::from_utf8_lossy(&o.stdout).into_owned(),
        String::from_utf8_lossy(&o.stderr).into_owned(),
    )
}

#[test]
fn cli_run_writes_outputs_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# small\nnx = 8\nny = 8\nt_end = 0.03\nsnapshot_times = 0.02\n").unwrap();
    let (code, stdout, _) = cli(&["run", "--config", cfg.to_str().unwrap(), "method=avf2"], dir.path());
    assert_eq!(code, 0);
    assert!(stdout.starts_with("AVF2 8x8 steps=3"), "{stdout}");
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(dir.path().join("snapshot_0.02.txt").exists());
}

#[test]
fn cli_config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["run", "nx=1"][..],
        &["run", "colour=blue"],
        &["run", "method=euler"],
        &["bench", "--workers", "5", "nx=8", "ny=8"],
        &["converge", "--steps", "0.01,0.02,0.005", "nx=8", "ny=8"],
        &["frobnicate"],
    ] {
        let (code, _, stderr) = cli(args, dir.path());
        assert_eq!(code, 1, "{args:?}: {stderr}");
    }
}

#[test]
fn cli_non_convergence_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, stderr) = cli(
        &["run", "nx=8", "ny=8", "t_end=0.02", "newton_max_iters=1", "max_halvings=0"],
        dir.path(),
    );
    assert_eq!(code, 2, "{stderr}");
    assert!(stderr.contains("step from t = 0"), "{stderr}");
}

#[test]
fn cli_report_commands_write_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, _) = cli(&["compare", "--methods", "gauss2,mb4", "nx=8", "ny=8", "t_end=0.02"], dir.path());
    assert_eq!(code, 0);
    assert_eq!(fs::read_to_string(dir.path().join("report.txt")).unwrap(), stdout);
    assert!(stdout.contains("MB4") && stdout.contains("GAUSS2"));

    let (code, stdout, _) = cli(&["converge", "nx=8", "ny=8", "t_end=0.04", "method=gauss2"], dir.path());
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("slope"));
}
