use std::path::PathBuf;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tangent-stokes")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("tangent-stokes-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn small_study_prints_a_table_and_writes_files() {
    let dir = scratch("table");
    let csv = dir.join("p1.csv");
    let out = run(&["--levels", "1..2", "--out-table", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 4);
    assert!(stdout.starts_with("| "));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("level 1: dofs") && stderr.contains("level 2: dofs"));
    let table = std::fs::read_to_string(&csv).unwrap();
    assert!(table.starts_with("level,dofs,eu_l2,rate_eu_l2,"));
    assert_eq!(table.lines().count(), 3);
    assert_eq!(std::fs::read_to_string(dir.join("p1.md")).unwrap(), stdout);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn config_file_with_flag_override() {
    let dir = scratch("config");
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "surface = sphere\nlevels = 1..2\nku = 2\n").unwrap();
    let out = run(&["--config", cfg.to_str().unwrap(), "--levels", "1..1", "--kp", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 3);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn dziuk_run_exports_vtk() {
    let dir = scratch("vtk");
    let vtk = dir.join("dziuk.vtk");
    let out = run(&["--surface", "dziuk", "--levels", "1..1", "--solver", "block-gmres", "--out-vtk", vtk.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("level,dofs,div_l2"));
    let text = std::fs::read_to_string(&vtk).unwrap();
    assert!(text.starts_with("# vtk DataFile Version 3.0\n"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn configuration_errors_exit_with_two() {
    for args in [
        &["--ku", "9"][..],
        &["--levels", "0..2"],
        &["--surface", "klein"],
        &["--operator", "stokes"],
        &["--config", "/nonexistent/run.cfg"],
    ] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8(out.stderr).unwrap().starts_with("error: "));
    }
}

#[test]
fn solver_failure_exits_with_one() {
    let out = run(&["--levels", "1..1", "--solver", "gmres", "--tol", "1e-300"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("level 1: "));
}
