use std::fs;
use std::process::Command;

use cosserat::cli::{execute, parse_config, summary_table};

const SMALL_SHEAR: &str = "scenario = shear\nname = tiny\nresolution = 3\nfinal_time = 0.2\nreproducible = true\n";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cosserat"))
}

#[test]
fn reproducible_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(SMALL_SHEAR).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    execute(&cfg, &a).unwrap();
    execute(&cfg, &b).unwrap();
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.iter().any(|n| n == "steps.csv"));
    assert!(names.iter().any(|n| n == "summary.txt"));
    assert!(names.iter().any(|n| n == "trace_001.csv"));
    assert!(names.iter().any(|n| n == "fields_002.txt"));
    for n in &names {
        assert_eq!(fs::read(a.join(n)).unwrap(), fs::read(b.join(n)).unwrap(), "{n:?} differs");
    }
}

#[test]
fn step_csv_rows_follow_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(SMALL_SHEAR).unwrap();
    let s = execute(&cfg, dir.path()).unwrap();
    let csv = fs::read_to_string(dir.path().join("steps.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 1 + s.reports.len());
    for (line, r) in lines[1..].iter().zip(&s.reports) {
        assert_eq!(*line, r.csv_row(true));
    }
    let trace = fs::read_to_string(dir.path().join("trace_001.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("iter,energy,gradnorm"));
    assert_eq!(
        fs::read_to_string(dir.path().join("summary.txt")).unwrap(),
        summary_table(&s, true)
    );
}

#[test]
fn run_command_succeeds_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("shear.cfg");
    fs::write(&cfg, SMALL_SHEAR).unwrap();
    let out = dir.path().join("out");
    let status = bin().arg("run").arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    assert!(String::from_utf8_lossy(&status.stdout).contains("unknowns"));
    assert!(out.join("summary.txt").exists());
}

#[test]
fn malformed_config_exits_nonzero_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "scenario = shear\nmu = banana\n").unwrap();
    let out = bin().arg("run").arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn solver_failure_keeps_partial_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("capped.cfg");
    // one iteration is not enough to converge, so the first step fails
    fs::write(&cfg, format!("{SMALL_SHEAR}max_iter = 1\n")).unwrap();
    let out = dir.path().join("o");
    let res = bin().arg("run").arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert!(!res.status.success());
    assert!(!res.stderr.is_empty());
    assert!(out.join("steps.csv").exists());
    assert!(out.join("summary.txt").exists());
}

#[test]
fn compare_writes_side_by_side_table() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("simple.cfg");
    let b = dir.path().join("euler.cfg");
    fs::write(&a, format!("{SMALL_SHEAR}name = simple\nparameterization = quaternion_simple\n")).unwrap();
    fs::write(&b, format!("{SMALL_SHEAR}name = euler\nparameterization = euler\n")).unwrap();
    let out = dir.path().join("cmp");
    let res = bin().arg("compare").arg(&a).arg(&b).arg("--out").arg(&out).output().unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let table = fs::read_to_string(out.join("comparison.txt")).unwrap();
    assert!(table.contains("mean iterations"));
    assert!(table.contains("simple") && table.contains("euler"));
    assert!(out.join("simple").join("summary.txt").exists());
    assert!(out.join("euler").join("steps.csv").exists());
}
