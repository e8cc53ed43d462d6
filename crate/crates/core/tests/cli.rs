mod common;

use std::path::Path;
use std::process::{Command, Output};

use sparsepos::certificate::{from_json, verify};
use sparsepos::cli::parse_problem;

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparsepos")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn twoballs_table_is_monotone_and_below_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "twoballs.sps", common::TWOBALLS_FILE);
    let out = run(&[
        file.to_str().unwrap(),
        "--order",
        "1",
        "--max-order",
        "3",
        "--oracle-box",
        "-1:1",
        "--oracle-step",
        "0.01",
        "--format",
        "csv",
        "--no-timing",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("r,bound,status,gap,blocks,max_block,ms"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    let bounds: Vec<f64> = rows[..3].iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(rows[..3].iter().all(|r| r[2] == "optimal"));
    assert!(bounds.windows(2).all(|w| w[0] <= w[1] + 1e-7));
    assert_eq!(rows[3][0], "oracle");
    let oracle: f64 = rows[3][1].parse().unwrap();
    assert!(bounds.iter().all(|&b| b <= oracle + 1e-5));
    // the relaxation is tight up to the grid resolution
    assert!(oracle - bounds[2] < 0.01);
}

#[test]
fn output_is_byte_stable_without_timing() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "twoballs.sps", common::TWOBALLS_FILE);
    let args = [file.to_str().unwrap(), "--variant", "putinar-sparse,dense", "--max-order", "3", "--no-timing"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).contains("variant: dense"));
}

#[test]
fn constant_objective_prints_exact_bound() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "c.sps", "vars x : X; y : Y\nminimize 5\nst 1 - x^2 - y^2 >= 0\n");
    let out = run(&[file.to_str().unwrap(), "--max-order", "2", "--format", "csv", "--no-timing"]);
    assert_eq!(out.status.code(), Some(0));
    for line in stdout(&out).lines().skip(1) {
        assert!(line.split(',').nth(1) == Some("5"), "{line}");
    }
}

#[test]
fn order_below_minimum_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "twoballs.sps", common::TWOBALLS_FILE);
    let out = run(&[file.to_str().unwrap(), "--variant", "dense", "--order", "1", "--max-order", "2"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("below the minimum admissible order 2"), "{err}");
    assert!(stdout(&out).contains("optimal"));
}

#[test]
fn parse_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let coupled = write(dir.path(), "bad.sps", "vars x : X; y : Y; z : Z\nminimize x\nst c1: 1 - x*z >= 0\n");
    let out = run(&[coupled.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("c1"));
    let syntax = write(dir.path(), "syn.sps", "vars x : X\nminimize (x + 1\n");
    let out = run(&[syntax.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    let out = run(&[coupled.to_str().unwrap(), "--variant", "nope"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn certificate_file_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "twoballs.sps", common::TWOBALLS_FILE);
    let cert = dir.path().join("cert.json");
    let out = run(&[file.to_str().unwrap(), "--order", "2", "--certificate", cert.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let c = from_json(&std::fs::read_to_string(&cert).unwrap()).unwrap();
    let inst = parse_problem(common::TWOBALLS_FILE).unwrap();
    assert!(verify(&c, &inst, 1e-5).passed);
}

#[test]
fn krivine_with_explicit_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "k.sps", "vars x : X\nminimize x\nst g: (1 - x)/2 >= 0\n");
    let cert = dir.path().join("k.json");
    let out = run(&[
        file.to_str().unwrap(),
        "--variant",
        "krivine",
        "--order",
        "2",
        "--krivine-bounds",
        "1",
        "--certificate",
        cert.to_str().unwrap(),
        "--format",
        "csv",
        "--no-timing",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert!((row[1].parse::<f64>().unwrap() + 1.0).abs() < 1e-6);
    let c = from_json(&std::fs::read_to_string(&cert).unwrap()).unwrap();
    let inst = parse_problem("vars x : X\nminimize x\nst g: (1 - x)/2 >= 0\n").unwrap();
    assert!(verify(&c, &inst, 1e-6).passed);
}
