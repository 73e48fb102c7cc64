use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use varsmooth::family::{family, FamilyKind};
use varsmooth::gridfn::write_gridfn;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_varsmooth"));
    c.env_remove("VARSMOOTH_THREADS");
    c
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("varsmooth-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn sample_file(dir: &Path) -> String {
    let g = family(1, 1, 3, FamilyKind::PiecewiseSmooth)[0].sample(7).unwrap();
    let path = dir.join("f.vsgf");
    write_gridfn(&g, &path).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn norm_csv_is_deterministic_and_thread_independent() {
    let dir = scratch("norm");
    let f = sample_file(&dir);
    let args = ["norm", "--in", &f, "--weights", "const:s=1.5", "--l", "2", "--p", "2", "--q", "2", "--r", "2", "--kmax", "5"];
    let a = run(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let b = bin().args(args).env("VARSMOOTH_THREADS", "1").output().unwrap();
    let c = run(&[&args[..], &["--threads", "3"]].concat());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("variant,k,term,total\n"));
    for tag in ["bbar", "btilde", "seq", "v2", "v3", "v4", "n1", "n2", "n3", "n4"] {
        assert!(text.lines().any(|l| l.starts_with(&format!("{tag},"))), "missing {tag}");
    }
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn exit_codes() {
    let dir = scratch("exit");
    let f = sample_file(&dir);
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["norm", "--in", "/definitely/not/here.vsgf"]).status.code(), Some(1));
    assert_eq!(run(&["norm", "--in", &f, "--weights", "const:wrong=1"]).status.code(), Some(1));
    assert_eq!(run(&["norm", "--in", &f, "--p", "0"]).status.code(), Some(1));
    let big = dir.join("big.vsgf");
    std::fs::write(&big, "VSGF1\nn=1 K=1\n1e300 -1e300\n").unwrap();
    let out = run(&["norm", "--in", big.to_str().unwrap(), "--variants", "seq", "--l", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("norm"));
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn config_file_defaults_lose_to_flags() {
    let dir = scratch("config");
    let f = sample_file(&dir);
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "weights=const:s=0.5\nkmax=4\nvariants=seq\n").unwrap();
    let via_cfg = run(&["--config", cfg.to_str().unwrap(), "norm", "--in", &f]);
    let direct = run(&["norm", "--in", &f, "--weights", "const:s=0.5", "--kmax", "4", "--variants", "seq"]);
    assert!(direct.status.success());
    assert_eq!(via_cfg.stdout, direct.stdout);
    let flag_wins = run(&["--config", cfg.to_str().unwrap(), "norm", "--in", &f, "--kmax", "3"]);
    let expect = run(&["norm", "--in", &f, "--weights", "const:s=0.5", "--kmax", "3", "--variants", "seq"]);
    assert_eq!(flag_wins.stdout, expect.stdout);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn decompose_reconstruct_pipeline() {
    let dir = scratch("pipeline");
    let f = sample_file(&dir);
    let series = dir.join("s.vsss");
    let grid = dir.join("back.vsgf");
    let s = series.to_str().unwrap();
    assert!(run(&["decompose", "--in", &f, "--kmax", "6", "--out", s]).status.success());
    assert!(run(&["reconstruct", "--in", s, "--grid", "7", "--out", grid.to_str().unwrap()]).status.success());
    let back = varsmooth::gridfn::read_gridfn(&grid).unwrap();
    assert_eq!(back.level(), 7);
    let traced = run(&["trace", "--in", s, "--nprime", "1"]);
    assert_eq!(traced.status.code(), Some(1), "a 1D series has no proper plane");
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn equiv_and_hardy_tables() {
    let out = run(&["equiv", "--family", "smooth4", "--seed", "7", "--grid", "5", "--kmax", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 7);
    let h = run(&["hardy", "--count", "3", "--seed", "1", "--q", "1", "--mu", "0.5", "--beta", "2"]);
    let text = String::from_utf8(h.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.ends_with(",true")).count(), 3);
    assert_eq!(run(&["hardy", "--mu", "3", "--q", "2"]).status.code(), Some(1));
}

#[test]
fn suite_subset_reports_lines() {
    let out = run(&["suite", "--criteria", "1,7"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 2);
    assert_eq!(run(&["suite", "--criteria", "99"]).status.code(), Some(1));
}
