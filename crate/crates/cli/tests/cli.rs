use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use mdi_keyrate::decoy_algebra::coefficient_sets;
use mdi_keyrate_cli::commands::{run_verify, run_verify_with, SWEEP_HEADER};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mdi-keyrate"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("mdi-keyrate-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#') && *l != SWEEP_HEADER)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn parse_errors_exit_2() {
    let file = scratch("bad.scenario");
    fs::write(&file, "channel.e_d = 0.01\nchannel.bogus = 3\n").unwrap();
    assert_eq!(code(&run(&["sweep", "--scenario", file.to_str().unwrap()])), 2);
    assert_eq!(code(&run(&["sweep", "--grid", "0:10"])), 2);
    assert_eq!(code(&run(&["table", "--config", "3,2,Q", "--distances", ""])), 2);
    assert_eq!(code(&run(&["sweep", "--no-such-flag"])), 2);
}

#[test]
fn io_errors_exit_3() {
    let missing = scratch("nowhere").join("deeper").join("out.csv");
    let o = run(&["table", "--distances", "", "--out", missing.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    let o = run(&["sweep", "--scenario", scratch("absent.scenario").to_str().unwrap()]);
    assert_eq!(code(&o), 3);
}

#[test]
fn empty_table_is_header_only() {
    let o = run(&["table", "--distances", ""]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body, ["config"]);
}

#[test]
fn verify_with_no_instances() {
    let o = run(&["verify", "--samples", "0"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("instances=0"), "{text}");
}

#[test]
fn verify_catches_a_flipped_tail_constant() {
    let flipped = |l: &_| {
        let mut c = coefficient_sets(l)?;
        c.c_tail = -c.c_tail;
        Ok(c)
    };
    assert!(run_verify(42, 60).passed);
    let out = run_verify_with(42, 60, &flipped);
    assert!(!out.passed, "{}", out.text);
}

#[test]
fn sweeps_are_byte_identical() {
    let args = ["sweep", "--samples", "300", "--grid", "0:40:20", "--seed", "9"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn emitted_rates_match_reevaluation() {
    let o = run(&["sweep", "--samples", "400", "--grid", "0:40:10", "--seed", "3"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let mut checked = 0;
    for r in rows(&text) {
        if r[9].is_empty() {
            continue;
        }
        let e = run(&[
            "eval", "--distance", &r[0], "--mu-x", &r[9], "--p-x", &r[10], "--mu-z", &r[11],
            "--p-z", &r[12], "--basis-z", &r[8],
        ]);
        assert_eq!(code(&e), 0, "{}", String::from_utf8_lossy(&e.stderr));
        let again = rows(&String::from_utf8(e.stdout).unwrap());
        assert_eq!(again[0][1], r[1], "rate at L = {}", r[0]);
        checked += 1;
    }
    assert!(checked >= 1);
}
