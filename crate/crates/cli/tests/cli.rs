use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn demandwave(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_demandwave")).args(args).current_dir(dir).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = demandwave(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn small_population(dir: &Path) {
    ok(dir, &["simulate", "--seed", "4", "n=16", "periods=3,5", "n_habitual=60", "n_casual=100"]);
    ok(dir, &["bin", "n=16"]);
}

#[test]
fn unknown_subcommand_prints_usage() {
    let dir = tempfile::tempdir().unwrap();
    let out = demandwave(dir.path(), &["forecast"]);
    assert_ne!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn help_lists_settings() {
    let dir = tempfile::tempdir().unwrap();
    let out = demandwave(dir.path(), &["denoise", "--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("threshold") && text.contains("budget:3"));
}

#[test]
fn failures_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let missing = demandwave(d, &["bin", "input=nope.csv"]);
    assert_eq!(code(&missing), 4);
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope.csv"));

    fs::write(d.join("bad.conf"), "seed: 4\n").unwrap();
    let config = demandwave(d, &["--config", "bad.conf", "simulate"]);
    assert_eq!(code(&config), 3);
    assert_eq!(code(&demandwave(d, &["simulate", "flavour=odd"])), 3);
    assert_eq!(code(&demandwave(d, &["denoise", "bank=db99", "input=x.wdt"])), 3);

    fs::write(d.join("junk.wdt"), b"NOPE0000").unwrap();
    let data = demandwave(d, &["denoise", "input=junk.wdt"]);
    assert_eq!(code(&data), 5);

    fs::write(d.join("bad.csv"), "who,what\n1,2\n").unwrap();
    assert_eq!(code(&demandwave(d, &["bin", "input=bad.csv"])), 5);

    small_population(d);
    let wrong_period = demandwave(d, &["evaluate"]);
    assert_eq!(code(&wrong_period), 6);
    assert!(String::from_utf8_lossy(&wrong_period.stderr).contains("period 18"));

    ok(d, &["simulate", "--out", "big", "n=32", "periods=4", "n_habitual=5", "n_casual=5"]);
    let mismatch = demandwave(d, &["surface", "denoised=big/observed.wdt"]);
    assert_eq!(code(&mismatch), 6);

    assert_eq!(code(&demandwave(d, &["denoise", "threshold=budget:x"])), 3);
}

#[test]
fn budget_three_keeps_56_details() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_population(d);
    ok(d, &["denoise", "threshold=budget:3", "records=55928760"]);
    let report = fs::read_to_string(d.join("shrink_report.txt")).unwrap();
    assert!(report.contains("coefficients_retained = 56\n"), "{report}");
    assert!(report.contains("compression_ratio = 998727.8571\n"), "{report}");
    let sidecar = fs::read_to_string(d.join("denoise.resolved.conf")).unwrap();
    assert!(sidecar.contains("threshold = budget:3"));
}

#[test]
fn evaluate_writes_seven_rows_per_period() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_population(d);
    ok(d, &["evaluate", "periods=3,5", "bank=haar"]);
    for p in [3, 5] {
        let text = fs::read_to_string(d.join(format!("report_period_{p}.csv"))).unwrap();
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows[0], "level,coeff,compress,mse,mae,skew,kurt,pct_mse,pct_mae,pct_skew");
        assert_eq!(rows.len(), 8);
        let labels: Vec<&str> = rows[1..].iter().map(|r| r.split(',').next().unwrap()).collect();
        assert_eq!(labels, ["3", "4", "5", "6", "7", "8", "none"]);
        assert!(rows[7].starts_with("none,all,NA,") && rows[7].ends_with(",0,0,0"), "{}", rows[7]);
    }
}

#[test]
fn flags_beat_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("run.conf"), "seed = 1\nn = 16\nn_habitual = 10\nn_casual = 10\nperiods = 3\nout = fromfile\n").unwrap();
    ok(d, &["--config", "run.conf", "--seed", "9", "--out", "fromflag", "simulate"]);
    let sidecar = fs::read_to_string(d.join("fromflag/simulate.resolved.conf")).unwrap();
    assert!(sidecar.contains("seed = 9\n") && sidecar.contains("n = 16\n"));
    assert!(!d.join("fromfile").exists());
}

#[test]
fn pipeline_is_byte_identical() {
    let run = |dir: &Path| {
        ok(dir, &["simulate", "--seed", "11", "n=16", "periods=3,5", "n_habitual=60", "n_casual=100"]);
        ok(dir, &["bin", "n=16"]);
        ok(dir, &["denoise", "--threads", "2"]);
        ok(dir, &["evaluate", "periods=3,5"]);
        ok(dir, &["surface", "denoised=denoised.wdt"]);
        ok(dir, &["explore", "n=16"]);
        let mut files: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        files.into_iter().map(|p| (p.file_name().unwrap().to_owned(), fs::read(&p).unwrap())).collect::<Vec<_>>()
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ra, rb) = (run(a.path()), run(b.path()));
    assert_eq!(ra.len(), 25);
    assert_eq!(ra, rb);
}
