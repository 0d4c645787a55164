use std::process::Command;

use fedsim::csvio::{read_metrics, read_samples};
use fedsim::runtime::evaluation_batch;

fn fedsim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fedsim"))
}

#[test]
fn zero_rounds_write_only_the_header() {
    let out = fedsim().args(["--rounds", "0"]).output().unwrap();
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8(out.stdout).unwrap().trim(),
        "round,elapsed_s,epochs,mse"
    );
}

#[test]
fn metrics_file_is_readable_and_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    let status = fedsim()
        .args(["--rounds", "20", "--subset", "5", "--out"])
        .arg(&path)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let metrics = read_metrics(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(metrics.len(), 20);
    assert_eq!(metrics[0].round, 0);
    assert_eq!(metrics[19].epochs, 100);
    for w in metrics.windows(2) {
        assert!(w[1].elapsed_s >= w[0].elapsed_s && w[1].epochs > w[0].epochs);
    }
}

#[test]
fn identical_seeds_give_identical_mse_columns() {
    let mse = |seed: &str| {
        let out = fedsim()
            .args(["--rounds", "10", "--seed", seed])
            .output()
            .unwrap();
        assert!(out.status.success());
        read_metrics(out.stdout.as_slice())
            .unwrap()
            .iter()
            .map(|m| m.mse)
            .collect::<Vec<_>>()
    };
    assert_eq!(mse("9"), mse("9"));
    assert_ne!(mse("9"), mse("10"));
}

#[test]
fn evaluation_dump_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("eval.csv");
    let status = fedsim()
        .args(["--rounds", "0", "--seed", "5", "--dump-eval"])
        .arg(&path)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let dumped = read_samples(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(dumped, evaluation_batch(5));
}

#[test]
fn usage_errors_exit_with_code_two() {
    for args in [
        &["--rounds", "5", "--duration", "3"][..],
        &["--mode", "distributed"],
        &["--eta", "0"],
        &["--clients", "0"],
        &["--worker-cmd", "x"],
        &["--clients", "3", "--subset", "4"],
    ] {
        let out = fedsim().args(args).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn runtime_errors_exit_with_failure() {
    let out = fedsim()
        .args(["--rounds", "1", "--out", "/nonexistent-dir/m.csv"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn distributed_cli_with_worker_binary() {
    let worker = env!("CARGO_BIN_EXE_fedsim-worker");
    let run = |extra: &[&str]| {
        let out = fedsim()
            .args(["--rounds", "4", "--clients", "3"])
            .args(extra)
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        read_metrics(out.stdout.as_slice())
            .unwrap()
            .iter()
            .map(|m| m.mse)
            .collect::<Vec<_>>()
    };
    let cmd = format!("{worker} {{addr}} {{id}} {{seed}} {{client_flags}}");
    let distributed = run(&[
        "--mode",
        "distributed",
        "--listen",
        "127.0.0.1:0",
        "--worker-cmd",
        &cmd,
    ]);
    assert_eq!(distributed, run(&[]));
}

#[test]
fn worker_cli_rejects_bad_arguments() {
    let out = Command::new(env!("CARGO_BIN_EXE_fedsim-worker"))
        .args(["127.0.0.1:1", "x", "3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
