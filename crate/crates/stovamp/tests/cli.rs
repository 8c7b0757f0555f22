//! End-to-end checks of the command-line binary: exit codes, artifact
//! layout, overrides, and deterministic reruns.

use std::path::{Path, PathBuf};
use std::process::Command;

use stovamp::{read_trace, Error};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stovamp"))
}

fn write_config(dir: &Path) -> PathBuf {
    let path = dir.join("experiment.conf");
    let text = format!(
        "experiment = haar\nn = 16\nl = 2\nalpha = 2.5\nsnr_db = 40\nrho = 0.9\n\
         k_it = 5\nseed = 1\noutput_dir = {}\n",
        dir.display()
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn usage_and_input_problems_exit_2() {
    let code = |args: &[&str]| bin().args(args).output().unwrap().status.code();
    assert_eq!(code(&[]), Some(2), "no arguments");
    assert_eq!(code(&["frobnicate", "x.conf"]), Some(2), "unknown command");
    assert_eq!(code(&["run"]), Some(2), "missing config path");
    assert_eq!(code(&["run", "/no/such/file.conf"]), Some(2), "missing file");
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let config = config.to_str().unwrap();
    assert_eq!(code(&["sweep", config]), Some(2), "sweep without --seeds");
    assert_eq!(
        code(&["run", config, "--rho", "1.5"]),
        Some(2),
        "out-of-range override"
    );
    assert_eq!(
        code(&["run", config, "--no-such-key", "1"]),
        Some(2),
        "unknown key"
    );
}

#[test]
fn numeric_aborts_map_to_exit_3() {
    // The mid-run failure modes carry their own exit code, distinct from
    // input problems.
    let non_finite = Error::NonFinite {
        what: "r1",
        iteration: 3,
        block: 1,
    };
    let invariant = Error::Invariant {
        what: "linear estimation lost information",
        iteration: 3,
        block: 1,
    };
    assert_eq!(non_finite.exit_code(), 3);
    assert_eq!(invariant.exit_code(), 3);
    assert_eq!(Error::Config("bad".into()).exit_code(), 2);
}

#[test]
fn run_writes_artifacts_and_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let output = bin().args(["run", config.to_str().unwrap()]).output().unwrap();
    assert_eq!(output.status.code(), Some(0), "{output:?}");

    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("final nmse"), "stdout was: {stdout}");
    assert!(dir.path().join("trace.csv").exists());
    assert!(dir.path().join("plot_trace.py").exists());

    let parsed = read_trace(&dir.path().join("trace.csv")).unwrap();
    assert_eq!(parsed.records.len(), 5 * 2, "k_it iterations times l blocks");
}

#[test]
fn overrides_and_reruns_are_deterministic() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let config = write_config(dir_a.path());
    let config = config.to_str().unwrap();

    let run = |out_dir: &Path| {
        let output = bin()
            .args([
                "run",
                config,
                "--k_it",
                "7",
                "--seed",
                "4",
                "--output_dir",
                out_dir.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert_eq!(output.status.code(), Some(0), "{output:?}");
        read_trace(&out_dir.join("trace.csv")).unwrap()
    };
    let first = run(dir_a.path());
    let second = run(dir_b.path());

    assert_eq!(first.records.len(), 7 * 2, "--k_it override applies");
    assert_eq!(
        first.echo.iter().find(|(k, _)| k == "seed").unwrap().1,
        "4",
        "--seed override echoed"
    );
    // Identical inputs reproduce every record except the wall clock.
    assert_eq!(first.records.len(), second.records.len());
    for (a, b) in first.records.iter().zip(&second.records) {
        assert_eq!(a.iteration, b.iteration);
        assert_eq!(a.block, b.block);
        assert_eq!(a.nmse_db, b.nmse_db);
        assert_eq!(a.eta1, b.eta1);
        assert_eq!(a.gamma1, b.gamma1);
        assert_eq!(a.tau1, b.tau1);
    }
}

#[test]
fn sweep_writes_one_trace_per_seed_and_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let output = bin()
        .args(["sweep", config.to_str().unwrap(), "--seeds", "0..2"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{output:?}");

    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("median final nmse"), "stdout was: {stdout}");
    for seed in 0..=2u64 {
        let path = dir.path().join(format!("trace_seed{seed}.csv"));
        assert!(path.exists(), "missing {}", path.display());
        let parsed = read_trace(&path).unwrap();
        assert_eq!(
            parsed.echo.iter().find(|(k, _)| k == "seed").unwrap().1,
            seed.to_string()
        );
    }
}
