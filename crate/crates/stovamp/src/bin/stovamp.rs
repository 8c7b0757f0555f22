//! Command-line experiment runner.
//!
//! `stovamp run <config>` executes one experiment; `stovamp sweep <config>
//! --seeds a..b` repeats it over an inclusive seed range, one thread per
//! seed. Any config key can be overridden with `--key value`.

use std::process::ExitCode;

use stovamp::{run_experiment, run_sweep, Error, ExperimentConfig};

const USAGE: &str = "usage:
  stovamp run <config-path> [--key value ...]
  stovamp sweep <config-path> --seeds a..b [--key value ...]

Runs a phase-retrieval experiment described by a flat `key = value` config
file; see the repository's example configs. Every config key can be
overridden from the command line (for example `--seed 3 --rho 0.9`).

`sweep` repeats the run for each seed in the inclusive range a..b, writing
one trace_seed{k}.csv per seed into the output directory.

Exit codes: 0 success, 2 configuration or input problem, 3 numeric abort.";

/// Anything the argument surface itself can reject, before the library sees
/// the config.
fn usage_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Parses an inclusive `a..b` (or `a..=b`) seed range.
fn parse_seed_range(text: &str) -> Result<Vec<u64>, Error> {
    let (lo, hi) = text
        .split_once("..")
        .ok_or_else(|| usage_error(format!("--seeds takes a range like 0..9, got `{text}`")))?;
    let hi = hi.strip_prefix('=').unwrap_or(hi);
    let lo: u64 = lo
        .parse()
        .map_err(|_| usage_error(format!("--seeds: `{lo}` is not a seed")))?;
    let hi: u64 = hi
        .parse()
        .map_err(|_| usage_error(format!("--seeds: `{hi}` is not a seed")))?;
    if hi < lo {
        return Err(usage_error(format!("--seeds: empty range {lo}..{hi}")));
    }
    Ok((lo..=hi).collect())
}

struct Invocation {
    sweep: bool,
    config_path: String,
    overrides: Vec<(String, String)>,
    seeds: Option<Vec<u64>>,
}

fn parse_args(args: &[String]) -> Result<Invocation, Error> {
    let mut iter = args.iter();
    let command = iter.next().ok_or_else(|| usage_error("missing command"))?;
    let sweep = match command.as_str() {
        "run" => false,
        "sweep" => true,
        other => return Err(usage_error(format!("unknown command `{other}`"))),
    };
    let config_path = iter
        .next()
        .ok_or_else(|| usage_error("missing config path"))?
        .clone();

    let mut overrides = Vec::new();
    let mut seeds = None;
    while let Some(flag) = iter.next() {
        let key = flag
            .strip_prefix("--")
            .ok_or_else(|| usage_error(format!("expected a --key, got `{flag}`")))?;
        let value = iter
            .next()
            .ok_or_else(|| usage_error(format!("--{key} needs a value")))?;
        if key == "seeds" {
            if !sweep {
                return Err(usage_error("--seeds only applies to `sweep`"));
            }
            seeds = Some(parse_seed_range(value)?);
        } else {
            overrides.push((key.to_string(), value.clone()));
        }
    }
    if sweep && seeds.is_none() {
        return Err(usage_error("`sweep` needs --seeds a..b"));
    }
    Ok(Invocation {
        sweep,
        config_path,
        overrides,
        seeds,
    })
}

fn format_nmse(db: Option<f64>) -> String {
    match db {
        Some(v) => format!("{v:.2} dB"),
        None => "unknown (no reference signal)".to_string(),
    }
}

fn execute(invocation: &Invocation) -> Result<(), Error> {
    let config = ExperimentConfig::from_file(
        std::path::Path::new(&invocation.config_path),
        &invocation.overrides,
    )?;
    if invocation.sweep {
        let seeds = invocation.seeds.as_ref().expect("checked by parse_args");
        let outcomes = run_sweep(&config, seeds)?;
        let mut finals: Vec<f64> = Vec::new();
        for outcome in &outcomes {
            println!(
                "seed {}: final nmse {} -> {}",
                outcome.seed,
                format_nmse(outcome.final_nmse_db),
                outcome.trace_path.display()
            );
            if let Some(db) = outcome.final_nmse_db {
                finals.push(db);
            }
        }
        if !finals.is_empty() {
            finals.sort_by(|a, b| a.total_cmp(b));
            let median = finals[finals.len() / 2];
            println!("median final nmse over {} seeds: {median:.2} dB", finals.len());
        }
        println!("plot script: {}", config.output_dir.join("plot_trace.py").display());
    } else {
        let outcome = run_experiment(&config)?;
        println!("trace: {}", outcome.trace_path.display());
        if let Some(path) = &outcome.reconstruction_path {
            println!("reconstruction: {}", path.display());
        }
        println!("plot script: {}", config.output_dir.join("plot_trace.py").display());
        println!("final nmse: {}", format_nmse(outcome.final_nmse_db));
    }
    Ok(())
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let invocation = match parse_args(&args) {
        Ok(invocation) => invocation,
        Err(err) => {
            eprintln!("error: {err}\n\n{USAGE}");
            return ExitCode::from(2);
        }
    };
    match execute(&invocation) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
