//! End-to-end experiment execution: signal synthesis, operator sampling,
//! observation generation, solver invocation, and artifact export (trace
//! CSV, reconstruction image, plot script).
//!
//! A single seed drives four independent random streams — signal, operators,
//! noise, solver — so any artifact can be regenerated from its config echo
//! alone. Sweeps run one seed per thread; every seed is its own experiment
//! with its own files.

use std::path::PathBuf;

use num_complex::Complex64;

use crate::config::{ExperimentConfig, ExperimentKind, SolverKind};
use crate::denoise::{GaussianPrior, RicianChannel};
use crate::error::{Error, Result};
use crate::message::{ComplexVector, RealVector};
use crate::metrics::{
    align_phase, generate_observation, snr_to_noise_precision, TraceRecord,
};
use crate::pgm::{load_pgm, write_pgm};
use crate::rng::RngHandle;
use crate::sensing::cdp::sample_cdp_operators;
use crate::sensing::haar::sample_haar_columns;
use crate::sensing::SensingOperator;
use crate::solver::{stochastic_vamp_run, vamp_run, BlockOrder, SolverConfig};
use crate::trace::write_trace;

/// What one experiment run produced and where it landed.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    /// Seed the run used.
    pub seed: u64,
    /// Last recorded reconstruction error, in dB.
    pub final_nmse_db: Option<f64>,
    /// The trace CSV.
    pub trace_path: PathBuf,
    /// The exported reconstruction, when the experiment reads an image.
    pub reconstruction_path: Option<PathBuf>,
}

/// Ready-to-run companion script plotting every trace CSV in its directory.
const PLOT_SCRIPT: &str = r##"#!/usr/bin/env python3
"""Plot nmse_db versus iteration for every trace*.csv beside this script."""
import csv
import glob
import os

import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
plotted = False
for path in sorted(glob.glob(os.path.join(here, "trace*.csv"))):
    iters, nmse = [], []
    with open(path) as fh:
        rows = csv.reader(line for line in fh if not line.startswith("#"))
        for row in rows:
            # Keep one point per outer iteration: the first block's row.
            if not row or row[0] == "iter" or row[1] != "1" or row[2] == "":
                continue
            iters.append(int(row[0]))
            nmse.append(float(row[2]))
    if iters:
        plt.plot(iters, nmse, label=os.path.basename(path))
        plotted = True
if not plotted:
    raise SystemExit("no trace*.csv with NMSE data found next to this script")
plt.xlabel("iteration")
plt.ylabel("NMSE (dB)")
plt.grid(True, alpha=0.3)
plt.legend()
out = os.path.join(here, "trace.png")
plt.savefig(out, dpi=150, bbox_inches="tight")
print("wrote", out)
"##;

/// FNV-1a, 64-bit: a stable content fingerprint for input files.
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// The sampled problem instance an experiment runs on.
struct Instance {
    x: ComplexVector,
    operators: Vec<Box<dyn SensingOperator>>,
    observations: Vec<RealVector>,
    prior: GaussianPrior,
    channel: RicianChannel,
    info: Vec<(String, String)>,
}

fn build_instance(config: &ExperimentConfig) -> Result<Instance> {
    let mut info: Vec<(String, String)> = Vec::new();
    let mut signal_rng = RngHandle::new(config.seed, 0);
    let mut operator_rng = RngHandle::new(config.seed, 1);
    let mut noise_rng = RngHandle::new(config.seed, 2);

    let (x, operators, prior): (ComplexVector, Vec<Box<dyn SensingOperator>>, GaussianPrior) =
        match config.kind {
            ExperimentKind::Haar => {
                let n = config.signal_len();
                let rows = config.haar_block_rows()?;
                info.push(("mbar".into(), rows.to_string()));
                info.push((
                    "effective_alpha".into(),
                    config.effective_alpha()?.to_string(),
                ));
                let x = signal_rng.standard_complex_vector(n);
                let operators: Vec<Box<dyn SensingOperator>> = (0..config.l)
                    .map(|_| {
                        sample_haar_columns(rows, n, &mut operator_rng)
                            .map(|op| Box::new(op) as Box<dyn SensingOperator>)
                    })
                    .collect::<Result<_>>()?;
                (x, operators, GaussianPrior::new(1.0)?)
            }
            ExperimentKind::Cdp => {
                let image_path = config.input_image.as_ref().expect("validated cdp config");
                let raw = std::fs::read(image_path).map_err(|source| Error::Io {
                    path: image_path.display().to_string(),
                    source,
                })?;
                info.push((
                    "image_fnv1a64".into(),
                    format!("{:#018x}", fnv1a64(&raw)),
                ));
                let (x, (h, w)) = load_pgm(image_path)?;
                let (want_h, want_w) = config.grid();
                if (h, w) != (want_h, want_w) {
                    return Err(Error::Config(format!(
                        "input image is {h}x{w}, config says {want_h}x{want_w}"
                    )));
                }
                let power = x.iter().map(|v| v.norm_sqr()).sum::<f64>() / x.len() as f64;
                if power <= 0.0 {
                    return Err(Error::Config("input image is entirely black".into()));
                }
                info.push(("signal_power".into(), power.to_string()));
                let operators: Vec<Box<dyn SensingOperator>> =
                    sample_cdp_operators(h, w, config.l, &mut operator_rng)?
                        .into_iter()
                        .map(|op| Box::new(op) as Box<dyn SensingOperator>)
                        .collect();
                (x, operators, GaussianPrior::new(power)?)
            }
            ExperimentKind::Custom => {
                let (h, w) = config.grid();
                let x = signal_rng.standard_complex_vector(h * w);
                let operators: Vec<Box<dyn SensingOperator>> =
                    sample_cdp_operators(h, w, config.l, &mut operator_rng)?
                        .into_iter()
                        .map(|op| Box::new(op) as Box<dyn SensingOperator>)
                        .collect();
                (x, operators, GaussianPrior::new(1.0)?)
            }
        };

    let z: Vec<ComplexVector> = operators
        .iter()
        .map(|op| op.apply(&x))
        .collect::<Result<_>>()?;
    let z_refs: Vec<&[Complex64]> = z.iter().map(|v| v.as_slice()).collect();
    let gamma_w = snr_to_noise_precision(config.snr_db, &z_refs)?;
    info.push(("gamma_w".into(), gamma_w.to_string()));
    let channel = RicianChannel::new(gamma_w)?;
    let observations: Vec<RealVector> = z
        .iter()
        .map(|zl| generate_observation(&channel, zl, &mut noise_rng))
        .collect();

    Ok(Instance {
        x,
        operators,
        observations,
        prior,
        channel,
        info,
    })
}

fn solve(
    config: &ExperimentConfig,
    instance: &Instance,
) -> Result<(ComplexVector, Vec<TraceRecord>)> {
    let solver_config = SolverConfig {
        iterations: config.k_it,
        rho: config.rho,
        schedule: config.schedule,
        block_order: BlockOrder::Fixed,
        eps_stop: 0.0,
    };
    let refs: Vec<&dyn SensingOperator> =
        instance.operators.iter().map(|op| op.as_ref()).collect();
    let mut solver_rng = RngHandle::new(config.seed, 3);
    match config.solver {
        SolverKind::Vamp => vamp_run(
            Some(&instance.x),
            &refs,
            &instance.observations,
            &instance.prior,
            &instance.channel,
            &solver_config,
            &mut solver_rng,
        ),
        SolverKind::Stochastic => stochastic_vamp_run(
            Some(&instance.x),
            &refs,
            &instance.observations,
            &instance.prior,
            &instance.channel,
            &solver_config,
            &mut solver_rng,
        ),
    }
}

fn run_one(config: &ExperimentConfig, trace_name: &str, recon_name: &str) -> Result<ExperimentOutcome> {
    let instance = build_instance(config)?;
    let (xhat, records) = solve(config, &instance)?;

    std::fs::create_dir_all(&config.output_dir).map_err(|source| Error::Io {
        path: config.output_dir.display().to_string(),
        source,
    })?;
    let final_nmse_db = records.last().and_then(|r| r.nmse_db);
    let mut info = instance.info.clone();
    if let Some(db) = final_nmse_db {
        info.push(("final_nmse_db".into(), db.to_string()));
    }

    let trace_path = config.output_dir.join(trace_name);
    write_trace(&records, &trace_path, &config.echo_pairs(), &info)?;

    let script_path = config.output_dir.join("plot_trace.py");
    std::fs::write(&script_path, PLOT_SCRIPT).map_err(|source| Error::Io {
        path: script_path.display().to_string(),
        source,
    })?;

    let reconstruction_path = if config.kind == ExperimentKind::Cdp {
        let theta = align_phase(&instance.x, &xhat);
        let rot = Complex64::new(theta.cos(), theta.sin());
        let intensities: Vec<f64> = xhat.iter().map(|v| (rot * v).re).collect();
        let (h, w) = config.grid();
        let path = config.output_dir.join(recon_name);
        write_pgm(&path, h, w, &intensities)?;
        Some(path)
    } else {
        None
    };

    Ok(ExperimentOutcome {
        seed: config.seed,
        final_nmse_db,
        trace_path,
        reconstruction_path,
    })
}

/// Runs one experiment end to end, writing `trace.csv`, `plot_trace.py`, and
/// (for image experiments) `reconstruction.pgm` into the config's output
/// directory. The reconstruction is globally phase-aligned to the true
/// signal before its real parts are exported.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    run_one(config, "trace.csv", "reconstruction.pgm")
}

/// Runs the same experiment once per seed, one thread per seed, writing
/// `trace_seed{k}.csv` (and `reconstruction_seed{k}.pgm` where applicable).
/// Outcomes come back in seed order; the first failure aborts the sweep.
pub fn run_sweep(config: &ExperimentConfig, seeds: &[u64]) -> Result<Vec<ExperimentOutcome>> {
    if seeds.is_empty() {
        return Err(Error::Config("seed sweep needs at least one seed".into()));
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                let mut per_seed = config.clone();
                per_seed.seed = seed;
                scope.spawn(move || {
                    run_one(
                        &per_seed,
                        &format!("trace_seed{seed}.csv"),
                        &format!("reconstruction_seed{seed}.pgm"),
                    )
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("seed worker panicked"))
            .collect()
    })
}
