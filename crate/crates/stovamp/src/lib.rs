//! Phase retrieval from magnitude-only observations of multiple linear
//! measurements, solved by expectation-propagation message passing.
//!
//! The signal `x` of interest is observed through `L` linear sensing
//! operators as `y_l = |A_l x + w_l|`: only magnitudes survive, phases are
//! lost, and the noise `w_l` is complex Gaussian. This crate reconstructs
//! `x` with two closely related iterative solvers:
//!
//! * [`solver::stochastic_vamp_run`] visits the measurement blocks one at a
//!   time (or in parallel) and lets every block carry its own
//!   measurement-side precision, so cheap per-block updates refresh the
//!   global estimate `L` times per sweep;
//! * [`solver::vamp_run`] is the classic full-batch variant that treats the
//!   concatenation of all blocks as a single measurement with one shared
//!   precision.
//!
//! The moving parts are deliberately small and composable:
//!
//! * [`message`] — Gaussian messages `(mean, precision)` and the three EP
//!   primitives (product, extrinsic division, damping);
//! * [`sensing`] — the [`sensing::SensingOperator`] trait with Haar
//!   column-orthogonal matrices, coded diffraction patterns (masked 2-D
//!   FFTs), and explicit dense matrices;
//! * [`denoise`] — the Gaussian-prior signal denoiser and the Rician
//!   magnitude-channel denoiser built on a numerically careful
//!   [`denoise::bessel_ratio`];
//! * [`solver`] — the iteration engines plus the shared diagonal-Gram
//!   linear estimator;
//! * [`metrics`] — phase-aligned NMSE, SNR calibration, observation
//!   synthesis, and per-step trace records.
//!
//! On top of the library sits a reproducible experiment pipeline —
//! [`config`] (flat `key = value` files with command-line overrides),
//! [`experiment`] (signal/operator/noise synthesis and artifact export),
//! [`trace`] (self-describing CSV traces), and [`pgm`] (grayscale image
//! I/O) — driven by the `stovamp` binary:
//!
//! ```text
//! stovamp run   <config-path> [--key value ...]
//! stovamp sweep <config-path> --seeds 0..9 [--key value ...]
//! ```
//!
//! # Runnable examples
//!
//! Each major capability has a self-contained example under `examples/`:
//!
//! * `message_passing` — the EP primitives on tiny hand-checked vectors;
//! * `operators` — sampling the three operator families and verifying
//!   their adjoint/unitarity properties numerically;
//! * `rician_denoising` — posterior statistics of the magnitude channel
//!   across noise regimes;
//! * `haar_phase_retrieval` — full reconstruction from random
//!   column-orthogonal measurements, block-stochastic vs. full-batch;
//! * `cdp_image_reconstruction` — recovering an image from coded
//!   diffraction magnitudes with FFT-backed operators;
//! * `custom_operator` — plugging a user-defined operator into the solver.
//!
//! Run one with `cargo run --release --example haar_phase_retrieval`.

pub mod config;
pub mod denoise;
pub mod error;
pub mod experiment;
pub mod message;
pub mod metrics;
pub mod pgm;
pub mod rng;
pub mod sensing;
pub mod solver;
pub mod trace;

pub use config::{ExperimentConfig, ExperimentKind, SolverKind};
pub use denoise::{bessel_ratio, DenoiserResult, GaussianPrior, RicianChannel};
pub use error::{Error, Result};
pub use experiment::{run_experiment, run_sweep, ExperimentOutcome};
pub use message::{
    damped_update, ep_extrinsic, gaussian_product, ComplexVector, GaussianMessage, RealVector,
    PREC_MAX, PREC_MIN,
};
pub use metrics::{
    align_phase, generate_observation, nmse, nmse_db, snr_to_noise_precision, TraceRecord,
};
pub use pgm::{load_pgm, write_pgm};
pub use rng::RngHandle;
pub use sensing::SensingOperator;
pub use solver::{
    initialize_state, lmmse_update, stochastic_vamp_run, stochastic_vamp_run_from, vamp_run,
    vamp_run_from, BlockOrder, LmmseResult, Schedule, SolverConfig, SolverState,
};
pub use trace::{read_trace, render_trace, write_trace, TraceFile, TRACE_HEADER};
