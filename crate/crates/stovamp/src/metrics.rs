//! Reconstruction quality and noise calibration: phase-aligned NMSE, the
//! SNR-to-noise-precision mapping, magnitude observation synthesis, and the
//! per-step diagnostic record the solver emits.

use num_complex::Complex64;

use crate::denoise::RicianChannel;
use crate::error::{Error, Result};
use crate::message::RealVector;
use crate::rng::RngHandle;

/// One diagnostic row per (outer iteration, block) step of a solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// Outer iteration index, starting at 0.
    pub iteration: usize,
    /// 1-based block index.
    pub block: usize,
    /// Phase-aligned NMSE in dB; absent when the true signal is unknown.
    pub nmse_db: Option<f64>,
    /// Signal-side belief precision after denoising.
    pub eta1: f64,
    /// Signal-side extrinsic precision into the denoiser (after damping).
    pub gamma1: f64,
    /// Measurement-side extrinsic precision for this block (after damping).
    pub tau1: f64,
    /// Wall-clock time of the step in milliseconds (monotonic clock).
    pub wall_ms: f64,
}

/// Inner product `sum_i conj(xhat_i) x_i`; its argument is the global phase
/// that best aligns `xhat` to `x`.
fn alignment_inner(x: &[Complex64], xhat: &[Complex64]) -> Complex64 {
    x.iter().zip(xhat).map(|(a, b)| b.conj() * a).sum()
}

/// The phase `theta` minimizing `||x - e^{j theta} xhat||`.
pub fn align_phase(x: &[Complex64], xhat: &[Complex64]) -> f64 {
    alignment_inner(x, xhat).arg()
}

/// Squared error between `x` and `xhat`, minimized over a global phase and
/// normalized by the energy of `x`:
///
///   min_theta ||x - e^{j theta} xhat||^2 / ||x||^2
///     = (||x||^2 + ||xhat||^2 - 2 |<xhat, x>|) / ||x||^2.
///
/// Scale is deliberately NOT compensated; only the phase is.
pub fn nmse(x: &[Complex64], xhat: &[Complex64]) -> Result<f64> {
    if x.len() != xhat.len() {
        return Err(Error::Dimension {
            what: "nmse operands",
            expected: x.len(),
            got: xhat.len(),
        });
    }
    let ex: f64 = x.iter().map(|v| v.norm_sqr()).sum();
    if ex <= 0.0 {
        return Err(Error::Precondition(
            "nmse reference signal must have positive energy".into(),
        ));
    }
    let eh: f64 = xhat.iter().map(|v| v.norm_sqr()).sum();
    let cross = alignment_inner(x, xhat).norm();
    // Cancellation can push the exact-recovery case a few ulps negative.
    Ok(((ex + eh - 2.0 * cross) / ex).max(0.0))
}

/// NMSE on the decibel scale, `10 log10(nmse)`.
pub fn nmse_db(value: f64) -> f64 {
    10.0 * value.log10()
}

/// Noise precision `gamma_w` for a target SNR in dB, defined against the
/// realized mean per-entry energy of the noiseless measurements across all
/// blocks: `1/gamma_w = 10^(-snr/10) * mean |z|^2`.
pub fn snr_to_noise_precision(snr_db: f64, z_blocks: &[&[Complex64]]) -> Result<f64> {
    let count: usize = z_blocks.iter().map(|z| z.len()).sum();
    let energy: f64 = z_blocks
        .iter()
        .flat_map(|z| z.iter())
        .map(|v| v.norm_sqr())
        .sum();
    if count == 0 || energy <= 0.0 {
        return Err(Error::Precondition(
            "snr calibration needs at least one nonzero measurement".into(),
        ));
    }
    let noise_variance = 10f64.powf(-snr_db / 10.0) * (energy / count as f64);
    Ok(1.0 / noise_variance)
}

/// Draws `y_mu = |z_mu + w_mu|` with `w` i.i.d. circular complex Gaussian of
/// per-entry variance `1/gamma_w`.
pub fn generate_observation(
    channel: &RicianChannel,
    z: &[Complex64],
    rng: &mut RngHandle,
) -> RealVector {
    let sigma = (1.0 / channel.noise_precision()).sqrt();
    z.iter()
        .map(|zm| (zm + sigma * rng.standard_complex()).norm())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngHandle;
    use stovamp_oracle::nmse_grid;

    #[test]
    fn nmse_identity_phase_and_orthogonal_cases() {
        let x = vec![Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.3)];
        assert!(nmse(&x, &x).unwrap() < 1e-15);

        // Global phase is invisible.
        let rot = Complex64::new(0.7f64.cos(), 0.7f64.sin());
        let xr: Vec<Complex64> = x.iter().map(|v| rot * v).collect();
        assert!(nmse(&x, &xr).unwrap() < 1e-12);

        // Orthogonal unit vectors: error 2. Zero estimate: error 1.
        let e1 = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let e2 = vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        assert!((nmse(&e1, &e2).unwrap() - 2.0).abs() < 1e-15);
        let zero = vec![Complex64::new(0.0, 0.0); 2];
        assert!((nmse(&x, &zero).unwrap() - 1.0).abs() < 1e-15);
        assert!(nmse(&zero, &x).is_err());
    }

    #[test]
    fn nmse_scale_is_not_compensated() {
        // xhat = c x for real c > 0 gives (1 - c)^2.
        let x = vec![Complex64::new(0.3, -1.1), Complex64::new(2.0, 0.4)];
        for &c in &[0.5, 0.9, 1.7] {
            let xh: Vec<Complex64> = x.iter().map(|v| c * v).collect();
            let got = nmse(&x, &xh).unwrap();
            assert!(
                (got - (1.0 - c) * (1.0 - c)).abs() < 1e-12,
                "c = {c}: {got}"
            );
        }
    }

    #[test]
    fn closed_form_matches_grid_search() {
        let mut rng = RngHandle::new(41, 0);
        for _ in 0..20 {
            let x = rng.standard_complex_vector(12);
            let xh = rng.standard_complex_vector(12);
            let fast = nmse(&x, &xh).unwrap();
            let slow = nmse_grid(&x, &xh, 10_000);
            assert!((fast - slow).abs() < 1e-8, "{fast} vs {slow}");
        }
    }

    #[test]
    fn align_phase_recovers_applied_rotation() {
        let mut rng = RngHandle::new(42, 0);
        let x = rng.standard_complex_vector(32);
        for &phi in &[0.0_f64, 1.2, -2.6] {
            let rot = Complex64::new(phi.cos(), phi.sin());
            // xhat = e^{-j phi} x, so aligning needs theta = phi.
            let xh: Vec<Complex64> = x.iter().map(|v| v / rot).collect();
            let theta = align_phase(&x, &xh);
            let wrapped = (theta - phi + std::f64::consts::PI)
                .rem_euclid(2.0 * std::f64::consts::PI)
                - std::f64::consts::PI;
            assert!(wrapped.abs() < 1e-12, "phi = {phi}, theta = {theta}");
        }
    }

    #[test]
    fn snr_calibration_definitions() {
        let unit = vec![Complex64::new(1.0, 0.0)];
        assert!((snr_to_noise_precision(30.0, &[&unit]).unwrap() - 1000.0).abs() < 1e-9);

        let two = vec![Complex64::new(2.0f64.sqrt(), 0.0)];
        assert!((snr_to_noise_precision(0.0, &[&two]).unwrap() - 0.5).abs() < 1e-12);

        let four = vec![Complex64::new(2.0, 0.0)];
        assert!((snr_to_noise_precision(10.0, &[&four]).unwrap() - 2.5).abs() < 1e-12);

        let zero = vec![Complex64::new(0.0, 0.0)];
        assert!(snr_to_noise_precision(30.0, &[&zero]).is_err());
    }

    #[test]
    fn observations_match_noiseless_and_rayleigh_limits() {
        let mut rng = RngHandle::new(43, 2);

        // Essentially noiseless: y recovers |z|.
        let ch = RicianChannel::new(1e12).unwrap();
        let z = rng.standard_complex_vector(64);
        let y = generate_observation(&ch, &z, &mut rng);
        for (ym, zm) in y.iter().zip(&z) {
            assert!((ym - zm.norm()).abs() < 1e-5 * (1.0 + zm.norm()));
            assert!(*ym >= 0.0);
        }

        // z = 0: y is Rayleigh with E[y^2] = 1/gamma_w.
        let ch = RicianChannel::new(4.0).unwrap();
        let zeros = vec![Complex64::new(0.0, 0.0); 100_000];
        let y = generate_observation(&ch, &zeros, &mut rng);
        let m2 = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
        assert!((m2 - 0.25).abs() < 0.02 * 0.25, "E[y^2] = {m2}");

        // Determinism under a fixed seed.
        let mut r1 = RngHandle::new(7, 2);
        let mut r2 = RngHandle::new(7, 2);
        let a = generate_observation(&ch, &z, &mut r1);
        let b = generate_observation(&ch, &z, &mut r2);
        assert_eq!(a, b);
    }
}
