//! MMSE denoisers: the Gaussian-prior posterior for the signal side and the
//! magnitude-observation (Rician) posterior for the measurement side, plus
//! the modified-Bessel ratio kernel both the denoiser and its tests lean on.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::message::{ComplexVector, GaussianMessage, PREC_MAX, PREC_MIN};

/// Posterior mean vector and pooled scalar precision from one denoising
/// step. The precision is the reciprocal of the entry-averaged posterior
/// variance, clamped like every other message precision.
#[derive(Debug, Clone)]
pub struct DenoiserResult {
    pub mean: ComplexVector,
    precision: f64,
}

impl DenoiserResult {
    fn new(mean: ComplexVector, raw_precision: f64) -> Self {
        DenoiserResult {
            mean,
            precision: raw_precision.clamp(PREC_MIN, PREC_MAX),
        }
    }

    pub fn precision(&self) -> f64 {
        self.precision
    }

    /// Repackages the result as a belief message.
    pub fn into_message(self) -> Result<GaussianMessage> {
        GaussianMessage::new(self.mean, self.precision)
    }
}

/// Scalar precision from a summed per-entry posterior variance. Shared so
/// that per-block and pooled-across-blocks callers round identically.
pub(crate) fn pooled_precision(variance_sum: f64, count: usize) -> f64 {
    1.0 / (variance_sum / count as f64)
}

/// Zero-mean isotropic complex Gaussian prior with per-entry variance
/// `sigma_x2`.
#[derive(Debug, Clone, Copy)]
pub struct GaussianPrior {
    sigma_x2: f64,
}

impl GaussianPrior {
    pub fn new(sigma_x2: f64) -> Result<Self> {
        if !(sigma_x2 > 0.0 && sigma_x2.is_finite()) {
            return Err(Error::Precondition(format!(
                "prior variance must be positive and finite, got {sigma_x2}"
            )));
        }
        Ok(GaussianPrior { sigma_x2 })
    }

    pub fn variance(&self) -> f64 {
        self.sigma_x2
    }

    /// Exact conjugate posterior under the message `N(x | r, 1/gamma)`:
    /// mean = (gamma sigma^2 / (1 + gamma sigma^2)) r, precision =
    /// 1/sigma^2 + gamma. The posterior variance does not depend on r.
    pub fn denoise(&self, r: &GaussianMessage) -> DenoiserResult {
        let gamma = r.precision();
        let shrink = gamma * self.sigma_x2 / (1.0 + gamma * self.sigma_x2);
        let mean = r.mean.iter().map(|v| shrink * v).collect();
        DenoiserResult::new(mean, 1.0 / self.sigma_x2 + gamma)
    }
}

/// Magnitude observation `y = |z + w|` with circular complex noise
/// `w ~ CN(0, 1/gamma_w)`; the conditional density of `y` given `|z|` is
/// Rician.
#[derive(Debug, Clone, Copy)]
pub struct RicianChannel {
    gamma_w: f64,
}

impl RicianChannel {
    pub fn new(gamma_w: f64) -> Result<Self> {
        if !(gamma_w > 0.0 && gamma_w.is_finite()) {
            return Err(Error::Precondition(format!(
                "noise precision must be positive and finite, got {gamma_w}"
            )));
        }
        Ok(RicianChannel { gamma_w })
    }

    pub fn noise_precision(&self) -> f64 {
        self.gamma_w
    }

    /// Entrywise posterior mean of `z` under the pseudo-prior
    /// `N(z | p, 1/tau)` and the observed magnitudes `y`, together with the
    /// SUM of per-entry posterior variances (the caller averages, possibly
    /// across several blocks).
    ///
    /// Uses the exact two-stage decomposition of the model `y = |z + w|`:
    /// let `u = z + w`, so `u ~ CN(p, nu)` with `nu = 1/tau + 1/gamma_w`.
    /// Conditioned on `y`, `u` has fixed magnitude `y` and a von Mises phase
    /// concentrated at `arg p` with `kappa = 2 y |p| / nu`, giving
    /// `E[u] = y R(kappa) e^{j arg p}` and `E[|u|^2] = y^2`. Then `z | u` is
    /// Gaussian shrinkage with gain `g = (1/tau)/nu` and conditional
    /// variance `g / gamma_w`, so
    ///
    ///   mean  = p + g (E[u] - p)
    ///   var   = g^2 y^2 (1 - R^2) + g / gamma_w   (per entry)
    pub fn posterior_stats(
        &self,
        p: &[Complex64],
        tau: f64,
        y: &[f64],
    ) -> Result<(ComplexVector, f64)> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Precondition(format!(
                "pseudo-prior precision must be positive and finite, got {tau}"
            )));
        }
        if p.len() != y.len() {
            return Err(Error::Dimension {
                what: "rician denoiser observations",
                expected: p.len(),
                got: y.len(),
            });
        }
        if y.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Precondition(
                "observed magnitudes must be finite and non-negative".into(),
            ));
        }

        let nu_p = 1.0 / tau;
        let nu_w = 1.0 / self.gamma_w;
        let nu = nu_p + nu_w;
        let g = nu_p / nu;

        let mut mean = Vec::with_capacity(p.len());
        let mut variance_sum = 0.0;
        for (pm, &ym) in p.iter().zip(y) {
            let pa = pm.norm();
            let ratio = bessel_ratio(2.0 * ym * pa / nu)?;
            // |p| = 0 has a rotationally symmetric posterior: E[u] = 0.
            let eu = if pa == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                (pm / pa) * (ym * ratio)
            };
            mean.push(pm + g * (eu - pm));
            variance_sum += g * g * ym * ym * (1.0 - ratio * ratio) + g * nu_w;
        }
        Ok((mean, variance_sum))
    }

    /// Full denoising step: posterior means plus the pooled precision
    /// `1 / mean(per-entry variance)`.
    pub fn denoise(&self, p: &GaussianMessage, y: &[f64]) -> Result<DenoiserResult> {
        let (mean, variance_sum) = self.posterior_stats(&p.mean, p.precision(), y)?;
        let precision = pooled_precision(variance_sum, y.len());
        Ok(DenoiserResult::new(mean, precision))
    }
}

/// Ratio of modified Bessel functions `R(kappa) = I1(kappa) / I0(kappa)`:
/// the shrinkage factor of circular-phase posteriors. Monotone increasing
/// from `R(0) = 0` toward 1, evaluated without overflow for any finite
/// `kappa >= 0` (the raw Bessel functions overflow near 700).
///
/// Three regimes, each validated against 40-digit references:
/// power series below 20, a Gauss continued fraction (modified Lentz) on
/// [20, 100), and the large-argument asymptotic series from 100 up.
pub fn bessel_ratio(kappa: f64) -> Result<f64> {
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(Error::Precondition(format!(
            "bessel ratio argument must be non-negative and finite, got {kappa}"
        )));
    }
    if kappa < 20.0 {
        // I0 = sum t_k, t_k = (x^2/4)^k / (k!)^2;
        // I1 = (x/2) sum s_k, s_k = (x^2/4)^k / (k! (k+1)!).
        // Terms peak near 7e6 at x = 20, so f64 accumulation is safe.
        let q = kappa * kappa / 4.0;
        let mut t = 1.0;
        let mut s = 1.0;
        let mut sum0 = 1.0;
        let mut sum1 = 1.0;
        let mut k = 1.0;
        loop {
            t *= q / (k * k);
            s *= q / (k * (k + 1.0));
            sum0 += t;
            sum1 += s;
            if t < sum0 * 1e-18 {
                break;
            }
            k += 1.0;
        }
        Ok(kappa / 2.0 * sum1 / sum0)
    } else if kappa < 100.0 {
        // Gauss continued fraction R = x / (2 + x^2/(4 + x^2/(6 + ...))),
        // evaluated by the modified Lentz algorithm.
        let x2 = kappa * kappa;
        let tiny = 1e-300;
        let mut f = tiny;
        let mut c = f;
        let mut d = 0.0;
        let mut j = 1.0;
        loop {
            let (a, b) = if j == 1.0 { (kappa, 2.0) } else { (x2, 2.0 * j) };
            d = b + a * d;
            if d == 0.0 {
                d = tiny;
            }
            c = b + a / c;
            if c == 0.0 {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
            j += 1.0;
        }
        Ok(f)
    } else {
        // R(x) ~ 1 - 1/(2x) - 1/(8x^2) - 1/(8x^3) - 25/(128x^4) - 13/(32x^5);
        // truncation error ~1e-12 at x = 100, vanishing as x grows.
        let u = 1.0 / kappa;
        Ok(1.0 - u * (0.5 + u * (0.125 + u * (0.125 + u * (25.0 / 128.0 + u * (13.0 / 32.0))))))
    }
}
