//! Isotropic complex Gaussian messages and the three operations the message
//! passing loop is built from: density product, extrinsic (cavity) division,
//! and damped commit.
//!
//! A message `N(x | r, gamma^{-1} I)` has density proportional to
//! `exp(-gamma ||x - r||^2)`, so `gamma` is the reciprocal of the per-entry
//! complex variance (real and imaginary parts carry `1/(2 gamma)` each).
//! Every message keeps a full mean vector but a single scalar precision —
//! the algorithms here never need anisotropic covariances.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Ordered complex entries; the one vector type used throughout.
pub type ComplexVector = Vec<Complex64>;

/// Real-valued data such as magnitude observations or Gram diagonals.
pub type RealVector = Vec<f64>;

/// Smallest precision a message may carry. Extrinsic precisions that come
/// out zero or negative are pinned here instead of propagating garbage.
pub const PREC_MIN: f64 = 1e-11;

/// Largest precision a message may carry; keeps reciprocals representable.
pub const PREC_MAX: f64 = 1e11;

/// An isotropic circular-Gaussian belief or message over a complex vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMessage {
    /// Mean vector.
    pub mean: ComplexVector,
    /// Scalar precision, always inside `[PREC_MIN, PREC_MAX]`.
    precision: f64,
}

impl GaussianMessage {
    /// Builds a message, clamping the precision into `[PREC_MIN, PREC_MAX]`.
    ///
    /// Errors on an empty mean, a non-finite mean entry, or a NaN precision.
    pub fn new(mean: ComplexVector, precision: f64) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::Precondition("message mean must be non-empty".into()));
        }
        if mean.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Precondition("message mean must be finite".into()));
        }
        if precision.is_nan() {
            return Err(Error::Precondition("message precision is NaN".into()));
        }
        Ok(GaussianMessage {
            mean,
            precision: precision.clamp(PREC_MIN, PREC_MAX),
        })
    }

    /// Scalar precision (guaranteed within the clamp bounds).
    pub fn precision(&self) -> f64 {
        self.precision
    }

    /// Number of entries.
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    /// Always false: construction rejects empty means.
    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

/// Product of two Gaussian densities over the same vector.
///
/// Precisions add; the mean is the precision-weighted average:
///
/// ```text
/// gamma = gamma_a + gamma_b
/// mean  = (gamma_a r_a + gamma_b r_b) / gamma
/// ```
pub fn gaussian_product(a: &GaussianMessage, b: &GaussianMessage) -> Result<GaussianMessage> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            what: "gaussian_product",
            expected: a.len(),
            got: b.len(),
        });
    }
    let ga = a.precision;
    let gb = b.precision;
    let g = ga + gb;
    let mean = a
        .mean
        .iter()
        .zip(&b.mean)
        .map(|(ma, mb)| (ma * ga + mb * gb) / g)
        .collect();
    GaussianMessage::new(mean, g)
}

/// Extrinsic (cavity) message: divides an incoming message out of a belief.
///
/// Given a belief `(xhat, eta)` formed as `incoming x likelihood`, returns
/// the message the likelihood alone contributes:
///
/// ```text
/// gamma_out = eta - gamma_in
/// r_out     = (eta xhat - gamma_in r_in) / gamma_out
/// ```
///
/// When the raw precision is zero or negative — the belief is no sharper
/// than what came in — the output precision pins to `PREC_MIN` and the
/// belief mean is carried forward unchanged, so downstream steps still see
/// a sensible (if uninformative) message.
pub fn ep_extrinsic(belief: &GaussianMessage, incoming: &GaussianMessage) -> Result<GaussianMessage> {
    if belief.len() != incoming.len() {
        return Err(Error::Dimension {
            what: "ep_extrinsic",
            expected: belief.len(),
            got: incoming.len(),
        });
    }
    let eta = belief.precision;
    let gamma = incoming.precision;
    let raw = eta - gamma;
    if raw <= 0.0 {
        return GaussianMessage::new(belief.mean.clone(), PREC_MIN);
    }
    let mean = belief
        .mean
        .iter()
        .zip(&incoming.mean)
        .map(|(xb, xi)| (xb * eta - xi * gamma) / raw)
        .collect();
    GaussianMessage::new(mean, raw)
}

/// Damped commit of a raw message against its previous value:
///
/// ```text
/// mean = rho raw.mean + (1 - rho) old.mean
/// prec = rho raw.prec + (1 - rho) old.prec
/// ```
///
/// `rho` must lie in `(0, 1]`; `rho = 1` reproduces the raw message.
pub fn damped_update(raw: &GaussianMessage, old: &GaussianMessage, rho: f64) -> Result<GaussianMessage> {
    if raw.len() != old.len() {
        return Err(Error::Dimension {
            what: "damped_update",
            expected: raw.len(),
            got: old.len(),
        });
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::Precondition(format!(
            "damping factor must be in (0, 1], got {rho}"
        )));
    }
    let keep = 1.0 - rho;
    let mean = raw
        .mean
        .iter()
        .zip(&old.mean)
        .map(|(r, o)| r * rho + o * keep)
        .collect();
    GaussianMessage::new(mean, rho * raw.precision + keep * old.precision)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg(mean: &[Complex64], prec: f64) -> GaussianMessage {
        GaussianMessage::new(mean.to_vec(), prec).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn product_weights_means_by_precision() {
        // (mean 2i, prec 3) x (mean 0, prec 1) -> (mean 1.5i, prec 4)
        let a = msg(&[c(0.0, 2.0)], 3.0);
        let b = msg(&[c(0.0, 0.0)], 1.0);
        let p = gaussian_product(&a, &b).unwrap();
        assert_eq!(p.precision(), 4.0);
        assert!((p.mean[0] - c(0.0, 1.5)).norm() < 1e-15);
    }

    #[test]
    fn extrinsic_then_product_recovers_belief() {
        let belief = msg(&[c(0.0, 1.5), c(2.0, -1.0)], 4.0);
        let incoming = msg(&[c(0.0, 2.0), c(1.0, 0.5)], 3.0);
        let ext = ep_extrinsic(&belief, &incoming).unwrap();
        assert!((ext.precision() - 1.0).abs() < 1e-12);
        assert!((ext.mean[0] - c(0.0, 0.0)).norm() < 1e-12);
        let back = gaussian_product(&ext, &incoming).unwrap();
        assert!((back.precision() - belief.precision()).abs() < 1e-10 * belief.precision());
        for (a, b) in back.mean.iter().zip(&belief.mean) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn extrinsic_simple_case() {
        // eta = 2, xhat = 1, gamma = 1, r = 0 -> (mean 2, prec 1)
        let belief = msg(&[c(1.0, 0.0)], 2.0);
        let incoming = msg(&[c(0.0, 0.0)], 1.0);
        let ext = ep_extrinsic(&belief, &incoming).unwrap();
        assert_eq!(ext.precision(), 1.0);
        assert!((ext.mean[0] - c(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn extrinsic_pins_nonpositive_precision_and_keeps_belief_mean() {
        // eta == gamma: raw precision 0.
        let belief = msg(&[c(0.5, -0.5)], 1.0);
        let incoming = msg(&[c(9.0, 9.0)], 1.0);
        let ext = ep_extrinsic(&belief, &incoming).unwrap();
        assert_eq!(ext.precision(), PREC_MIN);
        assert_eq!(ext.mean, belief.mean);

        // eta < gamma: raw precision negative.
        let belief = msg(&[c(1.0, 0.0)], 1.0);
        let incoming = msg(&[c(0.0, 0.0)], 5.0);
        let ext = ep_extrinsic(&belief, &incoming).unwrap();
        assert_eq!(ext.precision(), PREC_MIN);
        assert_eq!(ext.mean, belief.mean);
    }

    #[test]
    fn damping_blends_and_is_identity_at_one() {
        let raw = msg(&[c(2.0, 0.0)], 4.0);
        let old = msg(&[c(0.0, 0.0)], 2.0);
        let half = damped_update(&raw, &old, 0.5).unwrap();
        assert!((half.precision() - 3.0).abs() < 1e-15);
        assert!((half.mean[0] - c(1.0, 0.0)).norm() < 1e-15);

        let id = damped_update(&raw, &old, 1.0).unwrap();
        assert_eq!(id.precision(), raw.precision());
        assert_eq!(id.mean, raw.mean);
    }

    #[test]
    fn construction_clamps_and_validates() {
        let m = msg(&[c(1.0, 0.0)], 1e300);
        assert_eq!(m.precision(), PREC_MAX);
        let m = msg(&[c(1.0, 0.0)], 0.0);
        assert_eq!(m.precision(), PREC_MIN);

        assert!(GaussianMessage::new(vec![], 1.0).is_err());
        assert!(GaussianMessage::new(vec![c(f64::NAN, 0.0)], 1.0).is_err());
        assert!(GaussianMessage::new(vec![c(1.0, 0.0)], f64::NAN).is_err());
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let a = msg(&[c(1.0, 0.0)], 1.0);
        let b = msg(&[c(1.0, 0.0), c(0.0, 1.0)], 1.0);
        assert!(gaussian_product(&a, &b).is_err());
        assert!(ep_extrinsic(&a, &b).is_err());
        assert!(damped_update(&a, &b, 0.5).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn finite_c() -> impl Strategy<Value = Complex64> {
            (-1e6..1e6f64, -1e6..1e6f64).prop_map(|(re, im)| Complex64::new(re, im))
        }

        proptest! {
            #[test]
            fn product_commutes(
                ma in finite_c(), mb in finite_c(),
                ga in 1e-6..1e6f64, gb in 1e-6..1e6f64,
            ) {
                let a = GaussianMessage::new(vec![ma], ga).unwrap();
                let b = GaussianMessage::new(vec![mb], gb).unwrap();
                let ab = gaussian_product(&a, &b).unwrap();
                let ba = gaussian_product(&b, &a).unwrap();
                prop_assert!((ab.precision() - ba.precision()).abs()
                    <= 1e-12 * ab.precision());
                prop_assert!((ab.mean[0] - ba.mean[0]).norm()
                    <= 1e-12 * (1.0 + ab.mean[0].norm()));
            }

            #[test]
            fn product_associates(
                ma in finite_c(), mb in finite_c(), mc in finite_c(),
                ga in 1e-3..1e3f64, gb in 1e-3..1e3f64, gc in 1e-3..1e3f64,
            ) {
                let a = GaussianMessage::new(vec![ma], ga).unwrap();
                let b = GaussianMessage::new(vec![mb], gb).unwrap();
                let c3 = GaussianMessage::new(vec![mc], gc).unwrap();
                let left = gaussian_product(&gaussian_product(&a, &b).unwrap(), &c3).unwrap();
                let right = gaussian_product(&a, &gaussian_product(&b, &c3).unwrap()).unwrap();
                prop_assert!((left.precision() - right.precision()).abs()
                    <= 1e-12 * left.precision());
                prop_assert!((left.mean[0] - right.mean[0]).norm()
                    <= 1e-9 * (1.0 + left.mean[0].norm()));
            }

            #[test]
            fn extrinsic_inverts_product(
                mi in finite_c(), mx in finite_c(),
                gi in 1e-3..1e3f64, dg in 1e-3..1e3f64,
            ) {
                // Build a belief strictly sharper than the incoming message,
                // divide the incoming back out, and recover the belief.
                let incoming = GaussianMessage::new(vec![mi], gi).unwrap();
                let belief = GaussianMessage::new(vec![mx], gi + dg).unwrap();
                let ext = ep_extrinsic(&belief, &incoming).unwrap();
                let back = gaussian_product(&ext, &incoming).unwrap();
                prop_assert!((back.precision() - belief.precision()).abs()
                    <= 1e-10 * belief.precision());
                prop_assert!((back.mean[0] - belief.mean[0]).norm()
                    <= 1e-7 * (1.0 + belief.mean[0].norm()));
            }

            #[test]
            fn damped_precision_stays_clamped(
                m in finite_c(), g1 in 1e-12..1e12f64, g2 in 1e-12..1e12f64,
                rho in 0.01..1.0f64,
            ) {
                let raw = GaussianMessage::new(vec![m], g1).unwrap();
                let old = GaussianMessage::new(vec![m], g2).unwrap();
                let d = damped_update(&raw, &old, rho).unwrap();
                prop_assert!(d.precision() >= PREC_MIN && d.precision() <= PREC_MAX);
            }
        }
    }
}
