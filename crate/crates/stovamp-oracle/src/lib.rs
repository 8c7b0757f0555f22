//! Brute-force numeric references for testing the `stovamp` solver.
//!
//! Nothing in here is fast and nothing in here is clever, on purpose. The
//! routines recompute quantities the main crate obtains in closed form, using
//! direct numeric integration or exhaustive search, and share no code with it.
//! They exist so the closed forms can be checked against something that cannot
//! be wrong in the same way.
//!
//! * [`rician_posterior`] — posterior mean and variance of a complex scalar
//!   `z` under a circular Gaussian pseudo-prior `N(z | p, 1/tau)` and a
//!   magnitude observation `y = |z + w|`, `w ~ CN(0, 1/gamma_w)`, computed by
//!   polar-grid quadrature in the log domain.
//! * [`nmse_grid`] — phase-aligned normalized squared error found by scanning
//!   a dense grid of global phases instead of using the closed-form minimizer.

use num_complex::Complex64;
use std::f64::consts::PI;

/// Grid resolution for [`rician_posterior`].
///
/// Defaults (2000 radial Gauss–Legendre nodes, 512 angular points, radial
/// window of 12 posterior standard deviations) hold quadrature error below
/// 1e-8 absolute / 1e-7 relative over the parameter ranges the tests use.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureSpec {
    /// Number of radial Gauss–Legendre nodes.
    pub radial_points: usize,
    /// Number of uniformly spaced angular points.
    pub angular_points: usize,
    /// Half-width of the radial window in posterior standard deviations.
    pub cutoff_sigmas: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            radial_points: 2000,
            angular_points: 512,
            cutoff_sigmas: 12.0,
        }
    }
}

/// Posterior moments returned by [`rician_posterior`].
#[derive(Debug, Clone, Copy)]
pub struct PosteriorMoments {
    /// E[z | y].
    pub mean: Complex64,
    /// E[|z - E[z|y]|^2 | y] (complex variance, both quadrature components).
    pub variance: f64,
}

/// Everything that can go wrong during quadrature.
#[derive(Debug)]
pub enum OracleError {
    /// A parameter violates its domain (named in the message).
    Domain(String),
    /// The integrand underflowed everywhere; enlarge the cutoff or check
    /// the parameters.
    GridUnderflow,
}

impl std::fmt::Display for OracleError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OracleError::Domain(msg) => write!(f, "domain error: {msg}"),
            OracleError::GridUnderflow => {
                write!(f, "integrand underflowed on the whole grid; increase cutoff_sigmas")
            }
        }
    }
}

impl std::error::Error for OracleError {}

/// Posterior mean and variance of `z` given `y = |z + w|` by direct quadrature.
///
/// The unnormalized posterior density over the complex plane is
///
/// ```text
/// f(z) = exp(-tau |z - p|^2) * exp(-gamma_w (y^2 + |z|^2)) * I0(2 gamma_w y |z|)
/// ```
///
/// (the Rician likelihood of `y` given `|z|`, constants in `z` dropped).
/// The integral is taken in polar coordinates: Gauss–Legendre in the radius
/// over an adaptive window, uniform midpoint rule in the angle over a full
/// period. All density evaluations happen in the log domain with a scaled
/// `log I0`, so `gamma_w` up to 1e8 and beyond is safe. The variance is
/// accumulated in a second pass around the computed mean to avoid the
/// cancellation that `E|z|^2 - |mean|^2` suffers when the posterior is narrow.
pub fn rician_posterior(
    p: Complex64,
    tau: f64,
    y: f64,
    gamma_w: f64,
    spec: &QuadratureSpec,
) -> Result<PosteriorMoments, OracleError> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(OracleError::Domain(format!("tau must be finite and > 0, got {tau}")));
    }
    if !(gamma_w > 0.0) || !gamma_w.is_finite() {
        return Err(OracleError::Domain(format!(
            "gamma_w must be finite and > 0, got {gamma_w}"
        )));
    }
    if !(y >= 0.0) || !y.is_finite() {
        return Err(OracleError::Domain(format!("y must be finite and >= 0, got {y}")));
    }
    if !p.re.is_finite() || !p.im.is_finite() {
        return Err(OracleError::Domain(format!("p must be finite, got {p}")));
    }
    if spec.radial_points < 2 || spec.angular_points < 2 {
        return Err(OracleError::Domain(
            "need at least 2 radial and 2 angular points".to_string(),
        ));
    }

    let p_abs = p.norm();
    let p_arg = if p_abs > 0.0 { p.im.atan2(p.re) } else { 0.0 };

    // Radial window from the Gaussian product of the two radial factors:
    // the likelihood concentrates near y with precision ~ gamma_w, the prior
    // near |p| with precision ~ tau. The width is padded by sqrt(2) (folded
    // into using 1/sqrt(gamma_w + tau) instead of 1/sqrt(2(gamma_w + tau)))
    // because the Bessel term flattens the likelihood curvature by up to 2x.
    let center = (gamma_w * y + tau * p_abs) / (gamma_w + tau);
    let width = 1.0 / (gamma_w + tau).sqrt();
    let lo = (center - spec.cutoff_sigmas * width).max(0.0);
    let hi = center + spec.cutoff_sigmas * width;

    let (nodes, weights) = gauss_legendre(spec.radial_points, lo, hi);

    // Angular grid: midpoint rule over one full period centered on arg(p).
    // Periodicity makes the rule spectrally accurate.
    let na = spec.angular_points;
    let dphi = 2.0 * PI / na as f64;
    let angles: Vec<f64> = (0..na)
        .map(|j| p_arg - PI + (j as f64 + 0.5) * dphi)
        .collect();
    let unit: Vec<Complex64> = angles
        .iter()
        .map(|&a| Complex64::new(a.cos(), a.sin()))
        .collect();

    // log f(s, phi) = -tau |z - p|^2 - gamma_w (y^2 + s^2) + log I0(2 gamma_w y s)
    //              = A(s) + kappa(s) cos(phi - arg p)
    // with A(s) collecting every phi-independent term.
    let mut log_a = Vec::with_capacity(nodes.len());
    let mut kappa = Vec::with_capacity(nodes.len());
    for &s in &nodes {
        let radial = -tau * (s * s + p_abs * p_abs) - gamma_w * (y * y + s * s)
            + log_bessel_i0(2.0 * gamma_w * y * s);
        log_a.push(radial);
        kappa.push(2.0 * tau * s * p_abs);
    }

    let mut log_max = f64::NEG_INFINITY;
    for (la, k) in log_a.iter().zip(&kappa) {
        // cos attains 1 somewhere on the full-period grid (up to grid spacing),
        // so la + k bounds the cell maxima well enough for scaling.
        let bound = la + k;
        if bound > log_max {
            log_max = bound;
        }
    }
    if !log_max.is_finite() {
        return Err(OracleError::GridUnderflow);
    }

    // First pass: normalizer and mean.
    let mut z_sum = 0.0;
    let mut mean_sum = Complex64::new(0.0, 0.0);
    for (i, &s) in nodes.iter().enumerate() {
        let radial_w = s * weights[i] * dphi;
        for (j, u) in unit.iter().enumerate() {
            let cosd = (angles[j] - p_arg).cos();
            let f = (log_a[i] + kappa[i] * cosd - log_max).exp() * radial_w;
            z_sum += f;
            mean_sum += u * (s * f);
        }
    }
    if z_sum <= 0.0 {
        return Err(OracleError::GridUnderflow);
    }
    let mean = mean_sum / z_sum;

    // Second pass: central variance.
    let mut var_sum = 0.0;
    for (i, &s) in nodes.iter().enumerate() {
        let radial_w = s * weights[i] * dphi;
        for (j, u) in unit.iter().enumerate() {
            let cosd = (angles[j] - p_arg).cos();
            let f = (log_a[i] + kappa[i] * cosd - log_max).exp() * radial_w;
            let dz = u * s - mean;
            var_sum += dz.norm_sqr() * f;
        }
    }

    Ok(PosteriorMoments { mean, variance: var_sum / z_sum })
}

/// Phase-aligned NMSE by exhaustive search over a uniform grid of global
/// phases:
///
/// ```text
/// min_theta ||x - e^{i theta} xhat||^2 / ||x||^2
/// ```
///
/// The raw grid minimum carries a quantization error of up to
/// `(pi/n_theta)^2 |<x, xhat>| / ||x||^2`, which for overlapping pairs can
/// sit just above 1e-8 at 1e4 points. Since the objective is exactly a
/// sinusoid in theta, one parabolic interpolation through the winning grid
/// point and its two neighbours collapses that error to the 1e-15 level;
/// the objective at the refined angle is still evaluated by direct vector
/// arithmetic, so the search never consults the closed form it exists to
/// check. The returned value is the smaller of the raw grid minimum and the
/// refined evaluation, hence always a valid upper bound on the true
/// minimum.
pub fn nmse_grid(x: &[Complex64], xhat: &[Complex64], n_theta: usize) -> f64 {
    assert_eq!(x.len(), xhat.len(), "length mismatch");
    assert!(!x.is_empty(), "empty input");
    assert!(n_theta > 0, "need at least one phase");
    let norm_x: f64 = x.iter().map(|v| v.norm_sqr()).sum();
    assert!(norm_x > 0.0, "reference vector must be nonzero");

    let objective = |theta: f64| -> f64 {
        let rot = Complex64::new(theta.cos(), theta.sin());
        x.iter()
            .zip(xhat)
            .map(|(a, b)| (a - rot * b).norm_sqr())
            .sum()
    };

    let h = 2.0 * PI / n_theta as f64;
    let mut best = f64::INFINITY;
    let mut best_k = 0usize;
    for k in 0..n_theta {
        let err = objective(h * k as f64);
        if err < best {
            best = err;
            best_k = k;
        }
    }

    // Parabola through (theta_b - h, theta_b, theta_b + h); its vertex
    // nails the sinusoid's minimum to far beyond the grid resolution.
    let theta_b = h * best_k as f64;
    let f_minus = objective(theta_b - h);
    let f_plus = objective(theta_b + h);
    let denom = f_minus - 2.0 * best + f_plus;
    if denom > 0.0 && denom.is_finite() {
        let refined = objective(theta_b + 0.5 * h * (f_minus - f_plus) / denom);
        if refined < best {
            best = refined;
        }
    }
    best / norm_x
}

/// log I0(x) for x >= 0 without overflow.
///
/// Power series below 40 (far from f64 overflow, which starts near x = 713);
/// for larger arguments the scaled asymptotic series
/// `I0(x) ~ e^x / sqrt(2 pi x) * (1 + 1/(8x) + 9/(128x^2) + ...)`,
/// whose truncation error is below 2e-10 everywhere past the switch.
fn log_bessel_i0(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 40.0 {
        // I0(x) = sum_j (x^2/4)^j / (j!)^2, at most ~1.5e16 here: no overflow.
        let q = x * x / 4.0;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut j = 0u32;
        loop {
            j += 1;
            term *= q / ((j as f64) * (j as f64));
            sum += term;
            if term < 1e-18 * sum && j > 4 {
                break;
            }
        }
        sum.ln()
    } else {
        let u = 1.0 / x;
        let corr = 1.0
            + u * (0.125
                + u * (9.0 / 128.0 + u * (75.0 / 1024.0 + u * (3675.0 / 32768.0 + u * 59535.0 / 262144.0))));
        x - 0.5 * (2.0 * PI * x).ln() + corr.ln()
    }
}

/// Gauss–Legendre nodes and weights on `[a, b]`.
///
/// Newton iteration on P_n with the usual Chebyshev-like initial guesses;
/// nodes converge in a handful of steps to machine precision.
fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n(x) and P_n'(x) by the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Symmetric pair: x and -x share the weight.
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    for i in 0..n {
        nodes[i] = mid + half * nodes[i];
        weights[i] *= half;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        // 5 nodes integrate degree <= 9 exactly.
        let (x, w) = gauss_legendre(5, 0.0, 2.0);
        let integral: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * xi.powi(9)).sum();
        let exact = 2.0_f64.powi(10) / 10.0;
        assert!((integral - exact).abs() < 1e-10 * exact);

        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-13);
    }

    #[test]
    fn log_i0_matches_series_and_scales() {
        // Frozen from a 40-digit evaluation: I0(1) = 1.266065877752008335598.
        assert!((log_bessel_i0(1.0) - 1.266065877752008335598_f64.ln()).abs() < 1e-14);
        // Both sides of the series/asymptotic switch at 40, against frozen
        // 40-digit references.
        let below = log_bessel_i0(39.999999);
        assert!((below - 37.23978587393251567119).abs() < 1e-10, "series branch: {below}");
        let above = log_bessel_i0(40.000001);
        assert!((above - 37.23978784877219834389).abs() < 1e-9, "asymptotic branch: {above}");
        // Large argument: log I0(x) ~ x - log(2 pi x)/2.
        let x = 1e8;
        let approx = x - 0.5 * (2.0 * PI * x).ln();
        assert!((log_bessel_i0(x) - approx).abs() < 1e-6);
    }

    #[test]
    fn zero_pseudo_prior_mean_gives_zero_posterior_mean() {
        // p = 0 makes the posterior circularly symmetric, so the mean is 0.
        let m = rician_posterior(Complex64::new(0.0, 0.0), 1.0, 1.5, 10.0, &QuadratureSpec::default())
            .unwrap();
        assert!(m.mean.norm() < 1e-12, "mean = {}", m.mean);
        assert!(m.variance > 0.0);
    }

    #[test]
    fn gaussian_limit_at_zero_observation() {
        // y = 0 pins z + w at the origin: the posterior is the Gaussian product
        // of N(p, 1/tau) and N(0, 1/gamma_w), known in closed form.
        let p = Complex64::new(0.8, -0.3);
        let (tau, gw) = (2.0, 5.0);
        let m = rician_posterior(p, tau, 0.0, gw, &QuadratureSpec::default()).unwrap();
        let expect_mean = p * (tau / (tau + gw));
        let expect_var = 1.0 / (tau + gw);
        assert!((m.mean - expect_mean).norm() < 1e-10);
        assert!((m.variance - expect_var).abs() < 1e-10);
    }

    #[test]
    fn noiseless_limit_concentrates_on_the_circle() {
        // gamma_w = 1e8, p = 1, tau = 1, y = 2: |mean| -> y * R(2 y |p| tau)
        // where R is the Bessel ratio; R(4) frozen from a 40-digit evaluation.
        let r4 = 0.8635226110245505828546;
        let m = rician_posterior(Complex64::new(1.0, 0.0), 1.0, 2.0, 1e8, &QuadratureSpec::default())
            .unwrap();
        let expected = 2.0 * r4;
        assert!(
            (m.mean.norm() - expected).abs() < 1e-3 * expected,
            "|mean| = {}, expected ~ {expected}",
            m.mean.norm()
        );
        // The mean keeps the pseudo-prior's phase (arg p = 0).
        assert!(m.mean.im.abs() < 1e-9);
    }

    #[test]
    fn grid_doubling_is_stable_on_representative_points() {
        // Doubling both resolutions moves the moments by < 1e-8 on points
        // spanning the regimes (wide/narrow posterior, on/off the origin).
        let pts = [
            (Complex64::new(0.0, 0.0), 0.1, 0.0, 1.0),
            (Complex64::new(0.1, 0.07), 1.0, 0.5, 100.0),
            (Complex64::new(-0.4, 0.9), 10.0, 3.0, 1e4),
            (Complex64::new(3.0, -4.0), 0.1, 3.0, 1.0),
            (Complex64::new(1.0, 0.0), 1.0, 2.0, 1e6),
        ];
        let base = QuadratureSpec::default();
        let fine = QuadratureSpec {
            radial_points: base.radial_points * 2,
            angular_points: base.angular_points * 2,
            cutoff_sigmas: base.cutoff_sigmas,
        };
        for &(p, tau, y, gw) in &pts {
            let a = rician_posterior(p, tau, y, gw, &base).unwrap();
            let b = rician_posterior(p, tau, y, gw, &fine).unwrap();
            assert!(
                (a.mean - b.mean).norm() < 1e-8,
                "mean moved {} at {p} {tau} {y} {gw}",
                (a.mean - b.mean).norm()
            );
            assert!(
                (a.variance - b.variance).abs() < 1e-8,
                "variance moved {} at {p} {tau} {y} {gw}",
                (a.variance - b.variance).abs()
            );
        }
    }

    #[test]
    fn rejects_bad_domains() {
        let spec = QuadratureSpec::default();
        let p = Complex64::new(1.0, 0.0);
        assert!(rician_posterior(p, 0.0, 1.0, 1.0, &spec).is_err());
        assert!(rician_posterior(p, 1.0, -1.0, 1.0, &spec).is_err());
        assert!(rician_posterior(p, 1.0, 1.0, f64::NAN, &spec).is_err());
    }

    #[test]
    fn nmse_grid_basics() {
        let x = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 2.0)];
        // Identical vectors: zero error at theta = 0.
        assert!(nmse_grid(&x, &x, 1000) < 1e-12);
        // A pure global phase is removed up to grid resolution.
        let rot = Complex64::from_polar(1.0, 1.234);
        let xr: Vec<_> = x.iter().map(|v| v * rot).collect();
        assert!(nmse_grid(&x, &xr, 10_000) < 1e-6);
        // Scaling by c leaves (1-c)^2.
        let xs: Vec<_> = x.iter().map(|v| v * 0.5).collect();
        assert!((nmse_grid(&x, &xs, 10_000) - 0.25).abs() < 1e-7);
    }
}
