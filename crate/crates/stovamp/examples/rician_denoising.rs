//! Posterior statistics of the magnitude-observation channel.
//!
//! The measurement-side denoiser answers one question: given a Gaussian
//! pseudo-prior `z ~ CN(p, 1/tau)` and an observed magnitude `y = |z + w|`,
//! what are the posterior mean and variance of `z`? This example sweeps the
//! interesting regimes — confident and vague pseudo-priors, clean and noisy
//! channels — and prints how the posterior interpolates between trusting
//! the magnitude and trusting the prior.
//!
//! Run with `cargo run --example rician_denoising`.

use num_complex::Complex64;
use stovamp::{bessel_ratio, Result, RicianChannel};

fn main() -> Result<()> {
    // One pseudo-prior mean of magnitude 1 at a 30-degree phase.
    let phase = 30f64.to_radians();
    let p = vec![Complex64::new(phase.cos(), phase.sin())];
    let observed = 1.4; // the channel says |z + w| was larger than |p|

    println!("pseudo-prior p = {:.3}{:+.3}i, observed magnitude y = {observed}", p[0].re, p[0].im);
    println!();
    println!("{:>10} {:>10} | {:>22} {:>12}", "tau", "gamma_w", "posterior mean", "variance");
    for &tau in &[0.1, 10.0, 1000.0] {
        for &gamma_w in &[1.0, 100.0, 10000.0] {
            let channel = RicianChannel::new(gamma_w)?;
            let (mean, var_sum) = channel.posterior_stats(&p, tau, &[observed])?;
            println!(
                "{tau:>10.1} {gamma_w:>10.0} | {:>10.4}{:+.4}i {:>12.3e}",
                mean[0].re, mean[0].im, var_sum
            );
        }
    }
    println!();
    println!("reading the table:");
    println!("  confident prior + noisy channel  (tau=1000, gamma_w=1)   -> mean stays at p");
    println!("  confident prior + clean channel  (tau=1000, gamma_w=1e4) -> magnitude snaps to y");
    println!("  vague prior (tau=0.1)                                    -> mean shrinks toward 0:");
    println!("      the magnitude is known but there is no phase to hang it on.");
    println!("  The posterior phase always equals the pseudo-prior phase; only the");
    println!("  magnitude is negotiated between p and y.");

    // The shrinkage behind the interpolation is the Bessel ratio
    // R(kappa) = I1(kappa)/I0(kappa): 0 for a useless magnitude, 1 for a
    // perfectly informative one.
    println!();
    println!("{:>10} {:>10}", "kappa", "R(kappa)");
    for &kappa in &[0.0, 0.5, 2.0, 20.0, 200.0] {
        println!("{kappa:>10.1} {:>10.6}", bessel_ratio(kappa)?);
    }
    Ok(())
}
