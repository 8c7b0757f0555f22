//! The three expectation-propagation primitives on hand-checked scalars.
//!
//! Everything the solvers do with beliefs reduces to these operations on
//! isotropic Gaussian messages `(mean vector, scalar precision)`:
//!
//! * `gaussian_product`  — fuse two independent views of the same quantity;
//! * `ep_extrinsic`      — divide a belief by one incoming message, leaving
//!                         what the rest of the system believes;
//! * `damped_update`     — move only a fraction of the way toward a new
//!                         message, which is what keeps the loopy iteration
//!                         from oscillating.
//!
//! Run with `cargo run --example message_passing`.

use num_complex::Complex64;
use stovamp::{damped_update, ep_extrinsic, gaussian_product, GaussianMessage, Result};

fn scalar(value: f64, precision: f64) -> Result<GaussianMessage> {
    GaussianMessage::new(vec![Complex64::new(value, 0.0)], precision)
}

fn show(label: &str, message: &GaussianMessage) {
    println!(
        "  {label:<26} mean = {:+.4}{:+.4}i   precision = {:.4e}",
        message.mean[0].re,
        message.mean[0].im,
        message.precision()
    );
}

fn main() -> Result<()> {
    println!("product of two views of the same scalar");
    // Precision-weighted average: (1*2 + 3*4) / (1+3) = 3.5, precision 4.
    let a = scalar(2.0, 1.0)?;
    let b = scalar(4.0, 3.0)?;
    let belief = gaussian_product(&a, &b)?;
    show("a", &a);
    show("b", &b);
    show("a (x) b", &belief);

    println!("\nextrinsic: dividing the belief by one factor returns the other");
    let extrinsic = ep_extrinsic(&belief, &a)?;
    show("belief / a", &extrinsic);
    assert!((extrinsic.mean[0] - b.mean[0]).norm() < 1e-12);
    assert!((extrinsic.precision() - b.precision()).abs() < 1e-12);

    println!("\nextrinsic with a *sharper* incoming message than the belief");
    // The subtraction gamma_out = eta - gamma_in would go negative here; the
    // message falls back to the belief's mean at the smallest representable
    // precision instead of leaving the Gaussian family.
    let sharp = scalar(4.0, 10.0)?;
    let clamped = ep_extrinsic(&belief, &sharp)?;
    show("belief / sharp", &clamped);
    assert_eq!(clamped.precision(), stovamp::PREC_MIN);

    println!("\ndamping: a convex step from the previous message to the raw one");
    let previous = scalar(0.0, 2.0)?;
    let raw = scalar(1.0, 6.0)?;
    for rho in [1.0, 0.5, 0.1] {
        let stepped = damped_update(&raw, &previous, rho)?;
        show(&format!("rho = {rho}"), &stepped);
    }

    println!("\nall identities held.");
    Ok(())
}
