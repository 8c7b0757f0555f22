//! Sampling the built-in measurement ensembles and checking their algebra.
//!
//! Every operator exposes `apply`, `adjoint`, and the diagonal of its Gram
//! matrix; the solver needs nothing else. This example samples each family,
//! verifies the adjoint identity `<A x, u> = <x, A^H u>` numerically, shows
//! the Gram diagonal, and demonstrates the built-in transform counter.
//!
//! Run with `cargo run --example operators`.

use num_complex::Complex64;
use stovamp::sensing::cdp::sample_cdp_operators;
use stovamp::sensing::dense::DenseOperator;
use stovamp::sensing::haar::sample_haar_columns;
use stovamp::{Result, RngHandle, SensingOperator};

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn inspect(name: &str, op: &dyn SensingOperator, rng: &mut RngHandle) -> Result<()> {
    let x = rng.standard_complex_vector(op.input_dim());
    let u = rng.standard_complex_vector(op.output_dim());

    op.reset_call_count();
    let ax = op.apply(&x)?;
    let ahu = op.adjoint(&u)?;
    let lhs = inner(&ax, &u);
    let rhs = inner(&x, &ahu);
    let gram = op.gram_diagonal()?;
    let gram_min = gram.iter().cloned().fold(f64::INFINITY, f64::min);
    let gram_max = gram.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    println!("{name}");
    println!("  shape                 {} x {}", op.output_dim(), op.input_dim());
    println!("  adjoint identity      |<Ax,u> - <x,A^H u>| = {:.2e}", (lhs - rhs).norm());
    println!("  gram diagonal         in [{gram_min:.6}, {gram_max:.6}]");
    println!("  transforms counted    {}", op.call_count());
    Ok(())
}

fn main() -> Result<()> {
    let mut rng = RngHandle::new(42, 0);

    // Tall random column-orthogonal frame: A^H A = I exactly.
    let haar = sample_haar_columns(24, 16, &mut rng)?;
    inspect("haar columns (24 x 16)", &haar, &mut rng)?;

    // Coded diffraction: random phase mask then a unitary 2-D DFT.
    let cdp = sample_cdp_operators(4, 4, 2, &mut rng)?;
    for (index, op) in cdp.iter().enumerate() {
        inspect(&format!("coded diffraction block {}", index + 1), op, &mut rng)?;
    }

    // Dense reference operator: anything goes, including non-diagonal Gram.
    let rows = vec![
        Complex64::new(1.0, 0.0),
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 1.0),
        Complex64::new(-1.0, 0.0),
    ];
    let dense = DenseOperator::from_rows(2, 2, rows)?;
    println!("dense 2 x 2");
    println!("  has diagonal gram     {}", dense.has_diagonal_gram());
    match dense.gram_diagonal() {
        Ok(_) => println!("  gram diagonal         available"),
        Err(err) => println!("  gram diagonal         refused: {err}"),
    }

    Ok(())
}
