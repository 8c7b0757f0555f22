//! Sensing operators: the linear maps whose output magnitudes are observed.
//!
//! The solver only ever touches operators through [`SensingOperator`], so a
//! measurement ensemble is anything that can apply itself, apply its
//! adjoint, and describe the diagonal of its Gram matrix. Two ensembles are
//! built in — subsampled Haar frames ([`haar::HaarOperator`]) and coded
//! diffraction patterns ([`cdp::CodedDiffractionOperator`]) — plus a dense
//! reference implementation ([`dense::DenseOperator`]) that exists for tests.
//!
//! Operators are immutable after construction and safe to share across
//! threads. Each one counts its `apply`/`adjoint` invocations (atomically),
//! which is how the tests pin down the per-iteration transform budget.

pub mod cdp;
pub mod dense;
pub mod haar;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::message::ComplexVector;

/// A linear measurement operator `A : C^N -> C^M`.
pub trait SensingOperator: Send + Sync {
    /// Input dimension `N`.
    fn input_dim(&self) -> usize;

    /// Output dimension `M` of this block.
    fn output_dim(&self) -> usize;

    /// `z = A x`. Counts one application.
    fn apply(&self, x: &[Complex64]) -> Result<ComplexVector>;

    /// `v = A^H u`. Counts one application.
    fn adjoint(&self, u: &[Complex64]) -> Result<ComplexVector>;

    /// Whether `A^H A` is diagonal, enabling [`gram_diagonal`] and
    /// [`row_gram_trace`].
    ///
    /// [`gram_diagonal`]: SensingOperator::gram_diagonal
    /// [`row_gram_trace`]: SensingOperator::row_gram_trace
    fn has_diagonal_gram(&self) -> bool;

    /// The diagonal of `A^H A`, cached at construction.
    ///
    /// Errors with a capability message when the Gram matrix is not
    /// diagonal.
    fn gram_diagonal(&self) -> Result<&[f64]>;

    /// `Tr(A Q A^H)` for diagonal `Q`, via the cyclic identity
    /// `Tr(A Q A^H) = sum_i q_i (A^H A)_{ii}`.
    ///
    /// Only valid when the Gram matrix is diagonal; errors otherwise.
    fn row_gram_trace(&self, q_diag: &[f64]) -> Result<f64> {
        let gram = self.gram_diagonal()?;
        if q_diag.len() != gram.len() {
            return Err(Error::Dimension {
                what: "row_gram_trace",
                expected: gram.len(),
                got: q_diag.len(),
            });
        }
        Ok(q_diag.iter().zip(gram).map(|(q, g)| q * g).sum())
    }

    /// Number of `apply` + `adjoint` calls since construction (or the last
    /// reset). For transform-based operators this equals the number of
    /// transforms executed.
    fn call_count(&self) -> u64;

    /// Resets the call counter to zero.
    fn reset_call_count(&self);
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { what, expected, got });
    }
    Ok(())
}
