//! Dense matrix operator with an explicitly stored matrix. Meant for small
//! problems, custom measurement designs, and as a reference implementation
//! the fast operators are checked against.

use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64;

use super::{check_len, SensingOperator};
use crate::error::{Error, Result};
use crate::message::ComplexVector;

/// Off-diagonal Gram entries below this (relative to the diagonal scale)
/// count as zero when deciding whether `A^H A` is diagonal.
const GRAM_OFF_DIAGONAL_TOL: f64 = 1e-12;

/// An `M x N` operator stored row-major. `A^H A` is computed once at
/// construction; if it is diagonal the operator advertises the diagonal-Gram
/// capability that the fast linear estimator relies on.
pub struct DenseOperator {
    m: usize,
    n: usize,
    rows: Vec<Complex64>,
    gram: Option<Vec<f64>>,
    calls: AtomicU64,
}

impl DenseOperator {
    /// Builds the operator from `m` rows of length `n`, flattened row-major.
    pub fn from_rows(m: usize, n: usize, rows: Vec<Complex64>) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::Precondition(format!(
                "dense operator needs m, n >= 1, got {m} x {n}"
            )));
        }
        check_len("dense operator entries", m * n, rows.len())?;
        if rows.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Precondition(
                "dense operator entries must be finite".into(),
            ));
        }
        let gram = diagonal_gram(&rows, m, n);
        Ok(DenseOperator {
            m,
            n,
            rows,
            gram,
            calls: AtomicU64::new(0),
        })
    }

    /// Square operator with the given diagonal and zeros elsewhere.
    pub fn from_diagonal(diag: &[Complex64]) -> Result<Self> {
        let n = diag.len();
        let mut rows = vec![Complex64::new(0.0, 0.0); n * n];
        for (i, d) in diag.iter().enumerate() {
            rows[i * n + i] = *d;
        }
        Self::from_rows(n, n, rows)
    }

    /// The `N x N` identity.
    pub fn identity(n: usize) -> Result<Self> {
        Self::from_diagonal(&vec![Complex64::new(1.0, 0.0); n])
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.rows[i * self.n + j]
    }
}

/// Returns `diag(A^H A)` if the Gram matrix is diagonal, `None` otherwise.
fn diagonal_gram(rows: &[Complex64], m: usize, n: usize) -> Option<Vec<f64>> {
    let mut diag = vec![0.0; n];
    for j in 0..n {
        diag[j] = (0..m).map(|i| rows[i * n + j].norm_sqr()).sum();
    }
    let scale = diag.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
    for j in 0..n {
        for k in (j + 1)..n {
            let off: Complex64 = (0..m)
                .map(|i| rows[i * n + j].conj() * rows[i * n + k])
                .sum();
            if off.norm() > GRAM_OFF_DIAGONAL_TOL * scale {
                return None;
            }
        }
    }
    Some(diag)
}

impl SensingOperator for DenseOperator {
    fn input_dim(&self) -> usize {
        self.n
    }

    fn output_dim(&self) -> usize {
        self.m
    }

    fn apply(&self, x: &[Complex64]) -> Result<ComplexVector> {
        check_len("dense apply", self.n, x.len())?;
        self.calls.fetch_add(1, Ordering::Relaxed);
        let out = self
            .rows
            .chunks_exact(self.n)
            .map(|row| row.iter().zip(x).map(|(a, v)| a * v).sum())
            .collect();
        Ok(out)
    }

    fn adjoint(&self, u: &[Complex64]) -> Result<ComplexVector> {
        check_len("dense adjoint", self.m, u.len())?;
        self.calls.fetch_add(1, Ordering::Relaxed);
        let mut out = vec![Complex64::new(0.0, 0.0); self.n];
        for (row, ui) in self.rows.chunks_exact(self.n).zip(u) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a.conj() * ui;
            }
        }
        Ok(out)
    }

    fn has_diagonal_gram(&self) -> bool {
        self.gram.is_some()
    }

    fn gram_diagonal(&self) -> Result<&[f64]> {
        self.gram.as_deref().ok_or(Error::Capability(
            "dense operator has a non-diagonal A^H A; the fast linear \
             estimator needs orthogonal columns",
        ))
    }

    fn call_count(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    fn reset_call_count(&self) {
        self.calls.store(0, Ordering::Relaxed);
    }
}
