//! Coded diffraction patterns: random phase mask followed by a unitary 2D
//! discrete Fourier transform.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{check_len, SensingOperator};
use crate::error::{Error, Result};
use crate::message::ComplexVector;
use crate::rng::RngHandle;

/// `A = F P`: a diagonal unit-modulus phase mask `P` followed by the unitary
/// 2D DFT `F` (scaled by `1/sqrt(N)`), on row-major `H x W` images flattened
/// to length `N = H W`. Square (`A^H A = I`) and applied in `O(N log N)`.
///
/// One `apply` or `adjoint` costs exactly one 2D transform, so the call
/// counter doubles as a transform counter.
pub struct CodedDiffractionOperator {
    height: usize,
    width: usize,
    n: usize,
    /// Unit-modulus mask entries, row-major.
    mask: Vec<Complex64>,
    fwd_w: Arc<dyn Fft<f64>>,
    fwd_h: Arc<dyn Fft<f64>>,
    inv_w: Arc<dyn Fft<f64>>,
    inv_h: Arc<dyn Fft<f64>>,
    gram: Vec<f64>,
    calls: AtomicU64,
}

/// Samples `l` independent coded diffraction operators on `height x width`
/// images. Mask phases are i.i.d. uniform on `[0, 2 pi)`.
pub fn sample_cdp_operators(
    height: usize,
    width: usize,
    l: usize,
    rng: &mut RngHandle,
) -> Result<Vec<CodedDiffractionOperator>> {
    if height == 0 || width == 0 || l == 0 {
        return Err(Error::Precondition(format!(
            "coded diffraction needs height, width, l >= 1, got {height} x {width}, l = {l}"
        )));
    }
    let mut planner = FftPlanner::new();
    let fwd_w = planner.plan_fft_forward(width);
    let fwd_h = planner.plan_fft_forward(height);
    let inv_w = planner.plan_fft_inverse(width);
    let inv_h = planner.plan_fft_inverse(height);

    let n = height * width;
    let mut ops = Vec::with_capacity(l);
    for _ in 0..l {
        let mask: Vec<Complex64> = (0..n)
            .map(|_| {
                let phi = rng.uniform_phase();
                Complex64::new(phi.cos(), phi.sin())
            })
            .collect();
        ops.push(CodedDiffractionOperator {
            height,
            width,
            n,
            mask,
            fwd_w: fwd_w.clone(),
            fwd_h: fwd_h.clone(),
            inv_w: inv_w.clone(),
            inv_h: inv_h.clone(),
            gram: vec![1.0; n],
            calls: AtomicU64::new(0),
        });
    }
    Ok(ops)
}

impl CodedDiffractionOperator {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Mask entry at flat index `i` (row-major).
    pub fn mask_entry(&self, i: usize) -> Complex64 {
        self.mask[i]
    }

    /// In-place 2D transform: length-`width` transforms over rows, then
    /// length-`height` transforms over columns (via transposes), then the
    /// unitary `1/sqrt(N)` scaling.
    fn transform_2d(&self, buf: &mut [Complex64], inverse: bool) {
        let (row_fft, col_fft) = if inverse {
            (&self.inv_w, &self.inv_h)
        } else {
            (&self.fwd_w, &self.fwd_h)
        };
        let mut scratch =
            vec![Complex64::new(0.0, 0.0); row_fft.get_inplace_scratch_len().max(col_fft.get_inplace_scratch_len())];
        row_fft.process_with_scratch(buf, &mut scratch[..row_fft.get_inplace_scratch_len()]);

        let mut t = transpose(buf, self.height, self.width);
        col_fft.process_with_scratch(&mut t, &mut scratch[..col_fft.get_inplace_scratch_len()]);
        let back = transpose(&t, self.width, self.height);
        buf.copy_from_slice(&back);

        let scale = 1.0 / (self.n as f64).sqrt();
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }
}

/// Out-of-place transpose of a row-major `rows x cols` buffer.
fn transpose(src: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut dst = vec![Complex64::new(0.0, 0.0); src.len()];
    for i in 0..rows {
        for j in 0..cols {
            dst[j * rows + i] = src[i * cols + j];
        }
    }
    dst
}

impl SensingOperator for CodedDiffractionOperator {
    fn input_dim(&self) -> usize {
        self.n
    }

    fn output_dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[Complex64]) -> Result<ComplexVector> {
        check_len("cdp apply", self.n, x.len())?;
        self.calls.fetch_add(1, Ordering::Relaxed);
        let mut buf: Vec<Complex64> = self.mask.iter().zip(x).map(|(m, v)| m * v).collect();
        self.transform_2d(&mut buf, false);
        Ok(buf)
    }

    fn adjoint(&self, u: &[Complex64]) -> Result<ComplexVector> {
        check_len("cdp adjoint", self.n, u.len())?;
        self.calls.fetch_add(1, Ordering::Relaxed);
        // A^H = P^H F^H; the unitary inverse transform is the adjoint of the
        // unitary forward one (the unnormalized inverse divided by sqrt(N)).
        let mut buf = u.to_vec();
        self.transform_2d(&mut buf, true);
        for (v, m) in buf.iter_mut().zip(&self.mask) {
            *v *= m.conj();
        }
        Ok(buf)
    }

    fn has_diagonal_gram(&self) -> bool {
        true
    }

    fn gram_diagonal(&self) -> Result<&[f64]> {
        Ok(&self.gram)
    }

    fn call_count(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    fn reset_call_count(&self) {
        self.calls.store(0, Ordering::Relaxed);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn impulse_spreads_to_flat_magnitude() {
        // A unit impulse at pixel 0 picks up one mask phase and transforms
        // to a flat spectrum: every |z| = 1/sqrt(N).
        let mut rng = RngHandle::new(11, 0);
        let op = sample_cdp_operators(8, 4, 1, &mut rng).unwrap().remove(0);
        let mut x = vec![Complex64::new(0.0, 0.0); 32];
        x[0] = Complex64::new(1.0, 0.0);
        let z = op.apply(&x).unwrap();
        let expect = 1.0 / 32f64.sqrt();
        for v in &z {
            assert!((v.norm() - expect).abs() < 1e-12, "|z| = {}", v.norm());
        }
    }

    #[test]
    fn transform_is_unitary() {
        let mut rng = RngHandle::new(12, 0);
        let op = sample_cdp_operators(8, 16, 1, &mut rng).unwrap().remove(0);
        let x = rng.standard_complex_vector(128);
        let z = op.apply(&x).unwrap();
        let nx: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        let nz: f64 = z.iter().map(|v| v.norm_sqr()).sum();
        assert!((nx - nz).abs() < 1e-10 * nx);

        // A^H A x = x.
        let back = op.adjoint(&z).unwrap();
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn adjoint_matches_apply() {
        let mut rng = RngHandle::new(13, 0);
        let op = sample_cdp_operators(4, 6, 1, &mut rng).unwrap().remove(0);
        for _ in 0..25 {
            let x = rng.standard_complex_vector(24);
            let u = rng.standard_complex_vector(24);
            let ax = op.apply(&x).unwrap();
            let ahu = op.adjoint(&u).unwrap();
            let lhs: Complex64 = ax.iter().zip(&u).map(|(p, q)| p.conj() * q).sum();
            let rhs: Complex64 = x.iter().zip(&ahu).map(|(p, q)| p.conj() * q).sum();
            assert!((lhs - rhs).norm() < 1e-10 * (1.0 + lhs.norm()));
        }
    }

    #[test]
    fn masks_are_unit_modulus_and_distinct() {
        let mut rng = RngHandle::new(14, 0);
        let ops = sample_cdp_operators(4, 4, 2, &mut rng).unwrap();
        for op in &ops {
            for i in 0..16 {
                assert!((op.mask_entry(i).norm() - 1.0).abs() < 1e-14);
            }
        }
        let same = (0..16).all(|i| (ops[0].mask_entry(i) - ops[1].mask_entry(i)).norm() < 1e-12);
        assert!(!same, "independent masks should differ");
    }

    #[test]
    fn call_counter_counts_transforms() {
        let mut rng = RngHandle::new(15, 0);
        let op = sample_cdp_operators(4, 4, 1, &mut rng).unwrap().remove(0);
        let x = rng.standard_complex_vector(16);
        assert_eq!(op.call_count(), 0);
        let z = op.apply(&x).unwrap();
        let _ = op.adjoint(&z).unwrap();
        assert_eq!(op.call_count(), 2);
        op.reset_call_count();
        assert_eq!(op.call_count(), 0);
    }

    #[test]
    fn matches_direct_dft_on_small_input() {
        // Cross-check the fast path against an O(N^2) DFT, once.
        let (h, w) = (3, 4);
        let n = h * w;
        let mut rng = RngHandle::new(16, 0);
        let op = sample_cdp_operators(h, w, 1, &mut rng).unwrap().remove(0);
        let x = rng.standard_complex_vector(n);
        let fast = op.apply(&x).unwrap();

        let masked: Vec<Complex64> = (0..n).map(|i| op.mask_entry(i) * x[i]).collect();
        let scale = 1.0 / (n as f64).sqrt();
        for a in 0..h {
            for b in 0..w {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..h {
                    for j in 0..w {
                        let phase = -2.0
                            * std::f64::consts::PI
                            * ((a * i) as f64 / h as f64 + (b * j) as f64 / w as f64);
                        acc += masked[i * w + j] * Complex64::new(phase.cos(), phase.sin());
                    }
                }
                let direct = acc * scale;
                assert!(
                    (fast[a * w + b] - direct).norm() < 1e-10,
                    "mismatch at ({a}, {b})"
                );
            }
        }
    }
}
