//! Seeded, stream-addressable randomness.
//!
//! Every random draw in the crate flows through a [`RngHandle`] so that a
//! `(seed, stream)` pair fully determines the sequence. Independent parts of
//! an experiment (signal, operators, noise, solver initialization) each get
//! their own stream off one seed, which keeps them decoupled: adding draws
//! to one stream never perturbs another.

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::message::ComplexVector;

/// A deterministic random generator addressed by `(seed, stream)`.
///
/// Two handles with the same seed and stream always produce the same
/// sequence; handles with the same seed but different streams are
/// statistically independent.
#[derive(Debug, Clone)]
pub struct RngHandle {
    seed: u64,
    stream: u64,
    inner: ChaCha12Rng,
}

impl RngHandle {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha12Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        RngHandle { seed, stream, inner }
    }

    /// A fresh handle on a different stream of the same seed, starting from
    /// the beginning of that stream regardless of how much this handle has
    /// consumed.
    pub fn derive(&self, stream: u64) -> Self {
        RngHandle::new(self.seed, stream)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// One draw from the standard circular complex Gaussian `CN(0, 1)`:
    /// real and imaginary parts are independent `N(0, 1/2)`.
    pub fn standard_complex(&mut self) -> Complex64 {
        // sqrt(1/2), so that E|z|^2 = 1.
        const SCALE: f64 = std::f64::consts::FRAC_1_SQRT_2;
        let re: f64 = self.inner.sample(StandardNormal);
        let im: f64 = self.inner.sample(StandardNormal);
        Complex64::new(re * SCALE, im * SCALE)
    }

    /// `n` i.i.d. draws from `CN(0, 1)`.
    pub fn standard_complex_vector(&mut self, n: usize) -> ComplexVector {
        (0..n).map(|_| self.standard_complex()).collect()
    }

    /// One phase uniform on `[0, 2 pi)`.
    pub fn uniform_phase(&mut self) -> f64 {
        self.inner.gen::<f64>() * std::f64::consts::TAU
    }
}

impl RngCore for RngHandle {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}
