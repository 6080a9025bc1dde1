//! Reproducible random test matrices.
//!
//! The uniform stream is SplitMix64 seeded with the user's 64-bit seed.
//! Normal variates use the cosine branch of Box-Muller, and the elementary
//! functions come from `libm`, so a seed gives the same bits on every
//! platform.

use alloc::vec::Vec;

use rand_xoshiro::rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::matrix::Matrix;
use crate::mcfloat::MultiFloat;

const TWO_POW_M53: f64 = 1.0 / 9007199254740992.0;

/// A named deterministic generator and its seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngSpec {
    pub seed: u64,
}

impl RngSpec {
    pub const ALGORITHM: &'static str = "splitmix64";

    pub fn new(seed: u64) -> Self {
        RngSpec { seed }
    }

    pub fn stream(&self) -> Stream {
        Stream(SplitMix64::seed_from_u64(self.seed))
    }
}

/// Uniform and normal variates drawn from one SplitMix64 sequence.
pub struct Stream(SplitMix64);

impl Stream {
    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// 53-bit integer, uniform on `[0, 2^53)`.
    fn next_u53(&mut self) -> u64 {
        self.0.next_u64() >> 11
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        self.next_u53() as f64 * TWO_POW_M53
    }

    /// Uniform on `[0, 1)` with `53 K` random bits.
    pub fn uniform_multi<const K: usize>(&mut self) -> MultiFloat<K> {
        let mut words = [0.0; K];
        let mut scale = TWO_POW_M53;
        for w in words.iter_mut() {
            *w = self.next_u53() as f64 * scale;
            scale *= TWO_POW_M53;
        }
        MultiFloat::renormalize(&words)
    }

    /// Standard normal variate (Box-Muller, cosine branch; two uniforms).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
    }
}

/// `(ru - 0.5) * exp(rn)` with `ru` uniform at full working precision and
/// `rn` standard normal. Elements are drawn in row-major order.
pub fn gen_test_matrix<const K: usize>(m: usize, n: usize, seed: u64) -> Matrix<MultiFloat<K>> {
    let mut s = RngSpec::new(seed).stream();
    Matrix::from_fn(m, n, |_, _| {
        let ru = s.uniform_multi::<K>();
        let scale = libm::exp(s.normal());
        ru.add_f64(-0.5).mul_f64(scale)
    })
}

/// Same distribution evaluated entirely in binary64 and embedded exactly,
/// so every element carries only 53 significant bits.
pub fn gen_test_matrix_binary64<const K: usize>(m: usize, n: usize, seed: u64) -> Matrix<MultiFloat<K>> {
    let mut s = RngSpec::new(seed).stream();
    Matrix::from_fn(m, n, |_, _| {
        let ru = s.uniform();
        let scale = libm::exp(s.normal());
        MultiFloat::from_f64((ru - 0.5) * scale)
    })
}

/// Linear system with `a_ij` uniform on `[0, 1)` at full working precision
/// and `b_i = 1 / i` (1-based) rounded in the working precision.
pub fn gen_lu_system<const K: usize>(n: usize, seed: u64) -> (Matrix<MultiFloat<K>>, Vec<MultiFloat<K>>) {
    let mut s = RngSpec::new(seed).stream();
    let a = Matrix::from_fn(n, n, |_, _| s.uniform_multi::<K>());
    let b = (1..=n).map(|i| MultiFloat::ONE / MultiFloat::from_f64(i as f64)).collect();
    (a, b)
}
