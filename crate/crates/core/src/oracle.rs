//! Exact rational references for measuring and testing the floating-point
//! kernels. Slow by design; keep matrices small (n <= 256).

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::matrix::{Matrix, Scalar};

/// Exact rational number. Every finite binary64 or multi-float value is
/// representable.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ExactScalar(BigRational);

impl fmt::Debug for ExactScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (~{:e})", self.0, self.to_f64())
    }
}

impl fmt::Display for ExactScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// `x = m * 2^e` with `m < 2^53`; `None` for zero. Panics on non-finite input.
fn decompose(x: f64) -> Option<(bool, u64, i32)> {
    assert!(x.is_finite(), "exact value of a non-finite number requested");
    if x == 0.0 {
        return None;
    }
    let bits = x.to_bits();
    let neg = bits >> 63 == 1;
    let biased = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    let (m, e) = if biased == 0 { (frac, -1074) } else { (frac | (1u64 << 52), biased - 1075) };
    Some((neg, m, e))
}

/// `n * 2^e` as a reduced rational.
fn dyadic(n: BigInt, e: i64) -> BigRational {
    if n.is_zero() {
        return BigRational::zero();
    }
    let tz = n.trailing_zeros().unwrap_or(0) as i64;
    let n = n >> tz as usize;
    let e = e + tz;
    if e >= 0 {
        BigRational::from_integer(n << e as usize)
    } else {
        BigRational::new_raw(n, BigInt::one() << (-e) as usize)
    }
}

impl ExactScalar {
    pub fn zero() -> Self {
        ExactScalar(BigRational::zero())
    }

    pub fn one() -> Self {
        ExactScalar(BigRational::one())
    }

    /// Exact value of a finite binary64 number.
    pub fn from_f64(x: f64) -> Self {
        match decompose(x) {
            None => Self::zero(),
            Some((neg, m, e)) => {
                let n = BigInt::from(m);
                ExactScalar(dyadic(if neg { -n } else { n }, e as i64))
            }
        }
    }

    /// Exact sum of binary64 words, e.g. the components of a multi-float.
    pub fn from_parts(parts: &[f64]) -> Self {
        parts.iter().fold(Self::zero(), |acc, &x| acc + Self::from_f64(x))
    }

    /// Exact value of any supported scalar.
    pub fn of<E: Scalar>(x: &E) -> Self {
        Self::from_parts(x.parts())
    }

    pub fn from_rational(r: BigRational) -> Self {
        ExactScalar(r)
    }

    pub fn from_integer(n: i64) -> Self {
        ExactScalar(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn as_rational(&self) -> &BigRational {
        &self.0
    }

    pub fn into_rational(self) -> BigRational {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn abs(&self) -> Self {
        ExactScalar(self.0.abs())
    }

    /// Nearest binary64 value (infinite beyond the binary64 range).
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Rounds to a `K`-word multi-float by repeated nearest-binary64 peeling.
    pub fn to_multi<const K: usize>(&self) -> crate::MultiFloat<K> {
        let mut rest = self.0.clone();
        let mut words = [0.0; K];
        for w in words.iter_mut() {
            let x = rest.to_f64().unwrap_or(0.0);
            if x == 0.0 || !x.is_finite() {
                break;
            }
            *w = x;
            rest -= ExactScalar::from_f64(x).0;
        }
        crate::MultiFloat::renormalize(&words)
    }

    /// `|self - other| / |other|`, or `|self|` when `other` is zero, as binary64.
    pub fn rel_error(&self, reference: &ExactScalar) -> f64 {
        let diff = (&self.0 - &reference.0).abs();
        if reference.is_zero() {
            return diff.to_f64().unwrap_or(f64::INFINITY);
        }
        ratio_to_f64(&diff, &reference.0.abs())
    }
}

/// `a / b` for nonnegative `a`, positive `b`, correct to a few ulps even
/// when both are far outside the binary64 range.
fn ratio_to_f64(a: &BigRational, b: &BigRational) -> f64 {
    if a.is_zero() {
        return 0.0;
    }
    let q = a / b;
    match q.to_f64() {
        Some(v) if v.is_finite() && v != 0.0 => v,
        _ => {
            // Scale by a power of two so the quotient is representable.
            let shift = q.numer().bits() as i64 - q.denom().bits() as i64;
            let scaled = if shift >= 0 {
                BigRational::new(q.numer().clone(), q.denom().clone() << shift as usize)
            } else {
                BigRational::new(q.numer().clone() << (-shift) as usize, q.denom().clone())
            };
            let v = scaled.to_f64().unwrap_or(f64::NAN);
            if shift > 2000 {
                f64::INFINITY
            } else if shift < -2000 {
                0.0
            } else {
                v * pow2_f64(shift as i32)
            }
        }
    }
}

fn pow2_f64(e: i32) -> f64 {
    // Two factors keep each partial power inside the normal range.
    let half = e / 2;
    let p = |k: i32| f64::from_bits(((k + 1023) as u64) << 52);
    p(half) * p(e - half)
}

impl From<f64> for ExactScalar {
    fn from(x: f64) -> Self {
        ExactScalar::from_f64(x)
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident) => {
        impl $tr for ExactScalar {
            type Output = ExactScalar;
            fn $m(self, rhs: ExactScalar) -> ExactScalar {
                ExactScalar(self.0.$m(rhs.0))
            }
        }
        impl<'a> $tr<&'a ExactScalar> for &'a ExactScalar {
            type Output = ExactScalar;
            fn $m(self, rhs: &'a ExactScalar) -> ExactScalar {
                ExactScalar((&self.0).$m(&rhs.0))
            }
        }
    };
}

binop!(Add, add);
binop!(Sub, sub);
binop!(Mul, mul);
binop!(Div, div);

impl Neg for ExactScalar {
    type Output = ExactScalar;
    fn neg(self) -> ExactScalar {
        ExactScalar(-self.0)
    }
}

/// Exact matrix of any scalar type.
pub fn to_exact<E: Scalar>(m: &Matrix<E>) -> Matrix<ExactScalar> {
    m.map(ExactScalar::of)
}

const LIMB_BITS: usize = 32;
/// Products of two binary64 words are `m * 2^e` with `e >= -2148`.
const BIAS: i32 = 2148;
/// Covers bit positions up to `2048 + 64` plus carry room.
const LIMBS: usize = 140;
const FLUSH_EVERY: u32 = 1 << 28;

/// Fixed-point accumulator spanning every product of two binary64 values.
/// Limbs hold unnormalised signed 32-bit digit sums; carries are resolved
/// lazily.
struct LongAccumulator {
    limbs: [i64; LIMBS],
    lo: usize,
    hi: usize,
    pending: u32,
}

impl LongAccumulator {
    fn new() -> Self {
        LongAccumulator { limbs: [0; LIMBS], lo: LIMBS, hi: 0, pending: 0 }
    }

    fn clear(&mut self) {
        if self.lo < self.hi {
            self.limbs[self.lo..self.hi].fill(0);
        }
        self.lo = LIMBS;
        self.hi = 0;
        self.pending = 0;
    }

    /// Adds `±v * 2^(s - BIAS)` for `v < 2^64`.
    #[inline]
    fn add_u64(&mut self, v: u64, s: usize, neg: bool) {
        let k = s / LIMB_BITS;
        let wide = (v as u128) << (s % LIMB_BITS);
        let d0 = (wide & 0xffff_ffff) as i64;
        let d1 = ((wide >> 32) & 0xffff_ffff) as i64;
        let d2 = (wide >> 64) as i64;
        if neg {
            self.limbs[k] -= d0;
            self.limbs[k + 1] -= d1;
            self.limbs[k + 2] -= d2;
        } else {
            self.limbs[k] += d0;
            self.limbs[k + 1] += d1;
            self.limbs[k + 2] += d2;
        }
        self.lo = self.lo.min(k);
        self.hi = self.hi.max(k + 3);
    }

    #[inline]
    fn add_product(&mut self, a: Word, b: Word) {
        let m = a.m as u128 * b.m as u128;
        let s = (a.e + b.e + BIAS) as usize;
        let neg = a.neg != b.neg;
        self.add_u64(m as u64, s, neg);
        let high = (m >> 64) as u64;
        if high != 0 {
            self.add_u64(high, s + 64, neg);
        }
        self.pending += 1;
        if self.pending == FLUSH_EVERY {
            self.normalize();
        }
    }

    fn normalize(&mut self) {
        let mut carry = 0i64;
        for i in self.lo..LIMBS {
            if i >= self.hi && carry == 0 {
                break;
            }
            let v = self.limbs[i] + carry;
            carry = v >> LIMB_BITS;
            self.limbs[i] = v - (carry << LIMB_BITS);
            self.hi = self.hi.max(i + 1);
        }
        // The top limbs are never reached by finite products.
        debug_assert!(carry == 0 || carry == -1);
        if carry != 0 {
            self.limbs[LIMBS - 1] += carry << LIMB_BITS;
        }
        self.pending = 0;
    }

    fn value(&mut self) -> ExactScalar {
        if self.lo >= self.hi {
            return ExactScalar::zero();
        }
        self.normalize();
        let top = self.limbs[LIMBS - 1];
        let negative = top < 0;
        let digits: Vec<u32> = self.limbs[self.lo..self.hi.min(LIMBS)]
            .iter()
            .enumerate()
            .map(|(i, &d)| if self.lo + i == LIMBS - 1 { (d & 0xffff_ffff) as u32 } else { d as u32 })
            .collect();
        let mut n = BigInt::from_biguint(Sign::Plus, BigUint::from_slice(&digits));
        if negative {
            let span = (self.hi.min(LIMBS) - self.lo) * LIMB_BITS;
            n -= BigInt::one() << span;
        }
        ExactScalar(dyadic(n, (self.lo * LIMB_BITS) as i64 - BIAS as i64))
    }
}

#[derive(Clone, Copy)]
struct Word {
    m: u64,
    e: i32,
    neg: bool,
}

/// Nonzero words of every element, with per-element offsets.
struct WordTable {
    words: Vec<Word>,
    start: Vec<usize>,
}

impl WordTable {
    fn build<'a, E: Scalar + 'a>(elems: impl Iterator<Item = &'a E>) -> Self {
        let mut words = Vec::new();
        let mut start = vec![0];
        for x in elems {
            for &w in x.parts() {
                if let Some((neg, m, e)) = decompose(w) {
                    words.push(Word { m, e, neg });
                }
            }
            start.push(words.len());
        }
        WordTable { words, start }
    }

    #[inline]
    fn get(&self, idx: usize) -> &[Word] {
        &self.words[self.start[idx]..self.start[idx + 1]]
    }
}

/// Exact product `A * B`.
pub fn exact_gemm<E: Scalar>(a: &Matrix<E>, b: &Matrix<E>) -> Result<Matrix<ExactScalar>> {
    if a.cols() != b.rows() {
        return Err(Error::shape("exact_gemm", a.shape(), b.shape()));
    }
    if let Some((row, col)) = a.first_non_finite() {
        return Err(Error::NonFinite { row, col });
    }
    if let Some((row, col)) = b.first_non_finite() {
        return Err(Error::NonFinite { row, col });
    }
    let (m, l, n) = (a.rows(), a.cols(), b.cols());
    let at = WordTable::build(a.data().iter());
    let bt_m = b.transpose();
    let bt = WordTable::build(bt_m.data().iter());
    let row = |i: usize| -> Vec<ExactScalar> {
        let mut acc = LongAccumulator::new();
        (0..n)
            .map(|j| {
                acc.clear();
                for k in 0..l {
                    for &wa in at.get(i * l + k) {
                        for &wb in bt.get(j * l + k) {
                            acc.add_product(wa, wb);
                        }
                    }
                }
                acc.value()
            })
            .collect()
    };
    #[cfg(feature = "parallel")]
    let rows: Vec<Vec<ExactScalar>> = {
        use rayon::prelude::*;
        (0..m).into_par_iter().map(row).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Vec<ExactScalar>> = (0..m).map(row).collect();
    Matrix::from_vec(m, n, rows.into_iter().flatten().collect())
}

/// Exact `sum_k x_k y_k` of two equal-length slices.
pub fn exact_dot<E: Scalar>(x: &[E], y: &[E]) -> ExactScalar {
    assert_eq!(x.len(), y.len(), "exact_dot needs equal lengths");
    let xt = WordTable::build(x.iter());
    let yt = WordTable::build(y.iter());
    let mut acc = LongAccumulator::new();
    for k in 0..x.len() {
        for &wa in xt.get(k) {
            for &wb in yt.get(k) {
                acc.add_product(wa, wb);
            }
        }
    }
    acc.value()
}

/// Largest element-wise relative error of `c` against the exact `reference`.
/// Where the reference is zero the absolute value `|c_ij|` is used.
pub fn max_rel_error<E: Scalar>(c: &Matrix<E>, reference: &Matrix<ExactScalar>) -> Result<f64> {
    if c.shape() != reference.shape() {
        return Err(Error::shape("max_rel_error", c.shape(), reference.shape()));
    }
    let err = |(x, r): (&E, &ExactScalar)| -> f64 {
        if !x.is_finite() {
            return f64::INFINITY;
        }
        match dyadic_rel_error(x.parts(), r) {
            Some(e) => e,
            None => ExactScalar::of(x).rel_error(r),
        }
    };
    #[cfg(feature = "parallel")]
    let errs: Vec<f64> = {
        use rayon::prelude::*;
        c.data().par_iter().zip(reference.data().par_iter()).map(err).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let errs: Vec<f64> = c.data().iter().zip(reference.data()).map(err).collect();
    Ok(errs.into_iter().fold(0.0, |m, e| if e > m || e.is_nan() { e } else { m }))
}

/// Exact value of binary64 words as `n * 2^e`.
fn dyadic_of(parts: &[f64]) -> (BigInt, i64) {
    let min_e = parts.iter().filter_map(|&w| decompose(w)).map(|(_, _, e)| e).min().unwrap_or(0);
    let mut n = BigInt::zero();
    for &w in parts {
        if let Some((neg, m, e)) = decompose(w) {
            let t = BigInt::from(m) << (e - min_e) as usize;
            if neg {
                n -= t;
            } else {
                n += t;
            }
        }
    }
    (n, min_e as i64)
}

/// `rel_error` without rational normalisation when the reference has a
/// power-of-two denominator (always true for products of floats).
fn dyadic_rel_error(parts: &[f64], r: &ExactScalar) -> Option<f64> {
    let den = r.0.denom();
    let tz = den.trailing_zeros()?;
    if den.bits() != tz + 1 {
        return None;
    }
    let (cn, ce) = dyadic_of(parts);
    let re = -(tz as i64);
    let e = ce.min(re);
    let cn = cn << (ce - e) as usize;
    let rn = r.0.numer() << (re - e) as usize;
    let diff = (cn - &rn).abs();
    if rn.is_zero() {
        return Some(int_ratio(&diff, &BigInt::one()) * pow2_f64_wide(e));
    }
    Some(int_ratio(&diff, &rn.abs()))
}

/// `a / b` for nonnegative integers, to about binary64 precision.
fn int_ratio(a: &BigInt, b: &BigInt) -> f64 {
    if a.is_zero() {
        return 0.0;
    }
    let top = |x: &BigInt| -> (f64, i64) {
        let shift = (x.bits() as i64 - 64).max(0);
        let t = (x >> shift as usize).to_u64().unwrap_or(u64::MAX);
        (t as f64, shift)
    };
    let (fa, sa) = top(a);
    let (fb, sb) = top(b);
    (fa / fb) * pow2_f64_wide(sa - sb)
}

/// `2^e`, saturating to zero or infinity.
fn pow2_f64_wide(e: i64) -> f64 {
    if e > 2046 {
        f64::INFINITY
    } else if e < -2100 {
        0.0
    } else {
        pow2_f64(e as i32)
    }
}

/// Relative error of a vector against an exact one, in the max norm:
/// `max_i |x_i - r_i| / max_i |r_i|`.
pub fn normwise_rel_error<E: Scalar>(x: &[E], reference: &[ExactScalar]) -> f64 {
    assert_eq!(x.len(), reference.len(), "length mismatch");
    let mut num = BigRational::zero();
    let mut den = BigRational::zero();
    for (xi, ri) in x.iter().zip(reference) {
        let d = (&ExactScalar::of(xi).0 - &ri.0).abs();
        if d > num {
            num = d;
        }
        let a = ri.0.abs();
        if a > den {
            den = a;
        }
    }
    if den.is_zero() {
        return num.to_f64().unwrap_or(f64::INFINITY);
    }
    ratio_to_f64(&num, &den)
}

/// Exact solution of `A x = b` by fraction-free (Bareiss) elimination.
///
/// Each equation is first scaled by a power of two so that all its
/// coefficients are integers; the scaling leaves the solution unchanged.
pub fn exact_solve<E: Scalar>(a: &Matrix<E>, b: &[E]) -> Result<Vec<ExactScalar>> {
    let n = a.rows();
    if a.cols() != n || b.len() != n {
        return Err(Error::shape("exact_solve", a.shape(), (b.len(), 1)));
    }
    if let Some((row, col)) = a.first_non_finite() {
        return Err(Error::NonFinite { row, col });
    }
    if let Some(i) = b.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { row: i, col: n });
    }
    let mut m: Vec<Vec<BigInt>> = (0..n)
        .map(|i| {
            let row: Vec<&E> = a.row(i).iter().chain(core::iter::once(&b[i])).collect();
            integer_row(&row)
        })
        .collect();

    let mut prev = BigInt::one();
    for k in 0..n {
        let p = (k..n).find(|&r| !m[r][k].is_zero()).ok_or(Error::Singular(k))?;
        m.swap(k, p);
        let (head, tail) = m.split_at_mut(k + 1);
        let pivot_row = &head[k];
        let step = |row: &mut Vec<BigInt>| {
            let f = core::mem::take(&mut row[k]);
            for j in k + 1..=n {
                let v = &pivot_row[k] * &row[j] - &f * &pivot_row[j];
                row[j] = exact_div(v, &prev);
            }
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            tail.par_iter_mut().for_each(step);
        }
        #[cfg(not(feature = "parallel"))]
        tail.iter_mut().for_each(step);
        prev = m[k][k].clone();
    }

    // Upper-triangular U x = c with det = U[n-1][n-1] (up to sign);
    // y = det * x is integral.
    let det = m[n - 1][n - 1].clone();
    let mut y = vec![BigInt::zero(); n];
    for i in (0..n).rev() {
        let mut s = &det * &m[i][n];
        for j in i + 1..n {
            s -= &m[i][j] * &y[j];
        }
        y[i] = exact_div(s, &m[i][i]);
    }
    Ok(y.into_iter().map(|yi| ExactScalar(BigRational::new(yi, det.clone()))).collect())
}

fn exact_div(v: BigInt, d: &BigInt) -> BigInt {
    let (q, r) = v.div_rem(d);
    debug_assert!(r.is_zero(), "fraction-free step left a remainder");
    q
}

/// Integers proportional to the given values, scaled by a common power of two.
fn integer_row<E: Scalar>(row: &[&E]) -> Vec<BigInt> {
    let min_e =
        row.iter().flat_map(|x| x.parts().iter().filter_map(|&w| decompose(w))).map(|(_, _, e)| e).min().unwrap_or(0);
    row.iter()
        .map(|x| {
            let mut n = BigInt::zero();
            for &w in x.parts() {
                if let Some((neg, m, e)) = decompose(w) {
                    let t = BigInt::from(m) << (e - min_e) as usize;
                    if neg {
                        n -= t;
                    } else {
                        n += t;
                    }
                }
            }
            n
        })
        .collect()
}

/// Compares two scalars exactly.
pub fn exact_cmp<E: Scalar>(x: &E, y: &E) -> Ordering {
    ExactScalar::of(x).cmp(&ExactScalar::of(y))
}
