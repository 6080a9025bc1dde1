//! Multi-component floating-point numbers: double-double, triple-double and
//! quad-double.
//!
//! A [`MultiFloat<K>`] stores an unevaluated sum of `K` binary64 words kept
//! in renormalized form:
//!
//! * `fl(c[i] + c[i+1]) == c[i]`, so `|c[i+1]| <= ulp(c[i]) / 2`;
//! * zeros only appear as a trailing run;
//! * a non-finite value lives in `c[0]` with every other word zero.
//!
//! Double-double has dedicated short formulas. Triple- and quad-double go
//! through an exact expansion of all partial terms followed by a single
//! rounding to `K` words, which keeps the relative error of `+ - *` within
//! a few units of `2^(-53K)`.

use core::cmp::Ordering;
use core::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use crate::eft::{two_prod, two_sum};
use crate::error::{Error, Result};
use crate::expansion::{round_decreasing, sort_decreasing, Expansion};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MultiFloat<const K: usize>([f64; K]);

/// 106-bit double-double.
pub type DoubleDouble = MultiFloat<2>;
/// 159-bit triple-double.
pub type TripleDouble = MultiFloat<3>;
/// 212-bit quad-double.
pub type QuadDouble = MultiFloat<4>;

/// FastTwoSum without the magnitude assertion; callers guarantee the
/// exponent condition through the surrounding algorithm.
#[inline(always)]
fn fast_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let e = b - (s - a);
    (s, e)
}

impl<const K: usize> MultiFloat<K> {
    const VALID_K: () = assert!(K >= 2 && K <= 4, "MultiFloat supports K = 2, 3 or 4");

    pub const ZERO: Self = MultiFloat([0.0; K]);
    pub const ONE: Self = {
        let mut c = [0.0; K];
        c[0] = 1.0;
        MultiFloat(c)
    };

    /// Number of significand bits, `53 * K`.
    pub const PRECISION_BITS: u32 = 53 * K as u32;

    /// Unit roundoff `2^(-53K)`.
    pub const UNIT_ROUNDOFF: f64 = {
        let mut u = 1.0;
        let mut i = 0;
        while i < 53 * K {
            u *= 0.5;
            i += 1;
        }
        u
    };

    /// Short precision tag used by the text formats.
    pub const TAG: &'static str = match K {
        2 => "dd",
        3 => "td",
        4 => "qd",
        _ => "??",
    };

    #[inline]
    pub fn from_f64(a: f64) -> Self {
        let () = Self::VALID_K;
        let mut c = [0.0; K];
        c[0] = a;
        MultiFloat(c)
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.0[0]
    }

    #[inline]
    pub fn components(&self) -> &[f64; K] {
        &self.0
    }

    /// Wraps components that already satisfy the renormalization invariants.
    pub fn from_components(c: [f64; K]) -> Result<Self> {
        let x = MultiFloat(c);
        if x.is_renormalized() {
            Ok(x)
        } else {
            Err(Error::NotRenormalized)
        }
    }

    /// Rounds an arbitrary finite sequence of binary64 terms (any order,
    /// any overlap) to the nearest renormalized `K`-word value.
    pub fn renormalize(terms: &[f64]) -> Self {
        let () = Self::VALID_K;
        let mut naive = 0.0;
        let mut e = Expansion::new();
        for &t in terms {
            naive += t;
            if !t.is_finite() {
                return Self::non_finite(naive);
            }
            e.grow(t);
        }
        Self::finish(e.round(), naive)
    }

    /// Checks the renormalization invariants listed in the module docs.
    pub fn is_renormalized(&self) -> bool {
        let c = &self.0;
        if !c[0].is_finite() {
            return c[1..].iter().all(|&x| x == 0.0);
        }
        for i in 0..K - 1 {
            if !c[i + 1].is_finite() {
                return false;
            }
            if c[i] + c[i + 1] != c[i] {
                return false;
            }
            if c[i] == 0.0 && c[i + 1] != 0.0 {
                return false;
            }
        }
        true
    }

    #[inline]
    pub fn is_finite(&self) -> bool {
        self.0[0].is_finite()
    }

    #[inline]
    pub fn is_nan(&self) -> bool {
        self.0[0].is_nan()
    }

    #[inline]
    pub fn is_zero(&self) -> bool {
        self.0[0] == 0.0
    }

    #[inline]
    pub fn abs(self) -> Self {
        if self.0[0] < 0.0 {
            -self
        } else {
            self
        }
    }

    #[inline]
    fn non_finite(v: f64) -> Self {
        let mut c = [0.0; K];
        c[0] = if v.is_finite() { f64::NAN } else { v };
        MultiFloat(c)
    }

    /// Final guard shared by every operation: collapses overflow/NaN into the
    /// leading word and checks the invariants in debug builds.
    #[inline(always)]
    fn finish(c: [f64; K], naive: f64) -> Self {
        if c.iter().any(|x| !x.is_finite()) || !naive.is_finite() {
            return Self::non_finite(naive);
        }
        let r = MultiFloat(c);
        debug_assert!(r.is_renormalized(), "invariants violated: {:?}", r.0);
        r
    }

    #[inline(always)]
    fn key(&self) -> [u64; K] {
        let mut k = [0u64; K];
        for i in 0..K {
            k[i] = self.0[i].to_bits();
        }
        k
    }

    /// Orders the operands canonically so `+` and `*` are commutative
    /// bit-for-bit even where the algorithm itself is not symmetric.
    #[inline(always)]
    fn canonical(a: Self, b: Self) -> (Self, Self) {
        if a.key() <= b.key() {
            (a, b)
        } else {
            (b, a)
        }
    }

    /// Accurate addition.
    #[inline]
    pub fn add_accurate(self, rhs: Self) -> Self {
        let naive = self.0[0] + rhs.0[0];
        if !naive.is_finite() {
            return Self::non_finite(naive);
        }
        if K == 2 {
            let (x, y) = (&self.0, &rhs.0);
            let sh = two_sum(x[0], y[0]);
            let th = two_sum(x[1], y[1]);
            let c = sh.e + th.s;
            let (vh, vl) = fast_two_sum(sh.s, c);
            let w = th.e + vl;
            let (zh, zl) = fast_two_sum(vh, w);
            let mut out = [0.0; K];
            out[0] = zh;
            out[1] = zl;
            return Self::finish(out, naive);
        }
        let (x, y) = Self::canonical(self, rhs);
        let mut e = Expansion::from_decreasing(&x.0);
        for &t in y.0.iter().rev() {
            e.grow(t);
        }
        Self::finish(e.round(), naive)
    }

    /// Faster, slightly less accurate addition: word-wise TwoSum followed
    /// by a renormalization pass without building the exact expansion.
    #[inline]
    pub fn add_sloppy(self, rhs: Self) -> Self {
        let naive = self.0[0] + rhs.0[0];
        if !naive.is_finite() {
            return Self::non_finite(naive);
        }
        let (x, y) = Self::canonical(self, rhs);
        if K == 2 {
            let s = two_sum(x.0[0], y.0[0]);
            let e = s.e + (x.0[1] + y.0[1]);
            let (zh, zl) = fast_two_sum(s.s, e);
            let mut out = [0.0; K];
            out[0] = zh;
            out[1] = zl;
            return Self::finish(out, naive);
        }
        let mut t = [0.0; 8];
        for i in 0..K {
            let p = two_sum(x.0[i], y.0[i]);
            t[2 * i] = p.s;
            t[2 * i + 1] = p.e;
        }
        sort_decreasing(&mut t[..2 * K]);
        Self::finish(round_decreasing(&t[..2 * K]), naive)
    }

    /// Adds a binary64 value.
    #[inline]
    pub fn add_f64(self, b: f64) -> Self {
        let naive = self.0[0] + b;
        if !naive.is_finite() {
            return Self::non_finite(naive);
        }
        if K == 2 {
            let s = two_sum(self.0[0], b);
            let v = self.0[1] + s.e;
            let (zh, zl) = fast_two_sum(s.s, v);
            let mut out = [0.0; K];
            out[0] = zh;
            out[1] = zl;
            return Self::finish(out, naive);
        }
        let mut e = Expansion::from_decreasing(&self.0);
        e.grow(b);
        Self::finish(e.round(), naive)
    }

    /// Multiplies by a binary64 value.
    #[inline]
    pub fn mul_f64(self, b: f64) -> Self {
        let naive = self.0[0] * b;
        if !naive.is_finite() {
            return Self::non_finite(naive);
        }
        if K == 2 {
            let c = two_prod(self.0[0], b);
            let cl2 = self.0[1] * b;
            let (th, tl1) = fast_two_sum(c.p, cl2);
            let tl2 = tl1 + c.e;
            let (zh, zl) = fast_two_sum(th, tl2);
            let mut out = [0.0; K];
            out[0] = zh;
            out[1] = zl;
            return Self::finish(out, naive);
        }
        let mut e = Expansion::new();
        for i in (0..K).rev() {
            let p = two_prod(self.0[i], b);
            e.grow(p.e);
            e.grow(p.p);
        }
        Self::finish(e.round(), naive)
    }

    #[inline]
    pub fn mul_accurate(self, rhs: Self) -> Self {
        let naive = self.0[0] * rhs.0[0];
        if !naive.is_finite() {
            return Self::non_finite(naive);
        }
        if K == 2 {
            let (x, y) = (&self.0, &rhs.0);
            let c = two_prod(x[0], y[0]);
            let cl2 = x[0] * y[1] + x[1] * y[0];
            let cl3 = c.e + cl2;
            let (zh, zl) = fast_two_sum(c.p, cl3);
            let mut out = [0.0; K];
            out[0] = zh;
            out[1] = zl;
            return Self::finish(out, naive);
        }
        let (x, y) = Self::canonical(self, rhs);
        let (x, y) = (&x.0, &y.0);
        let mut e = Expansion::new();
        // Order K terms are only needed to rounding accuracy.
        for i in 1..K {
            e.grow(x[i] * y[K - i]);
        }
        for order in (0..K).rev() {
            for i in 0..=order {
                let p = two_prod(x[i], y[order - i]);
                e.grow(p.e);
                e.grow(p.p);
            }
        }
        Self::finish(e.round(), naive)
    }

    /// Long division with exact remainders; `K + 1` binary64 quotient digits.
    pub fn checked_div(self, rhs: Self) -> Result<Self> {
        if rhs.0[0] == 0.0 {
            return Err(Error::DivisionByZero);
        }
        Ok(self.div_inner(rhs))
    }

    #[inline]
    fn div_inner(self, rhs: Self) -> Self {
        let naive = self.0[0] / rhs.0[0];
        if !naive.is_finite() || !self.is_finite() || !rhs.is_finite() {
            return Self::non_finite(naive);
        }
        if self.is_zero() {
            return Self::ZERO;
        }
        let y = &rhs.0;
        let mut r = Expansion::from_decreasing(&self.0);
        let mut q = [0.0; 5];
        for i in 0..=K {
            let qi = r.approx() / y[0];
            q[i] = qi;
            if i == K || qi == 0.0 {
                break;
            }
            for &yj in y.iter() {
                let p = two_prod(qi, yj);
                r.grow(-p.p);
                r.grow(-p.e);
            }
            r.compress(K + 2);
            if r.len() == 0 {
                break;
            }
        }
        let mut e = Expansion::new();
        for &qi in q[..=K].iter().rev() {
            e.grow(qi);
        }
        Self::finish(e.round(), naive)
    }

    /// Total order on finite values; `None` when either side is NaN.
    pub fn compare(&self, other: &Self) -> Option<Ordering> {
        if self.is_nan() || other.is_nan() {
            return None;
        }
        match self.0[0].partial_cmp(&other.0[0]) {
            Some(Ordering::Equal) if self.is_finite() => {}
            ord => return ord,
        }
        let d = self.add_accurate(-*other);
        d.0[0].partial_cmp(&0.0)
    }
}

impl<const K: usize> Default for MultiFloat<K> {
    fn default() -> Self {
        Self::ZERO
    }
}

impl<const K: usize> From<f64> for MultiFloat<K> {
    fn from(a: f64) -> Self {
        Self::from_f64(a)
    }
}

impl<const K: usize> Neg for MultiFloat<K> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        let mut c = self.0;
        for x in c.iter_mut() {
            *x = -*x;
        }
        MultiFloat(c)
    }
}

impl<const K: usize> Add for MultiFloat<K> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        self.add_accurate(rhs)
    }
}

impl<const K: usize> Sub for MultiFloat<K> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        self.add_accurate(-rhs)
    }
}

impl<const K: usize> Mul for MultiFloat<K> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        self.mul_accurate(rhs)
    }
}

/// Division by an exact zero yields a non-finite leading word, mirroring
/// binary64; use [`MultiFloat::checked_div`] to get an error instead.
impl<const K: usize> Div for MultiFloat<K> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        self.div_inner(rhs)
    }
}

impl<const K: usize> AddAssign for MultiFloat<K> {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<const K: usize> SubAssign for MultiFloat<K> {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<const K: usize> MulAssign for MultiFloat<K> {
    #[inline]
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl<const K: usize> DivAssign for MultiFloat<K> {
    #[inline]
    fn div_assign(&mut self, rhs: Self) {
        *self = *self / rhs;
    }
}

impl<const K: usize> PartialOrd for MultiFloat<K> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.compare(other)
    }
}
