//! Error-free transformations on binary64.
//!
//! Every function here assumes the default round-to-nearest-even mode and
//! never changes it. Results are exact (value-wise) as long as no overflow
//! occurs and products stay clear of the subnormal range; callers can test
//! for the overflow case with [`SumPair::is_finite`] / [`ProdPair::is_finite`].

/// Rounded sum plus the exact residual: `a + b == s + e`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumPair {
    pub s: f64,
    pub e: f64,
}

/// Rounded product plus the exact residual: `a * b == p + e`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProdPair {
    pub p: f64,
    pub e: f64,
}

impl SumPair {
    #[inline]
    pub fn is_finite(&self) -> bool {
        self.s.is_finite() && self.e.is_finite()
    }
}

impl ProdPair {
    #[inline]
    pub fn is_finite(&self) -> bool {
        self.p.is_finite() && self.e.is_finite()
    }
}

/// 2^27 + 1, Dekker's splitting constant for a 53-bit significand.
const SPLITTER: f64 = 134_217_729.0;

/// Knuth's branch-free TwoSum. No ordering precondition.
#[inline]
pub fn two_sum(a: f64, b: f64) -> SumPair {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    SumPair { s, e }
}

/// Dekker's FastTwoSum. Requires `|a| >= |b|` or `a == 0`.
#[inline]
pub fn quick_two_sum(a: f64, b: f64) -> SumPair {
    debug_assert!(
        a == 0.0 || !a.is_finite() || !b.is_finite() || abs(a) >= abs(b),
        "quick_two_sum precondition violated: |{a:e}| < |{b:e}|"
    );
    let s = a + b;
    let e = b - (s - a);
    SumPair { s, e }
}

/// TwoProd. Uses the fused path when the build target has hardware FMA,
/// otherwise Dekker's splitting algorithm.
#[inline]
pub fn two_prod(a: f64, b: f64) -> ProdPair {
    #[cfg(target_feature = "fma")]
    {
        two_prod_fma(a, b)
    }
    #[cfg(not(target_feature = "fma"))]
    {
        two_prod_dekker(a, b)
    }
}

/// TwoProd through a correctly rounded fused multiply-add.
#[inline]
pub fn two_prod_fma(a: f64, b: f64) -> ProdPair {
    let p = a * b;
    let e = fma(a, b, -p);
    ProdPair { p, e }
}

/// TwoProd without FMA (Veltkamp/Dekker). Exact when `|a|, |b| < 2^996`
/// and the product does not underflow.
#[inline]
pub fn two_prod_dekker(a: f64, b: f64) -> ProdPair {
    let p = a * b;
    let (ah, al) = dekker_split(a);
    let (bh, bl) = dekker_split(b);
    let e = ((ah * bh - p) + ah * bl + al * bh) + al * bl;
    ProdPair { p, e }
}

/// Veltkamp split of `a` into a high half with at most 26 significant bits
/// and a low half with at most 26 bits, `a == hi + lo` exactly.
///
/// `|a|` must be below 2^996, otherwise the scaling product overflows and
/// both halves come back non-finite.
#[inline]
pub fn dekker_split(a: f64) -> (f64, f64) {
    let t = SPLITTER * a;
    let hi = t - (t - a);
    let lo = a - hi;
    (hi, lo)
}

#[inline]
pub(crate) fn fma(a: f64, b: f64, c: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        a.mul_add(b, c)
    }
    #[cfg(not(feature = "std"))]
    {
        libm::fma(a, b, c)
    }
}

#[inline]
pub(crate) fn abs(a: f64) -> f64 {
    f64::from_bits(a.to_bits() & !(1u64 << 63))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pow2(e: i32) -> f64 {
        libm::ldexp(1.0, e)
    }

    #[test]
    fn two_sum_small_cases() {
        assert_eq!(two_sum(1.0, 0.0), SumPair { s: 1.0, e: 0.0 });
        assert_eq!(two_sum(1.0, pow2(-60)), SumPair { s: 1.0, e: pow2(-60) });
        assert_eq!(two_sum(pow2(-60), 1.0), SumPair { s: 1.0, e: pow2(-60) });
    }

    #[test]
    fn two_sum_overflow_reports_non_finite() {
        let r = two_sum(f64::MAX, f64::MAX);
        assert!(r.s.is_infinite());
        assert!(!r.is_finite());
    }

    #[test]
    fn quick_two_sum_small_cases() {
        assert_eq!(quick_two_sum(2.0, 1.0), SumPair { s: 3.0, e: 0.0 });
        assert_eq!(quick_two_sum(1.0, pow2(-60)), SumPair { s: 1.0, e: pow2(-60) });
        assert_eq!(quick_two_sum(0.0, 5.0), SumPair { s: 5.0, e: 0.0 });
    }

    #[test]
    #[cfg(debug_assertions)]
    #[should_panic(expected = "precondition")]
    fn quick_two_sum_checks_order_in_debug() {
        let _ = quick_two_sum(1.0, 2.0);
    }

    #[test]
    fn two_prod_small_cases() {
        for f in [two_prod, two_prod_fma, two_prod_dekker] {
            assert_eq!(f(3.0, 4.0), ProdPair { p: 12.0, e: 0.0 });
            assert_eq!(f(0.0, 7.25), ProdPair { p: 0.0, e: 0.0 });
            let x = 1.0 + pow2(-52);
            let r = f(x, x);
            // (1 + 2^-52)^2 = 1 + 2^-51 + 2^-104
            assert_eq!(r.p, 1.0 + pow2(-51));
            assert_eq!(r.e, pow2(-104));
        }
    }

    #[test]
    fn dekker_split_cases() {
        assert_eq!(dekker_split(1.0), (1.0, 0.0));
        assert_eq!(dekker_split(pow2(27) + 1.0), (pow2(27), 1.0));
        let (hi, lo) = dekker_split(pow2(1000));
        assert!(!hi.is_finite() || !lo.is_finite());
    }
}
