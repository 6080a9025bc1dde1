//! Fixed-capacity floating-point expansions used as exact scratch space by
//! the multi-component arithmetic.

use crate::eft::{abs, two_sum};

pub(crate) const CAPACITY: usize = 40;

/// Exact, nonoverlapping, zero-free expansion stored in increasing order of
/// magnitude (Shewchuk's convention).
#[derive(Clone, Copy)]
pub(crate) struct Expansion {
    buf: [f64; CAPACITY],
    len: usize,
}

impl Expansion {
    #[inline]
    pub(crate) fn new() -> Self {
        Expansion { buf: [0.0; CAPACITY], len: 0 }
    }

    /// Expansion holding the components of a renormalized multi-float
    /// (which are stored in decreasing order).
    #[inline]
    pub(crate) fn from_decreasing(c: &[f64]) -> Self {
        let mut e = Self::new();
        for &x in c.iter().rev() {
            if x != 0.0 {
                e.buf[e.len] = x;
                e.len += 1;
            }
        }
        e
    }

    #[inline]
    pub(crate) fn len(&self) -> usize {
        self.len
    }

    /// Adds `b` exactly (Shewchuk's GROW-EXPANSION with zero elimination).
    #[inline]
    pub(crate) fn grow(&mut self, b: f64) {
        if b == 0.0 {
            return;
        }
        let mut q = b;
        let mut w = 0;
        for r in 0..self.len {
            let t = two_sum(q, self.buf[r]);
            q = t.s;
            if t.e != 0.0 {
                self.buf[w] = t.e;
                w += 1;
            }
        }
        if q != 0.0 {
            assert!(w < CAPACITY, "expansion capacity exceeded");
            self.buf[w] = q;
            w += 1;
        }
        self.len = w;
    }

    /// Rounds the expansion to `K` renormalized components.
    #[inline]
    pub(crate) fn round<const K: usize>(&self) -> [f64; K] {
        let mut dec = [0.0; CAPACITY];
        for i in 0..self.len {
            dec[i] = self.buf[self.len - 1 - i];
        }
        round_decreasing(&dec[..self.len])
    }

    /// Replaces the expansion with its `m`-component rounding.
    pub(crate) fn compress(&mut self, m: usize) {
        if self.len <= m {
            return;
        }
        let mut dec = [0.0; CAPACITY];
        for i in 0..self.len {
            dec[i] = self.buf[self.len - 1 - i];
        }
        let mut out = [0.0; CAPACITY];
        vec_sum_err_branch(&mut dec[..self.len], &mut out[..m]);
        // The branch output is only ulp-nonoverlapping; regrow so the
        // expansion stays strictly nonoverlapping for later `grow` calls.
        *self = Expansion::new();
        for &x in out[..m].iter().rev() {
            self.grow(x);
        }
    }

    /// Binary64 approximation of the value, summing from the smallest term.
    #[inline]
    pub(crate) fn approx(&self) -> f64 {
        self.buf[..self.len].iter().fold(0.0, |acc, &x| acc + x)
    }
}

/// VecSum followed by VecSumErrBranch: turns a roughly decreasing sequence
/// into at most `out.len()` ulp-nonoverlapping components. Returns how many
/// components were written; the rest of `out` is zeroed.
fn vec_sum_err_branch(t: &mut [f64], out: &mut [f64]) -> usize {
    let n = t.len();
    for o in out.iter_mut() {
        *o = 0.0;
    }
    if n == 0 || out.is_empty() {
        return 0;
    }
    // VecSum, bottom-up.
    let mut s = t[n - 1];
    for i in (0..n - 1).rev() {
        let p = two_sum(t[i], s);
        s = p.s;
        t[i + 1] = p.e;
    }
    t[0] = s;

    let m = out.len();
    let mut j = 0;
    let mut eps = t[0];
    for &ti in t.iter().skip(1) {
        let p = two_sum(eps, ti);
        out[j] = p.s;
        if p.e != 0.0 {
            if j + 1 == m {
                return m;
            }
            j += 1;
            eps = p.e;
        } else {
            eps = p.s;
        }
    }
    out[j] = eps;
    if eps != 0.0 {
        j + 1
    } else {
        j
    }
}

/// Rounds a decreasing-magnitude sequence to `K` components that satisfy
/// the multi-float invariants (`fl(c[i] + c[i+1]) == c[i]`, trailing zeros).
#[inline]
pub(crate) fn round_decreasing<const K: usize>(t: &[f64]) -> [f64; K] {
    let mut scratch = [0.0; CAPACITY];
    let n = t.len().min(CAPACITY);
    scratch[..n].copy_from_slice(&t[..n]);
    let mut out = [0.0; K];
    vec_sum_err_branch(&mut scratch[..n], &mut out);
    settle(&mut out);
    out
}

/// Repeated top-down TwoSum passes until every adjacent pair is fixed,
/// which yields `|c[i+1]| <= ulp(c[i]) / 2` and pushes zeros to the tail.
#[inline]
pub(crate) fn settle(c: &mut [f64]) {
    let k = c.len();
    for _ in 0..(2 * k + 2) {
        let mut changed = false;
        for i in 0..k - 1 {
            let p = two_sum(c[i], c[i + 1]);
            if p.s != c[i] || p.e != c[i + 1] {
                c[i] = p.s;
                c[i + 1] = p.e;
                changed = true;
            }
        }
        if !changed {
            return;
        }
    }
}

/// Sorts a short slice by decreasing magnitude (insertion sort).
#[inline]
pub(crate) fn sort_decreasing(t: &mut [f64]) {
    for i in 1..t.len() {
        let x = t[i];
        let mut j = i;
        while j > 0 && abs(t[j - 1]) < abs(x) {
            t[j] = t[j - 1];
            j -= 1;
        }
        t[j] = x;
    }
}
