//! Ozaki-scheme matrix multiplication: long-precision operands are split
//! into binary64 pieces whose pairwise products are exact, the products are
//! delegated to a binary64 GEMM and summed back in the working precision.

mod backend;

pub use backend::{naive_gemm, CountingBackend, GemmBackend, ReferenceBackend, ShuffledBackend};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::time::Duration;

use crate::error::{Error, Result};
use crate::expansion::Expansion;
use crate::matrix::{Matrix, Scalar};

/// Significand width of the short (binary64) format.
pub const SHORT_BITS: u32 = 53;

/// Which operand of `A * B` a matrix is; selects row or column scaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Left operand, one shift per row.
    A,
    /// Right operand, one shift per column.
    B,
}

/// How the last of the `D` pieces is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TailPiece {
    /// The last piece is extracted with a shift like the others, so every
    /// piece product is exact. What it leaves behind stays in the residual.
    #[default]
    Extracted,
    /// The last piece is the whole leading word of what remains. Products
    /// involving it may round.
    Remainder,
}

/// Smallest `e` with `2^e >= x`, read off the exponent field.
///
/// `x` must be positive and finite.
pub fn exponent_ceil_log2(x: f64) -> i32 {
    debug_assert!(x > 0.0 && x.is_finite(), "exponent_ceil_log2 needs a positive finite value");
    let bits = x.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i32;
    let mant = bits & ((1u64 << 52) - 1);
    if biased == 0 {
        // Subnormal: x = mant * 2^-1074.
        let ceil_mant = 64 - (mant - 1).leading_zeros() as i32;
        return ceil_mant - 1074;
    }
    let e = biased - 1023;
    if mant == 0 {
        e
    } else {
        e + 1
    }
}

/// `ceil((53 + log2 l) / 2)`, evaluated exactly with integers.
pub fn shift_exponent(l: usize) -> i32 {
    let l = l.max(1) as u128;
    let mut t = (SHORT_BITS as i32 + 1) / 2;
    while !(2 * t >= SHORT_BITS as i32 && (1u128 << (2 * t - SHORT_BITS as i32)) >= l) {
        t += 1;
    }
    t
}

/// Exact power of two for exponents in the binary64 range.
fn pow2(e: i32) -> f64 {
    if e >= -1022 {
        f64::from_bits(((e + 1023) as u64) << 52)
    } else {
        f64::from_bits(1u64 << (e + 1074))
    }
}

/// The binary64 pieces of one operand.
#[derive(Debug, Clone)]
pub struct SplitSet {
    pieces: Vec<Matrix<f64>>,
    side: Side,
    inner_dim: usize,
    /// Per piece, per row (side A) or column (side B): the exponent of the
    /// shift constant, or `None` where the line was entirely zero.
    shifts: Vec<Vec<Option<i32>>>,
}

impl SplitSet {
    pub fn pieces(&self) -> &[Matrix<f64>] {
        &self.pieces
    }

    pub fn piece(&self, alpha: usize) -> &Matrix<f64> {
        &self.pieces[alpha]
    }

    pub fn splits(&self) -> usize {
        self.pieces.len()
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn short_bits(&self) -> u32 {
        SHORT_BITS
    }

    pub fn inner_dim(&self) -> usize {
        self.inner_dim
    }

    /// Shift exponent used for line `line` of piece `alpha`. Every entry of
    /// the line is an integer multiple of `2^(shift - 53)`.
    pub fn shift(&self, alpha: usize, line: usize) -> Option<i32> {
        self.shifts[alpha][line]
    }
}

/// Splits `m` into `d` pieces, discarding the residual.
pub fn split_matrix<E: Scalar>(m: &Matrix<E>, d: usize, side: Side) -> Result<SplitSet> {
    split_with_residual(m, d, side, TailPiece::Extracted).map(|(s, _)| s)
}

/// Splits `m` into `d` pieces and also returns what remains, so that
/// `sum(pieces) + residual == m` exactly.
pub fn split_with_residual<E: Scalar>(
    m: &Matrix<E>,
    d: usize,
    side: Side,
    tail: TailPiece,
) -> Result<(SplitSet, Matrix<E>)> {
    if d == 0 {
        return Err(Error::Parameter("split count must be at least 1".into()));
    }
    if let Some((row, col)) = m.first_non_finite() {
        return Err(Error::NonFinite { row, col });
    }
    let (rows, cols) = m.shape();
    let inner_dim = match side {
        Side::A => cols,
        Side::B => rows,
    };
    let t = shift_exponent(inner_dim);
    let mut residual = m.clone();
    let mut pieces = Vec::with_capacity(d);
    let mut shifts = Vec::with_capacity(d);

    for alpha in 0..d {
        let mut piece = Matrix::<f64>::zeros(rows, cols);
        if alpha + 1 == d && tail == TailPiece::Remainder {
            update_rows(&mut residual, &mut piece, |_, x| x);
            shifts.push(vec![None; line_count(rows, cols, side)]);
            pieces.push(piece);
            break;
        }
        let mu = line_maxima(&residual, side);
        let mut line_shift = Vec::with_capacity(mu.len());
        let mut tau = Vec::with_capacity(mu.len());
        for &x in &mu {
            if x == 0.0 {
                line_shift.push(None);
                tau.push(0.0);
            } else {
                let e = exponent_ceil_log2(x) + t;
                if e > 1023 {
                    return Err(Error::Parameter(format!("entries of magnitude {x:e} are too large to split")));
                }
                line_shift.push(Some(e));
                tau.push(pow2(e));
            }
        }
        let extract = |line: usize, x: f64| {
            let s = tau[line];
            // Two separately rounded binary64 operations; Rust never fuses
            // or reassociates them.
            (x + s) - s
        };
        let select = |i: usize, j: usize| match side {
            Side::A => i,
            Side::B => j,
        };
        update_rows(&mut residual, &mut piece, |(i, j), x| extract(select(i, j), x));
        shifts.push(line_shift);
        pieces.push(piece);
    }
    Ok((SplitSet { pieces, side, inner_dim, shifts }, residual))
}

fn line_count(rows: usize, cols: usize, side: Side) -> usize {
    match side {
        Side::A => rows,
        Side::B => cols,
    }
}

/// Per-line maxima of the leading words' magnitudes.
fn line_maxima<E: Scalar>(m: &Matrix<E>, side: Side) -> Vec<f64> {
    let (rows, cols) = m.shape();
    let mut mu = vec![0.0f64; line_count(rows, cols, side)];
    for i in 0..rows {
        for (j, x) in m.row(i).iter().enumerate() {
            let v = x.leading().abs();
            let slot = match side {
                Side::A => &mut mu[i],
                Side::B => &mut mu[j],
            };
            if v > *slot {
                *slot = v;
            }
        }
    }
    mu
}

/// Sets `piece_ij = f(x_ij)` from the leading word `x_ij` of the residual and
/// subtracts it from the residual in the working precision.
fn update_rows<E: Scalar>(
    residual: &mut Matrix<E>,
    piece: &mut Matrix<f64>,
    f: impl Fn((usize, usize), f64) -> f64 + Sync,
) {
    let cols = residual.cols();
    if cols == 0 {
        return;
    }
    let body = |i: usize, rrow: &mut [E], prow: &mut [f64]| {
        for (j, (r, p)) in rrow.iter_mut().zip(prow.iter_mut()).enumerate() {
            let v = f((i, j), r.leading());
            if v != 0.0 {
                let old = *r;
                *r = r.add_f64(-v);
                debug_assert!(difference_is_exact(old, *r, v), "residual update rounded at ({i}, {j})");
            }
            *p = v;
        }
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        residual
            .data_mut()
            .par_chunks_mut(cols)
            .zip(piece.data_mut().par_chunks_mut(cols))
            .enumerate()
            .for_each(|(i, (rrow, prow))| body(i, rrow, prow));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (i, (rrow, prow)) in residual.data_mut().chunks_mut(cols).zip(piece.data_mut().chunks_mut(cols)).enumerate()
        {
            body(i, rrow, prow);
        }
    }
}

/// Checks `old - new - v == 0` exactly.
fn difference_is_exact<E: Scalar>(old: E, new: E, v: f64) -> bool {
    let mut e = Expansion::new();
    for &x in old.parts() {
        e.grow(x);
    }
    for &x in new.parts() {
        e.grow(-x);
    }
    e.grow(-v);
    e.len() == 0
}

/// Options for [`ozaki_gemm_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OzakiOptions {
    /// Number of pieces per operand.
    pub splits: usize,
    pub tail: TailPiece,
    /// If set, products `C_ab` with `a + b > threshold` (1-based) are
    /// skipped. Off by default: every product of the triangle is summed.
    pub drop_threshold: Option<usize>,
}

impl OzakiOptions {
    pub fn new(splits: usize) -> Self {
        OzakiOptions { splits, tail: TailPiece::Extracted, drop_threshold: None }
    }
}

/// Phase timings of one Ozaki product. Times are zero without `std`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OzakiProfile {
    pub split_time: Duration,
    pub product_time: Duration,
    pub accumulate_time: Duration,
    pub splits: usize,
    pub backend_calls: usize,
}

impl OzakiProfile {
    pub fn total(&self) -> Duration {
        self.split_time + self.product_time + self.accumulate_time
    }

    /// Fractions of the total spent splitting, multiplying and accumulating.
    pub fn fractions(&self) -> [f64; 3] {
        let total = self.total().as_secs_f64();
        if total == 0.0 {
            return [0.0; 3];
        }
        [
            self.split_time.as_secs_f64() / total,
            self.product_time.as_secs_f64() / total,
            self.accumulate_time.as_secs_f64() / total,
        ]
    }

    /// Adds another profile's times and counts to this one.
    pub fn absorb(&mut self, other: &OzakiProfile) {
        self.split_time += other.split_time;
        self.product_time += other.product_time;
        self.accumulate_time += other.accumulate_time;
        self.backend_calls += other.backend_calls;
        self.splits = other.splits;
    }
}

#[cfg(feature = "std")]
struct Stopwatch(std::time::Instant);

#[cfg(feature = "std")]
impl Stopwatch {
    fn start() -> Self {
        Stopwatch(std::time::Instant::now())
    }
    fn lap(&mut self) -> Duration {
        let now = std::time::Instant::now();
        let d = now - self.0;
        self.0 = now;
        d
    }
}

#[cfg(not(feature = "std"))]
struct Stopwatch;

#[cfg(not(feature = "std"))]
impl Stopwatch {
    fn start() -> Self {
        Stopwatch
    }
    fn lap(&mut self) -> Duration {
        Duration::ZERO
    }
}

/// `A * B` with `d` pieces per operand.
pub fn ozaki_gemm<E: Scalar, G: GemmBackend + ?Sized>(
    a: &Matrix<E>,
    b: &Matrix<E>,
    d: usize,
    backend: &G,
) -> Result<(Matrix<E>, OzakiProfile)> {
    ozaki_gemm_with(a, b, &OzakiOptions::new(d), backend)
}

pub fn ozaki_gemm_with<E: Scalar, G: GemmBackend + ?Sized>(
    a: &Matrix<E>,
    b: &Matrix<E>,
    opts: &OzakiOptions,
    backend: &G,
) -> Result<(Matrix<E>, OzakiProfile)> {
    if a.cols() != b.rows() {
        return Err(Error::shape("ozaki_gemm", a.shape(), b.shape()));
    }
    let d = opts.splits;
    let mut profile = OzakiProfile { splits: d, ..Default::default() };
    let mut clock = Stopwatch::start();
    let (sa, _) = split_with_residual(a, d, Side::A, opts.tail)?;
    let (sb, _) = split_with_residual(b, d, Side::B, opts.tail)?;
    profile.split_time = clock.lap();

    let (m, l, n) = (a.rows(), a.cols(), b.cols());
    let mut c = Matrix::<E>::zeros(m, n);
    let mut prod = vec![0.0; m * n];
    for alpha in 0..d {
        for beta in 0..d - alpha {
            if opts.drop_threshold.is_some_and(|t| alpha + beta + 2 > t) {
                continue;
            }
            backend.gemm(m, n, l, sa.piece(alpha).data(), sb.piece(beta).data(), &mut prod);
            profile.backend_calls += 1;
            profile.product_time += clock.lap();
            accumulate(&mut c, &prod);
            profile.accumulate_time += clock.lap();
        }
    }
    Ok((c, profile))
}

fn accumulate<E: Scalar>(c: &mut Matrix<E>, prod: &[f64]) {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        c.data_mut().par_iter_mut().zip(prod.par_iter()).for_each(|(x, &p)| *x = x.add_f64(p));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (x, &p) in c.data_mut().iter_mut().zip(prod) {
            *x = x.add_f64(p);
        }
    }
}
