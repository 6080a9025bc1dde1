//! Row-major dense matrices and the long-precision GEMM baselines.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Debug;
use core::ops::{Add, Div, Index, IndexMut, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::mcfloat::MultiFloat;

/// Element type usable in the dense kernels: binary64 or a multi-float.
pub trait Scalar:
    Copy
    + Send
    + Sync
    + Debug
    + PartialEq
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    const ZERO: Self;
    const ONE: Self;
    /// Unit roundoff of the format.
    const UNIT_ROUNDOFF: f64;

    fn from_f64(x: f64) -> Self;
    fn abs(self) -> Self;
    /// Adds a binary64 value in the working precision.
    fn add_f64(self, x: f64) -> Self;
    /// Leading binary64 word (the value itself for `f64`).
    fn leading(self) -> f64;
    /// All binary64 words whose exact sum is the value.
    fn parts(&self) -> &[f64];
    fn is_finite(&self) -> bool;
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    const UNIT_ROUNDOFF: f64 = f64::EPSILON / 2.0;

    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn abs(self) -> Self {
        crate::eft::abs(self)
    }
    #[inline]
    fn add_f64(self, x: f64) -> Self {
        self + x
    }
    #[inline]
    fn leading(self) -> f64 {
        self
    }
    #[inline]
    fn parts(&self) -> &[f64] {
        core::slice::from_ref(self)
    }
    #[inline]
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

impl<const K: usize> Scalar for MultiFloat<K> {
    const ZERO: Self = MultiFloat::<K>::ZERO;
    const ONE: Self = MultiFloat::<K>::ONE;
    const UNIT_ROUNDOFF: f64 = MultiFloat::<K>::UNIT_ROUNDOFF;

    #[inline]
    fn from_f64(x: f64) -> Self {
        MultiFloat::from_f64(x)
    }
    #[inline]
    fn abs(self) -> Self {
        MultiFloat::abs(self)
    }
    #[inline]
    fn add_f64(self, x: f64) -> Self {
        MultiFloat::add_f64(self, x)
    }
    #[inline]
    fn leading(self) -> f64 {
        self.to_f64()
    }
    #[inline]
    fn parts(&self) -> &[f64] {
        self.components()
    }
    #[inline]
    fn is_finite(&self) -> bool {
        MultiFloat::is_finite(self)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<E> {
    rows: usize,
    cols: usize,
    data: Vec<E>,
}

impl<E: Clone> Matrix<E> {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<E>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Parameter(alloc::format!(
                "{} elements supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> E) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn filled(rows: usize, cols: usize, value: E) -> Self {
        Matrix { rows, cols, data: vec![value; rows * cols] }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn data(&self) -> &[E] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [E] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<E> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[E] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [E] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn map<F>(&self, f: impl FnMut(&E) -> F) -> Matrix<F> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(f).collect() }
    }

    pub fn transpose(&self) -> Self {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].clone())
    }

    /// Copy of the `rows x cols` block starting at `(r0, c0)`.
    pub fn submatrix(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        assert!(r0 + rows <= self.rows && c0 + cols <= self.cols, "block out of range");
        Matrix::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)].clone())
    }

    pub fn set_submatrix(&mut self, r0: usize, c0: usize, block: &Matrix<E>) {
        assert!(r0 + block.rows <= self.rows && c0 + block.cols <= self.cols, "block out of range");
        for i in 0..block.rows {
            let dst = &mut self.data[(r0 + i) * self.cols + c0..(r0 + i) * self.cols + c0 + block.cols];
            dst.clone_from_slice(block.row(i));
        }
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (head, tail) = self.data.split_at_mut(hi * self.cols);
        head[lo * self.cols..(lo + 1) * self.cols].swap_with_slice(&mut tail[..self.cols]);
    }
}

impl<E: Scalar> Matrix<E> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix::filled(rows, cols, E::ZERO)
    }

    pub fn identity(n: usize) -> Self {
        Matrix::from_fn(n, n, |i, j| if i == j { E::ONE } else { E::ZERO })
    }

    /// Binary64 image made of each element's leading word.
    pub fn leading(&self) -> Matrix<f64> {
        self.map(|x| x.leading())
    }

    /// Largest `|a_ij|` over the whole matrix, as a binary64 magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| {
            let v = x.leading().abs();
            if v > m {
                v
            } else {
                m
            }
        })
    }

    /// Position of the first non-finite element, if any.
    pub fn first_non_finite(&self) -> Option<(usize, usize)> {
        self.data.iter().position(|x| !x.is_finite()).map(|p| (p / self.cols, p % self.cols))
    }
}

impl<E> Index<(usize, usize)> for Matrix<E> {
    type Output = E;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &E {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<E> IndexMut<(usize, usize)> for Matrix<E> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut E {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

pub fn mat_add<E: Scalar>(a: &Matrix<E>, b: &Matrix<E>) -> Result<Matrix<E>> {
    if a.shape() != b.shape() {
        return Err(Error::shape("mat_add", a.shape(), b.shape()));
    }
    Ok(zip_with(a, b, |x, y| x + y))
}

pub fn mat_sub<E: Scalar>(a: &Matrix<E>, b: &Matrix<E>) -> Result<Matrix<E>> {
    if a.shape() != b.shape() {
        return Err(Error::shape("mat_sub", a.shape(), b.shape()));
    }
    Ok(zip_with(a, b, |x, y| x - y))
}

fn zip_with<E: Scalar>(a: &Matrix<E>, b: &Matrix<E>, f: impl Fn(E, E) -> E) -> Matrix<E> {
    Matrix { rows: a.rows, cols: a.cols, data: a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect() }
}

/// Per-row maxima of `|a_ip|`.
pub fn max_abs_row<E: Scalar>(a: &Matrix<E>) -> Vec<E> {
    (0..a.rows).map(|i| a.row(i).iter().fold(E::ZERO, |m, &x| larger(m, x.abs()))).collect()
}

/// Per-column maxima of `|b_qj|`.
pub fn max_abs_col<E: Scalar>(b: &Matrix<E>) -> Vec<E> {
    let mut out = vec![E::ZERO; b.cols];
    for i in 0..b.rows {
        for (m, &x) in out.iter_mut().zip(b.row(i)) {
            *m = larger(*m, x.abs());
        }
    }
    out
}

#[inline]
fn larger<E: Scalar>(m: E, x: E) -> E {
    if x > m {
        x
    } else {
        m
    }
}

fn check_inner<E>(op: &'static str, a: &Matrix<E>, b: &Matrix<E>) -> Result<()> {
    if a.cols != b.rows {
        return Err(Error::shape(op, (a.rows, a.cols), (b.rows, b.cols)));
    }
    Ok(())
}

/// Triple-loop product: every `c_ij` is accumulated as
/// `((0 + a_i0 b_0j) + a_i1 b_1j) + ...` in the element type's arithmetic.
pub fn gemm_simple<E: Scalar>(a: &Matrix<E>, b: &Matrix<E>) -> Result<Matrix<E>> {
    check_inner("gemm_simple", a, b)?;
    Ok(gemm_simple_unchecked(a, b))
}

fn gemm_simple_unchecked<E: Scalar>(a: &Matrix<E>, b: &Matrix<E>) -> Matrix<E> {
    let (m, n) = (a.rows, b.cols);
    let mut c = Matrix::zeros(m, n);
    if n == 0 {
        return c;
    }
    let row_kernel = |i: usize, crow: &mut [E]| {
        for (k, &aik) in a.row(i).iter().enumerate() {
            for (cij, &bkj) in crow.iter_mut().zip(b.row(k)) {
                *cij = *cij + aik * bkj;
            }
        }
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        c.data.par_chunks_mut(n).enumerate().for_each(|(i, crow)| row_kernel(i, crow));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (i, crow) in c.data.chunks_mut(n).enumerate() {
            row_kernel(i, crow);
        }
    }
    c
}

/// Default recursion cutoff for [`strassen`].
pub const DEFAULT_STRASSEN_CUTOFF: usize = 32;

/// Strassen's algorithm: seven half-size products and eighteen block
/// additions per level, recursing until the smallest dimension is at most
/// `cutoff`, then falling back to [`gemm_simple`]. Odd dimensions are padded
/// with a zero row/column at the level where they occur.
pub fn strassen<E: Scalar>(a: &Matrix<E>, b: &Matrix<E>, cutoff: usize) -> Result<Matrix<E>> {
    check_inner("strassen", a, b)?;
    if cutoff == 0 {
        return Err(Error::Parameter("strassen cutoff must be positive".into()));
    }
    Ok(strassen_rec(a, b, cutoff))
}

fn strassen_rec<E: Scalar>(a: &Matrix<E>, b: &Matrix<E>, cutoff: usize) -> Matrix<E> {
    let (m, l, n) = (a.rows, a.cols, b.cols);
    if m.min(l).min(n) <= cutoff {
        return gemm_simple_unchecked(a, b);
    }
    let (mh, lh, nh) = (m.div_ceil(2), l.div_ceil(2), n.div_ceil(2));
    let a11 = padded_block(a, 0, 0, mh, lh);
    let a12 = padded_block(a, 0, lh, mh, lh);
    let a21 = padded_block(a, mh, 0, mh, lh);
    let a22 = padded_block(a, mh, lh, mh, lh);
    let b11 = padded_block(b, 0, 0, lh, nh);
    let b12 = padded_block(b, 0, nh, lh, nh);
    let b21 = padded_block(b, lh, 0, lh, nh);
    let b22 = padded_block(b, lh, nh, lh, nh);

    let add = |x: &Matrix<E>, y: &Matrix<E>| zip_with(x, y, |p, q| p + q);
    let sub = |x: &Matrix<E>, y: &Matrix<E>| zip_with(x, y, |p, q| p - q);

    let operands = [
        (add(&a11, &a22), add(&b11, &b22)),
        (add(&a21, &a22), b11.clone()),
        (a11.clone(), sub(&b12, &b22)),
        (a22.clone(), sub(&b21, &b11)),
        (add(&a11, &a12), b22.clone()),
        (sub(&a21, &a11), add(&b11, &b12)),
        (sub(&a12, &a22), add(&b21, &b22)),
    ];

    #[cfg(feature = "parallel")]
    let products: Vec<Matrix<E>> = {
        use rayon::prelude::*;
        operands.par_iter().map(|(x, y)| strassen_rec(x, y, cutoff)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let products: Vec<Matrix<E>> = operands.iter().map(|(x, y)| strassen_rec(x, y, cutoff)).collect();

    let [m1, m2, m3, m4, m5, m6, m7]: [Matrix<E>; 7] = products.try_into().unwrap_or_else(|_| unreachable!());

    let c11 = add(&sub(&add(&m1, &m4), &m5), &m7);
    let c12 = add(&m3, &m5);
    let c21 = add(&m2, &m4);
    let c22 = add(&add(&sub(&m1, &m2), &m3), &m6);

    let mut c = Matrix::zeros(m, n);
    copy_clipped(&mut c, &c11, 0, 0);
    copy_clipped(&mut c, &c12, 0, nh);
    copy_clipped(&mut c, &c21, mh, 0);
    copy_clipped(&mut c, &c22, mh, nh);
    c
}

/// `rows x cols` block at `(r0, c0)`, zero-filled where it runs past the
/// source matrix.
fn padded_block<E: Scalar>(src: &Matrix<E>, r0: usize, c0: usize, rows: usize, cols: usize) -> Matrix<E> {
    Matrix::from_fn(rows, cols, |i, j| {
        let (r, c) = (r0 + i, c0 + j);
        if r < src.rows && c < src.cols {
            src[(r, c)]
        } else {
            E::ZERO
        }
    })
}

fn copy_clipped<E: Scalar>(dst: &mut Matrix<E>, block: &Matrix<E>, r0: usize, c0: usize) {
    let rows = block.rows.min(dst.rows.saturating_sub(r0));
    let cols = block.cols.min(dst.cols.saturating_sub(c0));
    for i in 0..rows {
        let dcols = dst.cols;
        dst.data[(r0 + i) * dcols + c0..(r0 + i) * dcols + c0 + cols].copy_from_slice(&block.row(i)[..cols]);
    }
}
