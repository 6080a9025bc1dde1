//! Blocked right-looking LU factorisation with partial pivoting.
//!
//! Panels are eliminated column by column in the working precision; only the
//! rank-K trailing update `A22 -= L21 * U12` goes through the selected GEMM.

use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::matrix::{gemm_simple, strassen, Matrix, Scalar};
use crate::ozaki::{ozaki_gemm, GemmBackend, OzakiProfile};

/// Which multiplication performs the trailing update.
#[derive(Clone, Copy)]
pub enum GemmChoice<'a> {
    Simple,
    Strassen { cutoff: usize },
    Ozaki { splits: usize, backend: &'a dyn GemmBackend },
}

impl fmt::Debug for GemmChoice<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GemmChoice::Simple => write!(f, "Simple"),
            GemmChoice::Strassen { cutoff } => write!(f, "Strassen {{ cutoff: {cutoff} }}"),
            GemmChoice::Ozaki { splits, backend } => {
                write!(f, "Ozaki {{ splits: {splits}, backend: {} }}", backend.name())
            }
        }
    }
}

impl GemmChoice<'_> {
    fn multiply<E: Scalar>(&self, a: &Matrix<E>, b: &Matrix<E>, prof: &mut OzakiProfile) -> Result<Matrix<E>> {
        match *self {
            GemmChoice::Simple => gemm_simple(a, b),
            GemmChoice::Strassen { cutoff } => strassen(a, b, cutoff),
            GemmChoice::Ozaki { splits, backend } => {
                let (c, p) = ozaki_gemm(a, b, splits, backend)?;
                prof.absorb(&p);
                Ok(c)
            }
        }
    }
}

/// `P A = L U` packed into one matrix: unit lower `L` strictly below the
/// diagonal, `U` on and above it.
#[derive(Debug, Clone)]
pub struct LuFactors<E> {
    pub lu: Matrix<E>,
    /// `perm[i]` is the row of `A` that ended up in row `i`.
    pub perm: Vec<usize>,
    pub panel_width: usize,
    /// Accumulated Ozaki timings of the trailing updates (empty otherwise).
    pub profile: OzakiProfile,
}

impl<E: Scalar> LuFactors<E> {
    pub fn n(&self) -> usize {
        self.lu.rows()
    }

    /// Explicit unit lower factor.
    pub fn lower(&self) -> Matrix<E> {
        Matrix::from_fn(self.n(), self.n(), |i, j| match i.cmp(&j) {
            core::cmp::Ordering::Greater => self.lu[(i, j)],
            core::cmp::Ordering::Equal => E::ONE,
            core::cmp::Ordering::Less => E::ZERO,
        })
    }

    /// Explicit upper factor.
    pub fn upper(&self) -> Matrix<E> {
        Matrix::from_fn(self.n(), self.n(), |i, j| if i <= j { self.lu[(i, j)] } else { E::ZERO })
    }

    /// Rows of `a` in pivot order.
    pub fn permute_rows(&self, a: &Matrix<E>) -> Matrix<E> {
        Matrix::from_fn(a.rows(), a.cols(), |i, j| a[(self.perm[i], j)])
    }

    pub fn permute_vec(&self, b: &[E]) -> Vec<E> {
        self.perm.iter().map(|&p| b[p]).collect()
    }

    /// Solves `A x = b` with these factors.
    pub fn solve(&self, b: &[E]) -> Result<Vec<E>> {
        if b.len() != self.n() {
            return Err(Error::shape("lu_solve", self.lu.shape(), (b.len(), 1)));
        }
        let y = forward_sub(&self.lu, &self.permute_vec(b))?;
        backward_sub(&self.lu, &y)
    }
}

/// Factorises `a` with panel width `k`.
pub fn blocked_lu<E: Scalar>(a: &Matrix<E>, k: usize, gemm: GemmChoice<'_>) -> Result<LuFactors<E>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::shape("blocked_lu", a.shape(), a.shape()));
    }
    if k == 0 || (n > 0 && k > n) {
        return Err(Error::Parameter(alloc::format!("panel width {k} outside 1..={n}")));
    }
    if let Some((row, col)) = a.first_non_finite() {
        return Err(Error::NonFinite { row, col });
    }
    let mut w = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut profile = OzakiProfile::default();

    let mut k0 = 0;
    while k0 < n {
        let kb = k.min(n - k0);
        let k1 = k0 + kb;
        factor_panel(&mut w, &mut perm, k0, k1)?;
        if k1 < n {
            solve_u12(&mut w, k0, k1);
            let l21 = w.submatrix(k1, k0, n - k1, kb);
            let u12 = w.submatrix(k0, k1, kb, n - k1);
            let prod = gemm.multiply(&l21, &u12, &mut profile)?;
            subtract_block(&mut w, k1, &prod);
        }
        k0 = k1;
    }
    Ok(LuFactors { lu: w, perm, panel_width: k, profile })
}

/// Unblocked right-looking elimination of the whole matrix.
pub fn unblocked_lu<E: Scalar>(a: &Matrix<E>) -> Result<LuFactors<E>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::shape("unblocked_lu", a.shape(), a.shape()));
    }
    if let Some((row, col)) = a.first_non_finite() {
        return Err(Error::NonFinite { row, col });
    }
    let mut w = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    factor_panel(&mut w, &mut perm, 0, n)?;
    Ok(LuFactors { lu: w, perm, panel_width: n, profile: OzakiProfile::default() })
}

/// Eliminates columns `k0..k1` over rows `k0..n`, swapping whole rows.
fn factor_panel<E: Scalar>(w: &mut Matrix<E>, perm: &mut [usize], k0: usize, k1: usize) -> Result<()> {
    let n = w.rows();
    for j in k0..k1 {
        let mut p = j;
        let mut best = w[(j, j)].abs();
        for i in j + 1..n {
            let v = w[(i, j)].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == E::ZERO {
            return Err(Error::Singular(j));
        }
        if p != j {
            w.swap_rows(p, j);
            perm.swap(p, j);
        }
        let (top, bottom) = w.data_mut().split_at_mut((j + 1) * n);
        let pivot_row = &top[j * n..];
        let pivot = pivot_row[j];
        let update = |row: &mut [E]| {
            let l = row[j] / pivot;
            row[j] = l;
            for c in j + 1..k1 {
                row[c] = row[c] - l * pivot_row[c];
            }
        };
        for_rows(bottom, n, update);
    }
    Ok(())
}

/// `U12 := L11^{-1} A12` (unit lower, in place).
fn solve_u12<E: Scalar>(w: &mut Matrix<E>, k0: usize, k1: usize) {
    let n = w.cols();
    for r in k0..k1 {
        for i in r + 1..k1 {
            let l = w[(i, r)];
            for c in k1..n {
                let v = w[(i, c)] - l * w[(r, c)];
                w[(i, c)] = v;
            }
        }
    }
}

fn subtract_block<E: Scalar>(w: &mut Matrix<E>, k1: usize, prod: &Matrix<E>) {
    let n = w.cols();
    let m = n - k1;
    if m == 0 {
        return;
    }
    let rows = &mut w.data_mut()[k1 * n..];
    let body = |(row, p): (&mut [E], &[E])| {
        for (x, &q) in row[k1..].iter_mut().zip(p) {
            *x = *x - q;
        }
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        rows.par_chunks_mut(n).zip(prod.data().par_chunks(m)).for_each(body);
    }
    #[cfg(not(feature = "parallel"))]
    rows.chunks_mut(n).zip(prod.data().chunks(m)).for_each(body);
}

fn for_rows<E: Scalar>(data: &mut [E], n: usize, f: impl Fn(&mut [E]) + Sync + Send) {
    if n == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        data.par_chunks_mut(n).for_each(f);
    }
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(n).for_each(f);
}

/// Solves `L y = b` with the unit lower triangle of `l` (its diagonal and
/// upper part are ignored).
pub fn forward_sub<E: Scalar>(l: &Matrix<E>, b: &[E]) -> Result<Vec<E>> {
    let n = l.rows();
    if l.cols() != n || b.len() != n {
        return Err(Error::shape("forward_sub", l.shape(), (b.len(), 1)));
    }
    let mut y: Vec<E> = Vec::with_capacity(n);
    for i in 0..n {
        let row = l.row(i);
        let mut s = b[i];
        for j in 0..i {
            s = s - row[j] * y[j];
        }
        y.push(s);
    }
    Ok(y)
}

/// Solves `U x = y` with the upper triangle of `u` (the strictly lower part
/// is ignored).
pub fn backward_sub<E: Scalar>(u: &Matrix<E>, y: &[E]) -> Result<Vec<E>> {
    let n = u.rows();
    if u.cols() != n || y.len() != n {
        return Err(Error::shape("backward_sub", u.shape(), (y.len(), 1)));
    }
    let mut x = alloc::vec![E::ZERO; n];
    for i in (0..n).rev() {
        let row = u.row(i);
        if row[i] == E::ZERO {
            return Err(Error::Singular(i));
        }
        let mut s = y[i];
        for j in i + 1..n {
            s = s - row[j] * x[j];
        }
        x[i] = s / row[i];
    }
    Ok(x)
}

/// Factorises and solves `A x = b`.
pub fn lu_solve<E: Scalar>(a: &Matrix<E>, b: &[E], k: usize, gemm: GemmChoice<'_>) -> Result<Vec<E>> {
    blocked_lu(a, k, gemm)?.solve(b)
}

/// `max|PA - LU|` evaluated in the working precision.
pub fn residual_max<E: Scalar>(a: &Matrix<E>, f: &LuFactors<E>) -> Result<f64> {
    let lu = gemm_simple(&f.lower(), &f.upper())?;
    let pa = f.permute_rows(a);
    Ok(crate::matrix::mat_sub(&pa, &lu)?.max_abs())
}

/// Growth factor `max|U| / max|A|`.
pub fn growth_factor<E: Scalar>(a: &Matrix<E>, f: &LuFactors<E>) -> f64 {
    let ma = a.max_abs();
    if ma == 0.0 {
        return 0.0;
    }
    f.upper().max_abs() / ma
}
