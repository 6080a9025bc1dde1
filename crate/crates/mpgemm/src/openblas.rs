use std::os::raw::c_int;

use mpgemm_core::ozaki::GemmBackend;

const ROW_MAJOR: c_int = 101;
const NO_TRANS: c_int = 111;

#[link(name = "openblas")]
extern "C" {
    fn cblas_dgemm(
        layout: c_int,
        transa: c_int,
        transb: c_int,
        m: c_int,
        n: c_int,
        k: c_int,
        alpha: f64,
        a: *const f64,
        lda: c_int,
        b: *const f64,
        ldb: c_int,
        beta: f64,
        c: *mut f64,
        ldc: c_int,
    );
}

/// `dgemm` from the system OpenBLAS.
#[derive(Debug, Clone, Copy, Default)]
pub struct OpenBlasBackend;

impl GemmBackend for OpenBlasBackend {
    fn gemm(&self, m: usize, n: usize, l: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
        assert!(a.len() >= m * l && b.len() >= l * n && c.len() >= m * n);
        if m == 0 || n == 0 {
            return;
        }
        if l == 0 {
            c[..m * n].fill(0.0);
            return;
        }
        let dim = |x: usize| c_int::try_from(x).expect("dimension exceeds the CBLAS integer range");
        // SAFETY: the slices cover the row-major extents passed alongside.
        unsafe {
            cblas_dgemm(
                ROW_MAJOR,
                NO_TRANS,
                NO_TRANS,
                dim(m),
                dim(n),
                dim(l),
                1.0,
                a.as_ptr(),
                dim(l),
                b.as_ptr(),
                dim(n),
                0.0,
                c.as_mut_ptr(),
                dim(n),
            );
        }
    }

    fn name(&self) -> &str {
        "openblas"
    }
}
