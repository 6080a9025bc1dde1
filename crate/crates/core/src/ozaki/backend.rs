//! Binary64 GEMM providers.

use alloc::vec;

/// A short-precision (binary64) matrix multiply.
///
/// `c` (m x n, row-major) is overwritten with `a` (m x l) times `b` (l x n).
/// Any summation order, blocking or FMA use is allowed: the Ozaki splitting
/// guarantees the products it requests are exact regardless.
pub trait GemmBackend: Sync {
    fn gemm(&self, m: usize, n: usize, l: usize, a: &[f64], b: &[f64], c: &mut [f64]);

    fn name(&self) -> &str {
        "custom"
    }
}

impl<T: GemmBackend + ?Sized> GemmBackend for &T {
    fn gemm(&self, m: usize, n: usize, l: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
        (**self).gemm(m, n, l, a, b, c)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

/// Plain triple loop, `c_ij = ((0 + a_i0 b_0j) + a_i1 b_1j) + ...`.
pub fn naive_gemm(m: usize, n: usize, l: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    check_dims(m, n, l, a, b, c);
    c.fill(0.0);
    for i in 0..m {
        for k in 0..l {
            let aik = a[i * l + k];
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
}

fn check_dims(m: usize, n: usize, l: usize, a: &[f64], b: &[f64], c: &[f64]) {
    assert_eq!(a.len(), m * l, "A must be m x l");
    assert_eq!(b.len(), l * n, "B must be l x n");
    assert_eq!(c.len(), m * n, "C must be m x n");
}

const MR: usize = 4;
const NR: usize = 8;
const KC: usize = 256;
const MC: usize = 128;
const NC: usize = 2048;

/// Portable cache-blocked GEMM.
///
/// Panels of A and B are packed and multiplied by a 4x8 register tile. The
/// tile is loaded from C and updated one `k` at a time without fused
/// multiply-adds, so every element sees exactly the sequence of roundings
/// of [`naive_gemm`]; the result is bit-identical to it on every machine.
#[derive(Debug, Default, Clone, Copy)]
pub struct ReferenceBackend;

impl GemmBackend for ReferenceBackend {
    fn gemm(&self, m: usize, n: usize, l: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
        check_dims(m, n, l, a, b, c);
        c.fill(0.0);
        if m == 0 || n == 0 || l == 0 {
            return;
        }
        blocked_gemm(m, n, l, a, b, c);
    }

    fn name(&self) -> &str {
        "reference"
    }
}

fn blocked_gemm(m: usize, n: usize, l: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    let mut bpack = vec![0.0; KC * NC.min(n).next_multiple_of(NR)];
    for jc in (0..n).step_by(NC) {
        let nc = NC.min(n - jc);
        for pc in (0..l).step_by(KC) {
            let kc = KC.min(l - pc);
            pack_b(b, n, pc, kc, jc, nc, &mut bpack);
            let bpack = &bpack[..];
            let row_block = |ic: usize, cblock: &mut [f64]| {
                let mc = MC.min(m - ic);
                let mut apack = vec![0.0; MC * KC];
                pack_a(a, l, ic, mc, pc, kc, &mut apack);
                macro_kernel(mc, nc, kc, &apack, bpack, cblock, n, jc);
            };
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                c.par_chunks_mut(MC * n).enumerate().for_each(|(blk, cblock)| row_block(blk * MC, cblock));
            }
            #[cfg(not(feature = "parallel"))]
            {
                for (blk, cblock) in c.chunks_mut(MC * n).enumerate() {
                    row_block(blk * MC, cblock);
                }
            }
        }
    }
}

/// Packs `A[ic..ic+mc, pc..pc+kc]` into MR-row slivers, k-major, zero padded.
fn pack_a(a: &[f64], lda: usize, ic: usize, mc: usize, pc: usize, kc: usize, out: &mut [f64]) {
    for (s, i0) in (0..mc).step_by(MR).enumerate() {
        let sliver = &mut out[s * MR * kc..(s + 1) * MR * kc];
        for k in 0..kc {
            for r in 0..MR {
                sliver[k * MR + r] = if i0 + r < mc { a[(ic + i0 + r) * lda + pc + k] } else { 0.0 };
            }
        }
    }
}

/// Packs `B[pc..pc+kc, jc..jc+nc]` into NR-column slivers, k-major, zero padded.
fn pack_b(b: &[f64], ldb: usize, pc: usize, kc: usize, jc: usize, nc: usize, out: &mut [f64]) {
    for (s, j0) in (0..nc).step_by(NR).enumerate() {
        let sliver = &mut out[s * NR * kc..(s + 1) * NR * kc];
        for k in 0..kc {
            let row = &b[(pc + k) * ldb + jc..];
            for q in 0..NR {
                sliver[k * NR + q] = if j0 + q < nc { row[j0 + q] } else { 0.0 };
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn macro_kernel(
    mc: usize,
    nc: usize,
    kc: usize,
    apack: &[f64],
    bpack: &[f64],
    cblock: &mut [f64],
    ldc: usize,
    jc: usize,
) {
    #[cfg(all(feature = "std", target_arch = "x86_64"))]
    {
        if std::is_x86_feature_detected!("avx2") {
            // SAFETY: the feature was detected at runtime just above.
            unsafe { macro_kernel_avx2(mc, nc, kc, apack, bpack, cblock, ldc, jc) };
            return;
        }
    }
    macro_kernel_generic(mc, nc, kc, apack, bpack, cblock, ldc, jc);
}

#[cfg(all(feature = "std", target_arch = "x86_64"))]
#[target_feature(enable = "avx2")]
#[allow(clippy::too_many_arguments)]
unsafe fn macro_kernel_avx2(
    mc: usize,
    nc: usize,
    kc: usize,
    apack: &[f64],
    bpack: &[f64],
    cblock: &mut [f64],
    ldc: usize,
    jc: usize,
) {
    macro_kernel_generic(mc, nc, kc, apack, bpack, cblock, ldc, jc);
}

#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn macro_kernel_generic(
    mc: usize,
    nc: usize,
    kc: usize,
    apack: &[f64],
    bpack: &[f64],
    cblock: &mut [f64],
    ldc: usize,
    jc: usize,
) {
    for (sj, j0) in (0..nc).step_by(NR).enumerate() {
        let bs = &bpack[sj * NR * kc..(sj + 1) * NR * kc];
        let nr = NR.min(nc - j0);
        for (si, i0) in (0..mc).step_by(MR).enumerate() {
            let as_ = &apack[si * MR * kc..(si + 1) * MR * kc];
            let mr = MR.min(mc - i0);
            let mut tile = [[0.0f64; NR]; MR];
            for r in 0..mr {
                let src = &cblock[(i0 + r) * ldc + jc + j0..(i0 + r) * ldc + jc + j0 + nr];
                tile[r][..nr].copy_from_slice(src);
            }
            micro_kernel(kc, as_, bs, &mut tile);
            for r in 0..mr {
                let dst = &mut cblock[(i0 + r) * ldc + jc + j0..(i0 + r) * ldc + jc + j0 + nr];
                dst.copy_from_slice(&tile[r][..nr]);
            }
        }
    }
}

#[inline(always)]
fn micro_kernel(kc: usize, a: &[f64], b: &[f64], tile: &mut [[f64; NR]; MR]) {
    let a = &a[..kc * MR];
    let b = &b[..kc * NR];
    for k in 0..kc {
        let ak: &[f64; MR] = a[k * MR..k * MR + MR].try_into().unwrap();
        let bk: &[f64; NR] = b[k * NR..k * NR + NR].try_into().unwrap();
        for r in 0..MR {
            for q in 0..NR {
                tile[r][q] += ak[r] * bk[q];
            }
        }
    }
}

/// Adversarial backend: every element sums its `l` products in a freshly
/// shuffled order and randomly chooses between fused and separate
/// multiply-adds. Exact inputs still give exact outputs; anything else
/// shows up as a difference.
#[derive(Debug, Clone, Copy)]
pub struct ShuffledBackend {
    pub seed: u64,
}

impl GemmBackend for ShuffledBackend {
    fn gemm(&self, m: usize, n: usize, l: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
        use rand_xoshiro::rand_core::{RngCore, SeedableRng};
        check_dims(m, n, l, a, b, c);
        let mut order: alloc::vec::Vec<usize> = (0..l).collect();
        for i in 0..m {
            for j in 0..n {
                let mut rng = rand_xoshiro::SplitMix64::seed_from_u64(
                    self.seed ^ ((i * n + j) as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15),
                );
                for k in (1..l).rev() {
                    let r = (rng.next_u64() % (k as u64 + 1)) as usize;
                    order.swap(k, r);
                }
                let mut s = 0.0;
                for &k in &order {
                    let (x, y) = (a[i * l + k], b[k * n + j]);
                    s = if rng.next_u64() & 1 == 1 { crate::eft::fma(x, y, s) } else { s + x * y };
                }
                c[i * n + j] = s;
            }
        }
    }

    fn name(&self) -> &str {
        "shuffled"
    }
}

/// Wraps a backend and counts the calls made through it.
#[derive(Debug, Default)]
pub struct CountingBackend<B> {
    pub inner: B,
    calls: core::sync::atomic::AtomicUsize,
}

impl<B> CountingBackend<B> {
    pub fn new(inner: B) -> Self {
        CountingBackend { inner, calls: core::sync::atomic::AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(core::sync::atomic::Ordering::Relaxed)
    }
}

impl<B: GemmBackend> GemmBackend for CountingBackend<B> {
    fn gemm(&self, m: usize, n: usize, l: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
        self.calls.fetch_add(1, core::sync::atomic::Ordering::Relaxed);
        self.inner.gemm(m, n, l, a, b, c)
    }

    fn name(&self) -> &str {
        self.inner.name()
    }
}
