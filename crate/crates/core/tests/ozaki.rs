use mpgemm_core::gen::{gen_test_matrix, RngSpec};
use mpgemm_core::matrix::Matrix;
use mpgemm_core::oracle::{exact_gemm, max_rel_error, to_exact};
use mpgemm_core::ozaki::{
    exponent_ceil_log2, ozaki_gemm, shift_exponent, split_matrix, split_with_residual, GemmBackend, ReferenceBackend,
    ShuffledBackend, Side, TailPiece,
};
use mpgemm_core::{DoubleDouble, ExactScalar, MultiFloat, QuadDouble, TripleDouble};
use proptest::prelude::*;

fn ceil_log2_by_scan(x: f64) -> i32 {
    let mut p = f64::from_bits(1);
    let mut e = -1074;
    while p < x {
        p *= 2.0;
        e += 1;
    }
    e
}

#[test]
fn ceil_log2_matches_linear_scan() {
    let mut s = RngSpec::new(1).stream();
    for _ in 0..2000 {
        let e = (s.next_u64() % 2000) as i32 - 1000;
        let x = (1.0 + s.uniform()) * 2f64.powi(e);
        assert_eq!(exponent_ceil_log2(x), ceil_log2_by_scan(x), "{x:e}");
        let p = 2f64.powi(e);
        assert_eq!(exponent_ceil_log2(p), e);
    }
    for bits in [1u64, 2, 3, 1000, (1 << 52) - 1, 1 << 52] {
        let x = f64::from_bits(bits);
        assert_eq!(exponent_ceil_log2(x), ceil_log2_by_scan(x), "{x:e}");
    }
}

fn check_reconstruction<const K: usize>(m: &Matrix<MultiFloat<K>>, d: usize, side: Side) {
    let (s, r) = split_with_residual(m, d, side, TailPiece::Extracted).unwrap();
    let exact_m = to_exact(m);
    let exact_r = to_exact(&r);
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            let mut sum = exact_r[(i, j)].clone();
            for p in s.pieces() {
                sum = sum + ExactScalar::from_f64(p[(i, j)]);
            }
            assert_eq!(sum, exact_m[(i, j)], "({i}, {j})");
        }
    }
}

#[test]
fn pieces_plus_residual_reconstruct_exactly() {
    let a = gen_test_matrix::<2>(16, 16, 3);
    check_reconstruction(&a, 4, Side::A);
    check_reconstruction(&a, 4, Side::B);
    let q = gen_test_matrix::<4>(9, 13, 4);
    check_reconstruction(&q, 11, Side::A);
    check_reconstruction(&q, 2, Side::B);
}

#[test]
fn piece_entries_sit_on_their_line_grid() {
    let a = gen_test_matrix::<3>(12, 20, 5);
    for side in [Side::A, Side::B] {
        let s = split_matrix(&a, 6, side).unwrap();
        for (alpha, p) in s.pieces().iter().enumerate() {
            for i in 0..p.rows() {
                for j in 0..p.cols() {
                    let line = if side == Side::A { i } else { j };
                    let x = p[(i, j)];
                    match s.shift(alpha, line) {
                        None => assert_eq!(x, 0.0),
                        Some(e) => {
                            let unit = 2f64.powi(e - 53);
                            assert_eq!((x / unit).fract(), 0.0, "piece {alpha} ({i},{j})");
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn pieces_decay_geometrically() {
    let n = 64;
    let a = gen_test_matrix::<4>(n, n, 6);
    let s = split_matrix(&a, 8, Side::A).unwrap();
    let log2_l = (n as f64).log2();
    let factor = 2f64.powf(-((53.0 - log2_l) / 2.0).floor() + 1.0);
    for alpha in 0..7 {
        for i in 0..n {
            let cur = s.piece(alpha).row(i).iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let next = s.piece(alpha + 1).row(i).iter().fold(0.0f64, |m, x| m.max(x.abs()));
            assert!(next <= factor * cur, "row {i} piece {alpha}: {next:e} vs {cur:e}");
        }
    }
}

fn check_error_free<const K: usize>(n: usize, d: usize, seed: u64) {
    let a = gen_test_matrix::<K>(n, n, seed);
    let b = gen_test_matrix::<K>(n, n, seed + 1000);
    let sa = split_matrix(&a, d, Side::A).unwrap();
    let sb = split_matrix(&b, d, Side::B).unwrap();
    let backends: [&dyn GemmBackend; 2] = [&ReferenceBackend, &ShuffledBackend { seed }];
    for alpha in 0..d {
        for beta in 0..d - alpha {
            let want = exact_gemm(sa.piece(alpha), sb.piece(beta)).unwrap();
            for be in backends {
                let mut c = vec![0.0; n * n];
                be.gemm(n, n, n, sa.piece(alpha).data(), sb.piece(beta).data(), &mut c);
                let got = to_exact(&Matrix::from_vec(n, n, c).unwrap());
                assert_eq!(got, want, "{} C[{alpha}][{beta}] K={K} n={n}", be.name());
            }
        }
    }
}

#[test]
fn piece_products_are_exact_for_any_backend() {
    check_error_free::<2>(8, 6, 1);
    check_error_free::<3>(16, 9, 2);
    check_error_free::<4>(24, 11, 3);
}

#[test]
fn shuffled_backend_gives_identical_results() {
    let a = gen_test_matrix::<3>(20, 17, 8);
    let b = gen_test_matrix::<3>(17, 9, 9);
    for d in [1, 4, 9] {
        let (c1, _) = ozaki_gemm(&a, &b, d, &ReferenceBackend).unwrap();
        let (c2, _) = ozaki_gemm(&a, &b, d, &ShuffledBackend { seed: d as u64 }).unwrap();
        assert_eq!(c1, c2, "D={d}");
    }
}

#[test]
fn shuffled_backend_does_change_inexact_products() {
    // Sanity check of the adversary: on unsplit data the order matters.
    let a = gen_test_matrix::<2>(16, 64, 10).leading();
    let b = gen_test_matrix::<2>(64, 16, 11).leading();
    let mut c1 = vec![0.0; 256];
    let mut c2 = vec![0.0; 256];
    ReferenceBackend.gemm(16, 16, 64, a.data(), b.data(), &mut c1);
    ShuffledBackend { seed: 1 }.gemm(16, 16, 64, a.data(), b.data(), &mut c2);
    assert_ne!(c1, c2);
}

#[test]
fn remainder_tail_is_not_error_free() {
    // With the literal remainder piece the last products may round; the
    // extracted default never does. Only the former is allowed to differ
    // from the exact product of its pieces.
    let n = 32;
    let a = gen_test_matrix::<2>(n, n, 12);
    let (sa, _) = split_with_residual(&a, 2, Side::A, TailPiece::Remainder).unwrap();
    let (sb, _) = split_with_residual(&a, 2, Side::B, TailPiece::Remainder).unwrap();
    let mut c = vec![0.0; n * n];
    ReferenceBackend.gemm(n, n, n, sa.piece(1).data(), sb.piece(0).data(), &mut c);
    let got = to_exact(&Matrix::from_vec(n, n, c).unwrap());
    assert_ne!(got, exact_gemm(sa.piece(1), sb.piece(0)).unwrap());
}

#[test]
fn accuracy_improves_then_saturates_for_double_double() {
    let n = 32;
    let a = gen_test_matrix::<2>(n, n, 21);
    let b = gen_test_matrix::<2>(n, n, 22);
    let exact = exact_gemm(&a, &b).unwrap();
    let errs: Vec<f64> =
        (1..=8).map(|d| max_rel_error(&ozaki_gemm(&a, &b, d, &ReferenceBackend).unwrap().0, &exact).unwrap()).collect();
    for w in errs.windows(2) {
        assert!(w[1] <= w[0] * 1.1, "{errs:?}");
    }
    assert!(errs[5] <= 1e-30, "{errs:?}");
    assert!(errs[7] >= errs[5] / 2.0, "{errs:?}");
}

#[test]
fn long_inner_dimension_uses_larger_shift() {
    assert_eq!(shift_exponent(1024), 32);
    let a = Matrix::<TripleDouble>::filled(2, 1024, TripleDouble::from_f64(1.0));
    let s = split_matrix(&a, 1, Side::A).unwrap();
    assert_eq!(s.shift(0, 0), Some(32));
    assert_eq!(s.inner_dim(), 1024);
}

#[test]
fn rectangular_and_degenerate_shapes() {
    let a = gen_test_matrix::<2>(3, 1, 30);
    let b = gen_test_matrix::<2>(1, 5, 31);
    let (c, p) = ozaki_gemm(&a, &b, 5, &ReferenceBackend).unwrap();
    assert_eq!(c.shape(), (3, 5));
    assert_eq!(p.backend_calls, 15);
    let exact = exact_gemm(&a, &b).unwrap();
    assert!(max_rel_error(&c, &exact).unwrap() <= 2.0 * DoubleDouble::UNIT_ROUNDOFF);

    let e = Matrix::<QuadDouble>::zeros(4, 0);
    let f = Matrix::<QuadDouble>::zeros(0, 2);
    let (z, _) = ozaki_gemm(&e, &f, 2, &ReferenceBackend).unwrap();
    assert_eq!(z, Matrix::zeros(4, 2));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn error_freeness_on_random_shapes(m in 1usize..12, l in 1usize..40, n in 1usize..12, d in 1usize..8, seed in any::<u64>()) {
        let a = gen_test_matrix::<3>(m, l, seed);
        let b = gen_test_matrix::<3>(l, n, seed ^ 1);
        let sa = split_matrix(&a, d, Side::A).unwrap();
        let sb = split_matrix(&b, d, Side::B).unwrap();
        let alpha = (seed as usize) % d;
        let beta = (seed as usize / 7) % (d - alpha);
        let mut c = vec![0.0; m * n];
        ShuffledBackend { seed }.gemm(m, n, l, sa.piece(alpha).data(), sb.piece(beta).data(), &mut c);
        let got = to_exact(&Matrix::from_vec(m, n, c).unwrap());
        prop_assert_eq!(got, exact_gemm(sa.piece(alpha), sb.piece(beta)).unwrap());
    }
}
