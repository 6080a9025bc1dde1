//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any hard criterion fails. The timing criterion only
//! warns. Pass criterion numbers as arguments to run a subset.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Mutex;
use std::time::Instant;

use mpgemm::bench::{run_gemm_bench_with, run_lu_bench_with};
use mpgemm::mpgemm_core::eft::{two_prod, two_prod_dekker, two_prod_fma, two_sum};
use mpgemm::mpgemm_core::gen::{gen_lu_system, gen_test_matrix, RngSpec, Stream};
use mpgemm::mpgemm_core::lu::{blocked_lu, growth_factor, residual_max, unblocked_lu, GemmChoice};
use mpgemm::mpgemm_core::matrix::{gemm_simple, strassen};
use mpgemm::mpgemm_core::oracle::{exact_gemm, exact_solve, max_rel_error, normwise_rel_error, to_exact};
use mpgemm::mpgemm_core::ozaki::{
    ozaki_gemm, split_matrix, CountingBackend, GemmBackend, ReferenceBackend, ShuffledBackend, Side,
};
use mpgemm::mpgemm_core::{DoubleDouble, ExactScalar, Matrix, MultiFloat};
use mpgemm::record::write_csv;
use mpgemm::{run_gemm_bench, Algo, BenchConfig, BenchRecord, Precision};

type Check = Result<String, String>;

/// Number, name, check, and whether a failure is fatal.
type Criterion = (usize, &'static str, fn() -> Check, bool);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn safe_value(s: &mut Stream, lim: i32) -> f64 {
    let m = 1.0 + s.uniform();
    let e = (s.next_u64() % (2 * lim as u64 + 1)) as i32 - lim;
    let sign = if s.next_u64() & 1 == 0 { 1.0 } else { -1.0 };
    sign * m * 2f64.powi(e)
}

fn eft_exactness() -> Check {
    let pairs = 1_000_000;
    let mut s = RngSpec::new(0xef7).stream();
    let mut mismatches = 0usize;
    for _ in 0..pairs {
        let a = safe_value(&mut s, 400);
        let b = safe_value(&mut s, 400);
        let (ea, eb) = (ExactScalar::from_f64(a), ExactScalar::from_f64(b));
        let p = two_sum(a, b);
        if ExactScalar::from_f64(p.s) + ExactScalar::from_f64(p.e) != &ea + &eb {
            mismatches += 1;
        }
        let q = two_prod(a, b);
        if ExactScalar::from_f64(q.p) + ExactScalar::from_f64(q.e) != &ea * &eb {
            mismatches += 1;
        }
        if two_prod_fma(a, b) != two_prod_dekker(a, b) {
            mismatches += 1;
        }
    }
    ensure(mismatches == 0, || format!("{mismatches} identities failed"))?;
    Ok(format!("{pairs} pairs, two_sum/two_prod exact, FMA and Dekker paths agree"))
}

fn random_multi<const K: usize>(s: &mut Stream) -> MultiFloat<K> {
    let e = (s.next_u64() % 61) as i32 - 30;
    let sign = if s.next_u64() & 1 == 0 { 1.0 } else { -1.0 };
    s.uniform_multi::<K>().mul_f64(sign * 2f64.powi(e))
}

fn multi_ops<const K: usize>(ops: usize, seed: u64) -> Result<f64, String> {
    let bound = 2f64.powi(-53 * K as i32 + 4);
    let mut s = RngSpec::new(seed).stream();
    let mut worst = 0.0f64;
    for i in 0..ops {
        let a = random_multi::<K>(&mut s);
        let b = random_multi::<K>(&mut s);
        let (ea, eb) = (ExactScalar::of(&a), ExactScalar::of(&b));
        let (got, want) = match i % 4 {
            0 => (a + b, &ea + &eb),
            1 => (a - b, &ea - &eb),
            2 => (a * b, &ea * &eb),
            _ => (a / b, &ea / &eb),
        };
        let err = ExactScalar::of(&got).rel_error(&want);
        worst = worst.max(err);
        ensure(err <= bound, || format!("K={K} op {i}: {err:e} > {bound:e} for {a:?}, {b:?}"))?;
    }
    Ok(worst / bound)
}

fn multifloat_accuracy() -> Check {
    let ops = 100_000;
    let r2 = multi_ops::<2>(ops, 2)?;
    let r3 = multi_ops::<3>(ops, 3)?;
    let r4 = multi_ops::<4>(ops, 4)?;
    Ok(format!("{ops} ops per K, worst error / bound: dd {r2:.3}, td {r3:.3}, qd {r4:.3}"))
}

fn error_free_for<const K: usize>(n: usize, d: usize, seed: u64) -> Result<usize, String> {
    let a = gen_test_matrix::<K>(n, n, seed);
    let b = gen_test_matrix::<K>(n, n, seed + 1);
    let sa = split_matrix(&a, d, Side::A).map_err(|e| e.to_string())?;
    let sb = split_matrix(&b, d, Side::B).map_err(|e| e.to_string())?;
    let shuffled = ShuffledBackend { seed };
    let backends: [&dyn GemmBackend; 2] = [&ReferenceBackend, &shuffled];
    let mut checked = 0;
    for alpha in 0..d {
        for beta in 0..d - alpha {
            let want = exact_gemm(sa.piece(alpha), sb.piece(beta)).map_err(|e| e.to_string())?;
            for be in backends {
                let mut c = vec![0.0; n * n];
                be.gemm(n, n, n, sa.piece(alpha).data(), sb.piece(beta).data(), &mut c);
                let got = to_exact(&Matrix::from_vec(n, n, c).map_err(|e| e.to_string())?);
                ensure(got == want, || format!("{} C[{alpha}][{beta}] inexact, K={K} n={n} D={d}", be.name()))?;
                checked += 1;
            }
        }
    }
    Ok(checked)
}

fn ozaki_error_freeness() -> Check {
    let mut checked = 0;
    for n in [8, 32, 64] {
        checked += error_free_for::<2>(n, 8, 100 + n as u64)?;
        checked += error_free_for::<3>(n, 11, 200 + n as u64)?;
        checked += error_free_for::<4>(n, 13, 300 + n as u64)?;
    }
    Ok(format!("{checked} piece products exact under reference and shuffled backends"))
}

/// Records the operands of every call so they can be matched to pieces.
struct Recorder(Mutex<Vec<(Vec<f64>, Vec<f64>)>>);

impl GemmBackend for Recorder {
    fn gemm(&self, m: usize, n: usize, l: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
        self.0.lock().unwrap().push((a.to_vec(), b.to_vec()));
        ReferenceBackend.gemm(m, n, l, a, b, c);
    }
}

fn product_count() -> Check {
    let (m, l, n) = (5, 7, 3);
    let a = gen_test_matrix::<3>(m, l, 40);
    let b = gen_test_matrix::<3>(l, n, 41);
    let rec = Recorder(Mutex::new(Vec::new()));
    ozaki_gemm(&a, &b, 3, &rec).map_err(|e| e.to_string())?;
    let sa = split_matrix(&a, 3, Side::A).map_err(|e| e.to_string())?;
    let sb = split_matrix(&b, 3, Side::B).map_err(|e| e.to_string())?;
    let find = |pieces: &[Matrix<f64>], x: &[f64]| pieces.iter().position(|p| p.data() == x);
    let order: Vec<(usize, usize)> = rec
        .0
        .into_inner()
        .unwrap()
        .iter()
        .map(|(x, y)| (find(sa.pieces(), x).unwrap_or(99) + 1, find(sb.pieces(), y).unwrap_or(99) + 1))
        .collect();
    let want = vec![(1, 1), (1, 2), (1, 3), (2, 1), (2, 2), (3, 1)];
    ensure(order == want, || format!("D=3 issued {order:?}"))?;

    for (m, l, n) in [(1, 1, 1), (4, 9, 2), (16, 16, 16), (3, 0, 5), (0, 4, 4)] {
        for d in 1..=9 {
            let a = gen_test_matrix::<2>(m, l, 7);
            let b = gen_test_matrix::<2>(l, n, 8);
            let counter = CountingBackend::new(ReferenceBackend);
            let (_, prof) = ozaki_gemm(&a, &b, d, &counter).map_err(|e| e.to_string())?;
            let want = d * (d + 1) / 2;
            ensure(counter.calls() == want && prof.backend_calls == want, || {
                format!("{m}x{l}x{n} D={d}: {} calls, want {want}", counter.calls())
            })?;
        }
    }
    Ok("D=3 issues C11 C12 C13 C21 C22 C31; D(D+1)/2 calls for D=1..9 on 5 shapes".into())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn saturation_for<const K: usize>(n: usize, seeds: &[u64], d_max: usize, allowed: &[usize]) -> Result<String, String> {
    let mut errs = vec![Vec::new(); d_max];
    for &seed in seeds {
        let a = gen_test_matrix::<K>(n, n, seed);
        let b = gen_test_matrix::<K>(n, n, seed + 1);
        let exact = exact_gemm(&a, &b).map_err(|e| e.to_string())?;
        for d in 1..=d_max {
            let (c, _) = ozaki_gemm(&a, &b, d, &ReferenceBackend).map_err(|e| e.to_string())?;
            errs[d - 1].push(max_rel_error(&c, &exact).map_err(|e| e.to_string())?);
        }
    }
    let med: Vec<f64> = errs.into_iter().map(median).collect();
    let tag = MultiFloat::<K>::TAG;
    for d in 1..d_max {
        ensure(med[d] <= 1.10 * med[d - 1], || format!("{tag}: median rises from D={d} to D={}: {med:?}", d + 1))?;
    }
    // Smallest D after which two more splits gain less than a factor 2.
    let star = (1..=d_max - 2)
        .find(|&d| med[d - 1] < 2.0 * med[d] && med[d - 1] < 2.0 * med[d + 1])
        .ok_or_else(|| format!("{tag}: no saturation up to D={d_max}: {med:?}"))?;
    ensure(allowed.contains(&star), || format!("{tag}: D*={star} not in {allowed:?}; medians {med:?}"))?;
    Ok(format!("{tag} D*={star} ({:.2e})", med[star - 1]))
}

fn accuracy_saturation() -> Check {
    let seeds = [11, 21, 31, 41, 51];
    let dd = saturation_for::<2>(256, &seeds, 9, &[5, 6, 7])?;
    let td = saturation_for::<3>(256, &seeds, 13, &[9, 10, 11])?;
    let qd = saturation_for::<4>(256, &seeds, 14, &[10, 11, 12])?;
    Ok(format!("n=256, 5 seeds: {dd}, {td}, {qd}"))
}

fn strassen_consistency() -> Check {
    let n = 64;
    let a = gen_test_matrix::<2>(n, n, 60);
    let b = gen_test_matrix::<2>(n, n, 61);
    let simple = gemm_simple(&a, &b).map_err(|e| e.to_string())?;
    let s16 = strassen(&a, &b, 16).map_err(|e| e.to_string())?;
    let diff = max_rel_error(&s16, &to_exact(&simple)).map_err(|e| e.to_string())?;
    ensure(diff <= 1e-27, || format!("cutoff 16 differs by {diff:e}"))?;
    for cutoff in [64, 65, 1000] {
        let s = strassen(&a, &b, cutoff).map_err(|e| e.to_string())?;
        ensure(s == simple, || format!("cutoff {cutoff} is not bit-identical"))?;
    }
    Ok(format!("cutoff 16 max rel diff {diff:.2e}; cutoff >= n bit-identical"))
}

fn inf_norm<E: mpgemm::mpgemm_core::Scalar>(a: &Matrix<E>) -> f64 {
    (0..a.rows()).map(|i| a.row(i).iter().map(|x| x.leading().abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn lu_correctness() -> Check {
    let n = 128;
    let u = DoubleDouble::UNIT_ROUNDOFF;
    let (a, rhs) = gen_lu_system::<2>(n, 70);
    let reference = unblocked_lu(&a).map_err(|e| e.to_string())?;
    let mut inv = Matrix::<DoubleDouble>::zeros(n, n);
    for j in 0..n {
        let e: Vec<DoubleDouble> = (0..n).map(|i| DoubleDouble::from_f64(if i == j { 1.0 } else { 0.0 })).collect();
        let col = reference.solve(&e).map_err(|e| e.to_string())?;
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    let kappa = inf_norm(&a) * inf_norm(&inv);
    let exact = exact_solve(&a, &rhs).map_err(|e| e.to_string())?;
    let x_bound = 1e3 * n as f64 * u * kappa;

    let paths = [
        GemmChoice::Simple,
        GemmChoice::Strassen { cutoff: 32 },
        GemmChoice::Ozaki { splits: 6, backend: &ReferenceBackend },
    ];
    let (mut worst_r, mut worst_x, mut worst_comp) = (0.0f64, 0.0f64, 0.0f64);
    for gemm in paths {
        for k in [32, 64, 128] {
            let f = blocked_lu(&a, k, gemm).map_err(|e| e.to_string())?;
            let g = growth_factor(&a, &f);
            let r_bound = 16.0 * n as f64 * u * g * a.max_abs();
            let r = residual_max(&a, &f).map_err(|e| e.to_string())?;
            ensure(r <= r_bound, || format!("{gemm:?} K={k}: residual {r:e} > {r_bound:e}"))?;
            worst_r = worst_r.max(r / r_bound);

            let l = f.lower();
            ensure(l.data().iter().all(|x| x.abs().to_f64() <= 1.0), || format!("{gemm:?} K={k}: |L| > 1"))?;

            let x = f.solve(&rhs).map_err(|e| e.to_string())?;
            let err = normwise_rel_error(&x, &exact);
            ensure(err <= x_bound, || format!("{gemm:?} K={k}: solution error {err:e} > {x_bound:e}"))?;
            worst_x = worst_x.max(err);
            let col = Matrix::from_vec(n, 1, x).map_err(|e| e.to_string())?;
            let exact_col = Matrix::from_vec(n, 1, exact.clone()).map_err(|e| e.to_string())?;
            worst_comp = worst_comp.max(max_rel_error(&col, &exact_col).map_err(|e| e.to_string())?);

            if k == n {
                ensure(f.lu == reference.lu && f.perm == reference.perm, || {
                    format!("{gemm:?} K=n differs from the unblocked kernel")
                })?;
            }
        }
    }
    Ok(format!(
        "kappa={kappa:.1e}; residual <= {worst_r:.2e} of bound; normwise error {worst_x:.2e} (bound {x_bound:.1e}), \
         componentwise {worst_comp:.2e}; K=n bit-identical; |L| <= 1"
    ))
}

fn fingerprint(cfg: &BenchConfig, lu: bool) -> Result<(String, Vec<String>), String> {
    let mut outs = Vec::new();
    let records = if lu {
        run_lu_bench_with(cfg, |_, x| outs.push(x.to_mpmat()))
    } else {
        run_gemm_bench_with(cfg, |_, c| outs.push(c.to_mpmat()))
    }
    .map_err(|e| e.to_string())?;
    let stripped: Vec<BenchRecord> = records
        .into_iter()
        .map(|r| BenchRecord { t_split: None, t_product: None, t_accum: None, t_total: 0.0, threads: 0, ..r })
        .collect();
    let mut buf = Vec::new();
    write_csv(&mut buf, &stripped).map_err(|e| e.to_string())?;
    Ok((String::from_utf8(buf).unwrap(), outs))
}

fn determinism() -> Check {
    let all = vec![Algo::Simple, Algo::Strassen, Algo::Ozaki];
    let configs = [
        (
            BenchConfig {
                precision: Precision::Dd,
                algos: all.clone(),
                dims: vec![48, 200],
                splits: vec![4, 6],
                reps: 1,
                ..Default::default()
            },
            false,
        ),
        (
            BenchConfig { precision: Precision::Td, dims: vec![64], splits: vec![9], reps: 1, ..Default::default() },
            false,
        ),
        (
            BenchConfig {
                precision: Precision::Qd,
                algos: all.clone(),
                dims: vec![40],
                splits: vec![11],
                cutoff: 8,
                reps: 1,
                ..Default::default()
            },
            false,
        ),
        (
            BenchConfig {
                precision: Precision::Dd,
                algos: all,
                dims: vec![96],
                splits: vec![6],
                panel_step: 32,
                reps: 1,
                ..Default::default()
            },
            true,
        ),
    ];
    let mut records = 0;
    for (cfg, lu) in configs {
        let one = fingerprint(&BenchConfig { threads: 1, ..cfg.clone() }, lu)?;
        let four = fingerprint(&BenchConfig { threads: 4, ..cfg.clone() }, lu)?;
        ensure(one.0 == four.0, || format!("error columns differ for {cfg:?}"))?;
        ensure(one.1 == four.1, || format!("result matrices differ for {cfg:?}"))?;
        records += one.1.len();
    }
    Ok(format!("{records} records: results and error columns identical at 1 and 4 threads"))
}

fn timing() -> Check {
    let cfg = BenchConfig {
        algos: vec![Algo::Simple, Algo::Ozaki],
        dims: vec![1024],
        splits: vec![6],
        reps: 2,
        oracle_cap: 0,
        ..Default::default()
    };
    let records = run_gemm_bench(&cfg).map_err(|e| e.to_string())?;
    let t = |a: Algo| records.iter().find(|r| r.algo == a).map(|r| r.t_total).unwrap();
    let (simple, ozaki) = (t(Algo::Simple), t(Algo::Ozaki));
    let speedup = simple / ozaki;
    let msg = format!("n=1024 dd: simple {simple:.2}s, ozaki D=6 {ozaki:.2}s, speedup {speedup:.2}x (want >= 1.5x)");
    ensure(speedup >= 1.5, || msg.clone())?;
    Ok(msg)
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (1, "EFT exactness", eft_exactness, true),
        (2, "MultiFloat accuracy", multifloat_accuracy, true),
        (3, "Ozaki error-freeness", ozaki_error_freeness, true),
        (4, "triangular product count", product_count, true),
        (5, "accuracy saturation", accuracy_saturation, true),
        (6, "Strassen consistency", strassen_consistency, true),
        (7, "LU correctness", lu_correctness, true),
        (8, "determinism", determinism, true),
        (9, "timing (soft)", timing, false),
    ];
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut hard_failures = 0;
    for (id, name, run, hard) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {id} PASS {name}: {detail} [{secs:.1}s]"),
            Err(detail) if hard => {
                hard_failures += 1;
                println!("criterion {id} FAIL {name}: {detail} [{secs:.1}s]");
            }
            Err(detail) => println!("criterion {id} WARN {name}: {detail} [{secs:.1}s]"),
        }
    }
    if hard_failures > 0 {
        println!("acceptance: {hard_failures} hard criteria failed");
        ExitCode::FAILURE
    } else {
        println!("acceptance: all hard criteria passed");
        ExitCode::SUCCESS
    }
}
