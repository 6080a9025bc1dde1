//! Desk-scale GEMM and LU experiments.
//!
//! Inputs come from the seeded generators in `mpgemm_core::gen`: the GEMM
//! operands are `gen_test_matrix(n, n, seed)` and `gen_test_matrix(n, n,
//! seed + 1)`, the LU system is `gen_lu_system(n, seed)`. Everything runs
//! inside a rayon pool of the requested size.

use std::time::{Duration, Instant};

use mpgemm_core::gen::{gen_lu_system, gen_test_matrix};
use mpgemm_core::lu::{blocked_lu, GemmChoice};
use mpgemm_core::matrix::{gemm_simple, strassen, DEFAULT_STRASSEN_CUTOFF};
use mpgemm_core::oracle::{exact_gemm, exact_solve, max_rel_error};
use mpgemm_core::ozaki::{ozaki_gemm, GemmBackend, OzakiProfile, ReferenceBackend};
use mpgemm_core::{Matrix, MultiFloat};

use crate::error::BenchError;
use crate::mpmat;
use crate::record::{Algo, BenchRecord, Precision};

/// Largest `n` for which the exact oracle is run.
pub const ORACLE_CAP: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum BackendKind {
    /// The portable blocked kernel shipped with the core crate.
    Reference,
    /// A system CBLAS (needs the `openblas` feature).
    External,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub precision: Precision,
    pub algos: Vec<Algo>,
    pub dims: Vec<usize>,
    /// Split counts; only used by `Algo::Ozaki`.
    pub splits: Vec<usize>,
    pub cutoff: usize,
    /// LU panel widths run over `step, 2*step, ..` up to `n`.
    pub panel_step: usize,
    pub seed: u64,
    pub reps: usize,
    pub threads: usize,
    pub backend: BackendKind,
    pub oracle_cap: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            precision: Precision::Dd,
            algos: vec![Algo::Ozaki],
            dims: vec![64],
            splits: vec![6],
            cutoff: DEFAULT_STRASSEN_CUTOFF,
            panel_step: 32,
            seed: 1,
            reps: 3,
            threads: 1,
            backend: BackendKind::Reference,
            oracle_cap: ORACLE_CAP,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let fail = |m: &str| Err(BenchError::Config(m.to_string()));
        if self.algos.is_empty() {
            return fail("no algorithm given");
        }
        if self.dims.is_empty() || self.dims.contains(&0) {
            return fail("dims must be a non-empty list of positive sizes");
        }
        if self.algos.contains(&Algo::Ozaki) && (self.splits.is_empty() || self.splits.contains(&0)) {
            return fail("ozaki needs a non-empty list of positive split counts");
        }
        if self.cutoff == 0 {
            return fail("cutoff must be positive");
        }
        if self.panel_step == 0 {
            return fail("panel step must be positive");
        }
        if self.reps == 0 {
            return fail("reps must be at least 1");
        }
        if self.threads == 0 {
            return fail("threads must be at least 1");
        }
        if self.backend == BackendKind::External && !cfg!(feature = "openblas") {
            return fail("external backend requested but this build has no CBLAS (enable the `openblas` feature)");
        }
        Ok(())
    }

    /// Panel widths of the LU sweep for size `n`; always ends with `n`.
    pub fn panel_widths(&self, n: usize) -> Vec<usize> {
        let mut ks: Vec<usize> = (1..).map(|i| i * self.panel_step).take_while(|&k| k < n).collect();
        ks.push(n);
        ks
    }

    fn variants(&self) -> Vec<(Algo, Option<usize>)> {
        let mut v = Vec::new();
        for &algo in &self.algos {
            if algo == Algo::Ozaki {
                v.extend(self.splits.iter().map(|&d| (algo, Some(d))));
            } else {
                v.push((algo, None));
            }
        }
        v
    }
}

/// A result matrix (GEMM) or solution column (LU) of one record.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Dd(Matrix<MultiFloat<2>>),
    Td(Matrix<MultiFloat<3>>),
    Qd(Matrix<MultiFloat<4>>),
}

impl Outcome {
    /// Bit-exact text form, handy for comparing runs.
    pub fn to_mpmat(&self) -> String {
        match self {
            Outcome::Dd(m) => mpmat::to_string(m),
            Outcome::Td(m) => mpmat::to_string(m),
            Outcome::Qd(m) => mpmat::to_string(m),
        }
    }
}

trait IntoOutcome {
    fn into_outcome(self) -> Outcome;
}

impl IntoOutcome for Matrix<MultiFloat<2>> {
    fn into_outcome(self) -> Outcome {
        Outcome::Dd(self)
    }
}

impl IntoOutcome for Matrix<MultiFloat<3>> {
    fn into_outcome(self) -> Outcome {
        Outcome::Td(self)
    }
}

impl IntoOutcome for Matrix<MultiFloat<4>> {
    fn into_outcome(self) -> Outcome {
        Outcome::Qd(self)
    }
}

pub fn run_gemm_bench(cfg: &BenchConfig) -> Result<Vec<BenchRecord>, BenchError> {
    run_gemm_bench_with(cfg, |_, _| {})
}

/// Like [`run_gemm_bench`], also handing every product to `observe`.
pub fn run_gemm_bench_with(
    cfg: &BenchConfig,
    mut observe: impl FnMut(&BenchRecord, Outcome) + Send,
) -> Result<Vec<BenchRecord>, BenchError> {
    cfg.validate()?;
    in_pool(cfg, || match cfg.precision {
        Precision::Dd => gemm_sweep::<2>(cfg, &mut observe),
        Precision::Td => gemm_sweep::<3>(cfg, &mut observe),
        Precision::Qd => gemm_sweep::<4>(cfg, &mut observe),
    })
}

pub fn run_lu_bench(cfg: &BenchConfig) -> Result<Vec<BenchRecord>, BenchError> {
    run_lu_bench_with(cfg, |_, _| {})
}

/// Like [`run_lu_bench`], also handing every solution (as an `n x 1`
/// matrix) to `observe`.
pub fn run_lu_bench_with(
    cfg: &BenchConfig,
    mut observe: impl FnMut(&BenchRecord, Outcome) + Send,
) -> Result<Vec<BenchRecord>, BenchError> {
    cfg.validate()?;
    in_pool(cfg, || match cfg.precision {
        Precision::Dd => lu_sweep::<2>(cfg, &mut observe),
        Precision::Td => lu_sweep::<3>(cfg, &mut observe),
        Precision::Qd => lu_sweep::<4>(cfg, &mut observe),
    })
}

fn in_pool<T: Send>(cfg: &BenchConfig, f: impl FnOnce() -> Result<T, BenchError> + Send) -> Result<T, BenchError> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build()?;
    pool.install(f)
}

fn with_backend<T>(kind: BackendKind, f: impl FnOnce(&dyn GemmBackend) -> T) -> T {
    match kind {
        BackendKind::Reference => f(&ReferenceBackend),
        #[cfg(feature = "openblas")]
        BackendKind::External => f(&crate::openblas::OpenBlasBackend),
        #[cfg(not(feature = "openblas"))]
        BackendKind::External => unreachable!("rejected by validate"),
    }
}

/// Runs `f` `reps` times and keeps the fastest wall time with its profile.
/// The library calls are deterministic, so the first result stands for all.
fn best_of<T>(
    reps: usize,
    mut f: impl FnMut() -> Result<(T, Option<OzakiProfile>), BenchError>,
) -> Result<(T, Duration, Option<OzakiProfile>), BenchError> {
    let mut best: Option<(Duration, Option<OzakiProfile>)> = None;
    let mut first = None;
    for _ in 0..reps {
        let start = Instant::now();
        let (value, profile) = f()?;
        let t = start.elapsed();
        if best.as_ref().is_none_or(|(b, _)| t < *b) {
            best = Some((t, profile));
        }
        first.get_or_insert(value);
    }
    let (t, profile) = best.expect("reps >= 1");
    Ok((first.expect("reps >= 1"), t, profile))
}

/// What a record measured, as opposed to what it found.
struct Point {
    algo: Algo,
    n: usize,
    splits: Option<usize>,
    panel: Option<usize>,
}

fn record(cfg: &BenchConfig, at: Point, t: Duration, profile: Option<OzakiProfile>, err: Option<f64>) -> BenchRecord {
    let Point { algo, n, splits, panel } = at;
    BenchRecord {
        algo,
        precision: cfg.precision,
        n,
        splits,
        panel,
        threads: cfg.threads,
        seed: cfg.seed,
        reps: cfg.reps,
        t_split: profile.map(|p| p.split_time.as_secs_f64()),
        t_product: profile.map(|p| p.product_time.as_secs_f64()),
        t_accum: profile.map(|p| p.accumulate_time.as_secs_f64()),
        t_total: t.as_secs_f64(),
        max_rel_err: err,
    }
}

fn gemm_sweep<const K: usize>(
    cfg: &BenchConfig,
    observe: &mut dyn FnMut(&BenchRecord, Outcome),
) -> Result<Vec<BenchRecord>, BenchError>
where
    Matrix<MultiFloat<K>>: IntoOutcome,
{
    let mut out = Vec::new();
    for &n in &cfg.dims {
        let a = gen_test_matrix::<K>(n, n, cfg.seed);
        let b = gen_test_matrix::<K>(n, n, cfg.seed.wrapping_add(1));
        let exact = if n <= cfg.oracle_cap { Some(exact_gemm(&a, &b)?) } else { None };
        for (algo, splits) in cfg.variants() {
            let (c, t, profile) = best_of(cfg.reps, || {
                Ok(match (algo, splits) {
                    (Algo::Simple, _) => (gemm_simple(&a, &b)?, None),
                    (Algo::Strassen, _) => (strassen(&a, &b, cfg.cutoff)?, None),
                    (Algo::Ozaki, d) => {
                        let d = d.expect("ozaki variants carry D");
                        let (c, p) = with_backend(cfg.backend, |be| ozaki_gemm(&a, &b, d, be))?;
                        (c, Some(p))
                    }
                })
            })?;
            let err = exact.as_ref().map(|e| max_rel_error(&c, e)).transpose()?;
            let r = record(cfg, Point { algo, n, splits, panel: None }, t, profile, err);
            observe(&r, c.into_outcome());
            out.push(r);
        }
    }
    Ok(out)
}

fn lu_sweep<const K: usize>(
    cfg: &BenchConfig,
    observe: &mut dyn FnMut(&BenchRecord, Outcome),
) -> Result<Vec<BenchRecord>, BenchError>
where
    Matrix<MultiFloat<K>>: IntoOutcome,
{
    let mut out = Vec::new();
    for &n in &cfg.dims {
        let (a, rhs) = gen_lu_system::<K>(n, cfg.seed);
        let exact = if n <= cfg.oracle_cap {
            let x = exact_solve(&a, &rhs)?;
            Some(Matrix::from_vec(n, 1, x)?)
        } else {
            None
        };
        for (algo, splits) in cfg.variants() {
            for k in cfg.panel_widths(n) {
                let (x, t, profile) = best_of(cfg.reps, || {
                    with_backend(cfg.backend, |be| {
                        let gemm = match (algo, splits) {
                            (Algo::Simple, _) => GemmChoice::Simple,
                            (Algo::Strassen, _) => GemmChoice::Strassen { cutoff: cfg.cutoff },
                            (Algo::Ozaki, d) => {
                                GemmChoice::Ozaki { splits: d.expect("ozaki variants carry D"), backend: be }
                            }
                        };
                        let f = blocked_lu(&a, k, gemm)?;
                        let x = f.solve(&rhs)?;
                        let profile = (algo == Algo::Ozaki).then_some(f.profile);
                        Ok((Matrix::from_vec(n, 1, x)?, profile))
                    })
                })?;
                let err = exact.as_ref().map(|e| max_rel_error(&x, e)).transpose()?;
                let r = record(cfg, Point { algo, n, splits, panel: Some(k) }, t, profile, err);
                observe(&r, x.into_outcome());
                out.push(r);
            }
        }
    }
    Ok(out)
}
