use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use mpgemm::bench::{run_gemm_bench, run_lu_bench, BackendKind, BenchConfig, ORACLE_CAP};
use mpgemm::mpgemm_core::gen::{gen_lu_system, gen_test_matrix};
use mpgemm::mpgemm_core::matrix::DEFAULT_STRASSEN_CUTOFF;
use mpgemm::mpgemm_core::{Matrix, MultiFloat};
use mpgemm::{emit_csv, emit_plotdata, mpmat, Algo, BenchRecord, Precision};

/// Accuracy and timing sweeps for extended-precision GEMM and LU.
#[derive(Debug, Parser)]
#[command(name = "mpgemm", version)]
struct Args {
    #[arg(long, value_enum, default_value_t = Precision::Dd)]
    precision: Precision,

    /// One or more of simple, strassen, ozaki (comma separated).
    #[arg(long, value_enum, value_delimiter = ',', default_value = "ozaki")]
    algo: Vec<Algo>,

    /// Matrix sizes, e.g. `64,128` or `32..256:32`.
    #[arg(long, default_value = "64", value_parser = parse_list)]
    dims: SizeList,

    /// Split counts for ozaki, e.g. `3..8`.
    #[arg(long, default_value = "6", value_parser = parse_list)]
    splits: SizeList,

    /// Strassen recursion cutoff.
    #[arg(long, default_value_t = DEFAULT_STRASSEN_CUTOFF)]
    cutoff: usize,

    /// Run the blocked LU sweep instead of GEMM.
    #[arg(long)]
    lu: bool,

    /// Panel width increment of the LU sweep.
    #[arg(long, default_value_t = 32)]
    panel_step: usize,

    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Repetitions; the fastest is reported.
    #[arg(long, default_value_t = 3)]
    reps: usize,

    #[arg(long, default_value_t = 1)]
    threads: usize,

    /// Sizes above this skip the exact oracle and leave the error empty.
    #[arg(long, default_value_t = ORACLE_CAP)]
    oracle_cap: usize,

    #[arg(long, value_enum, default_value_t = BackendKind::Reference)]
    backend: BackendKind,

    #[arg(long)]
    csv: Option<PathBuf>,

    #[arg(long)]
    plotdata: Option<PathBuf>,

    /// Also write the generated inputs as MPMAT files into this directory.
    #[arg(long)]
    dump_inputs: Option<PathBuf>,
}

#[derive(Debug, Clone)]
struct SizeList(Vec<usize>);

/// Comma-separated items, each `n`, `a..b` (inclusive) or `a..b:step`.
fn parse_list(s: &str) -> Result<SizeList, String> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let num = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("not a size: {t:?}"));
        match item.split_once("..") {
            None => out.push(num(item)?),
            Some((lo, rest)) => {
                let (hi, step) = match rest.split_once(':') {
                    Some((hi, step)) => (num(hi)?, num(step)?),
                    None => (num(rest)?, 1),
                };
                let lo = num(lo)?;
                if step == 0 || lo > hi {
                    return Err(format!("empty range {item:?}"));
                }
                out.extend((lo..=hi).step_by(step));
            }
        }
    }
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(SizeList(out))
}

fn dump_inputs(args: &Args, dir: &Path) -> Result<()> {
    fn write_all<const K: usize>(args: &Args, dir: &Path) -> Result<()> {
        let save = |name: String, m: &Matrix<MultiFloat<K>>| {
            let path = dir.join(name);
            mpmat::save(&path, m).with_context(|| format!("writing {}", path.display()))
        };
        for &n in &args.dims.0 {
            let tag = MultiFloat::<K>::TAG;
            if args.lu {
                let (a, b) = gen_lu_system::<K>(n, args.seed);
                save(format!("lu_{tag}_n{n}_seed{}_a.mpmat", args.seed), &a)?;
                save(format!("lu_{tag}_n{n}_seed{}_b.mpmat", args.seed), &Matrix::from_vec(n, 1, b)?)?;
            } else {
                let b_seed = args.seed.wrapping_add(1);
                save(format!("gemm_{tag}_n{n}_seed{}.mpmat", args.seed), &gen_test_matrix::<K>(n, n, args.seed))?;
                save(format!("gemm_{tag}_n{n}_seed{b_seed}.mpmat"), &gen_test_matrix::<K>(n, n, b_seed))?;
            }
        }
        Ok(())
    }
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    match args.precision {
        Precision::Dd => write_all::<2>(args, dir),
        Precision::Td => write_all::<3>(args, dir),
        Precision::Qd => write_all::<4>(args, dir),
    }
}

fn print_table(records: &[BenchRecord]) {
    let opt = |x: Option<usize>| x.map_or("-".to_string(), |v| v.to_string());
    println!("{:<9} {:<4} {:>6} {:>3} {:>5} {:>11} {:>11}", "algo", "prec", "n", "D", "K", "t_total[s]", "max_rel_err");
    for r in records {
        let err = r.max_rel_err.map_or("-".to_string(), |e| format!("{e:.3e}"));
        println!(
            "{:<9} {:<4} {:>6} {:>3} {:>5} {:>11.4e} {:>11}",
            r.algo.as_str(),
            r.precision.as_str(),
            r.n,
            opt(r.splits),
            opt(r.panel),
            r.t_total,
            err
        );
    }
}

fn run(args: Args) -> Result<()> {
    let cfg = BenchConfig {
        precision: args.precision,
        algos: args.algo.clone(),
        dims: args.dims.0.clone(),
        splits: args.splits.0.clone(),
        cutoff: args.cutoff,
        panel_step: args.panel_step,
        seed: args.seed,
        reps: args.reps,
        threads: args.threads,
        backend: args.backend,
        oracle_cap: args.oracle_cap,
    };
    cfg.validate()?;
    if let Some(dir) = &args.dump_inputs {
        dump_inputs(&args, dir)?;
    }
    let records = if args.lu { run_lu_bench(&cfg)? } else { run_gemm_bench(&cfg)? };
    print_table(&records);
    if let Some(path) = &args.csv {
        emit_csv(&records, path)?;
    }
    if let Some(path) = &args.plotdata {
        emit_plotdata(&records, path)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mpgemm: {e:#}");
            ExitCode::FAILURE
        }
    }
}
