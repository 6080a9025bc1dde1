//! Benchmark observations and their CSV / plot-data files.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::BenchError;

/// Column names of CSV schema v1. Columns are only ever appended in later
/// versions, so v1 readers keep working.
pub const CSV_HEADER: [&str; 13] = [
    "algo",
    "precision",
    "n",
    "D",
    "K",
    "threads",
    "seed",
    "reps",
    "t_split",
    "t_product",
    "t_accum",
    "t_total",
    "max_rel_err",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Simple,
    Strassen,
    Ozaki,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Dd,
    Td,
    Qd,
}

impl Algo {
    pub fn as_str(self) -> &'static str {
        match self {
            Algo::Simple => "simple",
            Algo::Strassen => "strassen",
            Algo::Ozaki => "ozaki",
        }
    }
}

impl Precision {
    pub fn as_str(self) -> &'static str {
        match self {
            Precision::Dd => "dd",
            Precision::Td => "td",
            Precision::Qd => "qd",
        }
    }

    /// Number of binary64 words.
    pub fn words(self) -> usize {
        match self {
            Precision::Dd => 2,
            Precision::Td => 3,
            Precision::Qd => 4,
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One timed run. Times are seconds of the fastest repetition; the phase
/// columns are only filled where an Ozaki product was involved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub algo: Algo,
    pub precision: Precision,
    pub n: usize,
    #[serde(rename = "D")]
    pub splits: Option<usize>,
    #[serde(rename = "K")]
    pub panel: Option<usize>,
    pub threads: usize,
    pub seed: u64,
    pub reps: usize,
    pub t_split: Option<f64>,
    pub t_product: Option<f64>,
    pub t_accum: Option<f64>,
    pub t_total: f64,
    /// Empty when `n` is above the oracle cap.
    pub max_rel_err: Option<f64>,
}

impl BenchRecord {
    /// Share of `t_total` spent in each profiled phase; the rest is overhead.
    pub fn phase_fractions(&self) -> Option<[f64; 3]> {
        let (s, p, a) = (self.t_split?, self.t_product?, self.t_accum?);
        if self.t_total <= 0.0 {
            return Some([0.0; 3]);
        }
        Some([s / self.t_total, p / self.t_total, a / self.t_total])
    }

    fn check(&self) -> Result<(), String> {
        let times = [self.t_split, self.t_product, self.t_accum, Some(self.t_total)];
        if times.iter().flatten().any(|t| t.is_nan() || *t < 0.0) {
            return Err(format!("negative or NaN time in {self:?}"));
        }
        if self.max_rel_err.is_some_and(|e| e.is_nan() || e < 0.0) {
            return Err(format!("negative or NaN error in {self:?}"));
        }
        Ok(())
    }
}

pub fn write_csv(w: impl Write, records: &[BenchRecord]) -> csv::Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in records {
        if let Err(msg) = r.check() {
            return Err(std::io::Error::new(std::io::ErrorKind::InvalidData, msg).into());
        }
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// Parses a v1 file. Extra trailing columns from later versions are ignored.
pub fn read_csv(r: impl Read) -> csv::Result<Vec<BenchRecord>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(r);
    let header = rdr.headers()?.clone();
    if header.len() < CSV_HEADER.len() || header.iter().zip(CSV_HEADER).any(|(a, b)| a != b) {
        let msg = format!("unexpected CSV header {:?}", header.iter().collect::<Vec<_>>());
        return Err(std::io::Error::new(std::io::ErrorKind::InvalidData, msg).into());
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let head: csv::StringRecord = row.iter().take(CSV_HEADER.len()).collect();
        out.push(head.deserialize(None)?);
    }
    Ok(out)
}

pub fn emit_csv(records: &[BenchRecord], path: impl AsRef<Path>) -> Result<(), BenchError> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|source| BenchError::Io { path: path.into(), source })?;
    write_csv(file, records).map_err(|source| BenchError::Csv { path: path.into(), source })
}

/// Text blocks for gnuplot-style tools, one per series, separated by two
/// blank lines. GEMM series run over `n`; LU series run over `K` for a
/// fixed `n`. Missing errors are written as `?`.
pub fn plotdata(records: &[BenchRecord]) -> String {
    type Key = (bool, Algo, Precision, Option<usize>, Option<usize>);
    let mut series: BTreeMap<Key, Vec<&BenchRecord>> = BTreeMap::new();
    for r in records {
        let lu = r.panel.is_some();
        let fixed_n = if lu { Some(r.n) } else { None };
        series.entry((lu, r.algo, r.precision, r.splits, fixed_n)).or_default().push(r);
    }
    let mut s = String::from("# mpgemm plotdata v1\n");
    for (idx, ((lu, algo, precision, splits, fixed_n), mut rows)) in series.into_iter().enumerate() {
        if idx > 0 {
            s.push_str("\n\n");
        }
        let d = splits.map_or("-".to_string(), |d| d.to_string());
        if lu {
            let _ = writeln!(s, "# lu algo={algo} precision={precision} D={d} n={}", fixed_n.unwrap_or(0));
            let _ = writeln!(s, "# K t_total max_rel_err");
            rows.sort_by_key(|r| r.panel);
        } else {
            let _ = writeln!(s, "# gemm algo={algo} precision={precision} D={d}");
            let _ = writeln!(s, "# n t_total max_rel_err");
            rows.sort_by_key(|r| r.n);
        }
        for r in rows {
            let x = if lu { r.panel.unwrap_or(0) } else { r.n };
            let err = r.max_rel_err.map_or("?".to_string(), |e| format!("{e:e}"));
            let _ = writeln!(s, "{x} {:e} {err}", r.t_total);
        }
    }
    s
}

pub fn emit_plotdata(records: &[BenchRecord], path: impl AsRef<Path>) -> Result<(), BenchError> {
    let path = path.as_ref();
    fs::write(path, plotdata(records)).map_err(|source| BenchError::Io { path: path.into(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> BenchRecord {
        BenchRecord {
            algo: Algo::Ozaki,
            precision: Precision::Td,
            n: 64,
            splits: Some(9),
            panel: None,
            threads: 1,
            seed: 7,
            reps: 3,
            t_split: Some(0.25),
            t_product: Some(0.5),
            t_accum: Some(0.125),
            t_total: 1.0,
            max_rel_err: Some(1.5e-48),
        }
    }

    #[test]
    fn empty_list_is_header_only() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), CSV_HEADER.join(",") + "\n");
    }

    #[test]
    fn fields_render_as_documented() {
        let mut r = sample();
        r.max_rel_err = None;
        let mut buf = Vec::new();
        write_csv(&mut buf, &[r]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "ozaki,td,64,9,,1,7,3,0.25,0.5,0.125,1.0,");
    }

    #[test]
    fn later_columns_are_ignored() {
        let text = format!("{},extra\nsimple,dd,8,,,1,0,1,,,,0.5,1e-30,x\n", CSV_HEADER.join(","));
        let r = read_csv(text.as_bytes()).unwrap();
        assert_eq!(r[0].max_rel_err, Some(1e-30));
        assert!(read_csv("algo,n\n".as_bytes()).is_err());
    }

    #[test]
    fn invalid_records_are_refused() {
        let mut r = sample();
        r.t_total = -1.0;
        assert!(write_csv(Vec::new(), &[r]).is_err());
    }

    #[test]
    fn fractions() {
        let f = sample().phase_fractions().unwrap();
        assert_eq!(f, [0.25, 0.5, 0.125]);
        assert!(f.iter().sum::<f64>() <= 1.0);
    }
}
