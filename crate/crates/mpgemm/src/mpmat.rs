//! `MPMAT v1` matrix files.
//!
//! ```text
//! MPMAT v1 dd 2 3
//! <a00> <a01> <a02>
//! <a10> <a11> <a12>
//! ```
//!
//! Each element is the K hex literals of [`crate::hexfloat`], so a row of a
//! double-double matrix carries `2 * n` words. Lines end in `\n`.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use mpgemm_core::{Matrix, MultiFloat};

use crate::error::FormatError;
use crate::hexfloat::{multi_from_words, write_multi};

pub const MAGIC: &str = "MPMAT";
pub const VERSION: &str = "v1";

/// Parsed first line of a matrix file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub tag: String,
    pub rows: usize,
    pub cols: usize,
}

impl Header {
    pub fn parse(line: &str) -> Result<Header, FormatError> {
        let bad = || FormatError::Header(line.to_string());
        let w: Vec<&str> = line.split_whitespace().collect();
        if w.len() != 5 || w[0] != MAGIC || w[1] != VERSION {
            return Err(bad());
        }
        let rows = w[3].parse().map_err(|_| bad())?;
        let cols = w[4].parse().map_err(|_| bad())?;
        Ok(Header { tag: w[2].to_string(), rows, cols })
    }
}

/// Renders the whole file in memory.
pub fn to_string<const K: usize>(m: &Matrix<MultiFloat<K>>) -> String {
    let mut s = format!("{MAGIC} {VERSION} {} {} {}\n", MultiFloat::<K>::TAG, m.rows(), m.cols());
    for i in 0..m.rows() {
        for (j, x) in m.row(i).iter().enumerate() {
            if j > 0 {
                s.push(' ');
            }
            write_multi(&mut s, x);
        }
        s.push('\n');
    }
    s
}

pub fn write<const K: usize>(mut w: impl Write, m: &Matrix<MultiFloat<K>>) -> std::io::Result<()> {
    w.write_all(to_string(m).as_bytes())
}

/// Reads a matrix whose precision tag must match `K`.
pub fn read<const K: usize>(r: impl BufRead) -> Result<Matrix<MultiFloat<K>>, FormatError> {
    let mut lines = r.lines();
    let first = lines.next().ok_or_else(|| FormatError::Header(String::new()))??;
    let h = Header::parse(&first)?;
    let tag = MultiFloat::<K>::TAG;
    if h.tag != tag {
        return Err(FormatError::Precision { expected: tag, found: h.tag });
    }
    let mut data = Vec::with_capacity(h.rows * h.cols);
    for i in 0..h.rows {
        let line = match lines.next() {
            Some(l) => l?,
            None => return Err(FormatError::RowCount { expected: h.rows, found: i }),
        };
        let at = |e: FormatError| FormatError::Line { line: i + 2, source: Box::new(e) };
        let mut words = line.split_whitespace();
        for _ in 0..h.cols {
            data.push(multi_from_words::<K>(&mut words).map_err(at)?);
        }
        if let Some(extra) = words.next() {
            return Err(at(FormatError::Literal(extra.to_string())));
        }
    }
    for (extra, line) in lines.enumerate() {
        if !line?.trim().is_empty() {
            return Err(FormatError::RowCount { expected: h.rows, found: h.rows + extra + 1 });
        }
    }
    Ok(Matrix::from_vec(h.rows, h.cols, data)?)
}

pub fn from_str<const K: usize>(s: &str) -> Result<Matrix<MultiFloat<K>>, FormatError> {
    read(s.as_bytes())
}

pub fn save<const K: usize>(path: impl AsRef<Path>, m: &Matrix<MultiFloat<K>>) -> std::io::Result<()> {
    fs::write(path, to_string(m))
}

pub fn load<const K: usize>(path: impl AsRef<Path>) -> Result<Matrix<MultiFloat<K>>, FormatError> {
    read(BufReader::new(fs::File::open(path)?))
}
