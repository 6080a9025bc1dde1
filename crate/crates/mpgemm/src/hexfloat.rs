//! Bit-exact text form of binary64 and multi-float values.
//!
//! A binary64 is written as a C99-style hexadecimal literal
//! (`-0x1.8p+1`, `0x0.0000000000001p-1022` for subnormals, `inf`, `nan`).
//! A `MultiFloat<K>` is its K components separated by single spaces.

use std::fmt::Write as _;

use mpgemm_core::MultiFloat;

use crate::error::FormatError;

/// Formats one binary64 so that [`parse_f64`] returns the same bits.
pub fn format_f64(x: f64) -> String {
    let mut s = String::with_capacity(24);
    write_f64(&mut s, x);
    s
}

fn write_f64(out: &mut String, x: f64) {
    if x.is_nan() {
        out.push_str("nan");
        return;
    }
    if x.is_sign_negative() {
        out.push('-');
    }
    if x.is_infinite() {
        out.push_str("inf");
        return;
    }
    let bits = x.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i32;
    let mut frac = bits & ((1u64 << 52) - 1);
    if biased == 0 && frac == 0 {
        out.push_str("0x0p+0");
        return;
    }
    let (lead, exp) = if biased == 0 { (0, -1022) } else { (1, biased - 1023) };
    let _ = write!(out, "0x{lead}");
    if frac != 0 {
        let mut digits = 13;
        while frac & 0xf == 0 {
            frac >>= 4;
            digits -= 1;
        }
        let _ = write!(out, ".{frac:0digits$x}");
    }
    let _ = write!(out, "p{exp:+}");
}

/// Parses a literal produced by [`format_f64`]. Decimal input is rejected
/// on purpose: it would not round-trip.
pub fn parse_f64(s: &str) -> Result<f64, FormatError> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let v = match body {
        "nan" => return Ok(f64::NAN),
        "inf" => f64::INFINITY,
        _ => {
            if !body.starts_with("0x") {
                return Err(FormatError::Literal(s.to_string()));
            }
            hexf_parse::parse_hexf64(body, false).map_err(|_| FormatError::Literal(s.to_string()))?
        }
    };
    Ok(if neg { -v } else { v })
}

/// Formats the components of `x`, leading word first.
pub fn format_multi<const K: usize>(x: &MultiFloat<K>) -> String {
    let mut s = String::with_capacity(24 * K);
    write_multi(&mut s, x);
    s
}

pub(crate) fn write_multi<const K: usize>(out: &mut String, x: &MultiFloat<K>) {
    for (i, &c) in x.components().iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write_f64(out, c);
    }
}

/// Parses exactly K whitespace-separated literals and checks that they form
/// a renormalized value.
pub fn parse_multi<const K: usize>(s: &str) -> Result<MultiFloat<K>, FormatError> {
    let mut words = s.split_whitespace();
    let x = multi_from_words::<K>(&mut words)?;
    match words.next() {
        None => Ok(x),
        Some(extra) => Err(FormatError::Literal(extra.to_string())),
    }
}

pub(crate) fn multi_from_words<'a, const K: usize>(
    words: &mut impl Iterator<Item = &'a str>,
) -> Result<MultiFloat<K>, FormatError> {
    let mut c = [0.0; K];
    for (i, slot) in c.iter_mut().enumerate() {
        let w = words.next().ok_or(FormatError::MissingComponent { index: i, expected: K })?;
        *slot = parse_f64(w)?;
    }
    MultiFloat::from_components(c).map_err(FormatError::from)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_literals() {
        assert_eq!(format_f64(1.0), "0x1p+0");
        assert_eq!(format_f64(-3.0), "-0x1.8p+1");
        assert_eq!(format_f64(0.1), "0x1.999999999999ap-4");
        assert_eq!(format_f64(f64::MIN_POSITIVE), "0x1p-1022");
        assert_eq!(format_f64(f64::from_bits(1)), "0x0.0000000000001p-1022");
        assert_eq!(format_f64(f64::MAX), "0x1.fffffffffffffp+1023");
        assert_eq!(format_f64(-0.0), "-0x0p+0");
        assert_eq!(format_f64(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn special_values_round_trip() {
        for x in [0.0, -0.0, f64::INFINITY, f64::NEG_INFINITY, f64::from_bits(1), f64::MAX, -f64::MIN_POSITIVE] {
            assert_eq!(parse_f64(&format_f64(x)).unwrap().to_bits(), x.to_bits());
        }
        assert!(parse_f64("nan").unwrap().is_nan());
    }

    #[test]
    fn rejects_decimal_and_garbage() {
        for s in ["1.5", "0x", "0x1.gp+0", "", "-", "0x1p+0x"] {
            assert!(parse_f64(s).is_err(), "{s:?}");
        }
    }

    #[test]
    fn multi_needs_exactly_k_renormalized_words() {
        let x = MultiFloat::<2>::from_f64(1.0).add_f64(1e-20);
        assert_eq!(parse_multi::<2>(&format_multi(&x)).unwrap(), x);
        assert!(parse_multi::<2>("0x1p+0").is_err());
        assert!(parse_multi::<2>("0x1p+0 0x0p+0 0x0p+0").is_err());
        assert!(parse_multi::<2>("0x1p-60 0x1p+0").is_err());
    }
}
