//! Shared helpers for the fixed-header CSV formats.

use std::path::Path;

use crate::error::{Error, Result};

/// 17 significant digits; parses back to the identical `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub(crate) fn field<'r>(rec: &'r csv::StringRecord, i: usize, path: &Path) -> Result<&'r str> {
    rec.get(i).ok_or_else(|| Error::Parse { path: path.to_owned(), reason: format!("missing column {i}") })
}

pub(crate) fn parse<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, path: &Path) -> Result<T> {
    let s = field(rec, i, path)?;
    s.trim()
        .parse()
        .map_err(|_| Error::Parse { path: path.to_owned(), reason: format!("bad value {s:?} in column {i}") })
}

pub(crate) fn parse_opt(rec: &csv::StringRecord, i: usize, path: &Path) -> Result<Option<f64>> {
    let s = field(rec, i, path)?.trim();
    if s.is_empty() {
        Ok(None)
    } else {
        parse(rec, i, path).map(Some)
    }
}

pub(crate) fn check_header(reader: &mut csv::Reader<std::fs::File>, expected: &[&str], path: &Path) -> Result<()> {
    let header = reader.headers()?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::Parse { path: path.to_owned(), reason: format!("expected header {}", expected.join(",")) });
    }
    Ok(())
}
