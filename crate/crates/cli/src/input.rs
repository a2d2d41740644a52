//! CSV loading: header detection, column selection and missing values.

use std::fs::File;
use std::io::{self, Read};
use std::path::Path;

use anyhow::{bail, Context, Result};

use crate::DataError;

const MISSING: [&str; 6] = ["", "na", "nan", "null", ".", "n/a"];

#[derive(Debug, Clone)]
pub struct InputSpec<'a> {
    pub path: &'a Path,
    pub column: Option<&'a str>,
    pub date_column: Option<&'a str>,
    pub no_header: bool,
    pub drop_missing: bool,
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub label: String,
    pub values: Vec<f64>,
    pub dates: Option<(String, String)>,
    pub dropped: usize,
}

fn is_missing(field: &str) -> bool {
    MISSING.contains(&field.trim().to_ascii_lowercase().as_str())
}

fn parse_num(field: &str) -> Option<f64> {
    field.trim().parse::<f64>().ok()
}

fn read_all(path: &Path) -> Result<String> {
    let mut buf = String::new();
    if path.as_os_str() == "-" {
        io::stdin().read_to_string(&mut buf).context("reading standard input")?;
    } else {
        File::open(path)
            .and_then(|mut f| f.read_to_string(&mut buf))
            .map_err(|e| DataError(format!("cannot read {}: {e}", path.display())))?;
    }
    Ok(buf)
}

/// The first row is a header if some field fails to parse there but parses
/// in the second row (or, for a single row, if any field is non-numeric).
fn detect_header(rows: &[csv::StringRecord]) -> bool {
    let Some(first) = rows.first() else { return false };
    match rows.get(1) {
        Some(second) => first
            .iter()
            .zip(second.iter())
            .any(|(a, b)| parse_num(a).is_none() && !is_missing(a) && parse_num(b).is_some()),
        None => first.iter().any(|a| parse_num(a).is_none() && !is_missing(a)),
    }
}

/// Resolve a column by header name, then by 1-based index.
fn resolve(sel: &str, header: Option<&csv::StringRecord>, width: usize) -> Result<usize> {
    if let Some(h) = header {
        if let Some(i) = h.iter().position(|name| name.trim() == sel) {
            return Ok(i);
        }
    }
    match sel.parse::<usize>() {
        Ok(i) if (1..=width).contains(&i) => Ok(i - 1),
        Ok(i) => bail!(DataError(format!("column index {i} out of range 1..={width}"))),
        Err(_) => bail!(DataError(format!("no column named '{sel}'"))),
    }
}

pub fn load(spec: &InputSpec) -> Result<Loaded> {
    let text = read_all(spec.path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> =
        rdr.records().collect::<std::result::Result<_, _>>().map_err(|e| DataError(format!("malformed CSV: {e}")))?;
    if rows.is_empty() {
        bail!(DataError("input has no rows".into()));
    }
    let has_header = !spec.no_header && detect_header(&rows);
    let (header, body) = if has_header { (Some(&rows[0]), &rows[1..]) } else { (None, &rows[..]) };
    let width = rows[0].len();

    let col = match spec.column {
        Some(sel) => resolve(sel, header, width)?,
        None => {
            let first = body.first().ok_or_else(|| DataError("input has a header but no data".into()))?;
            // Rightmost numeric column: leading columns are usually indices or dates.
            (0..first.len())
                .rev()
                .find(|&i| first.get(i).and_then(parse_num).is_some())
                .ok_or_else(|| DataError("no numeric column found; use --column".into()))?
        }
    };
    let date_col = spec.date_column.map(|sel| resolve(sel, header, width)).transpose()?;
    let label = header.and_then(|h| h.get(col)).map(str::to_string).unwrap_or_else(|| format!("column {}", col + 1));

    let mut values = Vec::with_capacity(body.len());
    let mut dates: Vec<&str> = Vec::new();
    let mut dropped = 0;
    for (i, row) in body.iter().enumerate() {
        let line = i + 1 + has_header as usize;
        let field = row.get(col).unwrap_or("");
        if is_missing(field) {
            if spec.drop_missing {
                dropped += 1;
                continue;
            }
            bail!(DataError(format!("missing value in '{label}' at line {line}; pass --drop-missing to skip such rows")));
        }
        let x = parse_num(field).ok_or_else(|| DataError(format!("non-numeric value '{field}' at line {line}")))?;
        if !x.is_finite() {
            bail!(DataError(format!("non-finite value '{field}' at line {line}")));
        }
        values.push(x);
        if let Some(dc) = date_col {
            dates.push(row.get(dc).unwrap_or(""));
        }
    }
    if values.is_empty() {
        bail!(DataError(format!("column '{label}' has no usable values")));
    }
    let dates = match (dates.first(), dates.last()) {
        (Some(a), Some(b)) => Some((a.to_string(), b.to_string())),
        _ => None,
    };
    Ok(Loaded { label, values, dates, dropped })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn records(text: &str) -> Vec<csv::StringRecord> {
        csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes()).records().map(|r| r.unwrap()).collect()
    }

    #[test]
    fn header_detection() {
        assert!(detect_header(&records("date,gdp\n2001-01,1.5\n")));
        assert!(!detect_header(&records("2001-01,1.5\n2001-02,1.7\n")));
        assert!(!detect_header(&records("1.0\n2.0\n")));
        assert!(detect_header(&records("x\n")));
    }

    #[test]
    fn missing_markers() {
        for m in ["", "NA", "nan", " . "] {
            assert!(is_missing(m), "{m:?}");
        }
        assert!(!is_missing("0"));
    }
}
