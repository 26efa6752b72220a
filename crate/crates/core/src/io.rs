//! CSV input and output for signals, matrices and run metadata.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes())
}

/// Numeric rows of a headerless CSV text; blank lines and `#` comments are skipped.
pub fn parse_rows(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (line, record) in reader(text).records().enumerate() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let row = record
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("record {}: not a number: {field:?}", line + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse(format!("record {}: non-finite value", line + 1)));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("no data".into()));
    }
    Ok(rows)
}

pub fn parse_matrix(text: &str) -> Result<Matrix> {
    let rows = parse_rows(text)?;
    let width = rows[0].len();
    if let Some(i) = rows.iter().position(|r| r.len() != width) {
        return Err(Error::Parse(format!(
            "row {} has {} fields, expected {width}",
            i + 1,
            rows[i].len()
        )));
    }
    Matrix::from_rows(&rows).map_err(|e| Error::Parse(e.to_string()))
}

/// A single column (or a single row) of numbers.
pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    let rows = parse_rows(text)?;
    if rows.iter().all(|r| r.len() == 1) {
        return Ok(rows.into_iter().map(|r| r[0]).collect());
    }
    if rows.len() == 1 {
        return Ok(rows.into_iter().next().unwrap_or_default());
    }
    Err(Error::Parse("expected a single column of numbers".into()))
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    parse_matrix(&fs::read_to_string(path)?)
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    parse_vector(&fs::read_to_string(path)?)
}

/// Shortest round-trip representation, so written files reload bit-identically.
fn fmt_value(v: f64) -> String {
    format!("{v:?}")
}

pub fn format_matrix(m: &Matrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = (0..m.cols()).map(|j| fmt_value(m.get(i, j))).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn format_vector(v: &[f64]) -> String {
    v.iter().map(|&x| fmt_value(x) + "\n").collect()
}

/// `index,coefficient` lines with a header.
pub fn format_coefficients(beta: &[f64]) -> String {
    let mut out = String::from("index,coefficient\n");
    for (j, &b) in beta.iter().enumerate() {
        out.push_str(&format!("{j},{}\n", fmt_value(b)));
    }
    out
}

/// Flat `key=value` lines.
pub fn format_meta(entries: &[(&str, String)]) -> String {
    entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

pub fn parse_meta(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

pub fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip() {
        let m = Matrix::from_rows(&[vec![1.0, -2.5], vec![0.1, 1e-300]]).unwrap();
        assert_eq!(parse_matrix(&format_matrix(&m)).unwrap(), m);
    }

    #[test]
    fn vectors_in_either_orientation() {
        assert_eq!(parse_vector("1\n2\n\n3\n").unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(parse_vector("1, 2, 3\n").unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(parse_vector("1,2\n3,4\n").is_err());
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse_matrix("1,x\n"), Err(Error::Parse(_))));
        assert!(matches!(parse_matrix("1,2\n3\n"), Err(Error::Parse(_))));
        assert!(matches!(parse_matrix(""), Err(Error::Parse(_))));
        assert!(matches!(parse_vector("nan\n"), Err(Error::Parse(_))));
    }

    #[test]
    fn meta_round_trip() {
        let text = format_meta(&[("lambda", "4".into()), ("grid", "1;2;4".into())]);
        assert_eq!(
            parse_meta(&text),
            vec![("lambda".into(), "4".into()), ("grid".into(), "1;2;4".into())]
        );
    }
}
