//! Matrix Market reading and writing.
//!
//! Coordinate and array formats are supported with the `general` and
//! `skew-symmetric` symmetry fields. Skew-symmetric files may store either
//! strict triangle (consistently); entries are canonicalized to the strict
//! upper triangle on input. Values are written with 17 significant digits,
//! which round-trips every f64 bit-exactly.
//!
//! Every rejection carries the 1-based line number it was detected on.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use skrylov::{DenseMatrix, OpKind, SparseSkewMatrix, Triplet, Vector};
use thiserror::Error;

#[derive(Debug, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum MmError {
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("{0}")]
    Parse(#[from] ParseError),
}

/// A parsed matrix: strict-upper sparse storage when the file declared
/// skew-symmetric symmetry, dense otherwise. A general file whose entries
/// are exactly antisymmetric with a zero diagonal is re-tagged skew, so the
/// skew solvers accept it.
#[derive(Debug)]
pub enum LoadedMatrix {
    SparseSkew(SparseSkewMatrix),
    Dense(DenseMatrix),
}

impl LoadedMatrix {
    pub fn n(&self) -> usize {
        match self {
            LoadedMatrix::SparseSkew(m) => m.n(),
            LoadedMatrix::Dense(m) => m.n(),
        }
    }
}

#[derive(Debug)]
pub struct MatrixFile {
    pub matrix: LoadedMatrix,
    pub comments: Vec<String>,
}

struct Header {
    coordinate: bool,
    skew: bool,
}

fn parse_header(line: &str) -> Result<Header, String> {
    let fields: Vec<String> = line
        .split_whitespace()
        .map(|f| f.to_ascii_lowercase())
        .collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" {
        return Err("header must be '%%MatrixMarket matrix <format> real <symmetry>'".into());
    }
    if fields[1] != "matrix" {
        return Err(format!(
            "unsupported object '{}' (only 'matrix')",
            fields[1]
        ));
    }
    let coordinate = match fields[2].as_str() {
        "coordinate" => true,
        "array" => false,
        other => {
            return Err(format!(
                "unsupported format '{other}' (coordinate or array)"
            ))
        }
    };
    if fields[3] != "real" {
        return Err(format!("unsupported field '{}' (only 'real')", fields[3]));
    }
    let skew = match fields[4].as_str() {
        "general" => false,
        "skew-symmetric" => true,
        other => {
            return Err(format!(
                "unsupported symmetry '{other}' (general or skew-symmetric)"
            ))
        }
    };
    Ok(Header { coordinate, skew })
}

fn parse_value(token: &str, line: usize, what: &str) -> Result<f64, ParseError> {
    let value: f64 = token
        .parse()
        .map_err(|_| ParseError::new(line, format!("cannot parse {what} '{token}'")))?;
    if !value.is_finite() {
        return Err(ParseError::new(
            line,
            format!("{what} '{token}' is not finite"),
        ));
    }
    Ok(value)
}

fn parse_index(token: &str, line: usize, what: &str, n: usize) -> Result<usize, ParseError> {
    let index: usize = token
        .parse()
        .map_err(|_| ParseError::new(line, format!("cannot parse {what} '{token}'")))?;
    if index == 0 || index > n {
        return Err(ParseError::new(
            line,
            format!("{what} {index} out of range 1..={n}"),
        ));
    }
    Ok(index - 1)
}

/// Parses Matrix Market text. Exposed separately from the file reader so
/// parsing is testable without touching the filesystem.
pub fn parse_matrix_market(text: &str) -> Result<MatrixFile, ParseError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines
        .next()
        .ok_or_else(|| ParseError::new(1, "empty file"))?;
    let header = parse_header(first).map_err(|message| ParseError::new(1, message))?;

    let mut comments = Vec::new();
    let mut size_line = None;
    for (lineno, raw) in lines.by_ref() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('%') {
            comments.push(comment.trim_start().to_string());
            continue;
        }
        size_line = Some((lineno, line.to_string()));
        break;
    }
    let (size_lineno, size_text) = size_line
        .ok_or_else(|| ParseError::new(text.lines().count().max(1), "missing size line"))?;

    let fields: Vec<&str> = size_text.split_whitespace().collect();
    let expected_fields = if header.coordinate { 3 } else { 2 };
    if fields.len() != expected_fields {
        return Err(ParseError::new(
            size_lineno,
            format!(
                "size line needs {expected_fields} fields, found {}",
                fields.len()
            ),
        ));
    }
    let rows: usize = fields[0].parse().map_err(|_| {
        ParseError::new(
            size_lineno,
            format!("cannot parse row count '{}'", fields[0]),
        )
    })?;
    let cols: usize = fields[1].parse().map_err(|_| {
        ParseError::new(
            size_lineno,
            format!("cannot parse column count '{}'", fields[1]),
        )
    })?;
    if rows != cols {
        return Err(ParseError::new(
            size_lineno,
            format!("matrix must be square, got {rows} x {cols}"),
        ));
    }
    let n = rows;
    if n < 2 {
        return Err(ParseError::new(
            size_lineno,
            format!("dimension {n} too small, need n >= 2"),
        ));
    }
    if header.skew && !n.is_multiple_of(2) {
        return Err(ParseError::new(
            size_lineno,
            format!("skew-symmetric problems need even dimension, got {n}"),
        ));
    }

    let body: Vec<(usize, &str)> = lines
        .map(|(lineno, raw)| (lineno, raw.trim()))
        .filter(|(_, line)| !line.is_empty() && !line.starts_with('%'))
        .collect();
    let eof_line = text.lines().count().max(size_lineno);

    let matrix = if header.coordinate {
        let nnz: usize = fields[2].parse().map_err(|_| {
            ParseError::new(
                size_lineno,
                format!("cannot parse entry count '{}'", fields[2]),
            )
        })?;
        parse_coordinate_body(&body, n, nnz, header.skew, eof_line)?
    } else {
        parse_array_body(&body, n, header.skew, eof_line)?
    };

    Ok(MatrixFile { matrix, comments })
}

/// Orientation of stored skew entries; files must stick to one triangle.
#[derive(PartialEq, Clone, Copy)]
enum Triangle {
    Upper,
    Lower,
}

fn parse_coordinate_body(
    body: &[(usize, &str)],
    n: usize,
    nnz: usize,
    skew: bool,
    eof_line: usize,
) -> Result<LoadedMatrix, ParseError> {
    let mut triangle: Option<Triangle> = None;
    let mut triplets: Vec<Triplet> = Vec::with_capacity(nnz);
    let mut dense = (!skew).then(|| nalgebra::DMatrix::<f64>::zeros(n, n));
    let mut seen = std::collections::HashSet::with_capacity(nnz);

    for (count, &(lineno, line)) in body.iter().enumerate() {
        if count == nnz {
            return Err(ParseError::new(lineno, "more entries than declared"));
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(ParseError::new(
                lineno,
                format!("entry needs 'row col value', found {} fields", fields.len()),
            ));
        }
        let i = parse_index(fields[0], lineno, "row index", n)?;
        let j = parse_index(fields[1], lineno, "column index", n)?;
        let value = parse_value(fields[2], lineno, "value")?;

        if skew {
            if i == j {
                return Err(ParseError::new(
                    lineno,
                    format!(
                        "explicit diagonal entry ({}, {}) in a skew-symmetric file",
                        i + 1,
                        j + 1
                    ),
                ));
            }
            let this = if i < j {
                Triangle::Upper
            } else {
                Triangle::Lower
            };
            match triangle {
                None => triangle = Some(this),
                Some(t) if t != this => {
                    return Err(ParseError::new(
                        lineno,
                        "mixed upper and lower triangle entries in a skew-symmetric file",
                    ));
                }
                _ => {}
            }
            // Canonicalize to strict upper.
            let (row, col, v) = if i < j { (i, j, value) } else { (j, i, -value) };
            if !seen.insert((row, col)) {
                return Err(ParseError::new(
                    lineno,
                    format!("duplicate entry for position ({}, {})", i + 1, j + 1),
                ));
            }
            triplets.push((row, col, v));
        } else {
            if !seen.insert((i, j)) {
                return Err(ParseError::new(
                    lineno,
                    format!("duplicate entry for position ({}, {})", i + 1, j + 1),
                ));
            }
            dense.as_mut().unwrap()[(i, j)] = value;
        }
    }
    if body.len() < nnz {
        return Err(ParseError::new(
            eof_line,
            format!("expected {nnz} entries, found {}", body.len()),
        ));
    }

    if skew {
        SparseSkewMatrix::new(n, triplets)
            .map(LoadedMatrix::SparseSkew)
            .map_err(|e| ParseError::new(eof_line, e.to_string()))
    } else {
        Ok(retag_dense(dense.unwrap(), eof_line)?)
    }
}

fn parse_array_body(
    body: &[(usize, &str)],
    n: usize,
    skew: bool,
    eof_line: usize,
) -> Result<LoadedMatrix, ParseError> {
    let expected = if skew { n * (n - 1) / 2 } else { n * n };
    let mut values = Vec::with_capacity(expected);
    for &(lineno, line) in body {
        for token in line.split_whitespace() {
            if values.len() == expected {
                return Err(ParseError::new(lineno, "more values than declared"));
            }
            values.push((lineno, parse_value(token, lineno, "value")?));
        }
    }
    if values.len() < expected {
        return Err(ParseError::new(
            eof_line,
            format!("expected {expected} values, found {}", values.len()),
        ));
    }

    if skew {
        // Column-major strict lower triangle; canonicalize to strict upper
        // with the sign flip.
        let mut triplets: Vec<Triplet> = Vec::new();
        let mut idx = 0;
        for j in 0..n {
            for i in (j + 1)..n {
                let (_, v) = values[idx];
                idx += 1;
                if v != 0.0 {
                    triplets.push((j, i, -v));
                }
            }
        }
        SparseSkewMatrix::new(n, triplets)
            .map(LoadedMatrix::SparseSkew)
            .map_err(|e| ParseError::new(eof_line, e.to_string()))
    } else {
        let mut dense = nalgebra::DMatrix::<f64>::zeros(n, n);
        let mut idx = 0;
        for j in 0..n {
            for i in 0..n {
                dense[(i, j)] = values[idx].1;
                idx += 1;
            }
        }
        retag_dense(dense, eof_line)
    }
}

/// A general file whose entries are exactly antisymmetric (zero diagonal,
/// even dimension) gets the skew tag; anything else stays general.
fn retag_dense(data: nalgebra::DMatrix<f64>, eof_line: usize) -> Result<LoadedMatrix, ParseError> {
    match DenseMatrix::new(data.clone(), OpKind::Skew) {
        Ok(skew) => Ok(LoadedMatrix::Dense(skew)),
        Err(_) => DenseMatrix::new(data, OpKind::General)
            .map(LoadedMatrix::Dense)
            .map_err(|e| ParseError::new(eof_line, e.to_string())),
    }
}

/// Reads and parses a Matrix Market file.
pub fn read_matrix_market(path: &Path) -> Result<MatrixFile, MmError> {
    let text = fs::read_to_string(path)?;
    Ok(parse_matrix_market(&text)?)
}

/// Formats a value with `digits` significant decimal digits in scientific
/// notation; 17 digits reproduce any f64 exactly.
pub fn format_value(value: f64, digits: usize) -> String {
    format!("{:.*e}", digits.saturating_sub(1), value)
}

/// Renders a matrix as Matrix Market text: coordinate format, strict upper
/// triangle with skew-symmetric symmetry for skew matrices, all nonzero
/// entries with general symmetry otherwise.
pub fn format_matrix_market(matrix: &LoadedMatrix, comments: &[String]) -> String {
    let mut out = String::new();
    let (symmetry, triplets, n) = match matrix {
        LoadedMatrix::SparseSkew(m) => ("skew-symmetric", m.triplets().to_vec(), m.n()),
        LoadedMatrix::Dense(m) if m.kind() == OpKind::Skew => {
            let mut triplets: Vec<Triplet> = Vec::new();
            for i in 0..m.n() {
                for j in (i + 1)..m.n() {
                    let v = m.entry(i, j);
                    if v != 0.0 {
                        triplets.push((i, j, v));
                    }
                }
            }
            ("skew-symmetric", triplets, m.n())
        }
        LoadedMatrix::Dense(m) => {
            let mut triplets: Vec<Triplet> = Vec::new();
            for i in 0..m.n() {
                for j in 0..m.n() {
                    let v = m.entry(i, j);
                    if v != 0.0 {
                        triplets.push((i, j, v));
                    }
                }
            }
            ("general", triplets, m.n())
        }
    };
    writeln!(out, "%%MatrixMarket matrix coordinate real {symmetry}").unwrap();
    for comment in comments {
        writeln!(out, "% {comment}").unwrap();
    }
    writeln!(out, "{n} {n} {}", triplets.len()).unwrap();
    for (i, j, v) in triplets {
        writeln!(out, "{} {} {}", i + 1, j + 1, format_value(v, 17)).unwrap();
    }
    out
}

/// Writes a matrix to a Matrix Market file; round-trips bit-exactly with
/// [`read_matrix_market`].
pub fn write_matrix_market(
    matrix: &LoadedMatrix,
    comments: &[String],
    path: &Path,
) -> io::Result<()> {
    fs::write(path, format_matrix_market(matrix, comments))
}

/// Reads a dense vector from a Matrix Market array file with one column.
pub fn read_vector(path: &Path) -> Result<Vector, MmError> {
    let text = fs::read_to_string(path)?;
    Ok(parse_vector(&text)?)
}

pub fn parse_vector(text: &str) -> Result<Vector, ParseError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines
        .next()
        .ok_or_else(|| ParseError::new(1, "empty file"))?;
    let fields: Vec<String> = first
        .split_whitespace()
        .map(|f| f.to_ascii_lowercase())
        .collect();
    if fields.len() != 5
        || fields[0] != "%%matrixmarket"
        || fields[1] != "matrix"
        || fields[2] != "array"
        || fields[3] != "real"
        || fields[4] != "general"
    {
        return Err(ParseError::new(
            1,
            "vector file must start with '%%MatrixMarket matrix array real general'",
        ));
    }
    let mut size = None;
    let mut values = Vec::new();
    let mut declared = 0usize;
    let mut last_line = 1;
    for (lineno, raw) in lines {
        last_line = lineno;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if size.is_none() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(ParseError::new(lineno, "size line needs 2 fields"));
            }
            let rows: usize = fields[0]
                .parse()
                .map_err(|_| ParseError::new(lineno, "cannot parse row count"))?;
            let cols: usize = fields[1]
                .parse()
                .map_err(|_| ParseError::new(lineno, "cannot parse column count"))?;
            if cols != 1 {
                return Err(ParseError::new(
                    lineno,
                    format!("vector needs 1 column, got {cols}"),
                ));
            }
            if rows < 2 {
                return Err(ParseError::new(
                    lineno,
                    format!("dimension {rows} too small"),
                ));
            }
            declared = rows;
            size = Some(rows);
            continue;
        }
        if values.len() == declared {
            return Err(ParseError::new(lineno, "more values than declared"));
        }
        values.push(parse_value(line, lineno, "value")?);
    }
    if size.is_none() {
        return Err(ParseError::new(last_line, "missing size line"));
    }
    if values.len() != declared {
        return Err(ParseError::new(
            last_line,
            format!("expected {declared} values, found {}", values.len()),
        ));
    }
    Ok(Vector::from_vec(values))
}
