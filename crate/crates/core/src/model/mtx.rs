//! MatrixMarket reader and writer for dense real matrices.
//!
//! Both `coordinate` and `array` storage are accepted with `general`,
//! `symmetric` or `skew-symmetric` symmetry, so benchmark collections
//! distributed in this format load unchanged. Matrices are always written
//! back in `array real general` form with round-trip exact entries.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq)]
enum Storage {
    Coordinate,
    Array,
}

#[derive(Clone, Copy, PartialEq)]
enum Symmetry {
    General,
    Symmetric,
    Skew,
}

pub fn read_matrix_market(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_matrix_market(&text, path)
}

pub fn parse_matrix_market(text: &str, path: &Path) -> Result<DMatrix<f64>> {
    let err = |line: usize, message: String| Error::Parse { path: path.to_path_buf(), line, message };

    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (hline, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(err(hline, "expected '%%MatrixMarket matrix <storage> <field> <symmetry>'".into()));
    }
    let storage = match tokens[2].as_str() {
        "coordinate" => Storage::Coordinate,
        "array" => Storage::Array,
        other => return Err(err(hline, format!("unsupported storage '{other}'"))),
    };
    match tokens[3].as_str() {
        "real" | "integer" | "double" => {}
        other => return Err(err(hline, format!("unsupported field '{other}'"))),
    }
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::Skew,
        other => return Err(err(hline, format!("unsupported symmetry '{other}'"))),
    };

    let mut data = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });

    let (sline, size) = data.next().ok_or_else(|| err(hline, "missing size line".into()))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| err(sline, format!("bad size entry '{t}'"))))
        .collect::<Result<_>>()?;
    let expected_dims = if storage == Storage::Coordinate { 3 } else { 2 };
    if dims.len() != expected_dims {
        return Err(err(sline, format!("expected {expected_dims} size entries, found {}", dims.len())));
    }
    let (rows, cols) = (dims[0], dims[1]);
    if symmetry != Symmetry::General && rows != cols {
        return Err(err(sline, "symmetric storage requires a square matrix".into()));
    }
    let mut m = DMatrix::<f64>::zeros(rows, cols);

    let parse_f = |line: usize, t: &str| -> Result<f64> {
        let v: f64 = t.parse().map_err(|_| err(line, format!("bad number '{t}'")))?;
        if !v.is_finite() {
            return Err(err(line, format!("non-finite entry '{t}'")));
        }
        Ok(v)
    };
    let mirror = |m: &mut DMatrix<f64>, i: usize, j: usize, v: f64| {
        m[(i, j)] = v;
        if i != j {
            match symmetry {
                Symmetry::General => {}
                Symmetry::Symmetric => m[(j, i)] = v,
                Symmetry::Skew => m[(j, i)] = -v,
            }
        }
    };

    match storage {
        Storage::Coordinate => {
            let nnz = dims[2];
            let mut count = 0;
            for (line, l) in data {
                let t: Vec<&str> = l.split_whitespace().collect();
                if t.len() != 3 {
                    return Err(err(line, "expected 'row col value'".into()));
                }
                let i: usize = t[0].parse().map_err(|_| err(line, format!("bad row index '{}'", t[0])))?;
                let j: usize = t[1].parse().map_err(|_| err(line, format!("bad column index '{}'", t[1])))?;
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(err(line, format!("index ({i}, {j}) outside {rows}x{cols}")));
                }
                let v = parse_f(line, t[2])?;
                mirror(&mut m, i - 1, j - 1, v);
                count += 1;
            }
            if count != nnz {
                return Err(err(sline, format!("declared {nnz} entries, found {count}")));
            }
        }
        Storage::Array => {
            // column-major; symmetric variants store the lower triangle only
            let mut slots = Vec::new();
            for j in 0..cols {
                let start = match symmetry {
                    Symmetry::General => 0,
                    Symmetry::Symmetric => j,
                    Symmetry::Skew => j + 1,
                };
                for i in start..rows {
                    slots.push((i, j));
                }
            }
            let mut values = Vec::with_capacity(slots.len());
            let mut last_line = sline;
            for (line, l) in data {
                last_line = line;
                for t in l.split_whitespace() {
                    values.push(parse_f(line, t)?);
                }
            }
            if values.len() != slots.len() {
                return Err(err(last_line, format!("expected {} array entries, found {}", slots.len(), values.len())));
            }
            for ((i, j), v) in slots.into_iter().zip(values) {
                mirror(&mut m, i, j, v);
            }
        }
    }
    Ok(m)
}

pub fn format_matrix_market(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    out.push_str("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(out, "{} {}", m.nrows(), m.ncols());
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let _ = writeln!(out, "{:e}", m[(i, j)]);
        }
    }
    out
}

pub fn write_matrix_market(m: &DMatrix<f64>, path: &Path) -> Result<()> {
    fs::write(path, format_matrix_market(m)).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}
