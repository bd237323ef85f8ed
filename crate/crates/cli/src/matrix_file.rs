//! Plain-text matrices: the first line holds the dimension, then `dim²`
//! lines `re im` in row-major order. Blank lines and `#` comments are
//! ignored.

use std::fmt::Write as _;
use std::path::Path;

use userkit::{CMatrix, C64};

use crate::error::CliError;

pub fn parse_matrix(text: &str) -> Result<CMatrix, CliError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (_, first) = lines
        .next()
        .ok_or_else(|| CliError::Config("matrix file is empty".into()))?;
    let dim: usize = first.parse().map_err(|_| {
        CliError::Config(format!("first line must be the dimension, got `{first}`"))
    })?;
    if dim == 0 {
        return Err(CliError::Config("matrix dimension must be positive".into()));
    }
    let mut entries = Vec::with_capacity(dim * dim);
    for (lineno, line) in lines {
        let parts: Vec<&str> = line.split_whitespace().collect();
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| CliError::Config(format!("line {lineno}: `{s}` is not a number")))
        };
        match parts.as_slice() {
            [re, im] => entries.push(C64::new(parse(re)?, parse(im)?)),
            _ => {
                return Err(CliError::Config(format!(
                    "line {lineno}: expected `re im`, got `{line}`"
                )))
            }
        }
    }
    if entries.len() != dim * dim {
        return Err(CliError::Config(format!(
            "expected {} entries for dimension {dim}, found {}",
            dim * dim,
            entries.len()
        )));
    }
    Ok(CMatrix::from_row_slice(dim, dim, &entries))
}

pub fn read_matrix_file(path: &Path) -> Result<CMatrix, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Config(format!("cannot read matrix file {}: {e}", path.display()))
    })?;
    parse_matrix(&text)
}

pub fn format_matrix(m: &CMatrix) -> String {
    let mut out = format!("{}\n", m.nrows());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            writeln!(out, "{:.16e} {:.16e}", z.re, z.im).expect("write to string");
        }
    }
    out
}
