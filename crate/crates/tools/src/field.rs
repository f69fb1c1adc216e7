//! Plain-text field files.
//!
//! The first line is `dim m1 [m2] period`; the values follow in row-major
//! order (last axis fastest), separated by any whitespace. Blank lines and
//! lines starting with `#` are skipped.

use std::fmt::Write as _;
use std::path::Path;

use jko_core::{Grid, GridFunction};

use crate::error::{Result, ToolError};
use crate::output::write_atomic;

pub fn format_field(f: &GridFunction) -> String {
    let g = f.grid();
    let mut s = String::with_capacity(24 * f.len() + 32);
    let _ = write!(s, "{}", g.dim());
    for m in g.shape() {
        let _ = write!(s, " {m}");
    }
    let _ = writeln!(s, " {}", g.period());
    for v in f.values() {
        let _ = writeln!(s, "{v:e}");
    }
    s
}

pub fn parse_field(text: &str, path: &Path) -> Result<GridFunction> {
    let err = |line: usize, message: String| ToolError::Parse { path: path.to_path_buf(), line, message };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = lines.next().ok_or_else(|| err(1, "empty field file".into()))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    let dim: usize = tokens
        .first()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| err(hline, format!("header `{header}` must start with the dimension")))?;
    if !(dim == 1 || dim == 2) || tokens.len() != dim + 2 {
        return Err(err(hline, format!("header `{header}` is not `dim m1 [m2] period`")));
    }
    let shape = tokens[1..=dim]
        .iter()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| err(hline, format!("bad resolution: {e}")))?;
    let period: f64 = tokens[dim + 1].parse().map_err(|e| err(hline, format!("bad period: {e}")))?;
    let grid = Grid::with_shape(dim, &shape, period).map_err(|e| err(hline, e.to_string()))?;

    let mut values = Vec::with_capacity(grid.len());
    let mut last = hline;
    for (line, content) in lines {
        last = line;
        for tok in content.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| err(line, format!("`{tok}` is not a number")))?;
            if !v.is_finite() {
                return Err(err(line, format!("non-finite value `{tok}`")));
            }
            values.push(v);
        }
    }
    if values.len() != grid.len() {
        return Err(err(last, format!("expected {} values, found {}", grid.len(), values.len())));
    }
    GridFunction::new(grid, values).map_err(|e| err(last, e.to_string()))
}

pub fn read_field(path: &Path) -> Result<GridFunction> {
    let text = std::fs::read_to_string(path).map_err(ToolError::io(path))?;
    parse_field(&text, path)
}

pub fn write_field(path: &Path, f: &GridFunction) -> Result<()> {
    write_atomic(path, format_field(f).as_bytes())
}
