//! Plain-text dumps of cell-centered fields: a whitespace-delimited matrix
//! (one row per y index) and a `key = value` sidecar at `<path>.meta`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Path of the metadata sidecar for `path`.
pub fn meta_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".meta");
    PathBuf::from(p)
}

/// Writes `values` as an `ny x nx` matrix plus sidecar metadata.
pub fn write_field(path: &Path, grid: &Grid, values: &[f64], time: Option<f64>) -> Result<()> {
    if values.len() != grid.num_cells() {
        return Err(Error::LengthMismatch { expected: grid.num_cells(), actual: values.len() });
    }
    let nx = grid.nx();
    let mut out = String::with_capacity(values.len() * 24);
    for row in values.chunks(nx) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    std::fs::write(path, out)?;

    let mut meta = String::new();
    let ax = grid.x_axis();
    writeln!(meta, "dim = {}", grid.dim()).unwrap();
    writeln!(meta, "x_bounds = {} {}", ax.lo, ax.hi).unwrap();
    writeln!(meta, "nx = {}", ax.n).unwrap();
    if let Some(ay) = grid.y_axis() {
        writeln!(meta, "y_bounds = {} {}", ay.lo, ay.hi).unwrap();
        writeln!(meta, "ny = {}", ay.n).unwrap();
    }
    if let Some(t) = time {
        writeln!(meta, "time = {t}").unwrap();
    }
    std::fs::write(meta_path(path), meta)?;
    Ok(())
}

/// A field read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub time: Option<f64>,
}

pub fn read_field(path: &Path) -> Result<FieldDump> {
    let fail = |p: &Path, message: String| Error::Format { path: p.display().to_string(), message };
    let meta_file = meta_path(path);
    let meta = std::fs::read_to_string(&meta_file)?;
    let mut x_bounds = None;
    let mut y_bounds = None;
    let (mut nx, mut ny, mut time) = (None, None, None);
    for line in meta.lines().filter(|l| !l.trim().is_empty()) {
        let (k, v) = line.split_once('=').ok_or_else(|| fail(&meta_file, format!("bad line '{line}'")))?;
        let v = v.trim();
        let num = |s: &str| s.parse::<f64>().map_err(|_| fail(&meta_file, format!("bad number '{s}'")));
        let pair = |s: &str| -> Result<(f64, f64)> {
            let mut it = s.split_whitespace();
            match (it.next(), it.next()) {
                (Some(a), Some(b)) => Ok((num(a)?, num(b)?)),
                _ => Err(fail(&meta_file, format!("expected two bounds in '{s}'"))),
            }
        };
        match k.trim() {
            "dim" => {}
            "x_bounds" => x_bounds = Some(pair(v)?),
            "y_bounds" => y_bounds = Some(pair(v)?),
            "nx" => nx = Some(num(v)? as usize),
            "ny" => ny = Some(num(v)? as usize),
            "time" => time = Some(num(v)?),
            other => return Err(fail(&meta_file, format!("unknown key '{other}'"))),
        }
    }
    let (xb, nx) = x_bounds.zip(nx).ok_or_else(|| fail(&meta_file, "missing x axis".into()))?;
    let grid = match y_bounds.zip(ny) {
        Some((yb, ny)) => Grid::new(&[xb, yb], &[nx, ny])?,
        None => Grid::new(&[xb], &[nx])?,
    };
    let text = std::fs::read_to_string(path)?;
    let mut values = Vec::with_capacity(grid.num_cells());
    for (r, line) in text.lines().enumerate() {
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse::<f64>().map_err(|_| fail(path, format!("bad number '{s}' on row {}", r + 1))))
            .collect::<Result<_>>()?;
        if row.len() != grid.nx() {
            return Err(fail(path, format!("row {} has {} entries, expected {}", r + 1, row.len(), grid.nx())));
        }
        values.extend(row);
    }
    if values.len() != grid.num_cells() {
        return Err(fail(path, format!("{} values for {} cells", values.len(), grid.num_cells())));
    }
    Ok(FieldDump { grid, values, time })
}
