//! Deflection fields on rectangular grids and their CSV wire format.
//!
//! The format is a plain `x,t,u` table, time-outer (all x for the first
//! time, then the next time, and so on), floats printed with 17 significant
//! digits so a write/read cycle is bit-exact, LF line endings, trailing
//! newline.

use std::path::Path;

use crate::beam::BeamConfig;
use crate::error::{Error, Result};

/// Standard evaluation grid density across the span.
pub const GRID_NX: usize = 101;
/// Standard evaluation grid density across time.
pub const GRID_NT: usize = 51;

/// Values on a rectangular grid, flattened t-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub xs: Vec<f64>,
    pub ts: Vec<f64>,
    /// values[it * xs.len() + ix]
    pub values: Vec<f64>,
}

impl GridField {
    pub fn new(xs: Vec<f64>, ts: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if xs.is_empty() || ts.is_empty() || values.len() != xs.len() * ts.len() {
            return Err(Error::Usage(format!(
                "grid shape mismatch: {} x * {} t vs {} values",
                xs.len(),
                ts.len(),
                values.len()
            )));
        }
        Ok(GridField { xs, ts, values })
    }

    pub fn value(&self, ix: usize, it: usize) -> f64 {
        self.values[it * self.xs.len() + ix]
    }

    /// Values of the final stored time row.
    pub fn final_time_slice(&self) -> &[f64] {
        let nx = self.xs.len();
        &self.values[(self.ts.len() - 1) * nx..]
    }
}

/// The 101 x 51 grid covering [0, L] x [0, t_end] with exact endpoints.
pub fn standard_grid(beam: &BeamConfig) -> (Vec<f64>, Vec<f64>) {
    let xs = (0..GRID_NX)
        .map(|i| i as f64 / (GRID_NX - 1) as f64 * beam.length)
        .collect();
    let ts = (0..GRID_NT)
        .map(|j| j as f64 / (GRID_NT - 1) as f64 * beam.t_end)
        .collect();
    (xs, ts)
}

pub fn write_field_csv(path: &Path, field: &GridField) -> Result<()> {
    let mut out = String::with_capacity(field.values.len() * 72 + 8);
    out.push_str("x,t,u\n");
    for (it, &t) in field.ts.iter().enumerate() {
        for (ix, &x) in field.xs.iter().enumerate() {
            out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", x, t, field.value(ix, it)));
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Read a grid field back, enforcing the time-outer layout: the first block
/// of rows defines the x axis, and every later block must repeat it exactly
/// at a constant t.
pub fn read_field_csv(path: &Path) -> Result<GridField> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let path = path.display();
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == "x,t,u" => {}
        other => {
            return Err(Error::Format(format!(
                "{path}: expected header 'x,t,u', got {:?}",
                other.unwrap_or("")
            )))
        }
    }
    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Format(format!(
                "{path}: line {}: expected 3 comma-separated values, got {}",
                i + 2,
                fields.len()
            )));
        }
        let mut vals = [0.0; 3];
        for (j, f) in fields.iter().enumerate() {
            vals[j] = f
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Format(format!("{path}: line {}: bad number {f:?}", i + 2)))?;
        }
        rows.push((vals[0], vals[1], vals[2]));
    }
    if rows.is_empty() {
        return Err(Error::Format(format!("{path}: no data rows")));
    }
    let t0 = rows[0].1;
    let nx = rows.iter().take_while(|r| r.1 == t0).count();
    if rows.len() % nx != 0 {
        return Err(Error::Format(format!(
            "{path}: {} rows do not tile a grid of {} x values",
            rows.len(),
            nx
        )));
    }
    let nt = rows.len() / nx;
    let xs: Vec<f64> = rows[..nx].iter().map(|r| r.0).collect();
    let mut ts = Vec::with_capacity(nt);
    let mut values = Vec::with_capacity(rows.len());
    for it in 0..nt {
        let block = &rows[it * nx..(it + 1) * nx];
        let t = block[0].1;
        for (ix, row) in block.iter().enumerate() {
            if row.1 != t {
                return Err(Error::Format(format!(
                    "{path}: block {} mixes times {} and {}",
                    it, t, row.1
                )));
            }
            if row.0 != xs[ix] {
                return Err(Error::Format(format!(
                    "{path}: block {} x value {} does not match grid x {}",
                    it, row.0, xs[ix]
                )));
            }
            values.push(row.2);
        }
        ts.push(t);
    }
    GridField::new(xs, ts, values)
}

/// Pointwise |a - b| on identical grids.
pub fn absolute_error_field(a: &GridField, b: &GridField) -> Result<GridField> {
    if a.xs != b.xs || a.ts != b.ts {
        return Err(Error::Usage(
            "absolute error needs both fields on the same grid".into(),
        ));
    }
    let values = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).abs())
        .collect();
    GridField::new(a.xs.clone(), a.ts.clone(), values)
}
