//! Sampled functions on 1-D grids and space-time fields, with CSV output.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// `n` equally spaced points covering `[a, b]`.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let h = (b - a) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { b } else { a + i as f64 * h })
                .collect()
        }
    }
}

/// Shortest decimal string that round-trips to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// First derivative on a uniform grid: 4th-order centered differences in the
/// interior, 4th-order one-sided 5-point stencils at the two edge points on
/// each side. Needs at least 5 points.
pub fn d1_uniform(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    assert!(n >= 5, "need at least 5 points");
    let mut d = vec![0.0; n];
    let s = 1.0 / (12.0 * h);
    d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) * s;
    d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) * s;
    for i in 2..n - 2 {
        d[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) * s;
    }
    d[n - 2] = (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]) * s;
    d[n - 1] = (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4]
        + 3.0 * f[n - 5])
        * s;
    d
}

/// 4th-order centered second derivative at interior point `i` (needs i ± 2).
pub fn d2_centered(f: &[f64], i: usize, h: f64) -> f64 {
    (-f[i - 2] + 16.0 * f[i - 1] - 30.0 * f[i] + 16.0 * f[i + 1] - f[i + 2]) / (12.0 * h * h)
}

/// 4th-order centered third derivative at interior point `i` (needs i ± 3).
pub fn d3_centered(f: &[f64], i: usize, h: f64) -> f64 {
    (f[i - 3] - 8.0 * f[i - 2] + 13.0 * f[i - 1] - 13.0 * f[i + 1] + 8.0 * f[i + 2] - f[i + 3])
        / (8.0 * h * h * h)
}

/// Cubic Hermite interpolant on `[x0, x1]` through values `f` and slopes `d`.
pub fn hermite(x0: f64, x1: f64, f: (f64, f64), d: (f64, f64), x: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * f.0
        + (t3 - 2.0 * t2 + t) * h * d.0
        + (-2.0 * t3 + 3.0 * t2) * f.1
        + (t3 - t2) * h * d.1
}

/// A function sampled on a strictly increasing grid, with any number of
/// named rows (typically the value followed by successive derivatives).
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    x: Vec<f64>,
    names: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl GridFunction {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(
                "grid must be strictly increasing".into(),
            ));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "grid contains non-finite points".into(),
            ));
        }
        Ok(GridFunction {
            x,
            names: Vec::new(),
            rows: Vec::new(),
        })
    }

    /// Appends a named row; its length must match the grid.
    pub fn with_row(mut self, name: &str, values: Vec<f64>) -> Result<Self> {
        self.push_row(name, values)?;
        Ok(self)
    }

    pub fn push_row(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.x.len() {
            return Err(Error::InvalidInput(format!(
                "row `{name}` has {} values for a grid of {}",
                values.len(),
                self.x.len()
            )));
        }
        self.names.push(name.to_string());
        self.rows.push(values);
        Ok(())
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.rows[k]
    }

    pub fn row_by_name(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|k| self.rows[k].as_slice())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Largest spacing between consecutive grid points.
    pub fn max_step(&self) -> f64 {
        self.x.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// CSV with header `x,<row names>`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for i in 0..self.x.len() {
            out.push_str(&fmt_f64(self.x[i]));
            for r in &self.rows {
                out.push(',');
                out.push_str(&fmt_f64(r[i]));
            }
            out.push('\n');
        }
        out
    }
}

/// Values of a field `u(x, t)` at every time level of a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    /// `values[n][i] = u(x[i], t[n])`
    pub values: Vec<Vec<f64>>,
}

impl SpaceTimeField {
    pub fn last(&self) -> &[f64] {
        self.values.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// CSV: a header row `t,x_0,x_1,...` followed by one row per time level.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for x in &self.x {
            let _ = write!(out, ",{}", fmt_f64(*x));
        }
        out.push('\n');
        for (t, row) in self.t.iter().zip(&self.values) {
            out.push_str(&fmt_f64(*t));
            for v in row {
                out.push(',');
                out.push_str(&fmt_f64(*v));
            }
            out.push('\n');
        }
        out
    }
}
