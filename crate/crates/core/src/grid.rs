//! Periodic torus grids, cell-averaged fields, discrete norms and mollifiers.

use std::fmt::Write as _;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{self, pairwise_sum, pairwise_sum_by};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid exponent p = {0}; need p >= 1 or infinity")]
    InvalidExponent(f64),
    #[error("grid mismatch: {left:?} vs {right:?}")]
    GridMismatch { left: TorusGrid, right: TorusGrid },
    #[error("mollifier width must be positive, got {0}")]
    NonPositiveWidth(f64),
    #[error("field value at cell {cell} is not finite")]
    NonFinite { cell: usize },
    #[error("snapshot parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Uniform grid on the unit-measure torus `[0,1)^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
}

impl TorusGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self, GridError> {
        if !(dim == 1 || dim == 2) {
            return Err(GridError::InvalidGrid(format!("dimension {dim} not in {{1, 2}}")));
        }
        if n < 2 {
            return Err(GridError::InvalidGrid(format!("need at least 2 cells per axis, got {n}")));
        }
        Ok(Self { dim, n })
    }

    pub fn one_d(n: usize) -> Result<Self, GridError> {
        Self::new(1, n)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cells per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cell_count(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Measure of a single cell, `dx^d`.
    pub fn cell_measure(&self) -> f64 {
        self.dx().powi(self.dim as i32)
    }

    /// Cell center. Index `i` runs fastest along the first axis.
    pub fn center(&self, cell: usize) -> [f64; 2] {
        let dx = self.dx();
        let i = cell % self.n;
        let j = cell / self.n;
        [(i as f64 + 0.5) * dx, (j as f64 + 0.5) * dx]
    }

    /// Neighbor along `axis` shifted by `offset` cells with periodic wrap.
    pub fn neighbor(&self, cell: usize, axis: usize, offset: isize) -> usize {
        let n = self.n as isize;
        let (i, j) = ((cell % self.n) as isize, (cell / self.n) as isize);
        let (i, j) = if axis == 0 {
            ((i + offset).rem_euclid(n), j)
        } else {
            (i, (j + offset).rem_euclid(n))
        };
        (i + j * n) as usize
    }
}

/// Distance between two points on the unit circle.
pub fn torus_distance(x: f64, y: f64) -> f64 {
    let d = (x - y).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Cell averages of a function on a [`TorusGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.cell_count() {
            return Err(GridError::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.cell_count(),
                values.len()
            )));
        }
        if let Some(cell) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite { cell });
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: TorusGrid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.cell_count()],
        }
    }

    /// Builds a field without the finiteness check; solvers use this on their
    /// own outputs and check finiteness where it matters.
    pub(crate) fn from_raw(grid: TorusGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.cell_count());
        Self { grid, values }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `Σ u_i dx^d`.
    pub fn integral(&self) -> f64 {
        pairwise_sum(&self.values) * self.grid.cell_measure()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::from_raw(self.grid, self.values.iter().map(|v| c * v).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Discrete `L^p` norm; `p = f64::INFINITY` gives the max norm.
pub fn lp_norm(f: &Field, p: f64) -> Result<f64, GridError> {
    if p.is_nan() || p < 1.0 {
        return Err(GridError::InvalidExponent(p));
    }
    if p.is_infinite() {
        return Ok(f.values.iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    Ok(lp_norm_pow(f, p).powf(1.0 / p))
}

/// `Σ |f_i|^p dx^d` without the final root.
pub fn lp_norm_pow(f: &Field, p: f64) -> f64 {
    let s = if p == 1.0 {
        pairwise_sum_by(&f.values, |v| v.abs())
    } else if p == 2.0 {
        pairwise_sum_by(&f.values, |v| v * v)
    } else {
        pairwise_sum_by(&f.values, |v| v.abs().powf(p))
    };
    s * f.grid.cell_measure()
}

pub fn l1_distance(f: &Field, g: &Field) -> Result<f64, GridError> {
    if f.grid != g.grid {
        return Err(GridError::GridMismatch {
            left: f.grid,
            right: g.grid,
        });
    }
    Ok(l1_distance_slices(&f.values, &g.values) * f.grid.cell_measure())
}

/// Unscaled `Σ |a_i − b_i|`.
pub(crate) fn l1_distance_slices(a: &[f64], b: &[f64]) -> f64 {
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect();
    pairwise_sum(&diffs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MollifierKind {
    Space,
    Value,
}

/// Scaled bump `ρ(s) = b(s/w) / (Z w)` with `b(s) = exp(−1/(1−s²))` on `(−1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mollifier {
    pub kind: MollifierKind,
    pub width: f64,
}

fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

/// `∫_{-1}^{1} exp(−1/(1−s²)) ds`.
pub fn bump_mass() -> f64 {
    static Z: OnceLock<f64> = OnceLock::new();
    *Z.get_or_init(|| numerics::integrate(-1.0, 1.0, 64, bump))
}

impl Mollifier {
    pub fn new(kind: MollifierKind, width: f64) -> Result<Self, GridError> {
        if !(width > 0.0) || !width.is_finite() {
            return Err(GridError::NonPositiveWidth(width));
        }
        Ok(Self { kind, width })
    }

    pub fn eval(&self, s: f64) -> f64 {
        bump(s.abs() / self.width) / (bump_mass() * self.width)
    }

    /// Numerical `∫ profile` over its support.
    pub fn mass(&self) -> f64 {
        numerics::integrate(-self.width, self.width, 64, |s| self.eval(s))
    }
}

/// Space mollifier `ρ_η` and value mollifier `ψ_δ`.
pub fn mollifier_pair(eta: f64, delta: f64) -> Result<(Mollifier, Mollifier), GridError> {
    Ok((
        Mollifier::new(MollifierKind::Space, eta)?,
        Mollifier::new(MollifierKind::Value, delta)?,
    ))
}

/// Serializes a field in the snapshot CSV format.
pub fn snapshot_csv(f: &Field) -> String {
    let mut out = String::with_capacity(24 * f.values.len() + 32);
    let _ = writeln!(out, "# grid N={} d={}", f.grid.n, f.grid.dim);
    for v in &f.values {
        let _ = writeln!(out, "{}", numerics::fmt17(*v));
    }
    out
}

pub fn parse_snapshot_csv(text: &str) -> Result<Field, GridError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(GridError::Parse {
        line: 1,
        msg: "empty snapshot".into(),
    })?;
    let bad_header = || GridError::Parse {
        line: 1,
        msg: format!("expected '# grid N=<N> d=<d>', got '{header}'"),
    };
    let rest = header.strip_prefix("# grid ").ok_or_else(bad_header)?;
    let mut n = None;
    let mut d = None;
    for tok in rest.split_whitespace() {
        if let Some(v) = tok.strip_prefix("N=") {
            n = v.parse::<usize>().ok();
        } else if let Some(v) = tok.strip_prefix("d=") {
            d = v.parse::<usize>().ok();
        }
    }
    let grid = TorusGrid::new(d.ok_or_else(bad_header)?, n.ok_or_else(bad_header)?)?;
    let mut values = Vec::with_capacity(grid.cell_count());
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v = line.parse::<f64>().map_err(|e| GridError::Parse {
            line: idx + 1,
            msg: e.to_string(),
        })?;
        values.push(v);
    }
    Field::new(grid, values)
}
