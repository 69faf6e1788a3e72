//! Uniform periodic grids on the unit flat torus and fields sampled on them.
//!
//! Cells are indexed linearly with axis 0 varying fastest, so in two
//! dimensions a linear index is `i0 + n * i1`. Cell centers sit at
//! `(i + 1/2) / n` along every axis.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A point of the torus. Components beyond the grid dimension are zero.
pub type Point = [f64; 3];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("unsupported dimension {0}; only 2 and 3 are supported")]
    Dimension(usize),
    #[error("grid needs at least 4 cells per axis, got {0}")]
    TooCoarse(usize),
    #[error("field has {got} values, grid expects {expected}")]
    Length { expected: usize, got: usize },
    #[error("fields live on different grids")]
    Mismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
}

impl TorusGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self, GridError> {
        if !(2..=3).contains(&dim) {
            return Err(GridError::Dimension(dim));
        }
        if n < 4 {
            return Err(GridError::TooCoarse(n));
        }
        Ok(Self { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Measure of one cell, `spacing^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Stride of `axis` in the linear index.
    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow(axis as u32)
    }

    pub fn linear(&self, idx: [usize; 3]) -> usize {
        let mut lin = 0;
        for a in (0..self.dim).rev() {
            lin = lin * self.n + idx[a];
        }
        lin
    }

    pub fn multi(&self, mut lin: usize) -> [usize; 3] {
        let mut idx = [0; 3];
        for slot in idx.iter_mut().take(self.dim) {
            *slot = lin % self.n;
            lin /= self.n;
        }
        idx
    }

    pub fn wrap(&self, i: isize) -> usize {
        i.rem_euclid(self.n as isize) as usize
    }

    /// Linear index of the cell `offset` steps away along `axis`, periodically.
    pub fn neighbor(&self, lin: usize, axis: usize, offset: isize) -> usize {
        let stride = self.stride(axis);
        let i = (lin / stride) % self.n;
        let j = self.wrap(i as isize + offset);
        lin - i * stride + j * stride
    }

    /// In-place periodic shift of a multi-index.
    pub fn shifted(&self, lin: usize, shift: [isize; 3]) -> usize {
        let idx = self.multi(lin);
        let mut out = [0; 3];
        for a in 0..self.dim {
            out[a] = self.wrap(idx[a] as isize + shift[a]);
        }
        self.linear(out)
    }

    pub fn center(&self, lin: usize) -> Point {
        let idx = self.multi(lin);
        let h = self.spacing();
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = (idx[a] as f64 + 0.5) * h;
        }
        x
    }

    /// Displacement represented by a cell offset, folded into `[-1/2, 1/2)` per axis.
    pub fn offset_vector(&self, lin: usize) -> Point {
        let idx = self.multi(lin);
        let h = self.spacing();
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            let i = idx[a] as isize;
            let folded = if i >= (self.n as isize + 1) / 2 { i - self.n as isize } else { i };
            x[a] = folded as f64 * h;
        }
        x
    }

    /// Linear index of the offset `-j` for an offset `j`.
    pub fn negated(&self, lin: usize) -> usize {
        let idx = self.multi(lin);
        let mut out = [0; 3];
        for a in 0..self.dim {
            out[a] = (self.n - idx[a]) % self.n;
        }
        self.linear(out)
    }

    /// Signed integer offset of a cell offset index, folded into `[-n/2, n/2)`.
    pub fn signed_offset(&self, lin: usize) -> [isize; 3] {
        let idx = self.multi(lin);
        let mut out = [0; 3];
        for a in 0..self.dim {
            let i = idx[a] as isize;
            out[a] = if i >= (self.n as isize + 1) / 2 { i - self.n as isize } else { i };
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: TorusGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: TorusGrid, value: f64) -> Self {
        Self { grid, values: vec![value; grid.len()] }
    }

    pub fn from_values(grid: TorusGrid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::Length { expected: grid.len(), got: values.len() });
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every cell center.
    pub fn from_fn(grid: TorusGrid, f: impl Fn(Point) -> f64) -> Self {
        let values = (0..grid.len()).map(|c| f(grid.center(c))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
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

    pub fn get(&self, lin: usize) -> f64 {
        self.values[lin]
    }

    pub fn set(&mut self, lin: usize, v: f64) {
        self.values[lin] = v;
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Midpoint-rule integral over the torus.
    pub fn integral(&self) -> f64 {
        self.sum() * self.grid.cell_volume()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self, GridError> {
        self.check_same(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { grid: self.grid, values })
    }

    /// `sum_x a(x) b(x) * cell_volume`.
    pub fn inner(&self, other: &Self) -> Result<f64, GridError> {
        self.check_same(other)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        Ok(s * self.grid.cell_volume())
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64, GridError> {
        self.check_same(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Periodic translation by a whole number of cells: `out(x) = self(x - shift)`.
    pub fn translated(&self, shift: [isize; 3]) -> Self {
        let mut out = vec![0.0; self.values.len()];
        for (c, slot) in out.iter_mut().enumerate() {
            let neg = [-shift[0], -shift[1], -shift[2]];
            *slot = self.values[self.grid.shifted(c, neg)];
        }
        Self { grid: self.grid, values: out }
    }

    /// Maximum neighbour difference divided by the spacing.
    pub fn discrete_lipschitz(&self) -> f64 {
        let g = self.grid;
        let mut worst: f64 = 0.0;
        for c in 0..g.len() {
            for a in 0..g.dim() {
                let nb = g.neighbor(c, a, 1);
                worst = worst.max((self.values[nb] - self.values[c]).abs());
            }
        }
        worst / g.spacing()
    }

    pub fn check_same(&self, other: &Self) -> Result<(), GridError> {
        if self.grid != other.grid {
            return Err(GridError::Mismatch);
        }
        Ok(())
    }
}

/// Unit-vector data attached to a subset of cells.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: TorusGrid,
    values: Vec<Option<Point>>,
}

impl VectorField {
    pub fn empty(grid: TorusGrid) -> Self {
        Self { grid, values: vec![None; grid.len()] }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn get(&self, lin: usize) -> Option<Point> {
        self.values[lin]
    }

    pub fn set(&mut self, lin: usize, v: Point) {
        self.values[lin] = Some(v);
    }

    pub fn defined_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, Point)> + '_ {
        self.values.iter().enumerate().filter_map(|(i, v)| v.map(|p| (i, p)))
    }
}

/// Parallel sum with a fixed chunking, so the result does not depend on
/// thread scheduling.
pub fn deterministic_sum(values: &[f64]) -> f64 {
    let partial: Vec<f64> = values.par_chunks(8192).map(|c| c.iter().sum::<f64>()).collect();
    partial.iter().sum()
}

/// Deterministic parallel `sum_i f(i)` for `i < len`.
pub fn deterministic_sum_by(len: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    let chunks = len.div_ceil(8192);
    let partial: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|k| (k * 8192..((k + 1) * 8192).min(len)).map(&f).sum::<f64>())
        .collect();
    partial.iter().sum()
}

pub fn norm(v: &Point) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
