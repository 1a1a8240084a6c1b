//! Periodic Cartesian grid on the unit cell `Y = (0,1)^2` and node-based scalar fields.
//!
//! Nodes sit at `(i h, j h)` for `i, j in 0..n`; node `n` is identified with node `0`, so
//! storage holds one copy. Flat storage is row-major in `j` (`index = j * n + i`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest grid accepted by the solvers; the ENO stencils need five nodes per axis and
/// the smoothed interface spans three.
pub const MIN_CELLS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PeriodicGrid {
    nx: usize,
    ny: usize,
}

impl PeriodicGrid {
    pub const DIM: usize = 2;

    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx != ny {
            return Err(Error::InvalidGrid(format!(
                "cells must be square (got {nx}x{ny})"
            )));
        }
        if nx < MIN_CELLS {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_CELLS} cells per axis (got {nx})"
            )));
        }
        Ok(Self { nx, ny })
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.nx
    }

    #[inline]
    pub fn nx(&self) -> usize {
        self.nx
    }

    #[inline]
    pub fn ny(&self) -> usize {
        self.ny
    }

    #[inline]
    pub fn h(&self) -> f64 {
        1.0 / self.nx as f64
    }

    pub fn dim(&self) -> usize {
        Self::DIM
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Index with periodic wraparound in both directions.
    #[inline]
    pub fn wrapped(&self, i: isize, j: isize) -> usize {
        let n = self.nx as isize;
        (j.rem_euclid(n) * n + i.rem_euclid(n)) as usize
    }

    #[inline]
    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.nx, index / self.nx)
    }

    #[inline]
    pub fn node_position(&self, i: usize, j: usize) -> [f64; 2] {
        let h = self.h();
        [i as f64 * h, j as f64 * h]
    }

    pub fn check_same(&self, other: &PeriodicGrid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch {
                expected: self.nx,
                found: other.nx,
            });
        }
        Ok(())
    }
}

/// How finite-difference stencils treat the edge of the cell.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Wrap around (the cell problem is Y-periodic).
    #[default]
    Periodic,
    /// Mirror about the first and last node (zero normal derivative).
    Neumann,
}

impl Boundary {
    /// Maps a possibly out-of-range index along one axis onto storage.
    #[inline]
    pub fn resolve(self, k: isize, n: usize) -> usize {
        let n = n as isize;
        match self {
            Boundary::Periodic => k.rem_euclid(n) as usize,
            Boundary::Neumann => {
                let period = 2 * (n - 1);
                let m = k.rem_euclid(period);
                (if m < n { m } else { period - m }) as usize
            }
        }
    }
}

/// Periodic bilinear interpolation of a staggered array.
///
/// `offset` is the position of sample `(0,0)` in units of `h` (e.g. `(0.5, 0.5)` for cell
/// centres). Positions outside the unit cell wrap.
pub fn bilinear(values: &[f64], n: usize, x: f64, y: f64, offset: (f64, f64)) -> f64 {
    let s = x * n as f64 - offset.0;
    let t = y * n as f64 - offset.1;
    let i0 = s.floor();
    let j0 = t.floor();
    let fx = s - i0;
    let fy = t - j0;
    let ni = n as isize;
    let i0 = (i0 as isize).rem_euclid(ni) as usize;
    let j0 = (j0 as isize).rem_euclid(ni) as usize;
    let i1 = (i0 + 1) % n;
    let j1 = (j0 + 1) % n;
    let v00 = values[j0 * n + i0];
    let v10 = values[j0 * n + i1];
    let v01 = values[j1 * n + i0];
    let v11 = values[j1 * n + i1];
    (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) + fy * ((1.0 - fx) * v01 + fx * v11)
}

/// Scalar values on the grid nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: PeriodicGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "field has {} values, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: PeriodicGrid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_fn(grid: PeriodicGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.n();
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..n {
            for i in 0..n {
                let [x, y] = grid.node_position(i, j);
                values.push(f(x, y));
            }
        }
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    #[inline]
    pub fn at(&self, i: isize, j: isize) -> f64 {
        self.values[self.grid.wrapped(i, j)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Bilinear interpolation at an arbitrary point (periodic).
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        bilinear(&self.values, self.grid.n(), x, y, (0.0, 0.0))
    }

    /// Central-difference gradient at node `(i, j)`.
    #[inline]
    pub fn gradient(&self, i: usize, j: usize) -> [f64; 2] {
        let (i, j) = (i as isize, j as isize);
        let inv = 0.5 / self.grid.h();
        [
            (self.at(i + 1, j) - self.at(i - 1, j)) * inv,
            (self.at(i, j + 1) - self.at(i, j - 1)) * inv,
        ]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Integral over the unit cell by the node (midpoint) rule.
    pub fn integral(&self) -> f64 {
        let h = self.grid.h();
        self.values.iter().sum::<f64>() * h * h
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
