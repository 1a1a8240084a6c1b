use std::f64::consts::PI;
use std::ops::Deref;

use super::LevelSet;
use crate::error::{Error, Result};
use crate::grid::{PeriodicGrid, ScalarField};

/// Half-width of the smoothed interface, in grid lengths.
pub const DEFAULT_HALF_WIDTH: f64 = 1.5;

/// Brinkman density floor inside the solid.
pub const DEFAULT_DELTA: f64 = 1e-3;

/// Smoothed Heaviside: 0 below `-eps`, 1 above `eps`, sinusoidal blend between.
#[inline]
pub fn heaviside(s: f64, eps: f64) -> f64 {
    if s <= -eps {
        0.0
    } else if s >= eps {
        1.0
    } else {
        0.5 * (1.0 + s / eps + (PI * s / eps).sin() / PI)
    }
}

/// Derivative of [`heaviside`]; integrates to one across the band.
#[inline]
pub fn dirac(s: f64, eps: f64) -> f64 {
    if s.abs() >= eps {
        0.0
    } else {
        0.5 / eps * (1.0 + (PI * s / eps).cos())
    }
}

/// Regularized fluid indicator `rho in [delta, 1]` feeding the Brinkman term.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityField {
    field: ScalarField,
    delta: f64,
}

impl DensityField {
    pub fn new(field: ScalarField, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "density floor must lie in (0,1), got {delta}"
            )));
        }
        if field.min() < delta * (1.0 - 1e-12) || field.max() > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "density values must lie in [{delta}, 1]"
            )));
        }
        Ok(Self { field, delta })
    }

    /// Uniform density, used for the empty-solid and all-solid limits.
    pub fn uniform(grid: PeriodicGrid, value: f64, delta: f64) -> Result<Self> {
        Self::new(ScalarField::constant(grid, value), delta)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    /// Densities on the MAC faces: `x`-faces at `(i h, (j+1/2) h)` and `y`-faces at
    /// `((i+1/2) h, j h)`, each the mean of its two neighbouring nodes.
    pub fn face_values(&self) -> (Vec<f64>, Vec<f64>) {
        let g = self.field.grid();
        let n = g.n();
        let v = self.field.values();
        let mut fx = Vec::with_capacity(g.len());
        let mut fy = Vec::with_capacity(g.len());
        for j in 0..n {
            for i in 0..n {
                let here = v[g.index(i, j)];
                fx.push(0.5 * (here + v[g.index(i, (j + 1) % n)]));
                fy.push(0.5 * (here + v[g.index((i + 1) % n, j)]));
            }
        }
        (fx, fy)
    }
}

impl Deref for DensityField {
    type Target = ScalarField;

    fn deref(&self) -> &ScalarField {
        &self.field
    }
}

/// `rho = delta + (1 - delta) H_eps(psi)` with `eps = eps_w h`.
pub fn heaviside_density(psi: &LevelSet, eps_w: f64, delta: f64) -> Result<DensityField> {
    if eps_w <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "smoothing half-width must be positive, got {eps_w}"
        )));
    }
    let eps = eps_w * psi.grid().h();
    let field = psi.map(|s| delta + (1.0 - delta) * heaviside(s, eps));
    DensityField::new(field, delta)
}
