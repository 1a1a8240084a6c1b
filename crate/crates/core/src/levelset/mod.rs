//! Level-set description of the solid inclusion and the geometric machinery built on it.
//!
//! Sign convention: `psi < 0` inside the solid `ω`, `psi > 0` in the fluid `Y \ ω`, so the
//! unit normal `∇psi / |∇psi|` points from solid into fluid.

mod contour;
mod curvature;
mod heaviside;
mod measure;
mod shape;
mod transport;

use std::ops::Deref;

pub use contour::{
    contour_loops, contour_segments, hausdorff_distance, redistance_from_contour, ContourLoop,
    Segment,
};
pub use curvature::{curvature, curvature_with_floor, GRADIENT_FLOOR};
pub use heaviside::{
    dirac, heaviside, heaviside_density, DensityField, DEFAULT_DELTA, DEFAULT_HALF_WIDTH,
};
pub use measure::{
    measure, measure_area, measure_perimeter, MeasureMethod, PerimeterMeasure, ShapeMeasures,
};
pub use shape::{init_levelset, parse_shape, ShapeSpec};
pub use transport::{
    advect, max_stable_dt, reinitialize, Reinitialized, TransportOptions, DEFAULT_CFL,
    DEFAULT_REINIT_STEPS,
};

use crate::error::Result;
use crate::grid::{PeriodicGrid, ScalarField};

/// Level-set function sampled on the periodic grid (signed-distance units).
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSet(ScalarField);

impl LevelSet {
    pub fn new(grid: PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        ScalarField::new(grid, values).map(Self)
    }

    pub fn from_field(field: ScalarField) -> Self {
        Self(field)
    }

    pub fn from_fn(grid: PeriodicGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        Self(ScalarField::from_fn(grid, f))
    }

    pub fn field(&self) -> &ScalarField {
        &self.0
    }

    pub fn into_field(self) -> ScalarField {
        self.0
    }

    /// True when the field changes sign somewhere, i.e. an interface exists.
    pub fn has_interface(&self) -> bool {
        let v = self.0.values();
        v.iter().any(|&x| x < 0.0) && v.iter().any(|&x| x >= 0.0)
    }

    /// Unit normal at node `(i, j)` from central differences, `None` when `|∇psi|` is degenerate.
    pub fn normal(&self, i: usize, j: usize) -> Option<[f64; 2]> {
        let g = self.0.gradient(i, j);
        let norm = g[0].hypot(g[1]);
        (norm > GRADIENT_FLOOR).then(|| [g[0] / norm, g[1] / norm])
    }

    /// Closest interface point estimate `x - psi(x) n(x)` for node `(i, j)`.
    pub fn project_to_interface(&self, i: usize, j: usize) -> Option<([f64; 2], [f64; 2])> {
        let n = self.normal(i, j)?;
        let [x, y] = self.0.grid().node_position(i, j);
        let psi = self.0.get(i, j);
        Some(([x - psi * n[0], y - psi * n[1]], n))
    }
}

impl Deref for LevelSet {
    type Target = ScalarField;

    fn deref(&self) -> &ScalarField {
        &self.0
    }
}
