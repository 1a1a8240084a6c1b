use serde::{Deserialize, Serialize};

use super::contour::{contour_area, contour_length};
use super::heaviside::{dirac, heaviside, DEFAULT_HALF_WIDTH};
use super::LevelSet;

/// How area and perimeter are computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureMethod {
    /// Quadrature of `1 - H_eps(psi)` and `delta_eps(psi) |∇psi|` (differentiable).
    #[default]
    SmoothedDelta,
    /// Marching-squares polygon area and polyline length.
    ContourPolyline,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerimeterMeasure {
    pub value: f64,
    /// Set when `|∇psi|` leaves `[0.5, 2]` somewhere in the smoothing band, i.e. `psi` is far
    /// from a signed distance and should be reinitialized.
    pub gradient_warning: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeMeasures {
    pub perimeter: f64,
    pub area: f64,
    pub method: MeasureMethod,
    #[serde(default)]
    pub gradient_warning: bool,
}

pub fn measure_area(psi: &LevelSet, method: MeasureMethod) -> f64 {
    match method {
        MeasureMethod::SmoothedDelta => {
            let g = psi.grid();
            let eps = DEFAULT_HALF_WIDTH * g.h();
            let h2 = g.h() * g.h();
            psi.values()
                .iter()
                .map(|&s| 1.0 - heaviside(s, eps))
                .sum::<f64>()
                * h2
        }
        MeasureMethod::ContourPolyline => contour_area(psi),
    }
}

pub fn measure_perimeter(psi: &LevelSet, method: MeasureMethod) -> PerimeterMeasure {
    let g = *psi.grid();
    let eps = DEFAULT_HALF_WIDTH * g.h();
    let n = g.n();
    let mut total = 0.0;
    let mut warning = false;
    for j in 0..n {
        for i in 0..n {
            let s = psi.get(i, j);
            if s.abs() >= eps {
                continue;
            }
            let grad = psi.gradient(i, j);
            let norm = grad[0].hypot(grad[1]);
            warning |= !(0.5..=2.0).contains(&norm);
            total += dirac(s, eps) * norm;
        }
    }
    let value = match method {
        MeasureMethod::SmoothedDelta => total * g.h() * g.h(),
        MeasureMethod::ContourPolyline => contour_length(psi),
    };
    PerimeterMeasure {
        value,
        gradient_warning: warning,
    }
}

pub fn measure(psi: &LevelSet, method: MeasureMethod) -> ShapeMeasures {
    let p = measure_perimeter(psi, method);
    ShapeMeasures {
        perimeter: p.value,
        area: measure_area(psi, method),
        method,
        gradient_warning: p.gradient_warning,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicGrid;
    use crate::levelset::{init_levelset, ShapeSpec};
    use std::f64::consts::PI;

    fn circle(n: usize, r: f64) -> LevelSet {
        init_levelset(
            PeriodicGrid::square(n).unwrap(),
            &ShapeSpec::circle(0.5, 0.5, r),
        )
        .unwrap()
    }

    #[test]
    fn circle_measures_within_one_percent() {
        for r in [0.1, 0.2, 0.3, 0.4] {
            let psi = circle(128, r);
            for method in [MeasureMethod::SmoothedDelta, MeasureMethod::ContourPolyline] {
                let m = measure(&psi, method);
                assert!(
                    (m.area / (PI * r * r) - 1.0).abs() < 0.01,
                    "{r} {method:?} {}",
                    m.area
                );
                assert!(
                    (m.perimeter / (2.0 * PI * r) - 1.0).abs() < 0.01,
                    "{r} {method:?}"
                );
                assert!(!m.gradient_warning);
            }
        }
    }

    #[test]
    fn empty_and_full_cells() {
        let g = PeriodicGrid::square(32).unwrap();
        let fluid = LevelSet::from_fn(g, |_, _| 1.0);
        let solid = LevelSet::from_fn(g, |_, _| -1.0);
        for method in [MeasureMethod::SmoothedDelta, MeasureMethod::ContourPolyline] {
            assert_eq!(measure_area(&fluid, method), 0.0);
            assert!((measure_area(&solid, method) - 1.0).abs() < 1e-12);
            assert_eq!(measure_perimeter(&fluid, method).value, 0.0);
        }
    }

    #[test]
    fn two_circles_add_up() {
        let g = PeriodicGrid::square(128).unwrap();
        let spec = ShapeSpec::Union(vec![
            ShapeSpec::circle(0.3, 0.5, 0.15),
            ShapeSpec::circle(0.7, 0.5, 0.15),
        ]);
        let psi = init_levelset(g, &spec).unwrap();
        let p = measure_perimeter(&psi, MeasureMethod::SmoothedDelta).value;
        assert!((p / (4.0 * PI * 0.15) - 1.0).abs() < 0.02, "{p}");
    }

    #[test]
    fn scaled_field_raises_warning() {
        let psi = circle(64, 0.3);
        let scaled = LevelSet::from_field(psi.map(|v| 5.0 * v));
        assert!(measure_perimeter(&scaled, MeasureMethod::SmoothedDelta).gradient_warning);
    }
}
