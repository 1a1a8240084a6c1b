use serde::{Deserialize, Serialize};

use super::{contour, transport, LevelSet};
use crate::error::{Error, Result};
use crate::grid::{Boundary, PeriodicGrid, ScalarField};

/// Description of an initial solid inclusion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeSpec {
    /// No solid; every node lies at distance 1 from a nonexistent interface.
    Empty,
    Circle {
        center: [f64; 2],
        radius: f64,
    },
    /// Axis-aligned ellipse with semi-axes `(a, b)` along `(x, y)`.
    Ellipse {
        center: [f64; 2],
        semi_axes: [f64; 2],
    },
    /// Axis-aligned rectangle given by its half side lengths.
    Rectangle {
        center: [f64; 2],
        half_widths: [f64; 2],
    },
    /// Solid slab `|x_axis - center| < half_width`, periodic in the other direction.
    Band {
        axis: usize,
        center: f64,
        half_width: f64,
    },
    Union(Vec<ShapeSpec>),
    Intersection(Vec<ShapeSpec>),
    /// Raster of node values on an `n x n` grid (`<= 0` solid, `> 0` fluid).
    Mask {
        n: usize,
        values: Vec<f64>,
    },
}

impl ShapeSpec {
    pub fn circle(cx: f64, cy: f64, radius: f64) -> Self {
        ShapeSpec::Circle {
            center: [cx, cy],
            radius,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let size = |name: &str, v: f64| -> Result<()> {
            if v <= 0.0 || v >= 0.5 {
                Err(Error::InvalidShape(format!(
                    "{name} must lie in (0, 0.5) so the inclusion does not overlap its periodic images, got {v}"
                )))
            } else {
                Ok(())
            }
        };
        let finite = |c: &[f64]| -> Result<()> {
            if c.iter().all(|v| v.is_finite()) {
                Ok(())
            } else {
                Err(Error::InvalidShape("non-finite coordinate".into()))
            }
        };
        match self {
            ShapeSpec::Empty => Ok(()),
            ShapeSpec::Circle { center, radius } => {
                finite(center)?;
                size("radius", *radius)
            }
            ShapeSpec::Ellipse { center, semi_axes } => {
                finite(center)?;
                size("semi-axis", semi_axes[0])?;
                size("semi-axis", semi_axes[1])
            }
            ShapeSpec::Rectangle {
                center,
                half_widths,
            } => {
                finite(center)?;
                size("half width", half_widths[0])?;
                size("half width", half_widths[1])
            }
            ShapeSpec::Band {
                axis,
                center,
                half_width,
            } => {
                if *axis > 1 {
                    return Err(Error::InvalidShape(format!(
                        "band axis must be 0 or 1, got {axis}"
                    )));
                }
                finite(&[*center])?;
                size("band half width", *half_width)
            }
            ShapeSpec::Union(parts) | ShapeSpec::Intersection(parts) => {
                if parts.is_empty() {
                    return Err(Error::InvalidShape("empty boolean combination".into()));
                }
                parts.iter().try_for_each(ShapeSpec::validate)
            }
            ShapeSpec::Mask { n, values } => {
                if values.len() != n * n {
                    return Err(Error::InvalidShape(format!(
                        "mask has {} values, expected {}",
                        values.len(),
                        n * n
                    )));
                }
                Ok(())
            }
        }
    }

    /// Exact periodic signed distance for primitives, min/max composition for boolean nodes.
    /// Masks have no closed form and return `None`.
    pub fn signed_distance(&self, x: f64, y: f64) -> Option<f64> {
        match self {
            ShapeSpec::Empty => Some(1.0),
            ShapeSpec::Circle { center, radius } => {
                Some(min_over_images(x, y, center, |dx, dy| {
                    dx.hypot(dy) - radius
                }))
            }
            ShapeSpec::Ellipse { center, semi_axes } => {
                Some(min_over_images(x, y, center, |dx, dy| {
                    ellipse_signed_distance(semi_axes[0], semi_axes[1], dx, dy)
                }))
            }
            ShapeSpec::Rectangle {
                center,
                half_widths,
            } => Some(min_over_images(x, y, center, |dx, dy| {
                let qx = dx.abs() - half_widths[0];
                let qy = dy.abs() - half_widths[1];
                qx.max(0.0).hypot(qy.max(0.0)) + qx.max(qy).min(0.0)
            })),
            ShapeSpec::Band {
                axis,
                center,
                half_width,
            } => {
                let coord = if *axis == 0 { x } else { y };
                let d = coord - center;
                let d = d - d.round();
                Some(d.abs() - half_width)
            }
            ShapeSpec::Union(parts) => parts
                .iter()
                .map(|p| p.signed_distance(x, y))
                .try_fold(f64::INFINITY, |acc, d| d.map(|d| acc.min(d))),
            ShapeSpec::Intersection(parts) => parts
                .iter()
                .map(|p| p.signed_distance(x, y))
                .try_fold(f64::NEG_INFINITY, |acc, d| d.map(|d| acc.max(d))),
            ShapeSpec::Mask { .. } => None,
        }
    }

    fn is_primitive(&self) -> bool {
        !matches!(
            self,
            ShapeSpec::Union(_) | ShapeSpec::Intersection(_) | ShapeSpec::Mask { .. }
        )
    }
}

fn min_over_images(x: f64, y: f64, c: &[f64; 2], f: impl Fn(f64, f64) -> f64) -> f64 {
    let dx = x - c[0];
    let dy = y - c[1];
    let dx = dx - dx.round();
    let dy = dy - dy.round();
    let mut best = f64::INFINITY;
    for sx in [-1.0, 0.0, 1.0] {
        for sy in [-1.0, 0.0, 1.0] {
            best = best.min(f(dx + sx, dy + sy));
        }
    }
    best
}

/// Signed distance from `(px, py)` to the ellipse `(x/a)^2 + (y/b)^2 = 1`.
fn ellipse_signed_distance(a: f64, b: f64, px: f64, py: f64) -> f64 {
    let inside = (px / a).powi(2) + (py / b).powi(2) < 1.0;
    let (e0, e1, y0, y1) = if a >= b {
        (a, b, px.abs(), py.abs())
    } else {
        (b, a, py.abs(), px.abs())
    };
    let d = distance_first_quadrant(e0, e1, y0, y1);
    if inside {
        -d
    } else {
        d
    }
}

// Robust bisection on the Lagrange parameter (Eberly); requires e0 >= e1 > 0, y0, y1 >= 0.
fn distance_first_quadrant(e0: f64, e1: f64, y0: f64, y1: f64) -> f64 {
    if y1 > 0.0 {
        if y0 > 0.0 {
            let z0 = y0 / e0;
            let z1 = y1 / e1;
            let g = z0 * z0 + z1 * z1 - 1.0;
            if g == 0.0 {
                return 0.0;
            }
            let r0 = (e0 / e1).powi(2);
            let s = ellipse_root(r0, z0, z1, g);
            let x0 = r0 * y0 / (s + r0);
            let x1 = y1 / (s + 1.0);
            (x0 - y0).hypot(x1 - y1)
        } else {
            (y1 - e1).abs()
        }
    } else {
        let numer = e0 * y0;
        let denom = e0 * e0 - e1 * e1;
        if numer < denom {
            let xde0 = numer / denom;
            let x0 = e0 * xde0;
            let x1 = e1 * (1.0 - xde0 * xde0).max(0.0).sqrt();
            (x0 - y0).hypot(x1)
        } else {
            (y0 - e0).abs()
        }
    }
}

fn ellipse_root(r0: f64, z0: f64, z1: f64, g: f64) -> f64 {
    let n0 = r0 * z0;
    let mut s0 = z1 - 1.0;
    let mut s1 = if g < 0.0 { 0.0 } else { n0.hypot(z1) - 1.0 };
    let mut s = 0.0;
    for _ in 0..1100 {
        s = 0.5 * (s0 + s1);
        if s == s0 || s == s1 {
            break;
        }
        let ratio0 = n0 / (s + r0);
        let ratio1 = z1 / (s + 1.0);
        let g = ratio0 * ratio0 + ratio1 * ratio1 - 1.0;
        if g > 0.0 {
            s0 = s;
        } else if g < 0.0 {
            s1 = s;
        } else {
            break;
        }
    }
    s
}

/// Builds the initial level set for `spec`.
///
/// Primitives are sampled from their exact signed distance. Boolean combinations are
/// composed with min/max and then reinitialized once. Masks are resampled to the grid
/// (nearest node) and redistanced from their marching-squares contour; a mask without an
/// interface becomes the constant `±1`, farther than any point of the cell.
pub fn init_levelset(grid: PeriodicGrid, spec: &ShapeSpec) -> Result<LevelSet> {
    spec.validate()?;
    match spec {
        ShapeSpec::Mask { n, values } => {
            let src = *n;
            let resampled = ScalarField::from_fn(grid, |x, y| {
                let i = ((x * src as f64).round() as usize) % src;
                let j = ((y * src as f64).round() as usize) % src;
                values[j * src + i]
            });
            let raw = LevelSet::from_field(resampled);
            if !raw.has_interface() {
                let fill = if raw.values()[0] <= 0.0 { -1.0 } else { 1.0 };
                return Ok(LevelSet::from_field(ScalarField::constant(grid, fill)));
            }
            Ok(contour::redistance_from_contour(&raw))
        }
        _ => {
            let psi = LevelSet::from_fn(grid, |x, y| {
                spec.signed_distance(x, y)
                    .expect("non-mask shapes have a closed-form distance")
            });
            if spec.is_primitive() {
                Ok(psi)
            } else {
                Ok(transport::reinitialize(
                    &psi,
                    transport::DEFAULT_REINIT_STEPS,
                    Boundary::Periodic,
                )
                .psi)
            }
        }
    }
}

/// Parses a compact shape description such as `circle(0.5,0.5,0.3)` or
/// `union(circle(0.3,0.5,0.15),circle(0.7,0.5,0.15))`.
///
/// Forms: `circle(cx,cy,r)`, `ellipse(cx,cy,a,b)`, `rect(cx,cy,wx,wy)` (half widths),
/// `band(x|y,center,half_width)`, `empty()`, `union(...)`, `intersection(...)`.
pub fn parse_shape(text: &str) -> Result<ShapeSpec> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
    };
    let spec = p.shape()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("trailing characters"));
    }
    spec.validate()?;
    Ok(spec)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, what: &str) -> Error {
        Error::InvalidShape(format!(
            "{what} at offset {} in `{}`",
            self.pos,
            String::from_utf8_lossy(self.src)
        ))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> Result<()> {
        self.skip_ws();
        if self.src.get(self.pos) == Some(&c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected `{}`", c as char)))
        }
    }

    fn ident(&mut self) -> Result<String> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphabetic() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected a name"));
        }
        Ok(String::from_utf8_lossy(&self.src[start..self.pos]).to_ascii_lowercase())
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && matches!(
                self.src[self.pos],
                b'0'..=b'9' | b'.' | b'-' | b'+' | b'e' | b'E'
            )
        {
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| self.err("expected a number"))
    }

    fn numbers(&mut self, count: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(count);
        for k in 0..count {
            if k > 0 {
                self.eat(b',')?;
            }
            out.push(self.number()?);
        }
        Ok(out)
    }

    fn shape(&mut self) -> Result<ShapeSpec> {
        let name = self.ident()?;
        self.eat(b'(')?;
        let spec = match name.as_str() {
            "empty" => ShapeSpec::Empty,
            "circle" => {
                let v = self.numbers(3)?;
                ShapeSpec::circle(v[0], v[1], v[2])
            }
            "ellipse" => {
                let v = self.numbers(4)?;
                ShapeSpec::Ellipse {
                    center: [v[0], v[1]],
                    semi_axes: [v[2], v[3]],
                }
            }
            "rect" | "rectangle" => {
                let v = self.numbers(4)?;
                ShapeSpec::Rectangle {
                    center: [v[0], v[1]],
                    half_widths: [v[2], v[3]],
                }
            }
            "band" => {
                let axis = match self.ident()?.as_str() {
                    "x" => 0,
                    "y" => 1,
                    _ => return Err(self.err("band axis must be x or y")),
                };
                self.eat(b',')?;
                let v = self.numbers(2)?;
                ShapeSpec::Band {
                    axis,
                    center: v[0],
                    half_width: v[1],
                }
            }
            "union" | "intersection" => {
                let mut parts = vec![self.shape()?];
                loop {
                    self.skip_ws();
                    if self.src.get(self.pos) == Some(&b',') {
                        self.pos += 1;
                        parts.push(self.shape()?);
                    } else {
                        break;
                    }
                }
                if name == "union" {
                    ShapeSpec::Union(parts)
                } else {
                    ShapeSpec::Intersection(parts)
                }
            }
            other => return Err(self.err(&format!("unknown shape `{other}`"))),
        };
        self.eat(b')')?;
        Ok(spec)
    }
}

/// The `parse_shape` syntax; masks print as `mask(n)`, which does not parse back.
impl std::fmt::Display for ShapeSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let list = |f: &mut std::fmt::Formatter<'_>, name: &str, parts: &[ShapeSpec]| {
            write!(f, "{name}(")?;
            for (k, p) in parts.iter().enumerate() {
                if k > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{p}")?;
            }
            write!(f, ")")
        };
        match self {
            ShapeSpec::Empty => write!(f, "empty()"),
            ShapeSpec::Circle { center, radius } => {
                write!(f, "circle({},{},{radius})", center[0], center[1])
            }
            ShapeSpec::Ellipse { center, semi_axes } => write!(
                f,
                "ellipse({},{},{},{})",
                center[0], center[1], semi_axes[0], semi_axes[1]
            ),
            ShapeSpec::Rectangle {
                center,
                half_widths,
            } => write!(
                f,
                "rect({},{},{},{})",
                center[0], center[1], half_widths[0], half_widths[1]
            ),
            ShapeSpec::Band {
                axis,
                center,
                half_width,
            } => {
                let a = if *axis == 0 { "x" } else { "y" };
                write!(f, "band({a},{center},{half_width})")
            }
            ShapeSpec::Union(parts) => list(f, "union", parts),
            ShapeSpec::Intersection(parts) => list(f, "intersection", parts),
            ShapeSpec::Mask { n, .. } => write!(f, "mask({n})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_is_exact_signed_distance() {
        let g = PeriodicGrid::square(128).unwrap();
        let psi = init_levelset(g, &ShapeSpec::circle(0.5, 0.5, 0.3)).unwrap();
        assert!((psi.get(64, 64) + 0.3).abs() < 1e-15);
        let spec = ShapeSpec::circle(0.5, 0.5, 0.3);
        assert!(spec.signed_distance(0.8, 0.5).unwrap().abs() < 1e-15);
    }

    #[test]
    fn circle_radius_bounds() {
        let g = PeriodicGrid::square(32).unwrap();
        for r in [0.0, -0.1, 0.5, 0.7] {
            assert!(matches!(
                init_levelset(g, &ShapeSpec::circle(0.5, 0.5, r)),
                Err(Error::InvalidShape(_))
            ));
        }
    }

    #[test]
    fn union_of_disjoint_circles_is_min() {
        let g = PeriodicGrid::square(64).unwrap();
        let a = ShapeSpec::circle(0.3, 0.5, 0.15);
        let b = ShapeSpec::circle(0.7, 0.5, 0.15);
        let psi = init_levelset(g, &ShapeSpec::Union(vec![a.clone(), b.clone()])).unwrap();
        let h = g.h();
        for j in 0..64 {
            for i in 0..64 {
                let [x, y] = g.node_position(i, j);
                let exact = a
                    .signed_distance(x, y)
                    .unwrap()
                    .min(b.signed_distance(x, y).unwrap());
                if exact.abs() < 3.0 * h {
                    assert!((psi.get(i, j) - exact).abs() < 0.05 * h, "node {i},{j}");
                }
            }
        }
        assert_eq!(super::super::contour_loops(&psi).len(), 2);
    }

    #[test]
    fn periodic_images_are_used() {
        let c = ShapeSpec::circle(0.05, 0.5, 0.1);
        // (0.98, 0.5) is 0.07 from the image centre at x = 1.05.
        let d = c.signed_distance(0.98, 0.5).unwrap();
        assert!((d + 0.03).abs() < 1e-12);
    }

    #[test]
    fn ellipse_distance_matches_brute_force() {
        let (a, b) = (0.35, 0.2);
        let m = 20000;
        let pts: Vec<(f64, f64)> = (0..m)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                (a * t.cos(), b * t.sin())
            })
            .collect();
        for &(px, py) in &[
            (0.1, 0.05),
            (0.4, 0.1),
            (0.0, 0.3),
            (-0.2, -0.15),
            (0.3, 0.0),
        ] {
            let brute = pts
                .iter()
                .map(|&(x, y)| (x - px).hypot(y - py))
                .fold(f64::INFINITY, f64::min);
            let got = ellipse_signed_distance(a, b, px, py).abs();
            assert!((got - brute).abs() < 1e-4, "{px},{py}: {got} vs {brute}");
        }
    }

    #[test]
    fn parses_nested_shapes() {
        let s = parse_shape("union(circle(0.3,0.5,0.15), circle(0.7,0.5,0.15))").unwrap();
        assert!(matches!(s, ShapeSpec::Union(ref p) if p.len() == 2));
        let s = parse_shape("band(x, 0.5, 0.15)").unwrap();
        assert!(matches!(s, ShapeSpec::Band { axis: 0, .. }));
        assert!(parse_shape("circle(0.5,0.5)").is_err());
        assert!(parse_shape("blob(1)").is_err());
        for text in [
            "union(circle(0.3,0.5,0.15),intersection(rect(0.7,0.5,0.1,0.2),band(y,0.5,0.05)))",
            "ellipse(0.5,0.5,0.35,0.2)",
            "empty()",
        ] {
            let spec = parse_shape(text).unwrap();
            assert_eq!(spec.to_string(), text);
            assert_eq!(parse_shape(&spec.to_string()).unwrap(), spec);
        }
        assert!(parse_shape("circle(0.5,0.5,0.6)").is_err());
    }

    #[test]
    fn empty_and_uniform_masks_lie_outside_the_band() {
        let g = PeriodicGrid::square(16).unwrap();
        let empty = init_levelset(g, &ShapeSpec::Empty).unwrap();
        assert!(empty.values().iter().all(|v| *v == 1.0));
        let circle = ShapeSpec::circle(0.5, 0.5, 0.3);
        let with_empty = ShapeSpec::Union(vec![ShapeSpec::Empty, circle.clone()]);
        assert_eq!(
            with_empty.signed_distance(0.1, 0.2),
            circle.signed_distance(0.1, 0.2)
        );
        for (v, fill) in [(0.3, 1.0), (-0.3, -1.0)] {
            let mask = ShapeSpec::Mask {
                n: 4,
                values: vec![v; 16],
            };
            let psi = init_levelset(g, &mask).unwrap();
            assert!(psi.values().iter().all(|p| *p == fill));
        }
    }

    #[test]
    fn mask_reproduces_circle() {
        let n = 64;
        let g = PeriodicGrid::square(n).unwrap();
        let spec = ShapeSpec::circle(0.5, 0.5, 0.3);
        let exact = init_levelset(g, &spec).unwrap();
        let mask = ShapeSpec::Mask {
            n,
            values: exact
                .values()
                .iter()
                .map(|&v| if v <= 0.0 { -1.0 } else { 1.0 })
                .collect(),
        };
        let psi = init_levelset(g, &mask).unwrap();
        // A binary raster pins the interface to within one cell.
        for (a, b) in psi.values().iter().zip(exact.values()) {
            if b.abs() < 4.0 * g.h() {
                assert!((a - b).abs() < g.h());
            }
        }
    }
}
