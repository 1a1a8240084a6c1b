//! Marching-squares extraction of the zero contour on the periodic grid.
//!
//! Segments are oriented with the solid (`psi < 0`) on their left, so stitched loops run
//! counter-clockwise around solid components. Saddle cells are resolved by the sign of the
//! cell-centre average.

use super::LevelSet;
use crate::grid::ScalarField;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub a: [f64; 2],
    pub b: [f64; 2],
    edge_a: usize,
    edge_b: usize,
}

impl Segment {
    pub fn length(&self) -> f64 {
        (self.b[0] - self.a[0]).hypot(self.b[1] - self.a[1])
    }

    fn midpoint(&self) -> [f64; 2] {
        [0.5 * (self.a[0] + self.b[0]), 0.5 * (self.a[1] + self.b[1])]
    }

    /// Distance from `p` to the nearest periodic image of this segment.
    pub fn periodic_distance(&self, p: [f64; 2]) -> f64 {
        let m = self.midpoint();
        let dx = p[0] - m[0];
        let dy = p[1] - m[1];
        let q = [m[0] + dx - dx.round(), m[1] + dy - dy.round()];
        point_segment_distance(q, self.a, self.b)
    }
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (ap[0] - t * ab[0]).hypot(ap[1] - t * ab[1])
}

/// A closed contour stitched across cell edges (coordinates unwrapped, not reduced mod 1).
#[derive(Clone, Debug)]
pub struct ContourLoop {
    pub points: Vec<[f64; 2]>,
    /// Net number of periods traversed along x and y; non-zero for loops that wrap the torus.
    pub winding: [i64; 2],
}

impl ContourLoop {
    pub fn length(&self) -> f64 {
        let m = self.points.len();
        (0..m)
            .map(|k| {
                let a = self.points[k];
                let mut b = self.points[(k + 1) % m];
                if k + 1 == m {
                    b[0] += self.winding[0] as f64;
                    b[1] += self.winding[1] as f64;
                }
                (b[0] - a[0]).hypot(b[1] - a[1])
            })
            .sum()
    }

    /// Shoelace area, positive for counter-clockwise loops; `None` for wrapping loops.
    pub fn signed_area(&self) -> Option<f64> {
        if self.winding != [0, 0] {
            return None;
        }
        let m = self.points.len();
        let twice: f64 = (0..m)
            .map(|k| {
                let a = self.points[k];
                let b = self.points[(k + 1) % m];
                a[0] * b[1] - b[0] * a[1]
            })
            .sum();
        Some(0.5 * twice)
    }
}

struct Crossing {
    point: [f64; 2],
    edge: usize,
    exit: bool,
}

/// Visits every cell and returns its crossings in counter-clockwise boundary order plus
/// whether the centre average is negative.
fn for_each_cell(
    field: &ScalarField,
    mut visit: impl FnMut(usize, usize, [f64; 4], &[Crossing], bool),
) {
    let g = field.grid();
    let n = g.n();
    let h = g.h();
    let mut crossings: Vec<Crossing> = Vec::with_capacity(4);
    for j in 0..n {
        for i in 0..n {
            let ip = (i + 1) % n;
            let jp = (j + 1) % n;
            let nodes = [
                g.index(i, j),
                g.index(ip, j),
                g.index(ip, jp),
                g.index(i, jp),
            ];
            let v = nodes.map(|k| field.values()[k]);
            let x0 = i as f64 * h;
            let y0 = j as f64 * h;
            let corners = [[x0, y0], [x0 + h, y0], [x0 + h, y0 + h], [x0, y0 + h]];
            // edge ids: horizontal edge starting at node k -> 2k, vertical -> 2k + 1
            let edge_ids = [
                2 * nodes[0],
                2 * nodes[1] + 1,
                2 * nodes[3],
                2 * nodes[0] + 1,
            ];
            crossings.clear();
            for k in 0..4 {
                let k1 = (k + 1) % 4;
                let (va, vb) = (v[k], v[k1]);
                if (va < 0.0) != (vb < 0.0) {
                    let t = va / (va - vb);
                    let pa = corners[k];
                    let pb = corners[k1];
                    crossings.push(Crossing {
                        point: [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])],
                        edge: edge_ids[k],
                        exit: va < 0.0,
                    });
                }
            }
            let centre_negative = v.iter().sum::<f64>() < 0.0;
            visit(i, j, v, &crossings, centre_negative);
        }
    }
}

/// All zero-contour segments of `psi`.
pub fn contour_segments(psi: &LevelSet) -> Vec<Segment> {
    let mut out = Vec::new();
    for_each_cell(psi.field(), |_, _, _, cr, centre_negative| {
        let m = cr.len();
        if m == 0 {
            return;
        }
        for k in 0..m {
            if !cr[k].exit {
                continue;
            }
            let partner = if centre_negative {
                (k + 1) % m
            } else {
                (k + m - 1) % m
            };
            let (p, q) = (&cr[k], &cr[partner]);
            out.push(Segment {
                a: p.point,
                b: q.point,
                edge_a: p.edge,
                edge_b: q.edge,
            });
        }
    });
    out
}

/// Stitches segments into closed loops across cell and periodic boundaries.
pub fn contour_loops(psi: &LevelSet) -> Vec<ContourLoop> {
    let segs = contour_segments(psi);
    let mut by_start = std::collections::HashMap::with_capacity(segs.len());
    for (k, s) in segs.iter().enumerate() {
        by_start.insert(s.edge_a, k);
    }
    let mut visited = vec![false; segs.len()];
    let mut loops = Vec::new();
    for start in 0..segs.len() {
        if visited[start] {
            continue;
        }
        let mut points = Vec::new();
        let mut offset = [0.0f64; 2];
        let mut cur = start;
        loop {
            visited[cur] = true;
            let s = segs[cur];
            points.push([s.a[0] + offset[0], s.a[1] + offset[1]]);
            let Some(&next) = by_start.get(&s.edge_b) else {
                break;
            };
            let na = segs[next].a;
            offset[0] += (s.b[0] - na[0]).round();
            offset[1] += (s.b[1] - na[1]).round();
            if next == start {
                break;
            }
            cur = next;
        }
        loops.push(ContourLoop {
            points,
            winding: [offset[0] as i64, offset[1] as i64],
        });
    }
    loops
}

/// Total contour length.
pub(crate) fn contour_length(psi: &LevelSet) -> f64 {
    contour_segments(psi).iter().map(Segment::length).sum()
}

/// Area of `{psi < 0}` from the piecewise-linear reconstruction in each cell.
pub(crate) fn contour_area(psi: &LevelSet) -> f64 {
    let h = psi.grid().h();
    let mut total = 0.0;
    let mut poly: Vec<[f64; 2]> = Vec::with_capacity(8);
    for_each_cell(psi.field(), |i, j, v, cr, centre_negative| {
        let x0 = i as f64 * h;
        let y0 = j as f64 * h;
        let corners = [[x0, y0], [x0 + h, y0], [x0 + h, y0 + h], [x0, y0 + h]];
        let negative = v.map(|x| x < 0.0);
        let count = negative.iter().filter(|&&b| b).count();
        if count == 0 {
            return;
        }
        if count == 4 {
            total += h * h;
            return;
        }
        let saddle = count == 2 && negative[0] == negative[2];
        if saddle && !centre_negative {
            // two separated negative corners: sum the corner triangles
            for c in [0usize, 2] {
                let c = if negative[c] { c } else { c + 1 };
                let prev = (c + 3) % 4;
                let next = (c + 1) % 4;
                let along = |a: usize, b: usize| {
                    let t = v[a] / (v[a] - v[b]);
                    [
                        corners[a][0] + t * (corners[b][0] - corners[a][0]),
                        corners[a][1] + t * (corners[b][1] - corners[a][1]),
                    ]
                };
                let tri = [corners[c], along(c, next), along(c, prev)];
                total += polygon_area(&tri).abs();
            }
            return;
        }
        poly.clear();
        let mut ci = 0;
        for k in 0..4 {
            if negative[k] {
                poly.push(corners[k]);
            }
            let k1 = (k + 1) % 4;
            if negative[k] != negative[k1] {
                poly.push(cr[ci].point);
                ci += 1;
            }
        }
        total += polygon_area(&poly).abs();
    });
    total
}

fn polygon_area(p: &[[f64; 2]]) -> f64 {
    let m = p.len();
    0.5 * (0..m)
        .map(|k| {
            let a = p[k];
            let b = p[(k + 1) % m];
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
}

/// Symmetric Hausdorff distance between the zero contours of two level sets (periodic).
///
/// Returns `None` when exactly one of the fields has no interface.
pub fn hausdorff_distance(a: &LevelSet, b: &LevelSet) -> Option<f64> {
    let sa = contour_segments(a);
    let sb = contour_segments(b);
    match (sa.is_empty(), sb.is_empty()) {
        (true, true) => return Some(0.0),
        (true, false) | (false, true) => return None,
        _ => {}
    }
    Some(directed_hausdorff(&sa, &sb).max(directed_hausdorff(&sb, &sa)))
}

fn directed_hausdorff(from: &[Segment], to: &[Segment]) -> f64 {
    let lookup = SegmentIndex::new(to);
    from.iter()
        .flat_map(|s| [s.a, s.midpoint()])
        .map(|p| lookup.nearest(p))
        .fold(0.0, f64::max)
}

/// Bucketed periodic nearest-segment queries.
struct SegmentIndex<'a> {
    segs: &'a [Segment],
    buckets: Vec<Vec<usize>>,
    m: usize,
}

impl<'a> SegmentIndex<'a> {
    fn new(segs: &'a [Segment]) -> Self {
        let m = ((segs.len() as f64).sqrt().ceil() as usize).clamp(1, 64);
        let mut buckets = vec![Vec::new(); m * m];
        for (k, s) in segs.iter().enumerate() {
            let c = s.midpoint();
            buckets[Self::bucket_of(c, m)].push(k);
        }
        Self { segs, buckets, m }
    }

    fn bucket_of(p: [f64; 2], m: usize) -> usize {
        let bx = ((p[0].rem_euclid(1.0) * m as f64) as usize).min(m - 1);
        let by = ((p[1].rem_euclid(1.0) * m as f64) as usize).min(m - 1);
        by * m + bx
    }

    fn nearest(&self, p: [f64; 2]) -> f64 {
        let m = self.m as isize;
        let size = 1.0 / self.m as f64;
        let bx = ((p[0].rem_euclid(1.0) * self.m as f64) as isize).min(m - 1);
        let by = ((p[1].rem_euclid(1.0) * self.m as f64) as isize).min(m - 1);
        let mut best = f64::INFINITY;
        for ring in 0..=(m / 2 + 1) {
            for dy in -ring..=ring {
                for dx in -ring..=ring {
                    if dx.abs().max(dy.abs()) != ring {
                        continue;
                    }
                    let b = ((by + dy).rem_euclid(m) * m + (bx + dx).rem_euclid(m)) as usize;
                    for &k in &self.buckets[b] {
                        best = best.min(self.segs[k].periodic_distance(p));
                    }
                }
            }
            // segments are short (< one grid cell), so anything beyond this ring is farther
            if best < (ring as f64 - 0.5) * size {
                break;
            }
        }
        best
    }
}

/// Geometric signed distance to the marching-squares contour of `raw`, keeping the sign of
/// `raw` at each node.
pub fn redistance_from_contour(raw: &LevelSet) -> LevelSet {
    let segs = contour_segments(raw);
    let g = *raw.grid();
    if segs.is_empty() {
        return raw.clone();
    }
    let index = SegmentIndex::new(&segs);
    let values = raw
        .values()
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let (i, j) = g.coords(k);
            let d = index.nearest(g.node_position(i, j));
            if v < 0.0 {
                -d
            } else {
                d
            }
        })
        .collect();
    LevelSet::new(g, values).expect("same grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicGrid;
    use crate::levelset::{init_levelset, ShapeSpec};
    use std::f64::consts::PI;

    #[test]
    fn circle_contour_length_and_area() {
        let g = PeriodicGrid::square(128).unwrap();
        let psi = init_levelset(g, &ShapeSpec::circle(0.5, 0.5, 0.3)).unwrap();
        let loops = contour_loops(&psi);
        assert_eq!(loops.len(), 1);
        assert_eq!(loops[0].winding, [0, 0]);
        assert!((loops[0].length() - 2.0 * PI * 0.3).abs() < 1e-3);
        let area = loops[0].signed_area().unwrap();
        assert!(area > 0.0, "loops run counter-clockwise around the solid");
        assert!((area - PI * 0.09).abs() < 1e-3);
        assert!((contour_area(&psi) - PI * 0.09).abs() < 1e-3);
    }

    #[test]
    fn circle_across_seam_is_one_loop() {
        let g = PeriodicGrid::square(64).unwrap();
        let psi = init_levelset(g, &ShapeSpec::circle(0.02, 0.97, 0.2)).unwrap();
        let loops = contour_loops(&psi);
        assert_eq!(loops.len(), 1);
        assert_eq!(loops[0].winding, [0, 0]);
        assert!((loops[0].length() - 2.0 * PI * 0.2).abs() < 2e-3);
    }

    #[test]
    fn band_contours_wrap() {
        let g = PeriodicGrid::square(32).unwrap();
        let psi = init_levelset(
            g,
            &ShapeSpec::Band {
                axis: 0,
                center: 0.5,
                half_width: 0.2,
            },
        )
        .unwrap();
        let loops = contour_loops(&psi);
        assert_eq!(loops.len(), 2);
        for l in &loops {
            assert_eq!(l.winding[0], 0);
            assert_eq!(l.winding[1].abs(), 1);
            assert!((l.length() - 1.0).abs() < 1e-12);
        }
        assert!((contour_area(&psi) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn hausdorff_of_shifted_circles() {
        let g = PeriodicGrid::square(64).unwrap();
        let a = init_levelset(g, &ShapeSpec::circle(0.5, 0.5, 0.25)).unwrap();
        let b = init_levelset(g, &ShapeSpec::circle(0.5, 0.5, 0.27)).unwrap();
        let d = hausdorff_distance(&a, &b).unwrap();
        assert!((d - 0.02).abs() < 2e-3, "{d}");
        assert!(hausdorff_distance(&a, &a).unwrap() < 1e-12);
    }
}
