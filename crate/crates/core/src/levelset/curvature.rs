use super::LevelSet;
use crate::grid::ScalarField;

/// Gradient magnitudes below this are treated as degenerate.
pub const GRADIENT_FLOOR: f64 = 1e-8;

/// Mean curvature `div(∇psi / |∇psi|)` at every node, clamped to `±1/h`.
///
/// Positive on convex solid boundaries (normal points outward from the solid).
pub fn curvature(psi: &LevelSet) -> ScalarField {
    curvature_with_floor(psi, GRADIENT_FLOOR)
}

pub fn curvature_with_floor(psi: &LevelSet, floor: f64) -> ScalarField {
    let g = *psi.grid();
    let n = g.n();
    let h = g.h();
    let cap = 1.0 / h;
    let mut out = Vec::with_capacity(g.len());
    for j in 0..n as isize {
        for i in 0..n as isize {
            let c = psi.at(i, j);
            let e = psi.at(i + 1, j);
            let w = psi.at(i - 1, j);
            let no = psi.at(i, j + 1);
            let s = psi.at(i, j - 1);
            let px = (e - w) / (2.0 * h);
            let py = (no - s) / (2.0 * h);
            let pxx = (e - 2.0 * c + w) / (h * h);
            let pyy = (no - 2.0 * c + s) / (h * h);
            let pxy = (psi.at(i + 1, j + 1) - psi.at(i + 1, j - 1) - psi.at(i - 1, j + 1)
                + psi.at(i - 1, j - 1))
                / (4.0 * h * h);
            let norm = px.hypot(py).max(floor);
            let k = (pxx * py * py - 2.0 * px * py * pxy + pyy * px * px) / norm.powi(3);
            out.push(k.clamp(-cap, cap));
        }
    }
    ScalarField::new(g, out).expect("same grid")
}
