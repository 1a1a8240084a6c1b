//! Periodic corrector problems `div(a(ρ)(∇π_j + e_j)) = 0` and the effective diffusion
//! tensor.
//!
//! Correctors live at cell centres; the coefficient on each cell face is the MAC face
//! density, floored at `δ_a`. The discrete problem minimizes
//! `Σ_faces a (h e_j + Δπ)²`, which is solved by Jacobi-preconditioned conjugate gradients
//! in the zero-mean subspace.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::PeriodicGrid;
use crate::levelset::DensityField;
use crate::stokes::CellField;

pub const DEFAULT_COEFFICIENT_FLOOR: f64 = 1e-3;
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionOptions {
    pub tol: f64,
    pub floor: f64,
    pub max_iters: usize,
}

impl Default for DiffusionOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            floor: DEFAULT_COEFFICIENT_FLOOR,
            max_iters: 200_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DiffusionCellSolution {
    pub direction: usize,
    pub corrector: CellField,
    pub residual: f64,
    pub iterations: usize,
    pub floor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionTensor {
    pub d: [[f64; 2]; 2],
    pub n: usize,
    pub floor: f64,
}

/// Face coefficients `(x-faces, y-faces)`; x-face `(i, j)` separates cells `(i-1, j)` and
/// `(i, j)`.
fn coefficients(rho: &DensityField, floor: f64) -> (Vec<f64>, Vec<f64>) {
    let (fx, fy) = rho.face_values();
    let clamp = |v: Vec<f64>| v.into_iter().map(|r| r.max(floor)).collect();
    (clamp(fx), clamp(fy))
}

struct Operator {
    grid: PeriodicGrid,
    ax: Vec<f64>,
    ay: Vec<f64>,
}

impl Operator {
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let g = self.grid;
        let n = g.n() as isize;
        for j in 0..n {
            for i in 0..n {
                let k = g.wrapped(i, j);
                let e = g.wrapped(i + 1, j);
                let w = g.wrapped(i - 1, j);
                let no = g.wrapped(i, j + 1);
                let s = g.wrapped(i, j - 1);
                out[k] = self.ax[k] * (x[k] - x[w]) - self.ax[e] * (x[e] - x[k])
                    + self.ay[k] * (x[k] - x[s])
                    - self.ay[no] * (x[no] - x[k]);
            }
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let g = self.grid;
        let n = g.n() as isize;
        let mut d = Vec::with_capacity(g.len());
        for j in 0..n {
            for i in 0..n {
                let k = g.wrapped(i, j);
                d.push(
                    self.ax[k]
                        + self.ax[g.wrapped(i + 1, j)]
                        + self.ay[k]
                        + self.ay[g.wrapped(i, j + 1)],
                );
            }
        }
        d
    }

    fn rhs(&self, direction: usize) -> Vec<f64> {
        let g = self.grid;
        let n = g.n() as isize;
        let h = g.h();
        let mut b = Vec::with_capacity(g.len());
        for j in 0..n {
            for i in 0..n {
                let k = g.wrapped(i, j);
                b.push(if direction == 0 {
                    h * (self.ax[g.wrapped(i + 1, j)] - self.ax[k])
                } else {
                    h * (self.ay[g.wrapped(i, j + 1)] - self.ay[k])
                });
            }
        }
        b
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

pub fn solve_cell_diffusion(
    rho: &DensityField,
    j: usize,
    tol: f64,
) -> Result<DiffusionCellSolution> {
    solve_cell_diffusion_with(
        rho,
        j,
        DiffusionOptions {
            tol,
            ..Default::default()
        },
    )
}

pub fn solve_cell_diffusion_with(
    rho: &DensityField,
    direction: usize,
    options: DiffusionOptions,
) -> Result<DiffusionCellSolution> {
    if direction >= PeriodicGrid::DIM {
        return Err(Error::InvalidParameter(format!(
            "direction {direction} out of range"
        )));
    }
    if !(options.tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {}",
            options.tol
        )));
    }
    if !(options.floor > 0.0 && options.floor <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "coefficient floor must lie in (0, 1], got {}",
            options.floor
        )));
    }
    let grid = *rho.grid();
    let (ax, ay) = coefficients(rho, options.floor);
    let op = Operator { grid, ax, ay };
    let mut b = op.rhs(direction);
    remove_mean(&mut b);
    let bnorm = dot(&b, &b).sqrt();
    let mut x = vec![0.0; grid.len()];
    if bnorm == 0.0 {
        return Ok(DiffusionCellSolution {
            direction,
            corrector: CellField::new(grid, x)?,
            residual: 0.0,
            iterations: 0,
            floor: options.floor,
        });
    }
    let inv_diag: Vec<f64> = op.diagonal().iter().map(|d| 1.0 / d).collect();
    let mut r = b;
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, d)| a * d).collect();
    remove_mean(&mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; grid.len()];
    let mut rz = dot(&r, &z);
    let mut residual = 1.0;
    for it in 1..=options.max_iters {
        op.apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for k in 0..x.len() {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        residual = dot(&r, &r).sqrt() / bnorm;
        if !residual.is_finite() {
            return Err(Error::NonFinite {
                component: "diffusion residual".into(),
            });
        }
        if residual <= options.tol {
            remove_mean(&mut x);
            return Ok(DiffusionCellSolution {
                direction,
                corrector: CellField::new(grid, x)?,
                residual,
                iterations: it,
                floor: options.floor,
            });
        }
        for k in 0..z.len() {
            z[k] = r[k] * inv_diag[k];
        }
        remove_mean(&mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..p.len() {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::NotConverged {
        solver: "diffusion",
        iterations: options.max_iters,
        residual,
    })
}

/// Solves both directions concurrently.
pub fn solve_all_diffusion(
    rho: &DensityField,
    options: DiffusionOptions,
) -> Result<Vec<DiffusionCellSolution>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..PeriodicGrid::DIM)
            .map(|j| s.spawn(move || solve_cell_diffusion_with(rho, j, options)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("corrector solve panicked"))
            .collect()
    })
}

/// Per-face flux gradients `h e_j + Δq` for a cell field `q`.
fn face_gradients(grid: PeriodicGrid, q: &[f64], direction: usize) -> (Vec<f64>, Vec<f64>) {
    let n = grid.n() as isize;
    let h = grid.h();
    let mut gx = Vec::with_capacity(grid.len());
    let mut gy = Vec::with_capacity(grid.len());
    for j in 0..n {
        for i in 0..n {
            let k = grid.wrapped(i, j);
            gx.push(if direction == 0 { h } else { 0.0 } + q[k] - q[grid.wrapped(i - 1, j)]);
            gy.push(if direction == 1 { h } else { 0.0 } + q[k] - q[grid.wrapped(i, j - 1)]);
        }
    }
    (gx, gy)
}

/// `∫ a(ρ) |e_j + ∇q|²` for an arbitrary periodic cell field `q`.
pub fn corrector_energy(rho: &DensityField, direction: usize, q: &CellField, floor: f64) -> f64 {
    let grid = *rho.grid();
    let (ax, ay) = coefficients(rho, floor);
    let (gx, gy) = face_gradients(grid, q.values(), direction);
    (0..grid.len())
        .map(|k| ax[k] * gx[k] * gx[k] + ay[k] * gy[k] * gy[k])
        .sum()
}

/// `D_ik = ∫ a(ρ)(e_i + ∇π_i)·(e_k + ∇π_k)`.
pub fn diffusion_tensor(
    solutions: &[DiffusionCellSolution],
    rho: &DensityField,
) -> Result<DiffusionTensor> {
    let grid = *rho.grid();
    let mut by_dir: [Option<&DiffusionCellSolution>; 2] = [None, None];
    for s in solutions {
        grid.check_same(s.corrector.grid())?;
        if s.direction < 2 {
            by_dir[s.direction] = Some(s);
        }
    }
    let [Some(s0), Some(s1)] = by_dir else {
        return Err(Error::Missing("corrector for each direction".into()));
    };
    let floor = s0.floor;
    let (ax, ay) = coefficients(rho, floor);
    let g = [
        face_gradients(grid, s0.corrector.values(), 0),
        face_gradients(grid, s1.corrector.values(), 1),
    ];
    let mut d = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in a..2 {
            let v: f64 = (0..grid.len())
                .map(|k| ax[k] * g[a].0[k] * g[b].0[k] + ay[k] * g[a].1[k] * g[b].1[k])
                .sum();
            d[a][b] = v;
            d[b][a] = v;
        }
    }
    Ok(DiffusionTensor {
        d,
        n: grid.n(),
        floor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ScalarField;
    use crate::levelset::{heaviside_density, init_levelset, ShapeSpec};

    fn tensor(rho: &DensityField) -> DiffusionTensor {
        let sols = solve_all_diffusion(rho, DiffusionOptions::default()).unwrap();
        diffusion_tensor(&sols, rho).unwrap()
    }

    #[test]
    fn empty_cell_is_identity() {
        let g = PeriodicGrid::square(16).unwrap();
        let rho = DensityField::uniform(g, 1.0, 1e-3).unwrap();
        let sols = solve_all_diffusion(&rho, DiffusionOptions::default()).unwrap();
        assert!(sols
            .iter()
            .all(|s| s.corrector.values().iter().all(|&v| v == 0.0)));
        let d = diffusion_tensor(&sols, &rho).unwrap().d;
        assert!((d[0][0] - 1.0).abs() < 1e-12 && (d[1][1] - 1.0).abs() < 1e-12);
        assert!(d[0][1].abs() < 1e-14);
    }

    #[test]
    fn all_solid_scales_with_floor() {
        let g = PeriodicGrid::square(16).unwrap();
        let rho = DensityField::uniform(g, 1e-3, 1e-3).unwrap();
        let d = tensor(&rho).d;
        assert!((d[0][0] - 1e-3).abs() < 1e-12 && (d[1][1] - 1e-3).abs() < 1e-12);
    }

    /// Layered medium varying along x only: the flux across the layers sees the harmonic
    /// mean of the face coefficients, the flux along them the arithmetic mean.
    #[test]
    fn laminate_matches_harmonic_and_arithmetic_means() {
        let g = PeriodicGrid::square(64).unwrap();
        let psi = init_levelset(
            g,
            &ShapeSpec::Band {
                axis: 0,
                center: 0.5,
                half_width: 0.15,
            },
        )
        .unwrap();
        let rho = heaviside_density(&psi, 1.5, 1e-3).unwrap();
        let floor = 1e-3;
        let d = tensor(&rho).d;
        // independent evaluation of the 1-D laminate formulas on the same face coefficients
        let (fx, fy) = rho.face_values();
        let row_x: Vec<f64> = (0..64).map(|i| fx[i].max(floor)).collect();
        let row_y: Vec<f64> = (0..64).map(|i| fy[i].max(floor)).collect();
        let harmonic = 64.0 / row_x.iter().map(|a| 1.0 / a).sum::<f64>();
        let arithmetic = row_y.iter().sum::<f64>() / 64.0;
        assert!(
            (d[0][0] - harmonic).abs() < 1e-8 * harmonic.max(1e-3),
            "{} {harmonic}",
            d[0][0]
        );
        assert!((d[1][1] - arithmetic).abs() < 1e-10);
        assert!(d[0][1].abs() < 1e-10);
        // fluid fraction 0.7
        assert!((arithmetic - 0.7).abs() < 0.02);
    }

    #[test]
    fn circle_is_symmetric() {
        let g = PeriodicGrid::square(64).unwrap();
        let psi = init_levelset(g, &ShapeSpec::circle(0.5, 0.5, 0.3)).unwrap();
        let rho = heaviside_density(&psi, 1.5, 1e-3).unwrap();
        let d = tensor(&rho).d;
        assert!((d[0][0] - d[1][1]).abs() < 1e-6);
        assert!(d[0][1].abs() < 1e-6);
        assert!(d[0][0] < 1.0 && d[0][0] > 0.0);
    }

    /// `D11` of the `r = 0.3` circle from an `n = 512` run of this solver (tol `1e-12`).
    const FINE_GRID_D11: f64 = 0.559_184_919_047_825_6;

    #[test]
    fn coarse_grids_match_fine_grid_reference() {
        for n in [64, 128] {
            let g = PeriodicGrid::square(n).unwrap();
            let psi = init_levelset(g, &ShapeSpec::circle(0.5, 0.5, 0.3)).unwrap();
            let rho = heaviside_density(&psi, 1.5, 1e-3).unwrap();
            let d11 = tensor(&rho).d[0][0];
            assert!((d11 / FINE_GRID_D11 - 1.0).abs() < 0.02, "n={n}: {d11}");
        }
    }

    #[test]
    fn corrector_minimizes_energy() {
        let g = PeriodicGrid::square(32).unwrap();
        let psi = init_levelset(g, &ShapeSpec::circle(0.4, 0.6, 0.25)).unwrap();
        let rho = heaviside_density(&psi, 1.5, 1e-3).unwrap();
        let s = solve_cell_diffusion(&rho, 0, 1e-12).unwrap();
        let best = corrector_energy(&rho, 0, &s.corrector, 1e-3);
        for t in 1..=5 {
            let q = ScalarField::from_fn(g, |x, y| {
                0.02 * t as f64 * ((2.0 * std::f64::consts::PI * (x + t as f64 * y)).sin())
            });
            let trial: Vec<f64> = s
                .corrector
                .values()
                .iter()
                .zip(q.values())
                .map(|(a, b)| a + b)
                .collect();
            let e = corrector_energy(&rho, 0, &CellField::new(g, trial).unwrap(), 1e-3);
            assert!(e >= best);
        }
    }
}
