//! Brinkman–Stokes operator on the periodic MAC grid.
//!
//! The momentum rows are scaled by `h^2`: `A u = 4u - Σ neighbours + h^2 α u` per velocity
//! component, `G p = h (p_right - p_left)` on each face and `B = G^T` is minus `h^2` times
//! the discrete divergence. Discretely divergence-free periodic fields are exactly
//! `u = curl φ + c` with a node stream function `φ` and a constant `c`, so the saddle-point
//! problem is solved in that basis as one sparse SPD system (`C^T A C`) by Cholesky. The
//! pressure is recovered afterwards from `B G p = B (b - A u)` by FFT.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use super::{CellField, MacVelocity};
use crate::error::{Error, Result};
use crate::grid::PeriodicGrid;
use crate::levelset::DensityField;
use crate::spectral::solve_poisson;

/// Smallest density floor accepted; below it `5/(2 rho^2)` exceeds `2.5e12`.
pub const MIN_DENSITY_FLOOR: f64 = 1e-6;

/// Inverse permeability of the Brinkman term.
#[inline]
pub fn brinkman_coefficient(rho: f64) -> f64 {
    2.5 / (rho * rho)
}

/// Symbolic factorizations depend only on the grid size.
fn symbolic_cache() -> &'static Mutex<HashMap<usize, SymbolicLlt<usize>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, SymbolicLlt<usize>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Reduced coordinates: `φ` at nodes `1..n²` (node 0 is the gauge), then `c_x`, `c_y`.
#[derive(Clone, Copy)]
struct Basis {
    n: usize,
}

impl Basis {
    fn nn(&self) -> usize {
        self.n * self.n
    }

    fn dim(&self) -> usize {
        self.nn() + 1
    }

    fn phi(&self, node: usize) -> Option<usize> {
        (node != 0).then(|| node - 1)
    }

    fn node(&self, i: isize, j: isize) -> usize {
        let n = self.n as isize;
        (j.rem_euclid(n) * n + i.rem_euclid(n)) as usize
    }

    /// Velocity dof `v` (x-faces first) as a combination of reduced unknowns.
    fn expand(&self, v: usize) -> ([(usize, f64); 3], usize) {
        let nn = self.nn();
        let mut out = [(0, 0.0); 3];
        let mut len = 0;
        let mut push = |entry: Option<usize>, c: f64| {
            if let Some(k) = entry {
                out[len] = (k, c);
                len += 1;
            }
        };
        if v < nn {
            let (i, j) = ((v % self.n) as isize, (v / self.n) as isize);
            push(self.phi(self.node(i, j + 1)), 1.0);
            push(self.phi(self.node(i, j)), -1.0);
            push(Some(nn - 1), 1.0);
        } else {
            let k = v - nn;
            let (i, j) = ((k % self.n) as isize, (k / self.n) as isize);
            push(self.phi(self.node(i + 1, j)), -1.0);
            push(self.phi(self.node(i, j)), 1.0);
            push(Some(nn), 1.0);
        }
        (out, len)
    }

    fn to_velocity(&self, x: &[f64]) -> Vec<f64> {
        (0..2 * self.nn())
            .map(|v| {
                let (e, len) = self.expand(v);
                e[..len].iter().map(|&(k, c)| c * x[k]).sum()
            })
            .collect()
    }

    fn restrict(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (v, &val) in u.iter().enumerate() {
            let (e, len) = self.expand(v);
            for &(k, c) in &e[..len] {
                out[k] += c * val;
            }
        }
        out
    }
}

/// Factorized Brinkman–Stokes operator for one density field.
pub struct StokesOperator {
    grid: PeriodicGrid,
    /// `h^2 α` on x-faces then y-faces.
    mass: Vec<f64>,
    llt: Llt<usize, f64>,
    basis: Basis,
}

impl StokesOperator {
    pub fn new(rho: &DensityField) -> Result<Self> {
        if rho.delta() < MIN_DENSITY_FLOOR || rho.min() < MIN_DENSITY_FLOOR {
            return Err(Error::DensityFloorTooSmall(rho.delta().min(rho.min())));
        }
        if !rho.is_finite() {
            return Err(Error::NonFinite {
                component: "density".into(),
            });
        }
        let grid = *rho.grid();
        let n = grid.n();
        let h = grid.h();
        let (fx, fy) = rho.face_values();
        let mass: Vec<f64> = fx
            .iter()
            .chain(&fy)
            .map(|&r| h * h * brinkman_coefficient(r))
            .collect();
        let basis = Basis { n };
        let nn = n * n;

        let mut triplets = Vec::with_capacity(50 * nn);
        for v in 0..2 * nn {
            let comp = v / nn;
            let k = v % nn;
            let (i, j) = ((k % n) as isize, (k / n) as isize);
            let (er, lr) = basis.expand(v);
            let neighbours = [
                (v, 4.0 + mass[v]),
                (comp * nn + basis.node(i + 1, j), -1.0),
                (comp * nn + basis.node(i - 1, j), -1.0),
                (comp * nn + basis.node(i, j + 1), -1.0),
                (comp * nn + basis.node(i, j - 1), -1.0),
            ];
            for (col, a) in neighbours {
                let (ec, lc) = basis.expand(col);
                for &(p, cp) in &er[..lr] {
                    for &(q, cq) in &ec[..lc] {
                        if p >= q {
                            triplets.push(Triplet::new(p, q, cp * a * cq));
                        }
                    }
                }
            }
        }
        let dim = basis.dim();
        let matrix = SparseColMat::<usize, f64>::try_new_from_triplets(dim, dim, &triplets)
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        let symbolic = {
            let mut cache = symbolic_cache().lock().unwrap_or_else(|e| e.into_inner());
            match cache.get(&n) {
                Some(s) => s.clone(),
                None => {
                    let s = SymbolicLlt::try_new(matrix.symbolic(), Side::Lower)
                        .map_err(|e| Error::Factorization(format!("{e:?}")))?;
                    cache.insert(n, s.clone());
                    s
                }
            }
        };
        let llt = Llt::try_new_with_symbolic(symbolic, matrix.as_ref(), Side::Lower)
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        Ok(Self {
            grid,
            mass,
            llt,
            basis,
        })
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    /// `A u` for a velocity stored as x-faces then y-faces.
    pub(crate) fn apply_velocity(&self, u: &[f64]) -> Vec<f64> {
        let n = self.grid.n();
        let nn = n * n;
        let b = self.basis;
        (0..2 * nn)
            .map(|v| {
                let comp = v / nn;
                let k = v % nn;
                let (i, j) = ((k % n) as isize, (k / n) as isize);
                let nb = u[comp * nn + b.node(i + 1, j)]
                    + u[comp * nn + b.node(i - 1, j)]
                    + u[comp * nn + b.node(i, j + 1)]
                    + u[comp * nn + b.node(i, j - 1)];
                (4.0 + self.mass[v]) * u[v] - nb
            })
            .collect()
    }

    /// `G p` for a cell-centred pressure.
    pub(crate) fn apply_gradient(&self, p: &[f64]) -> Vec<f64> {
        let n = self.grid.n();
        let h = self.grid.h();
        let b = self.basis;
        let mut out = Vec::with_capacity(2 * n * n);
        for comp in 0..2 {
            for j in 0..n as isize {
                for i in 0..n as isize {
                    let back = if comp == 0 {
                        b.node(i - 1, j)
                    } else {
                        b.node(i, j - 1)
                    };
                    out.push(h * (p[b.node(i, j)] - p[back]));
                }
            }
        }
        out
    }

    /// `B u` (minus `h^2` times the divergence at every cell).
    pub(crate) fn apply_divergence(&self, u: &[f64]) -> Vec<f64> {
        let n = self.grid.n();
        let nn = n * n;
        let h = self.grid.h();
        let b = self.basis;
        let mut out = Vec::with_capacity(nn);
        for j in 0..n as isize {
            for i in 0..n as isize {
                let k = b.node(i, j);
                out.push(h * (u[k] - u[b.node(i + 1, j)] + u[nn + k] - u[nn + b.node(i, j + 1)]));
            }
        }
        out
    }

    /// Solves `A u + G p = f`, `B u = 0` for a momentum right-hand side `f` (already scaled
    /// by `h^2`), refining until the relative residual of the full system is below `tol`.
    pub(crate) fn solve(
        &self,
        f: &[f64],
        tol: f64,
        max_refinements: usize,
    ) -> Result<(MacVelocity, CellField, f64, usize)> {
        let n = self.grid.n();
        let nn = n * n;
        let fnorm = norm(f);
        if fnorm == 0.0 {
            return Ok((
                MacVelocity::zeros(self.grid),
                CellField::zeros(self.grid),
                0.0,
                0,
            ));
        }
        let mut x = vec![0.0; self.basis.dim()];
        let mut r_reduced = self.basis.restrict(f);
        let mut residual = f64::INFINITY;
        for iteration in 1..=max_refinements.max(1) {
            let rhs = Mat::<f64>::from_fn(r_reduced.len(), 1, |k, _| r_reduced[k]);
            let dx = self.llt.solve(&rhs);
            for (k, xk) in x.iter_mut().enumerate() {
                *xk += dx[(k, 0)];
            }
            let u = self.basis.to_velocity(&x);
            let au = self.apply_velocity(&u);
            let r: Vec<f64> = f.iter().zip(&au).map(|(a, b)| a - b).collect();
            let p = solve_poisson(&self.apply_divergence(&r), n)
                .into_iter()
                .map(|v| v / (self.grid.h() * self.grid.h()))
                .collect::<Vec<_>>();
            let gp = self.apply_gradient(&p);
            let momentum: Vec<f64> = r.iter().zip(&gp).map(|(a, b)| a - b).collect();
            let continuity = self.apply_divergence(&u);
            residual = (norm(&momentum).powi(2) + norm(&continuity).powi(2)).sqrt() / fnorm;
            if !residual.is_finite() {
                return Err(Error::NonFinite {
                    component: "Stokes residual".into(),
                });
            }
            if residual <= tol {
                let velocity = MacVelocity::new(self.grid, u[..nn].to_vec(), u[nn..].to_vec())?;
                let pressure = CellField::new(self.grid, p)?.zero_mean();
                return Ok((velocity, pressure, residual, iteration));
            }
            r_reduced = self.basis.restrict(&r);
        }
        Err(Error::NotConverged {
            solver: "stokes",
            iterations: max_refinements,
            residual,
        })
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
