//! Brinkman-penalized periodic Stokes cell problems and the permeability tensor.
//!
//! For each direction `e_i` the cell problem is `-Δu + α(ρ) u + ∇p = e_i`, `div u = 0` on
//! the periodic unit cell with `α(ρ) = 5/(2ρ²)`, discretized on a staggered (MAC) grid:
//! x-velocities at `(i h, (j+1/2) h)`, y-velocities at `((i+1/2) h, j h)` and pressures at
//! cell centres `((i+1/2) h, (j+1/2) h)`.

mod normal;
mod operator;

use serde::{Deserialize, Serialize};

pub use normal::{interface_normal_derivative, NormalDerivative, NormalProbe, BAND_HALF_WIDTH};
pub use operator::{brinkman_coefficient, StokesOperator, MIN_DENSITY_FLOOR};

use crate::error::{Error, Result};
use crate::grid::{bilinear, PeriodicGrid, ScalarField};
use crate::levelset::DensityField;

/// Default relative residual of the full saddle-point system.
pub const DEFAULT_TOL: f64 = 1e-8;
const MAX_REFINEMENTS: usize = 20;

/// Anything that can be evaluated at an arbitrary point of the periodic cell.
pub trait PointSampler<const C: usize> {
    fn sample_point(&self, x: f64, y: f64) -> [f64; C];
}

impl PointSampler<1> for ScalarField {
    fn sample_point(&self, x: f64, y: f64) -> [f64; 1] {
        [self.sample(x, y)]
    }
}

impl<F: Fn(f64, f64) -> [f64; C], const C: usize> PointSampler<C> for F {
    fn sample_point(&self, x: f64, y: f64) -> [f64; C] {
        self(x, y)
    }
}

/// Face-normal velocity components on the MAC grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MacVelocity {
    grid: PeriodicGrid,
    ux: Vec<f64>,
    uy: Vec<f64>,
}

impl MacVelocity {
    pub fn new(grid: PeriodicGrid, ux: Vec<f64>, uy: Vec<f64>) -> Result<Self> {
        if ux.len() != grid.len() || uy.len() != grid.len() {
            return Err(Error::InvalidParameter(
                "velocity arrays do not match grid".into(),
            ));
        }
        Ok(Self { grid, ux, uy })
    }

    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self {
            grid,
            ux: vec![0.0; grid.len()],
            uy: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    /// x-components at `(i h, (j+1/2) h)`.
    pub fn ux(&self) -> &[f64] {
        &self.ux
    }

    /// y-components at `((i+1/2) h, j h)`.
    pub fn uy(&self) -> &[f64] {
        &self.uy
    }

    pub fn component(&self, c: usize) -> &[f64] {
        if c == 0 {
            &self.ux
        } else {
            &self.uy
        }
    }

    /// x-faces followed by y-faces.
    pub fn flatten(&self) -> Vec<f64> {
        self.ux.iter().chain(&self.uy).copied().collect()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            grid: self.grid,
            ux: self.ux.iter().map(|v| s * v).collect(),
            uy: self.uy.iter().map(|v| s * v).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.ux
            .iter()
            .chain(&self.uy)
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn l2_norm(&self) -> f64 {
        operator::norm(&self.flatten())
    }

    /// Velocity magnitude interpolated to the nodes.
    pub fn node_magnitude(&self) -> ScalarField {
        ScalarField::from_fn(self.grid, |x, y| {
            let [a, b] = self.sample_point(x, y);
            a.hypot(b)
        })
    }

    pub fn is_finite(&self) -> bool {
        self.ux.iter().chain(&self.uy).all(|v| v.is_finite())
    }
}

impl PointSampler<2> for MacVelocity {
    fn sample_point(&self, x: f64, y: f64) -> [f64; 2] {
        let n = self.grid.n();
        [
            bilinear(&self.ux, n, x, y, (0.0, 0.5)),
            bilinear(&self.uy, n, x, y, (0.5, 0.0)),
        ]
    }
}

/// Scalar on cell centres `((i+1/2) h, (j+1/2) h)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CellField {
    grid: PeriodicGrid,
    values: Vec<f64>,
}

impl CellField {
    pub fn new(grid: PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(
                "cell field does not match grid".into(),
            ));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn zero_mean(mut self) -> Self {
        let m = self.mean();
        self.values.iter_mut().for_each(|v| *v -= m);
        self
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| s * v).collect(),
        }
    }

    /// Values interpolated to the nodes.
    pub fn to_nodes(&self) -> ScalarField {
        ScalarField::from_fn(self.grid, |x, y| self.sample_point(x, y)[0])
    }
}

impl PointSampler<1> for CellField {
    fn sample_point(&self, x: f64, y: f64) -> [f64; 1] {
        [bilinear(&self.values, self.grid.n(), x, y, (0.5, 0.5))]
    }
}

/// Solution `(u_i, p_i)` of the cell problem driven by `e_i`.
#[derive(Clone, Debug)]
pub struct StokesCellSolution {
    /// Zero-based forcing direction.
    pub direction: usize,
    pub velocity: MacVelocity,
    pub pressure: CellField,
    pub residual: f64,
    pub iterations: usize,
}

/// Adjoint state `(U_i, P_i)` for the permeability trace.
#[derive(Clone, Debug)]
pub struct AdjointCellSolution {
    pub direction: usize,
    pub velocity: MacVelocity,
    pub pressure: CellField,
    pub residual: f64,
    pub mode: AdjointMode,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdjointMode {
    /// `U = -2u`, `P = 0`, which solves the adjoint system exactly.
    #[default]
    Fast,
    /// Solve the adjoint system independently.
    Verify,
}

fn forcing(grid: PeriodicGrid, direction: usize) -> Result<Vec<f64>> {
    if direction >= PeriodicGrid::DIM {
        return Err(Error::InvalidParameter(format!(
            "direction {direction} out of range for d = {}",
            PeriodicGrid::DIM
        )));
    }
    let h2 = grid.h() * grid.h();
    let nn = grid.len();
    Ok((0..2 * nn)
        .map(|v| if v / nn == direction { h2 } else { 0.0 })
        .collect())
}

impl StokesOperator {
    pub fn solve_direction(&self, direction: usize, tol: f64) -> Result<StokesCellSolution> {
        check_tol(tol)?;
        let f = forcing(*self.grid(), direction)?;
        let (velocity, pressure, residual, iterations) = self.solve(&f, tol, MAX_REFINEMENTS)?;
        Ok(StokesCellSolution {
            direction,
            velocity,
            pressure,
            residual,
            iterations,
        })
    }

    /// Adjoint of `tr K` for the state `state` (right-hand side `-2 A u`).
    pub fn solve_adjoint(
        &self,
        state: &StokesCellSolution,
        tol: f64,
        mode: AdjointMode,
    ) -> Result<AdjointCellSolution> {
        check_tol(tol)?;
        self.grid().check_same(state.velocity.grid())?;
        match mode {
            AdjointMode::Fast => Ok(AdjointCellSolution {
                direction: state.direction,
                velocity: state.velocity.scaled(-2.0),
                pressure: CellField::zeros(*self.grid()),
                residual: 2.0 * state.residual,
                mode,
            }),
            AdjointMode::Verify => {
                let f: Vec<f64> = self
                    .apply_velocity(&state.velocity.flatten())
                    .into_iter()
                    .map(|v| -2.0 * v)
                    .collect();
                let (velocity, pressure, residual, _) = self.solve(&f, tol, MAX_REFINEMENTS)?;
                Ok(AdjointCellSolution {
                    direction: state.direction,
                    velocity,
                    pressure,
                    residual,
                    mode,
                })
            }
        }
    }

    /// Solves every direction, concurrently, on the shared factorization.
    pub fn solve_all(&self, tol: f64) -> Result<Vec<StokesCellSolution>> {
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..PeriodicGrid::DIM)
                .map(|i| s.spawn(move || self.solve_direction(i, tol)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("cell solve panicked"))
                .collect()
        })
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )))
    }
}

/// Solves the cell problem for direction `i` (zero-based).
pub fn solve_cell_stokes(rho: &DensityField, i: usize, tol: f64) -> Result<StokesCellSolution> {
    StokesOperator::new(rho)?.solve_direction(i, tol)
}

/// Solves the adjoint problem for `state`.
pub fn solve_cell_adjoint(
    rho: &DensityField,
    state: &StokesCellSolution,
    tol: f64,
    mode: AdjointMode,
) -> Result<AdjointCellSolution> {
    rho.grid().check_same(state.velocity.grid())?;
    match mode {
        AdjointMode::Fast => {
            check_tol(tol)?;
            Ok(AdjointCellSolution {
                direction: state.direction,
                velocity: state.velocity.scaled(-2.0),
                pressure: CellField::zeros(*rho.grid()),
                residual: 2.0 * state.residual,
                mode,
            })
        }
        AdjointMode::Verify => StokesOperator::new(rho)?.solve_adjoint(state, tol, mode),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PermeabilityForm {
    /// `∫∇u_i:∇u_j + ∫α u_i·u_j` over the whole cell.
    #[default]
    Energy,
    /// `∫∇u_i:∇u_j` over the fluid region `ρ > 1/2` only.
    FluidGradient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PermeabilityTensor {
    pub k: [[f64; 2]; 2],
    pub form: PermeabilityForm,
    pub n: usize,
    pub delta: f64,
}

impl PermeabilityTensor {
    pub fn trace_over_d(&self) -> f64 {
        (self.k[0][0] + self.k[1][1]) / 2.0
    }

    pub fn max_abs(&self) -> f64 {
        self.k.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Permeability tensor from the `d` cell solutions on `rho`.
pub fn permeability(
    solutions: &[StokesCellSolution],
    rho: &DensityField,
    form: PermeabilityForm,
) -> Result<PermeabilityTensor> {
    if solutions.len() != PeriodicGrid::DIM {
        return Err(Error::Missing(format!(
            "need {} cell solutions, got {}",
            PeriodicGrid::DIM,
            solutions.len()
        )));
    }
    let grid = *rho.grid();
    for s in solutions {
        grid.check_same(s.velocity.grid())?;
    }
    let mut by_dir: [Option<&StokesCellSolution>; 2] = [None, None];
    for s in solutions {
        by_dir[s.direction.min(1)] = Some(s);
    }
    let [Some(s0), Some(s1)] = by_dir else {
        return Err(Error::Missing("cell solution for each direction".into()));
    };
    let u = [&s0.velocity, &s1.velocity];
    let (fx, fy) = rho.face_values();
    let h = grid.h();
    let mut k = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in a..2 {
            let v = bilinear_energy(grid, u[a], u[b], &fx, &fy, h, form);
            k[a][b] = v;
            k[b][a] = v;
        }
    }
    Ok(PermeabilityTensor {
        k,
        form,
        n: grid.n(),
        delta: rho.delta(),
    })
}

/// `Σ_edges Δa·Δb (+ h² Σ α a·b)` over both velocity components.
fn bilinear_energy(
    grid: PeriodicGrid,
    a: &MacVelocity,
    b: &MacVelocity,
    fx: &[f64],
    fy: &[f64],
    h: f64,
    form: PermeabilityForm,
) -> f64 {
    let n = grid.n();
    let mut total = 0.0;
    for (comp, faces) in [fx, fy].into_iter().enumerate() {
        let ua = a.component(comp);
        let ub = b.component(comp);
        for j in 0..n as isize {
            for i in 0..n as isize {
                let k = grid.wrapped(i, j);
                for nb in [grid.wrapped(i + 1, j), grid.wrapped(i, j + 1)] {
                    let include = match form {
                        PermeabilityForm::Energy => true,
                        PermeabilityForm::FluidGradient => 0.5 * (faces[k] + faces[nb]) > 0.5,
                    };
                    if include {
                        total += (ua[nb] - ua[k]) * (ub[nb] - ub[k]);
                    }
                }
                if form == PermeabilityForm::Energy {
                    total += h * h * brinkman_coefficient(faces[k]) * ua[k] * ub[k];
                }
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levelset::{heaviside_density, init_levelset, LevelSet, ShapeSpec};

    fn circle_rho(n: usize, r: f64, delta: f64) -> (LevelSet, DensityField) {
        let g = PeriodicGrid::square(n).unwrap();
        let psi = init_levelset(g, &ShapeSpec::circle(0.5, 0.5, r)).unwrap();
        let rho = heaviside_density(&psi, 1.5, delta).unwrap();
        (psi, rho)
    }

    #[test]
    fn empty_cell_gives_constant_flow() {
        let g = PeriodicGrid::square(16).unwrap();
        let rho = DensityField::uniform(g, 1.0, 1e-3).unwrap();
        let sols = StokesOperator::new(&rho).unwrap().solve_all(1e-10).unwrap();
        for s in &sols {
            let own = s.velocity.component(s.direction);
            let other = s.velocity.component(1 - s.direction);
            assert!(own.iter().all(|v| (v - 0.4).abs() < 1e-12));
            assert!(other.iter().all(|v| v.abs() < 1e-12));
            assert!(s.pressure.values().iter().all(|v| v.abs() < 1e-10));
        }
        let k = permeability(&sols, &rho, PermeabilityForm::Energy).unwrap();
        assert!((k.k[0][0] - 0.4).abs() < 1e-10 && (k.k[1][1] - 0.4).abs() < 1e-10);
        assert!(k.k[0][1].abs() < 1e-12);
    }

    #[test]
    fn all_solid_flow_is_penalized() {
        let g = PeriodicGrid::square(16).unwrap();
        let rho = DensityField::uniform(g, 1e-3, 1e-3).unwrap();
        let s = solve_cell_stokes(&rho, 0, 1e-10).unwrap();
        assert!(s.velocity.max_abs() <= 4e-7 * (1.0 + 1e-9));
    }

    #[test]
    fn energy_identity_and_divergence() {
        let (_, rho) = circle_rho(48, 0.3, 1e-3);
        let op = StokesOperator::new(&rho).unwrap();
        let s = op.solve_direction(0, 1e-10).unwrap();
        let u = s.velocity.flatten();
        let energy: f64 = u
            .iter()
            .zip(op.apply_velocity(&u))
            .map(|(a, b)| a * b)
            .sum();
        let h2 = rho.grid().h().powi(2);
        let work: f64 = s.velocity.ux().iter().sum::<f64>() * h2;
        assert!((energy - work).abs() <= 1e-8 * work);
        let div = op.apply_divergence(&u);
        let umax = s.velocity.max_abs();
        assert!(div.iter().all(|d| d.abs() <= 1e-9 * umax));
        assert!(s.pressure.mean().abs() < 1e-14);
    }

    #[test]
    fn circle_is_quarter_turn_symmetric_and_suppresses_interior_flow() {
        let (psi, rho) = circle_rho(128, 0.3, 1e-3);
        let op = StokesOperator::new(&rho).unwrap();
        let sols = op.solve_all(DEFAULT_TOL).unwrap();
        let k = permeability(&sols, &rho, PermeabilityForm::Energy).unwrap();
        assert!((k.k[0][0] - k.k[1][1]).abs() <= 1e-6 * k.k[0][0]);
        assert!(k.k[0][1].abs() <= 1e-6 * k.k[0][0]);
        let g = *psi.grid();
        let h = g.h();
        let ux = sols[0].velocity.ux();
        let (mut inside, mut outside) = (0.0f64, 0.0f64);
        for j in 0..g.n() {
            for i in 0..g.n() {
                // x-face between nodes (i, j) and (i, j + 1)
                let face_psi = 0.5 * (psi.get(i, j) + psi.get(i, (j + 1) % g.n()));
                let v = ux[g.index(i, j)].abs();
                if face_psi < -2.0 * h {
                    inside = inside.max(v);
                } else if face_psi > 0.0 {
                    outside = outside.max(v);
                }
            }
        }
        assert!(inside <= 1e-3 * outside, "{inside} vs {outside}");
    }

    #[test]
    fn verified_adjoint_matches_fast_path() {
        let (_, rho) = circle_rho(32, 0.3, 1e-3);
        let op = StokesOperator::new(&rho).unwrap();
        let s = op.solve_direction(1, 1e-8).unwrap();
        let adj = op.solve_adjoint(&s, 1e-8, AdjointMode::Verify).unwrap();
        let diff: f64 = adj
            .velocity
            .flatten()
            .iter()
            .zip(s.velocity.flatten())
            .map(|(a, b)| (a + 2.0 * b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(diff / s.velocity.l2_norm() <= 1e-7);
        assert!(adj.pressure.values().iter().all(|p| p.abs() < 1e-6));
    }

    #[test]
    fn zero_state_gives_zero_adjoint() {
        let g = PeriodicGrid::square(16).unwrap();
        let rho = DensityField::uniform(g, 1.0, 1e-3).unwrap();
        let state = StokesCellSolution {
            direction: 0,
            velocity: MacVelocity::zeros(g),
            pressure: CellField::zeros(g),
            residual: 0.0,
            iterations: 0,
        };
        for mode in [AdjointMode::Fast, AdjointMode::Verify] {
            let adj = solve_cell_adjoint(&rho, &state, 1e-8, mode).unwrap();
            assert_eq!(adj.velocity.max_abs(), 0.0);
        }
    }

    #[test]
    fn nested_circles_are_monotone() {
        let mut prev = f64::INFINITY;
        for r in [0.2, 0.3, 0.4] {
            let (_, rho) = circle_rho(32, r, 1e-3);
            let sols = StokesOperator::new(&rho)
                .unwrap()
                .solve_all(DEFAULT_TOL)
                .unwrap();
            let t = permeability(&sols, &rho, PermeabilityForm::Energy)
                .unwrap()
                .trace_over_d();
            assert!(t < prev);
            prev = t;
        }
    }
}
