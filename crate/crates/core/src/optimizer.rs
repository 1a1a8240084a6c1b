//! Augmented-Lagrangian perimeter maximization under the fill and permeability constraints
//!
//! ```text
//! maximize |∂ω|  subject to  g₁ = C_f|∂ω| - |ω| ≤ 0,  g₂ = k_min - tr(K)/d ≤ 0
//! ```
//!
//! One iteration solves the cell problems, assembles the ascent velocity of
//! `L = |∂ω| + ℓ·g - (μ/2)|g|²`, advects the level set with a backtracking step, then
//! updates `ℓ ← ℓ - μ g` and grows `μ` on a fixed cadence.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diffusion::{
    diffusion_tensor, solve_all_diffusion, DiffusionCellSolution, DiffusionOptions, DiffusionTensor,
};
use crate::error::{Error, Result};
use crate::grid::{Boundary, PeriodicGrid};
use crate::levelset::{
    advect, heaviside_density, init_levelset, max_stable_dt, measure, reinitialize, DensityField,
    LevelSet, MeasureMethod, ShapeMeasures, ShapeSpec, TransportOptions, DEFAULT_HALF_WIDTH,
};
use crate::shape_gradient::{
    assemble_lagrangian_velocity, constraint_residuals, lagrangian_value, Extension, GradientForm,
    GradientIntegrand, VelocityOptions,
};
use crate::stokes::{
    permeability, AdjointMode, NormalProbe, PermeabilityForm, PermeabilityTensor,
    StokesCellSolution, StokesOperator,
};

/// Smoothed-extension length used by the optimizer, in grid lengths.
pub const OPT_SMOOTHING_LENGTH: f64 = 8.0;

/// Largest admissible fill coefficient, `√(1/(4π))`, from the isoperimetric inequality.
pub fn max_fill_coefficient() -> f64 {
    (1.0 / (4.0 * std::f64::consts::PI)).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constraints {
    pub c_f: f64,
    pub k_min: f64,
}

impl Default for Constraints {
    fn default() -> Self {
        Self {
            c_f: 0.15,
            k_min: 0.011,
        }
    }
}

/// Multipliers `ℓ`, penalties `μ` and the iteration counter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LagrangianState {
    pub l: [f64; 2],
    pub mu: [f64; 2],
    /// Number of completed iterations.
    pub iteration: usize,
    /// Fraction of the CFL step tried first on the next iteration.
    #[serde(default = "one")]
    pub step_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for LagrangianState {
    fn default() -> Self {
        Self {
            l: [0.0, 0.0],
            mu: [10.0, 1.0e4],
            iteration: 0,
            step_scale: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptConfig {
    pub n: usize,
    pub shape: ShapeSpec,
    pub constraints: Constraints,
    pub delta: f64,
    pub max_iters: usize,
    pub cfl: f64,
    pub reinit_every: usize,
    pub reinit_steps: usize,
    pub l0: [f64; 2],
    pub mu0: [f64; 2],
    pub gamma: f64,
    pub penalty_every: usize,
    pub step_shrink: f64,
    pub step_grow: f64,
    pub max_backtracks: usize,
    /// Ascent steps per iteration between multiplier updates.
    pub inner_steps: usize,
    /// A step of length `dt` is accepted when `L` grows by at least
    /// `armijo * dt * ∫ T V ds`.
    pub armijo: f64,
    pub tol_g: f64,
    pub tol_l: f64,
    pub window: usize,
    pub solver_tol: f64,
    pub extension: Extension,
    /// Smoothed-extension length in grid lengths.
    pub smoothing_length: f64,
    pub gradient: GradientForm,
    pub adjoint: AdjointMode,
    pub boundary: Boundary,
    /// Project multipliers onto `ℓ ≤ 0`, the sign of inequality multipliers in this convention.
    pub clamp_multipliers: bool,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self {
            n: 128,
            shape: ShapeSpec::circle(0.5, 0.5, 0.3),
            constraints: Constraints::default(),
            delta: crate::levelset::DEFAULT_DELTA,
            max_iters: 200,
            cfl: crate::levelset::DEFAULT_CFL,
            reinit_every: 5,
            reinit_steps: crate::levelset::DEFAULT_REINIT_STEPS,
            l0: [0.0, 0.0],
            mu0: [10.0, 1.0e4],
            gamma: 1.5,
            penalty_every: 5,
            step_shrink: 0.5,
            step_grow: 2.0,
            max_backtracks: 10,
            inner_steps: 5,
            armijo: 0.3,
            tol_g: 1e-2,
            tol_l: 1e-4,
            window: 10,
            solver_tol: crate::stokes::DEFAULT_TOL,
            extension: Extension::Smoothed,
            smoothing_length: OPT_SMOOTHING_LENGTH,
            gradient: GradientForm::Penalized,
            adjoint: AdjointMode::Fast,
            boundary: Boundary::Periodic,
            clamp_multipliers: false,
        }
    }
}

impl OptConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        PeriodicGrid::square(self.n)?;
        self.shape.validate()?;
        let c = self.constraints;
        if !(0.0..=max_fill_coefficient()).contains(&c.c_f) {
            return bad(format!(
                "c_f = {} outside [0, {:.5}] (isoperimetric bound)",
                c.c_f,
                max_fill_coefficient()
            ));
        }
        if !(c.k_min >= 0.0 && c.k_min.is_finite()) {
            return bad(format!("k_min = {} must be non-negative", c.k_min));
        }
        if !(self.delta >= crate::stokes::MIN_DENSITY_FLOOR && self.delta < 1.0) {
            return bad(format!("delta = {} outside [1e-6, 1)", self.delta));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad(format!("cfl = {} outside (0, 1]", self.cfl));
        }
        if self.reinit_every == 0
            || self.penalty_every == 0
            || self.window == 0
            || self.inner_steps == 0
        {
            return bad(
                "reinit_every, penalty_every, window and inner_steps must be positive".into(),
            );
        }
        if !(self.mu0.iter().all(|m| *m > 0.0 && m.is_finite())) {
            return bad(format!("mu0 = {:?} must be positive", self.mu0));
        }
        if !self.l0.iter().all(|l| l.is_finite()) {
            return bad(format!("l0 = {:?} must be finite", self.l0));
        }
        if !(self.gamma >= 1.0 && self.gamma.is_finite()) {
            return bad(format!("gamma = {} must be at least 1", self.gamma));
        }
        if !(self.step_shrink > 0.0 && self.step_shrink < 1.0) {
            return bad(format!("step_shrink = {} outside (0, 1)", self.step_shrink));
        }
        if !(self.step_grow >= 1.0 && self.step_grow.is_finite()) {
            return bad(format!("step_grow = {} must be at least 1", self.step_grow));
        }
        if !(0.0..1.0).contains(&self.armijo) {
            return bad(format!("armijo = {} outside [0, 1)", self.armijo));
        }
        if !(self.tol_g > 0.0 && self.tol_l > 0.0) {
            return bad("tol_g and tol_l must be positive".into());
        }
        if !(self.solver_tol > 0.0 && self.solver_tol < 1.0) {
            return bad(format!("solver_tol = {} outside (0, 1)", self.solver_tol));
        }
        Ok(())
    }

    /// SHA-256 of the configuration with `max_iters` zeroed, as lowercase hex.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.max_iters = 0;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn grid(&self) -> Result<PeriodicGrid> {
        PeriodicGrid::square(self.n)
    }

    pub fn initial_state(&self) -> LagrangianState {
        LagrangianState {
            l: self.l0,
            mu: self.mu0,
            iteration: 0,
            step_scale: 1.0,
        }
    }

    fn transport(&self) -> TransportOptions {
        TransportOptions {
            cfl: self.cfl,
            boundary: self.boundary,
        }
    }
}

/// One row of the optimization history: the shape seen by the multiplier update of
/// iteration `n` and the multipliers before that update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub n: usize,
    pub perimeter: f64,
    pub area: f64,
    pub trk_over_d: f64,
    pub g1: f64,
    pub g2: f64,
    pub l1: f64,
    pub l2: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub lagrangian: f64,
    pub dt: f64,
    pub reinit: bool,
    /// No trial step increased `L`; the smallest step was taken anyway.
    pub stagnated: bool,
}

impl ConvergenceRecord {
    pub const COLUMNS: [&'static str; 14] = [
        "n",
        "perimeter",
        "area",
        "trk_over_d",
        "g1",
        "g2",
        "l1",
        "l2",
        "mu1",
        "mu2",
        "lagrangian",
        "dt",
        "reinit",
        "stagnated",
    ];

    pub fn is_finite(&self) -> bool {
        [
            self.perimeter,
            self.area,
            self.trk_over_d,
            self.g1,
            self.g2,
            self.l1,
            self.l2,
            self.mu1,
            self.mu2,
            self.lagrangian,
            self.dt,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Cell solves and measures for one level set.
struct Evaluation {
    rho: DensityField,
    operator: StokesOperator,
    states: Vec<StokesCellSolution>,
    measures: ShapeMeasures,
    trk_over_d: f64,
}

fn evaluate(psi: &LevelSet, config: &OptConfig) -> Result<Evaluation> {
    let rho = heaviside_density(psi, DEFAULT_HALF_WIDTH, config.delta)?;
    let operator = StokesOperator::new(&rho)?;
    let states = operator.solve_all(config.solver_tol)?;
    let k = permeability(&states, &rho, PermeabilityForm::Energy)?;
    Ok(Evaluation {
        rho,
        operator,
        states,
        measures: measure(psi, MeasureMethod::SmoothedDelta),
        trk_over_d: k.trace_over_d(),
    })
}

/// Iterate state: current level set, multipliers, history and a cached evaluation of the
/// current level set when the last step produced it.
pub struct Optimizer {
    config: OptConfig,
    psi: LevelSet,
    state: LagrangianState,
    history: Vec<ConvergenceRecord>,
    cache: Option<Evaluation>,
}

impl Optimizer {
    pub fn new(config: OptConfig) -> Result<Self> {
        config.validate()?;
        let psi = init_levelset(config.grid()?, &config.shape)?;
        Ok(Self {
            state: config.initial_state(),
            config,
            psi,
            history: Vec::new(),
            cache: None,
        })
    }

    /// Continues from a checkpoint. A different configuration hash is rejected unless
    /// `allow_config_change` is set; a different grid is always rejected.
    pub fn from_checkpoint(
        config: OptConfig,
        checkpoint: Checkpoint,
        allow_config_change: bool,
    ) -> Result<Self> {
        config.validate()?;
        if checkpoint.n != config.n {
            return Err(Error::Checkpoint(format!(
                "checkpoint grid is {0}x{0}, configuration asks for {1}x{1}",
                checkpoint.n, config.n
            )));
        }
        let hash = config.hash();
        if checkpoint.config_hash != hash && !allow_config_change {
            return Err(Error::Checkpoint(format!(
                "configuration hash {hash} differs from checkpoint {}",
                checkpoint.config_hash
            )));
        }
        let psi = LevelSet::new(config.grid()?, checkpoint.psi)?;
        Ok(Self {
            config,
            psi,
            state: checkpoint.state,
            history: checkpoint.history,
            cache: None,
        })
    }

    pub fn config(&self) -> &OptConfig {
        &self.config
    }

    pub fn psi(&self) -> &LevelSet {
        &self.psi
    }

    pub fn state(&self) -> &LagrangianState {
        &self.state
    }

    pub fn history(&self) -> &[ConvergenceRecord] {
        &self.history
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            n: self.config.n,
            h: self.psi.grid().h(),
            psi: self.psi.values().to_vec(),
            state: self.state.clone(),
            config_hash: self.config.hash(),
            history: self.history.clone(),
        }
    }

    /// True once the constraints hold within `tol_g` and `L` has changed by less than
    /// `tol_l` (relative) over the last `window` iterations.
    pub fn converged(&self) -> bool {
        let c = &self.config;
        let Some(last) = self.history.last() else {
            return false;
        };
        if last.g1.abs() > c.tol_g || last.g2.abs() > c.tol_g || self.history.len() <= c.window {
            return false;
        }
        let earlier = &self.history[self.history.len() - 1 - c.window];
        (last.lagrangian - earlier.lagrangian).abs() <= c.tol_l * last.lagrangian.abs()
    }

    pub fn finished(&self) -> bool {
        self.state.iteration >= self.config.max_iters || self.converged()
    }

    /// Runs one iteration and returns its history row.
    ///
    /// Up to `inner_steps` backtracking ascent steps are taken at fixed `ℓ, μ`; the
    /// multipliers are then updated from the residuals of the resulting shape.
    pub fn step(&mut self) -> Result<&ConvergenceRecord> {
        let c = self.config.clone();
        let n = self.state.iteration + 1;
        let (mut elapsed, mut stagnated) = (0.0, false);
        for sub in 0..c.inner_steps {
            let ev = self.take_evaluation()?;
            let (dt, stalled, gain, l_now) = self.ascent_step(ev)?;
            elapsed += dt;
            if stalled {
                stagnated = sub == 0;
                break;
            }
            if gain <= c.tol_l * l_now.abs() {
                break;
            }
        }

        let ev = self.take_evaluation()?;
        let g = constraint_residuals(&ev.measures, ev.trk_over_d, &c.constraints);
        let row = ConvergenceRecord {
            n,
            perimeter: ev.measures.perimeter,
            area: ev.measures.area,
            trk_over_d: ev.trk_over_d,
            g1: g[0],
            g2: g[1],
            l1: self.state.l[0],
            l2: self.state.l[1],
            mu1: self.state.mu[0],
            mu2: self.state.mu[1],
            lagrangian: lagrangian_value(&ev.measures, ev.trk_over_d, &self.state, &c.constraints),
            dt: elapsed,
            reinit: n.is_multiple_of(c.reinit_every),
            stagnated,
        };
        if !row.is_finite() {
            return Err(Error::NonFinite {
                component: format!("history row {n}"),
            });
        }

        for i in 0..2 {
            self.state.l[i] -= self.state.mu[i] * g[i];
            if c.clamp_multipliers {
                self.state.l[i] = self.state.l[i].min(0.0);
            }
        }
        if n.is_multiple_of(c.penalty_every) {
            self.state.mu = self.state.mu.map(|m| m * c.gamma);
        }
        self.state.iteration = n;

        if row.reinit {
            self.psi = reinitialize(&self.psi, c.reinit_steps, c.boundary).psi;
        } else {
            self.cache = Some(ev);
        }
        self.history.push(row);
        Ok(self.history.last().expect("row pushed"))
    }

    fn take_evaluation(&mut self) -> Result<Evaluation> {
        match self.cache.take() {
            Some(ev) => Ok(ev),
            None => evaluate(&self.psi, &self.config),
        }
    }

    /// One backtracking ascent step of `L` at fixed multipliers. Returns the step length,
    /// whether every trial failed the sufficient-increase test, the gain in `L` and `L`
    /// before the step.
    fn ascent_step(&mut self, ev: Evaluation) -> Result<(f64, bool, f64, f64)> {
        let c = &self.config;
        let l_now = lagrangian_value(&ev.measures, ev.trk_over_d, &self.state, &c.constraints);
        if !l_now.is_finite() {
            return Err(Error::NonFinite {
                component: "lagrangian".into(),
            });
        }
        let adjoints = ev
            .states
            .iter()
            .map(|s| ev.operator.solve_adjoint(s, c.solver_tol, c.adjoint))
            .collect::<Result<Vec<_>>>()?;
        let integrand = GradientIntegrand::new(
            &self.psi,
            &ev.rho,
            &ev.states,
            &adjoints,
            c.gradient,
            NormalProbe::default(),
        )?;
        let velocity = assemble_lagrangian_velocity(
            &self.psi,
            &ev.measures,
            ev.trk_over_d,
            &self.state,
            &c.constraints,
            &integrand,
            VelocityOptions {
                extension: c.extension,
                smoothing_length: c.smoothing_length,
            },
        )?;

        let dt_max = max_stable_dt(&velocity.field, c.cfl);
        if !dt_max.is_finite() {
            self.cache = Some(ev);
            return Ok((0.0, true, 0.0, l_now));
        }
        let mut dt = self.state.step_scale * dt_max;
        for attempt in 0..=c.max_backtracks {
            let trial = advect(&self.psi, &velocity.field, dt, c.transport())?;
            let trial_ev = evaluate(&trial, c)?;
            let l_trial = lagrangian_value(
                &trial_ev.measures,
                trial_ev.trk_over_d,
                &self.state,
                &c.constraints,
            );
            if l_trial - l_now > c.armijo * dt * velocity.ascent_rate {
                self.state.step_scale = (dt / dt_max * c.step_grow).min(1.0);
                self.psi = trial;
                self.cache = Some(trial_ev);
                return Ok((dt, false, l_trial - l_now, l_now));
            }
            if attempt < c.max_backtracks {
                dt *= c.step_shrink;
            }
        }
        self.state.step_scale = 1.0;
        self.cache = Some(ev);
        Ok((0.0, true, 0.0, l_now))
    }

    /// Measures and homogenized tensors of the current level set.
    pub fn finish(self) -> Result<RunResult> {
        let cell = analyze_cell(&self.psi, &self.config)?;
        let seed = init_levelset(self.config.grid()?, &self.config.shape)?;
        let initial_perimeter = measure(&seed, MeasureMethod::SmoothedDelta).perimeter;
        Ok(RunResult {
            converged: self.converged(),
            psi: self.psi,
            state: self.state,
            history: self.history,
            cell,
            initial_perimeter,
        })
    }
}

/// Both cell problems solved on one level set.
#[derive(Clone, Debug)]
pub struct CellAnalysis {
    pub rho: DensityField,
    pub stokes: Vec<StokesCellSolution>,
    pub correctors: Vec<DiffusionCellSolution>,
    pub permeability: PermeabilityTensor,
    pub diffusion: DiffusionTensor,
    pub measures: ShapeMeasures,
}

/// Density, Stokes and diffusion cell solutions, tensors and measures for `psi` with the
/// penalization and solver tolerance of `config`.
pub fn analyze_cell(psi: &LevelSet, config: &OptConfig) -> Result<CellAnalysis> {
    let rho = heaviside_density(psi, DEFAULT_HALF_WIDTH, config.delta)?;
    let stokes = StokesOperator::new(&rho)?.solve_all(config.solver_tol)?;
    let permeability = permeability(&stokes, &rho, PermeabilityForm::Energy)?;
    let correctors = solve_all_diffusion(&rho, DiffusionOptions::default())?;
    let diffusion = diffusion_tensor(&correctors, &rho)?;
    Ok(CellAnalysis {
        measures: measure(psi, MeasureMethod::SmoothedDelta),
        rho,
        stokes,
        correctors,
        permeability,
        diffusion,
    })
}

/// Free-function form of a single iteration; no evaluation is reused between calls.
pub fn step(
    psi: &LevelSet,
    state: &LagrangianState,
    config: &OptConfig,
) -> Result<(LevelSet, LagrangianState, ConvergenceRecord)> {
    config.grid()?.check_same(psi.grid())?;
    let mut opt = Optimizer {
        config: config.clone(),
        psi: psi.clone(),
        state: state.clone(),
        history: Vec::new(),
        cache: None,
    };
    let row = opt.step()?.clone();
    Ok((opt.psi, opt.state, row))
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub psi: LevelSet,
    pub state: LagrangianState,
    pub history: Vec<ConvergenceRecord>,
    /// Cell solutions, tensors and measures of the final level set.
    pub cell: CellAnalysis,
    pub initial_perimeter: f64,
    pub converged: bool,
}

impl RunResult {
    /// Relative perimeter increase over the starting shape.
    pub fn perimeter_gain(&self) -> f64 {
        self.cell.measures.perimeter / self.initial_perimeter - 1.0
    }

    pub fn residuals(&self, constraints: &Constraints) -> [f64; 2] {
        constraint_residuals(
            &self.cell.measures,
            self.cell.permeability.trace_over_d(),
            constraints,
        )
    }
}

/// A failed run: the error and the last state that completed an iteration.
#[derive(Debug)]
pub struct Aborted {
    pub error: Error,
    pub last_valid: Checkpoint,
}

impl std::fmt::Display for Aborted {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "optimization aborted after iteration {}: {}",
            self.last_valid.state.iteration, self.error
        )
    }
}

impl std::error::Error for Aborted {}

/// Steps until convergence or `max_iters`, calling `observer` after every iteration.
pub fn drive(
    mut opt: Optimizer,
    mut observer: impl FnMut(&Optimizer) -> Result<()>,
) -> std::result::Result<RunResult, Box<Aborted>> {
    let abort = |opt: &Optimizer, error| {
        Box::new(Aborted {
            error,
            last_valid: opt.checkpoint(),
        })
    };
    while !opt.finished() {
        let before = opt.checkpoint();
        if let Err(error) = opt.step() {
            return Err(Box::new(Aborted {
                error,
                last_valid: before,
            }));
        }
        if let Err(e) = observer(&opt) {
            return Err(abort(&opt, e));
        }
    }
    let last = opt.checkpoint();
    opt.finish().map_err(|error| {
        Box::new(Aborted {
            error,
            last_valid: last,
        })
    })
}

pub fn run(config: OptConfig) -> std::result::Result<RunResult, Box<Aborted>> {
    let opt = Optimizer::new(config).map_err(|error| {
        Box::new(Aborted {
            error,
            last_valid: Checkpoint::empty(),
        })
    })?;
    drive(opt, |_| Ok(()))
}

/// Loads `path` and continues up to `config.max_iters` total iterations.
pub fn resume(
    path: &Path,
    config: OptConfig,
    allow_config_change: bool,
) -> std::result::Result<RunResult, Box<Aborted>> {
    let start = Checkpoint::load(path)
        .and_then(|cp| Optimizer::from_checkpoint(config, cp, allow_config_change))
        .map_err(|error| {
            Box::new(Aborted {
                error,
                last_valid: Checkpoint::empty(),
            })
        })?;
    drive(start, |_| Ok(()))
}

const CHECKPOINT_FORMAT: &str = "microtube-checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

/// JSON checkpoint: grid, level-set values (row-major, `j * n + i`), Lagrangian state,
/// configuration hash and the history so far. Floats round-trip exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub n: usize,
    pub h: f64,
    pub psi: Vec<f64>,
    pub state: LagrangianState,
    pub config_hash: String,
    pub history: Vec<ConvergenceRecord>,
}

impl Checkpoint {
    fn empty() -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            n: 0,
            h: 0.0,
            psi: Vec::new(),
            state: LagrangianState::default(),
            config_hash: String::new(),
            history: Vec::new(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec(self).map_err(|e| Error::Checkpoint(e.to_string()))?;
        crate::io::write_atomic(path, &json)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let cp: Checkpoint =
            serde_json::from_slice(&bytes).map_err(|e| Error::format(path, e.to_string()))?;
        if cp.format != CHECKPOINT_FORMAT || cp.version != CHECKPOINT_VERSION {
            return Err(Error::format(
                path,
                format!("unsupported checkpoint {} v{}", cp.format, cp.version),
            ));
        }
        if cp.psi.len() != cp.n * cp.n {
            return Err(Error::format(
                path,
                format!(
                    "{} level-set values for a {}x{} grid",
                    cp.psi.len(),
                    cp.n,
                    cp.n
                ),
            ));
        }
        Ok(cp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(max_iters: usize) -> OptConfig {
        OptConfig {
            n: 48,
            max_iters,
            ..OptConfig::default()
        }
    }

    #[test]
    fn fill_coefficient_bound_is_checked() {
        let mut c = small(1);
        c.constraints.c_f = 0.29;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.constraints.c_f = max_fill_coefficient();
        c.validate().unwrap();
        assert!((max_fill_coefficient() - 0.28209).abs() < 1e-5);
    }

    #[test]
    fn hash_ignores_iteration_budget_only() {
        let a = small(5);
        assert_eq!(a.hash(), small(50).hash());
        let mut b = small(5);
        b.gamma = 2.0;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn multiplier_and_penalty_updates() {
        let mut c = small(5);
        c.penalty_every = 5;
        c.mu0 = [10.0, 10.0];
        let mut opt = Optimizer::new(c).unwrap();
        opt.state.l = [0.5, 0.0];
        for _ in 0..5 {
            let before = opt.state.clone();
            let row = opt.step().unwrap().clone();
            assert_eq!(opt.state.l[0], before.l[0] - before.mu[0] * row.g1);
            assert_eq!(opt.state.l[1], before.l[1] - before.mu[1] * row.g2);
            if row.n == 5 {
                assert_eq!(opt.state.mu, [15.0, 15.0]);
            } else {
                assert_eq!(opt.state.mu, [10.0, 10.0]);
            }
        }
    }

    #[test]
    fn unconstrained_step_increases_lagrangian() {
        let mut c = small(1);
        c.constraints = Constraints {
            c_f: 0.0,
            k_min: 0.0,
        };
        c.mu0 = [1e-12, 1e-12];
        let opt = Optimizer::new(c.clone()).unwrap();
        let before = measure(opt.psi(), MeasureMethod::SmoothedDelta).perimeter;
        let (psi, _, row) = step(opt.psi(), opt.state(), &c).unwrap();
        assert!(!row.stagnated);
        let after = measure(&psi, MeasureMethod::SmoothedDelta).perimeter;
        assert!(after > before);
        assert!((row.perimeter - after).abs() < 1e-12);
    }

    #[test]
    fn checkpoint_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut opt = Optimizer::new(small(2)).unwrap();
        opt.step().unwrap();
        let cp = opt.checkpoint();
        let path = dir.path().join("cp.json");
        cp.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), cp);
    }

    #[test]
    fn resume_rejects_other_grid_and_changed_config() {
        let cp = Optimizer::new(small(0)).unwrap().checkpoint();
        let mut other = small(0);
        other.n = 64;
        assert!(Optimizer::from_checkpoint(other, cp.clone(), true).is_err());
        let mut changed = small(0);
        changed.cfl = 0.25;
        assert!(Optimizer::from_checkpoint(changed.clone(), cp.clone(), false).is_err());
        assert!(Optimizer::from_checkpoint(changed, cp.clone(), true).is_ok());
        assert!(Optimizer::from_checkpoint(small(40), cp, false).is_ok());
    }

    #[test]
    fn zero_iterations_reports_initial_shape() {
        let r = run(small(0)).unwrap();
        assert!(r.history.is_empty());
        assert_eq!(r.perimeter_gain(), 0.0);
    }
}
