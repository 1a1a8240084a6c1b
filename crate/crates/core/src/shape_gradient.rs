//! Shape derivatives of perimeter, volume and `tr(K)/d`, the augmented-Lagrangian velocity,
//! and a finite-difference harness for checking them.
//!
//! A normal velocity `V > 0` moves the interface into the fluid. Boundary integrals are
//! evaluated as `∫_Γ f ds ≈ h² Σ f δ_ε(psi) |∇psi|`. With this orientation
//!
//! * `d|∂ω|[V] = ∫ H V ds`
//! * `d|ω|[V] = ∫ V ds`
//! * `d(tr K / d)[V] = -∫ g_K V ds` with `g_K = -(1/d) Σ_i [(∂u_i/∂n)² + ∂u_i/∂n · ∂U_i/∂n]`,
//!   which is `(1/d) Σ_i |∂u_i/∂n|²` for the adjoint `U_i = -2 u_i`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::levelset::{
    curvature, dirac, heaviside_density, measure, DensityField, LevelSet, MeasureMethod,
    ShapeMeasures, DEFAULT_HALF_WIDTH,
};
use crate::optimizer::{Constraints, LagrangianState};
use crate::spectral::{apply_multiplier, laplacian_symbol};
use crate::stokes::{
    interface_normal_derivative, permeability, AdjointCellSolution, AdjointMode, NormalProbe,
    PermeabilityForm, StokesCellSolution, StokesOperator, BAND_HALF_WIDTH,
};

/// Interface features with radius of curvature below this many cells raise a warning.
pub const MIN_FEATURE_CELLS: f64 = 5.0;

/// Default smoothing length of the regularized extension, in grid lengths.
pub const SMOOTHING_LENGTH: f64 = 2.0;

/// `δ_ε(psi) |∇psi|` at every node.
pub fn interface_weight(psi: &LevelSet) -> Vec<f64> {
    let g = *psi.grid();
    let eps = DEFAULT_HALF_WIDTH * g.h();
    let n = g.n();
    let mut w = Vec::with_capacity(g.len());
    for j in 0..n {
        for i in 0..n {
            let s = psi.get(i, j);
            w.push(if s.abs() < eps {
                let gr = psi.gradient(i, j);
                dirac(s, eps) * gr[0].hypot(gr[1])
            } else {
                0.0
            });
        }
    }
    w
}

/// `∫_Γ f ds` by smoothed-delta quadrature.
pub fn boundary_integral(psi: &LevelSet, f: &[f64]) -> f64 {
    let h = psi.grid().h();
    interface_weight(psi)
        .iter()
        .zip(f)
        .map(|(w, v)| w * v)
        .sum::<f64>()
        * h
        * h
}

/// Nodes within the interface band `|psi| < 1.5 h`.
pub fn band_mask(psi: &LevelSet) -> Vec<bool> {
    let h = psi.grid().h();
    psi.values()
        .iter()
        .map(|v| v.abs() < BAND_HALF_WIDTH * h)
        .collect()
}

/// Perimeter integrand: the mean curvature at each node (meaningful on the band).
pub fn perimeter_gradient(psi: &LevelSet) -> ScalarField {
    curvature(psi)
}

/// Volume integrand: one.
pub fn volume_gradient(psi: &LevelSet) -> ScalarField {
    ScalarField::constant(*psi.grid(), 1.0)
}

/// Evaluates `field` at the interface point closest to each node.
pub fn extend_closest_point(field: &ScalarField, psi: &LevelSet) -> ScalarField {
    let g = *psi.grid();
    let n = g.n();
    let mut out = Vec::with_capacity(g.len());
    for j in 0..n {
        for i in 0..n {
            out.push(match psi.project_to_interface(i, j) {
                Some((p, _)) => field.sample(p[0], p[1]),
                None => field.get(i, j),
            });
        }
    }
    ScalarField::new(g, out).expect("same grid")
}

/// Permeability integrand `g_K` at the interface point closest to each node.
pub fn permeability_gradient(
    psi: &LevelSet,
    states: &[StokesCellSolution],
    adjoints: &[AdjointCellSolution],
    probe: NormalProbe,
) -> Result<ScalarField> {
    if states.is_empty() {
        return Err(Error::Missing("cell solutions".into()));
    }
    let g = *psi.grid();
    let d = states.len() as f64;
    let mut total = vec![0.0; g.len()];
    for s in states {
        g.check_same(s.velocity.grid())?;
        let adj = adjoint_for(adjoints, s.direction)?;
        let du = interface_normal_derivative(&s.velocity, psi, probe);
        let dadj = interface_normal_derivative(&adj.velocity, psi, probe);
        for (k, t) in total.iter_mut().enumerate() {
            let a = du.values[k];
            let b = dadj.values[k];
            *t -= (a[0] * a[0] + a[1] * a[1] + a[0] * b[0] + a[1] * b[1]) / d;
        }
    }
    if let Some(k) = total.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            component: format!("permeability integrand at node {k}"),
        });
    }
    ScalarField::new(g, total)
}

fn adjoint_for(adjoints: &[AdjointCellSolution], direction: usize) -> Result<&AdjointCellSolution> {
    adjoints
        .iter()
        .find(|a| a.direction == direction)
        .ok_or_else(|| Error::Missing(format!("adjoint for direction {direction}")))
}

/// Node density `G` with `d(tr K/d)/dpsi = h² G δ_ε(psi)` for the penalized discrete
/// problem: `G = -(1/d) Σ_i Σ_{faces ∋ node} ½ (1-δ) 5/ρ_f³ (u_f² + u_f U_f)`.
pub fn penalized_permeability_density(
    rho: &DensityField,
    states: &[StokesCellSolution],
    adjoints: &[AdjointCellSolution],
) -> Result<ScalarField> {
    if states.is_empty() {
        return Err(Error::Missing("cell solutions".into()));
    }
    let g = *rho.grid();
    let n = g.n();
    let d = states.len() as f64;
    let scale = 0.5 * (1.0 - rho.delta()) * 5.0;
    let (fx, fy) = rho.face_values();
    let mut total = vec![0.0; g.len()];
    for s in states {
        g.check_same(s.velocity.grid())?;
        let adj = adjoint_for(adjoints, s.direction)?;
        for (comp, faces) in [&fx, &fy].into_iter().enumerate() {
            let u = s.velocity.component(comp);
            let w = adj.velocity.component(comp);
            for j in 0..n {
                for i in 0..n {
                    let k = g.index(i, j);
                    let other = if comp == 0 {
                        g.index(i, (j + 1) % n)
                    } else {
                        g.index((i + 1) % n, j)
                    };
                    let c = -scale / faces[k].powi(3) * (u[k] * u[k] + u[k] * w[k]) / d;
                    total[k] += c;
                    total[other] += c;
                }
            }
        }
    }
    ScalarField::new(g, total)
}

/// Per-length interface density of the penalized permeability derivative,
/// `g_K(x_Γ) = ∫ (G δ_ε(psi))(x_Γ + t n) dt`, at the interface point closest to each node.
pub fn penalized_permeability_gradient(
    psi: &LevelSet,
    rho: &DensityField,
    states: &[StokesCellSolution],
    adjoints: &[AdjointCellSolution],
) -> Result<ScalarField> {
    let g = *psi.grid();
    let n = g.n();
    let h = g.h();
    let eps = DEFAULT_HALF_WIDTH * h;
    let density = penalized_permeability_density(rho, states, adjoints)?;
    let weighted = ScalarField::new(
        g,
        density
            .values()
            .iter()
            .zip(psi.values())
            .map(|(d, p)| d * dirac(*p, eps))
            .collect(),
    )?;
    const PANELS: usize = 16;
    let reach = eps + h;
    let dt = 2.0 * reach / PANELS as f64;
    let mut out = Vec::with_capacity(g.len());
    for j in 0..n {
        for i in 0..n {
            let Some((p, nv)) = psi.project_to_interface(i, j) else {
                out.push(0.0);
                continue;
            };
            let mut acc = 0.0;
            for q in 0..=PANELS {
                let t = -reach + q as f64 * dt;
                let w = match q {
                    0 | PANELS => 1.0,
                    q if q % 2 == 1 => 4.0,
                    _ => 2.0,
                };
                acc += w * weighted.sample(p[0] + t * nv[0], p[1] + t * nv[1]);
            }
            out.push(acc * dt / 3.0);
        }
    }
    if let Some(k) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            component: format!("permeability integrand at node {k}"),
        });
    }
    ScalarField::new(g, out)
}

/// Discretization of the permeability shape derivative.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradientForm {
    /// Exact derivative of the penalized discrete problem, collapsed onto the interface.
    #[default]
    Penalized,
    /// Sharp-interface normal derivatives of the cell and adjoint velocities.
    Boundary,
}

/// How the interface velocity is continued off the interface.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extension {
    /// The velocity formula evaluated at every node with closest-point integrands.
    #[default]
    Natural,
    /// `(I - α²Δ)⁻¹(V δ|∇psi|)` normalized by `(I - α²Δ)⁻¹(δ|∇psi|)`; `α` is the smoothing length.
    Smoothed,
}

/// Extension method and, for the smoothed extension, the length `α` in grid lengths.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VelocityOptions {
    pub extension: Extension,
    pub smoothing_length: f64,
}

impl Default for VelocityOptions {
    fn default() -> Self {
        Self {
            extension: Extension::Natural,
            smoothing_length: SMOOTHING_LENGTH,
        }
    }
}

impl From<Extension> for VelocityOptions {
    fn from(extension: Extension) -> Self {
        Self {
            extension,
            ..Self::default()
        }
    }
}

/// Integrands entering the Lagrangian velocity, extended to every node.
#[derive(Clone, Debug)]
pub struct GradientIntegrand {
    /// Mean curvature `H` at the closest interface point.
    pub curvature: ScalarField,
    /// `g_K` at the closest interface point.
    pub permeability: ScalarField,
    /// Set when some band curvature exceeds `1 / (5h)`.
    pub small_feature: bool,
}

impl GradientIntegrand {
    pub fn new(
        psi: &LevelSet,
        rho: &DensityField,
        states: &[StokesCellSolution],
        adjoints: &[AdjointCellSolution],
        form: GradientForm,
        probe: NormalProbe,
    ) -> Result<Self> {
        let kappa = perimeter_gradient(psi);
        let h = psi.grid().h();
        let small_feature = band_mask(psi)
            .iter()
            .zip(kappa.values())
            .any(|(&b, k)| b && k.abs() > 1.0 / (MIN_FEATURE_CELLS * h));
        Ok(Self {
            curvature: extend_closest_point(&kappa, psi),
            permeability: match form {
                GradientForm::Penalized => {
                    penalized_permeability_gradient(psi, rho, states, adjoints)?
                }
                GradientForm::Boundary => permeability_gradient(psi, states, adjoints, probe)?,
            },
            small_feature,
        })
    }
}

/// Scalar normal velocity on every node.
#[derive(Clone, Debug)]
pub struct VelocityField {
    pub field: ScalarField,
    pub extension: Extension,
    pub max_abs: f64,
    /// Predicted rate of increase of `L` along the field, `∫ T V ds`.
    pub ascent_rate: f64,
    pub small_feature: bool,
}

/// Constraint residuals `g₁ = C_f|∂ω| - |ω|` and `g₂ = k_min - tr(K)/d`.
pub fn constraint_residuals(
    measures: &ShapeMeasures,
    trk_over_d: f64,
    c: &Constraints,
) -> [f64; 2] {
    [
        c.c_f * measures.perimeter - measures.area,
        c.k_min - trk_over_d,
    ]
}

/// Coefficients `(a, b, c)` of `T = a H + b + c g_K`.
pub fn lagrangian_coefficients(
    residuals: [f64; 2],
    state: &LagrangianState,
    c: &Constraints,
) -> [f64; 3] {
    let [g1, g2] = residuals;
    let w1 = state.l[0] - state.mu[0] * g1;
    let w2 = state.l[1] - state.mu[1] * g2;
    [1.0 + w1 * c.c_f, -w1, w2]
}

/// The ascent velocity `V = T` of `L = |∂ω| + ℓ·g - (μ/2)|g|²`.
pub fn assemble_lagrangian_velocity(
    psi: &LevelSet,
    measures: &ShapeMeasures,
    trk_over_d: f64,
    state: &LagrangianState,
    constraints: &Constraints,
    integrand: &GradientIntegrand,
    options: impl Into<VelocityOptions>,
) -> Result<VelocityField> {
    let options = options.into();
    if !(options.smoothing_length > 0.0 && options.smoothing_length.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "smoothing length {} must be positive",
            options.smoothing_length
        )));
    }
    let g = *psi.grid();
    g.check_same(integrand.curvature.grid())?;
    for (name, v) in [
        ("perimeter", measures.perimeter),
        ("area", measures.area),
        ("permeability trace", trk_over_d),
        ("multiplier", state.l[0] + state.l[1]),
        ("penalty", state.mu[0] + state.mu[1]),
    ] {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                component: name.into(),
            });
        }
    }
    for (name, f) in [
        ("curvature integrand", &integrand.curvature),
        ("permeability integrand", &integrand.permeability),
    ] {
        if !f.is_finite() {
            return Err(Error::NonFinite {
                component: name.into(),
            });
        }
    }
    let [a, b, c] = lagrangian_coefficients(
        constraint_residuals(measures, trk_over_d, constraints),
        state,
        constraints,
    );
    let natural: Vec<f64> = integrand
        .curvature
        .values()
        .iter()
        .zip(integrand.permeability.values())
        .map(|(h, gk)| a * h + b + c * gk)
        .collect();
    let mut values = match options.extension {
        Extension::Natural => natural.clone(),
        Extension::Smoothed => smooth_extension(psi, &natural, options.smoothing_length),
    };
    clamp_to_band(psi, &mut values);
    let field = ScalarField::new(g, values)?;
    if !field.is_finite() {
        return Err(Error::NonFinite {
            component: "velocity".into(),
        });
    }
    let product: Vec<f64> = natural
        .iter()
        .zip(field.values())
        .map(|(t, v)| t * v)
        .collect();
    Ok(VelocityField {
        max_abs: field.max_abs(),
        ascent_rate: boundary_integral(psi, &product),
        field,
        extension: options.extension,
        small_feature: integrand.small_feature,
    })
}

/// Bounds off-band values by the band maximum so that nodes far from the interface, where
/// closest points and curvature are unreliable, do not dictate the time step.
fn clamp_to_band(psi: &LevelSet, v: &mut [f64]) {
    let band = band_mask(psi);
    let vmax = v
        .iter()
        .zip(&band)
        .filter(|(_, &b)| b)
        .fold(0.0f64, |m, (x, _)| m.max(x.abs()));
    if band.iter().any(|&b| b) {
        for (x, &b) in v.iter_mut().zip(&band) {
            if !b {
                *x = x.clamp(-vmax, vmax);
            }
        }
    }
}

fn smooth_extension(psi: &LevelSet, v: &[f64], length: f64) -> Vec<f64> {
    let g = *psi.grid();
    let n = g.n();
    let w = interface_weight(psi);
    let weighted: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a * b).collect();
    let a2 = length * length;
    let symbol = |kx: usize, ky: usize| 1.0 / (1.0 + a2 * laplacian_symbol(kx, ky, n));
    let num = apply_multiplier(&weighted, n, symbol);
    let den = apply_multiplier(&w, n, symbol);
    let eta = 1e-4 * den.iter().fold(0.0f64, |m, x| m.max(*x));
    num.iter().zip(&den).map(|(a, b)| a / (b + eta)).collect()
}

/// Shape functionals the finite-difference harness can check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Functional {
    Perimeter,
    Volume,
    #[serde(rename = "trk")]
    PermeabilityTrace,
    Lagrangian,
}

impl Functional {
    pub fn name(self) -> &'static str {
        match self {
            Functional::Perimeter => "perimeter",
            Functional::Volume => "volume",
            Functional::PermeabilityTrace => "trk",
            Functional::Lagrangian => "lagrangian",
        }
    }

    /// Largest acceptable relative error of the shape derivative.
    pub fn threshold(self) -> f64 {
        match self {
            Functional::Perimeter | Functional::Volume => 0.02,
            Functional::PermeabilityTrace | Functional::Lagrangian => 0.10,
        }
    }
}

/// Settings shared by functional evaluations in the harness.
#[derive(Clone, Debug)]
pub struct FdContext {
    pub delta: f64,
    pub tol: f64,
    pub form: GradientForm,
    pub probe: NormalProbe,
    pub constraints: Constraints,
    pub state: LagrangianState,
}

impl Default for FdContext {
    fn default() -> Self {
        Self {
            delta: crate::levelset::DEFAULT_DELTA,
            tol: 1e-10,
            form: GradientForm::default(),
            probe: NormalProbe::default(),
            constraints: Constraints::default(),
            state: LagrangianState::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdRow {
    pub eps: f64,
    pub quotient: f64,
    pub analytic: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdReport {
    pub functional: Functional,
    pub rows: Vec<FdRow>,
    /// Richardson extrapolation of the two smallest-`ε` quotients.
    pub extrapolated: f64,
    /// Self-convergence order of the quotients as `ε` halves (infinite when they agree to
    /// rounding).
    pub order: f64,
    pub best_rel_error: f64,
}

impl FdReport {
    pub fn passes(&self) -> bool {
        self.best_rel_error < self.functional.threshold()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("eps,quotient,analytic,rel_error\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{}", r.eps, r.quotient, r.analytic, r.rel_error);
        }
        s
    }
}

fn fast_adjoints(states: &[StokesCellSolution]) -> Vec<AdjointCellSolution> {
    states
        .iter()
        .map(|s| AdjointCellSolution {
            direction: s.direction,
            velocity: s.velocity.scaled(-2.0),
            pressure: s.pressure.scaled(0.0),
            residual: s.residual,
            mode: AdjointMode::Fast,
        })
        .collect()
}

struct CellEvaluation {
    rho: DensityField,
    states: Vec<StokesCellSolution>,
    trk_over_d: f64,
}

fn solve_cells(psi: &LevelSet, ctx: &FdContext) -> Result<CellEvaluation> {
    let rho = heaviside_density(psi, DEFAULT_HALF_WIDTH, ctx.delta)?;
    let states = StokesOperator::new(&rho)?.solve_all(ctx.tol)?;
    let k = permeability(&states, &rho, PermeabilityForm::Energy)?;
    Ok(CellEvaluation {
        rho,
        states,
        trk_over_d: k.trace_over_d(),
    })
}

fn evaluate(functional: Functional, psi: &LevelSet, ctx: &FdContext) -> Result<f64> {
    let m = measure(psi, MeasureMethod::SmoothedDelta);
    Ok(match functional {
        Functional::Perimeter => m.perimeter,
        Functional::Volume => m.area,
        Functional::PermeabilityTrace => solve_cells(psi, ctx)?.trk_over_d,
        Functional::Lagrangian => {
            let t = solve_cells(psi, ctx)?.trk_over_d;
            lagrangian_value(&m, t, &ctx.state, &ctx.constraints)
        }
    })
}

/// `L = |∂ω| + ℓ·g - (μ/2)|g|²`.
pub fn lagrangian_value(
    measures: &ShapeMeasures,
    trk_over_d: f64,
    state: &LagrangianState,
    constraints: &Constraints,
) -> f64 {
    let g = constraint_residuals(measures, trk_over_d, constraints);
    measures.perimeter + state.l[0] * g[0] + state.l[1] * g[1]
        - 0.5 * state.mu[0] * g[0] * g[0]
        - 0.5 * state.mu[1] * g[1] * g[1]
}

fn analytic_derivative(
    functional: Functional,
    psi: &LevelSet,
    direction: &ScalarField,
    ctx: &FdContext,
) -> Result<f64> {
    let theta = direction.values();
    let integrand: Vec<f64> = match functional {
        Functional::Perimeter => perimeter_gradient(psi).into_values(),
        Functional::Volume => volume_gradient(psi).into_values(),
        Functional::PermeabilityTrace | Functional::Lagrangian => {
            let cells = solve_cells(psi, ctx)?;
            let adjoints = fast_adjoints(&cells.states);
            let integrand = GradientIntegrand::new(
                psi,
                &cells.rho,
                &cells.states,
                &adjoints,
                ctx.form,
                ctx.probe,
            )?;
            if functional == Functional::PermeabilityTrace {
                integrand.permeability.values().iter().map(|v| -v).collect()
            } else {
                let m = measure(psi, MeasureMethod::SmoothedDelta);
                assemble_lagrangian_velocity(
                    psi,
                    &m,
                    cells.trk_over_d,
                    &ctx.state,
                    &ctx.constraints,
                    &integrand,
                    Extension::Natural,
                )?
                .field
                .into_values()
            }
        }
    };
    let product: Vec<f64> = integrand.iter().zip(theta).map(|(a, b)| a * b).collect();
    Ok(boundary_integral(psi, &product))
}

/// Compares central differences `(J(psi - εθ) - J(psi + εθ)) / 2ε` with `∫ T θ ds`.
pub fn validate_shape_derivative(
    functional: Functional,
    psi: &LevelSet,
    direction: &ScalarField,
    eps: &[f64],
    ctx: &FdContext,
) -> Result<FdReport> {
    if eps.len() < 2 {
        return Err(Error::InvalidParameter("need at least two ε values".into()));
    }
    psi.grid().check_same(direction.grid())?;
    let analytic = analytic_derivative(functional, psi, direction, ctx)?;
    let perturbed = |s: f64| {
        LevelSet::from_field(
            ScalarField::new(
                *psi.grid(),
                psi.values()
                    .iter()
                    .zip(direction.values())
                    .map(|(p, t)| p + s * t)
                    .collect(),
            )
            .expect("same grid"),
        )
    };
    let rel = |q: f64| (q - analytic).abs() / analytic.abs().max(f64::MIN_POSITIVE);
    let mut rows = Vec::with_capacity(eps.len());
    for &e in eps {
        let minus = evaluate(functional, &perturbed(-e), ctx)?;
        let plus = evaluate(functional, &perturbed(e), ctx)?;
        let quotient = (minus - plus) / (2.0 * e);
        rows.push(FdRow {
            eps: e,
            quotient,
            analytic,
            rel_error: rel(quotient),
        });
    }
    rows.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    let m = rows.len();
    let (q1, q2) = (rows[m - 2].quotient, rows[m - 1].quotient);
    let ratio = rows[m - 2].eps / rows[m - 1].eps;
    let extrapolated = q2 + (q2 - q1) / (ratio * ratio - 1.0);
    let scale = rows.iter().fold(0.0f64, |s, r| s.max(r.quotient.abs()));
    let order = if m >= 3 {
        let d1 = (rows[m - 3].quotient - q1).abs();
        let d2 = (q1 - q2).abs();
        if d2 <= 1e-12 * scale {
            f64::INFINITY
        } else {
            (d1 / d2).ln() / ratio.ln()
        }
    } else {
        f64::NAN
    };
    let best_rel_error = rows
        .iter()
        .map(|r| r.rel_error)
        .fold(rel(extrapolated), f64::min);
    Ok(FdReport {
        functional,
        rows,
        extrapolated,
        order,
        best_rel_error,
    })
}

/// Dyadic sweep `2^-first, ..., 2^-last`.
pub fn dyadic_sweep(first: i32, last: i32) -> Vec<f64> {
    (first..=last).map(|k| 2f64.powi(-k)).collect()
}

/// A fixed smooth, non-constant perturbation direction.
pub fn smooth_direction(grid: crate::grid::PeriodicGrid) -> ScalarField {
    use std::f64::consts::PI;
    ScalarField::from_fn(grid, |x, y| {
        1.0 + 0.4 * (2.0 * PI * x).sin() * (2.0 * PI * y).cos() + 0.3 * (4.0 * PI * (x + y)).cos()
    })
}
