//! Run configuration as a TOML document.
//!
//! ```toml
//! [grid]
//! n = 128
//! [shape]
//! kind = "circle"          # circle | ellipse | rect | band | empty | expr | mask
//! params = [0.5, 0.5, 0.3]
//! [constraints]
//! c_f = 0.15
//! k_min = 0.011
//! [brinkman]
//! delta = 1e-3
//! [hj]
//! cfl = 0.5
//! [al]
//! mu0 = [10.0, 1e4]
//! [output]
//! dir = "out"
//! ```
//!
//! Every key is optional and falls back to [`OptConfig::default`]. Unknown sections and
//! keys are rejected by name.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::raster::read_mask;
use crate::error::{Error, Result};
use crate::grid::Boundary;
use crate::levelset::{parse_shape, ShapeSpec};
use crate::optimizer::OptConfig;
use crate::shape_gradient::{Extension, GradientForm};

const SECTIONS: [(&str, &[&str]); 7] = [
    ("grid", &["n"]),
    ("shape", &["kind", "params", "axis", "expr", "path"]),
    ("constraints", &["c_f", "k_min"]),
    ("brinkman", &["delta"]),
    (
        "hj",
        &[
            "cfl",
            "reinit_every",
            "reinit_steps",
            "boundary",
            "extension",
            "smoothing_length",
            "gradient",
        ],
    ),
    (
        "al",
        &[
            "l0",
            "mu0",
            "gamma",
            "penalty_every",
            "tol_g",
            "tol_L",
            "window",
            "max_iters",
            "inner_steps",
            "armijo",
            "step_shrink",
            "step_grow",
            "max_backtracks",
            "clamp_multipliers",
        ],
    ),
    ("output", &["dir", "dump_every"]),
];

/// Iterations between checkpoints and field dumps when `[output] dump_every` is absent.
pub const DEFAULT_DUMP_EVERY: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// Iterations between checkpoints and field dumps; 0 writes only the final state.
    pub dump_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            dump_every: DEFAULT_DUMP_EVERY,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct RunConfig {
    pub optimizer: OptConfig,
    pub output: OutputConfig,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<GridSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    shape: Option<ShapeSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    constraints: Option<ConstraintSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    brinkman: Option<BrinkmanSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hj: Option<HjSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    al: Option<AlSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<OutputSection>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    n: Option<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShapeSection {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    params: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    axis: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    expr: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintSection {
    c_f: Option<f64>,
    k_min: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BrinkmanSection {
    delta: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HjSection {
    cfl: Option<f64>,
    reinit_every: Option<usize>,
    reinit_steps: Option<usize>,
    boundary: Option<Boundary>,
    extension: Option<Extension>,
    smoothing_length: Option<f64>,
    gradient: Option<GradientForm>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AlSection {
    l0: Option<[f64; 2]>,
    mu0: Option<[f64; 2]>,
    gamma: Option<f64>,
    penalty_every: Option<usize>,
    tol_g: Option<f64>,
    #[serde(rename = "tol_L")]
    tol_l: Option<f64>,
    window: Option<usize>,
    max_iters: Option<usize>,
    inner_steps: Option<usize>,
    armijo: Option<f64>,
    step_shrink: Option<f64>,
    step_grow: Option<f64>,
    max_backtracks: Option<usize>,
    clamp_multipliers: Option<bool>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    dir: Option<PathBuf>,
    dump_every: Option<usize>,
}

fn set<T>(target: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *target = v;
    }
}

/// Rejects sections and keys outside the schema, naming the offender.
fn check_keys(table: &toml::Table) -> Result<()> {
    for (section, body) in table {
        let Some((_, keys)) = SECTIONS.iter().find(|(name, _)| name == section) else {
            return Err(Error::Config(format!("unknown section [{section}]")));
        };
        let Some(body) = body.as_table() else {
            return Err(Error::Config(format!("[{section}] must be a table")));
        };
        if let Some(key) = body.keys().find(|k| !keys.contains(&k.as_str())) {
            return Err(Error::Config(format!(
                "unknown key `{key}` in section [{section}]"
            )));
        }
    }
    Ok(())
}

fn shape_from_section(s: ShapeSection, base: &Path) -> Result<ShapeSpec> {
    let params = |count: usize| -> Result<Vec<f64>> {
        match &s.params {
            Some(p) if p.len() == count => Ok(p.clone()),
            Some(p) => Err(Error::Config(format!(
                "[shape] kind = \"{}\" takes {count} params, got {}",
                s.kind,
                p.len()
            ))),
            None => Err(Error::Config(format!(
                "[shape] kind = \"{}\" needs `params`",
                s.kind
            ))),
        }
    };
    let spec = match s.kind.as_str() {
        "empty" => ShapeSpec::Empty,
        "circle" => {
            let p = params(3)?;
            ShapeSpec::circle(p[0], p[1], p[2])
        }
        "ellipse" => {
            let p = params(4)?;
            ShapeSpec::Ellipse {
                center: [p[0], p[1]],
                semi_axes: [p[2], p[3]],
            }
        }
        "rect" => {
            let p = params(4)?;
            ShapeSpec::Rectangle {
                center: [p[0], p[1]],
                half_widths: [p[2], p[3]],
            }
        }
        "band" => {
            let p = params(2)?;
            let axis = match s.axis.as_deref() {
                Some("x") => 0,
                Some("y") => 1,
                other => {
                    return Err(Error::Config(format!(
                        "[shape] band needs axis = \"x\" or \"y\", got {other:?}"
                    )))
                }
            };
            ShapeSpec::Band {
                axis,
                center: p[0],
                half_width: p[1],
            }
        }
        "expr" => {
            let text = s
                .expr
                .as_deref()
                .ok_or_else(|| Error::Config("[shape] kind = \"expr\" needs `expr`".into()))?;
            parse_shape(text)?
        }
        "mask" => {
            let path = s
                .path
                .as_ref()
                .ok_or_else(|| Error::Config("[shape] kind = \"mask\" needs `path`".into()))?;
            read_mask(&base.join(path))?
        }
        other => {
            return Err(Error::Config(format!(
                "unknown shape kind `{other}` in section [shape]"
            )))
        }
    };
    spec.validate()?;
    Ok(spec)
}

fn shape_to_section(spec: &ShapeSpec) -> Result<ShapeSection> {
    let section = |kind: &str, params: Vec<f64>| ShapeSection {
        kind: kind.into(),
        params: Some(params),
        axis: None,
        expr: None,
        path: None,
    };
    Ok(match spec {
        ShapeSpec::Empty => ShapeSection {
            params: None,
            ..section("empty", Vec::new())
        },
        ShapeSpec::Circle { center, radius } => {
            section("circle", vec![center[0], center[1], *radius])
        }
        ShapeSpec::Ellipse { center, semi_axes } => section(
            "ellipse",
            vec![center[0], center[1], semi_axes[0], semi_axes[1]],
        ),
        ShapeSpec::Rectangle {
            center,
            half_widths,
        } => section(
            "rect",
            vec![center[0], center[1], half_widths[0], half_widths[1]],
        ),
        ShapeSpec::Band {
            axis,
            center,
            half_width,
        } => ShapeSection {
            axis: Some(if *axis == 0 { "x" } else { "y" }.into()),
            ..section("band", vec![*center, *half_width])
        },
        ShapeSpec::Union(_) | ShapeSpec::Intersection(_) => ShapeSection {
            kind: "expr".into(),
            params: None,
            axis: None,
            expr: Some(spec.to_string()),
            path: None,
        },
        ShapeSpec::Mask { .. } => {
            return Err(Error::Config(
                "raster shapes are referenced by path and cannot be written inline".into(),
            ))
        }
    })
}

impl RunConfig {
    /// Parses a document; relative mask paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        check_keys(&table)?;
        let doc: Document = toml::from_str(text).map_err(|e| {
            Error::Config(match e.span() {
                Some(span) => format!(
                    "{} (near `{}`)",
                    e.message(),
                    text[span].lines().next().unwrap_or("")
                ),
                None => e.message().to_string(),
            })
        })?;

        let mut c = OptConfig::default();
        let mut output = OutputConfig::default();
        if let Some(g) = doc.grid {
            set(&mut c.n, g.n);
        }
        if let Some(s) = doc.shape {
            c.shape = shape_from_section(s, base)?;
        }
        if let Some(s) = doc.constraints {
            set(&mut c.constraints.c_f, s.c_f);
            set(&mut c.constraints.k_min, s.k_min);
        }
        if let Some(s) = doc.brinkman {
            set(&mut c.delta, s.delta);
        }
        if let Some(s) = doc.hj {
            set(&mut c.cfl, s.cfl);
            set(&mut c.reinit_every, s.reinit_every);
            set(&mut c.reinit_steps, s.reinit_steps);
            set(&mut c.boundary, s.boundary);
            set(&mut c.extension, s.extension);
            set(&mut c.smoothing_length, s.smoothing_length);
            set(&mut c.gradient, s.gradient);
        }
        if let Some(s) = doc.al {
            set(&mut c.l0, s.l0);
            set(&mut c.mu0, s.mu0);
            set(&mut c.gamma, s.gamma);
            set(&mut c.penalty_every, s.penalty_every);
            set(&mut c.tol_g, s.tol_g);
            set(&mut c.tol_l, s.tol_l);
            set(&mut c.window, s.window);
            set(&mut c.max_iters, s.max_iters);
            set(&mut c.inner_steps, s.inner_steps);
            set(&mut c.armijo, s.armijo);
            set(&mut c.step_shrink, s.step_shrink);
            set(&mut c.step_grow, s.step_grow);
            set(&mut c.max_backtracks, s.max_backtracks);
            set(&mut c.clamp_multipliers, s.clamp_multipliers);
        }
        if let Some(s) = doc.output {
            output.dir = s.dir;
            set(&mut output.dump_every, s.dump_every);
        }
        c.validate()?;
        Ok(Self {
            optimizer: c,
            output,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    /// Full document with every key spelled out.
    pub fn to_toml(&self) -> Result<String> {
        let c = &self.optimizer;
        let doc = Document {
            grid: Some(GridSection { n: Some(c.n) }),
            shape: Some(shape_to_section(&c.shape)?),
            constraints: Some(ConstraintSection {
                c_f: Some(c.constraints.c_f),
                k_min: Some(c.constraints.k_min),
            }),
            brinkman: Some(BrinkmanSection {
                delta: Some(c.delta),
            }),
            hj: Some(HjSection {
                cfl: Some(c.cfl),
                reinit_every: Some(c.reinit_every),
                reinit_steps: Some(c.reinit_steps),
                boundary: Some(c.boundary),
                extension: Some(c.extension),
                smoothing_length: Some(c.smoothing_length),
                gradient: Some(c.gradient),
            }),
            al: Some(AlSection {
                l0: Some(c.l0),
                mu0: Some(c.mu0),
                gamma: Some(c.gamma),
                penalty_every: Some(c.penalty_every),
                tol_g: Some(c.tol_g),
                tol_l: Some(c.tol_l),
                window: Some(c.window),
                max_iters: Some(c.max_iters),
                inner_steps: Some(c.inner_steps),
                armijo: Some(c.armijo),
                step_shrink: Some(c.step_shrink),
                step_grow: Some(c.step_grow),
                max_backtracks: Some(c.max_backtracks),
                clamp_multipliers: Some(c.clamp_multipliers),
            }),
            output: Some(OutputSection {
                dir: self.output.dir.clone(),
                dump_every: Some(self.output.dump_every),
            }),
        };
        toml::to_string(&doc).map_err(|e| Error::Config(e.to_string()))
    }
}

impl From<OptConfig> for RunConfig {
    fn from(optimizer: OptConfig) -> Self {
        Self {
            optimizer,
            output: OutputConfig::default(),
        }
    }
}
