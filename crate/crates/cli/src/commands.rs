//! Subcommand implementations.

use std::path::{Path, PathBuf};

use microtube::io::{
    read_level_set, seam_mismatches, tile as tile_image, write_atomic, write_history, write_pgm,
    FieldDump, RunConfig,
};
use microtube::levelset::{init_levelset, parse_shape};
use microtube::optimizer::{analyze_cell, drive, Checkpoint, Optimizer, RunResult};
use microtube::shape_gradient::{
    boundary_integral, dyadic_sweep, smooth_direction, validate_shape_derivative, FdContext,
    FdReport, Functional,
};

use crate::{dump, Common, Failure, EXIT_GRADIENT};

type Outcome = Result<(), Failure>;

pub struct Log {
    pub quiet: bool,
}

impl Log {
    fn info(&self, msg: impl std::fmt::Display) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }
}

/// Config file (or defaults) with the command-line overrides applied, and the output
/// directory.
fn load(common: &Common) -> Result<(RunConfig, PathBuf), Failure> {
    let mut rc = match &common.config {
        Some(p) => RunConfig::load(p).map_err(Failure::config)?,
        None => RunConfig::default(),
    };
    if let Some(s) = &common.seed_shape {
        rc.optimizer.shape = parse_shape(s).map_err(Failure::config)?;
    }
    if let Some(n) = common.grid {
        rc.optimizer.n = n;
    }
    rc.optimizer.validate().map_err(Failure::config)?;
    let base = common
        .config
        .as_deref()
        .and_then(Path::parent)
        .unwrap_or(Path::new(""));
    let out = match (&common.out, &rc.output.dir) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => base.join(d),
        (None, None) => PathBuf::from("."),
    };
    Ok((rc, out))
}

fn create_dir(dir: &Path) -> Outcome {
    std::fs::create_dir_all(dir).map_err(|e| Failure {
        code: crate::EXIT_SOLVER,
        message: format!("cannot create {}: {e}", dir.display()),
    })
}

pub fn init(common: &Common, force: bool, log: &Log) -> Outcome {
    let path = common
        .config
        .clone()
        .unwrap_or_else(|| PathBuf::from("config.toml"));
    let mut rc = RunConfig::default();
    if let Some(s) = &common.seed_shape {
        rc.optimizer.shape = parse_shape(s).map_err(Failure::config)?;
    }
    if let Some(n) = common.grid {
        rc.optimizer.n = n;
    }
    rc.output.dir = common.out.clone();
    rc.optimizer.validate().map_err(Failure::config)?;
    if path.exists() && !force {
        return Err(Failure::config(format!(
            "{} exists; pass --force to replace it",
            path.display()
        )));
    }
    write_atomic(&path, rc.to_toml()?.as_bytes())?;
    log.info(format!("wrote {}", path.display()));
    Ok(())
}

pub fn solve_cell(common: &Common, log: &Log) -> Outcome {
    let (rc, out) = load(common)?;
    let config = &rc.optimizer;
    create_dir(&out)?;
    let psi = init_levelset(config.grid()?, &config.shape)?;
    log.info(format!(
        "solving cell problems for {} on {n}x{n}",
        config.shape,
        n = config.n
    ));
    let cell = analyze_cell(&psi, config)?;
    dump::write_cell(&out, "cell", &psi, &cell)?;
    let k = cell.permeability.k;
    let d = cell.diffusion.d;
    println!("tr(K)/d = {:.6e}", cell.permeability.trace_over_d());
    println!(
        "K = [[{:.6e}, {:.6e}], [{:.6e}, {:.6e}]]",
        k[0][0], k[0][1], k[1][0], k[1][1]
    );
    println!(
        "D = [[{:.6e}, {:.6e}], [{:.6e}, {:.6e}]]",
        d[0][0], d[0][1], d[1][0], d[1][1]
    );
    println!(
        "perimeter = {:.6e}, area = {:.6e}",
        cell.measures.perimeter, cell.measures.area
    );
    Ok(())
}

pub fn optimize(common: &Common, max_iters: Option<usize>, log: &Log) -> Outcome {
    let (mut rc, out) = load(common)?;
    if let Some(m) = max_iters {
        rc.optimizer.max_iters = m;
    }
    let opt = Optimizer::new(rc.optimizer.clone())?;
    run_to_end(opt, &rc, &out, log)
}

pub fn resume(
    checkpoint: &Path,
    common: &Common,
    max_iters: Option<usize>,
    allow_config_change: bool,
    log: &Log,
) -> Outcome {
    let (mut rc, out) = load(common)?;
    if let Some(m) = max_iters {
        rc.optimizer.max_iters = m;
    }
    let cp = Checkpoint::load(checkpoint).map_err(Failure::config)?;
    log.info(format!(
        "resuming at iteration {} of {}",
        cp.state.iteration, rc.optimizer.max_iters
    ));
    let opt = Optimizer::from_checkpoint(rc.optimizer.clone(), cp, allow_config_change)
        .map_err(Failure::config)?;
    run_to_end(opt, &rc, &out, log)
}

/// Iterates to completion, writing the history and a checkpoint every `dump_every`
/// iterations and the final artifacts at the end. A failed run still leaves the history
/// and checkpoint of the last completed iteration.
fn run_to_end(opt: Optimizer, rc: &RunConfig, out: &Path, log: &Log) -> Outcome {
    create_dir(out)?;
    let history_path = out.join("history.csv");
    let checkpoint_path = out.join("checkpoint.json");
    opt.checkpoint().save(&checkpoint_path)?;
    let every = rc.output.dump_every;
    let observer = |o: &Optimizer| {
        let row = o.history().last().expect("observer runs after a step");
        log.info(format!(
            "{:4}  P {:.5}  g1 {:+.3e}  g2 {:+.3e}  L {:.5}  dt {:.2e}{}",
            row.n,
            row.perimeter,
            row.g1,
            row.g2,
            row.lagrangian,
            row.dt,
            if row.stagnated { "  stagnated" } else { "" }
        ));
        if o.finished() || (every > 0 && row.n.is_multiple_of(every)) {
            write_history(&history_path, o.history())?;
            o.checkpoint().save(&checkpoint_path)?;
        }
        if every > 0 && row.n.is_multiple_of(every) {
            FieldDump::new(*o.psi().grid())
                .with_scalar("psi", o.psi().values())?
                .write(&out.join(format!("psi_{:04}.vtk", row.n)))?;
        }
        Ok(())
    };
    let result = match drive(opt, observer) {
        Ok(r) => r,
        Err(aborted) => {
            let cp = &aborted.last_valid;
            write_history(&history_path, &cp.history)?;
            if cp.n > 0 {
                cp.save(&checkpoint_path)?;
            }
            return Err(aborted.error.into());
        }
    };
    write_history(&history_path, &result.history)?;
    dump::write_cell(out, "final", &result.psi, &result.cell)?;
    println!("{}", summary(&result, rc));
    Ok(())
}

fn summary(r: &RunResult, rc: &RunConfig) -> String {
    let [g1, g2] = r.residuals(&rc.optimizer.constraints);
    format!(
        "iterations {}  converged {}  initial perimeter {:.6}  final perimeter {:.6}  \
         gain {:+.2}%  g1 {:+.3e}  g2 {:+.3e}",
        r.history.len(),
        r.converged,
        r.initial_perimeter,
        r.cell.measures.perimeter,
        100.0 * r.perimeter_gain(),
        g1,
        g2
    )
}

pub fn tile(dump: &Path, repeat: usize, out: Option<PathBuf>, log: &Log) -> Outcome {
    let psi = read_level_set(dump)?;
    let image = tile_image(&psi, repeat).map_err(Failure::config)?;
    let path = out.unwrap_or_else(|| dump.with_extension("pgm"));
    write_pgm(&path, &image)?;
    let seams = seam_mismatches(&image, psi.grid().n());
    log.info(format!(
        "wrote {} ({}x{} pixels, {} seam mismatches)",
        path.display(),
        image.width(),
        image.height(),
        seams
    ));
    Ok(())
}

/// Analytic derivatives below this fraction of `∫|θ| ds` count as zero.
const VANISHING: f64 = 1e-8;

/// Relative error of the report, or for a vanishing analytic derivative the smallest
/// quotient scaled by `∫|θ| ds`, and whether that second form was used.
fn error_measure(r: &FdReport, reference: f64) -> (f64, bool) {
    let analytic = r.rows[0].analytic;
    if analytic.abs() > VANISHING * reference {
        return (r.best_rel_error, false);
    }
    let best = r
        .rows
        .iter()
        .map(|row| row.quotient.abs())
        .fold(r.extrapolated.abs(), f64::min);
    (best / reference, true)
}

pub fn check_gradients(common: &Common, log: &Log) -> Outcome {
    let (rc, out) = load(common)?;
    let config = &rc.optimizer;
    create_dir(&out)?;
    let psi = init_levelset(config.grid()?, &config.shape)?;
    let direction = smooth_direction(*psi.grid());
    let eps = dyadic_sweep(7, 10);
    let magnitude: Vec<f64> = direction.values().iter().map(|t| t.abs()).collect();
    let reference = boundary_integral(&psi, &magnitude);
    let ctx = FdContext {
        delta: config.delta,
        tol: config.solver_tol,
        form: config.gradient,
        constraints: config.constraints,
        state: config.initial_state(),
        ..FdContext::default()
    };
    let mut failed = Vec::new();
    for f in [
        Functional::Perimeter,
        Functional::Volume,
        Functional::PermeabilityTrace,
    ] {
        log.info(format!("checking {}", f.name()));
        let report = validate_shape_derivative(f, &psi, &direction, &eps, &ctx)?;
        write_atomic(
            &out.join(format!("gradcheck_{}.csv", f.name())),
            report.to_csv().as_bytes(),
        )?;
        let (error, zero) = error_measure(&report, reference);
        let pass = error < f.threshold();
        println!(
            "{:<10} analytic {:+.6e}  extrapolated {:+.6e}  {} {:.3e}  threshold {:.0e}  {}",
            f.name(),
            report.rows[0].analytic,
            report.extrapolated,
            if zero { "error/∫|θ|ds" } else { "rel error" },
            error,
            f.threshold(),
            if pass { "PASS" } else { "FAIL" },
        );
        if !pass {
            failed.push(f.name());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_GRADIENT,
            message: format!("gradient check failed for {}", failed.join(", ")),
        })
    }
}
