//! Command line front end and the run orchestration behind each subcommand.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value as Json};

use crate::config::{parse_config, plan_from_table, set_path, Command, RunPlan, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::measures::{
    default_window_start, foraging_success, mass_balance, modified_foraging_success, net_growth,
    sweep, CellOutcome, MassBalance, MeasureKind, MeasureReport, SweepTable, SweepValue,
};
use crate::memory::InitialHistory;
use crate::models::{FieldRole, SystemRhs};
use crate::oracle::{verify_fokker_planck, OracleReport};
use crate::output;
use crate::stability::{dispersion, homogeneous_state, DispersionResult};
use crate::stepper::{detect_attractor, Attractor, Simulation, Trajectory};

/// Environment variable read for the worker thread count.
pub const THREADS_ENV: &str = "COGMAP_THREADS";

#[derive(Debug, Parser)]
#[command(name = "cogmap", version, about = "Cognitive movement PDE laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Integrate a model and write its trajectory.
    Simulate(RunArgs),
    /// Linear stability of a homogeneous state.
    Stability(RunArgs),
    /// Evaluate a success measure over a parameter grid.
    Sweep(RunArgs),
    /// Integrate a model and evaluate one success measure.
    Measure(RunArgs),
    /// Check the drift-diffusion limit of the lattice master equation.
    Oracle(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// `key=value` replacing a configuration entry, e.g. `grid.n=256`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl Sub {
    fn split(&self) -> (Command, &RunArgs) {
        match self {
            Sub::Simulate(a) => (Command::Simulate, a),
            Sub::Stability(a) => (Command::Stability, a),
            Sub::Sweep(a) => (Command::Sweep, a),
            Sub::Measure(a) => (Command::Measure, a),
            Sub::Oracle(a) => (Command::Oracle, a),
        }
    }
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    configure_threads();
    let (command, args) = cli.command.split();
    let text = match fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return 4;
        }
    };
    let plan = match parse_config(command, &text, &args.overrides) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    for w in &plan.warnings {
        eprintln!("warning: {w}");
    }
    match execute(&plan, &args.out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

/// Runs a plan, writing its outputs under `out`. Returns the exit code; a
/// numerical failure still writes the summary and yields 3.
pub fn execute(plan: &RunPlan, out: &Path) -> Result<i32> {
    fs::create_dir_all(out)?;
    let mut summary = summary_header(plan);
    let result = match plan.command {
        Command::Simulate => execute_simulate(plan, out, &mut summary),
        Command::Measure => execute_measure(plan, out, &mut summary),
        Command::Sweep => execute_sweep(plan, out, &mut summary),
        Command::Stability => execute_stability(plan, out, &mut summary),
        Command::Oracle => execute_oracle(plan, out, &mut summary),
    };
    let code = match result {
        Ok(()) => {
            summary["status"] = json!("ok");
            0
        }
        Err(e) if e.is_numerical() => {
            eprintln!("error: {e}");
            summary["status"] = json!("numerical_failure");
            summary["error"] = json!(e.to_string());
            3
        }
        Err(e) => return Err(e),
    };
    output::write_json(&out.join("summary.json"), &summary)?;
    Ok(code)
}

fn summary_header(plan: &RunPlan) -> Json {
    let mut tolerances = serde_json::Map::new();
    if plan.command != Command::Oracle && plan.command != Command::Stability {
        tolerances.insert("mass_drift".into(), json!(plan.stepping.mass_drift));
    }
    if let Some(m) = &plan.measure {
        tolerances.insert("attractor".into(), json!(m.attractor_tol));
        tolerances.insert(
            "resource_floor".into(),
            json!(crate::measures::RESOURCE_FLOOR),
        );
    }
    if plan.command == Command::Stability {
        tolerances.insert("growth".into(), json!(crate::stability::GROWTH_TOL));
    }
    if plan.command == Command::Oracle {
        tolerances.insert(
            "kernel_truncation".into(),
            json!(crate::oracle::TRUNCATION_TOL),
        );
    }
    json!({
        "schema_version": SCHEMA_VERSION,
        "tool": "cogmap",
        "version": env!("CARGO_PKG_VERSION"),
        "command": plan.command.name(),
        "config_hash": plan.hash,
        "config": plan.echo_json(),
        "warnings": plan.warnings,
        "tolerances": Json::Object(tolerances),
        "status": "running",
    })
}

/// Initial densities from the plan, with the seeded perturbation applied.
pub fn initial_fields(plan: &RunPlan) -> Result<Vec<Field>> {
    let grid = plan.grid()?;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut fields = Vec::with_capacity(plan.initial.len());
    for e in &plan.initial {
        let mut f = e.sample(grid, 0.0)?;
        if plan.perturbation > 0.0 {
            for v in f.values_mut() {
                *v *= 1.0 + plan.perturbation * rng.gen_range(-1.0..1.0);
            }
        }
        fields.push(f);
    }
    Ok(fields)
}

/// Builds the simulation described by the plan without stepping it.
pub fn build_simulation(plan: &RunPlan) -> Result<Simulation> {
    let grid = plan.grid()?;
    let history = plan
        .initial_history
        .as_ref()
        .map(|exprs| InitialHistory::Expressions {
            grid: *grid,
            exprs: exprs.clone(),
        });
    Simulation::with_history(
        plan.model()?,
        grid,
        initial_fields(plan)?,
        &plan.stepping,
        history,
    )
}

/// Runs the plan to completion. On failure the partial trajectory is
/// returned next to the error.
pub fn run_simulation(plan: &RunPlan) -> Result<(Trajectory, Option<Error>)> {
    let mut sim = build_simulation(plan)?;
    let err = sim.advance().err();
    Ok((sim.into_trajectory(), err))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MeasureOutcome {
    pub report: MeasureReport,
    pub attractor: Attractor,
    pub mass_balance: Option<MassBalance>,
}

fn density_field(traj: &Trajectory, species: usize) -> Result<usize> {
    traj.roles
        .iter()
        .enumerate()
        .filter(|(_, r)| **r == FieldRole::Density)
        .nth(species)
        .map(|(i, _)| i)
        .ok_or_else(|| Error::config("measure.species", "no such species"))
}

/// Evaluates the configured measure on a finished trajectory.
pub fn evaluate_measure(plan: &RunPlan, traj: &Trajectory) -> Result<MeasureOutcome> {
    let m = plan
        .measure
        .as_ref()
        .ok_or_else(|| Error::config("measure", "missing section"))?;
    let grid = *plan.grid()?;
    let rhs = SystemRhs::new(plan.model()?, &grid)?;
    let i = density_field(traj, m.species)?;
    let t_end = traj.last().t;
    let attractor = detect_attractor(traj, m.tail_fraction, m.attractor_tol);
    let t1 = m.t_stop.unwrap_or(t_end);
    let (t0, defaulted) = match m.t_start {
        Some(t) => (t, false),
        None if attractor != Attractor::Undetermined => (t_end * (1.0 - m.tail_fraction), false),
        None => (default_window_start(t_end), true),
    };
    let resource = |t: f64| -> Result<Field> {
        if let Some(e) = &m.resource {
            return e.sample(&grid, t);
        }
        rhs.resource(t).unwrap_or_else(|| {
            Err(Error::MeasureUndefined(format!(
                "the {} family has no resource map; set measure.resource",
                plan.model().map(|p| p.family.name()).unwrap_or("?")
            )))
        })
    };
    let (value, window) = match m.kind {
        MeasureKind::ForagingSuccess => (foraging_success(traj, i, &resource, t0, t1)?, (t0, t1)),
        MeasureKind::ModifiedForagingSuccess => {
            let period = match (m.period, &attractor) {
                (Some(p), _) => p,
                (None, Attractor::Periodic { period }) => *period,
                (None, _) => t1 - t0,
            };
            let start = if m.t_start.is_some() { t0 } else { t1 - period };
            (
                modified_foraging_success(traj, i, &resource, start, period)?,
                (start, start + period),
            )
        }
        MeasureKind::NetGrowth => {
            if rhs
                .model()
                .history_horizon(plan.stepping.horizon_multiplier)
                .is_some()
                || !rhs.convolutions().is_empty()
            {
                return Err(Error::Unsupported(
                    "net growth needs the model history; use the per-step reaction diagnostics instead".into(),
                ));
            }
            let reaction = |t: f64, state: &[Field]| -> Result<Field> {
                Ok(rhs.eval(t, state, None, &[])?.sources[i].clone())
            };
            (net_growth(traj, &reaction, t0, t1)?, (t0, t1))
        }
    };
    Ok(MeasureOutcome {
        report: MeasureReport {
            kind: m.kind,
            value,
            window,
            default_window_start: defaulted,
        },
        attractor,
        mass_balance: mass_balance(traj, i, window.0, window.1).ok(),
    })
}

fn trajectory_summary(traj: &Trajectory) -> Json {
    let last = traj.last();
    json!({
        "t_final": last.t,
        "steps": traj.steps.len(),
        "snapshots": traj.snapshots.len(),
        "fields": traj.field_names,
        "mass_drift": traj.mass_drift(),
        "final_mass": last.fields.iter().map(crate::grid::total_mass).collect::<Vec<_>>(),
        "derived_construction": traj.derived_construction,
    })
}

fn write_trajectory(
    plan: &RunPlan,
    out: &Path,
    traj: &Trajectory,
    summary: &mut Json,
) -> Result<()> {
    let mut files = Vec::new();
    if plan.output.fields {
        output::write_fields_csv(&out.join("fields.csv"), traj)?;
        files.push("fields.csv");
    }
    if plan.output.steps {
        output::write_steps_csv(&out.join("steps.csv"), traj)?;
        files.push("steps.csv");
    }
    summary["trajectory"] = trajectory_summary(traj);
    summary["files"] = json!(files);
    Ok(())
}

fn execute_simulate(plan: &RunPlan, out: &Path, summary: &mut Json) -> Result<()> {
    let (traj, err) = run_simulation(plan)?;
    write_trajectory(plan, out, &traj, summary)?;
    let drift = traj.mass_drift();
    if err.is_none() && !plan.model()?.has_population_dynamics() && drift > plan.stepping.mass_drift
    {
        summary["mass_drift_exceeded"] = json!(true);
    }
    err.map_or(Ok(()), Err)
}

fn execute_measure(plan: &RunPlan, out: &Path, summary: &mut Json) -> Result<()> {
    let (traj, err) = run_simulation(plan)?;
    write_trajectory(plan, out, &traj, summary)?;
    if let Some(e) = err {
        return Err(e);
    }
    let outcome = evaluate_measure(plan, &traj)?;
    summary["measure"] = serde_json::to_value(&outcome)?;
    Ok(())
}

/// Runs every cell of the plan's sweep as a full measure run.
pub fn run_sweep(plan: &RunPlan) -> Result<SweepTable> {
    let mut base = plan.table.clone();
    base.remove("sweep");
    Ok(sweep(&plan.sweep, |params| {
        let mut table = base.clone();
        for (key, value) in params {
            let v = match value {
                SweepValue::Num(x) => toml::Value::Float(*x),
                SweepValue::Text(s) => toml::Value::String(s.clone()),
            };
            set_path(&mut table, key, coerce_integer(key, v))?;
        }
        let cell = plan_from_table(Command::Measure, table)?;
        let (traj, err) = run_simulation(&cell)?;
        if let Some(e) = err {
            return Err(e);
        }
        let o = evaluate_measure(&cell, &traj)?;
        Ok(CellOutcome {
            value: o.report.value,
            attractor: o.attractor,
        })
    }))
}

/// Whole-number sweep values on integer keys (such as `grid.n`) stay integers.
fn coerce_integer(key: &str, v: toml::Value) -> toml::Value {
    const INTEGER_KEYS: [&str; 4] = [
        "grid.n",
        "stepping.seed",
        "measure.species",
        "stability.j_max",
    ];
    match v {
        toml::Value::Float(x) if INTEGER_KEYS.contains(&key) && x.fract() == 0.0 => {
            toml::Value::Integer(x as i64)
        }
        other => other,
    }
}

fn execute_sweep(plan: &RunPlan, out: &Path, summary: &mut Json) -> Result<()> {
    let table = run_sweep(plan)?;
    let measure = plan
        .measure
        .as_ref()
        .map(|m| m.kind.name())
        .unwrap_or("value");
    output::write_sweep_csv(&out.join("sweep.csv"), &table, measure)?;
    let failed = table.rows.iter().filter(|r| r.outcome.is_err()).count();
    summary["sweep"] = json!({
        "cells": table.rows.len(),
        "failed": failed,
        "interior_maximum": table.has_interior_max(),
    });
    summary["files"] = json!(["sweep.csv"]);
    Ok(())
}

/// Dispersion relation about the configured homogeneous state.
pub fn run_stability(plan: &RunPlan) -> Result<DispersionResult> {
    let s = plan
        .stability
        .as_ref()
        .ok_or_else(|| Error::config("stability", "missing section"))?;
    let model = plan.model()?;
    let grid = plan.grid()?;
    let state = homogeneous_state(model, &s.densities)?;
    dispersion(model, &state, grid.length(), grid.bc(), s.j_max)
}

fn execute_stability(plan: &RunPlan, out: &Path, summary: &mut Json) -> Result<()> {
    let d = run_stability(plan)?;
    output::write_dispersion_csv(&out.join("dispersion.csv"), &d)?;
    summary["stability"] = json!({
        "unstable_modes": d.unstable,
        "max_growth": d.max_growth(),
        "derived_construction": d.derived_construction,
        "cross_checked": d.cross_checked,
    });
    summary["files"] = json!(["dispersion.csv"]);
    Ok(())
}

pub fn run_oracle(plan: &RunPlan) -> Result<OracleReport> {
    let cfg = plan
        .oracle
        .as_ref()
        .ok_or_else(|| Error::config("oracle", "missing section"))?;
    verify_fokker_planck(cfg)
}

fn execute_oracle(plan: &RunPlan, out: &Path, summary: &mut Json) -> Result<()> {
    let report = run_oracle(plan)?;
    output::write_oracle_csv(&out.join("oracle.csv"), &report)?;
    summary["oracle"] = json!({
        "max_rel_dev": report.max_rel_dev,
        "d_hat": report.d_hat,
        "d_hat_2d": report.d_hat_2d,
        "kernel_m2": report.kernel_m2,
        "l1_distance": report.l1_distance,
    });
    summary["files"] = json!(["oracle.csv"]);
    Ok(())
}
