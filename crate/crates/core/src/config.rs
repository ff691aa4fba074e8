//! TOML run configuration: validated plans, echoed defaults and `key=value`
//! overrides.
//!
//! Every key that influences a run is recorded in [`RunPlan::echo`] together
//! with whether its value came from the file or from a default. Keys that are
//! never read are rejected, so a typo cannot silently fall back to a default.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use serde_json::{json, Value as Json};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::expr::{parse_expression, pretty_print, Expr};
use crate::grid::{BoundaryCondition, Grid};
use crate::kernels::{BoundaryMode, KernelShape, KernelSpec};
use crate::measures::{MeasureKind, SweepAxis, SweepPlan, SweepValue};
use crate::memory::TemporalKernelSpec;
use crate::models::{
    ConflictParams, ConflictVariant, ConsumerResourceParams, ConsumerResourceRates, CrMap,
    DelayModel, DistributedParams, DistributedPath, Family, Logistic, MemorySource, ModelSpec,
    NonlocalKind, ResponseShape, SatisfactionKind, SatisfactionSpec, ScalarReaction,
    ShortLongParams, StarvationParams, StaticMapKind, TwoSpeciesKinetics,
};
use crate::oracle::OracleConfig;
use crate::stepper::{AdvectionScheme, StepConfig, TimeStep};

/// Version of the CSV and JSON layouts written by the command line tool.
pub const SCHEMA_VERSION: u32 = 1;

const SECTIONS: [&str; 10] = [
    "model",
    "grid",
    "kernel",
    "delay",
    "stepping",
    "measure",
    "stability",
    "sweep",
    "output",
    "oracle",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Simulate,
    Stability,
    Sweep,
    Measure,
    Oracle,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Stability => "stability",
            Command::Sweep => "sweep",
            Command::Measure => "measure",
            Command::Oracle => "oracle",
        }
    }

    fn sections(&self) -> &'static [&'static str] {
        match self {
            Command::Simulate => &["model", "grid", "kernel", "delay", "stepping", "output"],
            Command::Measure => &[
                "model", "grid", "kernel", "delay", "stepping", "measure", "output",
            ],
            Command::Sweep => &[
                "model", "grid", "kernel", "delay", "stepping", "measure", "sweep",
            ],
            Command::Stability => &["model", "grid", "kernel", "delay", "stability"],
            Command::Oracle => &["oracle"],
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One resolved configuration value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Echoed {
    pub value: Json,
    pub defaulted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureSettings {
    pub kind: MeasureKind,
    /// Index among the density fields.
    pub species: usize,
    /// Resource used by the foraging measures when the family has none.
    pub resource: Option<Expr>,
    pub t_start: Option<f64>,
    pub t_stop: Option<f64>,
    pub period: Option<f64>,
    pub tail_fraction: f64,
    pub attractor_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilitySettings {
    /// Homogeneous densities to linearize about, one per species.
    pub densities: Vec<f64>,
    pub j_max: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OutputSettings {
    pub fields: bool,
    pub steps: bool,
}

#[derive(Debug, Clone)]
pub struct RunPlan {
    pub command: Command,
    pub model: Option<ModelSpec>,
    pub grid: Option<Grid>,
    pub stepping: StepConfig,
    /// Initial density per species.
    pub initial: Vec<Expr>,
    /// Pre-history per state field; constant continuation of the initial
    /// state when absent.
    pub initial_history: Option<Vec<Expr>>,
    /// Relative amplitude of seeded noise on the initial densities.
    pub perturbation: f64,
    pub seed: u64,
    pub measure: Option<MeasureSettings>,
    pub stability: Option<StabilitySettings>,
    pub sweep: SweepPlan,
    pub oracle: Option<OracleConfig>,
    pub output: OutputSettings,
    pub echo: BTreeMap<String, Echoed>,
    pub warnings: Vec<String>,
    /// SHA-256 of the effective configuration after overrides.
    pub hash: String,
    /// Effective configuration, kept so sweep cells can be re-derived.
    pub table: Table,
}

impl RunPlan {
    pub fn defaults_applied(&self) -> usize {
        self.echo.values().filter(|e| e.defaulted).count()
    }

    pub fn model(&self) -> Result<&ModelSpec> {
        self.model
            .as_ref()
            .ok_or_else(|| Error::config("model", "missing section"))
    }

    pub fn grid(&self) -> Result<&Grid> {
        self.grid
            .as_ref()
            .ok_or_else(|| Error::config("grid", "missing section"))
    }

    /// The echo as a JSON object `{key: value}` plus the list of keys that
    /// took their default.
    pub fn echo_json(&self) -> Json {
        let values: serde_json::Map<String, Json> = self
            .echo
            .iter()
            .map(|(k, e)| (k.clone(), e.value.clone()))
            .collect();
        let defaulted: Vec<&String> = self
            .echo
            .iter()
            .filter(|(_, e)| e.defaulted)
            .map(|(k, _)| k)
            .collect();
        json!({ "values": values, "defaulted": defaulted })
    }
}

/// Parses `text` as TOML, applies `key=value` overrides and validates the
/// result for `command`.
pub fn parse_config(command: Command, text: &str, overrides: &[String]) -> Result<RunPlan> {
    let mut table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::config("<config>", e.message().to_string()))?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    plan_from_table(command, table)
}

/// Applies one `a.b.c=value` override. The value is read as a TOML literal
/// and falls back to a bare string.
pub fn apply_override(table: &mut Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::config(spec, "override must look like key=value"))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    };
    set_path(table, key, value)
}

pub fn set_path(table: &mut Table, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(key, "empty key segment"));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => return Err(Error::config(key, format!("`{p}` is not a table"))),
        };
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

pub fn config_hash(table: &Table) -> String {
    let canonical = toml::to_string(table).unwrap_or_default();
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

pub fn plan_from_table(command: Command, table: Table) -> Result<RunPlan> {
    let mut r = Reader::new(&table);
    let mut warnings = Vec::new();
    for key in table.keys() {
        if !SECTIONS.contains(&key.as_str()) {
            return Err(Error::config(
                key,
                format!("unknown section; expected one of {}", SECTIONS.join(", ")),
            ));
        }
        if !command.sections().contains(&key.as_str()) {
            warnings.push(format!(
                "section [{key}] is not used by the {command} subcommand"
            ));
            r.ignore_section(key);
        }
    }

    let output = if matches!(command, Command::Simulate | Command::Measure) {
        OutputSettings {
            fields: r.bool_or("output.fields", true)?,
            steps: r.bool_or("output.steps", true)?,
        }
    } else {
        OutputSettings {
            fields: false,
            steps: false,
        }
    };

    let mut plan = RunPlan {
        command,
        model: None,
        grid: None,
        stepping: StepConfig::default(),
        initial: Vec::new(),
        initial_history: None,
        perturbation: 0.0,
        seed: 0,
        measure: None,
        stability: None,
        sweep: SweepPlan::default(),
        oracle: None,
        output,
        echo: BTreeMap::new(),
        warnings: Vec::new(),
        hash: config_hash(&table),
        table: table.clone(),
    };

    if command == Command::Oracle {
        plan.oracle = Some(read_oracle(&mut r)?);
    } else {
        let grid = read_grid(&mut r)?;
        let kernel = read_kernel(&mut r)?;
        if kernel.radius >= grid.length() {
            return Err(Error::config(
                "kernel.radius",
                "must be smaller than grid.length",
            ));
        }
        let temporal = read_temporal(&mut r)?;
        let family = read_family(&mut r, &temporal)?;
        let model = ModelSpec {
            family,
            kernel,
            temporal,
        };
        warnings.extend(model.validate()?);
        let n_species = model.n_species();
        if command == Command::Stability {
            let densities = r.f64_vec_or("stability.densities", &vec![1.0; n_species])?;
            if densities.len() != n_species {
                return Err(Error::config(
                    "stability.densities",
                    format!("need {n_species} entries"),
                ));
            }
            plan.stability = Some(StabilitySettings {
                densities,
                j_max: r.usize_or("stability.j_max", 64)?,
            });
        } else {
            plan.stepping = read_stepping(&mut r)?;
            plan.stepping.horizon_multiplier = r.f64_or("delay.horizon_multiplier", 12.0)?;
            plan.stepping.validate()?;
            let default_initial = vec!["1".to_string(); n_species];
            let initial = r.str_vec_or("model.initial", &default_initial)?;
            if initial.len() != n_species {
                return Err(Error::config(
                    "model.initial",
                    format!("need one expression per species ({n_species})"),
                ));
            }
            plan.initial = initial
                .iter()
                .map(|s| {
                    parse_expression(s).map_err(|e| Error::config("model.initial", e.to_string()))
                })
                .collect::<Result<_>>()?;
            if model
                .history_horizon(plan.stepping.horizon_multiplier)
                .is_some()
            {
                plan.initial_history = r
                    .opt_str_vec("delay.initial_history")?
                    .map(|v| {
                        v.iter()
                            .map(|s| {
                                parse_expression(s).map_err(|e| {
                                    Error::config("delay.initial_history", e.to_string())
                                })
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .transpose()?;
                if plan.initial_history.is_none() {
                    r.echo_default("delay.initial_history", json!("constant"));
                }
            }
            plan.perturbation = r.f64_or("stepping.perturbation", 0.0)?;
            if !(plan.perturbation >= 0.0 && plan.perturbation < 1.0) {
                return Err(Error::config("stepping.perturbation", "must lie in [0, 1)"));
            }
            plan.seed = r.usize_or("stepping.seed", 0)? as u64;
            if matches!(command, Command::Measure | Command::Sweep) {
                plan.measure = Some(read_measure(&mut r, n_species)?);
            }
            if command == Command::Sweep {
                plan.sweep = read_sweep(&mut r)?;
            }
        }
        plan.model = Some(model);
        plan.grid = Some(grid);
    }

    r.finish()?;
    plan.echo = r.echo;
    plan.warnings = warnings;
    Ok(plan)
}

fn read_grid(r: &mut Reader) -> Result<Grid> {
    let length = r.f64("grid.length")?;
    let n = r.usize("grid.n")?;
    let bc = match r.str_or("grid.bc", "zero_flux")?.as_str() {
        "zero_flux" => BoundaryCondition::ZeroFlux,
        "neumann" => BoundaryCondition::HomogeneousNeumann,
        "dirichlet" => BoundaryCondition::HomogeneousDirichlet,
        "periodic" => BoundaryCondition::Periodic,
        "robin" => BoundaryCondition::Robin {
            alpha: r.f64("grid.robin_alpha")?,
            beta: r.f64("grid.robin_beta")?,
        },
        other => {
            return Err(Error::config(
                "grid.bc",
                format!("unknown boundary condition `{other}`; expected zero_flux, neumann, dirichlet, periodic or robin"),
            ))
        }
    };
    Grid::new(length, n, bc)
}

fn read_kernel(r: &mut Reader) -> Result<KernelSpec> {
    let shape_name = r.str_or("kernel.shape", "delta")?;
    let shape = KernelShape::parse(&shape_name).ok_or_else(|| {
        Error::config(
            "kernel.shape",
            format!("unknown kernel shape `{shape_name}`"),
        )
    })?;
    if shape == KernelShape::Delta {
        return Ok(KernelSpec::delta());
    }
    let radius = r.f64("kernel.radius")?;
    let mode_name = r.str_or("kernel.boundary_mode", BoundaryMode::default().name())?;
    let mode = BoundaryMode::parse(&mode_name).ok_or_else(|| {
        Error::config(
            "kernel.boundary_mode",
            format!("unknown boundary mode `{mode_name}`"),
        )
    })?;
    KernelSpec::new(shape, radius, mode)
}

fn read_temporal(r: &mut Reader) -> Result<TemporalKernelSpec> {
    let kind = r.str_or("delay.kind", "none")?;
    let spec = match kind.as_str() {
        "none" => TemporalKernelSpec::None,
        "discrete" => TemporalKernelSpec::DiscreteDelay {
            tau: r.f64("delay.tau")?,
        },
        "weak" => TemporalKernelSpec::Weak {
            tau: r.f64("delay.tau")?,
        },
        "strong" => TemporalKernelSpec::Strong {
            tau: r.f64("delay.tau")?,
        },
        other => {
            return Err(Error::config(
                "delay.kind",
                format!("unknown delay kind `{other}`; expected none, discrete, weak or strong"),
            ))
        }
    };
    spec.validate("delay.tau")?;
    Ok(spec)
}

fn read_stepping(r: &mut Reader) -> Result<StepConfig> {
    let dt = match r.raw("stepping.dt") {
        None | Some(Value::String(_)) => {
            if let Some(Value::String(s)) = r.raw("stepping.dt") {
                if s != "auto" {
                    return Err(Error::config("stepping.dt", "must be a number or \"auto\""));
                }
                r.take("stepping.dt", json!("auto"));
            } else {
                r.echo_default("stepping.dt", json!("auto"));
            }
            TimeStep::Auto {
                cfl: r.f64_or("stepping.cfl", 0.4)?,
            }
        }
        Some(_) => TimeStep::Fixed {
            dt: r.f64("stepping.dt")?,
        },
    };
    let t_end = r.f64("stepping.t_end")?;
    let snapshot_every = r.f64_or("stepping.snapshot_every", t_end / 100.0)?;
    let advection = match r.str_or("stepping.scheme", "upwind")?.as_str() {
        "upwind" => AdvectionScheme::Upwind,
        "central" => AdvectionScheme::Central,
        other => {
            return Err(Error::config(
                "stepping.scheme",
                format!("unknown scheme `{other}`"),
            ))
        }
    };
    Ok(StepConfig {
        dt,
        t_end,
        snapshot_every,
        advection,
        mass_drift: r.f64_or("stepping.mass_drift_tol", 1e-8)?,
        dt_max: r.opt_f64("stepping.dt_max")?,
        horizon_multiplier: 12.0,
    })
}

fn read_logistic(r: &mut Reader, required: bool) -> Result<Option<Logistic>> {
    let rate = if required {
        Some(r.f64("model.r")?)
    } else {
        r.opt_f64("model.r")?
    };
    match rate {
        Some(rate) => Ok(Some(Logistic {
            r: rate,
            k: r.f64_or("model.carrying_capacity", 1.0)?,
        })),
        None => Ok(None),
    }
}

fn read_rates(r: &mut Reader) -> Result<ConsumerResourceRates> {
    Ok(ConsumerResourceRates {
        r: r.f64("model.r")?,
        k: r.f64("model.carrying_capacity")?,
        beta: r.f64("model.beta")?,
        alpha: r.f64("model.alpha")?,
        c: r.f64("model.c")?,
        death: r.f64("model.death")?,
    })
}

fn read_kinetics(r: &mut Reader) -> Result<TwoSpeciesKinetics> {
    Ok(match r.str_or("model.kinetics", "none")?.as_str() {
        "none" => TwoSpeciesKinetics::None,
        "holling_ii" => TwoSpeciesKinetics::HollingII(read_rates(r)?),
        "lotka_volterra" => TwoSpeciesKinetics::LotkaVolterra {
            alpha: r.f64("model.lv_alpha")?,
            beta: r.f64("model.lv_beta")?,
            gamma: r.f64_or("model.lv_gamma", 1.0)?,
        },
        other => {
            return Err(Error::config(
                "model.kinetics",
                format!("unknown kinetics `{other}`"),
            ))
        }
    })
}

fn read_source(r: &mut Reader, key: &str) -> Result<MemorySource> {
    let s = r.str_or(key, "density")?;
    if s == "density" {
        Ok(MemorySource::Density)
    } else {
        Ok(MemorySource::Landscape(
            parse_expression(&s).map_err(|e| Error::config(key, e.to_string()))?,
        ))
    }
}

fn read_family(r: &mut Reader, temporal: &TemporalKernelSpec) -> Result<Family> {
    let name = r.str("model.family")?;
    let family = match name.as_str() {
        "perception_foraging" => Family::PerceptionForaging {
            d: r.f64("model.d")?,
            gamma: r.f64("model.gamma")?,
            landscape: r.expr("model.landscape")?,
        },
        "static_map" => {
            let d = r.f64("model.d")?;
            let gamma = r.f64("model.gamma")?;
            let map = match r.str("model.map")?.as_str() {
                "den_site" => StaticMapKind::DenSite { x0: r.f64("model.x0")? },
                "given_map" => StaticMapKind::GivenMap { m: r.expr("model.m")? },
                "avg_density" => StaticMapKind::AvgDensity { m: r.expr("model.m")? },
                "per_capita" => StaticMapKind::PerCapita { m: r.expr("model.m")? },
                other => return Err(Error::config("model.map", format!("unknown static map `{other}`"))),
            };
            Family::StaticMap { d, gamma, map }
        }
        "aggregation" => Family::Aggregation {
            d: r.f64("model.d")?,
            gamma: r.f64("model.gamma")?,
            logistic: read_logistic(r, false)?,
        },
        "multi_aggregation" => Family::MultiAggregation {
            d: r.f64_vec("model.d")?,
            gamma: r.f64_matrix("model.gamma")?,
        },
        "marks" => Family::Marks {
            d: r.f64_vec("model.d")?,
            gamma: r.f64_vec("model.gamma")?,
            alpha: r.f64_matrix("model.alpha")?,
            mu: r.f64("model.mu")?,
        },
        "conflict_zones" => {
            let d = r.f64_vec("model.d")?;
            let n = d.len();
            let variant = match r.str_or("model.variant", "magnitude")?.as_str() {
                "magnitude" => ConflictVariant::Magnitude,
                "probability" => ConflictVariant::Probability,
                other => return Err(Error::config("model.variant", format!("unknown variant `{other}`"))),
            };
            Family::ConflictZones(ConflictParams {
                gamma: r.f64_vec("model.gamma")?,
                rho: r.f64_matrix("model.rho")?,
                mu: r.f64("model.mu")?,
                beta: r.f64_or("model.beta", 0.0)?,
                variant,
                epsilon: r.f64_vec_or("model.epsilon", &vec![0.0; n])?,
                nonlocal_conflict: r.bool_or("model.nonlocal_conflict", false)?,
                d,
            })
        }
        "consumer_resource" => {
            let d1 = r.f64("model.d1")?;
            let d2 = r.f64("model.d2")?;
            let gamma = r.f64("model.gamma")?;
            let rates = read_rates(r)?;
            let map = match r.str_or("model.map", "none")?.as_str() {
                "none" => CrMap::None,
                "linear_q" => CrMap::LinearQ {
                    b: r.f64("model.b")?,
                    mu: r.f64("model.mu")?,
                },
                "bilinear_q" => CrMap::BilinearQ {
                    b: r.f64("model.b")?,
                    mu: r.f64("model.mu")?,
                    xi: r.f64("model.xi")?,
                },
                other => return Err(Error::config("model.map", format!("unknown map `{other}`"))),
            };
            Family::ConsumerResource(ConsumerResourceParams {
                d1,
                d2,
                gamma,
                rates,
                map,
            })
        }
        "discrete_delay" => {
            let model = match r.str_or("model.model", "scalar")?.as_str() {
                "scalar" => {
                    let d1 = r.f64("model.d1")?;
                    let gamma = r.f64("model.gamma")?;
                    let reaction = match r.str_or("model.reaction", "none")?.as_str() {
                        "none" => ScalarReaction::None,
                        "logistic" => ScalarReaction::Logistic(read_logistic(r, true)?.unwrap()),
                        "nonlocal" => {
                            let logistic = read_logistic(r, true)?.unwrap();
                            let argument = match r.str_or("model.argument", "spatial_average")?.as_str() {
                                "spatial_average" => NonlocalKind::SpatialAverage,
                                "temporal_delay" => NonlocalKind::TemporalDelay { sigma: r.f64("model.sigma")? },
                                "kernel_average_delayed" => {
                                    NonlocalKind::KernelAverageDelayed { sigma: r.f64("model.sigma")? }
                                }
                                other => {
                                    return Err(Error::config("model.argument", format!("unknown argument `{other}`")))
                                }
                            };
                            ScalarReaction::Nonlocal { logistic, argument }
                        }
                        other => return Err(Error::config("model.reaction", format!("unknown reaction `{other}`"))),
                    };
                    DelayModel::Scalar { d1, gamma, reaction }
                }
                "consumer_resource" => DelayModel::ConsumerResource {
                    d_u: r.f64("model.d_u")?,
                    d_v: r.f64("model.d_v")?,
                    chi: r.f64("model.chi")?,
                    kinetics: read_kinetics(r)?,
                },
                "competition" => {
                    let m = r.f64_matrix("model.cross")?;
                    if m.len() != 2 || m.iter().any(|row| row.len() != 2) {
                        return Err(Error::config("model.cross", "must be a 2x2 matrix"));
                    }
                    DelayModel::Competition {
                        d_u: r.f64("model.d_u")?,
                        d_v: r.f64("model.d_v")?,
                        cross: [[m[0][0], m[0][1]], [m[1][0], m[1][1]]],
                        kinetics: read_kinetics(r)?,
                    }
                }
                other => return Err(Error::config("model.model", format!("unknown delay model `{other}`"))),
            };
            Family::DiscreteDelay(model)
        }
        "distributed" => {
            let d1 = r.f64("model.d1")?;
            let gamma = r.f64("model.gamma")?;
            let logistic = read_logistic(r, false)?;
            let maturation = match r.opt_str("delay.maturation_kind")? {
                None => None,
                Some(kind) => {
                    let tau = r.f64("delay.maturation_tau")?;
                    Some(match kind.as_str() {
                        "weak" => TemporalKernelSpec::Weak { tau },
                        "strong" => TemporalKernelSpec::Strong { tau },
                        other => {
                            return Err(Error::config(
                                "delay.maturation_kind",
                                format!("unknown maturation kernel `{other}`; expected weak or strong"),
                            ))
                        }
                    })
                }
            };
            let source = read_source(r, "model.source")?;
            let default_path = if source == MemorySource::Density { "augmented" } else { "direct" };
            let path = match r.str_or("delay.path", default_path)?.as_str() {
                "augmented" => DistributedPath::Augmented,
                "direct" => DistributedPath::Direct,
                other => return Err(Error::config("delay.path", format!("unknown path `{other}`"))),
            };
            Family::Distributed(DistributedParams {
                d1,
                gamma,
                d3: r.f64_or("delay.d3", 0.0)?,
                logistic,
                maturation,
                path,
                source,
            })
        }
        "short_long" => Family::ShortLong(ShortLongParams {
            d: r.f64("model.d")?,
            alpha_s: r.f64("model.alpha_s")?,
            alpha_l: r.f64("model.alpha_l")?,
            beta_s: r.f64("model.beta_s")?,
            beta_l: r.f64("model.beta_l")?,
            c1: r.f64("model.c1")?,
            c2: r.f64("model.c2")?,
            source_s: read_source(r, "model.source_s")?,
            source_l: read_source(r, "model.source_l")?,
        }),
        "starvation_den_site" => {
            let kind = match r.str_or("model.satisfaction", "supply_demand")?.as_str() {
                "supply_demand" => SatisfactionKind::SupplyDemand,
                "relative_average" => SatisfactionKind::RelativeAverage,
                other => return Err(Error::config("model.satisfaction", format!("unknown satisfaction `{other}`"))),
            };
            let shape = match r.str_or("model.response", "step")?.as_str() {
                "step" => ResponseShape::Step,
                "smooth" => ResponseShape::Smooth {
                    kappa: r.f64("model.kappa")?,
                },
                other => return Err(Error::config("model.response", format!("unknown response `{other}`"))),
            };
            Family::StarvationDenSite(StarvationParams {
                gamma: r.f64("model.gamma")?,
                gamma_plus: r.f64("model.gamma_plus")?,
                x0: r.f64("model.x0")?,
                satisfaction: SatisfactionSpec {
                    kind,
                    shape,
                    d_plus: r.f64("model.d_plus")?,
                    d_minus: r.f64("model.d_minus")?,
                },
                resource: r.expr("model.resource")?,
            })
        }
        other => {
            return Err(Error::config(
                "model.family",
                format!(
                    "unknown family `{other}`; expected one of perception_foraging, static_map, aggregation, \
                     multi_aggregation, marks, conflict_zones, consumer_resource, discrete_delay, distributed, \
                     short_long, starvation_den_site"
                ),
            ))
        }
    };
    if !matches!(family, Family::DiscreteDelay(_) | Family::Distributed(_))
        && *temporal != TemporalKernelSpec::None
    {
        return Err(Error::config(
            "delay.kind",
            format!("the {} family has no delay", family.name()),
        ));
    }
    Ok(family)
}

fn read_measure(r: &mut Reader, n_species: usize) -> Result<MeasureSettings> {
    let name = r.str_or("measure.kind", "foraging_success")?;
    let kind = MeasureKind::parse(&name)
        .ok_or_else(|| Error::config("measure.kind", format!("unknown measure `{name}`")))?;
    let species = r.usize_or("measure.species", 0)?;
    if species >= n_species {
        return Err(Error::config(
            "measure.species",
            format!("model has {n_species} species"),
        ));
    }
    let resource = match r.opt_str("measure.resource")? {
        Some(s) => Some(
            parse_expression(&s).map_err(|e| Error::config("measure.resource", e.to_string()))?,
        ),
        None => None,
    };
    let tail_fraction = r.f64_or("measure.tail_fraction", 0.25)?;
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::config("measure.tail_fraction", "must lie in (0, 1]"));
    }
    Ok(MeasureSettings {
        kind,
        species,
        resource,
        t_start: r.opt_f64("measure.t_start")?,
        t_stop: r.opt_f64("measure.t_stop")?,
        period: r.opt_f64("measure.period")?,
        tail_fraction,
        attractor_tol: r.f64_or("measure.attractor_tol", 1e-6)?,
    })
}

fn read_sweep(r: &mut Reader) -> Result<SweepPlan> {
    let Some(Value::Array(items)) = r.raw("sweep.axis").cloned() else {
        return Err(Error::config(
            "sweep.axis",
            "need at least one [[sweep.axis]] entry",
        ));
    };
    r.take("sweep.axis", Json::Null);
    let mut axes = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let path = format!("sweep.axis[{i}]");
        let Value::Table(t) = item else {
            return Err(Error::config(
                path,
                "must be a table with `key` and `values`",
            ));
        };
        for k in t.keys() {
            if k != "key" && k != "values" {
                return Err(Error::config(format!("{path}.{k}"), "unknown key"));
            }
        }
        let key = match t.get("key") {
            Some(Value::String(s)) => s.clone(),
            _ => return Err(Error::config(format!("{path}.key"), "must be a string")),
        };
        if key.starts_with("sweep.") || key.starts_with("output.") {
            return Err(Error::config(
                format!("{path}.key"),
                "cannot sweep this section",
            ));
        }
        let values = match t.get("values") {
            Some(Value::Array(vs)) if !vs.is_empty() => vs
                .iter()
                .map(|v| match v {
                    Value::Float(f) => Ok(SweepValue::Num(*f)),
                    Value::Integer(n) => Ok(SweepValue::Num(*n as f64)),
                    Value::String(s) => Ok(SweepValue::Text(s.clone())),
                    _ => Err(Error::config(
                        format!("{path}.values"),
                        "entries must be numbers or strings",
                    )),
                })
                .collect::<Result<Vec<_>>>()?,
            _ => {
                return Err(Error::config(
                    format!("{path}.values"),
                    "must be a nonempty array",
                ))
            }
        };
        axes.push(SweepAxis { key, values });
    }
    let plan = SweepPlan { axes };
    r.echo.insert(
        "sweep.axis".into(),
        Echoed {
            value: serde_json::to_value(&plan.axes)?,
            defaulted: false,
        },
    );
    Ok(plan)
}

fn read_oracle(r: &mut Reader) -> Result<OracleConfig> {
    let betas = r.f64_vec_or("oracle.beta", &[0.0])?;
    let default_a = vec!["x".to_string(); betas.len()];
    let covs = r.str_vec_or("oracle.covariates", &default_a)?;
    if covs.len() != betas.len() {
        return Err(Error::config(
            "oracle.covariates",
            "need one expression per entry of oracle.beta",
        ));
    }
    let covariates = betas
        .into_iter()
        .zip(&covs)
        .map(|(b, s)| {
            Ok((
                b,
                parse_expression(s)
                    .map_err(|e| Error::config("oracle.covariates", e.to_string()))?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let length = r.f64_or("oracle.length", 3.0)?;
    let initial = match r.opt_str("oracle.initial")? {
        Some(s) => {
            parse_expression(&s).map_err(|e| Error::config("oracle.initial", e.to_string()))?
        }
        None => {
            let e = parse_expression(&format!("gauss({:?}, 0.2)", 0.5 * length))?;
            r.echo_default("oracle.initial", json!(pretty_print(&e)));
            e
        }
    };
    Ok(OracleConfig {
        length,
        n_points: r.usize_or("oracle.n", 3000)?,
        sigma: r.f64_or("oracle.sigma", 0.01)?,
        tau: r.f64_or("oracle.tau", 1e-3)?,
        covariates,
        initial,
        t_final: r.f64_or("oracle.t_final", 1.0)?,
        samples: r.usize_or("oracle.samples", 50)?,
    })
}

/// Reads typed values out of the table, recording each access.
struct Reader<'a> {
    table: &'a Table,
    used: BTreeSet<String>,
    ignored: BTreeSet<String>,
    echo: BTreeMap<String, Echoed>,
}

impl<'a> Reader<'a> {
    fn new(table: &'a Table) -> Self {
        Reader {
            table,
            used: BTreeSet::new(),
            ignored: BTreeSet::new(),
            echo: BTreeMap::new(),
        }
    }

    fn ignore_section(&mut self, s: &str) {
        self.ignored.insert(s.to_string());
    }

    fn raw(&self, path: &str) -> Option<&'a Value> {
        let mut parts = path.split('.');
        let mut cur = self.table.get(parts.next()?)?;
        for p in parts {
            cur = cur.as_table()?.get(p)?;
        }
        Some(cur)
    }

    fn take(&mut self, path: &str, value: Json) {
        self.used.insert(path.to_string());
        if !value.is_null() {
            self.echo.insert(
                path.to_string(),
                Echoed {
                    value,
                    defaulted: false,
                },
            );
        }
    }

    fn echo_default(&mut self, path: &str, value: Json) {
        self.echo.insert(
            path.to_string(),
            Echoed {
                value,
                defaulted: true,
            },
        );
    }

    fn missing(path: &str) -> Error {
        Error::config(path, "required key is missing")
    }

    fn number(path: &str, v: &Value) -> Result<f64> {
        match v {
            Value::Float(f) => Ok(*f),
            Value::Integer(n) => Ok(*n as f64),
            other => Err(Error::config(
                path,
                format!("expected a number, got {}", other.type_str()),
            )),
        }
    }

    fn opt_f64(&mut self, path: &str) -> Result<Option<f64>> {
        match self.raw(path) {
            Some(v) => {
                let x = Self::number(path, v)?;
                self.take(path, json!(x));
                Ok(Some(x))
            }
            None => Ok(None),
        }
    }

    fn f64(&mut self, path: &str) -> Result<f64> {
        self.opt_f64(path)?.ok_or_else(|| Self::missing(path))
    }

    fn f64_or(&mut self, path: &str, default: f64) -> Result<f64> {
        match self.opt_f64(path)? {
            Some(v) => Ok(v),
            None => {
                self.echo_default(path, json!(default));
                Ok(default)
            }
        }
    }

    fn opt_usize(&mut self, path: &str) -> Result<Option<usize>> {
        match self.raw(path) {
            Some(Value::Integer(n)) if *n >= 0 => {
                let n = *n as usize;
                self.take(path, json!(n));
                Ok(Some(n))
            }
            Some(_) => Err(Error::config(path, "expected a nonnegative integer")),
            None => Ok(None),
        }
    }

    fn usize(&mut self, path: &str) -> Result<usize> {
        self.opt_usize(path)?.ok_or_else(|| Self::missing(path))
    }

    fn usize_or(&mut self, path: &str, default: usize) -> Result<usize> {
        match self.opt_usize(path)? {
            Some(v) => Ok(v),
            None => {
                self.echo_default(path, json!(default));
                Ok(default)
            }
        }
    }

    fn bool_or(&mut self, path: &str, default: bool) -> Result<bool> {
        match self.raw(path) {
            Some(Value::Boolean(b)) => {
                self.take(path, json!(b));
                Ok(*b)
            }
            Some(_) => Err(Error::config(path, "expected true or false")),
            None => {
                self.echo_default(path, json!(default));
                Ok(default)
            }
        }
    }

    fn opt_str(&mut self, path: &str) -> Result<Option<String>> {
        match self.raw(path) {
            Some(Value::String(s)) => {
                self.take(path, json!(s));
                Ok(Some(s.clone()))
            }
            Some(_) => Err(Error::config(path, "expected a string")),
            None => Ok(None),
        }
    }

    fn str(&mut self, path: &str) -> Result<String> {
        self.opt_str(path)?.ok_or_else(|| Self::missing(path))
    }

    fn str_or(&mut self, path: &str, default: &str) -> Result<String> {
        match self.opt_str(path)? {
            Some(s) => Ok(s),
            None => {
                self.echo_default(path, json!(default));
                Ok(default.to_string())
            }
        }
    }

    fn expr(&mut self, path: &str) -> Result<Expr> {
        let s = self.str(path)?;
        parse_expression(&s).map_err(|e| Error::config(path, e.to_string()))
    }

    fn array(&self, path: &str) -> Result<Option<&'a Vec<Value>>> {
        match self.raw(path) {
            Some(Value::Array(a)) => Ok(Some(a)),
            Some(_) => Err(Error::config(path, "expected an array")),
            None => Ok(None),
        }
    }

    fn opt_f64_vec(&mut self, path: &str) -> Result<Option<Vec<f64>>> {
        let Some(a) = self.array(path)? else {
            return Ok(None);
        };
        let v = a
            .iter()
            .map(|x| Self::number(path, x))
            .collect::<Result<Vec<_>>>()?;
        self.take(path, json!(v));
        Ok(Some(v))
    }

    fn f64_vec(&mut self, path: &str) -> Result<Vec<f64>> {
        self.opt_f64_vec(path)?.ok_or_else(|| Self::missing(path))
    }

    fn f64_vec_or(&mut self, path: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.opt_f64_vec(path)? {
            Some(v) => Ok(v),
            None => {
                self.echo_default(path, json!(default));
                Ok(default.to_vec())
            }
        }
    }

    fn f64_matrix(&mut self, path: &str) -> Result<Vec<Vec<f64>>> {
        let a = self.array(path)?.ok_or_else(|| Self::missing(path))?;
        let m = a
            .iter()
            .map(|row| match row {
                Value::Array(r) => r
                    .iter()
                    .map(|x| Self::number(path, x))
                    .collect::<Result<Vec<_>>>(),
                _ => Err(Error::config(path, "expected an array of arrays")),
            })
            .collect::<Result<Vec<_>>>()?;
        self.take(path, json!(m));
        Ok(m)
    }

    fn opt_str_vec(&mut self, path: &str) -> Result<Option<Vec<String>>> {
        let Some(a) = self.array(path)? else {
            return Ok(None);
        };
        let v = a
            .iter()
            .map(|x| match x {
                Value::String(s) => Ok(s.clone()),
                _ => Err(Error::config(path, "expected an array of strings")),
            })
            .collect::<Result<Vec<_>>>()?;
        self.take(path, json!(v));
        Ok(Some(v))
    }

    fn str_vec_or(&mut self, path: &str, default: &[String]) -> Result<Vec<String>> {
        match self.opt_str_vec(path)? {
            Some(v) => Ok(v),
            None => {
                self.echo_default(path, json!(default));
                Ok(default.to_vec())
            }
        }
    }

    /// Fails on the first key that was present but never read.
    fn finish(&self) -> Result<()> {
        for (section, value) in self.table {
            if self.ignored.contains(section) {
                continue;
            }
            let Value::Table(t) = value else {
                return Err(Error::config(section, "expected a [section] table"));
            };
            for key in t.keys() {
                let path = format!("{section}.{key}");
                if !self.used.contains(&path) {
                    return Err(Error::config(
                        path,
                        format!("unknown or unused key for this {section} configuration"),
                    ));
                }
            }
        }
        Ok(())
    }
}
