//! The model zoo: family specifications, validation, field layout and the
//! compiled right-hand side consumed by the stepper.

mod maps;
mod reactions;
mod rhs;

pub use maps::{
    aggregation_velocity, delay_potential, nonlocal_reaction, sda_den_site_velocity,
    static_potential, NonlocalKind, StaticInputs,
};
pub use reactions::{
    combined_map, conflict_map_rhs, conflict_steady_map, consumer_resource_coexistence,
    consumer_resource_rhs, lotka_volterra_coexistence, lotka_volterra_competition, marks_rhs,
    marks_steady_state, motility, satisfaction, short_long_rhs, short_long_steady_state,
    starvation_rate, ConsumerResourceRates, CrRhs,
};
pub use rhs::{ConvolutionSpec, Diffusion, RhsEval, SystemRhs};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::kernels::KernelSpec;
use crate::memory::TemporalKernelSpec;

/// Logistic kinetics `r u (1 - w / K)`, with `w = u` unless a nonlocal or
/// delayed argument is substituted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Logistic {
    pub r: f64,
    pub k: f64,
}

impl Logistic {
    pub fn eval(&self, u: f64, w: f64) -> f64 {
        self.r * u * (1.0 - w / self.k)
    }

    /// `d f(u, u) / du` at `u`.
    pub fn derivative(&self, u: f64) -> f64 {
        self.r * (1.0 - 2.0 * u / self.k)
    }

    fn validate(&self, path: &str) -> Result<()> {
        if !(self.r >= 0.0 && self.r.is_finite()) {
            return Err(Error::config(format!("{path}.r"), "must be nonnegative"));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::config(
                format!("{path}.carrying_capacity"),
                "must be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StaticMapKind {
    /// Pull towards the den at `x0`.
    DenSite { x0: f64 },
    /// The map itself is the potential.
    GivenMap { m: Expr },
    /// Resource relative to its spatial average.
    AvgDensity { m: Expr },
    /// Resource per capita, `m / u`.
    PerCapita { m: Expr },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictVariant {
    #[default]
    Magnitude,
    Probability,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConflictParams {
    pub d: Vec<f64>,
    /// Repulsion rates; `gamma_i > 0` moves species `i` away from its
    /// conflict zones.
    pub gamma: Vec<f64>,
    pub rho: Vec<Vec<f64>>,
    pub mu: f64,
    pub beta: f64,
    pub variant: ConflictVariant,
    /// Memory smearing rate per species.
    pub epsilon: Vec<f64>,
    /// Conflicts sensed at a distance through the kernel.
    pub nonlocal_conflict: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CrMap {
    /// Consumers follow the perceived resource directly.
    None,
    /// `q_t = b v - mu q`
    LinearQ { b: f64, mu: f64 },
    /// `q_t = b u v - (mu + xi u) q`
    BilinearQ { b: f64, mu: f64, xi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConsumerResourceParams {
    pub d1: f64,
    pub d2: f64,
    pub gamma: f64,
    pub rates: ConsumerResourceRates,
    pub map: CrMap,
}

/// Reaction term of a scalar delay model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarReaction {
    None,
    Logistic(Logistic),
    /// `r u (1 - w / K)` with `w` a spatial average or delayed/perceived value.
    Nonlocal {
        logistic: Logistic,
        argument: NonlocalKind,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TwoSpeciesKinetics {
    None,
    HollingII(ConsumerResourceRates),
    LotkaVolterra { alpha: f64, beta: f64, gamma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DelayModel {
    /// `u_t = d1 u_xx - (u gamma (u_tau)_x)_x + f`
    Scalar {
        d1: f64,
        gamma: f64,
        reaction: ScalarReaction,
    },
    /// Consumer `u` remembers where the resource `v` was `tau` ago.
    ConsumerResource {
        d_u: f64,
        d_v: f64,
        chi: f64,
        kinetics: TwoSpeciesKinetics,
    },
    /// Memory-based self- and cross-diffusion; `cross[i][j]` couples species
    /// `i` to the delayed field `j` with the sign of a diffusion coefficient.
    Competition {
        d_u: f64,
        d_v: f64,
        cross: [[f64; 2]; 2],
        kinetics: TwoSpeciesKinetics,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributedPath {
    #[default]
    Augmented,
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MemorySource {
    /// The population density itself.
    Density,
    /// A prescribed landscape `a(x, t)`.
    Landscape(Expr),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributedParams {
    pub d1: f64,
    /// Attraction to the remembered field (`gamma < 0` repels).
    pub gamma: f64,
    /// Diffusion rate of the spatial memory kernel.
    pub d3: f64,
    pub logistic: Option<Logistic>,
    /// Kernel of the maturation delay inside the logistic term.
    pub maturation: Option<TemporalKernelSpec>,
    pub path: DistributedPath,
    pub source: MemorySource,
}

/// A distributed-delay model rewritten as a chain of auxiliary fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Chain {
    pub stages: usize,
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainParams {
    pub d1: f64,
    pub gamma: f64,
    pub d3: f64,
    pub logistic: Option<Logistic>,
    pub memory: Chain,
    pub maturation: Option<Chain>,
    /// Set when the chain comes from a strong kernel, whose equivalence is a
    /// standard construction rather than a stated result.
    pub derived_construction: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShortLongParams {
    pub d: f64,
    pub alpha_s: f64,
    pub alpha_l: f64,
    pub beta_s: f64,
    pub beta_l: f64,
    pub c1: f64,
    pub c2: f64,
    pub source_s: MemorySource,
    pub source_l: MemorySource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SatisfactionKind {
    /// `s = m / u`
    #[default]
    SupplyDemand,
    /// `s = m / mean(m)`
    RelativeAverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResponseShape {
    /// Switch at `s = 1`; `s = 1` itself takes the satisfied branch.
    #[default]
    Step,
    /// Logistic switch `1 / (1 + exp(-kappa (1 - s)))`.
    Smooth { kappa: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SatisfactionSpec {
    pub kind: SatisfactionKind,
    pub shape: ResponseShape,
    /// Motility when unsatisfied.
    pub d_plus: f64,
    /// Motility when satisfied.
    pub d_minus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StarvationParams {
    pub gamma: f64,
    pub gamma_plus: f64,
    pub x0: f64,
    pub satisfaction: SatisfactionSpec,
    pub resource: Expr,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    PerceptionForaging {
        d: f64,
        gamma: f64,
        landscape: Expr,
    },
    StaticMap {
        d: f64,
        gamma: f64,
        map: StaticMapKind,
    },
    Aggregation {
        d: f64,
        gamma: f64,
        logistic: Option<Logistic>,
    },
    MultiAggregation {
        d: Vec<f64>,
        gamma: Vec<Vec<f64>>,
    },
    Marks {
        d: Vec<f64>,
        gamma: Vec<f64>,
        alpha: Vec<Vec<f64>>,
        mu: f64,
    },
    ConflictZones(ConflictParams),
    ConsumerResource(ConsumerResourceParams),
    DiscreteDelay(DelayModel),
    Distributed(DistributedParams),
    Chain(ChainParams),
    ShortLong(ShortLongParams),
    StarvationDenSite(StarvationParams),
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::PerceptionForaging { .. } => "perception_foraging",
            Family::StaticMap { .. } => "static_map",
            Family::Aggregation { .. } => "aggregation",
            Family::MultiAggregation { .. } => "multi_aggregation",
            Family::Marks { .. } => "marks",
            Family::ConflictZones(_) => "conflict_zones",
            Family::ConsumerResource(_) => "consumer_resource",
            Family::DiscreteDelay(_) => "discrete_delay",
            Family::Distributed(_) => "distributed",
            Family::Chain(_) => "chain",
            Family::ShortLong(_) => "short_long",
            Family::StarvationDenSite(_) => "starvation_den_site",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSpec {
    pub family: Family,
    pub kernel: KernelSpec,
    pub temporal: TemporalKernelSpec,
}

/// Whether a field is a moving population or a map/auxiliary quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldRole {
    Density,
    Map,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldInfo {
    pub name: String,
    pub role: FieldRole,
}

fn density(name: impl Into<String>) -> FieldInfo {
    FieldInfo {
        name: name.into(),
        role: FieldRole::Density,
    }
}

fn map(name: impl Into<String>) -> FieldInfo {
    FieldInfo {
        name: name.into(),
        role: FieldRole::Map,
    }
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be positive, got {v}")))
    }
}

fn nonneg(path: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be nonnegative, got {v}")))
    }
}

fn finite(path: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be finite, got {v}")))
    }
}

fn square(path: &str, m: &[Vec<f64>], n: usize) -> Result<()> {
    if m.len() != n || m.iter().any(|row| row.len() != n) {
        return Err(Error::config(path, format!("must be a {n}x{n} matrix")));
    }
    for row in m {
        for &v in row {
            finite(path, v)?;
        }
    }
    Ok(())
}

fn species_names(n: usize) -> Vec<String> {
    if n == 1 {
        vec!["u".into()]
    } else {
        (1..=n).map(|i| format!("u{i}")).collect()
    }
}

fn chain_names(prefix: &str, stages: usize) -> Vec<String> {
    if stages == 1 {
        vec![prefix.to_string()]
    } else {
        (1..=stages).map(|i| format!("{prefix}{i}")).collect()
    }
}

fn chain_of(spec: &TemporalKernelSpec, path: &str) -> Result<Chain> {
    match *spec {
        TemporalKernelSpec::Weak { tau } => Ok(Chain { stages: 1, tau }),
        TemporalKernelSpec::Strong { tau } => Ok(Chain { stages: 2, tau }),
        other => Err(Error::config(
            path,
            format!("expected a weak or strong kernel, got {}", other.name()),
        )),
    }
}

impl ModelSpec {
    /// Checks every sign constraint and dimension. Soft constraints are
    /// returned as warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        self.kernel.validate()?;
        self.temporal.validate("delay.tau")?;
        let mut warnings = Vec::new();
        match &self.family {
            Family::PerceptionForaging { d, gamma, .. } => {
                positive("model.d", *d)?;
                finite("model.gamma", *gamma)?;
            }
            Family::StaticMap { d, gamma, .. } => {
                positive("model.d", *d)?;
                finite("model.gamma", *gamma)?;
            }
            Family::Aggregation { d, gamma, logistic } => {
                positive("model.d", *d)?;
                finite("model.gamma", *gamma)?;
                if let Some(l) = logistic {
                    l.validate("model")?;
                }
            }
            Family::MultiAggregation { d, gamma } => {
                if d.is_empty() {
                    return Err(Error::config("model.d", "need at least one species"));
                }
                for v in d {
                    positive("model.d", *v)?;
                }
                square("model.gamma", gamma, d.len())?;
            }
            Family::Marks {
                d,
                gamma,
                alpha,
                mu,
            } => {
                let n = d.len();
                if n == 0 {
                    return Err(Error::config("model.d", "need at least one species"));
                }
                for v in d {
                    positive("model.d", *v)?;
                }
                if gamma.len() != n {
                    return Err(Error::config("model.gamma", format!("need {n} entries")));
                }
                for v in gamma {
                    finite("model.gamma", *v)?;
                }
                square("model.alpha", alpha, n)?;
                nonneg("model.mu", *mu)?;
            }
            Family::ConflictZones(p) => {
                let n = p.d.len();
                if n == 0 {
                    return Err(Error::config("model.d", "need at least one species"));
                }
                for v in &p.d {
                    positive("model.d", *v)?;
                }
                if p.gamma.len() != n || p.epsilon.len() != n {
                    return Err(Error::config(
                        "model.gamma",
                        format!("gamma and epsilon need {n} entries each"),
                    ));
                }
                for v in &p.gamma {
                    finite("model.gamma", *v)?;
                }
                for v in &p.epsilon {
                    nonneg("model.epsilon", *v)?;
                }
                square("model.rho", &p.rho, n)?;
                for i in 0..n {
                    for j in 0..n {
                        nonneg("model.rho", p.rho[i][j])?;
                        if p.rho[i][j] != p.rho[j][i] {
                            return Err(Error::config(
                                "model.rho",
                                format!(
                                    "conflict rates must be symmetric: rho[{i}][{j}] = {} but rho[{j}][{i}] = {}",
                                    p.rho[i][j], p.rho[j][i]
                                ),
                            ));
                        }
                    }
                }
                nonneg("model.mu", p.mu)?;
                nonneg("model.beta", p.beta)?;
            }
            Family::ConsumerResource(p) => {
                positive("model.d1", p.d1)?;
                nonneg("model.d2", p.d2)?;
                finite("model.gamma", p.gamma)?;
                p.rates.validate()?;
                match p.map {
                    CrMap::None => {}
                    CrMap::LinearQ { b, mu } => {
                        nonneg("model.b", b)?;
                        nonneg("model.mu", mu)?;
                    }
                    CrMap::BilinearQ { b, mu, xi } => {
                        nonneg("model.b", b)?;
                        nonneg("model.mu", mu)?;
                        nonneg("model.xi", xi)?;
                    }
                }
            }
            Family::DiscreteDelay(m) => {
                let TemporalKernelSpec::DiscreteDelay { .. } = self.temporal else {
                    return Err(Error::config(
                        "delay.kind",
                        "discrete delay models need kind = \"discrete\"",
                    ));
                };
                match m {
                    DelayModel::Scalar {
                        d1,
                        gamma,
                        reaction,
                    } => {
                        positive("model.d1", *d1)?;
                        finite("model.gamma", *gamma)?;
                        match reaction {
                            ScalarReaction::None => {}
                            ScalarReaction::Logistic(l) => l.validate("model")?,
                            ScalarReaction::Nonlocal { logistic, argument } => {
                                logistic.validate("model")?;
                                argument.validate()?;
                            }
                        }
                    }
                    DelayModel::ConsumerResource {
                        d_u,
                        d_v,
                        chi,
                        kinetics,
                    } => {
                        positive("model.d_u", *d_u)?;
                        nonneg("model.d_v", *d_v)?;
                        finite("model.chi", *chi)?;
                        kinetics.validate()?;
                    }
                    DelayModel::Competition {
                        d_u,
                        d_v,
                        cross,
                        kinetics,
                    } => {
                        positive("model.d_u", *d_u)?;
                        positive("model.d_v", *d_v)?;
                        for row in cross {
                            for v in row {
                                finite("model.cross", *v)?;
                            }
                        }
                        kinetics.validate()?;
                    }
                }
            }
            Family::Distributed(p) => {
                if !self.temporal.is_distributed() {
                    return Err(Error::config(
                        "delay.kind",
                        "distributed models need a weak or strong kernel",
                    ));
                }
                positive("model.d1", p.d1)?;
                finite("model.gamma", p.gamma)?;
                nonneg("delay.d3", p.d3)?;
                if let Some(l) = &p.logistic {
                    l.validate("model")?;
                }
                if let Some(m) = &p.maturation {
                    chain_of(m, "delay.maturation_kind")?;
                    m.validate("delay.maturation_tau")?;
                    if p.logistic.is_none() {
                        return Err(Error::config(
                            "delay.maturation_kind",
                            "a maturation delay needs logistic kinetics",
                        ));
                    }
                }
            }
            Family::Chain(p) => {
                positive("model.d1", p.d1)?;
                finite("model.gamma", p.gamma)?;
                nonneg("delay.d3", p.d3)?;
                positive("delay.tau", p.memory.tau)?;
            }
            Family::ShortLong(p) => {
                positive("model.d", p.d)?;
                for (k, v) in [
                    ("model.alpha_s", p.alpha_s),
                    ("model.alpha_l", p.alpha_l),
                    ("model.beta_s", p.beta_s),
                    ("model.beta_l", p.beta_l),
                ] {
                    nonneg(k, v)?;
                }
                finite("model.c1", p.c1)?;
                finite("model.c2", p.c2)?;
                if p.alpha_l >= p.alpha_s {
                    warnings.push(format!(
                        "model.alpha_l = {} is not below model.alpha_s = {}; long-term memory usually has the smaller uptake rate",
                        p.alpha_l, p.alpha_s
                    ));
                }
                if p.beta_l >= p.beta_s {
                    warnings.push(format!(
                        "model.beta_l = {} is not below model.beta_s = {}; long-term memory usually has the smaller decay rate",
                        p.beta_l, p.beta_s
                    ));
                }
            }
            Family::StarvationDenSite(p) => {
                let s = &p.satisfaction;
                positive("model.d_minus", s.d_minus)?;
                if s.d_plus < s.d_minus {
                    return Err(Error::config(
                        "model.d_plus",
                        "must be at least model.d_minus",
                    ));
                }
                if let ResponseShape::Smooth { kappa } = s.shape {
                    positive("model.kappa", kappa)?;
                }
                if !(p.gamma > 0.0 && p.gamma < p.gamma_plus) {
                    return Err(Error::config(
                        "model.gamma",
                        format!(
                            "need 0 < gamma < gamma_plus so that resources take priority, got gamma = {} and gamma_plus = {}",
                            p.gamma, p.gamma_plus
                        ),
                    ));
                }
            }
        }
        Ok(warnings)
    }

    /// Names and roles of the state fields, in storage order.
    pub fn fields(&self) -> Vec<FieldInfo> {
        match &self.family {
            Family::PerceptionForaging { .. }
            | Family::StaticMap { .. }
            | Family::Aggregation { .. }
            | Family::StarvationDenSite(_) => vec![density("u")],
            Family::MultiAggregation { d, .. } => {
                species_names(d.len()).into_iter().map(density).collect()
            }
            Family::Marks { d, .. } => {
                let n = d.len();
                let mut f: Vec<FieldInfo> = species_names(n).into_iter().map(density).collect();
                f.extend((1..=n).map(|i| {
                    map(if n == 1 {
                        "p".to_string()
                    } else {
                        format!("p{i}")
                    })
                }));
                f
            }
            Family::ConflictZones(p) => {
                let n = p.d.len();
                let mut f: Vec<FieldInfo> = species_names(n).into_iter().map(density).collect();
                f.extend((1..=n).map(|i| {
                    map(if n == 1 {
                        "k".to_string()
                    } else {
                        format!("k{i}")
                    })
                }));
                f
            }
            Family::ConsumerResource(p) => {
                let mut f = vec![density("u"), density("v")];
                if p.map != CrMap::None {
                    f.push(map("q"));
                }
                f
            }
            Family::DiscreteDelay(m) => match m {
                DelayModel::Scalar { .. } => vec![density("u")],
                _ => vec![density("u"), density("v")],
            },
            Family::Distributed(_) => vec![density("u")],
            Family::Chain(p) => {
                let mut f = vec![density("u")];
                f.extend(chain_names("v", p.memory.stages).into_iter().map(map));
                if let Some(m) = p.maturation {
                    f.extend(chain_names("w", m.stages).into_iter().map(map));
                }
                f
            }
            Family::ShortLong(_) => vec![density("u"), map("m_s"), map("m_l")],
        }
    }

    pub fn n_species(&self) -> usize {
        self.fields()
            .iter()
            .filter(|f| f.role == FieldRole::Density)
            .count()
    }

    /// Largest delay the history must cover, if the model reads its past.
    pub fn history_horizon(&self, horizon_multiplier: f64) -> Option<f64> {
        match &self.family {
            Family::DiscreteDelay(m) => {
                let tau = self.temporal.tau().unwrap_or(0.0);
                let sigma = match m {
                    DelayModel::Scalar {
                        reaction: ScalarReaction::Nonlocal { argument, .. },
                        ..
                    } => argument.delay(),
                    _ => 0.0,
                };
                Some(tau.max(sigma))
            }
            Family::Distributed(p) if p.path == DistributedPath::Direct => {
                let tau = self.temporal.tau().unwrap_or(0.0);
                let mat = p.maturation.and_then(|m| m.tau()).unwrap_or(0.0);
                Some(horizon_multiplier * tau.max(mat))
            }
            _ => None,
        }
    }

    /// Shortest delay in the model, used to cap the time step.
    pub fn shortest_delay(&self) -> Option<f64> {
        let mut out: Option<f64> = None;
        let mut take = |v: f64| {
            if v > 0.0 {
                out = Some(out.map_or(v, |o: f64| o.min(v)));
            }
        };
        match &self.family {
            Family::DiscreteDelay(m) => {
                take(self.temporal.tau().unwrap_or(0.0));
                if let DelayModel::Scalar {
                    reaction: ScalarReaction::Nonlocal { argument, .. },
                    ..
                } = m
                {
                    take(argument.delay());
                }
            }
            Family::Distributed(p) => {
                take(self.temporal.tau().unwrap_or(0.0));
                if let Some(m) = p.maturation.and_then(|m| m.tau()) {
                    take(m);
                }
            }
            Family::Chain(p) => {
                take(p.memory.tau);
                if let Some(m) = p.maturation {
                    take(m.tau);
                }
            }
            _ => {}
        }
        out
    }

    /// Whether the family has any reaction or growth term acting on a
    /// density field.
    pub fn has_population_dynamics(&self) -> bool {
        match &self.family {
            Family::Aggregation { logistic, .. } => logistic.is_some(),
            Family::ConsumerResource(_) => true,
            Family::DiscreteDelay(m) => match m {
                DelayModel::Scalar { reaction, .. } => *reaction != ScalarReaction::None,
                DelayModel::ConsumerResource { kinetics, .. }
                | DelayModel::Competition { kinetics, .. } => *kinetics != TwoSpeciesKinetics::None,
            },
            Family::Distributed(p) => p.logistic.is_some(),
            Family::Chain(p) => p.logistic.is_some(),
            _ => false,
        }
    }
}

impl ConsumerResourceRates {
    fn validate(&self) -> Result<()> {
        positive("model.r", self.r)?;
        positive("model.carrying_capacity", self.k)?;
        positive("model.beta", self.beta)?;
        positive("model.alpha", self.alpha)?;
        positive("model.c", self.c)?;
        positive("model.death", self.death)?;
        Ok(())
    }
}

impl TwoSpeciesKinetics {
    fn validate(&self) -> Result<()> {
        match self {
            TwoSpeciesKinetics::None => Ok(()),
            TwoSpeciesKinetics::HollingII(r) => r.validate(),
            TwoSpeciesKinetics::LotkaVolterra { alpha, beta, gamma } => {
                positive("model.lv_alpha", *alpha)?;
                positive("model.lv_beta", *beta)?;
                positive("model.lv_gamma", *gamma)
            }
        }
    }

    /// Reaction pair `(f, g)` at a point.
    pub fn eval(&self, u: f64, v: f64) -> (f64, f64) {
        match *self {
            TwoSpeciesKinetics::None => (0.0, 0.0),
            TwoSpeciesKinetics::HollingII(r) => {
                let out = consumer_resource_rhs(u, v, &r);
                (out.f, out.g)
            }
            TwoSpeciesKinetics::LotkaVolterra { alpha, beta, gamma } => {
                lotka_volterra_competition(u, v, alpha, beta, gamma)
            }
        }
    }
}

/// Rewrites a distributed-delay model on the density as an augmented system
/// of auxiliary fields (one per weak stage, two per strong kernel).
pub fn augment_distributed(model: &ModelSpec) -> Result<ModelSpec> {
    let Family::Distributed(p) = &model.family else {
        return Err(Error::Unsupported(format!(
            "{} has no distributed delay to augment",
            model.family.name()
        )));
    };
    if p.source != MemorySource::Density {
        return Err(Error::Unsupported(
            "only a memory of the density itself can be augmented; use the direct path for landscapes".into(),
        ));
    }
    let memory = chain_of(&model.temporal, "delay.kind")?;
    let maturation = p
        .maturation
        .as_ref()
        .map(|m| chain_of(m, "delay.maturation_kind"))
        .transpose()?;
    let derived_construction = memory.stages > 1 || maturation.is_some_and(|m| m.stages > 1);
    Ok(ModelSpec {
        family: Family::Chain(ChainParams {
            d1: p.d1,
            gamma: p.gamma,
            d3: p.d3,
            logistic: p.logistic,
            memory,
            maturation,
            derived_construction,
        }),
        kernel: model.kernel,
        temporal: TemporalKernelSpec::None,
    })
}
