//! Compiled right-hand side: face velocities, explicit sources and diffusion
//! coefficients for every state field.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::{potential_gradient, Field, Grid};
use crate::kernels::Perception;
use crate::memory::{HistoryBuffer, InitialHistory, TemporalKernelSpec};

use super::maps::{
    aggregation_velocity, nonlocal_reaction, sda_den_site_velocity, static_potential, StaticInputs,
};
use super::reactions::{
    conflict_map_rhs, consumer_resource_rhs, marks_rhs, motility, satisfaction,
};
use super::{
    ChainParams, CrMap, DelayModel, DistributedParams, Family, FieldInfo, FieldRole, MemorySource,
    ModelSpec, ScalarReaction, StaticMapKind,
};

/// Diffusion of one field for the implicit step.
#[derive(Debug, Clone, PartialEq)]
pub enum Diffusion {
    None,
    Constant(f64),
    /// Coefficients on the `n + 1` faces.
    Faces(Vec<f64>),
}

impl Diffusion {
    pub fn faces(&self, n_cells: usize) -> Option<Vec<f64>> {
        match self {
            Diffusion::None => None,
            Diffusion::Constant(d) if *d == 0.0 => None,
            Diffusion::Constant(d) => Some(vec![*d; n_cells + 1]),
            Diffusion::Faces(f) => Some(f.clone()),
        }
    }

    pub fn max(&self) -> f64 {
        match self {
            Diffusion::None => 0.0,
            Diffusion::Constant(d) => *d,
            Diffusion::Faces(f) => f.iter().copied().fold(0.0, f64::max),
        }
    }
}

/// Everything the stepper needs for one explicit stage.
#[derive(Debug, Clone)]
pub struct RhsEval {
    pub velocities: Vec<Option<Vec<f64>>>,
    pub sources: Vec<Field>,
    pub diffusion: Vec<Diffusion>,
}

/// Input of one direct-path spatiotemporal convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionSpec {
    pub kernel: TemporalKernelSpec,
    pub d3: f64,
    pub source: MemorySource,
}

/// Landscape expression with its sampled values cached when static.
#[derive(Debug, Clone)]
struct Landscape {
    expr: Expr,
    cached: Option<Field>,
}

impl Landscape {
    fn new(expr: &Expr, grid: &Grid) -> Result<Self> {
        let cached = if expr.depends_on_t() {
            None
        } else {
            Some(expr.sample(grid, 0.0)?)
        };
        Ok(Landscape {
            expr: expr.clone(),
            cached,
        })
    }

    fn at(&self, grid: &Grid, t: f64) -> Result<Field> {
        match &self.cached {
            Some(f) => Ok(f.clone()),
            None => self.expr.sample(grid, t),
        }
    }
}

#[derive(Clone)]
pub struct SystemRhs {
    model: ModelSpec,
    grid: Grid,
    fields: Vec<FieldInfo>,
    perception: Perception,
    landscapes: Vec<Landscape>,
}

impl std::fmt::Debug for SystemRhs {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SystemRhs")
            .field("family", &self.model.family.name())
            .field("grid", &self.grid)
            .field("fields", &self.fields)
            .finish()
    }
}

fn scaled(v: Vec<f64>, c: f64) -> Vec<f64> {
    v.into_iter().map(|x| c * x).collect()
}

fn axpy(mut a: Vec<f64>, c: f64, b: &[f64]) -> Vec<f64> {
    for (x, y) in a.iter_mut().zip(b) {
        *x += c * y;
    }
    a
}

impl SystemRhs {
    pub fn new(model: &ModelSpec, grid: &Grid) -> Result<Self> {
        model.validate()?;
        if let Family::Distributed(p) = &model.family {
            if p.path == super::DistributedPath::Augmented {
                return SystemRhs::new(&super::augment_distributed(model)?, grid);
            }
        }
        let perception = Perception::new(&model.kernel, grid)?;
        let mut exprs: Vec<&Expr> = Vec::new();
        match &model.family {
            Family::PerceptionForaging { landscape, .. } => exprs.push(landscape),
            Family::StaticMap { map, .. } => match map {
                StaticMapKind::DenSite { x0 } => {
                    if !(0.0..=grid.length()).contains(x0) {
                        return Err(Error::config(
                            "model.x0",
                            format!("den site {x0} lies outside the habitat"),
                        ));
                    }
                }
                StaticMapKind::GivenMap { m }
                | StaticMapKind::AvgDensity { m }
                | StaticMapKind::PerCapita { m } => exprs.push(m),
            },
            Family::ShortLong(p) => {
                for s in [&p.source_s, &p.source_l] {
                    if let MemorySource::Landscape(e) = s {
                        exprs.push(e);
                    }
                }
            }
            Family::StarvationDenSite(p) => {
                if !(0.0..=grid.length()).contains(&p.x0) {
                    return Err(Error::config(
                        "model.x0",
                        format!("den site {} lies outside the habitat", p.x0),
                    ));
                }
                exprs.push(&p.resource)
            }
            Family::Distributed(p) => {
                if let MemorySource::Landscape(e) = &p.source {
                    exprs.push(e);
                }
            }
            _ => {}
        }
        let landscapes = exprs
            .into_iter()
            .map(|e| Landscape::new(e, grid))
            .collect::<Result<_>>()?;
        Ok(SystemRhs {
            model: model.clone(),
            grid: *grid,
            fields: model.fields(),
            perception,
            landscapes,
        })
    }

    /// The model actually integrated (augmented if requested).
    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn fields(&self) -> &[FieldInfo] {
        &self.fields
    }

    pub fn perception(&self) -> &Perception {
        &self.perception
    }

    /// Resource landscape `m(x, t)` of families that have one.
    pub fn resource(&self, t: f64) -> Option<Result<Field>> {
        match &self.model.family {
            Family::PerceptionForaging { .. } | Family::StarvationDenSite(_) => {
                Some(self.landscapes[0].at(&self.grid, t))
            }
            Family::StaticMap { map, .. } if !matches!(map, StaticMapKind::DenSite { .. }) => {
                Some(self.landscapes[0].at(&self.grid, t))
            }
            _ => None,
        }
    }

    /// Spatiotemporal convolutions the stepper must maintain (direct path).
    pub fn convolutions(&self) -> Vec<ConvolutionSpec> {
        let Family::Distributed(p) = &self.model.family else {
            return Vec::new();
        };
        let mut out = vec![ConvolutionSpec {
            kernel: self.model.temporal,
            d3: p.d3,
            source: p.source.clone(),
        }];
        if let Some(m) = p.maturation {
            out.push(ConvolutionSpec {
                kernel: m,
                d3: p.d3,
                source: MemorySource::Density,
            });
        }
        out
    }

    /// Field fed into convolution `spec` at time `t`.
    pub fn convolution_input(
        &self,
        spec: &ConvolutionSpec,
        t: f64,
        fields: &[Field],
    ) -> Result<Field> {
        match &spec.source {
            MemorySource::Density => Ok(fields[0].clone()),
            MemorySource::Landscape(e) => e.sample(&self.grid, t),
        }
    }

    /// Prehistory of a convolution input given the prehistory of the state.
    pub fn convolution_initial(
        &self,
        spec: &ConvolutionSpec,
        state: &InitialHistory,
    ) -> Result<InitialHistory> {
        match &spec.source {
            MemorySource::Density => match state {
                InitialHistory::Constant(f) => Ok(InitialHistory::Constant(vec![f[0].clone()])),
                InitialHistory::Expressions { grid, exprs } => Ok(InitialHistory::Expressions {
                    grid: *grid,
                    exprs: vec![exprs[0].clone()],
                }),
            },
            MemorySource::Landscape(e) => Ok(InitialHistory::Expressions {
                grid: self.grid,
                exprs: vec![e.clone()],
            }),
        }
    }

    /// Initial values of auxiliary chain fields: each stage is the relaxed
    /// state `(I - tau d3 Laplacian)^-1` of the previous one, which is the
    /// memory of a constant prehistory.
    pub fn chain_initial(&self, u0: &Field) -> Vec<Field> {
        let Family::Chain(p) = &self.model.family else {
            return Vec::new();
        };
        let n = self.grid.n_cells();
        let relax = |f: &Field, tau: f64| -> Field {
            let faces = vec![tau * p.d3; n + 1];
            let v = crate::linalg::implicit_diffusion(&self.grid, &faces, 1.0, f.values());
            Field::new(self.grid, v).expect("same grid")
        };
        let mut out = Vec::new();
        let mut cur = u0.clone();
        for _ in 0..p.memory.stages {
            cur = relax(&cur, p.memory.tau);
            out.push(cur.clone());
        }
        if let Some(m) = p.maturation {
            let mut cur = u0.clone();
            for _ in 0..m.stages {
                cur = relax(&cur, m.tau);
                out.push(cur.clone());
            }
        }
        out
    }

    fn perceived_gradient(&self, f: &Field) -> Vec<f64> {
        potential_gradient(&self.perception.apply(f))
    }

    /// Right-hand side at time `t`. `history` is required by discrete-delay
    /// families, `convolved` holds the direct-path convolutions in the order
    /// of [`SystemRhs::convolutions`].
    pub fn eval(
        &self,
        t: f64,
        fields: &[Field],
        history: Option<&HistoryBuffer>,
        convolved: &[Field],
    ) -> Result<RhsEval> {
        let g = self.grid;
        let nf = self.fields.len();
        let mut velocities: Vec<Option<Vec<f64>>> = vec![None; nf];
        let mut sources: Vec<Field> = (0..nf).map(|_| g.zeros()).collect();
        let mut diffusion: Vec<Diffusion> = vec![Diffusion::None; nf];
        match &self.model.family {
            Family::PerceptionForaging { d, gamma, .. } => {
                let m = self.landscapes[0].at(&g, t)?;
                velocities[0] = Some(scaled(self.perceived_gradient(&m), *gamma));
                diffusion[0] = Diffusion::Constant(*d);
            }
            Family::StaticMap { d, gamma, map } => {
                let m = match map {
                    StaticMapKind::DenSite { .. } => None,
                    _ => Some(self.landscapes[0].at(&g, t)?),
                };
                let inputs = StaticInputs {
                    m: m.as_ref(),
                    u: Some(&fields[0]),
                    gamma: *gamma,
                };
                let p = static_potential(map, inputs, &g)?;
                velocities[0] = Some(match map {
                    StaticMapKind::DenSite { .. } => scaled(potential_gradient(&p), -1.0),
                    _ => scaled(self.perceived_gradient(&p), *gamma),
                });
                diffusion[0] = Diffusion::Constant(*d);
            }
            Family::Aggregation { d, gamma, logistic } => {
                let v = aggregation_velocity(&fields[..1], &[vec![*gamma]], &self.perception);
                velocities[0] = v.into_iter().next();
                diffusion[0] = Diffusion::Constant(*d);
                if let Some(l) = logistic {
                    sources[0] = fields[0].map(|u| l.eval(u, u));
                }
            }
            Family::MultiAggregation { d, gamma } => {
                let n = d.len();
                let v = aggregation_velocity(&fields[..n], gamma, &self.perception);
                for (i, vi) in v.into_iter().enumerate() {
                    velocities[i] = Some(vi);
                    diffusion[i] = Diffusion::Constant(d[i]);
                }
            }
            Family::Marks {
                d,
                gamma,
                alpha,
                mu,
            } => {
                let n = d.len();
                let (u, p) = fields.split_at(n);
                for i in 0..n {
                    velocities[i] = Some(scaled(self.perceived_gradient(&p[i]), gamma[i]));
                    diffusion[i] = Diffusion::Constant(d[i]);
                    sources[n + i] = marks_rhs(i, &p[i], u, alpha, *mu);
                }
            }
            Family::ConflictZones(p) => {
                let n = p.d.len();
                let (u, k) = fields.split_at(n);
                for i in 0..n {
                    velocities[i] = Some(scaled(self.perceived_gradient(&k[i]), -p.gamma[i]));
                    diffusion[i] = Diffusion::Constant(p.d[i]);
                    diffusion[n + i] = Diffusion::Constant(p.epsilon[i]);
                    let lead = if p.nonlocal_conflict {
                        self.perception.apply(&u[i])
                    } else {
                        u[i].clone()
                    };
                    sources[n + i] =
                        conflict_map_rhs(i, &k[i], &lead, u, &p.rho, p.mu, p.beta, p.variant);
                }
            }
            Family::ConsumerResource(p) => {
                let (u, v) = (&fields[0], &fields[1]);
                let target = if p.map == CrMap::None { v } else { &fields[2] };
                velocities[0] = Some(scaled(self.perceived_gradient(target), p.gamma));
                diffusion[0] = Diffusion::Constant(p.d1);
                diffusion[1] = Diffusion::Constant(p.d2);
                let n = g.n_cells();
                let mut f = vec![0.0; n];
                let mut gg = vec![0.0; n];
                for x in 0..n {
                    let r = consumer_resource_rhs(u.values()[x], v.values()[x], &p.rates);
                    f[x] = r.f;
                    gg[x] = r.g;
                }
                sources[0] = Field::new(g, f)?;
                sources[1] = Field::new(g, gg)?;
                match p.map {
                    CrMap::None => {}
                    CrMap::LinearQ { b, mu } => {
                        sources[2] = v.scale(b).axpy(-mu, &fields[2]);
                    }
                    CrMap::BilinearQ { b, mu, xi } => {
                        let q = &fields[2];
                        let vals = (0..n)
                            .map(|x| {
                                let (ux, vx, qx) = (u.values()[x], v.values()[x], q.values()[x]);
                                b * ux * vx - (mu + xi * ux) * qx
                            })
                            .collect();
                        sources[2] = Field::new(g, vals)?;
                    }
                }
            }
            Family::DiscreteDelay(m) => {
                let tau = self.model.temporal.tau().unwrap_or(0.0);
                let hist = history.ok_or_else(|| {
                    Error::Unsupported("delay model stepped without history".into())
                })?;
                let past = |species: usize| -> Result<Field> { hist.sample(species, t - tau) };
                match m {
                    DelayModel::Scalar {
                        d1,
                        gamma,
                        reaction,
                    } => {
                        let ut = past(0)?;
                        velocities[0] = Some(scaled(self.perceived_gradient(&ut), *gamma));
                        diffusion[0] = Diffusion::Constant(*d1);
                        match reaction {
                            ScalarReaction::None => {}
                            ScalarReaction::Logistic(l) => {
                                sources[0] = fields[0].map(|u| l.eval(u, u))
                            }
                            ScalarReaction::Nonlocal { logistic, argument } => {
                                let w = nonlocal_reaction(&fields[0], Some(hist), 0, *argument)?;
                                sources[0] = fields[0].zip_map(&w, |u, w| logistic.eval(u, w));
                            }
                        }
                    }
                    DelayModel::ConsumerResource {
                        d_u,
                        d_v,
                        chi,
                        kinetics,
                    } => {
                        let vt = past(1)?;
                        velocities[0] = Some(scaled(self.perceived_gradient(&vt), *chi));
                        diffusion[0] = Diffusion::Constant(*d_u);
                        diffusion[1] = Diffusion::Constant(*d_v);
                        self.two_species_sources(&mut sources, fields, kinetics)?;
                    }
                    DelayModel::Competition {
                        d_u,
                        d_v,
                        cross,
                        kinetics,
                    } => {
                        let gu = self.perceived_gradient(&past(0)?);
                        let gv = self.perceived_gradient(&past(1)?);
                        for i in 0..2 {
                            let v = axpy(scaled(gu.clone(), -cross[i][0]), -cross[i][1], &gv);
                            velocities[i] = Some(v);
                        }
                        diffusion[0] = Diffusion::Constant(*d_u);
                        diffusion[1] = Diffusion::Constant(*d_v);
                        self.two_species_sources(&mut sources, fields, kinetics)?;
                    }
                }
            }
            Family::Distributed(p) => self.distributed(
                p,
                fields,
                convolved,
                &mut velocities,
                &mut sources,
                &mut diffusion,
            )?,
            Family::Chain(p) => {
                self.chain(p, fields, &mut velocities, &mut sources, &mut diffusion)
            }
            Family::ShortLong(p) => {
                let mut next = 0;
                let mut source = |s: &MemorySource| -> Result<Field> {
                    match s {
                        MemorySource::Density => Ok(fields[0].clone()),
                        MemorySource::Landscape(_) => {
                            let f = self.landscapes[next].at(&g, t);
                            next += 1;
                            f
                        }
                    }
                };
                let a_s = source(&p.source_s)?;
                let a_l = source(&p.source_l)?;
                let (rs, rl) = super::short_long_rhs(
                    &fields[1], &fields[2], &a_s, &a_l, p.alpha_s, p.alpha_l, p.beta_s, p.beta_l,
                );
                sources[1] = rs;
                sources[2] = rl;
                let combined = super::combined_map(&fields[1], &fields[2], p.c1, p.c2);
                velocities[0] = Some(self.perceived_gradient(&combined));
                diffusion[0] = Diffusion::Constant(p.d);
            }
            Family::StarvationDenSite(p) => {
                let m = self.landscapes[0].at(&g, t)?;
                let u = &fields[0];
                velocities[0] = Some(sda_den_site_velocity(
                    u,
                    &m,
                    p.x0,
                    p.gamma,
                    p.gamma_plus,
                    &p.satisfaction,
                )?);
                let s = &p.satisfaction;
                diffusion[0] = if s.d_plus == s.d_minus {
                    Diffusion::Constant(s.d_plus)
                } else {
                    let sat = satisfaction(s.kind, &m, u)?;
                    Diffusion::Faces(face_average(&motility(s, &sat)))
                };
            }
        }
        Ok(RhsEval {
            velocities,
            sources,
            diffusion,
        })
    }

    fn two_species_sources(
        &self,
        sources: &mut [Field],
        fields: &[Field],
        kinetics: &super::TwoSpeciesKinetics,
    ) -> Result<()> {
        let n = self.grid.n_cells();
        let mut f = vec![0.0; n];
        let mut gv = vec![0.0; n];
        for x in 0..n {
            let (a, b) = kinetics.eval(fields[0].values()[x], fields[1].values()[x]);
            f[x] = a;
            gv[x] = b;
        }
        sources[0] = Field::new(self.grid, f)?;
        sources[1] = Field::new(self.grid, gv)?;
        Ok(())
    }

    fn distributed(
        &self,
        p: &DistributedParams,
        fields: &[Field],
        convolved: &[Field],
        velocities: &mut [Option<Vec<f64>>],
        sources: &mut [Field],
        diffusion: &mut [Diffusion],
    ) -> Result<()> {
        if convolved.is_empty() {
            return Err(Error::Unsupported(
                "direct path stepped without its convolution".into(),
            ));
        }
        velocities[0] = Some(scaled(self.perceived_gradient(&convolved[0]), p.gamma));
        diffusion[0] = Diffusion::Constant(p.d1);
        if let Some(l) = &p.logistic {
            let w = if p.maturation.is_some() {
                &convolved[1]
            } else {
                &fields[0]
            };
            sources[0] = fields[0].zip_map(w, |u, w| l.eval(u, w));
        }
        Ok(())
    }

    fn chain(
        &self,
        p: &ChainParams,
        fields: &[Field],
        velocities: &mut [Option<Vec<f64>>],
        sources: &mut [Field],
        diffusion: &mut [Diffusion],
    ) {
        let m = p.memory.stages;
        diffusion[0] = Diffusion::Constant(p.d1);
        velocities[0] = Some(scaled(self.perceived_gradient(&fields[m]), p.gamma));
        let mut feed = |start: usize, stages: usize, tau: f64| {
            for s in 0..stages {
                let idx = start + s;
                let input = if s == 0 { &fields[0] } else { &fields[idx - 1] };
                sources[idx] = input.axpy(-1.0, &fields[idx]).scale(1.0 / tau);
                diffusion[idx] = Diffusion::Constant(p.d3);
            }
        };
        feed(1, m, p.memory.tau);
        let mut w_last = None;
        if let Some(mat) = p.maturation {
            feed(1 + m, mat.stages, mat.tau);
            w_last = Some(m + mat.stages);
        }
        if let Some(l) = &p.logistic {
            let w = w_last.map_or(&fields[0], |i| &fields[i]);
            sources[0] = fields[0].zip_map(w, |u, w| l.eval(u, w));
        }
    }

    pub fn roles(&self) -> Vec<FieldRole> {
        self.fields.iter().map(|f| f.role).collect()
    }
}

/// Arithmetic mean of neighbouring cells on interior faces, the adjacent cell
/// value on boundary faces (periodic faces wrap).
fn face_average(f: &Field) -> Vec<f64> {
    let n = f.len();
    let v = f.values();
    let mut out = vec![0.0; n + 1];
    for i in 1..n {
        out[i] = 0.5 * (v[i - 1] + v[i]);
    }
    if f.grid().bc().is_periodic() {
        out[0] = 0.5 * (v[n - 1] + v[0]);
        out[n] = out[0];
    } else {
        out[0] = v[0];
        out[n] = v[n - 1];
    }
    out
}
