//! IMEX time integration: explicit conservative advection and sources,
//! backward-Euler diffusion, with conservation and positivity monitoring.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{total_mass, BoundaryCondition, Field, Grid};
use crate::linalg::implicit_diffusion;
use crate::memory::{DistributedConvolver, HistoryBuffer, InitialHistory};
use crate::models::{ConvolutionSpec, FieldRole, ModelSpec, RhsEval, SystemRhs};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TimeStep {
    Fixed { dt: f64 },
    Auto { cfl: f64 },
}

impl Default for TimeStep {
    fn default() -> Self {
        TimeStep::Auto { cfl: 0.4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvectionScheme {
    /// First-order upwind; keeps densities nonnegative.
    #[default]
    Upwind,
    /// Second-order central differences, for convergence studies.
    Central,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepConfig {
    pub dt: TimeStep,
    pub t_end: f64,
    pub snapshot_every: f64,
    pub advection: AdvectionScheme,
    /// Relative mass drift reported as a conservation failure.
    pub mass_drift: f64,
    /// Upper bound on any step, regardless of the stability bounds.
    pub dt_max: Option<f64>,
    /// Distributed-kernel history is kept for this many kernel means.
    pub horizon_multiplier: f64,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig {
            dt: TimeStep::default(),
            t_end: 1.0,
            snapshot_every: 0.1,
            advection: AdvectionScheme::default(),
            mass_drift: 1e-8,
            dt_max: None,
            horizon_multiplier: 12.0,
        }
    }
}

impl StepConfig {
    pub fn validate(&self) -> Result<()> {
        match self.dt {
            TimeStep::Fixed { dt } if !(dt > 0.0 && dt.is_finite()) => {
                return Err(Error::config("stepping.dt", "must be positive"))
            }
            TimeStep::Auto { cfl } if !(cfl > 0.0 && cfl <= 1.0) => {
                return Err(Error::config("stepping.cfl", "must lie in (0, 1]"))
            }
            _ => {}
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::config("stepping.t_end", "must be positive"));
        }
        if !(self.snapshot_every > 0.0) {
            return Err(Error::config("stepping.snapshot_every", "must be positive"));
        }
        if let Some(m) = self.dt_max {
            if !(m > 0.0) {
                return Err(Error::config("stepping.dt_max", "must be positive"));
            }
        }
        if !(self.horizon_multiplier > 0.0) {
            return Err(Error::config(
                "delay.horizon_multiplier",
                "must be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub fields: Vec<Field>,
}

/// Per-step diagnostics. `reaction` is the mass added by sources and
/// `outflow` the mass that left through the boundary during the step, so
/// that `mass[k] - mass[k-1] == reaction[k] - outflow[k]` up to round-off.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: f64,
    pub dt: f64,
    pub mass: Vec<f64>,
    pub min: Vec<f64>,
    pub reaction: Vec<f64>,
    pub outflow: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: Grid,
    pub field_names: Vec<String>,
    pub roles: Vec<FieldRole>,
    pub initial_mass: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub steps: Vec<StepRecord>,
    /// Set when the integrated system relies on the strong-kernel chain.
    pub derived_construction: bool,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots
            .last()
            .expect("a trajectory holds its initial state")
    }

    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.field_names.iter().position(|n| n == name)
    }

    /// Largest relative deviation of a density field's mass from its initial
    /// value over all steps.
    pub fn mass_drift(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, role) in self.roles.iter().enumerate() {
            if *role != FieldRole::Density {
                continue;
            }
            let m0 = self.initial_mass[i];
            let scale = m0.abs().max(f64::MIN_POSITIVE);
            for s in &self.steps {
                worst = worst.max((s.mass[i] - m0).abs() / scale);
            }
        }
        worst
    }

    /// Mass of field `i` at time `t`, interpolated between steps.
    pub fn mass_at(&self, i: usize, t: f64) -> f64 {
        let mut prev = (
            self.steps.first().map_or(f64::INFINITY, |s| s.t - s.dt),
            self.initial_mass[i],
        );
        if t <= prev.0 {
            return prev.1;
        }
        for s in &self.steps {
            if s.t >= t {
                let w = (t - prev.0) / (s.t - prev.0);
                return (1.0 - w) * prev.1 + w * s.mass[i];
            }
            prev = (s.t, s.mass[i]);
        }
        prev.1
    }
}

/// Advective and Robin fluxes on the `n + 1` faces.
fn explicit_flux(
    u: &[f64],
    v: Option<&[f64]>,
    d_boundary: (f64, f64),
    bc: BoundaryCondition,
    scheme: AdvectionScheme,
) -> Vec<f64> {
    let n = u.len();
    let mut flux = vec![0.0; n + 1];
    let face = |vf: f64, left: f64, right: f64| match scheme {
        AdvectionScheme::Upwind => {
            if vf > 0.0 {
                vf * left
            } else {
                vf * right
            }
        }
        AdvectionScheme::Central => 0.5 * vf * (left + right),
    };
    if let Some(v) = v {
        for f in 1..n {
            flux[f] = face(v[f], u[f - 1], u[f]);
        }
    }
    let (v0, vn) = v.map_or((0.0, 0.0), |v| (v[0], v[n]));
    match bc {
        BoundaryCondition::Periodic => {
            flux[0] = face(v0, u[n - 1], u[0]);
            flux[n] = flux[0];
        }
        BoundaryCondition::ZeroFlux => {}
        BoundaryCondition::HomogeneousNeumann => {
            flux[0] = v0 * u[0];
            flux[n] = vn * u[n - 1];
        }
        BoundaryCondition::HomogeneousDirichlet => {
            flux[0] = v0.min(0.0) * u[0];
            flux[n] = vn.max(0.0) * u[n - 1];
        }
        BoundaryCondition::Robin { alpha, beta } => {
            flux[0] = -u[0] * (d_boundary.0 * beta / alpha - v0);
            flux[n] = u[n - 1] * (d_boundary.1 * beta / alpha + vn);
        }
    }
    flux
}

/// Largest step allowed by the explicit terms.
fn stable_dt(
    eval: &RhsEval,
    state: &[Field],
    grid: &Grid,
    cfl: f64,
    scheme: AdvectionScheme,
) -> f64 {
    let dx = grid.dx();
    let n = grid.n_cells();
    let mut dt = f64::INFINITY;
    for (i, u) in state.iter().enumerate() {
        let vmax = eval.velocities[i]
            .as_ref()
            .map_or(0.0, |v| v.iter().fold(0.0_f64, |a, b| a.max(b.abs())));
        if vmax > 0.0 {
            dt = dt.min(cfl * dx / vmax);
            if scheme == AdvectionScheme::Central {
                let dmin = match &eval.diffusion[i] {
                    crate::models::Diffusion::None => 0.0,
                    crate::models::Diffusion::Constant(d) => *d,
                    crate::models::Diffusion::Faces(f) => {
                        f.iter().copied().fold(f64::INFINITY, f64::min)
                    }
                };
                if dmin > 0.0 {
                    dt = dt.min(cfl * 2.0 * dmin / (vmax * vmax));
                }
            }
        }
        if let BoundaryCondition::Robin { alpha, beta } = grid.bc() {
            let faces = eval.diffusion[i].faces(n);
            let (d0, dn) = faces.as_ref().map_or((0.0, 0.0), |f| (f[0], f[n]));
            let (v0, vn) = eval.velocities[i]
                .as_ref()
                .map_or((0.0, 0.0), |v| (v[0], v[n]));
            let rate = (d0 * beta / alpha + v0.abs()).max(dn * beta / alpha + vn.abs());
            if rate > 0.0 {
                dt = dt.min(cfl * dx / rate);
            }
        }
        for (&ui, &si) in u.values().iter().zip(eval.sources[i].values()) {
            if si < 0.0 && ui > 0.0 {
                dt = dt.min(cfl * ui / -si);
            }
        }
    }
    dt
}

/// Owns the state of one simulation and advances it step by step. On a
/// failed step the trajectory recorded so far stays available.
#[derive(Debug)]
pub struct Simulation {
    rhs: SystemRhs,
    cfg: StepConfig,
    state: Vec<Field>,
    t: f64,
    history: Option<HistoryBuffer>,
    convolutions: Vec<(ConvolutionSpec, DistributedConvolver)>,
    trajectory: Trajectory,
    next_snapshot: f64,
    max_delay_dt: f64,
}

impl Simulation {
    /// `initial` holds either every state field or only the densities; map
    /// fields then start at zero and chain fields at the relaxed memory of a
    /// constant past.
    pub fn new(
        model: &ModelSpec,
        grid: &Grid,
        initial: Vec<Field>,
        cfg: &StepConfig,
    ) -> Result<Self> {
        Self::with_history(model, grid, initial, cfg, None)
    }

    /// As [`Simulation::new`] with an explicit prehistory for delay models.
    pub fn with_history(
        model: &ModelSpec,
        grid: &Grid,
        initial: Vec<Field>,
        cfg: &StepConfig,
        prehistory: Option<InitialHistory>,
    ) -> Result<Self> {
        cfg.validate()?;
        let rhs = SystemRhs::new(model, grid)?;
        let state = complete_state(&rhs, initial)?;
        let fields = rhs.fields();
        let history = match rhs.model().history_horizon(cfg.horizon_multiplier) {
            Some(h) if matches!(rhs.model().family, crate::models::Family::DiscreteDelay(_)) => {
                let init = prehistory
                    .clone()
                    .unwrap_or_else(|| InitialHistory::Constant(state.clone()));
                Some(HistoryBuffer::new(0.0, state.clone(), h, init)?)
            }
            _ => None,
        };
        let mut convolutions = Vec::new();
        for spec in rhs.convolutions() {
            let horizon = cfg.horizon_multiplier * spec.kernel.tau().unwrap_or(0.0);
            let state_history = prehistory
                .clone()
                .unwrap_or_else(|| InitialHistory::Constant(state.clone()));
            let init = rhs.convolution_initial(&spec, &state_history)?;
            let mut conv =
                DistributedConvolver::new(spec.kernel, spec.d3, *grid, horizon, init, 0)?;
            conv.push(0.0, &rhs.convolution_input(&spec, 0.0, &state)?)?;
            convolutions.push((spec, conv));
        }
        let max_delay_dt = rhs
            .model()
            .shortest_delay()
            .map_or(f64::INFINITY, |tau| tau / 20.0);
        let derived_construction = matches!(
            rhs.model().family,
            crate::models::Family::Chain(crate::models::ChainParams {
                derived_construction: true,
                ..
            })
        );
        let trajectory = Trajectory {
            grid: *grid,
            field_names: fields.iter().map(|f| f.name.clone()).collect(),
            roles: fields.iter().map(|f| f.role).collect(),
            initial_mass: state.iter().map(total_mass).collect(),
            snapshots: vec![Snapshot {
                t: 0.0,
                fields: state.clone(),
            }],
            steps: Vec::new(),
            derived_construction,
        };
        Ok(Simulation {
            rhs,
            cfg: cfg.clone(),
            state,
            t: 0.0,
            history,
            convolutions,
            trajectory,
            next_snapshot: cfg.snapshot_every,
            max_delay_dt,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &[Field] {
        &self.state
    }

    pub fn rhs(&self) -> &SystemRhs {
        &self.rhs
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn into_trajectory(self) -> Trajectory {
        self.trajectory
    }

    fn evaluate(&self) -> Result<RhsEval> {
        let convolved = self
            .convolutions
            .iter()
            .map(|(_, c)| c.evaluate())
            .collect::<Result<Vec<_>>>()?;
        self.rhs
            .eval(self.t, &self.state, self.history.as_ref(), &convolved)
    }

    /// The step the configuration asks for at the current state, before
    /// clipping to snapshot times.
    fn choose_dt(&self, eval: &RhsEval) -> Result<f64> {
        let grid = self.rhs.grid();
        let mut dt = match self.cfg.dt {
            TimeStep::Fixed { dt } => {
                let limit = stable_dt(eval, &self.state, grid, 1.0, self.cfg.advection);
                if dt > limit * (1.0 + 1e-12) {
                    return Err(Error::StepRejected(format!(
                        "fixed dt = {dt} exceeds the explicit stability limit {limit:.6e} at t = {}",
                        self.t
                    )));
                }
                dt
            }
            TimeStep::Auto { cfl } => stable_dt(eval, &self.state, grid, cfl, self.cfg.advection),
        };
        dt = dt.min(self.max_delay_dt);
        if let Some(m) = self.cfg.dt_max {
            dt = dt.min(m);
        }
        if !dt.is_finite() {
            // nothing explicit limits the step
            dt = self.cfg.snapshot_every;
        }
        Ok(dt)
    }

    /// Advances by one step of at most `dt` (clipped to the next snapshot
    /// and the end time). Returns the step taken.
    pub fn step(&mut self) -> Result<f64> {
        let eval = self.evaluate()?;
        let mut dt = self.choose_dt(&eval)?;
        let target = self.next_snapshot.min(self.cfg.t_end);
        if self.t + dt >= target - 1e-9 * dt {
            dt = target - self.t;
        }
        self.apply(&eval, dt)?;
        Ok(dt)
    }

    /// One IMEX step of exactly `dt` from the precomputed right-hand side.
    fn apply(&mut self, eval: &RhsEval, dt: f64) -> Result<()> {
        let grid = *self.rhs.grid();
        let n = grid.n_cells();
        let dx = grid.dx();
        let bc = grid.bc();
        let nf = self.state.len();
        let mut next = Vec::with_capacity(nf);
        let mut reaction = vec![0.0; nf];
        let mut outflow = vec![0.0; nf];
        for i in 0..nf {
            let u = self.state[i].values();
            let faces = eval.diffusion[i].faces(n);
            let d_boundary = faces.as_ref().map_or((0.0, 0.0), |f| (f[0], f[n]));
            let flux = explicit_flux(
                u,
                eval.velocities[i].as_deref(),
                d_boundary,
                bc,
                self.cfg.advection,
            );
            let s = eval.sources[i].values();
            let explicit: Vec<f64> = (0..n)
                .map(|c| u[c] - dt / dx * (flux[c + 1] - flux[c]) + dt * s[c])
                .collect();
            reaction[i] = dt * dx * s.iter().sum::<f64>();
            outflow[i] = if bc.is_periodic() {
                0.0
            } else {
                dt * (flux[n] - flux[0])
            };
            let new = match &faces {
                Some(f) => implicit_diffusion(&grid, f, dt, &explicit),
                None => explicit,
            };
            if bc == BoundaryCondition::HomogeneousDirichlet {
                if let Some(f) = &faces {
                    outflow[i] += dt * 2.0 * (f[0] * new[0] + f[n] * new[n - 1]) / dx;
                }
            }
            next.push(Field::new(grid, new)?);
        }
        let t_new = self.t + dt;
        let mut mins = Vec::with_capacity(nf);
        for (i, f) in next.iter().enumerate() {
            if let Some(bad) = f.values().iter().position(|v| !v.is_finite()) {
                return Err(Error::Divergence {
                    t: t_new,
                    detail: format!(
                        "field {} is {} at x = {}",
                        self.trajectory.field_names[i],
                        f.values()[bad],
                        grid.center(bad)
                    ),
                });
            }
            let min = f.min();
            if self.cfg.advection == AdvectionScheme::Upwind
                && self.trajectory.roles[i] == FieldRole::Density
                && min < -1e-14 * f.max().max(1.0)
            {
                return Err(Error::Divergence {
                    t: t_new,
                    detail: format!(
                        "density {} undershoots to {min:e}; reduce the step or the CFL number",
                        self.trajectory.field_names[i]
                    ),
                });
            }
            mins.push(min);
        }
        self.trajectory.steps.push(StepRecord {
            t: t_new,
            dt,
            mass: next.iter().map(total_mass).collect(),
            min: mins,
            reaction,
            outflow,
        });
        self.state = next;
        self.t = t_new;
        if let Some(h) = &mut self.history {
            h.push(t_new, self.state.clone())?;
        }
        for (spec, conv) in &mut self.convolutions {
            let input = self.rhs.convolution_input(spec, t_new, &self.state)?;
            conv.push(t_new, &input)?;
        }
        let at_end = t_new >= self.cfg.t_end - 1e-12 * self.cfg.t_end.max(1.0);
        if t_new >= self.next_snapshot - 1e-9 * dt || at_end {
            self.trajectory.snapshots.push(Snapshot {
                t: t_new,
                fields: self.state.clone(),
            });
            while self.next_snapshot <= t_new + 1e-9 * dt {
                self.next_snapshot += self.cfg.snapshot_every;
            }
        }
        Ok(())
    }

    pub fn finished(&self) -> bool {
        self.t >= self.cfg.t_end - 1e-12 * self.cfg.t_end.max(1.0)
    }

    /// Steps until `t_end`.
    pub fn advance(&mut self) -> Result<()> {
        while !self.finished() {
            self.step()?;
        }
        Ok(())
    }
}

/// Fills in the fields the caller did not provide.
pub fn complete_state(rhs: &SystemRhs, initial: Vec<Field>) -> Result<Vec<Field>> {
    let fields = rhs.fields();
    let grid = *rhs.grid();
    for f in &initial {
        if f.grid() != &grid {
            return Err(Error::config(
                "initial",
                "initial field lives on a different grid",
            ));
        }
    }
    if initial.len() == fields.len() {
        return Ok(initial);
    }
    let n_dens = fields
        .iter()
        .filter(|f| f.role == FieldRole::Density)
        .count();
    if initial.len() != n_dens {
        return Err(Error::config(
            "initial",
            format!(
                "expected {} density fields or all {} state fields, got {}",
                n_dens,
                fields.len(),
                initial.len()
            ),
        ));
    }
    let mut state = initial;
    if let crate::models::Family::Chain(_) = rhs.model().family {
        let chain = rhs.chain_initial(&state[0]);
        state.extend(chain);
    } else {
        while state.len() < fields.len() {
            state.push(grid.zeros());
        }
    }
    Ok(state)
}

/// Runs a model from `initial` to `cfg.t_end`.
pub fn run(
    model: &ModelSpec,
    grid: &Grid,
    initial: Vec<Field>,
    cfg: &StepConfig,
) -> Result<Trajectory> {
    let mut sim = Simulation::new(model, grid, initial, cfg)?;
    sim.advance()?;
    Ok(sim.into_trajectory())
}

/// Zero-flux steady state of perception foraging without perception:
/// `exp(gamma m / d)` normalized to unit mass.
pub fn steady_state_local_limit(m: &Field, gamma: f64, d: f64) -> Field {
    let c = gamma / d;
    let top = m
        .values()
        .iter()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(c * b));
    let w = m.map(|v| (c * v - top).exp());
    let z = total_mass(&w);
    w.scale(1.0 / z)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Attractor {
    Steady,
    Periodic { period: f64 },
    Undetermined,
}

/// Classifies the tail of a trajectory. `tail_fraction` of the snapshots (at
/// least three) are inspected.
pub fn detect_attractor(traj: &Trajectory, tail_fraction: f64, tol: f64) -> Attractor {
    let snaps = &traj.snapshots;
    let k = ((snaps.len() as f64 * tail_fraction).ceil() as usize)
        .clamp(3.min(snaps.len()), snaps.len());
    let tail = &snaps[snaps.len() - k..];
    let last = tail.last().expect("nonempty");
    let change = tail
        .iter()
        .flat_map(|s| {
            s.fields
                .iter()
                .zip(&last.fields)
                .map(|(a, b)| a.max_abs_diff(b))
        })
        .fold(0.0, f64::max);
    if change <= tol {
        return Attractor::Steady;
    }
    let Some(i) = traj.roles.iter().position(|r| *r == FieldRole::Density) else {
        return Attractor::Undetermined;
    };
    let times: Vec<f64> = tail.iter().map(|s| s.t).collect();
    let probe: Vec<f64> = tail.iter().map(|s| first_moment(&s.fields[i])).collect();
    classify_probe(&times, &probe, tol)
}

/// Mass-weighted mean position.
pub fn first_moment(u: &Field) -> f64 {
    let g = u.grid();
    let mass: f64 = u.values().iter().sum();
    if mass == 0.0 {
        return 0.5 * g.length();
    }
    u.values()
        .iter()
        .enumerate()
        .map(|(i, v)| g.center(i) * v)
        .sum::<f64>()
        / mass
}

/// Steady, periodic or undetermined verdict for a sampled scalar signal.
/// Periodic needs at least three maxima whose heights agree within `tol`
/// (relative to the signal range) and whose spacings agree within 2%.
pub fn classify_probe(times: &[f64], values: &[f64], tol: f64) -> Attractor {
    let n = values.len();
    if n < 3 {
        return Attractor::Undetermined;
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if range <= tol {
        return Attractor::Steady;
    }
    let mut peaks: Vec<(f64, f64)> = Vec::new();
    for k in 1..n - 1 {
        let (a, b, c) = (values[k - 1], values[k], values[k + 1]);
        if b > a && b >= c {
            // parabola through the three samples (uniform spacing assumed locally)
            let h = 0.5 * (times[k + 1] - times[k - 1]);
            let denom = a - 2.0 * b + c;
            let (dt, peak) = if denom != 0.0 {
                let off = 0.5 * (a - c) / denom;
                (off * h, b - 0.25 * (a - c) * off)
            } else {
                (0.0, b)
            };
            peaks.push((times[k] + dt, peak));
        }
    }
    if peaks.len() < 3 {
        return Attractor::Undetermined;
    }
    let heights_agree = peaks
        .iter()
        .all(|p| (p.1 - peaks[0].1).abs() <= tol.max(1e-3 * range));
    let periods: Vec<f64> = peaks.windows(2).map(|w| w[1].0 - w[0].0).collect();
    let mean = periods.iter().sum::<f64>() / periods.len() as f64;
    let periods_agree = periods.iter().all(|p| (p - mean).abs() <= 0.02 * mean);
    if heights_agree && periods_agree {
        Attractor::Periodic { period: mean }
    } else {
        Attractor::Undetermined
    }
}
