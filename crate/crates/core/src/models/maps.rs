//! Advective potentials and the velocities they induce.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{potential_gradient, total_mass, Field, Grid};
use crate::kernels::Perception;
use crate::memory::HistoryBuffer;

use super::reactions::{starvation_rate, DENSITY_FLOOR};
use super::{satisfaction, SatisfactionSpec, StaticMapKind};

/// Inputs of [`static_potential`]; which ones are needed depends on the kind.
#[derive(Debug, Clone, Copy)]
pub struct StaticInputs<'a> {
    pub m: Option<&'a Field>,
    pub u: Option<&'a Field>,
    pub gamma: f64,
}

/// Potential of a static cognitive map, sampled at the cell centres.
///
/// The den-site potential is the distance `gamma |x - x0|`; movement goes
/// down its gradient. The resource-based kinds are returned unscaled and
/// are perceived and multiplied by `gamma` by the caller.
pub fn static_potential(
    kind: &StaticMapKind,
    inputs: StaticInputs<'_>,
    grid: &Grid,
) -> Result<Field> {
    let need_m = || {
        inputs
            .m
            .ok_or_else(|| Error::config("model.landscape", "this map needs a resource landscape"))
    };
    match kind {
        StaticMapKind::DenSite { x0 } => {
            if !(0.0..=grid.length()).contains(x0) {
                return Err(Error::config(
                    "model.x0",
                    format!("den site {x0} lies outside [0, {}]", grid.length()),
                ));
            }
            Ok(Field::from_fn(*grid, |x| inputs.gamma * (x - x0).abs()))
        }
        StaticMapKind::GivenMap { .. } => Ok(need_m()?.clone()),
        StaticMapKind::AvgDensity { .. } => {
            let m = need_m()?;
            let mean = total_mass(m) / grid.length();
            if mean == 0.0 {
                return Err(Error::DegenerateLandscape(
                    "resource has zero average".into(),
                ));
            }
            Ok(m.scale(1.0 / mean))
        }
        StaticMapKind::PerCapita { .. } => {
            let m = need_m()?;
            let u = inputs.u.ok_or_else(|| {
                Error::config("model.map", "per-capita map needs the current density")
            })?;
            Ok(m.zip_map(u, |mi, ui| mi / ui.max(DENSITY_FLOOR)))
        }
    }
}

/// Face velocities `d/dx sum_j gamma_ij perceive(u_j)` for every species.
pub fn aggregation_velocity(
    u: &[Field],
    gamma: &[Vec<f64>],
    perception: &Perception,
) -> Vec<Vec<f64>> {
    let perceived: Vec<Field> = u.iter().map(|f| perception.apply(f)).collect();
    gamma
        .iter()
        .map(|row| {
            let mut potential = u[0].grid().zeros();
            for (j, g) in row.iter().enumerate() {
                if *g != 0.0 {
                    potential = potential.axpy(*g, &perceived[j]);
                }
            }
            potential_gradient(&potential)
        })
        .collect()
}

/// Velocity of starvation-driven advection towards resources combined with
/// the pull towards a den site.
///
/// The rate sits inside the gradient: the potential is
/// `rate(s) m - gamma |x - x0|` and the velocity is its face gradient.
pub fn sda_den_site_velocity(
    u: &Field,
    m: &Field,
    x0: f64,
    gamma: f64,
    gamma_plus: f64,
    spec: &SatisfactionSpec,
) -> Result<Vec<f64>> {
    if !(gamma > 0.0 && gamma < gamma_plus) {
        return Err(Error::config(
            "model.gamma",
            format!("need 0 < gamma < gamma_plus, got {gamma} and {gamma_plus}"),
        ));
    }
    let s = satisfaction(spec.kind, m, u)?;
    let rate = starvation_rate(&s, spec.shape, gamma_plus);
    let den = Field::from_fn(*u.grid(), |x| gamma * (x - x0).abs());
    let potential = rate.zip_map(m, |r, mi| r * mi).axpy(-1.0, &den);
    Ok(potential_gradient(&potential))
}

/// Remembered field `tau` time units ago.
pub fn delay_potential(buf: &HistoryBuffer, tau: f64, species: usize) -> Result<Field> {
    buf.sample(species, buf.now() - tau)
}

/// Argument `w` of a nonlocal logistic term `r u (1 - w / K)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NonlocalKind {
    /// Current spatial average.
    SpatialAverage,
    /// Local density `sigma` time units ago.
    TemporalDelay { sigma: f64 },
    /// Habitat-averaged density `sigma` time units ago (kernel `1/L`).
    KernelAverageDelayed { sigma: f64 },
}

impl NonlocalKind {
    pub fn delay(&self) -> f64 {
        match *self {
            NonlocalKind::SpatialAverage => 0.0,
            NonlocalKind::TemporalDelay { sigma }
            | NonlocalKind::KernelAverageDelayed { sigma } => sigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.delay();
        if s >= 0.0 && s.is_finite() {
            Ok(())
        } else {
            Err(Error::config(
                "model.sigma",
                format!("must be nonnegative, got {s}"),
            ))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            NonlocalKind::SpatialAverage => "spatial_average",
            NonlocalKind::TemporalDelay { .. } => "temporal_delay",
            NonlocalKind::KernelAverageDelayed { .. } => "kernel_average_delayed",
        }
    }
}

pub fn nonlocal_reaction(
    u: &Field,
    buf: Option<&HistoryBuffer>,
    species: usize,
    kind: NonlocalKind,
) -> Result<Field> {
    let past = |sigma: f64| -> Result<Field> {
        if sigma == 0.0 {
            return Ok(u.clone());
        }
        let buf = buf
            .ok_or_else(|| Error::Unsupported("delayed argument needs a history buffer".into()))?;
        buf.sample(species, buf.now() - sigma)
    };
    match kind {
        NonlocalKind::SpatialAverage => Ok(Field::constant(*u.grid(), u.mean())),
        NonlocalKind::TemporalDelay { sigma } => past(sigma),
        NonlocalKind::KernelAverageDelayed { sigma } => {
            let f = past(sigma)?;
            Ok(Field::constant(*u.grid(), f.mean()))
        }
    }
}
