//! Pointwise kinetics of the zoo and their homogeneous steady states.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{total_mass, Field};

use super::{ConflictVariant, ResponseShape, SatisfactionKind, SatisfactionSpec};

/// Floor for divisions by a density.
pub const DENSITY_FLOOR: f64 = 1e-12;

/// Marks map update for species `i`: `sum_j alpha_ij u_j - mu p_i`.
pub fn marks_rhs(i: usize, p_i: &Field, u: &[Field], alpha: &[Vec<f64>], mu: f64) -> Field {
    let mut out = p_i.scale(-mu);
    for (j, uj) in u.iter().enumerate() {
        let a = alpha[i][j];
        if a != 0.0 {
            out = out.axpy(a, uj);
        }
    }
    out
}

/// Homogeneous marks `p_i = sum_j alpha_ij c_j / mu`.
pub fn marks_steady_state(alpha: &[Vec<f64>], c: &[f64], mu: f64) -> Result<Vec<f64>> {
    if mu <= 0.0 {
        return Err(Error::AnalysisUnavailable(
            "marks have no homogeneous steady state without decay (mu = 0)".into(),
        ));
    }
    Ok(alpha
        .iter()
        .map(|row| row.iter().zip(c).map(|(a, cj)| a * cj).sum::<f64>() / mu)
        .collect())
}

/// Conflict-zone map update for species `i`.
///
/// `lead` is the leading density factor: `u_i`, or its perceived version
/// when conflicts are sensed at a distance. Smearing is handled by the
/// stepper as diffusion of the map and is not part of this term.
#[allow(clippy::too_many_arguments)]
pub fn conflict_map_rhs(
    i: usize,
    k_i: &Field,
    lead: &Field,
    u: &[Field],
    rho: &[Vec<f64>],
    mu: f64,
    beta: f64,
    variant: ConflictVariant,
) -> Field {
    let n = k_i.len();
    let ui = u[i].values();
    let li = lead.values();
    let k = k_i.values();
    let out = (0..n)
        .map(|x| {
            let encounters: f64 = u
                .iter()
                .enumerate()
                .map(|(j, uj)| rho[i][j] * uj.values()[x])
                .sum();
            let growth = li[x] * encounters;
            let decay = (mu + beta * ui[x]) * k[x];
            match variant {
                ConflictVariant::Magnitude => growth - decay,
                ConflictVariant::Probability => growth * (1.0 - k[x]) - decay,
            }
        })
        .collect();
    Field::new(*k_i.grid(), out).expect("same grid")
}

/// Homogeneous conflict map for species `i` given constant densities `c`.
pub fn conflict_steady_map(
    i: usize,
    c: &[f64],
    rho: &[Vec<f64>],
    mu: f64,
    beta: f64,
    variant: ConflictVariant,
) -> Result<f64> {
    let growth = c[i] * rho[i].iter().zip(c).map(|(r, cj)| r * cj).sum::<f64>();
    let decay = mu + beta * c[i];
    let denom = match variant {
        ConflictVariant::Magnitude => decay,
        ConflictVariant::Probability => growth + decay,
    };
    if denom <= 0.0 {
        if growth == 0.0 {
            return Ok(0.0);
        }
        return Err(Error::AnalysisUnavailable(
            "conflict map grows without bound: no decay at this state".into(),
        ));
    }
    Ok(growth / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConsumerResourceRates {
    pub r: f64,
    /// Resource carrying capacity.
    pub k: f64,
    pub beta: f64,
    pub alpha: f64,
    pub c: f64,
    /// Consumer death rate.
    pub death: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrRhs {
    /// Consumer reaction.
    pub f: f64,
    /// Resource reaction.
    pub g: f64,
}

/// Holling type II consumer-resource kinetics.
pub fn consumer_resource_rhs(u: f64, v: f64, p: &ConsumerResourceRates) -> CrRhs {
    let uptake = p.beta * u * v / (p.alpha + v).max(1e-300);
    CrRhs {
        f: p.c * uptake - p.death * u,
        g: p.r * v * (1.0 - v / p.k) - uptake,
    }
}

/// Coexistence state `(u*, v*)`, when positive.
pub fn consumer_resource_coexistence(p: &ConsumerResourceRates) -> Result<(f64, f64)> {
    let denom = p.c * p.beta - p.death;
    if denom <= 0.0 {
        return Err(Error::AnalysisUnavailable(
            "consumers cannot persist: c beta <= death".into(),
        ));
    }
    let v = p.alpha * p.death / denom;
    if v >= p.k {
        return Err(Error::AnalysisUnavailable(
            "coexistence resource level exceeds the carrying capacity".into(),
        ));
    }
    let u = p.r * (1.0 - v / p.k) * (p.alpha + v) / p.beta;
    Ok((u, v))
}

/// `(u (1 - u - alpha v), gamma v (1 - beta u - v))`
pub fn lotka_volterra_competition(u: f64, v: f64, alpha: f64, beta: f64, gamma: f64) -> (f64, f64) {
    (u * (1.0 - u - alpha * v), gamma * v * (1.0 - beta * u - v))
}

/// Interior equilibrium of the competition kinetics.
pub fn lotka_volterra_coexistence(alpha: f64, beta: f64) -> Result<(f64, f64)> {
    let det = 1.0 - alpha * beta;
    if det == 0.0 {
        return Err(Error::AnalysisUnavailable(
            "degenerate competition matrix".into(),
        ));
    }
    let u = (1.0 - alpha) / det;
    let v = (1.0 - beta) / det;
    if u <= 0.0 || v <= 0.0 {
        return Err(Error::AnalysisUnavailable(
            "no positive coexistence state".into(),
        ));
    }
    Ok((u, v))
}

/// `(alpha_s a_s - beta_s m_s, alpha_l a_l - beta_l m_l)`
#[allow(clippy::too_many_arguments)]
pub fn short_long_rhs(
    m_s: &Field,
    m_l: &Field,
    a_s: &Field,
    a_l: &Field,
    alpha_s: f64,
    alpha_l: f64,
    beta_s: f64,
    beta_l: f64,
) -> (Field, Field) {
    (
        a_s.scale(alpha_s).axpy(-beta_s, m_s),
        a_l.scale(alpha_l).axpy(-beta_l, m_l),
    )
}

pub fn short_long_steady_state(
    a: f64,
    alpha_s: f64,
    alpha_l: f64,
    beta_s: f64,
    beta_l: f64,
) -> Result<(f64, f64)> {
    if beta_s <= 0.0 || beta_l <= 0.0 {
        return Err(Error::AnalysisUnavailable(
            "memory without decay has no steady state".into(),
        ));
    }
    Ok((alpha_s * a / beta_s, alpha_l * a / beta_l))
}

pub fn combined_map(m_s: &Field, m_l: &Field, c1: f64, c2: f64) -> Field {
    m_s.scale(c1).axpy(c2, m_l)
}

pub fn satisfaction(kind: SatisfactionKind, m: &Field, u: &Field) -> Result<Field> {
    match kind {
        SatisfactionKind::SupplyDemand => Ok(m.zip_map(u, |mi, ui| mi / ui.max(DENSITY_FLOOR))),
        SatisfactionKind::RelativeAverage => {
            let mean = total_mass(m) / m.grid().length();
            if mean == 0.0 {
                return Err(Error::DegenerateLandscape(
                    "resource has zero average".into(),
                ));
            }
            Ok(m.scale(1.0 / mean))
        }
    }
}

fn switch(shape: ResponseShape, s: f64) -> f64 {
    match shape {
        ResponseShape::Step => {
            if s < 1.0 {
                1.0
            } else {
                0.0
            }
        }
        ResponseShape::Smooth { kappa } => 1.0 / (1.0 + (-kappa * (1.0 - s)).exp()),
    }
}

/// Advection rate that turns on when unsatisfied: `gamma_plus` below `s = 1`.
pub fn starvation_rate(s: &Field, shape: ResponseShape, gamma_plus: f64) -> Field {
    s.map(|v| gamma_plus * switch(shape, v))
}

/// Satisfaction-dependent motility between `d_minus` and `d_plus`.
pub fn motility(spec: &SatisfactionSpec, s: &Field) -> Field {
    s.map(|v| spec.d_minus + (spec.d_plus - spec.d_minus) * switch(spec.shape, v))
}
