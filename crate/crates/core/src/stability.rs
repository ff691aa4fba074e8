//! Linear stability of homogeneous states: dispersion relations, delay
//! characteristic roots, unstable mode sets and the logistic eigenvalue.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::BoundaryCondition;
use crate::kernels::{fourier_symbol, KernelSpec};
use crate::models::{
    conflict_steady_map, marks_steady_state, ConflictParams, ConflictVariant, DelayModel, Family,
    ModelSpec, NonlocalKind, ScalarReaction,
};

/// Growth rates are counted as positive above this.
pub const GROWTH_TOL: f64 = 1e-12;

/// Wavenumbers of the discrete Laplacian eigenmodes `j = 0..=j_max`.
pub fn wavenumbers(length: f64, bc: BoundaryCondition, j_max: usize) -> Vec<f64> {
    let base = if bc.is_periodic() {
        2.0 * PI / length
    } else {
        PI / length
    };
    (0..=j_max).map(|j| j as f64 * base).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispersionResult {
    pub wavenumbers: Vec<f64>,
    pub growth: Vec<Complex64>,
    pub unstable: Vec<usize>,
    /// The dispersion formula is a derived construction, not a quoted one.
    pub derived_construction: bool,
    /// Set once a simulation has confirmed the growth rates.
    pub cross_checked: bool,
}

impl DispersionResult {
    fn from_growth(wavenumbers: Vec<f64>, growth: Vec<Complex64>) -> Self {
        let unstable = growth
            .iter()
            .enumerate()
            .filter(|(_, l)| l.re > GROWTH_TOL)
            .map(|(j, _)| j)
            .collect();
        DispersionResult {
            wavenumbers,
            growth,
            unstable,
            derived_construction: true,
            cross_checked: false,
        }
    }

    pub fn max_growth(&self) -> f64 {
        self.growth
            .iter()
            .map(|l| l.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `lambda(k) = -d k^2 + gamma u* k^2 g(k)` for the aggregation model.
pub fn dispersion_aggregation(d: f64, gamma: f64, u_star: f64, kernel: &KernelSpec, k: f64) -> f64 {
    let k2 = k * k;
    -d * k2 + gamma * u_star * k2 * fourier_symbol(kernel, k)
}

const NEWTON_ITERS: usize = 200;

/// Newton on `lambda - a - b exp(-lambda tau) = 0` from `guess`.
fn newton_delay(a: f64, b: f64, tau: f64, guess: Complex64) -> Option<Complex64> {
    let mut l = guess;
    for _ in 0..NEWTON_ITERS {
        let e = (-l * tau).exp();
        let f = l - a - b * e;
        let df = 1.0 + b * tau * e;
        if df.norm() < 1e-300 {
            return None;
        }
        let step = f / df;
        l -= step;
        if !l.re.is_finite() || !l.im.is_finite() {
            return None;
        }
        if step.norm() <= 1e-14 * (1.0 + l.norm()) {
            return Some(l);
        }
    }
    None
}

/// Leading root of `lambda = a + b exp(-lambda tau)`, continued in the delay
/// from the `tau = 0` root `a + b`. A step whose root moves too far is
/// treated as a branch jump and retried with a smaller step.
pub fn delay_root(a: f64, b: f64, tau: f64) -> Result<Complex64> {
    if tau < 0.0 {
        return Err(Error::config("delay.tau", "must be nonnegative"));
    }
    let mut l = Complex64::new(a + b, 0.0);
    if tau == 0.0 || b == 0.0 {
        return Ok(l);
    }
    let mut s = 0.0;
    let mut h = (tau / 16.0).min(0.05 / (a.abs() + b.abs()).max(1e-12));
    let mut total_iters = 0usize;
    while s < tau {
        let next = (s + h).min(tau);
        // a small imaginary nudge lets real roots leave the axis after a collision
        let guess = l + Complex64::new(0.0, 1e-6 * (1.0 + l.norm()));
        match newton_delay(a, b, next, guess) {
            Some(r) if (r - l).norm() <= 0.5 * (1.0 + l.norm()) => {
                l = if r.im.abs() < 1e-10 * (1.0 + r.re.abs()) {
                    Complex64::new(r.re, 0.0)
                } else {
                    Complex64::new(r.re, r.im.abs())
                };
                s = next;
                h *= 1.5;
            }
            _ => {
                h *= 0.25;
                if h < 1e-12 * tau.max(1.0) {
                    return Err(Error::RootFinder {
                        iterations: NEWTON_ITERS,
                        detail: format!("continuation stalled at tau = {s} (root {l})"),
                    });
                }
            }
        }
        total_iters += 1;
        if total_iters > 100_000 {
            return Err(Error::RootFinder {
                iterations: NEWTON_ITERS,
                detail: "continuation took too many steps".into(),
            });
        }
    }
    Ok(l)
}

/// Leading root of the linearized scalar delay model
/// `lambda = -d1 k^2 + gamma u* k^2 g(k) exp(-lambda tau) + f'`.
pub fn delay_characteristic_root(
    d1: f64,
    gamma: f64,
    u_star: f64,
    fprime: f64,
    tau: f64,
    k: f64,
    kernel: &KernelSpec,
) -> Result<Complex64> {
    let k2 = k * k;
    let a = -d1 * k2 + fprime;
    let b = gamma * u_star * k2 * fourier_symbol(kernel, k);
    delay_root(a, b, tau)
}

/// Closed form of the real-crossing threshold: `lambda = 0` needs
/// `gamma u* g(k) k^2 = d1 k^2 - f'`, which contains no delay.
pub fn delay_threshold_closed_form(
    d1: f64,
    u_star: f64,
    fprime: f64,
    k: f64,
    kernel: &KernelSpec,
) -> Result<f64> {
    let k2 = k * k;
    let g = fourier_symbol(kernel, k);
    if u_star * k2 * g == 0.0 {
        return Err(Error::AnalysisUnavailable(format!(
            "mode k = {k} does not couple to the advection"
        )));
    }
    Ok((d1 * k2 - fprime) / (u_star * k2 * g))
}

/// Threshold `gamma*` at which the leading root at mode `k` crosses zero,
/// located by bisection on the root finder at the given delay.
pub fn delay_threshold(
    d1: f64,
    u_star: f64,
    fprime: f64,
    tau: f64,
    k: f64,
    kernel: &KernelSpec,
) -> Result<f64> {
    let re = |gamma: f64| {
        delay_characteristic_root(d1, gamma, u_star, fprime, tau, k, kernel).map(|l| l.re)
    };
    let g = fourier_symbol(kernel, k);
    if !(g > 0.0) || d1 * k * k <= fprime {
        return Err(Error::AnalysisUnavailable(format!(
            "mode k = {k} has no attraction threshold (symbol {g}, f' = {fprime})"
        )));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while re(hi)? <= 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::AnalysisUnavailable("no threshold below 1e12".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if re(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Homogeneous state about which a family is linearized. `densities` are
/// the constant densities; map values follow from the kinetics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomogeneousState {
    pub densities: Vec<f64>,
    pub maps: Vec<f64>,
}

/// Homogeneous steady state of a family at the given densities (ignored
/// where the kinetics fix the density).
pub fn homogeneous_state(model: &ModelSpec, densities: &[f64]) -> Result<HomogeneousState> {
    let need = model.n_species();
    let dens = |n: usize| -> Result<Vec<f64>> {
        if densities.len() != n || densities.iter().any(|u| !(*u > 0.0)) {
            return Err(Error::config(
                "stability.u_star",
                format!("need {n} positive homogeneous densities"),
            ));
        }
        Ok(densities.to_vec())
    };
    match &model.family {
        Family::Aggregation {
            logistic: Some(l), ..
        } => Ok(HomogeneousState {
            densities: vec![l.k],
            maps: vec![],
        }),
        Family::Aggregation { .. } | Family::MultiAggregation { .. } => Ok(HomogeneousState {
            densities: dens(need)?,
            maps: vec![],
        }),
        Family::Marks { alpha, mu, .. } => {
            let c = dens(need)?;
            let maps = marks_steady_state(alpha, &c, *mu)?;
            Ok(HomogeneousState { densities: c, maps })
        }
        Family::ConflictZones(p) => {
            let c = dens(need)?;
            let maps = (0..c.len())
                .map(|i| conflict_steady_map(i, &c, &p.rho, p.mu, p.beta, p.variant))
                .collect::<Result<_>>()?;
            Ok(HomogeneousState { densities: c, maps })
        }
        Family::DiscreteDelay(DelayModel::Scalar { reaction, .. }) => {
            let u = match reaction {
                ScalarReaction::None => dens(1)?[0],
                ScalarReaction::Logistic(l) | ScalarReaction::Nonlocal { logistic: l, .. } => l.k,
            };
            Ok(HomogeneousState {
                densities: vec![u],
                maps: vec![],
            })
        }
        other => Err(Error::AnalysisUnavailable(format!(
            "no linear stability analysis for the {} family",
            other.name()
        ))),
    }
}

/// Linearization matrix of a multi-field family at mode `k`.
fn conflict_matrix(p: &ConflictParams, s: &HomogeneousState, g: f64, k: f64) -> DMatrix<f64> {
    let n = p.d.len();
    let k2 = k * k;
    let u = &s.densities;
    let kk = &s.maps;
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        a[(i, i)] = -p.d[i] * k2;
        // repulsion: u_i moves down the gradient of its perceived conflict map
        a[(i, n + i)] = -p.gamma[i] * u[i] * k2 * g;
        let encounters: f64 = (0..n).map(|j| p.rho[i][j] * u[j]).sum();
        let lead_factor = if p.nonlocal_conflict { g } else { 1.0 };
        let growth_scale = match p.variant {
            ConflictVariant::Magnitude => 1.0,
            ConflictVariant::Probability => 1.0 - kk[i],
        };
        for l in 0..n {
            let mut v = u[i] * p.rho[i][l];
            if l == i {
                v += encounters * lead_factor;
            }
            v *= growth_scale;
            if l == i {
                v -= p.beta * kk[i];
            }
            a[(n + i, l)] = v;
        }
        let mut diag = -(p.mu + p.beta * u[i]) - p.epsilon[i] * k2;
        if p.variant == ConflictVariant::Probability {
            diag -= u[i] * encounters;
        }
        a[(n + i, n + i)] = diag;
    }
    a
}

fn leading(a: &DMatrix<f64>) -> Complex64 {
    a.complex_eigenvalues()
        .iter()
        .copied()
        .max_by(|x, y| {
            x.re.total_cmp(&y.re)
                .then(x.im.abs().total_cmp(&y.im.abs()))
        })
        .expect("nonempty matrix")
}

/// Leading growth rate of the family at mode `k` about `state`.
pub fn growth_rate(model: &ModelSpec, state: &HomogeneousState, k: f64) -> Result<Complex64> {
    let g = fourier_symbol(&model.kernel, k);
    let k2 = k * k;
    let u = &state.densities;
    match &model.family {
        Family::Aggregation { d, gamma, logistic } => {
            let f = logistic.map_or(0.0, |l| l.derivative(u[0]));
            Ok(Complex64::new(
                dispersion_aggregation(*d, *gamma, u[0], &model.kernel, k) + f,
                0.0,
            ))
        }
        Family::MultiAggregation { d, gamma } => {
            let n = d.len();
            let a = DMatrix::from_fn(n, n, |i, j| {
                let diag = if i == j { -d[i] * k2 } else { 0.0 };
                diag + u[i] * gamma[i][j] * k2 * g
            });
            Ok(leading(&a))
        }
        Family::Marks {
            d,
            gamma,
            alpha,
            mu,
        } => {
            let n = d.len();
            let mut a = DMatrix::zeros(2 * n, 2 * n);
            for i in 0..n {
                a[(i, i)] = -d[i] * k2;
                a[(i, n + i)] = gamma[i] * u[i] * k2 * g;
                for j in 0..n {
                    a[(n + i, j)] = alpha[i][j];
                }
                a[(n + i, n + i)] = -mu;
            }
            Ok(leading(&a))
        }
        Family::ConflictZones(p) => Ok(leading(&conflict_matrix(p, state, g, k))),
        Family::DiscreteDelay(DelayModel::Scalar {
            d1,
            gamma,
            reaction,
        }) => {
            let tau = model.temporal.tau().unwrap_or(0.0);
            let fprime = match reaction {
                ScalarReaction::None => 0.0,
                ScalarReaction::Logistic(l) => l.derivative(u[0]),
                ScalarReaction::Nonlocal {
                    logistic,
                    argument: NonlocalKind::SpatialAverage,
                } => {
                    // the spatial average only feeds the k = 0 mode
                    if k == 0.0 {
                        logistic.derivative(u[0])
                    } else {
                        logistic.r * (1.0 - u[0] / logistic.k)
                    }
                }
                ScalarReaction::Nonlocal { argument, .. } => {
                    return Err(Error::AnalysisUnavailable(format!(
                        "a {} reaction argument adds a second delay to the characteristic equation",
                        argument.name()
                    )))
                }
            };
            delay_characteristic_root(*d1, *gamma, u[0], fprime, tau, k, &model.kernel)
        }
        other => Err(Error::AnalysisUnavailable(format!(
            "no linear stability analysis for the {} family",
            other.name()
        ))),
    }
}

/// Growth rates on modes `0..=j_max` of a habitat of the given length.
pub fn dispersion(
    model: &ModelSpec,
    state: &HomogeneousState,
    length: f64,
    bc: BoundaryCondition,
    j_max: usize,
) -> Result<DispersionResult> {
    let ks = wavenumbers(length, bc, j_max);
    let growth = ks
        .iter()
        .map(|&k| growth_rate(model, state, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(DispersionResult::from_growth(ks, growth))
}

/// Mode indices with positive leading growth.
pub fn unstable_set(
    model: &ModelSpec,
    densities: &[f64],
    length: f64,
    bc: BoundaryCondition,
    j_max: usize,
) -> Result<Vec<usize>> {
    let state = homogeneous_state(model, densities)?;
    Ok(dispersion(model, &state, length, bc, j_max)?.unstable)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogisticEigen {
    pub mu1: f64,
    pub d_mu1_dd: f64,
    pub d_mu1_dr: f64,
    pub d_mu1_dl: f64,
}

/// Principal eigenvalue of `-D u'' - r u = mu u` on `(0, L)` and its
/// sensitivities. Only Neumann and Dirichlet conditions are meaningful.
pub fn logistic_eigenvalue(
    d: f64,
    r: f64,
    length: f64,
    bc: BoundaryCondition,
) -> Result<LogisticEigen> {
    for (path, v) in [("d", d), ("r", r), ("length", length)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::config(
                format!("stability.{path}"),
                "must be positive",
            ));
        }
    }
    match bc {
        BoundaryCondition::HomogeneousNeumann | BoundaryCondition::ZeroFlux => Ok(LogisticEigen {
            mu1: -r,
            d_mu1_dd: 0.0,
            d_mu1_dr: -1.0,
            d_mu1_dl: 0.0,
        }),
        BoundaryCondition::HomogeneousDirichlet => {
            let q = PI / length;
            Ok(LogisticEigen {
                mu1: -r / d + q * q,
                d_mu1_dd: r / (d * d),
                d_mu1_dr: -1.0 / d,
                d_mu1_dl: -2.0 * PI * PI / length.powi(3),
            })
        }
        other => Err(Error::Unsupported(format!(
            "the logistic eigenvalue example needs a Neumann or Dirichlet boundary, got {}",
            other.name()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{BoundaryMode, KernelShape};

    #[test]
    fn aggregation_examples() {
        let delta = KernelSpec::delta();
        assert_eq!(dispersion_aggregation(1.0, 0.0, 1.0, &delta, 3.0), -9.0);
        assert_eq!(dispersion_aggregation(1.0, 2.0, 1.0, &delta, 0.0), 0.0);
        assert_eq!(dispersion_aggregation(1.0, 2.0, 1.0, &delta, 1.0), 1.0);
    }

    /// Real branch of Lambert W by Halley iteration, independent of the
    /// continuation solver.
    fn lambert_w0(z: f64) -> f64 {
        let mut w = if z < 1.0 {
            z
        } else {
            z.ln() - z.ln().ln().max(0.0)
        };
        for _ in 0..100 {
            let e = w.exp();
            let f = w * e - z;
            let step = f / (e * (w + 1.0) - (w + 2.0) * f / (2.0 * w + 2.0));
            w -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        w
    }

    #[test]
    fn delay_root_matches_lambert_w() {
        for &(a, b, tau) in &[
            (-1.0, 2.0, 0.5),
            (-3.0, 1.0, 2.0),
            (0.5, 0.7, 1.0),
            (-1.0, 0.2, 10.0),
        ] {
            let l = delay_root(a, b, tau).unwrap();
            let expect = a + lambert_w0(b * tau * (-a * tau).exp()) / tau;
            assert!(l.im.abs() < 1e-12, "{l}");
            assert!((l.re - expect).abs() < 1e-10, "{l} vs {expect}");
        }
    }

    #[test]
    fn delay_root_limits() {
        let g = KernelSpec::new(KernelShape::Gaussian, 0.1, BoundaryMode::CutOff).unwrap();
        let l = delay_characteristic_root(1.0, 0.0, 1.0, 0.3, 5.0, 2.0, &g).unwrap();
        assert_eq!(l, Complex64::new(-4.0 + 0.3, 0.0));
        let l0 = delay_characteristic_root(1.0, 1.5, 2.0, 0.1, 0.0, 2.0, &g).unwrap();
        assert!((l0.re - (dispersion_aggregation(1.0, 1.5, 2.0, &g, 2.0) + 0.1)).abs() < 1e-14);
    }

    #[test]
    fn negative_feedback_gives_complex_roots() {
        // b tau e^{-a tau} < -1/e: the leading pair is complex
        let l = delay_root(-0.1, -2.0, 2.0).unwrap();
        assert!(l.im > 0.1);
        let residual = l - (-0.1) - (-2.0) * (-l * 2.0).exp();
        assert!(residual.norm() < 1e-10);
    }

    #[test]
    fn threshold_does_not_depend_on_delay() {
        let g = KernelSpec::new(KernelShape::Gaussian, 0.1, BoundaryMode::CutOff).unwrap();
        let closed = delay_threshold_closed_form(1.0, 1.0, 0.0, PI, &g).unwrap();
        for tau in [0.1, 1.0, 10.0] {
            let t = delay_threshold(1.0, 1.0, 0.0, tau, PI, &g).unwrap();
            assert!((t - closed).abs() < 1e-9 * closed, "{tau}: {t} vs {closed}");
        }
    }

    #[test]
    fn logistic_eigenvalue_examples() {
        let e = logistic_eigenvalue(1.0, 1.0, PI, BoundaryCondition::HomogeneousDirichlet).unwrap();
        assert!(e.mu1.abs() < 1e-15);
        let e = logistic_eigenvalue(3.0, 2.0, 5.0, BoundaryCondition::HomogeneousNeumann).unwrap();
        assert_eq!(e.mu1, -2.0);
        let e =
            logistic_eigenvalue(2.0, 1.0, 1.0, BoundaryCondition::HomogeneousDirichlet).unwrap();
        assert_eq!(e.d_mu1_dd, 0.25);
    }

    #[test]
    fn conservation_mode_is_neutral() {
        let model = ModelSpec {
            family: Family::ConflictZones(ConflictParams {
                d: vec![1.0, 1.0],
                gamma: vec![5.0, 5.0],
                rho: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
                mu: 1.0,
                beta: 0.5,
                variant: ConflictVariant::Magnitude,
                epsilon: vec![0.0, 0.0],
                nonlocal_conflict: false,
            }),
            kernel: KernelSpec::new(KernelShape::Gaussian, 0.05, BoundaryMode::CutOff).unwrap(),
            temporal: crate::memory::TemporalKernelSpec::None,
        };
        let s = homogeneous_state(&model, &[1.0, 1.0]).unwrap();
        let r = dispersion(&model, &s, 1.0, BoundaryCondition::ZeroFlux, 10).unwrap();
        assert!(r.growth[0].re.abs() < 1e-14);
        assert!(!r.unstable.contains(&0));
    }
}
