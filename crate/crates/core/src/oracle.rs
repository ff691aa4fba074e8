//! Discrete master equation on a 1-D lattice: a redistribution kernel
//! weighted by exponential covariates. Its one-step moments give the drift
//! and diffusion of the Fokker-Planck limit independently of the PDE solver.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{BinOp, Expr};
use crate::grid::{BoundaryCondition, Field, Grid};
use crate::kernels::KernelSpec;
use crate::memory::TemporalKernelSpec;
use crate::models::{Family, ModelSpec};
use crate::stepper::{self, StepConfig, TimeStep};

/// The kernel support is cut at this many standard deviations.
pub const TRUNCATION_SIGMAS: f64 = 8.0;
/// Largest mass a truncated kernel may lose.
pub const TRUNCATION_TOL: f64 = 1e-12;

/// Symmetric discrete Gaussian displacement kernel on a lattice of spacing
/// `spacing`, applied once every `tau`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeKernel {
    pub spacing: f64,
    pub sigma: f64,
    pub tau: f64,
    /// Weights for offsets `-half_width..=half_width`.
    pub weights: Vec<f64>,
    pub half_width: usize,
}

impl LatticeKernel {
    pub fn gaussian(spacing: f64, sigma: f64, tau: f64) -> Result<Self> {
        for (k, v) in [
            ("oracle.spacing", spacing),
            ("oracle.sigma", sigma),
            ("oracle.tau", tau),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(k, "must be positive"));
            }
        }
        let half_width = (TRUNCATION_SIGMAS * sigma / spacing).ceil() as usize;
        let raw = |z: i64| {
            let x = z as f64 * spacing / sigma;
            (-0.5 * x * x).exp()
        };
        let kept: f64 = (-(half_width as i64)..=half_width as i64).map(raw).sum();
        // mass beyond the cut, summed until it no longer changes
        let mut lost = 0.0;
        let mut z = half_width as i64 + 1;
        loop {
            let term = 2.0 * raw(z);
            lost += term;
            if term <= 1e-20 * lost || term == 0.0 {
                break;
            }
            z += 1;
        }
        let loss = lost / (kept + lost);
        if loss > TRUNCATION_TOL {
            return Err(Error::Truncation(loss));
        }
        let weights = (-(half_width as i64)..=half_width as i64)
            .map(|z| raw(z) / kept)
            .collect();
        Ok(LatticeKernel {
            spacing,
            sigma,
            tau,
            weights,
            half_width,
        })
    }

    pub fn weight(&self, offset: i64) -> f64 {
        let idx = offset + self.half_width as i64;
        if idx < 0 || idx as usize >= self.weights.len() {
            0.0
        } else {
            self.weights[idx as usize]
        }
    }

    /// `sum_z (z h)^p K(z)`.
    pub fn moment(&self, p: i32) -> f64 {
        let m = self.half_width as i64;
        (-m..=m)
            .map(|z| (z as f64 * self.spacing).powi(p) * self.weight(z))
            .sum()
    }
}

/// `w(x) = exp(sum_i beta_i a_i(x))` at the lattice points.
pub fn weight_field(grid: &Grid, covariates: &[(f64, Expr)]) -> Result<Vec<f64>> {
    let mut log_w = vec![0.0; grid.n_cells()];
    for (beta, a) in covariates {
        let f = a.sample(grid, 0.0)?;
        for (l, v) in log_w.iter_mut().zip(f.values()) {
            *l += beta * v;
        }
    }
    let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // a common factor cancels in the per-source normalization
    Ok(log_w.into_iter().map(|l| (l - top).exp()).collect())
}

/// Master equation on the cell centers of `grid`, each source point
/// renormalized over the finite lattice.
#[derive(Debug, Clone)]
pub struct MasterEquation {
    kernel: LatticeKernel,
    grid: Grid,
    w: Vec<f64>,
    norm: Vec<f64>,
}

impl MasterEquation {
    pub fn new(kernel: LatticeKernel, grid: Grid, w: Vec<f64>) -> Result<Self> {
        if (kernel.spacing - grid.dx()).abs() > 1e-12 * grid.dx() {
            return Err(Error::config(
                "oracle.spacing",
                "kernel spacing must equal the lattice spacing",
            ));
        }
        if w.len() != grid.n_cells() || w.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::config(
                "oracle.covariates",
                "weights must be positive at every lattice point",
            ));
        }
        let n = grid.n_cells();
        let m = kernel.half_width as i64;
        let norm = (0..n as i64)
            .map(|y| {
                let lo = (y - m).max(0);
                let hi = (y + m).min(n as i64 - 1);
                (lo..=hi)
                    .map(|x| kernel.weight(x - y) * w[x as usize])
                    .sum()
            })
            .collect();
        Ok(MasterEquation {
            kernel,
            grid,
            w,
            norm,
        })
    }

    pub fn kernel(&self) -> &LatticeKernel {
        &self.kernel
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Redistribution probability from lattice point `y` to `x`.
    pub fn transition(&self, x: usize, y: usize) -> f64 {
        self.kernel.weight(x as i64 - y as i64) * self.w[x] / self.norm[y]
    }

    /// One step `p'(x) = sum_y f(x, y) p(y)` of point probabilities.
    pub fn step(&self, p: &[f64]) -> Vec<f64> {
        let n = p.len();
        let m = self.kernel.half_width as i64;
        let scaled: Vec<f64> = p.iter().zip(&self.norm).map(|(a, z)| a / z).collect();
        (0..n as i64)
            .into_par_iter()
            .map(|x| {
                let lo = (x - m).max(0);
                let hi = (x + m).min(n as i64 - 1);
                let s: f64 = (lo..=hi)
                    .map(|y| self.kernel.weight(x - y) * scaled[y as usize])
                    .sum();
                self.w[x as usize] * s
            })
            .collect()
    }

    /// Conditional one-step displacement moments from a point mass at `source`.
    pub fn drift_diffusion(&self, source: usize) -> DriftDiffusion {
        let n = self.grid.n_cells();
        let m = self.kernel.half_width;
        let lo = source.saturating_sub(m);
        let hi = (source + m).min(n - 1);
        let h = self.grid.dx();
        let (mut m1, mut m2, mut m3) = (0.0, 0.0, 0.0);
        for x in lo..=hi {
            let dz = (x as f64 - source as f64) * h;
            let f = self.transition(x, source);
            m1 += dz * f;
            m2 += dz * dz * f;
            m3 += dz * dz * dz * f;
        }
        let tau = self.kernel.tau;
        DriftDiffusion {
            x: self.grid.center(source),
            c_hat: m1 / tau,
            d_hat: m2 / (2.0 * tau),
            d_hat_2d: m2 / (4.0 * tau),
            skew: m3 / tau,
        }
    }
}

/// One master-equation step with a freshly assembled operator.
pub fn master_step(p: &[f64], kernel: &LatticeKernel, grid: &Grid, w: &[f64]) -> Result<Vec<f64>> {
    Ok(MasterEquation::new(kernel.clone(), *grid, w.to_vec())?.step(p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftDiffusion {
    pub x: f64,
    /// `E[dx] / tau`
    pub c_hat: f64,
    /// `E[dx^2] / (2 tau)`, the one-dimensional constant.
    pub d_hat: f64,
    /// `E[dx^2] / (4 tau)`, the two-dimensional convention.
    pub d_hat_2d: f64,
    /// `E[dx^3] / tau`
    pub skew: f64,
}

pub fn estimate_drift_diffusion(me: &MasterEquation, source: usize) -> DriftDiffusion {
    me.drift_diffusion(source)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleConfig {
    pub length: f64,
    pub n_points: usize,
    pub sigma: f64,
    pub tau: f64,
    /// `(beta_i, a_i(x))` pairs.
    pub covariates: Vec<(f64, Expr)>,
    /// Initial density for the evolution comparison.
    pub initial: Expr,
    pub t_final: f64,
    /// Number of drift rows in the report.
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftRow {
    pub x: f64,
    pub c_hat: f64,
    pub d_hat: f64,
    /// `2 d_hat sum_i beta_i a_i'(x)`
    pub predicted: f64,
    pub rel_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub rows: Vec<DriftRow>,
    pub max_rel_dev: f64,
    /// Far-field diffusion in the one- and two-dimensional conventions.
    pub d_hat: f64,
    pub d_hat_2d: f64,
    pub kernel_m2: f64,
    /// L1 distance between master-equation and PDE densities at `t_final`.
    pub l1_distance: f64,
}

/// `sum_i beta_i a_i'(x)` by central differences on the expressions.
fn covariate_slope(covariates: &[(f64, Expr)], x: f64) -> Result<f64> {
    let h = 1e-5 * x.abs().max(1.0);
    let mut s = 0.0;
    for (beta, a) in covariates {
        s += beta * (a.eval(x + h, 0.0)? - a.eval(x - h, 0.0)?) / (2.0 * h);
    }
    Ok(s)
}

/// `sum_i beta_i a_i` as one expression.
fn combined_potential(covariates: &[(f64, Expr)]) -> Expr {
    covariates
        .iter()
        .map(|(b, a)| Expr::Binary(BinOp::Mul, Box::new(Expr::num(*b)), Box::new(a.clone())))
        .reduce(|acc, e| Expr::Binary(BinOp::Add, Box::new(acc), Box::new(e)))
        .unwrap_or(Expr::Num(0.0))
}

/// Compares the lattice drift with `2 d beta a'` and evolves both the master
/// equation and the PDE with potential `2 d sum beta_i a_i` from the same
/// initial density.
pub fn verify_fokker_planck(cfg: &OracleConfig) -> Result<OracleReport> {
    if !(cfg.t_final > 0.0) {
        return Err(Error::config("oracle.t_final", "must be positive"));
    }
    let grid = Grid::new(cfg.length, cfg.n_points, BoundaryCondition::ZeroFlux)?;
    let kernel = LatticeKernel::gaussian(grid.dx(), cfg.sigma, cfg.tau)?;
    let w = weight_field(&grid, &cfg.covariates)?;
    let me = MasterEquation::new(kernel.clone(), grid, w)?;
    let n = grid.n_cells();
    let margin = kernel.half_width + 1;
    if 2 * margin >= n {
        return Err(Error::config(
            "oracle.sigma",
            "kernel support covers the whole lattice",
        ));
    }
    let inner: Vec<usize> = (margin..n - margin).collect();
    let stride = (inner.len() / cfg.samples.max(1)).max(1);
    let sample: Vec<usize> = inner.iter().copied().step_by(stride).collect();
    let dd: Vec<DriftDiffusion> = sample.iter().map(|&i| me.drift_diffusion(i)).collect();
    let slopes = sample
        .iter()
        .map(|&i| covariate_slope(&cfg.covariates, grid.center(i)))
        .collect::<Result<Vec<_>>>()?;
    let scale = slopes.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    let mut rows = Vec::with_capacity(sample.len());
    let mut max_rel_dev: f64 = 0.0;
    for (d, s) in dd.iter().zip(&slopes) {
        let predicted = 2.0 * d.d_hat * s;
        let rel_dev = if s.abs() > 1e-3 * scale && scale > 0.0 {
            let r = (d.c_hat - predicted).abs() / predicted.abs();
            max_rel_dev = max_rel_dev.max(r);
            r
        } else {
            // drift vanishes here; only the absolute error is meaningful
            f64::NAN
        };
        rows.push(DriftRow {
            x: d.x,
            c_hat: d.c_hat,
            d_hat: d.d_hat,
            predicted,
            rel_dev,
        });
    }
    let m2 = kernel.moment(2);
    let d_hat = m2 / (2.0 * cfg.tau);

    // evolve both descriptions
    let u0 = cfg.initial.sample(&grid, 0.0)?;
    let mass0 = crate::grid::total_mass(&u0);
    if !(mass0 > 0.0) {
        return Err(Error::config(
            "oracle.initial",
            "initial density must have positive mass",
        ));
    }
    let u0 = u0.scale(1.0 / mass0);
    let steps = (cfg.t_final / cfg.tau).round() as usize;
    let mut p: Vec<f64> = u0.values().iter().map(|v| v * grid.dx()).collect();
    for _ in 0..steps {
        p = me.step(&p);
    }
    let master = Field::new(grid, p.iter().map(|v| v / grid.dx()).collect())?;
    let model = ModelSpec {
        family: Family::PerceptionForaging {
            d: d_hat,
            gamma: 2.0 * d_hat,
            landscape: combined_potential(&cfg.covariates),
        },
        kernel: KernelSpec::delta(),
        temporal: TemporalKernelSpec::None,
    };
    let step_cfg = StepConfig {
        dt: TimeStep::Auto { cfl: 0.4 },
        dt_max: Some(cfg.tau),
        t_end: steps as f64 * cfg.tau,
        snapshot_every: steps as f64 * cfg.tau,
        ..StepConfig::default()
    };
    let traj = stepper::run(&model, &grid, vec![u0], &step_cfg)?;
    let pde = &traj.last().fields[0];
    let l1 = grid.dx()
        * master
            .values()
            .iter()
            .zip(pde.values())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>();
    Ok(OracleReport {
        rows,
        max_rel_dev,
        d_hat,
        d_hat_2d: m2 / (4.0 * cfg.tau),
        kernel_m2: m2,
        l1_distance: l1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;

    fn lattice(n: usize, length: f64, sigma: f64) -> (Grid, LatticeKernel) {
        let g = Grid::new(length, n, BoundaryCondition::ZeroFlux).unwrap();
        let k = LatticeKernel::gaussian(g.dx(), sigma, 0.01).unwrap();
        (g, k)
    }

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        let (_, k) = lattice(200, 1.0, 0.02);
        assert!((k.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(k.moment(1).abs() < 1e-17);
        for z in 0..=k.half_width as i64 {
            assert_eq!(k.weight(z), k.weight(-z));
        }
    }

    #[test]
    fn six_sigma_would_lose_too_much() {
        // the same kernel cut at six standard deviations loses ~2e-9
        let tail: f64 = statrs::function::erf::erfc(6.0 / std::f64::consts::SQRT_2);
        assert!(tail > TRUNCATION_TOL);
    }

    #[test]
    fn constant_weights_give_plain_convolution() {
        let (g, k) = lattice(100, 1.0, 0.02);
        let me = MasterEquation::new(k.clone(), g, vec![2.0; 100]).unwrap();
        let mut p = vec![0.0; 100];
        p[50] = 1.0;
        let q = me.step(&p);
        for x in 0..100 {
            assert!((q[x] - k.weight(x as i64 - 50)).abs() < 1e-15);
        }
        let dd = me.drift_diffusion(50);
        assert!(dd.c_hat.abs() < 1e-15);
        assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn tilted_weights_drift_uphill() {
        let (g, k) = lattice(400, 1.0, 0.01);
        let w = weight_field(&g, &[(0.3, parse_expression("x").unwrap())]).unwrap();
        let me = MasterEquation::new(k, g, w).unwrap();
        let dd = me.drift_diffusion(200);
        assert!(dd.c_hat > 0.0);
        // tilted Gaussian: c / (2 d) = beta / (1 + beta^2 sigma^2)
        let expect = 0.3 / (1.0 + 0.09 * 1e-4);
        assert!((dd.c_hat / (2.0 * dd.d_hat) - expect).abs() < 1e-6);
    }
}
