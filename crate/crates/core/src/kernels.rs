//! Perceptual kernels, the nonlocal perception operator and kernel Fourier
//! symbols.
//!
//! Discrete weights are exact cell integrals of the kernel density, so the
//! top-hat discontinuity does not spoil convergence orders.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelShape {
    TopHat,
    Gaussian,
    Exponential,
    Delta,
}

impl KernelShape {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "top_hat" | "tophat" => Some(KernelShape::TopHat),
            "gaussian" => Some(KernelShape::Gaussian),
            "exponential" => Some(KernelShape::Exponential),
            "delta" => Some(KernelShape::Delta),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelShape::TopHat => "top_hat",
            KernelShape::Gaussian => "gaussian",
            KernelShape::Exponential => "exponential",
            KernelShape::Delta => "delta",
        }
    }
}

/// How the kernel is treated where its support leaves a bounded habitat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    /// Drop the mass outside the habitat.
    #[default]
    CutOff,
    /// Drop it and rescale the remaining weights to sum to one.
    CutOffRenormalized,
}

impl BoundaryMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cut_off" | "cutoff" => Some(BoundaryMode::CutOff),
            "cut_off_renormalized" | "renormalized" => Some(BoundaryMode::CutOffRenormalized),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BoundaryMode::CutOff => "cut_off",
            BoundaryMode::CutOffRenormalized => "cut_off_renormalized",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub shape: KernelShape,
    pub radius: f64,
    #[serde(default)]
    pub boundary_mode: BoundaryMode,
}

impl KernelSpec {
    pub fn new(shape: KernelShape, radius: f64, boundary_mode: BoundaryMode) -> Result<Self> {
        let spec = KernelSpec {
            shape,
            radius,
            boundary_mode,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn delta() -> Self {
        KernelSpec {
            shape: KernelShape::Delta,
            radius: 0.0,
            boundary_mode: BoundaryMode::CutOff,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.radius.is_finite() || self.radius < 0.0 {
            return Err(Error::config(
                "kernel.radius",
                "must be a finite nonnegative number",
            ));
        }
        if self.radius == 0.0 && self.shape != KernelShape::Delta {
            return Err(Error::config(
                "kernel.radius",
                format!(
                    "radius 0 is only allowed for the delta kernel, not {}",
                    self.shape.name()
                ),
            ));
        }
        Ok(())
    }

    /// Kernel mass on `[x, inf)` for `x >= 0`.
    fn upper_tail(&self, x: f64) -> f64 {
        let r = self.radius;
        match self.shape {
            KernelShape::TopHat => ((r - x) / (2.0 * r)).clamp(0.0, 0.5),
            KernelShape::Gaussian => 0.5 * erfc(x / (r * std::f64::consts::SQRT_2)),
            KernelShape::Exponential => 0.5 * (-x / r).exp(),
            KernelShape::Delta => 0.0,
        }
    }

    /// Exact kernel mass on `[a, b]`.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        if self.shape == KernelShape::Delta {
            return if a <= 0.0 && 0.0 < b { 1.0 } else { 0.0 };
        }
        if b <= 0.0 {
            return self.mass_between(-b, -a);
        }
        if a >= 0.0 {
            return (self.upper_tail(a) - self.upper_tail(b)).max(0.0);
        }
        1.0 - self.upper_tail(-a) - self.upper_tail(b)
    }

    /// Distance beyond which the kernel mass is negligible (below ~1e-17).
    pub fn support_radius(&self) -> f64 {
        let r = self.radius;
        match self.shape {
            KernelShape::TopHat => r,
            KernelShape::Gaussian => 9.0 * r,
            KernelShape::Exponential => 40.0 * r,
            KernelShape::Delta => 0.0,
        }
    }
}

/// Pointwise kernel density. The delta kernel has no pointwise value.
pub fn kernel_density(spec: &KernelSpec, x: f64) -> Result<f64> {
    let r = spec.radius;
    let ax = x.abs();
    match spec.shape {
        KernelShape::TopHat => Ok(if ax <= r { 1.0 / (2.0 * r) } else { 0.0 }),
        KernelShape::Gaussian => {
            Ok((-x * x / (2.0 * r * r)).exp() / (r * (2.0 * std::f64::consts::PI).sqrt()))
        }
        KernelShape::Exponential => Ok((-ax / r).exp() / (2.0 * r)),
        KernelShape::Delta => Err(Error::Unsupported(
            "the delta kernel acts as the identity convolution and has no pointwise density".into(),
        )),
    }
}

/// Symmetric discrete stencil: `weights[half_width + j]` is the kernel mass
/// over the cell `j` cells away from the centre cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub half_width: usize,
    pub weights: Vec<f64>,
}

impl Stencil {
    pub fn weight(&self, offset: isize) -> f64 {
        let idx = offset + self.half_width as isize;
        if idx < 0 || idx as usize >= self.weights.len() {
            0.0
        } else {
            self.weights[idx as usize]
        }
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Exact cell-integrated weights of the kernel on the grid spacing.
pub fn kernel_weights(spec: &KernelSpec, grid: &Grid) -> Result<Stencil> {
    spec.validate()?;
    if spec.radius >= grid.length() {
        return Err(Error::config(
            "kernel.radius",
            format!(
                "perceptual radius {} must be smaller than the habitat length {}",
                spec.radius,
                grid.length()
            ),
        ));
    }
    let dx = grid.dx();
    if spec.shape == KernelShape::Delta {
        return Ok(Stencil {
            half_width: 0,
            weights: vec![1.0],
        });
    }
    let half_width = (spec.support_radius() / dx + 0.5).ceil() as usize;
    let weights = (-(half_width as isize)..=half_width as isize)
        .map(|j| spec.mass_between((j as f64 - 0.5) * dx, (j as f64 + 0.5) * dx))
        .collect();
    Ok(Stencil {
        half_width,
        weights,
    })
}

/// Reusable perception operator for one kernel on one grid.
#[derive(Clone)]
pub struct Perception {
    grid: Grid,
    kind: PerceptionKind,
}

#[derive(Clone)]
enum PerceptionKind {
    Identity,
    Bounded {
        stencil: Stencil,
        renormalize: bool,
    },
    Periodic {
        /// `circular[m]` multiplies `a[(i + m) mod n]`.
        circular: Vec<f64>,
        fft: Option<Arc<FftPath>>,
    },
}

struct FftPath {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    symbol: Vec<Complex<f64>>,
}

/// Above this many cells the periodic operator switches to the FFT path.
pub const FFT_THRESHOLD: usize = 512;

impl Perception {
    pub fn new(spec: &KernelSpec, grid: &Grid) -> Result<Self> {
        let stencil = kernel_weights(spec, grid)?;
        let kind = if spec.shape == KernelShape::Delta {
            PerceptionKind::Identity
        } else if grid.bc().is_periodic() {
            let circular = periodize(&stencil, grid.n_cells());
            let fft = if grid.n_cells() >= FFT_THRESHOLD {
                Some(Arc::new(FftPath::new(&circular)))
            } else {
                None
            };
            PerceptionKind::Periodic { circular, fft }
        } else {
            PerceptionKind::Bounded {
                stencil,
                renormalize: spec.boundary_mode == BoundaryMode::CutOffRenormalized,
            }
        };
        Ok(Perception { grid: *grid, kind })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.kind, PerceptionKind::Identity)
    }

    pub fn apply(&self, a: &Field) -> Field {
        match &self.kind {
            PerceptionKind::Identity => a.clone(),
            PerceptionKind::Bounded {
                stencil,
                renormalize,
            } => bounded_sum(a, stencil, *renormalize),
            PerceptionKind::Periodic { circular, fft } => match fft {
                Some(path) => path.apply(a),
                None => circular_sum(a, circular),
            },
        }
    }

    /// Periodic grids only: the direct circular sum regardless of size.
    pub fn apply_direct(&self, a: &Field) -> Field {
        match &self.kind {
            PerceptionKind::Periodic { circular, .. } => circular_sum(a, circular),
            _ => self.apply(a),
        }
    }

    /// Periodic grids only: the FFT path regardless of size.
    pub fn apply_fft(&self, a: &Field) -> Field {
        match &self.kind {
            PerceptionKind::Periodic { circular, fft } => match fft {
                Some(path) => path.apply(a),
                None => FftPath::new(circular).apply(a),
            },
            _ => self.apply(a),
        }
    }
}

fn periodize(stencil: &Stencil, n: usize) -> Vec<f64> {
    let mut circular = vec![0.0; n];
    let hw = stencil.half_width as isize;
    for (idx, w) in stencil.weights.iter().enumerate() {
        let j = idx as isize - hw;
        circular[j.rem_euclid(n as isize) as usize] += w;
    }
    circular
}

fn bounded_sum(a: &Field, stencil: &Stencil, renormalize: bool) -> Field {
    let n = a.len() as isize;
    let hw = stencil.half_width as isize;
    let v = a.values();
    let out = (0..n)
        .map(|i| {
            let lo = (i - hw).max(0);
            let hi = (i + hw).min(n - 1);
            let mut acc = 0.0;
            let mut mass = 0.0;
            for j in lo..=hi {
                let w = stencil.weights[(j - i + hw) as usize];
                acc += w * v[j as usize];
                mass += w;
            }
            if renormalize && mass > 0.0 {
                acc / mass
            } else {
                acc
            }
        })
        .collect();
    Field::new(*a.grid(), out).expect("same grid")
}

fn circular_sum(a: &Field, circular: &[f64]) -> Field {
    let n = a.len();
    let v = a.values();
    let out = (0..n)
        .map(|i| {
            circular
                .iter()
                .enumerate()
                .map(|(m, w)| w * v[(i + m) % n])
                .sum()
        })
        .collect();
    Field::new(*a.grid(), out).expect("same grid")
}

impl FftPath {
    fn new(circular: &[f64]) -> Self {
        let n = circular.len();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        // out_i = sum_m c_m a_{i+m} is a correlation; reversing c turns it
        // into a convolution with c'_m = c_{-m}.
        let mut symbol: Vec<Complex<f64>> = (0..n)
            .map(|m| Complex::new(circular[(n - m) % n], 0.0))
            .collect();
        forward.process(&mut symbol);
        FftPath {
            forward,
            inverse,
            symbol,
        }
    }

    fn apply(&self, a: &Field) -> Field {
        let n = a.len();
        let mut buf: Vec<Complex<f64>> = a.values().iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(&self.symbol) {
            *b *= s;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / n as f64;
        Field::new(*a.grid(), buf.iter().map(|c| c.re * scale).collect()).expect("same grid")
    }
}

/// Nonlocal perception of `a` through the kernel.
pub fn perceive(a: &Field, spec: &KernelSpec, grid: &Grid) -> Result<Field> {
    Ok(Perception::new(spec, grid)?.apply(a))
}

/// Cosine transform of the kernel density, `int g(x) cos(kx) dx`.
pub fn fourier_symbol(spec: &KernelSpec, k: f64) -> f64 {
    let kr = k * spec.radius;
    match spec.shape {
        KernelShape::Delta => 1.0,
        KernelShape::TopHat => {
            if kr.abs() < 1e-8 {
                1.0 - kr * kr / 6.0
            } else {
                kr.sin() / kr
            }
        }
        KernelShape::Gaussian => (-0.5 * kr * kr).exp(),
        KernelShape::Exponential => 1.0 / (1.0 + kr * kr),
    }
}
