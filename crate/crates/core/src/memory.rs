//! Temporal memory kernels, delay history and the spatiotemporal
//! (distributed-delay) convolution.

use std::collections::VecDeque;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::{BoundaryCondition, Field, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TemporalKernelSpec {
    #[default]
    None,
    DiscreteDelay {
        tau: f64,
    },
    /// `tau^-1 exp(-t / tau)`
    Weak {
        tau: f64,
    },
    /// `t tau^-2 exp(-t / tau)`
    Strong {
        tau: f64,
    },
}

impl TemporalKernelSpec {
    pub fn tau(&self) -> Option<f64> {
        match *self {
            TemporalKernelSpec::None => None,
            TemporalKernelSpec::DiscreteDelay { tau }
            | TemporalKernelSpec::Weak { tau }
            | TemporalKernelSpec::Strong { tau } => Some(tau),
        }
    }

    pub fn is_distributed(&self) -> bool {
        matches!(
            self,
            TemporalKernelSpec::Weak { .. } | TemporalKernelSpec::Strong { .. }
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            TemporalKernelSpec::None => "none",
            TemporalKernelSpec::DiscreteDelay { .. } => "discrete",
            TemporalKernelSpec::Weak { .. } => "weak",
            TemporalKernelSpec::Strong { .. } => "strong",
        }
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        match self.tau() {
            Some(tau) if !(tau.is_finite() && tau >= 0.0) => Err(Error::config(
                path,
                format!("tau must be finite and nonnegative, got {tau}"),
            )),
            Some(tau) if tau == 0.0 && self.is_distributed() => {
                Err(Error::config(path, "distributed kernels need tau > 0"))
            }
            _ => Ok(()),
        }
    }

    /// Kernel mass on `[t, inf)`.
    pub fn tail_mass(&self, t: f64) -> f64 {
        match *self {
            TemporalKernelSpec::Weak { tau } => (-t / tau).exp(),
            TemporalKernelSpec::Strong { tau } => (1.0 + t / tau) * (-t / tau).exp(),
            TemporalKernelSpec::DiscreteDelay { tau } => {
                if t <= tau {
                    1.0
                } else {
                    0.0
                }
            }
            TemporalKernelSpec::None => 0.0,
        }
    }
}

pub fn temporal_density(spec: &TemporalKernelSpec, t: f64) -> Result<f64> {
    if t < 0.0 {
        return Ok(0.0);
    }
    match *spec {
        TemporalKernelSpec::Weak { tau } => Ok((-t / tau).exp() / tau),
        TemporalKernelSpec::Strong { tau } => Ok(t * (-t / tau).exp() / (tau * tau)),
        _ => Err(Error::Unsupported(format!(
            "{} temporal kernel has no pointwise density",
            spec.name()
        ))),
    }
}

/// Values of the fields before the start of the simulation.
#[derive(Debug, Clone)]
pub enum InitialHistory {
    /// Constant-in-time continuation of the given fields.
    Constant(Vec<Field>),
    /// One expression in `(x, t)` per field, evaluated for `t <= t_start`.
    Expressions { grid: Grid, exprs: Vec<Expr> },
}

impl InitialHistory {
    pub fn n_fields(&self) -> usize {
        match self {
            InitialHistory::Constant(f) => f.len(),
            InitialHistory::Expressions { exprs, .. } => exprs.len(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, InitialHistory::Constant(_))
    }

    pub fn eval(&self, species: usize, t: f64) -> Result<Field> {
        match self {
            InitialHistory::Constant(f) => Ok(f[species].clone()),
            InitialHistory::Expressions { grid, exprs } => exprs[species].sample(grid, t),
        }
    }
}

/// Time-stamped snapshots of every stored field, oldest first.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    t_start: f64,
    horizon: f64,
    times: VecDeque<f64>,
    snapshots: VecDeque<Vec<Field>>,
    initial: InitialHistory,
}

impl HistoryBuffer {
    /// Creates a buffer whose first snapshot is `fields` at `t_start`.
    pub fn new(
        t_start: f64,
        fields: Vec<Field>,
        horizon: f64,
        initial: InitialHistory,
    ) -> Result<Self> {
        if fields.len() != initial.n_fields() {
            return Err(Error::config(
                "delay.initial_history",
                format!(
                    "initial history has {} fields, state has {}",
                    initial.n_fields(),
                    fields.len()
                ),
            ));
        }
        if !(horizon >= 0.0) {
            return Err(Error::config(
                "delay.horizon",
                "horizon must be nonnegative",
            ));
        }
        Ok(HistoryBuffer {
            t_start,
            horizon,
            times: VecDeque::from([t_start]),
            snapshots: VecDeque::from([fields]),
            initial,
        })
    }

    pub fn now(&self) -> f64 {
        *self.times.back().expect("buffer is never empty")
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn initial(&self) -> &InitialHistory {
        &self.initial
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Iterates `(t, fields)` oldest first.
    pub fn iter(&self) -> impl DoubleEndedIterator<Item = (f64, &[Field])> + '_ {
        self.times
            .iter()
            .copied()
            .zip(self.snapshots.iter().map(|s| s.as_slice()))
    }

    /// Earliest time still covered by stored snapshots.
    pub fn oldest(&self) -> f64 {
        *self.times.front().expect("buffer is never empty")
    }

    /// Appends a snapshot and discards what the horizon no longer needs.
    pub fn push(&mut self, t: f64, fields: Vec<Field>) -> Result<()> {
        let now = self.now();
        if !(t > now) {
            return Err(Error::StepRejected(format!(
                "history snapshot at t={t} does not advance past t={now}"
            )));
        }
        self.times.push_back(t);
        self.snapshots.push_back(fields);
        // keep one snapshot at or before t - horizon for interpolation
        let cutoff = t - self.horizon;
        while self.times.len() > 2 && self.times[1] <= cutoff {
            self.times.pop_front();
            self.snapshots.pop_front();
        }
        Ok(())
    }

    /// Field `species` at `t_query`, linearly interpolated between stored
    /// snapshots, or taken from the initial history before `t_start`.
    pub fn sample(&self, species: usize, t_query: f64) -> Result<Field> {
        let now = self.now();
        let eps = 1e-12 * now.abs().max(1.0);
        if t_query > now + eps {
            return Err(Error::HistoryAhead {
                query: t_query,
                now,
            });
        }
        if t_query <= self.t_start {
            return self.initial.eval(species, t_query);
        }
        if t_query >= now {
            return Ok(self.snapshots.back().expect("nonempty")[species].clone());
        }
        if t_query < self.oldest() {
            return Err(Error::Horizon {
                tail_mass: f64::NAN,
            });
        }
        // first index with time >= t_query
        let hi = self.times.partition_point(|&s| s < t_query);
        let t1 = self.times[hi];
        if t1 == t_query {
            return Ok(self.snapshots[hi][species].clone());
        }
        let t0 = self.times[hi - 1];
        let w = (t_query - t0) / (t1 - t0);
        let a = &self.snapshots[hi - 1][species];
        let b = &self.snapshots[hi][species];
        Ok(a.zip_map(b, |p, q| (1.0 - w) * p + w * q))
    }
}

pub fn history_sample(buf: &HistoryBuffer, species: usize, t_query: f64) -> Result<Field> {
    buf.sample(species, t_query)
}

/// Type-II cosine basis of a cell-centred grid with no-flux ends.
#[derive(Debug, Clone)]
pub struct CosineBasis {
    n: usize,
    /// `table[j * n + i] = cos(j pi (i + 1/2) / n)`
    table: Vec<f64>,
}

impl CosineBasis {
    pub fn new(n: usize) -> Self {
        let mut table = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                table[j * n + i] = (j as f64 * PI * (i as f64 + 0.5) / n as f64).cos();
            }
        }
        CosineBasis { n, table }
    }

    /// Coefficients `c_j` with `f_i = sum_j c_j cos(j pi (i + 1/2) / n)`.
    pub fn forward(&self, f: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|j| {
                let row = &self.table[j * n..(j + 1) * n];
                let s: f64 = row.iter().zip(f).map(|(c, v)| c * v).sum();
                if j == 0 {
                    s / n as f64
                } else {
                    2.0 * s / n as f64
                }
            })
            .collect()
    }

    pub fn inverse(&self, c: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for (j, &cj) in c.iter().enumerate() {
            if cj == 0.0 {
                continue;
            }
            let row = &self.table[j * n..(j + 1) * n];
            for (o, r) in out.iter_mut().zip(row) {
                *o += cj * r;
            }
        }
        out
    }
}

/// `int_0^1 y^q e^{-z y} dy` for `q = 0, 1, 2` and `z >= 0`.
fn moment_integrals(z: f64) -> [f64; 3] {
    if z < 0.5 {
        // alternating series, converges fast for small z
        let mut out = [0.0; 3];
        for (q, o) in out.iter_mut().enumerate() {
            let mut term = 1.0;
            let mut acc = 0.0;
            for m in 0..30 {
                acc += term / (q + m + 1) as f64;
                term *= -z / (m + 1) as f64;
            }
            *o = acc;
        }
        return out;
    }
    let ez = (-z).exp();
    [
        (1.0 - ez) / z,
        (1.0 - ez * (1.0 + z)) / (z * z),
        (2.0 - ez * (z * z + 2.0 * z + 2.0)) / (z * z * z),
    ]
}

/// Evaluates the spatiotemporal convolution of a density history with the
/// heat kernel of rate `d3` and a weak or strong temporal kernel.
///
/// Each stored snapshot is expanded in the cosine basis once. Between
/// snapshots the history is linear in time (as in [`HistoryBuffer::sample`])
/// and each mode is integrated against the kernel exactly.
#[derive(Debug, Clone)]
pub struct DistributedConvolver {
    spec: TemporalKernelSpec,
    d3: f64,
    grid: Grid,
    basis: CosineBasis,
    eigen: Vec<f64>,
    t_start: f64,
    horizon: f64,
    initial: InitialHistory,
    species: usize,
    times: VecDeque<f64>,
    coeffs: VecDeque<Vec<f64>>,
}

/// Mode weights below this are dropped from the cosine series.
pub const MODE_CUTOFF: f64 = 1e-14;
/// Largest temporal-kernel mass allowed beyond the stored horizon.
pub const HORIZON_TAIL: f64 = 1e-6;

impl DistributedConvolver {
    pub fn new(
        spec: TemporalKernelSpec,
        d3: f64,
        grid: Grid,
        horizon: f64,
        initial: InitialHistory,
        species: usize,
    ) -> Result<Self> {
        if !spec.is_distributed() {
            return Err(Error::Unsupported(format!(
                "direct convolution needs a weak or strong kernel, got {}",
                spec.name()
            )));
        }
        match grid.bc() {
            BoundaryCondition::ZeroFlux | BoundaryCondition::HomogeneousNeumann => {}
            other => {
                return Err(Error::Unsupported(format!(
                    "direct distributed convolution needs a no-flux grid, got {}",
                    other.name()
                )))
            }
        }
        if !(d3 >= 0.0) {
            return Err(Error::config("delay.d3", "must be nonnegative"));
        }
        let n = grid.n_cells();
        let eigen = (0..n)
            .map(|j| {
                let kappa = j as f64 * PI / grid.length();
                d3 * kappa * kappa
            })
            .collect();
        Ok(DistributedConvolver {
            spec,
            d3,
            grid,
            basis: CosineBasis::new(n),
            eigen,
            t_start: f64::NAN,
            horizon,
            initial,
            species,
            times: VecDeque::new(),
            coeffs: VecDeque::new(),
        })
    }

    pub fn d3(&self) -> f64 {
        self.d3
    }

    pub fn push(&mut self, t: f64, u: &Field) -> Result<()> {
        if let Some(&last) = self.times.back() {
            if !(t > last) {
                return Err(Error::StepRejected(format!(
                    "convolution history at t={t} does not advance past t={last}"
                )));
            }
        } else {
            self.t_start = t;
        }
        self.times.push_back(t);
        self.coeffs.push_back(self.basis.forward(u.values()));
        let cutoff = t - self.horizon;
        while self.times.len() > 2 && self.times[1] <= cutoff {
            self.times.pop_front();
            self.coeffs.pop_front();
        }
        Ok(())
    }

    /// Integral over lag `[s0, s0 + h]` of kernel times heat decay, with the
    /// coefficient linear from `c0` (at lag `s0`) to `c1` (at lag `s0 + h`).
    fn panel(&self, b: f64, s0: f64, h: f64, c0: f64, c1: f64) -> f64 {
        let [e0, e1, e2] = moment_integrals(b * h);
        let decay = (-b * s0).exp();
        match self.spec {
            TemporalKernelSpec::Weak { tau } => h / tau * decay * (c0 * (e0 - e1) + c1 * e1),
            TemporalKernelSpec::Strong { tau } => {
                h / (tau * tau)
                    * decay
                    * (c0 * (s0 * (e0 - e1) + h * (e1 - e2)) + c1 * (s0 * e1 + h * e2))
            }
            _ => unreachable!("validated in new"),
        }
    }

    /// Integral over lag `[s, inf)` of kernel times heat decay with unit
    /// coefficient.
    fn tail(&self, b: f64, s: f64) -> f64 {
        match self.spec {
            TemporalKernelSpec::Weak { tau } => (-b * s).exp() / (tau * b),
            TemporalKernelSpec::Strong { tau } => {
                (-b * s).exp() * (s / b + 1.0 / (b * b)) / (tau * tau)
            }
            _ => unreachable!("validated in new"),
        }
    }

    /// The convolved field at the latest pushed time.
    pub fn evaluate(&self) -> Result<Field> {
        let Some(&t) = self.times.back() else {
            return Err(Error::Unsupported(
                "convolution evaluated before any history".into(),
            ));
        };
        let n = self.grid.n_cells();
        let tau = self.spec.tau().expect("distributed");
        let oldest_lag = t - self.times[0];
        let covers_start = self.times[0] <= self.t_start;
        if !covers_start {
            let tail = self.spec.tail_mass(oldest_lag);
            if tail > HORIZON_TAIL {
                return Err(Error::Horizon { tail_mass: tail });
            }
        }
        let mut out = vec![0.0; n];
        for j in 0..n {
            let b = 1.0 / tau + self.eigen[j];
            let mut acc = 0.0;
            for k in (1..self.times.len()).rev() {
                let s0 = t - self.times[k];
                if (-self.eigen[j] * s0).exp() < MODE_CUTOFF {
                    break;
                }
                let h = self.times[k] - self.times[k - 1];
                acc += self.panel(b, s0, h, self.coeffs[k][j], self.coeffs[k - 1][j]);
            }
            out[j] = acc;
        }
        let mut field = self.basis.inverse(&out);
        if covers_start {
            let lag = t - self.t_start;
            match &self.initial {
                InitialHistory::Constant(fields) => {
                    let c = self.basis.forward(fields[self.species].values());
                    let mut tail = vec![0.0; n];
                    for j in 0..n {
                        let b = 1.0 / tau + self.eigen[j];
                        if (-self.eigen[j] * lag).exp() >= MODE_CUTOFF {
                            tail[j] = c[j] * self.tail(b, lag);
                        }
                    }
                    for (f, v) in field.iter_mut().zip(self.basis.inverse(&tail)) {
                        *f += v;
                    }
                }
                InitialHistory::Expressions { exprs, .. } => {
                    let v = self.expression_tail(&exprs[self.species], lag)?;
                    for (f, x) in field.iter_mut().zip(v) {
                        *f += x;
                    }
                }
            }
        }
        Field::new(self.grid, field)
    }

    /// Quadrature of a time-dependent prehistory, lag `[lag, lag + horizon]`.
    fn expression_tail(&self, expr: &Expr, lag: f64) -> Result<Vec<f64>> {
        let n = self.grid.n_cells();
        let tau = self.spec.tau().expect("distributed");
        let remaining = (self.horizon - lag).max(0.0);
        let tail = self.spec.tail_mass(lag + remaining);
        if tail > HORIZON_TAIL {
            return Err(Error::Horizon { tail_mass: tail });
        }
        if remaining == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let panels = ((remaining / tau) * 200.0).ceil().max(1.0) as usize;
        let h = remaining / panels as f64;
        let mut acc = vec![0.0; n];
        let mut prev = self
            .basis
            .forward(expr.sample(&self.grid, self.t_start)?.values());
        for p in 0..panels {
            let s0 = lag + p as f64 * h;
            let next_t = self.t_start - (p + 1) as f64 * h;
            let next = self
                .basis
                .forward(expr.sample(&self.grid, next_t)?.values());
            for j in 0..n {
                let b = 1.0 / tau + self.eigen[j];
                acc[j] += self.panel(b, s0, h, prev[j], next[j]);
            }
            prev = next;
        }
        Ok(self.basis.inverse(&acc))
    }
}

/// One-shot evaluation of the spatiotemporal convolution of field `species`
/// of the buffer at the buffer's current time.
pub fn direct_distributed_convolution(
    buf: &HistoryBuffer,
    species: usize,
    spec: &TemporalKernelSpec,
    d3: f64,
    grid: &Grid,
) -> Result<Field> {
    let mut conv = DistributedConvolver::new(
        *spec,
        d3,
        *grid,
        buf.horizon(),
        buf.initial().clone(),
        species,
    )?;
    conv.t_start = buf.t_start();
    for (t, fields) in buf.iter() {
        conv.times.push_back(t);
        conv.coeffs
            .push_back(conv.basis.forward(fields[species].values()));
    }
    conv.evaluate()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_examples() {
        let w = TemporalKernelSpec::Weak { tau: 2.0 };
        assert_eq!(temporal_density(&w, 0.0).unwrap(), 0.5);
        let s = TemporalKernelSpec::Strong { tau: 3.0 };
        assert_eq!(temporal_density(&s, 0.0).unwrap(), 0.0);
        let s1 = TemporalKernelSpec::Strong { tau: 1.0 };
        assert!((temporal_density(&s1, 1.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert!(temporal_density(&TemporalKernelSpec::DiscreteDelay { tau: 1.0 }, 0.5).is_err());
    }

    #[test]
    fn kernels_integrate_to_one() {
        for tau in [0.5, 1.0, 2.0] {
            for spec in [
                TemporalKernelSpec::Weak { tau },
                TemporalKernelSpec::Strong { tau },
            ] {
                // composite Simpson on [0, 60 tau]
                let n = 60_000;
                let h = 60.0 * tau / n as f64;
                let mut s = 0.0;
                for i in 0..=n {
                    let w = if i == 0 || i == n {
                        1.0
                    } else if i % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    s += w * temporal_density(&spec, i as f64 * h).unwrap();
                }
                s *= h / 3.0;
                assert!((s - 1.0).abs() < 1e-10, "{spec:?}: {s}");
            }
        }
    }

    #[test]
    fn strong_kernel_peaks_at_tau() {
        let s = TemporalKernelSpec::Strong { tau: 1.7 };
        let samples: Vec<f64> = (0..2000).map(|i| i as f64 * 0.005).collect();
        let best = samples
            .iter()
            .copied()
            .max_by(|a, b| {
                temporal_density(&s, *a)
                    .unwrap()
                    .total_cmp(&temporal_density(&s, *b).unwrap())
            })
            .unwrap();
        assert!((best - 1.7).abs() <= 0.005);
    }

    fn grid() -> Grid {
        Grid::new(1.0, 8, BoundaryCondition::ZeroFlux).unwrap()
    }

    #[test]
    fn history_examples() {
        let g = grid();
        let c = Field::constant(g, 2.5);
        let buf = HistoryBuffer::new(
            0.0,
            vec![c.clone()],
            1.0,
            InitialHistory::Constant(vec![c.clone()]),
        )
        .unwrap();
        assert_eq!(buf.sample(0, -3.0).unwrap(), c);
        assert_eq!(buf.sample(0, 0.0).unwrap(), c);

        let zero = Field::constant(g, 0.0);
        let one = Field::constant(g, 1.0);
        let u0 = Field::from_fn(g, |x| x);
        let mut buf = HistoryBuffer::new(
            0.0,
            vec![zero],
            10.0,
            InitialHistory::Constant(vec![u0.clone()]),
        )
        .unwrap();
        buf.push(1.0, vec![one]).unwrap();
        let s = buf.sample(0, 0.25).unwrap();
        assert!(s.values().iter().all(|v| (v - 0.25).abs() < 1e-15));
        assert_eq!(buf.sample(0, -5.0).unwrap(), u0);
        assert!(matches!(
            buf.sample(0, 1.5),
            Err(Error::HistoryAhead { .. })
        ));
        assert!(buf.push(1.0, vec![Field::constant(g, 0.0)]).is_err());
    }

    #[test]
    fn history_prunes_to_horizon() {
        let g = grid();
        let f = Field::constant(g, 1.0);
        let mut buf = HistoryBuffer::new(
            0.0,
            vec![f.clone()],
            1.0,
            InitialHistory::Constant(vec![f.clone()]),
        )
        .unwrap();
        for k in 1..=100 {
            buf.push(k as f64 * 0.1, vec![f.clone()]).unwrap();
        }
        assert!(buf.oldest() <= buf.now() - 1.0);
        assert!(buf.len() <= 12);
        assert!(buf.sample(0, buf.now() - 1.0).is_ok());
    }

    #[test]
    fn cosine_basis_round_trip() {
        let b = CosineBasis::new(16);
        let f: Vec<f64> = (0..16).map(|i| ((i * 7) % 5) as f64 - 1.3).collect();
        let back = b.inverse(&b.forward(&f));
        for (a, c) in f.iter().zip(&back) {
            assert!((a - c).abs() < 1e-12);
        }
    }

    #[test]
    fn moment_integrals_are_continuous_at_switch() {
        let lo = moment_integrals(0.5 - 1e-12);
        let hi = moment_integrals(0.5);
        for q in 0..3 {
            assert!((lo[q] - hi[q]).abs() < 1e-12);
        }
        assert_eq!(moment_integrals(0.0), [1.0, 0.5, 1.0 / 3.0]);
    }

    #[test]
    fn constant_history_convolves_to_itself() {
        let g = Grid::new(2.0, 16, BoundaryCondition::ZeroFlux).unwrap();
        let c = Field::constant(g, 0.7);
        for spec in [
            TemporalKernelSpec::Weak { tau: 0.5 },
            TemporalKernelSpec::Strong { tau: 0.5 },
        ] {
            let mut buf = HistoryBuffer::new(
                0.0,
                vec![c.clone()],
                6.0,
                InitialHistory::Constant(vec![c.clone()]),
            )
            .unwrap();
            for k in 1..=20 {
                buf.push(k as f64 * 0.05, vec![c.clone()]).unwrap();
            }
            let v = direct_distributed_convolution(&buf, 0, &spec, 0.3, &g).unwrap();
            assert!(
                v.values().iter().all(|x| (x - 0.7).abs() < 1e-12),
                "{spec:?}"
            );
        }
    }

    #[test]
    fn single_mode_weak_response() {
        let l = 1.5;
        let n = 32;
        let g = Grid::new(l, n, BoundaryCondition::ZeroFlux).unwrap();
        let (tau, d3) = (0.8, 0.4);
        let u = Field::from_fn(g, |x| 2.0 * (PI * x / l).cos());
        let buf = HistoryBuffer::new(
            0.0,
            vec![u.clone()],
            12.0 * tau,
            InitialHistory::Constant(vec![u.clone()]),
        )
        .unwrap();
        let v = direct_distributed_convolution(&buf, 0, &TemporalKernelSpec::Weak { tau }, d3, &g)
            .unwrap();
        // the sampled cosine is the discrete mode j = 1 exactly
        let factor = 1.0 / (1.0 + tau * d3 * (PI / l).powi(2));
        for (a, b) in v.values().iter().zip(u.values()) {
            assert!((a - factor * b).abs() < 1e-12);
        }
    }

    #[test]
    fn non_noflux_grid_is_rejected() {
        let g = Grid::new(1.0, 8, BoundaryCondition::Periodic).unwrap();
        let c = Field::constant(g, 1.0);
        let buf = HistoryBuffer::new(0.0, vec![c.clone()], 1.0, InitialHistory::Constant(vec![c]))
            .unwrap();
        assert!(direct_distributed_convolution(
            &buf,
            0,
            &TemporalKernelSpec::Weak { tau: 1.0 },
            1.0,
            &g
        )
        .is_err());
    }
}
