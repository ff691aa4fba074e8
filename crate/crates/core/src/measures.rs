//! Success measures over trajectories and parameter sweeps over them.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{total_mass, Field};
use crate::stepper::{Attractor, Trajectory};

/// Smallest resource density accepted by the modified measure.
pub const RESOURCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    ForagingSuccess,
    ModifiedForagingSuccess,
    NetGrowth,
}

impl MeasureKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "foraging_success" | "fs" => Some(MeasureKind::ForagingSuccess),
            "modified_foraging_success" | "mfs" => Some(MeasureKind::ModifiedForagingSuccess),
            "net_growth" => Some(MeasureKind::NetGrowth),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MeasureKind::ForagingSuccess => "foraging_success",
            MeasureKind::ModifiedForagingSuccess => "modified_foraging_success",
            MeasureKind::NetGrowth => "net_growth",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureReport {
    pub kind: MeasureKind,
    pub value: f64,
    pub window: (f64, f64),
    /// True when the window start fell back to half the run length.
    pub default_window_start: bool,
}

fn check_window(traj: &Trajectory, t0: f64, t1: f64) -> Result<()> {
    let first = traj.snapshots[0].t;
    let last = traj.last().t;
    let slack = 1e-9 * last.abs().max(1.0);
    if !(t0 < t1) || t0 < first - slack || t1 > last + slack {
        return Err(Error::Window {
            start: t0,
            end: t1,
            first,
            last,
        });
    }
    Ok(())
}

/// Field `i` at time `t`, linear in time between snapshots.
pub fn field_at(traj: &Trajectory, i: usize, t: f64) -> Field {
    let snaps = &traj.snapshots;
    let k = snaps.partition_point(|s| s.t < t);
    if k == 0 {
        return snaps[0].fields[i].clone();
    }
    if k == snaps.len() {
        return snaps[k - 1].fields[i].clone();
    }
    let (a, b) = (&snaps[k - 1], &snaps[k]);
    if b.t == t {
        return b.fields[i].clone();
    }
    let w = (t - a.t) / (b.t - a.t);
    a.fields[i].zip_map(&b.fields[i], |p, q| (1.0 - w) * p + w * q)
}

/// Trapezoid rule in time over the snapshots inside `[t0, t1]`, with the
/// window ends interpolated.
fn time_integral(
    traj: &Trajectory,
    t0: f64,
    t1: f64,
    mut f: impl FnMut(f64, Option<usize>) -> Result<f64>,
) -> Result<f64> {
    let mut nodes: Vec<(f64, Option<usize>)> = vec![(t0, None)];
    for (k, s) in traj.snapshots.iter().enumerate() {
        if s.t > t0 && s.t < t1 {
            nodes.push((s.t, Some(k)));
        }
    }
    nodes.push((t1, None));
    let values = nodes
        .iter()
        .map(|&(t, k)| f(t, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(nodes
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1].0 - t[0].0) * (v[0] + v[1]))
        .sum())
}

fn snapshot_field(traj: &Trajectory, i: usize, t: f64, k: Option<usize>) -> Field {
    match k {
        Some(k) => traj.snapshots[k].fields[i].clone(),
        None => field_at(traj, i, t),
    }
}

/// `int_{t0}^{t1} int u m dx dt` for density field `i`.
pub fn foraging_success(
    traj: &Trajectory,
    i: usize,
    resource: &dyn Fn(f64) -> Result<Field>,
    t0: f64,
    t1: f64,
) -> Result<f64> {
    check_window(traj, t0, t1)?;
    let dx = traj.grid.dx();
    time_integral(traj, t0, t1, |t, k| {
        let u = snapshot_field(traj, i, t, k);
        let m = resource(t)?;
        Ok(dx
            * u.values()
                .iter()
                .zip(m.values())
                .map(|(a, b)| a * b)
                .sum::<f64>())
    })
}

/// `(1/T) int_{t0}^{t0+T} (1/L) int u / m dx dt` over one period.
pub fn modified_foraging_success(
    traj: &Trajectory,
    i: usize,
    resource: &dyn Fn(f64) -> Result<Field>,
    t0: f64,
    period: f64,
) -> Result<f64> {
    let t1 = t0 + period;
    check_window(traj, t0, t1)?;
    let grid = traj.grid;
    let integral = time_integral(traj, t0, t1, |t, k| {
        let u = snapshot_field(traj, i, t, k);
        let m = resource(t)?;
        let lowest = m.min();
        if !(lowest >= RESOURCE_FLOOR) {
            return Err(Error::MeasureUndefined(format!(
                "resource density drops to {lowest:e} at t = {t}; the modified measure needs m > 0"
            )));
        }
        Ok(total_mass(&u.zip_map(&m, |a, b| a / b)) / grid.length())
    })?;
    Ok(integral / period)
}

/// Quadrature of `int int f dx dt`, with `f` the reaction term of one
/// density evaluated on the full state at a snapshot.
pub fn net_growth(
    traj: &Trajectory,
    reaction: &dyn Fn(f64, &[Field]) -> Result<Field>,
    t0: f64,
    t1: f64,
) -> Result<f64> {
    check_window(traj, t0, t1)?;
    let nf = traj.field_names.len();
    time_integral(traj, t0, t1, |t, k| {
        let state: Vec<Field> = (0..nf).map(|j| snapshot_field(traj, j, t, k)).collect();
        Ok(total_mass(&reaction(t, &state)?))
    })
}

/// Mass bookkeeping of field `i` over the steps ending in `(t0, t1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassBalance {
    pub mass_change: f64,
    /// Mass produced by sources, as integrated by the stepper.
    pub reaction: f64,
    pub outflow: f64,
}

impl MassBalance {
    /// `mass_change - (reaction - outflow)`, zero up to round-off.
    pub fn residual(&self) -> f64 {
        self.mass_change - (self.reaction - self.outflow)
    }
}

pub fn mass_balance(traj: &Trajectory, i: usize, t0: f64, t1: f64) -> Result<MassBalance> {
    check_window(traj, t0, t1)?;
    let slack = 1e-12 * t1.abs().max(1.0);
    let mut start = None;
    let mut end = None;
    let mut reaction = 0.0;
    let mut outflow = 0.0;
    let mut prev_mass = traj.initial_mass[i];
    for s in &traj.steps {
        let begin = s.t - s.dt;
        if begin >= t0 - slack && s.t <= t1 + slack {
            start.get_or_insert(prev_mass);
            reaction += s.reaction[i];
            outflow += s.outflow[i];
            end = Some(s.mass[i]);
        }
        prev_mass = s.mass[i];
    }
    let (Some(a), Some(b)) = (start, end) else {
        return Err(Error::Window {
            start: t0,
            end: t1,
            first: traj.snapshots[0].t,
            last: traj.last().t,
        });
    };
    Ok(MassBalance {
        mass_change: b - a,
        reaction,
        outflow,
    })
}

/// Window start used when none is configured and no attractor was detected.
pub fn default_window_start(t_end: f64) -> f64 {
    0.5 * t_end
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum SweepValue {
    Num(f64),
    Text(String),
}

impl fmt::Display for SweepValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepValue::Num(v) => write!(f, "{v:?}"),
            SweepValue::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepAxis {
    /// Config key path, e.g. `kernel.radius`.
    pub key: String,
    pub values: Vec<SweepValue>,
}

/// Cartesian product of the axes, last axis varying fastest.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SweepPlan {
    pub axes: Vec<SweepAxis>,
}

impl SweepPlan {
    pub fn len(&self) -> usize {
        if self.axes.is_empty() {
            return 1;
        }
        self.axes.iter().map(|a| a.values.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn coords(&self, mut index: usize) -> Vec<usize> {
        let mut c = vec![0; self.axes.len()];
        for (a, axis) in self.axes.iter().enumerate().rev() {
            let n = axis.values.len();
            c[a] = index % n;
            index /= n;
        }
        c
    }

    pub fn point(&self, index: usize) -> Vec<(String, SweepValue)> {
        self.coords(index)
            .into_iter()
            .zip(&self.axes)
            .map(|(j, axis)| (axis.key.clone(), axis.values[j].clone()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellOutcome {
    pub value: f64,
    pub attractor: Attractor,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub params: Vec<(String, SweepValue)>,
    pub outcome: std::result::Result<CellOutcome, String>,
    /// Axes along which this cell is an interior maximum of its 1-D slice.
    pub interior_max: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub keys: Vec<String>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn values(&self) -> Vec<Option<f64>> {
        self.rows
            .iter()
            .map(|r| r.outcome.as_ref().ok().map(|o| o.value))
            .collect()
    }

    pub fn has_interior_max(&self) -> bool {
        self.rows.iter().any(|r| !r.interior_max.is_empty())
    }
}

/// Runs `cell` on every point of the plan in parallel. Failures are recorded
/// per cell; rows come back in plan order.
pub fn sweep<F>(plan: &SweepPlan, cell: F) -> SweepTable
where
    F: Fn(&[(String, SweepValue)]) -> Result<CellOutcome> + Sync,
{
    let mut rows: Vec<SweepRow> = (0..plan.len())
        .into_par_iter()
        .map(|index| {
            let params = plan.point(index);
            let outcome = cell(&params).map_err(|e| e.to_string());
            SweepRow {
                index,
                params,
                outcome,
                interior_max: Vec::new(),
            }
        })
        .collect();
    flag_interior_maxima(plan, &mut rows);
    SweepTable {
        keys: plan.axes.iter().map(|a| a.key.clone()).collect(),
        rows,
    }
}

/// Marks cells that are the strict maximum of their slice along an axis
/// without sitting at either end of it.
fn flag_interior_maxima(plan: &SweepPlan, rows: &mut [SweepRow]) {
    let values: Vec<Option<f64>> = rows
        .iter()
        .map(|r| r.outcome.as_ref().ok().map(|o| o.value))
        .collect();
    for (a, axis) in plan.axes.iter().enumerate() {
        let n = axis.values.len();
        if n < 3 {
            continue;
        }
        let stride: usize = plan.axes[a + 1..].iter().map(|x| x.values.len()).product();
        for start in 0..rows.len() {
            if plan.coords(start)[a] != 0 {
                continue;
            }
            let slice: Vec<usize> = (0..n).map(|j| start + j * stride).collect();
            let vals: Option<Vec<f64>> = slice.iter().map(|&r| values[r]).collect();
            let Some(vals) = vals else { continue };
            let (best, &top) = vals
                .iter()
                .enumerate()
                .max_by(|x, y| x.1.total_cmp(y.1))
                .expect("nonempty slice");
            let strict = vals.iter().enumerate().all(|(j, v)| j == best || *v < top);
            if strict && best > 0 && best < n - 1 {
                rows[slice[best]].interior_max.push(axis.key.clone());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{BoundaryCondition, Grid};
    use crate::models::FieldRole;
    use crate::stepper::Snapshot;

    fn synthetic(g: Grid, times: &[f64], u: impl Fn(f64) -> Field) -> Trajectory {
        Trajectory {
            grid: g,
            field_names: vec!["u".into()],
            roles: vec![FieldRole::Density],
            initial_mass: vec![total_mass(&u(times[0]))],
            snapshots: times
                .iter()
                .map(|&t| Snapshot {
                    t,
                    fields: vec![u(t)],
                })
                .collect(),
            steps: Vec::new(),
            derived_construction: false,
        }
    }

    #[test]
    fn constant_integrands() {
        let g = Grid::new(2.0, 16, BoundaryCondition::ZeroFlux).unwrap();
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.5).collect();
        let traj = synthetic(g, &times, |_| Field::constant(g, 0.5));
        let m = |_t: f64| Ok(Field::constant(g, 3.0));
        let fs = foraging_success(&traj, 0, &m, 1.25, 4.0).unwrap();
        assert!((fs - 3.0 * 2.75).abs() < 1e-12);
        let zero = synthetic(g, &times, |_| g.zeros());
        assert_eq!(foraging_success(&zero, 0, &m, 0.0, 5.0).unwrap(), 0.0);
        assert!(matches!(
            foraging_success(&traj, 0, &m, 1.0, 6.0),
            Err(Error::Window { .. })
        ));
    }

    #[test]
    fn modified_measure_examples() {
        let g = Grid::new(1.0, 8, BoundaryCondition::Periodic).unwrap();
        let m = Field::from_fn(g, |x| 1.0 + x);
        let times: Vec<f64> = (0..=4).map(|k| k as f64).collect();
        let same = synthetic(g, &times, |_| m.clone());
        let res = |_t: f64| Ok(m.clone());
        assert!((modified_foraging_success(&same, 0, &res, 0.0, 4.0).unwrap() - 1.0).abs() < 1e-14);
        let double = synthetic(g, &times, |_| m.scale(2.0));
        assert!(
            (modified_foraging_success(&double, 0, &res, 0.0, 4.0).unwrap() - 2.0).abs() < 1e-14
        );
        let hole = |_t: f64| Ok(m.map(|v| (v - 1.2).max(0.0)));
        assert!(matches!(
            modified_foraging_success(&same, 0, &hole, 0.0, 4.0),
            Err(Error::MeasureUndefined(_))
        ));
    }

    #[test]
    fn net_growth_of_half_capacity() {
        let g = Grid::new(1.0, 8, BoundaryCondition::ZeroFlux).unwrap();
        let traj = synthetic(g, &[0.0, 0.5, 1.0], |_| Field::constant(g, 0.5));
        let f = |_t: f64, s: &[Field]| Ok(s[0].map(|u| u * (1.0 - u)));
        assert!((net_growth(&traj, &f, 0.0, 1.0).unwrap() - 0.25).abs() < 1e-15);
        let at_capacity = synthetic(g, &[0.0, 1.0], |_| Field::constant(g, 1.0));
        assert_eq!(net_growth(&at_capacity, &f, 0.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn sweep_order_and_maxima() {
        let plan = SweepPlan {
            axes: vec![
                SweepAxis {
                    key: "a".into(),
                    values: vec![SweepValue::Num(0.0), SweepValue::Num(1.0)],
                },
                SweepAxis {
                    key: "b".into(),
                    values: (0..5).map(|k| SweepValue::Num(k as f64)).collect(),
                },
            ],
        };
        let table = sweep(&plan, |p| {
            let SweepValue::Num(a) = p[0].1 else {
                unreachable!()
            };
            let SweepValue::Num(b) = p[1].1 else {
                unreachable!()
            };
            if a == 1.0 && b == 4.0 {
                return Err(Error::Unsupported("boom".into()));
            }
            Ok(CellOutcome {
                value: if a == 0.0 { -(b - 2.0).powi(2) } else { b },
                attractor: Attractor::Steady,
            })
        });
        assert_eq!(table.rows.len(), 10);
        assert!(table.rows.iter().enumerate().all(|(k, r)| r.index == k));
        assert_eq!(table.rows[2].interior_max, vec!["b".to_string()]);
        assert!(table.rows[9].outcome.is_err());
        assert_eq!(
            table
                .rows
                .iter()
                .filter(|r| !r.interior_max.is_empty())
                .count(),
            1
        );
    }
}
