//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits nonzero when any of them fails.
//!
//! Run with `cargo test -p cogmap --test acceptance`.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use cogmap::cli::{evaluate_measure, execute, run_oracle, run_simulation, run_sweep};
use cogmap::config::{parse_config, Command, RunPlan};
use cogmap::grid::{BoundaryCondition, Field, Grid};
use cogmap::kernels::{
    kernel_density, kernel_weights, perceive, BoundaryMode, KernelShape, KernelSpec,
};
use cogmap::memory::TemporalKernelSpec;
use cogmap::models::{
    conflict_map_rhs, conflict_steady_map, consumer_resource_coexistence, consumer_resource_rhs,
    lotka_volterra_coexistence, lotka_volterra_competition, marks_rhs, marks_steady_state,
    short_long_rhs, short_long_steady_state, ConflictParams, ConflictVariant,
    ConsumerResourceRates, Family, ModelSpec,
};
use cogmap::stability::{
    delay_threshold, delay_threshold_closed_form, dispersion_aggregation, logistic_eigenvalue,
    unstable_set,
};
use cogmap::stepper::{
    detect_attractor, run, steady_state_local_limit, AdvectionScheme, Attractor, StepConfig,
    TimeStep,
};
use cogmap::Result;

// Tolerances, one per criterion.
const MASS_DRIFT_TOL: f64 = 1e-8;
const BOLTZMANN_TOL: f64 = 1e-3;
const KERNEL_MASS_TOL: f64 = 1e-10;
const DELTA_SLOPE: (f64, f64) = (1.8, 2.2);
const DISPERSION_REL_TOL: f64 = 0.05;
const THRESHOLD_REL_TOL: f64 = 1e-6;
const EQUIVALENCE_TOL: f64 = 1e-3;
const ORACLE_REL_TOL: f64 = 0.02;
const ORACLE_L1_TOL: f64 = 1e-2;
const EIGEN_ULPS: f64 = 4.0;
const STEADY_RHS_TOL: f64 = 1e-12;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

type Criterion = fn() -> Result<Outcome>;

fn main() {
    let criteria: [(&str, f64, Criterion); 12] = [
        ("conservation", 10.0 * FAMILIES.len() as f64, conservation),
        ("boltzmann steady state", 30.0, boltzmann),
        ("kernel axioms", 5.0, kernel_axioms),
        ("dispersion cross-validation", 60.0, dispersion_cross_check),
        (
            "delay threshold independent of tau",
            10.0,
            delay_threshold_invariance,
        ),
        (
            "conflict zones ill-posed as R -> 0",
            30.0,
            conflict_ill_posedness,
        ),
        (
            "distributed delay equivalence",
            120.0,
            distributed_equivalence,
        ),
        ("master equation oracle", 60.0, oracle),
        ("logistic eigenvalue", 1.0, logistic_example),
        ("foraging success trends", 300.0, foraging_trends),
        ("steady-state algebra", 1.0, steady_state_algebra),
        ("determinism", 30.0, determinism),
    ];
    let mut failed = 0;
    for (n, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check().unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
        let secs = start.elapsed().as_secs_f64();
        let in_budget = secs <= *budget;
        let pass = outcome.pass && in_budget;
        if !pass {
            failed += 1;
        }
        let budget_note = if in_budget {
            String::new()
        } else {
            format!(", over the {budget} s budget")
        };
        println!(
            "{} [{:>2}] {name}: {} ({secs:.2} s{budget_note})",
            if pass { "PASS" } else { "FAIL" },
            n + 1,
            outcome.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn plan(command: Command, toml: &str, overrides: &[&str]) -> Result<RunPlan> {
    let overrides: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    parse_config(command, toml, &overrides)
}

fn simulate(toml: &str, overrides: &[&str]) -> Result<cogmap::stepper::Trajectory> {
    let (traj, err) = run_simulation(&plan(Command::Simulate, toml, overrides)?)?;
    match err {
        Some(e) => Err(e),
        None => Ok(traj),
    }
}

// ---------------------------------------------------------------------------
// 1. conservation

/// Every family without growth terms, as a `[model]` (and `[delay]`) block.
const FAMILIES: [(&str, &str); 17] = [
    (
        "perception_foraging",
        "[model]\nfamily = \"perception_foraging\"\nd = 0.1\ngamma = 0.5\nlandscape = \"gauss(0.3, 0.1)\"\n\
         [kernel]\nshape = \"gaussian\"\nradius = 0.05",
    ),
    (
        "static_map/den_site",
        "[model]\nfamily = \"static_map\"\nd = 0.1\ngamma = 0.5\nmap = \"den_site\"\nx0 = 0.3",
    ),
    (
        "static_map/given_map",
        "[model]\nfamily = \"static_map\"\nd = 0.1\ngamma = 0.5\nmap = \"given_map\"\nm = \"sin(3*x)\"",
    ),
    (
        "static_map/avg_density",
        "[model]\nfamily = \"static_map\"\nd = 0.1\ngamma = 0.5\nmap = \"avg_density\"\nm = \"1 + x\"",
    ),
    (
        "static_map/per_capita",
        "[model]\nfamily = \"static_map\"\nd = 0.1\ngamma = 0.05\nmap = \"per_capita\"\nm = \"1 + x\"",
    ),
    (
        "aggregation",
        "[model]\nfamily = \"aggregation\"\nd = 0.1\ngamma = 0.5\n[kernel]\nshape = \"top_hat\"\nradius = 0.1",
    ),
    (
        "multi_aggregation",
        "[model]\nfamily = \"multi_aggregation\"\nd = [0.1, 0.1]\ngamma = [[0.5, -0.2], [0.3, 0.4]]\n\
         initial = [\"1\", \"1 + 0.2*x\"]\n[kernel]\nshape = \"exponential\"\nradius = 0.05",
    ),
    (
        "marks",
        "[model]\nfamily = \"marks\"\nd = [0.1, 0.1]\ngamma = [0.5, 0.5]\nalpha = [[1.0, 0.0], [0.0, 1.0]]\n\
         mu = 1.0\ninitial = [\"1\", \"1 + 0.2*x\"]",
    ),
    (
        "conflict_zones/magnitude",
        "[model]\nfamily = \"conflict_zones\"\nd = [0.1, 0.1]\ngamma = [0.5, 0.5]\nrho = [[0.0, 1.0], [1.0, 0.0]]\n\
         mu = 1.0\nbeta = 0.5\nepsilon = [0.01, 0.01]\ninitial = [\"1\", \"1 + 0.2*x\"]",
    ),
    (
        "conflict_zones/probability",
        "[model]\nfamily = \"conflict_zones\"\nvariant = \"probability\"\nd = [0.1, 0.1]\ngamma = [0.5, 0.5]\n\
         rho = [[0.0, 1.0], [1.0, 0.0]]\nmu = 1.0\nnonlocal_conflict = true\ninitial = [\"1\", \"1 + 0.2*x\"]\n\
         [kernel]\nshape = \"gaussian\"\nradius = 0.05",
    ),
    (
        "discrete_delay/scalar",
        "[model]\nfamily = \"discrete_delay\"\nd1 = 0.1\ngamma = 0.5\n[delay]\nkind = \"discrete\"\ntau = 0.05",
    ),
    (
        "discrete_delay/consumer_resource",
        "[model]\nfamily = \"discrete_delay\"\nmodel = \"consumer_resource\"\nd_u = 0.1\nd_v = 0.05\nchi = 0.5\n\
         initial = [\"1\", \"1 + 0.2*x\"]\n[delay]\nkind = \"discrete\"\ntau = 0.05",
    ),
    (
        "discrete_delay/competition",
        "[model]\nfamily = \"discrete_delay\"\nmodel = \"competition\"\nd_u = 0.1\nd_v = 0.1\n\
         cross = [[0.02, 0.05], [0.05, 0.02]]\ninitial = [\"1\", \"1 + 0.2*x\"]\n[delay]\nkind = \"discrete\"\ntau = 0.05",
    ),
    (
        "distributed/weak",
        "[model]\nfamily = \"distributed\"\nd1 = 0.1\ngamma = 0.5\n[delay]\nkind = \"weak\"\ntau = 0.05\nd3 = 0.01",
    ),
    (
        "distributed/strong",
        "[model]\nfamily = \"distributed\"\nd1 = 0.1\ngamma = 0.5\n[delay]\nkind = \"strong\"\ntau = 0.05",
    ),
    (
        "short_long",
        "[model]\nfamily = \"short_long\"\nd = 0.1\nalpha_s = 1.0\nalpha_l = 0.2\nbeta_s = 1.0\nbeta_l = 0.1\n\
         c1 = 0.5\nc2 = 0.2\nsource_s = \"cos(3*x)\"",
    ),
    (
        "starvation_den_site",
        "[model]\nfamily = \"starvation_den_site\"\nresponse = \"smooth\"\nkappa = 4.0\ngamma = 0.3\n\
         gamma_plus = 0.5\nx0 = 0.4\nd_plus = 0.2\nd_minus = 0.05\nresource = \"1 + 0.5*cos(2*pi*x)\"",
    ),
];

fn conservation() -> Result<Outcome> {
    let mut worst = (0.0_f64, String::new());
    let mut slowest = (0.0_f64, String::new());
    let mut failures = Vec::new();
    for (name, model) in FAMILIES {
        for bc in ["zero_flux", "periodic"] {
            let toml = format!(
                "{model}\n[grid]\nlength = 1.0\nn = 256\nbc = \"{bc}\"\n\
                 [stepping]\ndt = 1e-5\nt_end = 0.1\nsnapshot_every = 0.1\nperturbation = 0.1\nseed = 7\n"
            );
            let start = Instant::now();
            let traj = match simulate(&toml, &[]) {
                Ok(t) => t,
                Err(e) => {
                    failures.push(format!("{name}/{bc}: {e}"));
                    continue;
                }
            };
            let secs = start.elapsed().as_secs_f64();
            let drift = traj.mass_drift();
            if traj.steps.len() < 10_000 {
                failures.push(format!("{name}/{bc}: only {} steps", traj.steps.len()));
            }
            if drift.is_nan() || drift > MASS_DRIFT_TOL {
                failures.push(format!("{name}/{bc}: drift {drift:.2e}"));
            }
            if secs > 10.0 {
                failures.push(format!("{name}/{bc}: {secs:.1} s"));
            }
            if drift > worst.0 {
                worst = (drift, format!("{name}/{bc}"));
            }
            if secs > slowest.0 {
                slowest = (secs, format!("{name}/{bc}"));
            }
        }
    }
    let detail = format!(
        "{} runs, worst drift {:.2e} ({}), slowest {:.2} s ({}){}",
        2 * FAMILIES.len(),
        worst.0,
        worst.1,
        slowest.0,
        slowest.1,
        if failures.is_empty() {
            String::new()
        } else {
            format!("; failures: {}", failures.join(", "))
        }
    );
    Ok(Outcome::new(failures.is_empty(), detail))
}

// ---------------------------------------------------------------------------
// 2. Boltzmann steady state

fn boltzmann() -> Result<Outcome> {
    let (d, gamma) = (1.0, 2.0);
    let toml = format!(
        "[model]\nfamily = \"perception_foraging\"\nd = {d:?}\ngamma = {gamma:?}\nlandscape = \"exp(-(x - 0.5)^2 / 0.02)\"\n\
         [grid]\nlength = 1.0\nn = 512\n[stepping]\nt_end = 3.0\nsnapshot_every = 0.05\nscheme = \"central\"\n"
    );
    let traj = simulate(&toml, &[])?;
    let attractor = detect_attractor(&traj, 0.25, 1e-6);
    let m = Field::from_fn(traj.grid, |x| (-(x - 0.5).powi(2) / 0.02).exp());
    let expected = steady_state_local_limit(&m, gamma, d);
    let err = traj.last().fields[0].max_abs_diff(&expected);
    Ok(Outcome::new(
        attractor == Attractor::Steady && err <= BOLTZMANN_TOL,
        format!("attractor {attractor:?}, L-inf error {err:.2e} (tol {BOLTZMANN_TOL:e})"),
    ))
}

// ---------------------------------------------------------------------------
// 3. kernel axioms

/// `max |K_R * f - f|` for a slow cosine on a long periodic habitat.
fn smoothing_error(shape: KernelShape, radius: f64, grid: &Grid) -> Result<f64> {
    let spec = KernelSpec::new(shape, radius, BoundaryMode::CutOff)?;
    let k = 2.0 * PI / grid.length();
    let f = Field::from_fn(*grid, |x| (k * x).cos());
    Ok(perceive(&f, &spec, grid)?.max_abs_diff(&f))
}

fn kernel_axioms() -> Result<Outcome> {
    let grid = Grid::new(100.0, 20_000, BoundaryCondition::Periodic)?;
    let mut failures = Vec::new();
    let mut worst_mass: f64 = 0.0;
    let mut slopes = Vec::new();
    for shape in [
        KernelShape::TopHat,
        KernelShape::Gaussian,
        KernelShape::Exponential,
    ] {
        for radius in [0.05, 0.2, 1.0] {
            let tag = format!("{}(R={radius})", shape.name());
            let spec = KernelSpec::new(shape, radius, BoundaryMode::CutOff)?;
            let stencil = kernel_weights(&spec, &grid)?;
            let w = &stencil.weights;
            if (0..w.len()).any(|i| w[i] != w[w.len() - 1 - i]) {
                failures.push(format!("{tag}: stencil not symmetric"));
            }
            let xs: Vec<f64> = (0..=400).map(|i| i as f64 * 6.0 * radius / 400.0).collect();
            for &x in &xs {
                if kernel_density(&spec, x)? != kernel_density(&spec, -x)? {
                    failures.push(format!("{tag}: density not even at {x}"));
                    break;
                }
            }
            let mass_err = (stencil.sum() - 1.0).abs();
            worst_mass = worst_mass.max(mass_err);
            if mass_err > KERNEL_MASS_TOL {
                failures.push(format!("{tag}: mass off by {mass_err:.1e}"));
            }
            let dens = xs
                .iter()
                .map(|&x| kernel_density(&spec, x))
                .collect::<Result<Vec<_>>>()?;
            if dens.windows(2).any(|p| p[1] > p[0]) {
                failures.push(format!("{tag}: density increases with distance"));
            }
            let e_full = smoothing_error(shape, radius, &grid)?;
            let e_half = smoothing_error(shape, radius / 2.0, &grid)?;
            let slope = (e_full / e_half).log2();
            slopes.push(slope);
            if !(DELTA_SLOPE.0..=DELTA_SLOPE.1).contains(&slope) {
                failures.push(format!("{tag}: delta-limit slope {slope:.3}"));
            }
        }
    }
    let (lo, hi) = slopes
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &s| {
            (a.min(s), b.max(s))
        });
    Ok(Outcome::new(
        failures.is_empty(),
        format!(
            "9 kernels, worst mass error {worst_mass:.1e}, delta-limit slopes in [{lo:.4}, {hi:.4}]{}",
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join(", ")) }
        ),
    ))
}

// ---------------------------------------------------------------------------
// 4. dispersion cross-validation

/// Cosine amplitude of `u - u*` at wavenumber `k`.
fn cosine_amplitude(u: &Field, u_star: f64, k: f64) -> f64 {
    let g = u.grid();
    let n = g.n_cells() as f64;
    (0..g.n_cells())
        .map(|i| (u.values()[i] - u_star) * (k * g.center(i)).cos())
        .sum::<f64>()
        * 2.0
        / n
}

fn dispersion_cross_check() -> Result<Outcome> {
    let (d, gamma, u_star, length) = (1.0, 2.15, 1.0, 10.0);
    let kernel = KernelSpec::new(KernelShape::Gaussian, 0.5, BoundaryMode::CutOff)?;
    let grid = Grid::new(length, 512, BoundaryCondition::Periodic)?;
    let modes = [1usize, 4, 8];
    let eps = 1e-6;
    let ks: Vec<f64> = modes
        .iter()
        .map(|&j| 2.0 * PI * j as f64 / length)
        .collect();
    let u0 = Field::from_fn(grid, |x| {
        u_star + ks.iter().map(|k| eps * (k * x).cos()).sum::<f64>()
    });
    let model = ModelSpec {
        family: Family::Aggregation {
            d,
            gamma,
            logistic: None,
        },
        kernel,
        temporal: TemporalKernelSpec::None,
    };
    let t_end = 0.2;
    let cfg = StepConfig {
        dt: TimeStep::Fixed { dt: 1e-4 },
        t_end,
        snapshot_every: t_end,
        advection: AdvectionScheme::Central,
        ..StepConfig::default()
    };
    let traj = run(&model, &grid, vec![u0.clone()], &cfg)?;
    let u1 = &traj.last().fields[0];
    let mut pass = true;
    let mut parts = Vec::new();
    let mut rates = Vec::new();
    for (&j, &k) in modes.iter().zip(&ks) {
        let predicted = dispersion_aggregation(d, gamma, u_star, &kernel, k);
        let measured = (cosine_amplitude(u1, u_star, k) / cosine_amplitude(&u0, u_star, k)).ln()
            / traj.last().t;
        let rel = (measured - predicted).abs() / predicted.abs();
        pass &= rel <= DISPERSION_REL_TOL;
        rates.push(predicted);
        parts.push(format!(
            "j={j}: {measured:.4} vs {predicted:.4} ({:.2}%)",
            100.0 * rel
        ));
    }
    // unstable, near-neutral and strongly damped, in that order
    let spans = rates[0] > 0.0
        && rates[1].abs() < 0.5 * rates[0].abs()
        && rates[2] < -10.0 * rates[0].abs();
    Ok(Outcome::new(
        pass && spans,
        format!(
            "{}{}",
            parts.join(", "),
            if spans {
                ""
            } else {
                "; modes do not span stable/neutral/unstable"
            }
        ),
    ))
}

// ---------------------------------------------------------------------------
// 5. delay threshold

fn delay_threshold_invariance() -> Result<Outcome> {
    let kernel = KernelSpec::new(KernelShape::Gaussian, 0.2, BoundaryMode::CutOff)?;
    let mut pass = true;
    let mut parts = Vec::new();
    for (d1, u_star, fprime, k) in [(1.0, 1.0, 0.0, PI), (0.5, 1.0, -1.0, 2.0 * PI)] {
        let closed = delay_threshold_closed_form(d1, u_star, fprime, k, &kernel)?;
        let mut spread: f64 = 0.0;
        for tau in [0.1, 1.0, 10.0] {
            let g = delay_threshold(d1, u_star, fprime, tau, k, &kernel)?;
            spread = spread.max((g - closed).abs() / closed);
        }
        pass &= spread <= THRESHOLD_REL_TOL;
        parts.push(format!(
            "gamma* = {closed:.6} (max rel spread {spread:.1e})"
        ));
    }
    Ok(Outcome::new(pass, parts.join(", ")))
}

// ---------------------------------------------------------------------------
// 6. conflict zones

fn conflict_ill_posedness() -> Result<Outcome> {
    let j_max = 2000;
    let mut maxima = Vec::new();
    let mut radius = 0.1;
    for _ in 0..5 {
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
            kernel: KernelSpec::new(KernelShape::Gaussian, radius, BoundaryMode::CutOff)?,
            temporal: TemporalKernelSpec::None,
        };
        let set = unstable_set(&model, &[1.0, 1.0], 1.0, BoundaryCondition::ZeroFlux, j_max)?;
        maxima.push((radius, set.iter().copied().max()));
        radius /= 2.0;
    }
    let idx: Vec<usize> = maxima.iter().map(|(_, m)| m.unwrap_or(0)).collect();
    let truncated = idx.iter().any(|&j| j >= j_max);
    let nondecreasing = idx.windows(2).all(|p| p[1] >= p[0]);
    let increases = idx.windows(2).filter(|p| p[1] > p[0]).count();
    let listing: Vec<String> = maxima
        .iter()
        .map(|(r, m)| format!("R={r}: {}", m.map_or("none".into(), |j| j.to_string())))
        .collect();
    Ok(Outcome::new(
        !truncated && nondecreasing && increases >= 2 && maxima.iter().all(|(_, m)| m.is_some()),
        format!(
            "max unstable index {}, {increases} strict increases",
            listing.join(", ")
        ),
    ))
}

// ---------------------------------------------------------------------------
// 7. distributed delay

fn distributed_equivalence() -> Result<Outcome> {
    let toml = "[model]\nfamily = \"distributed\"\nd1 = 0.1\ngamma = 0.08\ninitial = [\"1 + 0.3*cos(pi*x)\"]\n\
                [delay]\nkind = \"weak\"\ntau = 0.5\nd3 = 0.1\n\
                [grid]\nlength = 1.0\nn = 128\n\
                [stepping]\nt_end = 5.0\nsnapshot_every = 0.05\ndt_max = 0.002\n";
    let augmented = simulate(toml, &["delay.path=augmented"])?;
    let direct = simulate(toml, &["delay.path=direct"])?;
    let ua = augmented.field_index("u").unwrap_or(0);
    let ud = direct.field_index("u").unwrap_or(0);
    if augmented.snapshots.len() != direct.snapshots.len() {
        return Ok(Outcome::new(
            false,
            "snapshot times differ between the two paths",
        ));
    }
    let mut err_u: f64 = 0.0;
    for (a, b) in augmented.snapshots.iter().zip(&direct.snapshots) {
        err_u = err_u.max(a.fields[ua].max_abs_diff(&b.fields[ud]));
    }
    let mut detail = format!("density L-inf {err_u:.2e}");
    let mut err = err_u;
    if let (Some(va), Some(vd)) = (augmented.field_index("v"), direct.field_index("v")) {
        let mut err_v: f64 = 0.0;
        for (a, b) in augmented.snapshots.iter().zip(&direct.snapshots) {
            err_v = err_v.max(a.fields[va].max_abs_diff(&b.fields[vd]));
        }
        detail.push_str(&format!(", memory L-inf {err_v:.2e}"));
        err = err.max(err_v);
    }
    Ok(Outcome::new(
        err <= EQUIVALENCE_TOL,
        format!("{detail} over t in [0, 5] (tol {EQUIVALENCE_TOL:e})"),
    ))
}

// ---------------------------------------------------------------------------
// 8. oracle

fn oracle() -> Result<Outcome> {
    let base = "[oracle]\nlength = 3.0\nn = 3000\nsigma = 0.01\ntau = 1e-3\nt_final = 1.0\n";
    let linear = run_oracle(&plan(
        Command::Oracle,
        &format!("{base}beta = [0.3]\ncovariates = [\"x\"]\n"),
        &[],
    )?)?;
    let quadratic = run_oracle(&plan(
        Command::Oracle,
        &format!("{base}beta = [0.3]\ncovariates = [\"(x - 1.5)^2 / 2\"]\n"),
        &[],
    )?)?;
    let free = run_oracle(&plan(
        Command::Oracle,
        &format!("{base}beta = [0.0]\ncovariates = [\"x\"]\n"),
        &[],
    )?)?;
    let pass = linear.max_rel_dev <= ORACLE_REL_TOL
        && quadratic.max_rel_dev <= ORACLE_REL_TOL
        && free.l1_distance <= ORACLE_L1_TOL;
    Ok(Outcome::new(
        pass,
        format!(
            "drift deviation linear {:.2e}, quadratic {:.2e}; beta=0 L1 {:.2e}; d_hat {:.4e}",
            linear.max_rel_dev, quadratic.max_rel_dev, free.l1_distance, free.d_hat
        ),
    ))
}

// ---------------------------------------------------------------------------
// 9. logistic eigenvalue

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= EIGEN_ULPS * f64::EPSILON * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn logistic_example() -> Result<Outcome> {
    let mut failures = Vec::new();
    let cases = [
        (1.0, 1.0, PI),
        (0.3, 2.0, 5.0),
        (2.0, 0.5, 1.0),
        (1e-2, 10.0, 0.25),
    ];
    for &(d, r, l) in &cases {
        let e = logistic_eigenvalue(d, r, l, BoundaryCondition::HomogeneousDirichlet)?;
        let mu = -r / d + PI * PI / (l * l);
        let expect = [mu, r / (d * d), -1.0 / d, -2.0 * PI * PI / (l * l * l)];
        let got = [e.mu1, e.d_mu1_dd, e.d_mu1_dr, e.d_mu1_dl];
        if !expect.iter().zip(&got).all(|(a, b)| close(*a, *b)) {
            failures.push(format!("dirichlet ({d}, {r}, {l}): {got:?} vs {expect:?}"));
        }
        // finite differences on the eigenvalue itself
        let mu_at = |d: f64, r: f64, l: f64| {
            logistic_eigenvalue(d, r, l, BoundaryCondition::HomogeneousDirichlet).map(|e| e.mu1)
        };
        let h = 1e-6;
        let fd = [
            (mu_at(d * (1.0 + h), r, l)? - mu_at(d * (1.0 - h), r, l)?) / (2.0 * h * d),
            (mu_at(d, r * (1.0 + h), l)? - mu_at(d, r * (1.0 - h), l)?) / (2.0 * h * r),
            (mu_at(d, r, l * (1.0 + h))? - mu_at(d, r, l * (1.0 - h))?) / (2.0 * h * l),
        ];
        for (a, b) in fd.iter().zip(&got[1..]) {
            if (a - b).abs() > 1e-5 * b.abs().max(1.0) {
                failures.push(format!(
                    "dirichlet ({d}, {r}, {l}): finite difference {a} vs {b}"
                ));
            }
        }
        if !(e.d_mu1_dr < 0.0 && e.d_mu1_dl < 0.0) {
            failures.push(format!(
                "dirichlet ({d}, {r}, {l}): growth in r or L is not beneficial"
            ));
        }
        let n = logistic_eigenvalue(d, r, l, BoundaryCondition::HomogeneousNeumann)?;
        if [n.mu1, n.d_mu1_dd, n.d_mu1_dr, n.d_mu1_dl] != [-r, 0.0, -1.0, 0.0] {
            failures.push(format!("neumann ({d}, {r}, {l}): {n:?}"));
        }
    }
    Ok(Outcome::new(
        failures.is_empty(),
        if failures.is_empty() {
            format!(
                "{} parameter sets match the closed forms within {EIGEN_ULPS} ulp",
                cases.len()
            )
        } else {
            failures.join("; ")
        },
    ))
}

// ---------------------------------------------------------------------------
// 10. foraging success trends

fn foraging_trends() -> Result<Outcome> {
    let toml = "[model]\nfamily = \"perception_foraging\"\nd = 0.05\ngamma = 0.0\n\
                landscape = \"1 + 0.5*cos(2*pi*x) + 0.3*cos(6*pi*x)\"\n\
                [grid]\nlength = 1.0\nn = 200\n[stepping]\nt_end = 10.0\nsnapshot_every = 0.1\n\
                [measure]\nkind = \"foraging_success\"\nt_start = 5.0\n";
    let gammas = [0.0, 0.005, 0.01, 0.02, 0.04, 0.08];
    let mut values = Vec::new();
    for g in gammas {
        let p = plan(Command::Measure, toml, &[&format!("model.gamma={g}")])?;
        let (traj, err) = run_simulation(&p)?;
        if let Some(e) = err {
            return Err(e);
        }
        values.push(evaluate_measure(&p, &traj)?.report.value);
    }
    let monotone = values.windows(2).all(|w| w[1] >= w[0]);

    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/two_patch_sweep.toml");
    let text = std::fs::read_to_string(&path)?;
    let table = run_sweep(&plan(Command::Sweep, &text, &[])?)?;
    let sweep_values = table.values();
    let interior = table.has_interior_max();
    let peak = table
        .rows
        .iter()
        .find(|r| !r.interior_max.is_empty())
        .map_or("none".to_string(), |r| format!("{:?}", r.params));
    let points = sweep_values.len();
    let fmt: Vec<String> = values.iter().map(|v| format!("{v:.5}")).collect();
    Ok(Outcome::new(
        monotone && interior && points >= 8 && sweep_values.iter().all(|v| v.is_some()),
        format!(
            "(a) FS over gamma {gammas:?}: [{}] {}; (b) {points}-point R sweep, interior maximum at {peak}",
            fmt.join(", "),
            if monotone { "nondecreasing" } else { "NOT monotone" },
        ),
    ))
}

// ---------------------------------------------------------------------------
// 11. steady-state algebra

fn steady_state_algebra() -> Result<Outcome> {
    let grid = Grid::new(1.0, 4, BoundaryCondition::ZeroFlux)?;
    let constant = |c: f64| Field::constant(grid, c);
    let mut worst: f64 = 0.0;
    let mut record = |r: f64| worst = worst.max(r.abs());

    let alpha = vec![vec![1.0, 0.3], vec![0.7, 2.0]];
    let c = [1.3, 0.4];
    let mu = 0.6;
    let p = marks_steady_state(&alpha, &c, mu)?;
    let u: Vec<Field> = c.iter().map(|&v| constant(v)).collect();
    for (i, &pi) in p.iter().enumerate() {
        let rhs = marks_rhs(i, &constant(pi), &u, &alpha, mu);
        rhs.values().iter().for_each(|v| record(*v));
    }

    let rho = vec![vec![0.2, 1.0], vec![0.8, 0.1]];
    for variant in [ConflictVariant::Magnitude, ConflictVariant::Probability] {
        for i in 0..2 {
            let k = conflict_steady_map(i, &c, &rho, mu, 0.5, variant)?;
            let rhs = conflict_map_rhs(i, &constant(k), &u[i], &u, &rho, mu, 0.5, variant);
            rhs.values().iter().for_each(|v| record(*v));
        }
    }

    let rates = ConsumerResourceRates {
        r: 1.0,
        k: 3.0,
        beta: 1.5,
        alpha: 0.8,
        c: 0.6,
        death: 0.4,
    };
    let (us, vs) = consumer_resource_coexistence(&rates)?;
    let cr = consumer_resource_rhs(us, vs, &rates);
    record(cr.f);
    record(cr.g);

    let (ul, vl) = lotka_volterra_coexistence(0.5, 0.3)?;
    let (f, g) = lotka_volterra_competition(ul, vl, 0.5, 0.3, 1.7);
    record(f);
    record(g);

    let a = 0.9;
    let (ms, ml) = short_long_steady_state(a, 1.0, 0.2, 0.7, 0.05)?;
    let (rs, rl) = short_long_rhs(
        &constant(ms),
        &constant(ml),
        &constant(a),
        &constant(a),
        1.0,
        0.2,
        0.7,
        0.05,
    );
    rs.values()
        .iter()
        .chain(rl.values())
        .for_each(|v| record(*v));

    Ok(Outcome::new(
        worst <= STEADY_RHS_TOL,
        format!("marks, conflict (both variants), Holling II, Lotka-Volterra, short/long memory: max |rhs| {worst:.1e}"),
    ))
}

// ---------------------------------------------------------------------------
// 12. determinism

fn csv_bytes(dir: &Path) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "csv"))
        .map(|e| {
            Ok((
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path())?,
            ))
        })
        .collect::<Result<_>>()?;
    files.sort();
    Ok(files)
}

fn determinism() -> Result<Outcome> {
    let plans = [
        (
            Command::Simulate,
            "[model]\nfamily = \"aggregation\"\nd = 0.1\ngamma = 0.8\n[kernel]\nshape = \"gaussian\"\nradius = 0.1\n\
             [grid]\nlength = 1.0\nn = 100\n[stepping]\nt_end = 0.5\nperturbation = 0.05\nseed = 42\n",
        ),
        (
            Command::Measure,
            "[model]\nfamily = \"perception_foraging\"\nd = 0.05\ngamma = 0.2\nlandscape = \"1 + sin(5*x)\"\n\
             [grid]\nlength = 1.0\nn = 80\n[stepping]\nt_end = 1.0\n[measure]\nkind = \"mfs\"\n",
        ),
        (
            Command::Stability,
            "[model]\nfamily = \"aggregation\"\nd = 1.0\ngamma = 8.0\n[kernel]\nshape = \"gaussian\"\nradius = 0.5\n\
             [grid]\nlength = 10.0\nn = 128\nbc = \"periodic\"\n",
        ),
        (
            Command::Sweep,
            "[model]\nfamily = \"aggregation\"\nd = 0.1\ngamma = 0.5\nr = 1.0\n[kernel]\nshape = \"top_hat\"\nradius = 0.1\n\
             [grid]\nlength = 1.0\nn = 60\n[stepping]\nt_end = 0.5\nperturbation = 0.1\nseed = 3\n\
             [measure]\nkind = \"net_growth\"\n[[sweep.axis]]\nkey = \"model.gamma\"\nvalues = [0.1, 0.5, 1.0]\n",
        ),
    ];
    let root = tempfile::tempdir()?;
    let mut compared = 0;
    for (n, (command, toml)) in plans.iter().enumerate() {
        let p = plan(*command, toml, &[])?;
        let mut runs = Vec::new();
        for rep in 0..2 {
            let dir = root.path().join(format!("{n}-{rep}"));
            let code = execute(&p, &dir)?;
            if code != 0 {
                return Ok(Outcome::new(
                    false,
                    format!("{} run exited with {code}", command.name()),
                ));
            }
            runs.push(csv_bytes(&dir)?);
        }
        if runs[0].is_empty() {
            return Ok(Outcome::new(
                false,
                format!("{} wrote no CSV", command.name()),
            ));
        }
        if runs[0] != runs[1] {
            return Ok(Outcome::new(
                false,
                format!("{} outputs differ between runs", command.name()),
            ));
        }
        compared += runs[0].len();
    }
    Ok(Outcome::new(
        true,
        format!("{compared} CSV files byte-identical across repeated runs of 4 plans"),
    ))
}
