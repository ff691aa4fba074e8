//! One-dimensional cell-centred mesh, boundary conditions and field arithmetic.
//!
//! Cells are `[i dx, (i + 1) dx)` with centres `x_i = (i + 0.5) dx`. Gradients
//! live on the `n + 1` faces; face `i` separates cell `i - 1` from cell `i`,
//! face `0` is the left boundary and face `n` the right one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible number of cells.
pub const MIN_CELLS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryCondition {
    /// Total (diffusive plus advective) flux vanishes at both ends.
    ZeroFlux,
    /// `du/dn = 0`; advective flux through the boundary is still allowed.
    HomogeneousNeumann,
    /// Hostile boundary, `u = 0`.
    HomogeneousDirichlet,
    Periodic,
    /// `alpha du/dn + beta u = 0`, coefficients frozen in time.
    Robin {
        alpha: f64,
        beta: f64,
    },
}

impl BoundaryCondition {
    pub fn is_periodic(&self) -> bool {
        matches!(self, BoundaryCondition::Periodic)
    }

    pub fn name(&self) -> &'static str {
        match self {
            BoundaryCondition::ZeroFlux => "zero_flux",
            BoundaryCondition::HomogeneousNeumann => "neumann",
            BoundaryCondition::HomogeneousDirichlet => "dirichlet",
            BoundaryCondition::Periodic => "periodic",
            BoundaryCondition::Robin { .. } => "robin",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    length: f64,
    n_cells: usize,
    dx: f64,
    bc: BoundaryCondition,
}

impl Grid {
    pub fn new(length: f64, n_cells: usize, bc: BoundaryCondition) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::config(
                "grid.length",
                format!("must be positive, got {length}"),
            ));
        }
        if n_cells < MIN_CELLS {
            return Err(Error::config(
                "grid.cells",
                format!("need at least {MIN_CELLS} cells, got {n_cells}"),
            ));
        }
        if let BoundaryCondition::Robin { alpha, beta } = bc {
            if !(alpha > 0.0 && alpha.is_finite() && beta.is_finite()) {
                return Err(Error::config(
                    "grid.robin_alpha",
                    "Robin coefficients need alpha > 0 and finite beta",
                ));
            }
        }
        Ok(Grid {
            length,
            n_cells,
            dx: length / n_cells as f64,
            bc,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    /// Same mesh, different boundary condition.
    pub fn with_bc(&self, bc: BoundaryCondition) -> Self {
        Grid { bc, ..*self }
    }

    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| self.center(i)).collect()
    }

    pub fn face(&self, i: usize) -> f64 {
        i as f64 * self.dx
    }

    pub fn zeros(&self) -> Field {
        Field::constant(*self, 0.0)
    }
}

/// Per-cell samples on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(Error::config(
                "field",
                format!("expected {} values, got {}", grid.n_cells(), values.len()),
            ));
        }
        Ok(Field { grid, values })
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Field {
            grid,
            values: vec![c; grid.n_cells()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.n_cells()).map(|i| f(grid.center(i))).collect();
        Field { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        debug_assert_eq!(self.len(), other.len());
        Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    /// `self + c * other`
    pub fn axpy(&self, c: f64, other: &Field) -> Field {
        self.zip_map(other, |a, b| a + c * b)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Spatial average `total_mass / L`.
    pub fn mean(&self) -> f64 {
        total_mass(self) / self.grid.length()
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Midpoint quadrature of the field over the habitat.
pub fn total_mass(f: &Field) -> f64 {
    f.grid.dx() * f.values.iter().sum::<f64>()
}

/// Gradient of a density-like field on the `n + 1` faces, honouring the
/// grid's boundary condition through ghost cells.
pub fn face_gradient(f: &Field) -> Vec<f64> {
    let grid = f.grid;
    let n = grid.n_cells();
    let dx = grid.dx();
    let v = &f.values;
    let mut g = vec![0.0; n + 1];
    for i in 1..n {
        g[i] = (v[i] - v[i - 1]) / dx;
    }
    match grid.bc() {
        BoundaryCondition::Periodic => {
            let wrap = (v[0] - v[n - 1]) / dx;
            g[0] = wrap;
            g[n] = wrap;
        }
        BoundaryCondition::ZeroFlux | BoundaryCondition::HomogeneousNeumann => {
            g[0] = 0.0;
            g[n] = 0.0;
        }
        BoundaryCondition::HomogeneousDirichlet => {
            // ghost = -f, i.e. linear through the boundary value 0
            g[0] = 2.0 * v[0] / dx;
            g[n] = -2.0 * v[n - 1] / dx;
        }
        BoundaryCondition::Robin { alpha, beta } => {
            g[0] = beta / alpha * v[0];
            g[n] = -beta / alpha * v[n - 1];
        }
    }
    g
}

/// Gradient of a potential on the faces. Interior faces match
/// [`face_gradient`]; on bounded grids the boundary faces use second-order
/// one-sided extrapolation because a potential carries no boundary condition
/// of its own.
pub fn potential_gradient(f: &Field) -> Vec<f64> {
    let grid = f.grid;
    if grid.bc().is_periodic() {
        return face_gradient(f);
    }
    let n = grid.n_cells();
    let dx = grid.dx();
    let v = &f.values;
    let mut g = vec![0.0; n + 1];
    for i in 1..n {
        g[i] = (v[i] - v[i - 1]) / dx;
    }
    g[0] = (-2.0 * v[0] + 3.0 * v[1] - v[2]) / dx;
    g[n] = (2.0 * v[n - 1] - 3.0 * v[n - 2] + v[n - 3]) / dx;
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn build_grid_examples() {
        let g = Grid::new(1.0, 4, BoundaryCondition::Periodic).unwrap();
        assert_eq!(g.dx(), 0.25);
        assert_eq!(g.centers(), vec![0.125, 0.375, 0.625, 0.875]);

        let g = Grid::new(PI, 128, BoundaryCondition::ZeroFlux).unwrap();
        assert_eq!(g.dx(), PI / 128.0);
        assert!((g.dx() * 128.0 - PI).abs() < 1e-15);

        assert!(Grid::new(-1.0, 8, BoundaryCondition::ZeroFlux).is_err());
        assert!(Grid::new(1.0, 3, BoundaryCondition::ZeroFlux).is_err());
        assert!(Grid::new(0.0, 8, BoundaryCondition::ZeroFlux).is_err());
        let robin = BoundaryCondition::Robin {
            alpha: 0.0,
            beta: 1.0,
        };
        assert!(Grid::new(1.0, 8, robin).is_err());
    }

    #[test]
    fn total_mass_examples() {
        let g = Grid::new(2.0, 10, BoundaryCondition::ZeroFlux).unwrap();
        assert!((total_mass(&Field::constant(g, 3.0)) - 6.0).abs() < 1e-14);

        let g = Grid::new(1.0, 4, BoundaryCondition::ZeroFlux).unwrap();
        let f = Field::new(g, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((total_mass(&f) - 2.5).abs() < 1e-15);

        let g = Grid::new(3.0, 97, BoundaryCondition::ZeroFlux).unwrap();
        let raw = Field::from_fn(g, |x| (-(x - 1.2).powi(2)).exp() + 0.1);
        let normalized = raw.scale(1.0 / total_mass(&raw));
        assert!((total_mass(&normalized) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn field_length_is_checked() {
        let g = Grid::new(1.0, 4, BoundaryCondition::ZeroFlux).unwrap();
        assert!(Field::new(g, vec![1.0; 5]).is_err());
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        for bc in [
            BoundaryCondition::Periodic,
            BoundaryCondition::ZeroFlux,
            BoundaryCondition::HomogeneousNeumann,
        ] {
            let g = Grid::new(1.0, 16, bc).unwrap();
            let grad = face_gradient(&Field::constant(g, 2.5));
            assert!(grad.iter().all(|&v| v.abs() < 1e-12));
        }
        let g = Grid::new(1.0, 16, BoundaryCondition::HomogeneousDirichlet).unwrap();
        let grad = face_gradient(&Field::constant(g, 2.5));
        assert!(grad[1..16].iter().all(|&v| v.abs() < 1e-12));
        assert!((grad[0] - 2.0 * 2.5 * 16.0).abs() < 1e-9);
        assert!((grad[16] + 2.0 * 2.5 * 16.0).abs() < 1e-9);
    }

    #[test]
    fn gradient_of_linear_field_is_one_inside() {
        let g = Grid::new(2.0, 20, BoundaryCondition::Periodic).unwrap();
        let grad = face_gradient(&Field::from_fn(g, |x| x));
        for v in &grad[1..20] {
            assert!((v - 1.0).abs() < 1e-12);
        }
        // the wrap faces see the jump from x = L - dx/2 back to dx/2
        let expected_wrap = (g.center(0) - g.center(19)) / g.dx();
        assert!((grad[0] - expected_wrap).abs() < 1e-12);
        assert_eq!(grad[0], grad[20]);
    }

    #[test]
    fn robin_faces() {
        let bc = BoundaryCondition::Robin {
            alpha: 2.0,
            beta: 1.0,
        };
        let g = Grid::new(1.0, 8, bc).unwrap();
        let grad = face_gradient(&Field::constant(g, 4.0));
        assert!((grad[0] - 2.0).abs() < 1e-14);
        assert!((grad[8] + 2.0).abs() < 1e-14);
    }

    #[test]
    fn potential_gradient_is_exact_for_quadratics_at_the_boundary() {
        let g = Grid::new(1.0, 10, BoundaryCondition::ZeroFlux).unwrap();
        let f = Field::from_fn(g, |x| 3.0 * x * x - x);
        let grad = potential_gradient(&f);
        assert!((grad[0] - (-1.0)).abs() < 1e-10);
        assert!((grad[10] - 5.0).abs() < 1e-10);
    }

    #[test]
    fn gradient_is_second_order_on_periodic_sine() {
        let l = 2.0;
        let k = 2.0 * PI / l;
        let err = |n: usize| {
            let g = Grid::new(l, n, BoundaryCondition::Periodic).unwrap();
            let grad = face_gradient(&Field::from_fn(g, |x| (k * x).sin()));
            (0..=n)
                .map(|i| (grad[i] - k * (k * g.face(i)).cos()).abs())
                .fold(0.0, f64::max)
        };
        let ns = [64usize, 128, 256, 512];
        let errs: Vec<f64> = ns.iter().map(|&n| err(n)).collect();
        // least-squares slope of log err against log dx
        let xs: Vec<f64> = ns.iter().map(|&n| (l / n as f64).ln()).collect();
        let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
        let mx = xs.iter().sum::<f64>() / 4.0;
        let my = ys.iter().sum::<f64>() / 4.0;
        let slope = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (x - mx) * (y - my))
            .sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!((slope - 2.0).abs() <= 0.1, "slope {slope}");
        // n = 256 error is O(dx^2)
        let dx = l / 256.0;
        assert!(errs[2] <= k.powi(3) * dx * dx / 24.0 * 1.01);
    }
}
