//! Tridiagonal and cyclic tridiagonal solves for the implicit diffusion step.

use crate::grid::{BoundaryCondition, Grid};

/// Solves `a_i x_{i-1} + b_i x_i + c_i x_{i+1} = d_i` (Thomas algorithm).
/// `a[0]` and `c[n-1]` are ignored.
pub fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = c[0] / b[0];
    dp[0] = d[0] / b[0];
    for i in 1..n {
        let m = b[i] - a[i] * cp[i - 1];
        cp[i] = if i + 1 < n { c[i] / m } else { 0.0 };
        dp[i] = (d[i] - a[i] * dp[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

/// Cyclic system: as [`solve_tridiagonal`] plus corner entries `a[0]` (row
/// 0, column n-1) and `c[n-1]` (row n-1, column 0). Sherman-Morrison.
pub fn solve_cyclic(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
    let n = b.len();
    let alpha = c[n - 1];
    let beta = a[0];
    let gamma = -b[0];
    let mut bb = b.to_vec();
    bb[0] -= gamma;
    bb[n - 1] -= alpha * beta / gamma;
    let x = solve_tridiagonal(a, &bb, c, d);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = solve_tridiagonal(a, &bb, c, &u);
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

/// Backward-Euler diffusion `(I - dt div(D grad)) u_new = rhs` with face
/// coefficients `faces` (length `n + 1`). Boundary faces follow the grid's
/// condition: periodic wraps, Dirichlet uses the ghost `-u`, every other
/// kind carries no implicit diffusive boundary flux.
pub fn implicit_diffusion(grid: &Grid, faces: &[f64], dt: f64, rhs: &[f64]) -> Vec<f64> {
    let n = grid.n_cells();
    let r = dt / (grid.dx() * grid.dx());
    let mut a = vec![0.0; n];
    let mut b = vec![1.0; n];
    let mut c = vec![0.0; n];
    for i in 0..n {
        let left = faces[i] * r;
        let right = faces[i + 1] * r;
        if i > 0 {
            a[i] = -left;
            b[i] += left;
        }
        if i + 1 < n {
            c[i] = -right;
            b[i] += right;
        }
    }
    match grid.bc() {
        BoundaryCondition::Periodic => {
            // faces[0] and faces[n] describe the same face
            let w = faces[0] * r;
            a[0] = -w;
            b[0] += w;
            c[n - 1] = -w;
            b[n - 1] += w;
            return solve_cyclic(&a, &b, &c, rhs);
        }
        BoundaryCondition::HomogeneousDirichlet => {
            b[0] += 2.0 * faces[0] * r;
            b[n - 1] += 2.0 * faces[n] * r;
        }
        _ => {}
    }
    solve_tridiagonal(&a, &b, &c, rhs)
}

/// Discrete diffusion operator `div(D grad u)` with the same boundary
/// treatment as [`implicit_diffusion`].
pub fn apply_diffusion(grid: &Grid, faces: &[f64], u: &[f64]) -> Vec<f64> {
    let n = grid.n_cells();
    let dx2 = grid.dx() * grid.dx();
    let mut flux = vec![0.0; n + 1];
    for i in 1..n {
        flux[i] = faces[i] * (u[i] - u[i - 1]);
    }
    match grid.bc() {
        BoundaryCondition::Periodic => {
            flux[0] = faces[0] * (u[0] - u[n - 1]);
            flux[n] = flux[0];
        }
        BoundaryCondition::HomogeneousDirichlet => {
            flux[0] = faces[0] * 2.0 * u[0];
            flux[n] = -faces[n] * 2.0 * u[n - 1];
        }
        _ => {}
    }
    (0..n).map(|i| (flux[i + 1] - flux[i]) / dx2).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matvec(a: &[f64], b: &[f64], c: &[f64], x: &[f64], cyclic: bool) -> Vec<f64> {
        let n = b.len();
        (0..n)
            .map(|i| {
                let mut s = b[i] * x[i];
                if i > 0 {
                    s += a[i] * x[i - 1];
                } else if cyclic {
                    s += a[0] * x[n - 1];
                }
                if i + 1 < n {
                    s += c[i] * x[i + 1];
                } else if cyclic {
                    s += c[n - 1] * x[0];
                }
                s
            })
            .collect()
    }

    #[test]
    fn thomas_and_cyclic_solve() {
        let n = 9;
        let a: Vec<f64> = (0..n).map(|i| -0.3 - 0.01 * i as f64).collect();
        let c: Vec<f64> = (0..n).map(|i| -0.2 + 0.02 * i as f64).collect();
        let b: Vec<f64> = (0..n).map(|i| 2.0 + 0.1 * i as f64).collect();
        let d: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        for cyclic in [false, true] {
            let x = if cyclic {
                solve_cyclic(&a, &b, &c, &d)
            } else {
                solve_tridiagonal(&a, &b, &c, &d)
            };
            let back = matvec(&a, &b, &c, &x, cyclic);
            for (p, q) in back.iter().zip(&d) {
                assert!((p - q).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn implicit_step_inverts_operator() {
        for bc in [
            BoundaryCondition::Periodic,
            BoundaryCondition::ZeroFlux,
            BoundaryCondition::HomogeneousDirichlet,
        ] {
            let g = Grid::new(1.0, 12, bc).unwrap();
            let faces: Vec<f64> = (0..=12).map(|i| 0.5 + 0.05 * i as f64).collect();
            let faces = if bc.is_periodic() {
                let mut f = faces;
                f[12] = f[0];
                f
            } else {
                faces
            };
            let rhs: Vec<f64> = (0..12).map(|i| 1.0 + (i as f64 * 0.7).cos()).collect();
            let dt = 0.01;
            let u = implicit_diffusion(&g, &faces, dt, &rhs);
            let lu = apply_diffusion(&g, &faces, &u);
            for i in 0..12 {
                assert!((u[i] - dt * lu[i] - rhs[i]).abs() < 1e-12, "{bc:?}");
            }
        }
    }
}
