//! Lid-driven cavity in stream function-vorticity form.
//!
//! Each step: Gauss-Seidel solve of `lap(psi) = -omega`, centered-difference
//! velocity recovery, Thom wall vorticity, explicit Euler vorticity transport.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{check_sorted_times, nearest_step, Field, Grid2D};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityParams<T> {
    pub reynolds: T,
    pub dt: T,
    pub t_end: T,
    pub lid_speed: T,
    pub poisson_tol: T,
    pub poisson_max_iter: usize,
}

impl<T: Real> CavityParams<T> {
    /// Defaults: `dt = 0.2 min(h / U, 0.25 Re h^2)`, tol `1e-6`, 10 000 sweeps.
    pub fn new(reynolds: T, grid: &Grid2D, t_end: T) -> Self {
        let h = grid.spacing::<T>();
        let dt = T::lit(0.2) * h.min(T::lit(0.25) * reynolds * h * h);
        Self {
            reynolds,
            dt,
            t_end,
            lid_speed: T::one(),
            poisson_tol: T::lit(1e-6),
            poisson_max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonSolution<T> {
    pub psi: Field<T>,
    pub iterations: usize,
    /// Max over interior nodes of the Gauss-Seidel correction magnitude,
    /// `|psi_E + psi_W + psi_N + psi_S - 4 psi + h^2 omega| / 4`.
    pub residual: T,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CavitySnapshot<T> {
    pub omega: Field<T>,
    pub psi: Field<T>,
    pub u: Field<T>,
    pub v: Field<T>,
}

#[derive(Debug, Clone)]
pub struct CavityRun<T> {
    pub snapshots: Vec<CavitySnapshot<T>>,
    pub steps: usize,
    /// Poisson solves that hit `poisson_max_iter` before reaching tolerance.
    pub poisson_warnings: usize,
    pub max_poisson_residual: T,
}

/// Max interior residual of the discrete Poisson equation, in the same
/// units as [`PoissonSolution::residual`].
pub fn poisson_residual<T: Real>(psi: &Field<T>, omega: &Field<T>, grid: &Grid2D) -> T {
    let n = grid.n;
    let h2 = grid.spacing::<T>().powi(2);
    let quarter = T::lit(0.25);
    let four = T::lit(4.0);
    let p = &psi.values;
    let w = &omega.values;
    let mut r = T::zero();
    for j in 1..n - 1 {
        for i in 1..n - 1 {
            let k = j * n + i;
            let res = (p[k + 1] + p[k - 1] + p[k + n] + p[k - n] - four * p[k] + h2 * w[k]) * quarter;
            r = r.max(res.abs());
        }
    }
    r
}

/// In-place lexicographic Gauss-Seidel for `lap(psi) = -omega` with
/// `psi = 0` held on all four walls.
pub fn poisson_gauss_seidel<T: Real>(
    omega: &Field<T>,
    psi_init: &Field<T>,
    grid: &Grid2D,
    tol: T,
    max_iter: usize,
) -> Result<PoissonSolution<T>> {
    let n = grid.n;
    for f in [omega, psi_init] {
        if f.len() != grid.len() {
            return Err(Error::Dimension {
                context: "poisson field",
                expected: grid.len(),
                got: f.len(),
            });
        }
    }
    let mut psi = psi_init.clone();
    for i in 0..n {
        psi.set(i, 0, T::zero());
        psi.set(i, n - 1, T::zero());
        psi.set(0, i, T::zero());
        psi.set(n - 1, i, T::zero());
    }
    let h2 = grid.spacing::<T>().powi(2);
    let quarter = T::lit(0.25);
    let mut residual = poisson_residual(&psi, omega, grid);
    let mut iterations = 0;
    while residual > tol && iterations < max_iter {
        let p = &mut psi.values;
        let w = &omega.values;
        for j in 1..n - 1 {
            for i in 1..n - 1 {
                let k = j * n + i;
                p[k] = quarter * (p[k + 1] + p[k - 1] + p[k + n] + p[k - n] + h2 * w[k]);
            }
        }
        iterations += 1;
        residual = poisson_residual(&psi, omega, grid);
    }
    Ok(PoissonSolution {
        psi,
        iterations,
        converged: residual <= tol,
        residual,
    })
}

/// Centered-difference velocities `u = psi_y`, `v = -psi_x` on the interior;
/// walls carry the cavity boundary values (`u = lid_speed` on the top row).
pub fn velocity_from_streamfunction<T: Real>(psi: &Field<T>, grid: &Grid2D, lid_speed: T) -> (Field<T>, Field<T>) {
    let n = grid.n;
    let inv2h = T::one() / (T::lit(2.0) * grid.spacing::<T>());
    let mut u = Field::zeros_2d(grid, psi.time);
    let mut v = Field::zeros_2d(grid, psi.time);
    let p = &psi.values;
    for j in 1..n - 1 {
        for i in 1..n - 1 {
            let k = j * n + i;
            u.values[k] = (p[k + n] - p[k - n]) * inv2h;
            v.values[k] = -(p[k + 1] - p[k - 1]) * inv2h;
        }
    }
    for i in 0..n {
        u.set(i, n - 1, lid_speed);
    }
    (u, v)
}

/// Overwrites the wall values of `omega` with Thom's first-order closure
/// `omega_w = -2 (psi_adj - psi_w) / h^2 - 2 U_w / h`.
/// The lid row (corners included) uses `U_w = lid_speed`; other walls are at rest.
pub fn apply_thom_boundary<T: Real>(omega: &mut Field<T>, psi: &Field<T>, grid: &Grid2D, lid_speed: T) {
    let n = grid.n;
    let h = grid.spacing::<T>();
    let two = T::lit(2.0);
    let c = two / (h * h);
    for i in 0..n {
        omega.set(i, 0, -c * (psi.at(i, 1) - psi.at(i, 0)));
    }
    for j in 1..n - 1 {
        omega.set(0, j, -c * (psi.at(1, j) - psi.at(0, j)));
        omega.set(n - 1, j, -c * (psi.at(n - 2, j) - psi.at(n - 1, j)));
    }
    for i in 0..n {
        omega.set(i, n - 1, -c * (psi.at(i, n - 2) - psi.at(i, n - 1)) - two * lid_speed / h);
    }
}

fn transport_step<T: Real>(omega: &Field<T>, u: &Field<T>, v: &Field<T>, grid: &Grid2D, p: &CavityParams<T>, out: &mut Field<T>) {
    let n = grid.n;
    let h = grid.spacing::<T>();
    let inv2h = T::one() / (T::lit(2.0) * h);
    let nu = T::one() / p.reynolds;
    let inv_h2 = T::one() / (h * h);
    let four = T::lit(4.0);
    let w = &omega.values;
    out.values.copy_from_slice(w);
    for j in 1..n - 1 {
        for i in 1..n - 1 {
            let k = j * n + i;
            let wx = (w[k + 1] - w[k - 1]) * inv2h;
            let wy = (w[k + n] - w[k - n]) * inv2h;
            let lap = (w[k + 1] + w[k - 1] + w[k + n] + w[k - n] - four * w[k]) * inv_h2;
            out.values[k] = w[k] + p.dt * (-u.values[k] * wx - v.values[k] * wy + nu * lap);
        }
    }
}

/// Runs from quiescent flow to `p.t_end`, returning `(omega, psi, u, v)` at the
/// completed steps nearest to each requested time.
pub fn cavity_hf_solve<T: Real>(p: &CavityParams<T>, grid: &Grid2D, snapshot_times: &[T]) -> Result<CavityRun<T>> {
    check_sorted_times(snapshot_times, p.t_end)?;
    if !(p.reynolds > T::zero()) || !(p.dt > T::zero()) || !(p.poisson_tol > T::zero()) {
        return Err(Error::Invalid("cavity needs Re > 0, dt > 0 and poisson_tol > 0".into()));
    }
    let h = grid.spacing::<T>();
    let nu = T::one() / p.reynolds;
    let diff = nu * p.dt / (h * h);
    if diff > T::lit(0.25) {
        return Err(Error::Unstable {
            bound: "2D diffusion number nu dt/h^2",
            value: diff.to_f64_lossy(),
            limit: 0.25,
        });
    }
    let cfl = p.lid_speed.abs() * p.dt / h;
    if cfl > T::one() {
        return Err(Error::Unstable {
            bound: "CFL U dt/h",
            value: cfl.to_f64_lossy(),
            limit: 1.0,
        });
    }

    let n_steps = (p.t_end / p.dt - T::lit(1e-9)).ceil().to_usize().unwrap_or(0);
    let wanted: Vec<usize> = snapshot_times.iter().map(|&t| nearest_step(t, p.dt, n_steps)).collect();
    let mut omega = Field::zeros_2d(grid, T::zero());
    let mut psi = Field::zeros_2d(grid, T::zero());
    let mut scratch = omega.clone();
    let mut run = CavityRun {
        snapshots: Vec::with_capacity(wanted.len()),
        steps: n_steps,
        poisson_warnings: 0,
        max_poisson_residual: T::zero(),
    };
    let mut w_idx = 0;
    for step in 0..=n_steps {
        let t = T::from_usize_lossy(step) * p.dt;
        let sol = poisson_gauss_seidel(&omega, &psi, grid, p.poisson_tol, p.poisson_max_iter)?;
        if !sol.converged {
            run.poisson_warnings += 1;
        }
        run.max_poisson_residual = run.max_poisson_residual.max(sol.residual);
        psi = sol.psi;
        psi.time = t;
        apply_thom_boundary(&mut omega, &psi, grid, p.lid_speed);
        omega.time = t;
        let (u, v) = velocity_from_streamfunction(&psi, grid, p.lid_speed);
        while w_idx < wanted.len() && wanted[w_idx] == step {
            run.snapshots.push(CavitySnapshot {
                omega: omega.clone(),
                psi: psi.clone(),
                u: u.clone(),
                v: v.clone(),
            });
            w_idx += 1;
        }
        if step == n_steps {
            break;
        }
        transport_step(&omega, &u, &v, grid, p, &mut scratch);
        std::mem::swap(&mut omega, &mut scratch);
        if !omega.is_finite() {
            return Err(Error::Diverged {
                step: step + 1,
                quantity: "vorticity",
            });
        }
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn manufactured_error(n: usize) -> f64 {
        let g = Grid2D::new(n).unwrap();
        let omega = Field::from_fn_2d(&g, 0.0, |x, y| 2.0 * PI * PI * (PI * x).sin() * (PI * y).sin());
        let exact = Field::from_fn_2d(&g, 0.0, |x, y| (PI * x).sin() * (PI * y).sin());
        let sol = poisson_gauss_seidel(&omega, &Field::zeros_2d(&g, 0.0), &g, 1e-13, 200_000).unwrap();
        assert!(sol.converged);
        sol.psi
            .values
            .iter()
            .zip(&exact.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn zero_source_gives_zero_streamfunction() {
        let g = Grid2D::new(9).unwrap();
        let z = Field::zeros_2d(&g, 0.0);
        let sol = poisson_gauss_seidel(&z, &z, &g, 1e-6, 100).unwrap();
        assert!(sol.iterations <= 1);
        assert!(sol.converged);
        assert!(sol.psi.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn manufactured_solution_second_order() {
        let e1 = manufactured_error(17);
        let e2 = manufactured_error(33);
        let h = 1.0 / 16.0;
        assert!(e1 < 0.1 * h * h * PI.powi(4), "error {e1} not O(h^2)");
        let ratio = e1 / e2;
        assert!((3.2..=4.8).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn iteration_cap_flags_nonconvergence() {
        let g = Grid2D::new(33).unwrap();
        let omega = Field::from_fn_2d(&g, 0.0, |x, y| x * y);
        let sol = poisson_gauss_seidel(&omega, &Field::zeros_2d(&g, 0.0), &g, 1e-14, 3).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.iterations, 3);
        assert!(sol.residual > 1e-14);
    }

    #[test]
    fn zero_streamfunction_gives_lid_only() {
        let g = Grid2D::new(8).unwrap();
        let (u, v) = velocity_from_streamfunction(&Field::zeros_2d(&g, 0.0), &g, 1.0);
        for j in 0..8 {
            for i in 0..8 {
                assert_eq!(v.at(i, j), 0.0);
                assert_eq!(u.at(i, j), if j == 7 { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn linear_streamfunction_gives_uniform_u() {
        let g = Grid2D::new(11).unwrap();
        let psi = Field::from_fn_2d(&g, 0.0f64, |_, y| y);
        let (u, v) = velocity_from_streamfunction(&psi, &g, 1.0);
        for j in 1..10 {
            for i in 1..10 {
                assert!((u.at(i, j) - 1.0).abs() < 1e-13);
                assert_eq!(v.at(i, j), 0.0);
            }
        }
    }

    #[test]
    fn thom_formula_on_each_wall() {
        let g = Grid2D::new(5).unwrap();
        let h: f64 = 0.25;
        let psi = Field::from_fn_2d(&g, 0.0f64, |x, y| x * (1.0 - x) * y * (1.0 - y));
        let mut w = Field::zeros_2d(&g, 0.0);
        apply_thom_boundary(&mut w, &psi, &g, 1.0);
        assert!((w.at(2, 0) - (-2.0 * psi.at(2, 1) / (h * h))).abs() < 1e-14);
        assert!((w.at(0, 2) - (-2.0 * psi.at(1, 2) / (h * h))).abs() < 1e-14);
        assert!((w.at(4, 2) - (-2.0 * psi.at(3, 2) / (h * h))).abs() < 1e-14);
        assert!((w.at(2, 4) - (-2.0 * psi.at(2, 3) / (h * h) - 2.0 / h)).abs() < 1e-14);
    }

    #[test]
    fn resting_lid_stays_quiescent() {
        let g = Grid2D::new(12).unwrap();
        let mut p = CavityParams::new(100.0, &g, 0.2);
        p.lid_speed = 0.0;
        let run = cavity_hf_solve(&p, &g, &[0.0, 0.1, 0.2]).unwrap();
        for s in &run.snapshots {
            for f in [&s.omega, &s.psi, &s.u, &s.v] {
                assert!(f.values.iter().all(|&x| x == 0.0));
            }
        }
    }

    #[test]
    fn moving_lid_drives_clockwise_vortex() {
        let g = Grid2D::new(17).unwrap();
        let p = CavityParams::new(100.0, &g, 0.5);
        let run = cavity_hf_solve(&p, &g, &[0.5]).unwrap();
        let s = &run.snapshots[0];
        // Flow under the lid follows it; return flow lower down.
        assert!(s.u.at(8, 14) > 0.05);
        assert!(s.u.at(8, 6) < 0.0);
        assert_eq!(run.poisson_warnings, 0);
    }
}
