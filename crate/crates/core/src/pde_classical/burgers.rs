//! Explicit finite-difference solver for the periodic 1D viscous Burgers equation.
//!
//! Advection `u * du/dx` uses first-order upwinding chosen by the sign of the
//! local velocity; diffusion uses the second-order central stencil; time is
//! advanced with forward Euler.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{check_sorted_times, nearest_step, Field, Grid1D};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurgersParams<T> {
    pub viscosity: T,
    pub dt: T,
    pub t_end: T,
}

impl<T: Real> BurgersParams<T> {
    /// Fixed step `0.2 * min(dx / max|u0|, 0.5 dx^2 / nu)`.
    pub fn with_default_dt(grid: &Grid1D<T>, u0: &Field<T>, viscosity: T, t_end: T) -> Self {
        let dx = grid.spacing();
        let umax = u0.max_abs();
        let diffusive = T::lit(0.5) * dx * dx / viscosity;
        let limit = if umax > T::zero() {
            (dx / umax).min(diffusive)
        } else {
            diffusive
        };
        Self {
            viscosity,
            dt: T::lit(0.2) * limit,
            t_end,
        }
    }

    fn check(&self, grid: &Grid1D<T>, u: &Field<T>) -> Result<()> {
        if !(self.viscosity > T::zero()) || !(self.dt > T::zero()) {
            return Err(Error::Invalid("Burgers needs viscosity > 0 and dt > 0".into()));
        }
        let dx = grid.spacing();
        let cfl = u.max_abs() * self.dt / dx;
        if cfl > T::one() {
            return Err(Error::Unstable {
                bound: "CFL max|u| dt/dx",
                value: cfl.to_f64_lossy(),
                limit: 1.0,
            });
        }
        let diff = self.viscosity * self.dt / (dx * dx);
        if diff > T::lit(0.5) {
            return Err(Error::Unstable {
                bound: "diffusion number nu dt/dx^2",
                value: diff.to_f64_lossy(),
                limit: 0.5,
            });
        }
        Ok(())
    }
}

/// Advances `u` by one forward-Euler step.
pub fn burgers_hf_step<T: Real>(u: &Field<T>, grid: &Grid1D<T>, p: &BurgersParams<T>) -> Result<Field<T>> {
    if u.len() != grid.n_points {
        return Err(Error::Dimension {
            context: "burgers field",
            expected: grid.n_points,
            got: u.len(),
        });
    }
    p.check(grid, u)?;
    let mut next = u.clone();
    step_into(&u.values, &mut next.values, grid.spacing(), p.viscosity, p.dt);
    next.time = u.time + p.dt;
    if !next.is_finite() {
        return Err(Error::Diverged {
            step: 0,
            quantity: "velocity",
        });
    }
    Ok(next)
}

fn step_into<T: Real>(u: &[T], out: &mut [T], dx: T, nu: T, dt: T) {
    let n = u.len();
    let lam = dt / dx;
    let mu = nu * dt / (dx * dx);
    let two = T::lit(2.0);
    for i in 0..n {
        let ui = u[i];
        let um = u[(i + n - 1) % n];
        let up = u[(i + 1) % n];
        let grad = if ui >= T::zero() { ui - um } else { up - ui };
        out[i] = ui - lam * ui * grad + mu * (up - two * ui + um);
    }
}

/// Integrates from `u0` to `p.t_end`, returning the fields at the completed
/// steps nearest to each requested time.
pub fn burgers_hf_solve<T: Real>(
    u0: &Field<T>,
    grid: &Grid1D<T>,
    p: &BurgersParams<T>,
    snapshot_times: &[T],
) -> Result<Vec<Field<T>>> {
    burgers_hf_solve_observed(u0, grid, p, snapshot_times, |_, _| {})
}

/// As [`burgers_hf_solve`], calling `observer(step, field)` after every step
/// (step 0 is the initial condition).
pub fn burgers_hf_solve_observed<T: Real>(
    u0: &Field<T>,
    grid: &Grid1D<T>,
    p: &BurgersParams<T>,
    snapshot_times: &[T],
    mut observer: impl FnMut(usize, &Field<T>),
) -> Result<Vec<Field<T>>> {
    check_sorted_times(snapshot_times, p.t_end)?;
    p.check(grid, u0)?;
    let n_steps = (p.t_end / p.dt - T::lit(1e-9)).ceil().to_usize().unwrap_or(0);
    let wanted: Vec<usize> = snapshot_times
        .iter()
        .map(|&t| nearest_step(t, p.dt, n_steps))
        .collect();

    let mut snaps = Vec::with_capacity(wanted.len());
    let mut cur = u0.values.clone();
    let mut next = cur.clone();
    let mut w = 0;
    let emit = |step: usize, vals: &[T], snaps: &mut Vec<Field<T>>, w: &mut usize| {
        while *w < wanted.len() && wanted[*w] == step {
            snaps.push(Field::new_1d(vals.to_vec(), T::from_usize_lossy(step) * p.dt));
            *w += 1;
        }
    };
    observer(0, u0);
    emit(0, &cur, &mut snaps, &mut w);
    let dx = grid.spacing();
    for step in 1..=n_steps {
        step_into(&cur, &mut next, dx, p.viscosity, p.dt);
        std::mem::swap(&mut cur, &mut next);
        if cur.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                step,
                quantity: "velocity",
            });
        }
        let f = Field::new_1d(cur.clone(), T::from_usize_lossy(step) * p.dt);
        observer(step, &f);
        emit(step, &cur, &mut snaps, &mut w);
    }
    Ok(snaps)
}

/// Gaussian pulse `amplitude * exp(-width (x - center)^2)` sampled on `grid`.
pub fn gaussian_pulse<T: Real>(grid: &Grid1D<T>, amplitude: T, width: T, center: T) -> Field<T> {
    let values = grid
        .coords()
        .into_iter()
        .map(|x| amplitude * (-width * (x - center) * (x - center)).exp())
        .collect();
    Field::new_1d(values, T::zero())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Grid1D<f64> {
        Grid1D::periodic(n, 1.0).unwrap()
    }

    // Scalar-by-scalar evaluation of the update formula, written without
    // sharing code with `step_into`.
    fn hand_update(u: &[f64], i: usize, dx: f64, nu: f64, dt: f64) -> f64 {
        let n = u.len();
        let left = if i == 0 { u[n - 1] } else { u[i - 1] };
        let right = if i == n - 1 { u[0] } else { u[i + 1] };
        let upwind = if u[i] > 0.0 {
            (u[i] - left) / dx
        } else if u[i] < 0.0 {
            (right - u[i]) / dx
        } else {
            0.0
        };
        u[i] - dt * u[i] * upwind + nu * dt / (dx * dx) * (right - 2.0 * u[i] + left)
    }

    #[test]
    fn constant_state_is_fixed_point() {
        let g = grid(32);
        for c in [0.3, -0.7, 0.0, 1e-3] {
            let u = Field::new_1d(vec![c; 32], 0.0);
            let p = BurgersParams { viscosity: 0.05, dt: 1e-3, t_end: 1.0 };
            let next = burgers_hf_step(&u, &g, &p).unwrap();
            assert!(next.values.iter().all(|&v| v == c));
        }
    }

    #[test]
    fn four_point_step_matches_hand_evaluation() {
        let g = grid(4);
        let u = Field::new_1d(vec![0.0, 0.5, 0.0, -0.5], 0.0);
        let p = BurgersParams { viscosity: 0.01, dt: 0.05, t_end: 1.0 };
        let next = burgers_hf_step(&u, &g, &p).unwrap();
        // Frozen from the hand evaluation: lambda = 0.2, mu = 0.008.
        let frozen = [0.0, 0.442, 0.0, -0.442];
        for i in 0..4 {
            let oracle = hand_update(&u.values, i, 0.25, 0.01, 0.05);
            assert!((next.values[i] - oracle).abs() < 1e-15);
            assert!((next.values[i] - frozen[i]).abs() < 1e-15);
        }
        assert!((next.time - 0.05).abs() < 1e-15);
    }

    #[test]
    fn rejects_cfl_violation_and_names_bound() {
        let g = grid(16);
        let u = Field::new_1d(vec![1.0; 16], 0.0);
        let p = BurgersParams { viscosity: 1e-4, dt: 0.1, t_end: 1.0 };
        match burgers_hf_step(&u, &g, &p) {
            Err(Error::Unstable { bound, .. }) => assert!(bound.contains("CFL")),
            other => panic!("expected CFL rejection, got {other:?}"),
        }
        let p = BurgersParams { viscosity: 1.0, dt: 0.01, t_end: 1.0 };
        match burgers_hf_step(&Field::new_1d(vec![0.0; 16], 0.0), &g, &p) {
            Err(Error::Unstable { bound, .. }) => assert!(bound.contains("diffusion")),
            other => panic!("expected diffusion rejection, got {other:?}"),
        }
    }

    #[test]
    fn pure_diffusion_conserves_sum() {
        let g = grid(64);
        let u0 = gaussian_pulse(&g, 1e-12, 40.0, 0.5);
        let p = BurgersParams::with_default_dt(&g, &u0, 0.5, 0.05);
        let snaps = burgers_hf_solve(&u0, &g, &p, &[0.05]).unwrap();
        let rel = (snaps[0].sum() - u0.sum()).abs() / u0.sum();
        assert!(rel < 1e-11, "relative sum drift {rel}");
    }

    #[test]
    fn zero_field_stays_zero() {
        let g = grid(16);
        let u0 = Field::new_1d(vec![0.0; 16], 0.0);
        let p = BurgersParams { viscosity: 0.01, dt: 1e-3, t_end: 0.1 };
        let snaps = burgers_hf_solve(&u0, &g, &p, &[0.0, 0.05, 0.1]).unwrap();
        assert!(snaps.iter().all(|s| s.values.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn snapshots_land_on_nearest_step() {
        let g = grid(16);
        let u0 = gaussian_pulse(&g, 0.5, 40.0, 0.35);
        let p = BurgersParams { viscosity: 0.01, dt: 0.003, t_end: 0.1 };
        let times = [0.0, 0.0401, 0.1];
        let snaps = burgers_hf_solve(&u0, &g, &p, &times).unwrap();
        for (s, t) in snaps.iter().zip(times) {
            assert!((s.time - t).abs() <= 0.5 * p.dt + 1e-12);
        }
    }

    #[test]
    fn unsorted_snapshot_times_rejected() {
        let g = grid(16);
        let u0 = gaussian_pulse(&g, 0.5, 40.0, 0.35);
        let p = BurgersParams { viscosity: 0.01, dt: 0.003, t_end: 0.1 };
        assert!(burgers_hf_solve(&u0, &g, &p, &[0.05, 0.01]).is_err());
    }
}
