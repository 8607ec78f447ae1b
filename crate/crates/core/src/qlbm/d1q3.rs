//! D1Q3 lattice for the periodic viscous Burgers equation.

use serde::{Deserialize, Serialize};

use super::{run_pass, CircuitKind, CircuitPass, CollisionDiag, Direction, StepRecord, SOUND_SPEED_SQ};
use crate::error::{Error, Result};
use crate::field::{check_sorted_times, nearest_step, Field};
use crate::scalar::Real;
use crate::statevector::{RegisterLayout, SectorBlock, Shift};

pub const D1Q3_WEIGHTS: [f64; 3] = [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0];
pub const D1Q3_VELOCITIES: [i32; 3] = [0, 1, -1];

// Link encoding 00 -> e0, 01 -> e1, 10 -> e2; 11 is never populated.
const DIRECTIONS: [Direction; 3] = [
    Direction { link: 0, shift: None },
    Direction {
        link: 1,
        shift: Some((0, Shift::Plus)),
    },
    Direction {
        link: 2,
        shift: Some((0, Shift::Minus)),
    },
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct D1Q3Params<T> {
    pub n_sites: usize,
    /// Physical spacing of one lattice site.
    pub dx: T,
    /// Physical time advanced by one lattice step.
    pub dt: T,
    /// BGK relaxation rate `1 / tau` applied to the collision diagonal.
    pub relaxation_rate: T,
    pub clip_bound: T,
}

impl<T: Real> D1Q3Params<T> {
    /// Relaxation from `nu = c_s^2 (tau - 1/2)` with `nu` converted to lattice units.
    pub fn for_burgers(n_sites: usize, length: T, dt: T, viscosity: T) -> Result<Self> {
        if !n_sites.is_power_of_two() || n_sites < 2 {
            return Err(Error::Invalid(format!("D1Q3 lattice needs a power-of-two site count, got {n_sites}")));
        }
        let dx = length / T::from_usize_lossy(n_sites);
        let nu_lattice = viscosity * dt / (dx * dx);
        let tau = nu_lattice / T::lit(SOUND_SPEED_SQ) + T::lit(0.5);
        let p = Self {
            n_sites,
            dx,
            dt,
            relaxation_rate: T::one() / tau,
            clip_bound: T::lit(0.999),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.n_sites.is_power_of_two() || self.n_sites < 2 {
            return Err(Error::Invalid(format!(
                "D1Q3 lattice needs a power-of-two site count, got {}",
                self.n_sites
            )));
        }
        if !(self.relaxation_rate > T::zero() && self.relaxation_rate <= T::lit(2.0)) {
            return Err(Error::Invalid(format!(
                "relaxation rate {} outside (0, 2]",
                self.relaxation_rate
            )));
        }
        if !(self.clip_bound > T::zero() && self.clip_bound < T::one()) {
            return Err(Error::Invalid("clip bound must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Physical-to-lattice velocity factor `dt / dx`.
    pub fn lattice_speed_scale(&self) -> T {
        self.dt / self.dx
    }

    pub fn layout(&self) -> RegisterLayout {
        RegisterLayout::new(1, 2, vec![self.n_sites.trailing_zeros() as usize]).expect("small D1Q3 register")
    }
}

/// `a[k * n + j] = w_k (1 + e_k c_adv / c_s^2)` with `c_adv = u / 2` in lattice units.
pub fn equilibrium_coeffs_d1q3<T: Real>(u: &[T], p: &D1Q3Params<T>) -> Vec<T> {
    let n = u.len();
    let scale = p.lattice_speed_scale() * T::lit(0.5) / T::lit(SOUND_SPEED_SQ);
    let mut a = vec![T::zero(); 3 * n];
    for k in 0..3 {
        let w = T::lit(D1Q3_WEIGHTS[k]);
        let e = T::lit(f64::from(D1Q3_VELOCITIES[k]));
        for (j, &uj) in u.iter().enumerate() {
            a[k * n + j] = w * (T::one() + e * uj * scale);
        }
    }
    a
}

fn check_input<T: Real>(u: &[T], p: &D1Q3Params<T>) -> Result<()> {
    p.validate()?;
    if u.len() != p.n_sites {
        return Err(Error::Dimension {
            context: "D1Q3 velocity field",
            expected: p.n_sites,
            got: u.len(),
        });
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("non-finite velocity on the D1Q3 lattice".into()));
    }
    Ok(())
}

fn step_impl<T: Real>(
    u: &[T],
    diag: &mut CollisionDiag<T>,
    p: &D1Q3Params<T>,
    step: usize,
    observer: &mut dyn FnMut(&StepRecord<'_, T>),
) -> Result<Vec<T>> {
    check_input(u, p)?;
    let n = p.n_sites;
    if u.iter().all(|&v| v == T::zero()) {
        return Ok(vec![T::zero(); n]);
    }
    diag.relax(equilibrium_coeffs_d1q3(u, p), p.relaxation_rate, p.clip_bound)?;

    // Diagonal over (link, lattice); the unused link state 11 gets 0.
    let mut full = vec![T::zero(); 4 * n];
    full[..3 * n].copy_from_slice(&diag.d);
    let blocks = (0..3).map(|k| SectorBlock { ancilla: 0, link: k, values: u }).collect();
    let readout = run_pass(CircuitPass {
        layout: p.layout(),
        blocks,
        diagonal: full,
        directions: &DIRECTIONS,
        summed_ancillas: Vec::new(),
    })?;

    let before: T = u.iter().copied().sum();
    let after: T = readout.iter().copied().sum();
    let out: Vec<T> = if after != T::zero() && after.is_finite() {
        let s = before / after;
        readout.iter().map(|&r| r * s).collect()
    } else {
        readout.clone()
    };
    observer(&StepRecord {
        kind: CircuitKind::BurgersD1Q3,
        step,
        input: u,
        diagonal: &diag.d,
        source: None,
        readout: &readout,
        output: &out,
    });
    Ok(out)
}

/// One emulated collision-streaming step followed by the momentum rescaling
/// `sum_j u_next = sum_j u`. `diag` carries the relaxed diagonal between steps.
pub fn qlbm_burgers_step<T: Real>(u: &[T], diag: &mut CollisionDiag<T>, p: &D1Q3Params<T>) -> Result<Vec<T>> {
    step_impl(u, diag, p, 0, &mut |_| {})
}

/// Runs `round(t_end / dt)` lattice steps from `u0` and returns the fields at
/// the completed steps nearest to `snapshot_times`.
pub fn qlbm_burgers_solve<T: Real>(
    u0: &Field<T>,
    p: &D1Q3Params<T>,
    t_end: T,
    snapshot_times: &[T],
    observer: &mut dyn FnMut(&StepRecord<'_, T>),
) -> Result<Vec<Field<T>>> {
    check_sorted_times(snapshot_times, t_end)?;
    check_input(&u0.values, p)?;
    let n_steps = (t_end / p.dt).round().to_usize().unwrap_or(0);
    let wanted: Vec<usize> = snapshot_times.iter().map(|&t| nearest_step(t, p.dt, n_steps)).collect();
    let mut diag = CollisionDiag::new();
    let mut u = u0.values.clone();
    let mut snaps = Vec::with_capacity(wanted.len());
    let mut w = 0;
    for step in 0..=n_steps {
        if step > 0 {
            u = step_impl(&u, &mut diag, p, step, observer)?;
            if u.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged {
                    step,
                    quantity: "lattice velocity",
                });
            }
        }
        while w < wanted.len() && wanted[w] == step {
            snaps.push(Field::new_1d(u.clone(), T::from_usize_lossy(step) * p.dt));
            w += 1;
        }
    }
    Ok(snaps)
}
