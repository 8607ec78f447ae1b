//! D2Q5 lattice for the lid-driven cavity in stream function-vorticity form.
//!
//! Vorticity is advected and diffused by a collision-streaming pass whose
//! equilibrium carries the current lattice velocity. The stream function is
//! relaxed toward `lap(psi) = -omega` by a second circuit that streams `psi`
//! with the bare weights and adds the vorticity through an extra ancilla slot.
//! Non-power-of-two grids are zero-padded; wall values are overwritten after
//! every readout so the padding never reaches the interior.

use serde::{Deserialize, Serialize};

use super::{run_pass, CircuitKind, CircuitPass, CollisionDiag, Direction, StepRecord, SOUND_SPEED_SQ};
use crate::error::{Error, Result};
use crate::field::{check_sorted_times, nearest_step, Field, Grid2D};
use crate::pde_classical::{apply_thom_boundary, velocity_from_streamfunction, CavitySnapshot};
use crate::scalar::Real;
use crate::statevector::{RegisterLayout, SectorBlock, Shift};

pub const D2Q5_WEIGHTS: [f64; 5] = [1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0];
pub const D2Q5_VELOCITIES: [(i32, i32); 5] = [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)];

const N_LINK_QUBITS: usize = 3;

const DIRECTIONS: [Direction; 5] = [
    Direction { link: 0, shift: None },
    Direction {
        link: 1,
        shift: Some((0, Shift::Plus)),
    },
    Direction {
        link: 2,
        shift: Some((0, Shift::Minus)),
    },
    Direction {
        link: 3,
        shift: Some((1, Shift::Plus)),
    },
    Direction {
        link: 4,
        shift: Some((1, Shift::Minus)),
    },
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct D2Q5Params<T> {
    /// Physical nodes per side, walls included.
    pub m: usize,
    pub h: T,
    pub dt: T,
    pub reynolds: T,
    pub vorticity_relaxation: T,
    /// Scales the vorticity source in the stream-function circuit.
    pub stream_relaxation: T,
    pub clip_bound: T,
    pub lid_speed: T,
    pub t_end: T,
}

impl<T: Real> D2Q5Params<T> {
    pub fn for_cavity(m: usize, reynolds: T, dt: T, t_end: T) -> Result<Self> {
        let grid = Grid2D::new(m)?;
        let h = grid.spacing::<T>();
        let nu_lattice = dt / (reynolds * h * h);
        let tau = nu_lattice / T::lit(SOUND_SPEED_SQ) + T::lit(0.5);
        let p = Self {
            m,
            h,
            dt,
            reynolds,
            vorticity_relaxation: T::one() / tau,
            stream_relaxation: T::one(),
            clip_bound: T::lit(0.999),
            lid_speed: T::one(),
            t_end,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 3 {
            return Err(Error::Invalid(format!("cavity lattice needs at least 3 nodes per side, got {}", self.m)));
        }
        if !(self.dt > T::zero() && self.h > T::zero() && self.reynolds > T::zero()) {
            return Err(Error::Invalid("D2Q5 needs dt, h and Re positive".into()));
        }
        if !(self.vorticity_relaxation > T::zero() && self.vorticity_relaxation <= T::lit(2.0)) {
            return Err(Error::Invalid(format!(
                "relaxation rate {} outside (0, 2]",
                self.vorticity_relaxation
            )));
        }
        if !(self.clip_bound > T::zero() && self.clip_bound < T::one()) {
            return Err(Error::Invalid("clip bound must lie in (0, 1)".into()));
        }
        let sigma = self.source_coefficient();
        if !(sigma.abs() < T::one()) {
            return Err(Error::Invalid(format!("stream source coefficient {sigma} must be below 1")));
        }
        Ok(())
    }

    pub fn grid(&self) -> Grid2D {
        Grid2D { n: self.m }
    }

    /// Padded lattice side, a power of two.
    pub fn side(&self) -> usize {
        self.m.next_power_of_two()
    }

    fn axis_bits(&self) -> usize {
        self.side().trailing_zeros() as usize
    }

    /// Collision coefficient of the vorticity sector in the stream circuit.
    pub fn source_coefficient(&self) -> T {
        self.stream_relaxation * T::lit(D2Q5_WEIGHTS[1]) * self.h * self.h
    }

    pub fn vorticity_layout(&self) -> RegisterLayout {
        let b = self.axis_bits();
        RegisterLayout::new(1, N_LINK_QUBITS, vec![b, b]).expect("D2Q5 register within cap")
    }

    pub fn stream_layout(&self) -> RegisterLayout {
        let b = self.axis_bits();
        RegisterLayout::new(2, N_LINK_QUBITS, vec![b, b]).expect("D2Q5 register within cap")
    }

    fn pad(&self, f: &[T]) -> Vec<T> {
        let (m, s) = (self.m, self.side());
        let mut out = vec![T::zero(); s * s];
        for j in 0..m {
            out[j * s..j * s + m].copy_from_slice(&f[j * m..(j + 1) * m]);
        }
        out
    }

    fn crop(&self, f: &[T], time: T) -> Field<T> {
        let (m, s) = (self.m, self.side());
        let mut out = Field::zeros_2d(&self.grid(), time);
        for j in 0..m {
            out.values[j * m..(j + 1) * m].copy_from_slice(&f[j * s..j * s + m]);
        }
        out
    }
}

/// Equilibrium coefficients `a[k * S^2 + site]` over the padded lattice with
/// `a = w_k (1 + e_k . u_lat / c_s^2)` and `u_lat = (u, v) dt / h`. Padding
/// sites see zero velocity.
pub fn equilibrium_coeffs_d2q5<T: Real>(u: &Field<T>, v: &Field<T>, p: &D2Q5Params<T>) -> Vec<T> {
    let up = p.pad(&u.values);
    let vp = p.pad(&v.values);
    let ns = up.len();
    let scale = p.dt / p.h / T::lit(SOUND_SPEED_SQ);
    let mut a = vec![T::zero(); 5 * ns];
    for (k, (&w, &(ex, ey))) in D2Q5_WEIGHTS.iter().zip(&D2Q5_VELOCITIES).enumerate() {
        let w = T::lit(w);
        let (ex, ey) = (T::lit(f64::from(ex)), T::lit(f64::from(ey)));
        for s in 0..ns {
            a[k * ns + s] = w * (T::one() + scale * (ex * up[s] + ey * vp[s]));
        }
    }
    a
}

fn check_field<T: Real>(f: &Field<T>, p: &D2Q5Params<T>, what: &'static str) -> Result<()> {
    if f.values.len() != p.m * p.m {
        return Err(Error::Dimension {
            context: what,
            expected: p.m * p.m,
            got: f.values.len(),
        });
    }
    if !f.is_finite() {
        return Err(Error::Invalid(format!("non-finite values in {what}")));
    }
    Ok(())
}

fn vorticity_impl<T: Real>(
    omega: &Field<T>,
    u: &Field<T>,
    v: &Field<T>,
    psi: &Field<T>,
    p: &D2Q5Params<T>,
    diag: &mut CollisionDiag<T>,
    step: usize,
    observer: &mut dyn FnMut(&StepRecord<'_, T>),
) -> Result<Field<T>> {
    p.validate()?;
    for (f, what) in [(omega, "vorticity"), (u, "u velocity"), (v, "v velocity"), (psi, "stream function")] {
        check_field(f, p, what)?;
    }
    let grid = p.grid();
    diag.relax(equilibrium_coeffs_d2q5(u, v, p), p.vorticity_relaxation, p.clip_bound)?;
    let input = p.pad(&omega.values);
    let ns = input.len();

    let readout = if input.iter().all(|&x| x == T::zero()) {
        vec![T::zero(); ns]
    } else {
        let mut full = vec![T::zero(); (1 << N_LINK_QUBITS) * ns];
        full[..5 * ns].copy_from_slice(&diag.d);
        let blocks = (0..5)
            .map(|k| SectorBlock {
                ancilla: 0,
                link: k,
                values: &input[..],
            })
            .collect();
        run_pass(CircuitPass {
            layout: p.vorticity_layout(),
            blocks,
            diagonal: full,
            directions: &DIRECTIONS,
            summed_ancillas: Vec::new(),
        })?
    };

    let mut out = p.crop(&readout, omega.time + p.dt);
    // Rescale to the incoming physical-lattice total. Skipped when either
    // total is negligible, which covers the quiescent start.
    let before = omega.sum();
    let after = out.sum();
    let floor = T::lit(1e-12) * omega.max_abs().max(T::one());
    if before.abs() > floor && after.abs() > floor {
        let s = before / after;
        for x in &mut out.values {
            *x *= s;
        }
    }
    apply_thom_boundary(&mut out, psi, &grid, p.lid_speed);
    let out_padded = p.pad(&out.values);
    observer(&StepRecord {
        kind: CircuitKind::Vorticity,
        step,
        input: &input,
        diagonal: &diag.d,
        source: None,
        readout: &readout,
        output: &out_padded,
    });
    Ok(out)
}

fn stream_impl<T: Real>(
    omega: &Field<T>,
    psi: &Field<T>,
    p: &D2Q5Params<T>,
    step: usize,
    observer: &mut dyn FnMut(&StepRecord<'_, T>),
) -> Result<Field<T>> {
    p.validate()?;
    check_field(omega, p, "vorticity")?;
    check_field(psi, p, "stream function")?;
    let input = p.pad(&psi.values);
    let source = p.pad(&omega.values);
    let ns = input.len();
    let links = 1 << N_LINK_QUBITS;
    let sigma = p.source_coefficient();
    let mut weights = vec![T::zero(); links * ns];
    for (k, &w) in D2Q5_WEIGHTS.iter().enumerate() {
        weights[k * ns..(k + 1) * ns].fill(T::lit(w));
    }

    let psi_zero = input.iter().all(|&x| x == T::zero());
    let src_zero = source.iter().all(|&x| x == T::zero());
    let readout = if psi_zero && src_zero {
        vec![T::zero(); ns]
    } else {
        // Diagonal over (slot, link, site): slot 0 streams psi with the
        // weights, slot 1 carries sigma * omega in the rest sector only.
        let mut full = weights.clone();
        full.resize(2 * links * ns, T::zero());
        full[links * ns..links * ns + ns].fill(sigma);
        let mut blocks: Vec<SectorBlock<'_, T>> = Vec::with_capacity(6);
        if !psi_zero {
            blocks.extend((0..5).map(|k| SectorBlock {
                ancilla: 0,
                link: k,
                values: &input[..],
            }));
        }
        if !src_zero {
            blocks.push(SectorBlock {
                ancilla: 2,
                link: 0,
                values: &source[..],
            });
        }
        run_pass(CircuitPass {
            layout: p.stream_layout(),
            blocks,
            diagonal: full,
            directions: &DIRECTIONS,
            summed_ancillas: vec![1],
        })?
    };

    let mut out = p.crop(&readout, psi.time + p.dt);
    let m = p.m;
    for i in 0..m {
        out.set(i, 0, T::zero());
        out.set(i, m - 1, T::zero());
        out.set(0, i, T::zero());
        out.set(m - 1, i, T::zero());
    }
    let out_padded = p.pad(&out.values);
    observer(&StepRecord {
        kind: CircuitKind::StreamFunction,
        step,
        input: &input,
        diagonal: &weights,
        source: Some((&source, sigma)),
        readout: &readout,
        output: &out_padded,
    });
    Ok(out)
}

/// One vorticity collision-streaming step: relax `diag` toward the
/// equilibrium for `(u, v)`, run the circuit, rescale to the incoming total,
/// then overwrite the walls with Thom values from `psi`.
pub fn qlbm_vorticity_step<T: Real>(
    omega: &Field<T>,
    u: &Field<T>,
    v: &Field<T>,
    psi: &Field<T>,
    p: &D2Q5Params<T>,
    diag: &mut CollisionDiag<T>,
) -> Result<Field<T>> {
    vorticity_impl(omega, u, v, psi, p, diag, 0, &mut |_| {})
}

/// One stream-function sweep `psi <- sum_k w_k S_k psi + sigma omega`
/// with `psi = 0` enforced on the walls afterwards.
pub fn qlbm_stream_step<T: Real>(omega: &Field<T>, psi: &Field<T>, p: &D2Q5Params<T>) -> Result<Field<T>> {
    stream_impl(omega, psi, p, 0, &mut |_| {})
}

#[derive(Debug, Clone)]
pub struct LfCavityRun<T> {
    pub snapshots: Vec<CavitySnapshot<T>>,
    pub steps: usize,
}

/// Runs `round(t_end / dt)` steps from rest. Each step sweeps the stream
/// function once, recovers velocities, then advances vorticity. The initial
/// vorticity carries the Thom lid value.
pub fn qlbm_cavity_solve<T: Real>(
    p: &D2Q5Params<T>,
    snapshot_times: &[T],
    observer: &mut dyn FnMut(&StepRecord<'_, T>),
) -> Result<LfCavityRun<T>> {
    p.validate()?;
    check_sorted_times(snapshot_times, p.t_end)?;
    let grid = p.grid();
    let n_steps = (p.t_end / p.dt).round().to_usize().unwrap_or(0);
    let wanted: Vec<usize> = snapshot_times.iter().map(|&t| nearest_step(t, p.dt, n_steps)).collect();

    let mut psi = Field::zeros_2d(&grid, T::zero());
    let mut omega = Field::zeros_2d(&grid, T::zero());
    apply_thom_boundary(&mut omega, &psi, &grid, p.lid_speed);
    let (mut u, mut v) = velocity_from_streamfunction(&psi, &grid, p.lid_speed);
    let mut diag = CollisionDiag::new();
    let mut run = LfCavityRun {
        snapshots: Vec::with_capacity(wanted.len()),
        steps: n_steps,
    };
    let mut w = 0;
    for step in 0..=n_steps {
        if step > 0 {
            let t = T::from_usize_lossy(step) * p.dt;
            psi = stream_impl(&omega, &psi, p, step, observer)?;
            psi.time = t;
            (u, v) = velocity_from_streamfunction(&psi, &grid, p.lid_speed);
            omega = vorticity_impl(&omega, &u, &v, &psi, p, &mut diag, step, observer)?;
            omega.time = t;
            if !omega.is_finite() || !psi.is_finite() {
                return Err(Error::Diverged {
                    step,
                    quantity: "lattice vorticity",
                });
            }
        }
        while w < wanted.len() && wanted[w] == step {
            run.snapshots.push(CavitySnapshot {
                omega: omega.clone(),
                psi: psi.clone(),
                u: u.clone(),
                v: v.clone(),
            });
            w += 1;
        }
    }
    Ok(run)
}
