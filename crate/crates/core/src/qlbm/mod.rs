//! Low-fidelity quantum lattice-Boltzmann solvers emulated on [`crate::statevector`].
//!
//! Both lattices share one circuit shape: load the macroscopic field into
//! every populated link sector, realize the relaxed collision diagonal `D` on
//! the ancilla-zero block as `(C1 + C2) / 2`, stream with link-controlled
//! shifts, sum link sectors with Hadamards and read the rest sector back.
//! Known non-unitary factors are divided out in one scalar.

mod d1q3;
mod d2q5;

pub use d1q3::{
    equilibrium_coeffs_d1q3, qlbm_burgers_solve, qlbm_burgers_step, D1Q3Params, D1Q3_VELOCITIES, D1Q3_WEIGHTS,
};
pub use d2q5::{
    equilibrium_coeffs_d2q5, qlbm_cavity_solve, qlbm_stream_step, qlbm_vorticity_step, D2Q5Params, LfCavityRun,
    D2Q5_VELOCITIES, D2Q5_WEIGHTS,
};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::statevector::{DiagonalOp, RegisterLayout, SectorBlock, Shift, Statevector};

/// Lattice sound speed squared shared by D1Q3 and D2Q5.
pub const SOUND_SPEED_SQ: f64 = 1.0 / 3.0;

/// Collision diagonal state carried between time steps. Entries are stored
/// direction-major: `d[k * n_sites + j]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CollisionDiag<T> {
    pub a: Vec<T>,
    pub d: Vec<T>,
    pub d_prev: Option<Vec<T>>,
}

impl<T: Real> CollisionDiag<T> {
    pub fn new() -> Self {
        Self {
            a: Vec::new(),
            d: Vec::new(),
            d_prev: None,
        }
    }

    /// `D = (1 - w) D_prev + w A`, clipped to `[-clip, clip]`. On the first
    /// call `D_prev` is taken to be `A`. The result becomes the next `D_prev`.
    pub fn relax(&mut self, a: Vec<T>, rate: T, clip: T) -> Result<()> {
        let prev = match self.d_prev.take() {
            Some(p) if p.len() == a.len() => p,
            Some(p) => {
                return Err(Error::Dimension {
                    context: "previous collision diagonal",
                    expected: a.len(),
                    got: p.len(),
                })
            }
            None => a.clone(),
        };
        let keep = T::one() - rate;
        self.d = prev
            .iter()
            .zip(&a)
            .map(|(&p, &ai)| (keep * p + rate * ai).max(-clip).min(clip))
            .collect();
        self.a = a;
        self.d_prev = Some(self.d.clone());
        Ok(())
    }
}

/// Unimodular pair with `(c1 + c2) / 2 = d`.
#[derive(Debug, Clone, PartialEq)]
pub struct LcuPair<T> {
    pub c1: Vec<Complex<T>>,
    pub c2: Vec<Complex<T>>,
}

/// `C1,2 = D +/- i sqrt(I - D^2)` for a real diagonal with `|d| < 1`.
pub fn make_lcu<T: Real>(d: &[T]) -> Result<LcuPair<T>> {
    let mut c1 = Vec::with_capacity(d.len());
    let mut c2 = Vec::with_capacity(d.len());
    for (index, &x) in d.iter().enumerate() {
        if !x.is_finite() || x.abs() >= T::one() {
            return Err(Error::LcuDomain {
                index,
                value: x.abs().to_f64_lossy(),
            });
        }
        let s = (T::one() - x * x).sqrt();
        c1.push(Complex::new(x, s));
        c2.push(Complex::new(x, -s));
    }
    Ok(LcuPair { c1, c2 })
}

/// One streaming direction: the link pattern it occupies and the shifts
/// (axis, direction) applied to that sector.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Direction {
    pub link: usize,
    pub shift: Option<(usize, Shift)>,
}

/// Everything the emulated circuit needs for one collision-streaming pass.
pub(crate) struct CircuitPass<'a, T> {
    pub layout: RegisterLayout,
    /// Input blocks (ancilla value 0 for the LCU qubit is implied by the caller).
    pub blocks: Vec<SectorBlock<'a, T>>,
    /// Real diagonal over the index space without the LCU ancilla.
    pub diagonal: Vec<T>,
    pub directions: &'a [Direction],
    /// Ancilla qubits other than the LCU qubit that are summed by a Hadamard before readout.
    pub summed_ancillas: Vec<usize>,
}

/// Runs a pass and returns the rest-sector readout with all known factors
/// removed, so it is directly comparable with the classical update.
pub(crate) fn run_pass<T: Real>(pass: CircuitPass<'_, T>) -> Result<Vec<T>> {
    let lcu = make_lcu(&pass.diagonal)?;
    let (mut sv, norm) = Statevector::prepare_amplitudes(pass.layout.clone(), &pass.blocks)?;
    let anc = pass.layout.ancilla_qubit(0);
    sv.hadamard(anc)?;
    sv.apply_controlled_diagonal(0, false, &DiagonalOp::new(lcu.c1)?)?;
    sv.apply_controlled_diagonal(0, true, &DiagonalOp::new(lcu.c2)?)?;
    sv.hadamard(anc)?;
    for dir in pass.directions {
        if let Some((axis, shift)) = dir.shift {
            sv.apply_controlled_shift(dir.link, axis, shift)?;
        }
    }
    let mut scale = norm;
    let sqrt2 = T::SQRT_2();
    for &a in &pass.summed_ancillas {
        sv.hadamard(pass.layout.ancilla_qubit(a))?;
        scale *= sqrt2;
    }
    for l in 0..pass.layout.n_link {
        sv.hadamard(pass.layout.link_qubit(l))?;
        scale *= sqrt2;
    }
    Ok(sv.read_sector(0, 0).into_iter().map(|r| r * scale).collect())
}

/// Which emulated circuit produced a [`StepRecord`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CircuitKind {
    BurgersD1Q3,
    Vorticity,
    StreamFunction,
}

/// Per-step trace handed to solver observers, sufficient to recompute the
/// step with an independent classical update.
#[derive(Debug, Clone)]
pub struct StepRecord<'a, T> {
    pub kind: CircuitKind,
    pub step: usize,
    /// Macroscopic field loaded into every populated link sector, laid out
    /// over the full (possibly padded) lattice register.
    pub input: &'a [T],
    /// Relaxed, clipped collision diagonal, `d[k * n_sites + site]`.
    pub diagonal: &'a [T],
    /// Source field and its collision coefficient (stream-function circuit only).
    pub source: Option<(&'a [T], T)>,
    /// Readout with normalization factors removed, before any classical
    /// rescaling or boundary overwrite.
    pub readout: &'a [T],
    /// Field handed to the next step.
    pub output: &'a [T],
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lcu_of_zero_is_plus_minus_i() {
        let p = make_lcu(&[0.0f64]).unwrap();
        assert_eq!(p.c1[0], Complex::new(0.0, 1.0));
        assert_eq!(p.c2[0], Complex::new(0.0, -1.0));
    }

    #[test]
    fn lcu_three_four_five() {
        let p = make_lcu(&[0.6f64]).unwrap();
        assert!((p.c1[0] - Complex::new(0.6, 0.8)).norm() < 1e-15);
        assert!((p.c2[0] - Complex::new(0.6, -0.8)).norm() < 1e-15);
        assert!((p.c1[0].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lcu_rejects_out_of_domain() {
        assert!(matches!(make_lcu(&[0.2, 1.0f64]), Err(Error::LcuDomain { index: 1, .. })));
        assert!(make_lcu(&[-1.5f64]).is_err());
    }

    #[test]
    fn first_relaxation_uses_equilibrium() {
        let mut c = CollisionDiag::<f64>::new();
        c.relax(vec![0.2, 0.5], 1.7, 0.999).unwrap();
        assert!((c.d[0] - 0.2).abs() < 1e-15 && (c.d[1] - 0.5).abs() < 1e-15);
        c.relax(vec![0.4, 0.5], 0.5, 0.999).unwrap();
        assert!((c.d[0] - 0.3).abs() < 1e-15);
        c.relax(vec![3.0, -3.0], 1.0, 0.999).unwrap();
        assert_eq!(c.d, vec![0.999, -0.999]);
    }

    proptest! {
        #[test]
        fn lcu_reconstructs_and_is_unimodular(d in proptest::collection::vec(-0.999f64..0.999, 16)) {
            let p = make_lcu(&d).unwrap();
            for i in 0..16 {
                let avg = (p.c1[i] + p.c2[i]) * 0.5;
                prop_assert!((avg.re - d[i]).abs() <= 1e-14);
                prop_assert!(avg.im.abs() <= 1e-14);
                prop_assert!((p.c1[i].norm() - 1.0).abs() <= 1e-14);
                prop_assert!((p.c2[i].norm() - 1.0).abs() <= 1e-14);
            }
        }
    }
}
