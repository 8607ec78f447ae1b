//! Minimal statevector emulator with exactly the gates the lattice circuits need.
//!
//! Qubit numbering: lattice qubits are least significant (axis 0 lowest),
//! then the link register, then the ancilla register. A basis index is
//! `((ancilla << n_link) | link) << n_lattice | site`.

use std::io::Write;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Desk-scale cap on the total register width.
pub const MAX_QUBITS: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterLayout {
    pub n_ancilla: usize,
    pub n_link: usize,
    /// Qubits per lattice axis; axis 0 occupies the lowest bits.
    pub lattice_axes: Vec<usize>,
}

impl RegisterLayout {
    pub fn new(n_ancilla: usize, n_link: usize, lattice_axes: Vec<usize>) -> Result<Self> {
        let layout = Self {
            n_ancilla,
            n_link,
            lattice_axes,
        };
        if layout.lattice_axes.is_empty() {
            return Err(Error::Invalid("lattice register needs at least one axis".into()));
        }
        if layout.total_qubits() > MAX_QUBITS {
            return Err(Error::Invalid(format!(
                "{} qubits exceeds the {MAX_QUBITS}-qubit cap",
                layout.total_qubits()
            )));
        }
        Ok(layout)
    }

    pub fn n_lattice(&self) -> usize {
        self.lattice_axes.iter().sum()
    }

    pub fn total_qubits(&self) -> usize {
        self.n_ancilla + self.n_link + self.n_lattice()
    }

    pub fn dim(&self) -> usize {
        1 << self.total_qubits()
    }

    pub fn n_sites(&self) -> usize {
        1 << self.n_lattice()
    }

    pub fn n_link_states(&self) -> usize {
        1 << self.n_link
    }

    pub fn n_ancilla_states(&self) -> usize {
        1 << self.n_ancilla
    }

    /// Global index of link qubit `i`.
    pub fn link_qubit(&self, i: usize) -> usize {
        self.n_lattice() + i
    }

    /// Global index of ancilla qubit `i`.
    pub fn ancilla_qubit(&self, i: usize) -> usize {
        self.n_lattice() + self.n_link + i
    }

    #[inline]
    pub fn index(&self, ancilla: usize, link: usize, site: usize) -> usize {
        (((ancilla << self.n_link) | link) << self.n_lattice()) | site
    }

    /// Bit offset of lattice axis `axis`.
    fn axis_offset(&self, axis: usize) -> usize {
        self.lattice_axes[..axis].iter().sum()
    }
}

/// Diagonal operator over the index space left after removing one control qubit.
/// With a single ancilla this is the (link, lattice) space.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalOp<T> {
    pub entries: Vec<Complex<T>>,
}

impl<T: Real> DiagonalOp<T> {
    pub fn new(entries: Vec<Complex<T>>) -> Result<Self> {
        if entries.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Invalid("diagonal operator has non-finite entries".into()));
        }
        Ok(Self { entries })
    }

    pub fn from_real(entries: &[T]) -> Result<Self> {
        Self::new(entries.iter().map(|&r| Complex::new(r, T::zero())).collect())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Direction of a cyclic lattice shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shift {
    Plus,
    Minus,
}

/// Real data destined for one `(ancilla, link)` sector.
#[derive(Debug, Clone, Copy)]
pub struct SectorBlock<'a, T> {
    pub ancilla: usize,
    pub link: usize,
    pub values: &'a [T],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector<T> {
    amps: Vec<Complex<T>>,
    layout: RegisterLayout,
}

impl<T: Real> Statevector<T> {
    pub fn zeros(layout: RegisterLayout) -> Self {
        Self {
            amps: vec![Complex::new(T::zero(), T::zero()); layout.dim()],
            layout,
        }
    }

    pub fn from_amplitudes(layout: RegisterLayout, amps: Vec<Complex<T>>) -> Result<Self> {
        if amps.len() != layout.dim() {
            return Err(Error::Dimension {
                context: "statevector amplitudes",
                expected: layout.dim(),
                got: amps.len(),
            });
        }
        Ok(Self { amps, layout })
    }

    /// Loads real blocks into their sectors and normalizes the whole state.
    /// Returns the state and the 2-norm that was divided out.
    pub fn prepare_amplitudes(layout: RegisterLayout, blocks: &[SectorBlock<'_, T>]) -> Result<(Self, T)> {
        let mut sv = Self::zeros(layout);
        let n_sites = sv.layout.n_sites();
        for b in blocks {
            if b.ancilla >= sv.layout.n_ancilla_states() || b.link >= sv.layout.n_link_states() {
                return Err(Error::Invalid(format!(
                    "sector (ancilla {}, link {}) outside the register",
                    b.ancilla, b.link
                )));
            }
            if b.values.len() > n_sites {
                return Err(Error::Dimension {
                    context: "sector block",
                    expected: n_sites,
                    got: b.values.len(),
                });
            }
            let base = sv.layout.index(b.ancilla, b.link, 0);
            for (s, &v) in b.values.iter().enumerate() {
                sv.amps[base + s] = Complex::new(v, T::zero());
            }
        }
        let norm = sv.norm();
        if !(norm > T::zero()) {
            return Err(Error::ZeroNorm);
        }
        let inv = T::one() / norm;
        for a in &mut sv.amps {
            *a = *a * inv;
        }
        Ok((sv, norm))
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        let total = self.layout.total_qubits();
        if q >= total {
            return Err(Error::QubitOutOfRange { index: q, total });
        }
        Ok(())
    }

    pub fn hadamard(&mut self, qubit: usize) -> Result<()> {
        self.check_qubit(qubit)?;
        let s = T::FRAC_1_SQRT_2();
        let stride = 1usize << qubit;
        for block in self.amps.chunks_mut(stride << 1) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = (x + y) * s;
                *b = (x - y) * s;
            }
        }
        Ok(())
    }

    /// Multiplies every amplitude whose `control` ancilla bit equals `value`
    /// by the entry of `d` addressed by the index with that bit removed.
    pub fn apply_controlled_diagonal(&mut self, control: usize, value: bool, d: &DiagonalOp<T>) -> Result<()> {
        if control >= self.layout.n_ancilla {
            return Err(Error::Invalid(format!(
                "control ancilla {control} outside a {}-qubit ancilla register",
                self.layout.n_ancilla
            )));
        }
        let expected = self.layout.dim() >> 1;
        if d.len() != expected {
            return Err(Error::Dimension {
                context: "controlled diagonal",
                expected,
                got: d.len(),
            });
        }
        let q = self.layout.ancilla_qubit(control);
        let low_mask = (1usize << q) - 1;
        let bit = usize::from(value) << q;
        for (reduced, &e) in d.entries.iter().enumerate() {
            let full = ((reduced & !low_mask) << 1) | bit | (reduced & low_mask);
            self.amps[full] = self.amps[full] * e;
        }
        Ok(())
    }

    /// Cyclically shifts the lattice coordinate along `axis` by one, for
    /// amplitudes whose link register equals `link_pattern`.
    pub fn apply_controlled_shift(&mut self, link_pattern: usize, axis: usize, direction: Shift) -> Result<()> {
        if link_pattern >= self.layout.n_link_states() {
            return Err(Error::Invalid(format!("link pattern {link_pattern} outside the link register")));
        }
        if axis >= self.layout.lattice_axes.len() {
            return Err(Error::Invalid(format!(
                "axis {axis} invalid for a {}-axis lattice",
                self.layout.lattice_axes.len()
            )));
        }
        let bits = self.layout.lattice_axes[axis];
        let off = self.layout.axis_offset(axis);
        let extent = 1usize << bits;
        let mask = (extent - 1) << off;
        let n_sites = self.layout.n_sites();
        let mut buf = vec![Complex::new(T::zero(), T::zero()); n_sites];
        for anc in 0..self.layout.n_ancilla_states() {
            let base = self.layout.index(anc, link_pattern, 0);
            let block = &mut self.amps[base..base + n_sites];
            for (site, &a) in block.iter().enumerate() {
                let c = (site & mask) >> off;
                let c2 = match direction {
                    Shift::Plus => (c + 1) & (extent - 1),
                    Shift::Minus => (c + extent - 1) & (extent - 1),
                };
                buf[(site & !mask) | (c2 << off)] = a;
            }
            block.copy_from_slice(&buf);
        }
        Ok(())
    }

    /// Real parts of one `(ancilla, link)` sector across all lattice sites.
    pub fn read_sector(&self, ancilla: usize, link_pattern: usize) -> Vec<T> {
        let n = self.layout.n_sites();
        if ancilla >= self.layout.n_ancilla_states() || link_pattern >= self.layout.n_link_states() {
            return vec![T::zero(); n];
        }
        let base = self.layout.index(ancilla, link_pattern, 0);
        self.amps[base..base + n].iter().map(|a| a.re).collect()
    }

    /// Debug dump: one `index,re,im` row per amplitude.
    pub fn dump_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "index,re,im")?;
        for (i, a) in self.amps.iter().enumerate() {
            writeln!(w, "{i},{:.16e},{:.16e}", a.re.to_f64_lossy(), a.im.to_f64_lossy())?;
        }
        Ok(())
    }
}
