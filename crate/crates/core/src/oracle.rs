//! Independent reference implementations used by the acceptance suite:
//! dense matrices for every statevector gate and a plain-array replay of
//! each recorded lattice step.

use num_complex::Complex;

use crate::qlbm::{CircuitKind, StepRecord, D1Q3_VELOCITIES, D2Q5_VELOCITIES};
use crate::statevector::{RegisterLayout, Shift};

pub type C64 = Complex<f64>;

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub n: usize,
    pub m: Vec<C64>,
}

impl Dense {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            m: vec![C64::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut d = Self::zeros(n);
        for i in 0..n {
            d.m[i * n + i] = C64::new(1.0, 0.0);
        }
        d
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        (0..self.n)
            .map(|r| (0..self.n).map(|c| self.m[r * self.n + c] * v[c]).sum())
            .collect()
    }
}

fn bit(i: usize, q: usize) -> usize {
    (i >> q) & 1
}

/// Hadamard on qubit `q` of an `n_qubits` register.
pub fn hadamard(n_qubits: usize, q: usize) -> Dense {
    let dim = 1 << n_qubits;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut d = Dense::zeros(dim);
    for r in 0..dim {
        for c in 0..dim {
            let same_elsewhere = (0..n_qubits).filter(|&b| b != q).all(|b| bit(r, b) == bit(c, b));
            if same_elsewhere {
                let sign = if bit(r, q) == 1 && bit(c, q) == 1 { -1.0 } else { 1.0 };
                d.m[r * dim + c] = C64::new(sign * s, 0.0);
            }
        }
    }
    d
}

/// Diagonal acting where ancilla `control` equals `value`; entries are
/// indexed by the basis index with the control bit deleted.
pub fn controlled_diagonal(layout: &RegisterLayout, control: usize, value: bool, entries: &[C64]) -> Dense {
    let n = layout.total_qubits();
    let q = layout.ancilla_qubit(control);
    let dim = 1 << n;
    let mut d = Dense::identity(dim);
    for i in 0..dim {
        if bit(i, q) != usize::from(value) {
            continue;
        }
        let mut reduced = 0;
        let mut out_bit = 0;
        for b in 0..n {
            if b == q {
                continue;
            }
            reduced |= bit(i, b) << out_bit;
            out_bit += 1;
        }
        d.m[i * dim + i] = entries[reduced];
    }
    d
}

/// Permutation moving lattice coordinate `axis` by one (periodically) on
/// the sector whose link register equals `link`.
pub fn controlled_shift(layout: &RegisterLayout, link: usize, axis: usize, dir: Shift) -> Dense {
    let dim = layout.dim();
    let sites = layout.n_sites();
    let extents: Vec<usize> = layout.lattice_axes.iter().map(|&b| 1usize << b).collect();
    let mut d = Dense::zeros(dim);
    for src in 0..dim {
        let site = src % sites;
        let rest = src / sites;
        let this_link = rest % layout.n_link_states();
        let dest = if this_link == link {
            let mut coords = Vec::with_capacity(extents.len());
            let mut s = site;
            for &e in &extents {
                coords.push(s % e);
                s /= e;
            }
            let e = extents[axis];
            coords[axis] = match dir {
                Shift::Plus => (coords[axis] + 1) % e,
                Shift::Minus => (coords[axis] + e - 1) % e,
            };
            let mut new_site = 0;
            for (a, &e) in extents.iter().enumerate().rev() {
                new_site = new_site * e + coords[a];
            }
            rest * sites + new_site
        } else {
            src
        };
        d.m[dest * dim + src] = C64::new(1.0, 0.0);
    }
    d
}

/// Collide-and-stream with plain arrays: `sum_k S_k (d_k * f) + sigma * g`
/// on a periodic `nx x ny` lattice.
pub fn classical_collide_stream(
    input: &[f64],
    diagonal: &[f64],
    velocities: &[(i32, i32)],
    nx: usize,
    ny: usize,
    source: Option<(&[f64], f64)>,
) -> Vec<f64> {
    let ns = nx * ny;
    let mut out = vec![0.0; ns];
    for (k, &(ex, ey)) in velocities.iter().enumerate() {
        for y in 0..ny {
            for x in 0..nx {
                let s = y * nx + x;
                let tx = (x as i64 + ex as i64).rem_euclid(nx as i64) as usize;
                let ty = (y as i64 + ey as i64).rem_euclid(ny as i64) as usize;
                out[ty * nx + tx] += diagonal[k * ns + s] * input[s];
            }
        }
    }
    if let Some((g, sigma)) = source {
        for (o, v) in out.iter_mut().zip(g) {
            *o += sigma * v;
        }
    }
    out
}

/// Recomputes a recorded step classically and returns the largest
/// per-site deviation from the emulated readout.
pub fn record_deviation(rec: &StepRecord<'_, f64>) -> f64 {
    let ns = rec.input.len();
    let (velocities, nx, ny): (Vec<(i32, i32)>, usize, usize) = match rec.kind {
        CircuitKind::BurgersD1Q3 => (D1Q3_VELOCITIES.iter().map(|&e| (e, 0)).collect(), ns, 1),
        CircuitKind::Vorticity | CircuitKind::StreamFunction => {
            let side = (ns as f64).sqrt().round() as usize;
            (D2Q5_VELOCITIES.to_vec(), side, side)
        }
    };
    let want = classical_collide_stream(rec.input, rec.diagonal, &velocities, nx, ny, rec.source);
    want.iter()
        .zip(rec.readout)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}
