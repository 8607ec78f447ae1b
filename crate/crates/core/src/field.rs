//! Uniform grids and the scalar fields that live on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// One-dimensional uniform grid on `[0, length)` (periodic) or `[0, length]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D<T> {
    pub n_points: usize,
    pub length: T,
    pub periodic: bool,
}

impl<T: Real> Grid1D<T> {
    pub fn periodic(n_points: usize, length: T) -> Result<Self> {
        if n_points == 0 || !(length > T::zero()) {
            return Err(Error::Invalid(format!(
                "periodic grid needs n_points > 0 and length > 0 (got {n_points}, {length})"
            )));
        }
        Ok(Self {
            n_points,
            length,
            periodic: true,
        })
    }

    pub fn spacing(&self) -> T {
        if self.periodic {
            self.length / T::from_usize_lossy(self.n_points)
        } else {
            self.length / T::from_usize_lossy(self.n_points - 1)
        }
    }

    pub fn coord(&self, j: usize) -> T {
        T::from_usize_lossy(j) * self.spacing()
    }

    pub fn coords(&self) -> Vec<T> {
        (0..self.n_points).map(|j| self.coord(j)).collect()
    }
}

/// Square `n x n` grid covering `[0,1]^2` with the boundary nodes included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid2D {
    pub n: usize,
}

impl Grid2D {
    pub fn new(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::Invalid(format!("2D grid needs n >= 3, got {n}")));
        }
        Ok(Self { n })
    }

    pub fn spacing<T: Real>(&self) -> T {
        T::one() / T::from_usize_lossy(self.n - 1)
    }

    pub fn coord<T: Real>(&self, i: usize) -> T {
        T::from_usize_lossy(i) * self.spacing::<T>()
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// Values on a grid at one instant. 2D fields are stored row-major with
/// `y` as the slow index: `values[j * nx + i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field<T> {
    pub values: Vec<T>,
    pub nx: usize,
    pub ny: usize,
    pub time: T,
}

impl<T: Real> Field<T> {
    pub fn new_1d(values: Vec<T>, time: T) -> Self {
        let nx = values.len();
        Self {
            values,
            nx,
            ny: 1,
            time,
        }
    }

    pub fn zeros_2d(grid: &Grid2D, time: T) -> Self {
        Self {
            values: vec![T::zero(); grid.len()],
            nx: grid.n,
            ny: grid.n,
            time,
        }
    }

    pub fn from_fn_2d(grid: &Grid2D, time: T, f: impl Fn(T, T) -> T) -> Self {
        let mut out = Self::zeros_2d(grid, time);
        for j in 0..grid.n {
            for i in 0..grid.n {
                out.values[grid.idx(i, j)] = f(grid.coord(i), grid.coord(j));
            }
        }
        out
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[j * self.nx + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.values[j * self.nx + i] = v;
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |m, v| if v.abs() > m { v.abs() } else { m })
    }

    pub fn min_max(&self) -> (T, T) {
        self.values.iter().fold(
            (T::infinity(), T::neg_infinity()),
            |(lo, hi), &v| (lo.min(v), hi.max(v)),
        )
    }

    pub fn sum(&self) -> T {
        self.values.iter().copied().sum()
    }
}

/// Index of the completed step nearest to `t` for a fixed step `dt`,
/// capped at `max_step`.
pub fn nearest_step<T: Real>(t: T, dt: T, max_step: usize) -> usize {
    let s = (t / dt).round().to_usize().unwrap_or(0);
    s.min(max_step)
}

pub(crate) fn check_sorted_times<T: Real>(times: &[T], t_end: T) -> Result<()> {
    for w in times.windows(2) {
        if w[1] < w[0] {
            return Err(Error::Invalid("snapshot times must be sorted".into()));
        }
    }
    if let (Some(&first), Some(&last)) = (times.first(), times.last()) {
        let slack = T::lit(1e-12) * (T::one() + t_end.abs());
        if first < -slack || last > t_end + slack {
            return Err(Error::Invalid(format!(
                "snapshot times must lie in [0, {t_end}] (got {first}..{last})"
            )));
        }
    }
    Ok(())
}
