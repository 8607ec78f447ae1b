use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Uniform clamped B-spline on `[-1, 1]` with `grid_size` intervals and
/// polynomial degree `degree`, giving `grid_size + degree` basis functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplineSpec {
    pub grid_size: usize,
    pub degree: usize,
    /// Evaluate outside `[-1, 1]` by continuing the end polynomial pieces
    /// instead of clamping the input. Only used by the affine head.
    pub extrapolate: bool,
}

/// Largest supported degree; bounds the per-input scratch arrays.
pub const MAX_DEGREE: usize = 7;

impl SplineSpec {
    pub fn new(grid_size: usize, degree: usize) -> Result<Self> {
        if grid_size == 0 || degree == 0 || degree > MAX_DEGREE {
            return Err(Error::Invalid(format!(
                "spline needs G >= 1 and 1 <= k <= {MAX_DEGREE}, got G={grid_size}, k={degree}"
            )));
        }
        Ok(Self {
            grid_size,
            degree,
            extrapolate: false,
        })
    }

    /// Degree 1 over a single interval evaluated without clamping: an exact
    /// affine function of its input.
    pub fn affine() -> Self {
        Self {
            grid_size: 1,
            degree: 1,
            extrapolate: true,
        }
    }

    pub fn n_basis(&self) -> usize {
        self.grid_size + self.degree
    }

    pub fn knots<T: Real>(&self) -> Vec<T> {
        let g = self.grid_size;
        let mut u = Vec::with_capacity(g + 2 * self.degree + 1);
        u.extend(std::iter::repeat_n(-T::one(), self.degree));
        for i in 0..=g {
            u.push(T::lit(-1.0 + 2.0 * i as f64 / g as f64));
        }
        u.extend(std::iter::repeat_n(T::one(), self.degree));
        u
    }

    #[inline]
    fn knot<T: Real>(&self, i: usize) -> T {
        let k = self.degree;
        let g = self.grid_size;
        if i <= k {
            -T::one()
        } else if i >= k + g {
            T::one()
        } else {
            T::lit(-1.0 + 2.0 * (i - k) as f64 / g as f64)
        }
    }

    #[inline]
    pub fn prepare<T: Real>(&self, x: T) -> T {
        if self.extrapolate {
            x
        } else {
            x.max(-T::one()).min(T::one())
        }
    }

    /// Knot span `s` with `u_s <= x < u_{s+1}` restricted to the non-empty
    /// spans; the right end `x = 1` belongs to the last span.
    #[inline]
    pub fn span<T: Real>(&self, x: T) -> usize {
        let g = self.grid_size;
        let pos = ((x + T::one()) * T::lit(0.5) * T::from_usize_lossy(g)).floor();
        let cell = if pos <= T::zero() {
            0
        } else {
            pos.to_usize().unwrap_or(g - 1).min(g - 1)
        };
        cell + self.degree
    }

    /// Writes the `degree + 1` basis functions that can be non-zero at `x`
    /// into `vals` (and their derivatives into `ders` when given) and returns
    /// the index of the first one. `x` must already be prepared.
    pub fn eval_nonzero<T: Real>(&self, x: T, vals: &mut [T], ders: Option<&mut [T]>) -> usize {
        let p = self.degree;
        let s = self.span(x);
        let mut left = [T::zero(); MAX_DEGREE + 1];
        let mut right = [T::zero(); MAX_DEGREE + 1];
        let mut lower = [T::zero(); MAX_DEGREE + 1];
        vals[0] = T::one();
        for j in 1..=p {
            if j == p {
                lower[..p].copy_from_slice(&vals[..p]);
            }
            left[j] = x - self.knot::<T>(s + 1 - j);
            right[j] = self.knot::<T>(s + j) - x;
            let mut saved = T::zero();
            for r in 0..j {
                let temp = vals[r] / (right[r + 1] + left[j - r]);
                vals[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            vals[j] = saved;
        }
        if let Some(d) = ders {
            // N'_{i,p} = p (N_{i,p-1} / (u_{i+p} - u_i) - N_{i+1,p-1} / (u_{i+p+1} - u_{i+1}))
            let pf = T::from_usize_lossy(p);
            let first = s - p;
            for r in 0..=p {
                let i = first + r;
                let mut acc = T::zero();
                if r >= 1 {
                    let den = self.knot::<T>(i + p) - self.knot::<T>(i);
                    if den != T::zero() {
                        acc += lower[r - 1] / den;
                    }
                }
                if r < p {
                    let den = self.knot::<T>(i + p + 1) - self.knot::<T>(i + 1);
                    if den != T::zero() {
                        acc -= lower[r] / den;
                    }
                }
                d[r] = pf * acc;
            }
        }
        s - p
    }
}

/// Dense basis vector of length `G + k` at `x` (clamped unless the spec
/// extrapolates).
pub fn bspline_basis<T: Real>(x: T, spec: &SplineSpec) -> Vec<T> {
    let mut out = vec![T::zero(); spec.n_basis()];
    let mut vals = [T::zero(); MAX_DEGREE + 1];
    let first = spec.eval_nonzero(spec.prepare(x), &mut vals, None);
    out[first..first + spec.degree + 1].copy_from_slice(&vals[..spec.degree + 1]);
    out
}
