use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Adam with bias correction over a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState<T> {
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub step: u64,
    m: Vec<T>,
    v: Vec<T>,
}

impl<T: Real> AdamState<T> {
    pub fn new(n_params: usize, learning_rate: T) -> Self {
        Self {
            learning_rate,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
            step: 0,
            m: vec![T::zero(); n_params],
            v: vec![T::zero(); n_params],
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// Applies one update. Nothing is modified if any gradient is
    /// non-finite; the error names the offending parameter via `path`.
    pub fn step(&mut self, params: &mut [T], grads: &[T], path: impl Fn(usize) -> String) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Dimension {
                context: "Adam parameter vector",
                expected: self.m.len(),
                got: if params.len() != self.m.len() { params.len() } else { grads.len() },
            });
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { path: path(i) });
        }
        self.step += 1;
        let t = i32::try_from(self.step).unwrap_or(i32::MAX);
        let c1 = T::one() - self.beta1.powi(t);
        let c2 = T::one() - self.beta2.powi(t);
        let (b1, b2) = (self.beta1, self.beta2);
        for ((p, &g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = b1 * *m + (T::one() - b1) * g;
            *v = b2 * *v + (T::one() - b2) * g * g;
            let mhat = *m / c1;
            let vhat = *v / c2;
            *p -= self.learning_rate * mhat / (vhat.sqrt() + self.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut a = AdamState::<f64>::new(3, 1e-3);
        let mut p = vec![1.0, -2.0, 0.5];
        a.step(&mut p, &[0.0; 3], |i| i.to_string()).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
        assert_eq!(a.step, 1);
    }

    #[test]
    fn first_step_is_learning_rate() {
        let mut a = AdamState::<f64>::new(1, 1e-3);
        let mut p = vec![0.0];
        a.step(&mut p, &[1.0], |i| i.to_string()).unwrap();
        assert!((p[0] + 1e-3).abs() < 1e-10);
    }

    #[test]
    fn quadratic_bowl_converges() {
        let mut a = AdamState::<f64>::new(1, 1e-3);
        let mut w = vec![2.5];
        for _ in 0..2000 {
            let g = 2.0 * (w[0] - 3.0);
            a.step(&mut w, &[g], |i| i.to_string()).unwrap();
        }
        assert!((w[0] - 3.0).abs() < 1e-3, "{}", w[0]);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut a = AdamState::<f64>::new(2, 1e-3);
        let mut p = vec![0.0, 0.0];
        let err = a.step(&mut p, &[0.0, f64::NAN], |i| format!("w{i}")).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { ref path } if path == "w1"));
        assert_eq!(p, vec![0.0, 0.0]);
        assert_eq!(a.step, 0);
    }
}
