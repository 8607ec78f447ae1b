use crate::error::{Error, Result};
use crate::scalar::Real;

/// `||pred - reference||_2 / ||reference||_2`.
pub fn relative_l2<T: Real>(pred: &[T], reference: &[T]) -> Result<T> {
    if pred.len() != reference.len() {
        return Err(Error::Dimension {
            context: "relative L2",
            expected: reference.len(),
            got: pred.len(),
        });
    }
    let den: T = reference.iter().map(|&r| r * r).sum();
    if den == T::zero() {
        return Err(Error::ZeroReference);
    }
    let num: T = pred.iter().zip(reference).map(|(&p, &r)| (p - r) * (p - r)).sum();
    Ok((num / den).sqrt())
}
