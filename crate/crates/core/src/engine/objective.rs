//! Scalar objectives over a flat parameter vector.

use super::params::ParamVector;
use crate::{Error, Result};

/// A scalar loss with an analytic gradient.
pub trait Objective {
    fn value(&self, p: &[f64]) -> Result<f64>;

    /// Loss at `p` and its gradient, same length as `p`.
    fn value_and_gradient(&self, p: &[f64]) -> Result<(f64, Vec<f64>)>;
}

/// Gradient of `loss` at `params`, rejecting non-finite values.
pub fn loss_gradient<O: Objective + ?Sized>(loss: &O, params: &ParamVector) -> Result<Vec<f64>> {
    let (value, grad) = loss.value_and_gradient(params.values())?;
    if !value.is_finite() {
        return Err(Error::NonFiniteLoss(format!("{value}")));
    }
    if let Some(index) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient { index });
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct HalfSquare;

    impl Objective for HalfSquare {
        fn value(&self, p: &[f64]) -> Result<f64> {
            Ok(0.5 * p.iter().map(|x| x * x).sum::<f64>())
        }

        fn value_and_gradient(&self, p: &[f64]) -> Result<(f64, Vec<f64>)> {
            Ok((self.value(p)?, p.to_vec()))
        }
    }

    struct Constant(f64);

    impl Objective for Constant {
        fn value(&self, _: &[f64]) -> Result<f64> {
            Ok(self.0)
        }

        fn value_and_gradient(&self, p: &[f64]) -> Result<(f64, Vec<f64>)> {
            Ok((self.0, vec![0.0; p.len()]))
        }
    }

    struct BadGrad;

    impl Objective for BadGrad {
        fn value(&self, _: &[f64]) -> Result<f64> {
            Ok(1.0)
        }

        fn value_and_gradient(&self, p: &[f64]) -> Result<(f64, Vec<f64>)> {
            let mut g = vec![0.0; p.len()];
            g[1] = f64::NAN;
            Ok((1.0, g))
        }
    }

    fn params(v: &[f64]) -> ParamVector {
        let mut p = ParamVector::with_groups(&[("x", 1, v.len())]);
        p.values_mut().copy_from_slice(v);
        p
    }

    #[test]
    fn quadratic_gradient_is_identity() {
        let p = params(&[1.0, -2.0, 0.5]);
        assert_eq!(loss_gradient(&HalfSquare, &p).unwrap(), vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn constant_has_zero_gradient() {
        let p = params(&[3.0, 4.0]);
        assert_eq!(loss_gradient(&Constant(7.0), &p).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn non_finite_reported() {
        let p = params(&[0.0, 0.0, 0.0]);
        assert!(matches!(loss_gradient(&BadGrad, &p), Err(Error::NonFiniteGradient { index: 1 })));
        assert!(matches!(loss_gradient(&Constant(f64::INFINITY), &p), Err(Error::NonFiniteLoss(_))));
    }
}
