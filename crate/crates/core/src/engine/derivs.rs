//! Temperature and its input derivatives through the hard-BC wrapper.

use super::params::ParamVector;
use crate::model::{InputDerivs, PinnModel};
use crate::Result;

/// `T`, `∂T/∂t`, `∂T/∂z`, `∂²T/∂z²` at `(z, t)` under `params`.
pub fn value_and_input_derivs(model: &PinnModel, params: &ParamVector, z: f64, t: f64) -> Result<InputDerivs> {
    Ok(model.input_derivatives_with(params.values(), &[(z, t)])?[0])
}

pub fn value_and_input_derivs_batch(
    model: &PinnModel,
    params: &ParamVector,
    points: &[(f64, f64)],
) -> Result<Vec<InputDerivs>> {
    model.input_derivatives_with(params.values(), points)
}
