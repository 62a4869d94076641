//! Dense parameter vectors.

use std::ops::{Deref, Index};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite point in parameter space.
///
/// Construction rejects NaN and infinite entries, so any `ParamVector` in
/// circulation satisfies the finiteness invariant. Arithmetic that may
/// overflow goes through the checked helpers below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "parameter coordinate {k} is not finite ({})",
                values[k]
            )));
        }
        Ok(ParamVector(values))
    }

    pub fn zeros(dim: usize) -> Self {
        ParamVector(vec![0.0; dim])
    }

    pub fn scalar(value: f64) -> Result<Self> {
        Self::new(vec![value])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.0, &self.0)
    }

    pub(crate) fn ensure_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::invalid(format!(
                "parameter has dimension {} but the model expects {dim}",
                self.dim()
            )));
        }
        Ok(())
    }

    /// Wraps values that the caller has already checked to be finite.
    pub(crate) fn from_finite(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        ParamVector(values)
    }
}

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for ParamVector {
    type Output = f64;

    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

impl TryFrom<Vec<f64>> for ParamVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        ParamVector::new(values)
    }
}

impl From<ParamVector> for Vec<f64> {
    fn from(p: ParamVector) -> Vec<f64> {
        p.0
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `acc += weight * x`
pub(crate) fn axpy(acc: &mut [f64], weight: f64, x: &[f64]) {
    for (a, v) in acc.iter_mut().zip(x) {
        *a += weight * v;
    }
}
