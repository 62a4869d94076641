//! Estimator averages over every possible minibatch draw.

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::estimator::{VrGradientParts, VrState};
use crate::minibatch::MinibatchIndexSet;
use crate::model::{stochastic_gradient, GradientModel};
use crate::param::{axpy, ParamVector};

use super::variance::{binomial, ENUMERATION_LIMIT};

fn guard(count: u128) -> Result<()> {
    if count > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            count,
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok(())
}

fn subsets(population: usize, n: usize) -> impl Iterator<Item = Result<MinibatchIndexSet>> {
    (0..population)
        .combinations(n)
        .map(move |ix| MinibatchIndexSet::new(ix, population))
}

/// Mean of the plain size-`n` estimator over all `C(N, n)` batches.
pub fn exhaustive_plain_mean<M: GradientModel + ?Sized>(model: &M, theta: &ParamVector, n: usize) -> Result<Vec<f64>> {
    let population = model.num_data();
    if n == 0 || n > population {
        return Err(Error::invalid(format!("minibatch size {n} outside 1..={population}")));
    }
    let count = binomial(population, n);
    guard(count)?;
    let mut acc = vec![0.0; model.dim()];
    for batch in subsets(population, n) {
        axpy(&mut acc, 1.0, &stochastic_gradient(model, theta, &batch?)?);
    }
    Ok(acc.into_iter().map(|v| v / count as f64).collect())
}

/// Per-term means of the variance-reduced estimator over all `(π, π̃)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct VrPartsMean {
    pub anchor_term: Vec<f64>,
    pub prior: Vec<f64>,
    pub correction: Vec<f64>,
    pub total: Vec<f64>,
}

/// [`exhaustive_vr_mean_with`] using the crate's own estimator.
pub fn exhaustive_vr_mean<M: GradientModel + ?Sized>(
    model: &M,
    theta: &ParamVector,
    anchor: &ParamVector,
    n1: usize,
    n2: usize,
) -> Result<VrPartsMean> {
    exhaustive_vr_mean_with(model, theta, anchor, n1, n2, |state, theta, batch| {
        state.gradient_parts(model, theta, batch)
    })
}

/// Averages `parts(state_π, θ, π̃)` over every anchor batch `π` of size `n1` and
/// correction batch `π̃` of size `n2`, with the anchor at `anchor`.
///
/// `parts` stands in for the estimator so that altered implementations can be
/// checked against the same exact expectations.
pub fn exhaustive_vr_mean_with<M, F>(
    model: &M,
    theta: &ParamVector,
    anchor: &ParamVector,
    n1: usize,
    n2: usize,
    parts: F,
) -> Result<VrPartsMean>
where
    M: GradientModel + ?Sized,
    F: Fn(&VrState, &ParamVector, &MinibatchIndexSet) -> Result<VrGradientParts>,
{
    let population = model.num_data();
    if n1 == 0 || n2 == 0 || n1 > population || n2 > population {
        return Err(Error::invalid(format!(
            "batch sizes n1={n1}, n2={n2} outside 1..={population}"
        )));
    }
    let (k1, k2) = (binomial(population, n1), binomial(population, n2));
    guard(k1.saturating_mul(k2))?;
    let correction_batches: Vec<MinibatchIndexSet> = subsets(population, n2).collect::<Result<_>>()?;
    let d = model.dim();
    let mut mean = VrPartsMean {
        anchor_term: vec![0.0; d],
        prior: vec![0.0; d],
        correction: vec![0.0; d],
        total: vec![0.0; d],
    };
    for pi in subsets(population, n1) {
        let state = VrState::from_anchor_batch(model, anchor, &pi?)?;
        for batch in &correction_batches {
            let p = parts(&state, theta, batch)?;
            axpy(&mut mean.anchor_term, 1.0, &p.anchor_term);
            axpy(&mut mean.prior, 1.0, &p.prior);
            axpy(&mut mean.correction, 1.0, &p.correction);
            axpy(&mut mean.total, 1.0, &p.total()?);
        }
    }
    let pairs = (k1 * k2) as f64;
    for v in [&mut mean.anchor_term, &mut mean.prior, &mut mean.correction, &mut mean.total] {
        v.iter_mut().for_each(|x| *x /= pairs);
    }
    Ok(mean)
}
