//! The model contract and the exact / minibatch log-posterior gradients.
//!
//! Sign convention: every gradient in this crate is a gradient of the log
//! posterior (an ascent direction), `∇log p(θ) + Σᵢ ∇log p(dᵢ|θ)`. Langevin
//! steps therefore add `h·g`.

use crate::error::{Error, Result};
use crate::minibatch::MinibatchIndexSet;
use crate::param::{axpy, ParamVector};

/// A Bayesian model exposing closed-form per-datum gradients.
///
/// Implementations must be deterministic in `(θ, i)` and safe to call from
/// many threads at once.
pub trait GradientModel: Send + Sync {
    /// Parameter dimension `d`.
    fn dim(&self) -> usize;

    /// Number of data `N`.
    fn num_data(&self) -> usize;

    /// Writes `∇log p(θ)` into `out`.
    fn log_prior_grad_into(&self, theta: &[f64], out: &mut [f64]);

    /// Writes `∇log p(dᵢ|θ)` into `out`.
    fn datum_loglik_grad_into(&self, theta: &[f64], i: usize, out: &mut [f64]);

    /// `log p(θ)`, when the model can report it.
    fn log_prior(&self, _theta: &[f64]) -> Option<f64> {
        None
    }

    /// `log p(dᵢ|θ)`, when the model can report it.
    fn datum_loglik(&self, _theta: &[f64], _i: usize) -> Option<f64> {
        None
    }

    fn log_prior_grad(&self, theta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.log_prior_grad_into(theta, &mut out);
        out
    }

    fn datum_loglik_grad(&self, theta: &[f64], i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.datum_loglik_grad_into(theta, i, &mut out);
        out
    }
}

/// `Σ_{i ∈ indices} ∇log p(dᵢ|θ)` accumulated in the given order.
pub(crate) fn loglik_grad_sum<M: GradientModel + ?Sized>(
    model: &M,
    theta: &[f64],
    indices: impl IntoIterator<Item = usize>,
) -> Result<Vec<f64>> {
    let d = model.dim();
    let mut acc = vec![0.0; d];
    let mut scratch = vec![0.0; d];
    for i in indices {
        model.datum_loglik_grad_into(theta, i, &mut scratch);
        axpy(&mut acc, 1.0, &scratch);
        if !acc.iter().all(|v| v.is_finite()) {
            return Err(Error::NumericOverflow { datum: i });
        }
    }
    Ok(acc)
}

/// `Σ_{i ∈ indices} (∇log p(dᵢ|θ) − ∇log p(dᵢ|θ_anchor))`, ascending order.
pub(crate) fn loglik_grad_diff_sum<M: GradientModel + ?Sized>(
    model: &M,
    theta: &[f64],
    anchor: &[f64],
    indices: &[usize],
) -> Result<Vec<f64>> {
    let d = model.dim();
    let mut acc = vec![0.0; d];
    let mut at_theta = vec![0.0; d];
    let mut at_anchor = vec![0.0; d];
    for &i in indices {
        model.datum_loglik_grad_into(theta, i, &mut at_theta);
        model.datum_loglik_grad_into(anchor, i, &mut at_anchor);
        for k in 0..d {
            acc[k] += at_theta[k] - at_anchor[k];
        }
        if !acc.iter().all(|v| v.is_finite()) {
            return Err(Error::NumericOverflow { datum: i });
        }
    }
    Ok(acc)
}

pub(crate) fn prior_grad_checked<M: GradientModel + ?Sized>(
    model: &M,
    theta: &[f64],
) -> Result<Vec<f64>> {
    let g = model.log_prior_grad(theta);
    if g.iter().all(|v| v.is_finite()) {
        Ok(g)
    } else {
        Err(Error::GradientOverflow { stage: "prior gradient" })
    }
}

/// `prior + weight · likelihood`, checked for finiteness.
pub(crate) fn combine(prior: Vec<f64>, weight: f64, likelihood: &[f64]) -> Result<ParamVector> {
    let mut g = prior;
    axpy(&mut g, weight, likelihood);
    if !g.iter().all(|v| v.is_finite()) {
        return Err(Error::GradientOverflow { stage: "scaled gradient" });
    }
    Ok(ParamVector::from_finite(g))
}

/// Exact log-posterior gradient `∇log p(θ) + Σᵢ ∇log p(dᵢ|θ)`.
pub fn full_gradient<M: GradientModel + ?Sized>(model: &M, theta: &ParamVector) -> Result<ParamVector> {
    theta.ensure_dim(model.dim())?;
    let likelihood = loglik_grad_sum(model, theta, 0..model.num_data())?;
    let prior = prior_grad_checked(model, theta)?;
    combine(prior, 1.0, &likelihood)
}

/// Minibatch estimate `∇log p(θ) + (N/n) Σ_{i∈S} ∇log p(dᵢ|θ)`.
///
/// With `S` the full index set this is bit-identical to [`full_gradient`].
pub fn stochastic_gradient<M: GradientModel + ?Sized>(
    model: &M,
    theta: &ParamVector,
    batch: &MinibatchIndexSet,
) -> Result<ParamVector> {
    theta.ensure_dim(model.dim())?;
    if batch.population() != model.num_data() {
        return Err(Error::invalid(format!(
            "minibatch drawn from {} data but the model holds {}",
            batch.population(),
            model.num_data()
        )));
    }
    let likelihood = loglik_grad_sum(model, theta, batch.indices().iter().copied())?;
    let prior = prior_grad_checked(model, theta)?;
    combine(prior, batch.scale(), &likelihood)
}

/// All per-datum likelihood gradients at `θ`, row `i` for datum `i`.
pub fn datum_gradients<M: GradientModel + ?Sized>(model: &M, theta: &[f64]) -> Vec<Vec<f64>> {
    (0..model.num_data())
        .map(|i| model.datum_loglik_grad(theta, i))
        .collect()
}
