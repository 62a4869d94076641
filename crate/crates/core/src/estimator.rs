//! Gradient estimators: plain minibatch, anchored variance reduction, and the
//! full-data-anchor special case.
//!
//! The variance-reduced estimator keeps an anchor `θ̃` and an anchor gradient
//!
//! ```text
//! g̃ = (N/n₁) Σ_{i∈π} ∇log p(dᵢ|θ̃)          (π: n₁ indices, redrawn every m steps)
//! ```
//!
//! and at every step returns
//!
//! ```text
//! g = g̃ + ∇log p(θ) + (N/n₂) Σ_{i∈π̃} (∇log p(dᵢ|θ) − ∇log p(dᵢ|θ̃))
//! ```
//!
//! with `π̃` a fresh size-`n₂` batch drawn independently of `π`. Both sums are
//! unbiased, so `E g` is the exact log-posterior gradient. The anchor terms
//! `∇log p(dᵢ|θ̃)` of the correction batch are recomputed rather than stored,
//! which keeps memory at `O(d)` and costs `2·n₂` gradient evaluations a step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::minibatch::{IndexSampler, MinibatchIndexSet};
use crate::model::{
    combine, loglik_grad_diff_sum, loglik_grad_sum, prior_grad_checked, stochastic_gradient,
    GradientModel,
};
use crate::param::{axpy, ParamVector};
use crate::rng::RngStream;

/// Serializable estimator description, e.g. `{"mode":"vr","n1":100,"n2":10,"m":10}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorSpec {
    /// Fresh size-`n` minibatch every step.
    Plain { n: usize },
    /// Anchor batch of `n1` refreshed every `m` steps, correction batch of `n2`.
    Vr { n1: usize, n2: usize, m: usize },
    /// `Vr` with the anchor gradient taken over the whole dataset.
    SvrgLd { n2: usize, m: usize },
}

impl EstimatorSpec {
    /// Checks the size constraints against a dataset of `population` items.
    pub fn validate(&self, population: usize) -> Result<()> {
        match *self {
            EstimatorSpec::Plain { n } => {
                if n == 0 || n > population {
                    return Err(Error::invalid(format!(
                        "plain minibatch size {n} outside 1..={population}"
                    )));
                }
            }
            EstimatorSpec::Vr { n1, n2, m } => {
                if n2 == 0 || n2 >= n1 || n1 > population {
                    return Err(Error::invalid(format!(
                        "variance reduction needs 1 <= n2 < n1 <= N, got n1={n1}, n2={n2}, N={population}"
                    )));
                }
                if m == 0 {
                    return Err(Error::invalid("anchor update interval m must be at least 1"));
                }
            }
            EstimatorSpec::SvrgLd { n2, m } => {
                EstimatorSpec::Vr { n1: population, n2, m }.validate(population)?;
            }
        }
        Ok(())
    }

    /// Short identifier used as a CSV sweep coordinate.
    pub fn label(&self) -> String {
        match *self {
            EstimatorSpec::Plain { n } => format!("plain_n{n}"),
            EstimatorSpec::Vr { n1, n2, m } => format!("vr_n1_{n1}_n2_{n2}_m{m}"),
            EstimatorSpec::SvrgLd { n2, m } => format!("svrg_ld_n2_{n2}_m{m}"),
        }
    }

    /// Per-datum gradient evaluations charged at iteration `l`.
    pub fn step_cost(&self, l: usize, population: usize) -> u64 {
        match self.resolve(population) {
            Resolved::Plain { n } => n as u64,
            Resolved::Vr { n1, n2, m } => {
                let refresh = if l % m == 0 { n1 } else { 0 };
                (refresh + 2 * n2) as u64
            }
        }
    }

    /// Total evaluations after `steps` iterations:
    /// `n·L` for plain, `2·n₂·L + n₁·⌈L/m⌉` for the anchored estimators.
    pub fn ledger_cost(&self, steps: usize, population: usize) -> u64 {
        match self.resolve(population) {
            Resolved::Plain { n } => (n * steps) as u64,
            Resolved::Vr { n1, n2, m } => (2 * n2 * steps + n1 * steps.div_ceil(m)) as u64,
        }
    }

    fn resolve(&self, population: usize) -> Resolved {
        match *self {
            EstimatorSpec::Plain { n } => Resolved::Plain { n },
            EstimatorSpec::Vr { n1, n2, m } => Resolved::Vr { n1, n2, m },
            EstimatorSpec::SvrgLd { n2, m } => Resolved::Vr {
                n1: population,
                n2,
                m,
            },
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Resolved {
    Plain { n: usize },
    Vr { n1: usize, n2: usize, m: usize },
}

/// Anchor state of the variance-reduced estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct VrState {
    anchor: ParamVector,
    /// `(N/n₁) Σ_{i∈π} ∇log p(dᵢ|θ̃)`; likelihood only, no prior term.
    anchor_grad: Vec<f64>,
    steps_since_refresh: usize,
}

/// The three additive pieces of a variance-reduced gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct VrGradientParts {
    /// Cached `g̃`.
    pub anchor_term: Vec<f64>,
    /// `∇log p(θ)`.
    pub prior: Vec<f64>,
    /// `(N/n₂) Σ_{i∈π̃} (∇log p(dᵢ|θ) − ∇log p(dᵢ|θ̃))`.
    pub correction: Vec<f64>,
}

impl VrGradientParts {
    pub fn total(&self) -> Result<ParamVector> {
        let mut g = self.anchor_term.clone();
        axpy(&mut g, 1.0, &self.prior);
        combine(g, 1.0, &self.correction)
    }
}

impl VrState {
    /// Anchors at `theta` using an explicit anchor batch `π`.
    pub fn from_anchor_batch<M: GradientModel + ?Sized>(
        model: &M,
        theta: &ParamVector,
        batch: &MinibatchIndexSet,
    ) -> Result<Self> {
        theta.ensure_dim(model.dim())?;
        check_population(batch, model)?;
        let mut anchor_grad = loglik_grad_sum(model, theta, batch.indices().iter().copied())?;
        let scale = batch.scale();
        for v in &mut anchor_grad {
            *v *= scale;
        }
        if !anchor_grad.iter().all(|v| v.is_finite()) {
            return Err(Error::GradientOverflow { stage: "anchor gradient" });
        }
        Ok(VrState {
            anchor: theta.clone(),
            anchor_grad,
            steps_since_refresh: 0,
        })
    }

    pub fn anchor(&self) -> &ParamVector {
        &self.anchor
    }

    pub fn anchor_grad(&self) -> &[f64] {
        &self.anchor_grad
    }

    pub fn steps_since_refresh(&self) -> usize {
        self.steps_since_refresh
    }

    /// Gradient pieces at `theta` for an explicit correction batch `π̃`.
    pub fn gradient_parts<M: GradientModel + ?Sized>(
        &self,
        model: &M,
        theta: &ParamVector,
        batch: &MinibatchIndexSet,
    ) -> Result<VrGradientParts> {
        theta.ensure_dim(model.dim())?;
        check_population(batch, model)?;
        let mut correction = loglik_grad_diff_sum(model, theta, &self.anchor, batch.indices())?;
        let scale = batch.scale();
        for v in &mut correction {
            *v *= scale;
        }
        Ok(VrGradientParts {
            anchor_term: self.anchor_grad.clone(),
            prior: prior_grad_checked(model, theta)?,
            correction,
        })
    }

    /// `g̃ + ∇log p(θ) + (N/n₂) Σ_{i∈π̃} (αᵢ − βᵢ)` for an explicit `π̃`.
    pub fn gradient_with<M: GradientModel + ?Sized>(
        &self,
        model: &M,
        theta: &ParamVector,
        batch: &MinibatchIndexSet,
    ) -> Result<ParamVector> {
        self.gradient_parts(model, theta, batch)?.total()
    }
}

fn check_population<M: GradientModel + ?Sized>(batch: &MinibatchIndexSet, model: &M) -> Result<()> {
    if batch.population() != model.num_data() {
        return Err(Error::invalid(format!(
            "minibatch drawn from {} data but the model holds {}",
            batch.population(),
            model.num_data()
        )));
    }
    Ok(())
}

/// A gradient estimator bound to one chain.
///
/// Owns its index sampler and, for the anchored modes, the mutable
/// [`VrState`]. Parallel chains each need their own instance.
#[derive(Debug, Clone)]
pub struct GradientEstimator {
    spec: EstimatorSpec,
    resolved: Resolved,
    sampler: IndexSampler,
    state: Option<VrState>,
}

impl GradientEstimator {
    pub fn new(spec: EstimatorSpec, population: usize) -> Result<Self> {
        spec.validate(population)?;
        Ok(GradientEstimator {
            spec,
            resolved: spec.resolve(population),
            sampler: IndexSampler::new(population)?,
            state: None,
        })
    }

    pub fn plain(n: usize, population: usize) -> Result<Self> {
        Self::new(EstimatorSpec::Plain { n }, population)
    }

    pub fn vr(n1: usize, n2: usize, m: usize, population: usize) -> Result<Self> {
        Self::new(EstimatorSpec::Vr { n1, n2, m }, population)
    }

    pub fn svrg_ld(n2: usize, m: usize, population: usize) -> Result<Self> {
        Self::new(EstimatorSpec::SvrgLd { n2, m }, population)
    }

    pub fn spec(&self) -> EstimatorSpec {
        self.spec
    }

    pub fn population(&self) -> usize {
        self.sampler.population()
    }

    /// Anchor state; `None` before the first refresh and for plain mode.
    pub fn state(&self) -> Option<&VrState> {
        self.state.as_ref()
    }

    fn check_model<M: GradientModel + ?Sized>(&self, model: &M) -> Result<()> {
        if model.num_data() != self.population() {
            return Err(Error::invalid(format!(
                "estimator built for {} data but the model holds {}",
                self.population(),
                model.num_data()
            )));
        }
        Ok(())
    }

    /// Moves the anchor to `theta` with a fresh size-`n₁` batch. Returns the
    /// number of gradient evaluations charged (`n₁`).
    pub fn refresh_anchor<M: GradientModel + ?Sized>(
        &mut self,
        model: &M,
        theta: &ParamVector,
        rng: &mut RngStream,
    ) -> Result<u64> {
        let Resolved::Vr { n1, .. } = self.resolved else {
            return Err(Error::ContractViolation(
                "plain estimators have no anchor".into(),
            ));
        };
        self.check_model(model)?;
        let batch = self.sampler.draw(n1, rng)?;
        self.state = Some(VrState::from_anchor_batch(model, theta, &batch)?);
        Ok(n1 as u64)
    }

    /// Variance-reduced gradient at `theta` with a fresh size-`n₂` correction
    /// batch. Returns the gradient and the evaluations charged (`2·n₂`).
    pub fn vr_gradient<M: GradientModel + ?Sized>(
        &mut self,
        model: &M,
        theta: &ParamVector,
        rng: &mut RngStream,
    ) -> Result<(ParamVector, u64)> {
        let Resolved::Vr { n2, .. } = self.resolved else {
            return Err(Error::ContractViolation(
                "vr_gradient called on a plain estimator".into(),
            ));
        };
        self.check_model(model)?;
        let state = self.state.as_mut().ok_or_else(|| {
            Error::ContractViolation("vr_gradient called before the first anchor refresh".into())
        })?;
        let batch = self.sampler.draw(n2, rng)?;
        let g = state.gradient_with(model, theta, &batch)?;
        state.steps_since_refresh += 1;
        Ok((g, 2 * n2 as u64))
    }

    /// One estimator call for iteration `l`: refreshes the anchor when
    /// `l mod m = 0`, then returns the gradient and its evaluation cost.
    pub fn next_gradient<M: GradientModel + ?Sized>(
        &mut self,
        model: &M,
        theta: &ParamVector,
        l: usize,
        rng: &mut RngStream,
    ) -> Result<(ParamVector, u64)> {
        match self.resolved {
            Resolved::Plain { n } => {
                self.check_model(model)?;
                let batch = self.sampler.draw(n, rng)?;
                Ok((stochastic_gradient(model, theta, &batch)?, n as u64))
            }
            Resolved::Vr { m, .. } => {
                let mut cost = 0;
                if l % m == 0 {
                    cost += self.refresh_anchor(model, theta, rng)?;
                }
                let (g, c) = self.vr_gradient(model, theta, rng)?;
                Ok((g, cost + c))
            }
        }
    }
}
