//! Stochastic-gradient Langevin sampling with minibatch variance reduction.
//!
//! The crate is organised bottom-up:
//!
//! * [`rng`], [`param`], [`data`], [`minibatch`] and [`model`] hold the
//!   containers, deterministic random streams, without-replacement minibatch
//!   draws and the [`GradientModel`] contract with exact and minibatch
//!   log-posterior gradients;
//! * [`models`] implements a conjugate Gaussian mean model and Bayesian
//!   logistic regression with closed-form gradients;
//! * [`estimator`] provides the plain minibatch estimator and the anchored
//!   variance-reduced estimator (with a full-data-anchor variant);
//! * [`sampler`] runs Euler–Maruyama Langevin chains with exact gradient
//!   evaluation accounting;
//! * [`diagnostics`] computes sample averages, MSE, and the minibatch
//!   variance functionals both in closed form and by exhaustive enumeration;
//! * [`experiments`] is the seeded, budget-matched experiment harness behind
//!   the `vrmcmc` binary.
//!
//! ```
//! use vrmcmc::prelude::*;
//!
//! let model = GaussianMeanModel::from_values(vec![0.4, 1.1, 0.7, 1.6]).unwrap();
//! let mut estimator = GradientEstimator::vr(3, 1, 2, model.num_data()).unwrap();
//! let config = ChainConfig::new(500, StepSizeSchedule::Fixed(1e-2), 7);
//! let trace = run_chain(&model, &mut estimator, &config).unwrap();
//! let mean = sample_average(&trace, &TestFunction::Identity).unwrap();
//! assert!(mean.is_finite());
//! ```

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod minibatch;
pub mod model;
pub mod models;
pub mod param;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
pub use model::GradientModel;

pub mod prelude {
    pub use crate::data::Dataset;
    pub use crate::diagnostics::{mse_of_runs, sample_average};
    pub use crate::error::{Error, Result};
    pub use crate::estimator::{EstimatorSpec, GradientEstimator, VrState};
    pub use crate::minibatch::{sample_without_replacement, IndexSampler, MinibatchIndexSet};
    pub use crate::model::{full_gradient, stochastic_gradient, GradientModel};
    pub use crate::models::{
        gaussian_posterior_phi_bar, generate_gaussian_data, GaussianMeanModel, LogisticRegressionModel,
        TestFunction,
    };
    pub use crate::param::ParamVector;
    pub use crate::rng::{Purpose, RngStream, StreamId};
    pub use crate::sampler::{run_chain, run_chain_with, ChainConfig, ChainTrace, StepSizeSchedule};
}
