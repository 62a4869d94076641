//! Sample averages, MSE, and exact minibatch variance functionals.

mod drift;
mod exhaustive;
mod variance;

pub use drift::anchor_drift;
pub use exhaustive::{
    exhaustive_plain_mean, exhaustive_vr_mean, exhaustive_vr_mean_with, VrPartsMean,
};
pub use variance::{
    delta_v_variance_enumerated, delta_v_variance_exact, delta_v_variance_formula, gamma_at, gamma_of,
    lambda_at, vr_decomposition_terms, vr_delta_v_variance_enumerated, vr_delta_v_variance_exact,
    VarianceReport, VrDecomposition, ENUMERATION_LIMIT,
};

use crate::error::{Error, Result};
use crate::model::GradientModel;
use crate::models::TestFunction;
use crate::param::ParamVector;
use crate::sampler::ChainTrace;

/// `φ̂ = (1/L) Σ_l φ(θ_l)` over the recorded samples.
pub fn sample_average(trace: &ChainTrace, phi: &TestFunction) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::invalid("sample average of an empty trace"));
    }
    let sum: f64 = trace.records().iter().map(|r| phi.eval(&r.theta)).sum();
    Ok(sum / trace.len() as f64)
}

/// `(1/R) Σ_r (φ̂_r − φ̄)²`
pub fn mse_of_runs(estimates: &[f64], truth: f64) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::invalid("MSE over zero runs"));
    }
    Ok(estimates.iter().map(|e| (e - truth) * (e - truth)).sum::<f64>() / estimates.len() as f64)
}

/// `log p(θ) + Σᵢ log p(dᵢ|θ)`, for models that report log densities.
pub fn log_posterior<M: GradientModel + ?Sized>(model: &M, theta: &[f64]) -> Result<f64> {
    let missing = || Error::invalid("model does not report log densities");
    let mut total = model.log_prior(theta).ok_or_else(missing)?;
    for i in 0..model.num_data() {
        total += model.datum_loglik(theta, i).ok_or_else(missing)?;
    }
    Ok(total)
}

/// Central-difference gradient of [`log_posterior`] with step `step`.
pub fn finite_difference_gradient<M: GradientModel + ?Sized>(
    model: &M,
    theta: &ParamVector,
    step: f64,
) -> Result<Vec<f64>> {
    theta.ensure_dim(model.dim())?;
    let mut x = theta.as_slice().to_vec();
    (0..x.len())
        .map(|k| {
            let orig = x[k];
            x[k] = orig + step;
            let up = log_posterior(model, &x)?;
            x[k] = orig - step;
            let down = log_posterior(model, &x)?;
            x[k] = orig;
            Ok((up - down) / (2.0 * step))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::param::ParamVector;
    use proptest::prelude::*;

    fn trace(values: &[f64]) -> ChainTrace {
        ChainTrace::from_samples(values.iter().map(|v| ParamVector::scalar(*v).unwrap()).collect()).unwrap()
    }

    #[test]
    fn averages() {
        assert_eq!(sample_average(&trace(&[1.0, 2.0, 3.0]), &TestFunction::Identity).unwrap(), 2.0);
        let sq = sample_average(&trace(&[1.0, 2.0, 3.0]), &TestFunction::Square).unwrap();
        assert!((sq - 14.0 / 3.0).abs() < 1e-15);
        assert!(sample_average(&ChainTrace::new(), &TestFunction::Identity).is_err());
    }

    #[test]
    fn mse_examples() {
        assert!((mse_of_runs(&[1.0, 2.0, 4.0], 2.0).unwrap() - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(mse_of_runs(&[3.0, 3.0], 3.0).unwrap(), 0.0);
        assert!(mse_of_runs(&[], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn mse_is_shift_invariant(xs in prop::collection::vec(-100.0f64..100.0, 1..20), t in -50.0f64..50.0, c in -50.0f64..50.0) {
            let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
            let a = mse_of_runs(&xs, t).unwrap();
            let b = mse_of_runs(&shifted, t + c).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        }

        #[test]
        fn mse_is_order_invariant(xs in prop::collection::vec(-100.0f64..100.0, 1..20), t in -50.0f64..50.0) {
            let mut rev = xs.clone();
            rev.reverse();
            let a = mse_of_runs(&xs, t).unwrap();
            let b = mse_of_runs(&rev, t).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }
    }
}
