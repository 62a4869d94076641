//! Variance-reduced Langevin sampling for Bayesian logistic regression with a
//! held-out predictive evaluation.

use vrmcmc::models::{generate_logistic_data, train_test_split, PredictiveAverage};
use vrmcmc::prelude::*;
use vrmcmc::sampler::run_chain_with;

fn main() -> vrmcmc::Result<()> {
    let truth = [1.0, -2.0, 0.5, 0.0, 0.3];
    let data = generate_logistic_data(1000, &truth, &mut RngStream::for_chain(11, 0, Purpose::Data))?;
    let (train, test) = train_test_split(&data, 0.2, &mut RngStream::for_chain(11, 0, Purpose::Split))?;
    let model = LogisticRegressionModel::new(train, 1.0)?;

    let mut estimator = GradientEstimator::vr(100, 10, 10, model.num_data())?;
    let config = ChainConfig::new(20_000, StepSizeSchedule::Fixed(1e-3), 11);
    let mut predictive = PredictiveAverage::new(test)?;
    let outcome = run_chain_with(&model, &mut estimator, &config, |step| {
        if step.iteration > 2_000 {
            predictive.record(step.theta.as_slice());
        }
        Ok(())
    })?;

    let metrics = predictive.metrics().expect("samples were recorded");
    println!("final theta {:?}", outcome.theta.as_slice());
    println!("test nll {:.4}, error rate {:.3}", metrics.nll, metrics.error_rate);
    println!("data passes {:.1}", outcome.grad_evals as f64 / model.num_data() as f64);
    Ok(())
}
