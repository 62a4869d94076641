//! Plain minibatch Langevin chain on the conjugate Gaussian mean model.

use vrmcmc::prelude::*;

fn main() -> vrmcmc::Result<()> {
    let mut rng = RngStream::for_chain(3, 0, Purpose::Data);
    let model = GaussianMeanModel::new(generate_gaussian_data(500, 1.0, &mut rng)?)?;
    let mut estimator = GradientEstimator::plain(10, model.num_data())?;
    let mut config = ChainConfig::new(200_000, StepSizeSchedule::Fixed(1e-5), 3);
    config.burn_in = 10_000;
    let trace = run_chain(&model, &mut estimator, &config)?;

    let mean = sample_average(&trace, &TestFunction::Identity)?;
    let second = sample_average(&trace, &TestFunction::Square)?;
    println!("posterior mean     {:.5}  sample {mean:.5}", model.posterior_mean());
    println!("posterior variance {:.5}  sample {:.5}", model.posterior_variance(), second - mean * mean);
    println!("gradient evaluations {}", trace.last().map_or(0, |r| r.grad_evals));
    Ok(())
}
