//! Anchored variance-reduced gradient next to the plain estimator at one point.

use vrmcmc::prelude::*;

fn spread(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    (mean, (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

fn main() -> vrmcmc::Result<()> {
    let mut rng = RngStream::for_chain(5, 0, Purpose::Data);
    let model = GaussianMeanModel::new(generate_gaussian_data(1000, 1.0, &mut rng)?)?;
    let theta = ParamVector::scalar(0.98)?;
    let anchor = ParamVector::scalar(0.97)?;
    let exact = full_gradient(&model, &theta)?[0];

    let mut batch_rng = RngStream::for_chain(5, 0, Purpose::Minibatch);
    let mut plain = GradientEstimator::plain(10, model.num_data())?;
    let mut vr = GradientEstimator::vr(100, 10, 1, model.num_data())?;
    let (mut p, mut v) = (Vec::new(), Vec::new());
    for _ in 0..20_000 {
        p.push(plain.next_gradient(&model, &theta, 0, &mut batch_rng)?.0[0]);
        vr.refresh_anchor(&model, &anchor, &mut batch_rng)?;
        v.push(vr.vr_gradient(&model, &theta, &mut batch_rng)?.0[0]);
    }
    let ((pm, ps), (vm, vs)) = (spread(&p), spread(&v));
    println!("exact gradient {exact:.4}");
    println!("plain n=10          mean {pm:.4} sd {ps:.4}");
    println!("vr n1=100 n2=10     mean {vm:.4} sd {vs:.4}");
    Ok(())
}
