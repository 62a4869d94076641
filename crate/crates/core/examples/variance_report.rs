//! Minibatch variance functionals at a point, as JSON.

use vrmcmc::diagnostics::VarianceReport;
use vrmcmc::prelude::*;

fn main() -> vrmcmc::Result<()> {
    let model = GaussianMeanModel::from_values((0..12).map(|i| (i as f64 * 0.9).sin() + 1.0).collect())?;
    let theta = ParamVector::scalar(0.8)?;
    let anchor = ParamVector::scalar(0.5)?;

    let plain = VarianceReport::plain(&model, &theta, 3)?;
    let reduced = VarianceReport::variance_reduced(&model, &theta, &anchor, 6, 3)?;
    println!("{}", serde_json::to_string_pretty(&plain)?);
    println!("{}", serde_json::to_string_pretty(&reduced)?);
    Ok(())
}
