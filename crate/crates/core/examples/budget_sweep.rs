//! Runs the `budget_sweep` experiment from the bundled config and prints median
//! final squared errors per coordinate.

use std::path::PathBuf;

use vrmcmc::experiments::{run_experiment, ExperimentConfig};

fn main() -> vrmcmc::Result<()> {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "configs", "budget_sweep.json"].iter().collect();
    let mut config = ExperimentConfig::from_file(&path)?;
    if let Some(seed) = std::env::args().nth(1) {
        config.seed = seed.parse().expect("seed must be an integer");
    }
    let output = run_experiment(&config, 0)?;
    for coordinate in output.coordinates() {
        let mse = output.median_final(coordinate, |r| r.sq_err).unwrap_or(f64::NAN);
        println!("{coordinate:<24} {mse:.3e}");
    }
    Ok(())
}
