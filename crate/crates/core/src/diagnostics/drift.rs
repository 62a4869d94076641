use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::GradientModel;
use crate::sampler::ChainTrace;

/// `‖(1/N) Σᵢ (αᵢ − βᵢ)‖` for every recorded state whose anchor state is also
/// recorded.
///
/// The state `θ_k` is moved with the anchor set at iteration `k − (k mod m)`.
/// Records whose anchor is missing from the trace (the initial point, or
/// thinned away) are skipped, so the output may be shorter than the trace.
pub fn anchor_drift<M: GradientModel + ?Sized>(model: &M, trace: &ChainTrace, m: usize) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::invalid("anchor update interval m must be at least 1"));
    }
    let by_iteration: HashMap<usize, usize> = trace
        .records()
        .iter()
        .enumerate()
        .map(|(pos, r)| (r.iteration, pos))
        .collect();
    let population = model.num_data();
    let d = model.dim();
    let mut alpha = vec![0.0; d];
    let mut beta = vec![0.0; d];
    let mut out = Vec::new();
    for r in trace.records() {
        r.theta.ensure_dim(d)?;
        let Some(&pos) = by_iteration.get(&(r.iteration - r.iteration % m)) else {
            continue;
        };
        let anchor = &trace.records()[pos].theta;
        let mut acc = vec![0.0; d];
        for i in 0..population {
            model.datum_loglik_grad_into(&r.theta, i, &mut alpha);
            model.datum_loglik_grad_into(anchor, i, &mut beta);
            for k in 0..d {
                acc[k] += alpha[k] - beta[k];
            }
        }
        out.push(acc.iter().map(|v| v * v).sum::<f64>().sqrt() / population as f64);
    }
    Ok(out)
}
