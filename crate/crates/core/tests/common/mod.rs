//! Reference computations written directly from the model definitions,
//! independent of the library's gradient code.
#![allow(dead_code)]

use vrmcmc::models::{generate_logistic_data, LabeledPoint, LogisticRegressionModel};
use vrmcmc::prelude::*;

pub fn gaussian_model(values: &[f64]) -> GaussianMeanModel {
    GaussianMeanModel::from_values(values.to_vec()).unwrap()
}

pub fn random_values(n: usize, rng: &mut RngStream) -> Vec<f64> {
    (0..n).map(|_| rng.normal(0.3, 1.4)).collect()
}

pub fn random_logistic(n: usize, dim: usize, rng: &mut RngStream) -> LogisticRegressionModel {
    let truth: Vec<f64> = (0..dim).map(|_| rng.normal(0.0, 1.0)).collect();
    LogisticRegressionModel::new(generate_logistic_data(n, &truth, rng).unwrap(), 1.0).unwrap()
}

pub fn random_point(dim: usize, rng: &mut RngStream) -> ParamVector {
    ParamVector::new((0..dim).map(|_| rng.normal(0.0, 1.0)).collect()).unwrap()
}

/// `−θ + Σᵢ (xᵢ − θ)`
pub fn gaussian_grad_ref(values: &[f64], theta: f64) -> f64 {
    -theta + values.iter().map(|x| x - theta).sum::<f64>()
}

/// `−θ²/2 − Σᵢ (xᵢ − θ)²/2` up to a constant.
pub fn gaussian_log_post_ref(values: &[f64], theta: f64) -> f64 {
    -0.5 * theta * theta - 0.5 * values.iter().map(|x| (x - theta).powi(2)).sum::<f64>()
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn inner(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per-datum `yᵢ xᵢ σ(−yᵢ θᵀxᵢ)`.
pub fn logistic_datum_grad_ref(p: &LabeledPoint, theta: &[f64]) -> Vec<f64> {
    let w = p.label * logistic(-p.label * inner(theta, &p.features));
    p.features.iter().map(|x| w * x).collect()
}

/// `−θ/σ² + Σᵢ yᵢ xᵢ σ(−yᵢ θᵀxᵢ)`
pub fn logistic_grad_ref(points: &[LabeledPoint], sigma: f64, theta: &[f64]) -> Vec<f64> {
    let mut g: Vec<f64> = theta.iter().map(|t| -t / (sigma * sigma)).collect();
    for p in points {
        for (a, v) in g.iter_mut().zip(logistic_datum_grad_ref(p, theta)) {
            *a += v;
        }
    }
    g
}

/// `−‖θ‖²/(2σ²) + Σᵢ log σ(yᵢ θᵀxᵢ)` up to a constant.
pub fn logistic_log_post_ref(points: &[LabeledPoint], sigma: f64, theta: &[f64]) -> f64 {
    let prior = -inner(theta, theta) / (2.0 * sigma * sigma);
    prior + points.iter().map(|p| logistic(p.label * inner(theta, &p.features)).ln()).sum::<f64>()
}

/// Central difference of a scalar function of a vector.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|k| {
            y[k] = x[k] + step;
            let up = f(&y);
            y[k] = x[k] - step;
            let down = f(&y);
            y[k] = x[k];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// `Γ` straight from its double-sum definition.
pub fn gamma_ref(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    if n == 1 {
        return inner(&rows[0], &rows[0]);
    }
    let mut all = 0.0;
    let mut off = 0.0;
    for i in 0..n {
        for j in 0..n {
            let p = inner(&rows[i], &rows[j]);
            all += p;
            if i != j {
                off += p;
            }
        }
    }
    all / (n * n) as f64 - off / (n * (n - 1)) as f64
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(f64::MIN_POSITIVE)
}
