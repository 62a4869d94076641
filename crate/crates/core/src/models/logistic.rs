//! Bayesian logistic regression with an isotropic Gaussian prior.
//!
//! Labels are encoded as `y ∈ {−1, +1}`, so each datum contributes
//! `log σ(y·θᵀx)` to the log likelihood and `y·x·σ(−y·θᵀx)` to its gradient.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::GradientModel;
use crate::param::dot;
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoint {
    pub features: Vec<f64>,
    /// `−1.0` or `+1.0`.
    pub label: f64,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log σ(z)`, stable for large `|z|`.
pub fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

fn check_points(data: &Dataset<LabeledPoint>) -> Result<usize> {
    let dim = data.get(0).features.len();
    if dim == 0 {
        return Err(Error::invalid("logistic data need at least one feature"));
    }
    for (i, p) in data.iter().enumerate() {
        if p.features.len() != dim {
            return Err(Error::invalid(format!(
                "datum {i} has {} features, expected {dim}",
                p.features.len()
            )));
        }
        if p.label != 1.0 && p.label != -1.0 {
            return Err(Error::invalid(format!("datum {i} has label {}, expected ±1", p.label)));
        }
        if !p.features.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid(format!("datum {i} has a non-finite feature")));
        }
    }
    Ok(dim)
}

#[derive(Debug, Clone)]
pub struct LogisticRegressionModel {
    data: Dataset<LabeledPoint>,
    prior_scale: f64,
    dim: usize,
}

impl LogisticRegressionModel {
    pub const DEFAULT_PRIOR_SCALE: f64 = 1.0;

    pub fn new(data: Dataset<LabeledPoint>, prior_scale: f64) -> Result<Self> {
        if !(prior_scale.is_finite() && prior_scale > 0.0) {
            return Err(Error::invalid(format!("prior scale must be positive, got {prior_scale}")));
        }
        let dim = check_points(&data)?;
        Ok(LogisticRegressionModel {
            data,
            prior_scale,
            dim,
        })
    }

    pub fn data(&self) -> &Dataset<LabeledPoint> {
        &self.data
    }

    pub fn prior_scale(&self) -> f64 {
        self.prior_scale
    }
}

impl GradientModel for LogisticRegressionModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn num_data(&self) -> usize {
        self.data.len()
    }

    fn log_prior_grad_into(&self, theta: &[f64], out: &mut [f64]) {
        let inv_var = 1.0 / (self.prior_scale * self.prior_scale);
        for (o, t) in out.iter_mut().zip(theta) {
            *o = -t * inv_var;
        }
    }

    fn datum_loglik_grad_into(&self, theta: &[f64], i: usize, out: &mut [f64]) {
        let p = self.data.get(i);
        let w = p.label * sigmoid(-p.label * dot(theta, &p.features));
        for (o, x) in out.iter_mut().zip(&p.features) {
            *o = w * x;
        }
    }

    fn log_prior(&self, theta: &[f64]) -> Option<f64> {
        let var = self.prior_scale * self.prior_scale;
        let d = theta.len() as f64;
        Some(-0.5 * dot(theta, theta) / var - 0.5 * d * (2.0 * std::f64::consts::PI * var).ln())
    }

    fn datum_loglik(&self, theta: &[f64], i: usize) -> Option<f64> {
        let p = self.data.get(i);
        Some(log_sigmoid(p.label * dot(theta, &p.features)))
    }
}

/// Test-set negative log likelihood and 0/1 error rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossMetrics {
    /// Mean per-datum negative log likelihood.
    pub nll: f64,
    pub error_rate: f64,
}

/// Metrics of a single parameter value on `test_set`.
///
/// Predictions use the sign of `θᵀx`, with `θᵀx = 0` predicting `+1`.
pub fn logistic_loss_metrics(
    model: &LogisticRegressionModel,
    theta: &[f64],
    test_set: &Dataset<LabeledPoint>,
) -> Result<LossMetrics> {
    if theta.len() != model.dim() {
        return Err(Error::invalid(format!(
            "parameter has dimension {} but the model expects {}",
            theta.len(),
            model.dim()
        )));
    }
    let test_dim = check_points(test_set)?;
    if test_dim != model.dim() {
        return Err(Error::invalid(format!(
            "test features have dimension {test_dim}, model expects {}",
            model.dim()
        )));
    }
    let mut nll = 0.0;
    let mut wrong = 0usize;
    for p in test_set.iter() {
        let z = dot(theta, &p.features);
        nll -= log_sigmoid(p.label * z);
        let predicted = if z >= 0.0 { 1.0 } else { -1.0 };
        if predicted != p.label {
            wrong += 1;
        }
    }
    let n = test_set.len() as f64;
    Ok(LossMetrics {
        nll: nll / n,
        error_rate: wrong as f64 / n,
    })
}

/// Running posterior-predictive average over a fixed test set.
///
/// Each recorded sample adds `σ(θᵀxⱼ)` to a per-point sum; metrics use the
/// averaged probability of `+1`, predicting `+1` when it is at least ½.
#[derive(Debug, Clone)]
pub struct PredictiveAverage {
    test_set: Dataset<LabeledPoint>,
    prob_sums: Vec<f64>,
    count: usize,
}

impl PredictiveAverage {
    pub fn new(test_set: Dataset<LabeledPoint>) -> Result<Self> {
        check_points(&test_set)?;
        let n = test_set.len();
        Ok(PredictiveAverage {
            test_set,
            prob_sums: vec![0.0; n],
            count: 0,
        })
    }

    pub fn record(&mut self, theta: &[f64]) {
        for (s, p) in self.prob_sums.iter_mut().zip(self.test_set.iter()) {
            *s += sigmoid(dot(theta, &p.features));
        }
        self.count += 1;
    }

    pub fn metrics(&self) -> Option<LossMetrics> {
        if self.count == 0 {
            return None;
        }
        let c = self.count as f64;
        let mut nll = 0.0;
        let mut wrong = 0usize;
        for (s, p) in self.prob_sums.iter().zip(self.test_set.iter()) {
            let p_pos = (s / c).clamp(f64::MIN_POSITIVE, 1.0);
            let p_label = if p.label > 0.0 { p_pos } else { (1.0 - s / c).max(f64::MIN_POSITIVE) };
            nll -= p_label.ln();
            let predicted = if p_pos >= 0.5 { 1.0 } else { -1.0 };
            if predicted != p.label {
                wrong += 1;
            }
        }
        let n = self.test_set.len() as f64;
        Some(LossMetrics {
            nll: nll / n,
            error_rate: wrong as f64 / n,
        })
    }
}

/// Synthetic logistic data.
///
/// Features are `dim − 1` standard normals followed by a constant-1 intercept;
/// labels are drawn from `P(y = +1) = σ(θ_trueᵀx)`.
pub fn generate_logistic_data(
    n: usize,
    theta_true: &[f64],
    rng: &mut RngStream,
) -> Result<Dataset<LabeledPoint>> {
    if n == 0 || theta_true.is_empty() {
        return Err(Error::invalid("need at least one datum and one coefficient"));
    }
    let dim = theta_true.len();
    let points = (0..n)
        .map(|_| {
            let mut features: Vec<f64> = (0..dim - 1).map(|_| rng.standard_normal()).collect();
            features.push(1.0);
            let p = sigmoid(dot(theta_true, &features));
            let label = if rng.uniform() < p { 1.0 } else { -1.0 };
            LabeledPoint { features, label }
        })
        .collect();
    Dataset::new(points)
}

/// Converts numeric rows (last column the class label) into labelled points.
///
/// Labels `0`/`1` and `−1`/`+1` are accepted. Each feature column is
/// standardized to zero mean and unit variance over the given rows (constant
/// columns are centered only), and a constant-1 intercept is appended.
pub fn labeled_points_from_rows(rows: &Dataset<Vec<f64>>) -> Result<Dataset<LabeledPoint>> {
    let width = rows.get(0).len();
    if width < 2 {
        return Err(Error::invalid("need at least one feature column and a label column"));
    }
    let p = width - 1;
    let n = rows.len() as f64;
    let mut mean = vec![0.0; p];
    for r in rows.iter() {
        for k in 0..p {
            mean[k] += r[k] / n;
        }
    }
    let mut sd = vec![0.0; p];
    for r in rows.iter() {
        for k in 0..p {
            sd[k] += (r[k] - mean[k]).powi(2) / n;
        }
    }
    for s in &mut sd {
        *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
    }
    let points = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let label = match r[p] {
                l if l == 1.0 => 1.0,
                l if l == 0.0 || l == -1.0 => -1.0,
                l => return Err(Error::invalid(format!("row {i}: label {l} is not 0/1 or ±1"))),
            };
            let mut features: Vec<f64> = (0..p).map(|k| (r[k] - mean[k]) / sd[k]).collect();
            features.push(1.0);
            Ok(LabeledPoint { features, label })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(points)
}

/// Random train/test split; `test_fraction` of the points (at least one of
/// each side) go to the test set.
pub fn train_test_split<T: Clone>(
    data: &Dataset<T>,
    test_fraction: f64,
    rng: &mut RngStream,
) -> Result<(Dataset<T>, Dataset<T>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!("test fraction {test_fraction} outside (0, 1)")));
    }
    let n = data.len();
    if n < 2 {
        return Err(Error::invalid("cannot split fewer than two data"));
    }
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n - 1 {
        let j = k + rng.below((n - k) as u64) as usize;
        perm.swap(k, j);
    }
    let (test_idx, train_idx) = perm.split_at(n_test);
    let pick = |idx: &[usize]| {
        let mut idx = idx.to_vec();
        idx.sort_unstable();
        Dataset::new(idx.into_iter().map(|i| data.get(i).clone()).collect())
    };
    Ok((pick(train_idx)?, pick(test_idx)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Purpose;

    fn pt(features: Vec<f64>, label: f64) -> LabeledPoint {
        LabeledPoint { features, label }
    }

    fn tiny() -> LogisticRegressionModel {
        let data = Dataset::new(vec![pt(vec![1.0, 2.0], 1.0), pt(vec![-0.5, 1.0], -1.0)]).unwrap();
        LogisticRegressionModel::new(data, 1.0).unwrap()
    }

    #[test]
    fn zero_parameter_gives_ln2_and_tie_rule() {
        let m = tiny();
        let test = Dataset::new(vec![
            pt(vec![1.0, 0.0], 1.0),
            pt(vec![0.0, 1.0], -1.0),
            pt(vec![3.0, 1.0], -1.0),
        ])
        .unwrap();
        let r = logistic_loss_metrics(&m, &[0.0, 0.0], &test).unwrap();
        assert!((r.nll - std::f64::consts::LN_2).abs() < 1e-15);
        // every point predicted +1, so the two −1 labels are errors
        assert!((r.error_rate - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn saturated_correct_prediction_has_vanishing_loss() {
        let m = tiny();
        let test = Dataset::new(vec![pt(vec![1.0, 0.0], 1.0)]).unwrap();
        let r = logistic_loss_metrics(&m, &[800.0, 0.0], &test).unwrap();
        assert!(r.nll >= 0.0 && r.nll < 1e-300);
        assert_eq!(r.error_rate, 0.0);
        let wrong = logistic_loss_metrics(&m, &[-800.0, 0.0], &test).unwrap();
        assert!((wrong.nll - 800.0).abs() < 1e-9);
    }

    #[test]
    fn hand_built_two_point_case() {
        // θ = (0.5, −1): z₀ = 0.5·1 − 1·2 = −1.5 (y=+1), z₁ = −0.25 − 1 = −1.25 (y=−1)
        let m = tiny();
        let test = m.data().clone();
        let r = logistic_loss_metrics(&m, &[0.5, -1.0], &test).unwrap();
        let expected = (1.5f64.exp().ln_1p() + (-1.25f64).exp().ln_1p()) / 2.0;
        assert!((r.nll - expected).abs() < 1e-12);
        assert_eq!(r.error_rate, 0.5);
    }

    #[test]
    fn dimension_mismatch_is_invalid_argument() {
        let m = tiny();
        let test = Dataset::new(vec![pt(vec![1.0, 0.0, 2.0], 1.0)]).unwrap();
        assert!(matches!(
            logistic_loss_metrics(&m, &[0.0, 0.0], &test),
            Err(Error::InvalidArgument(_))
        ));
        assert!(logistic_loss_metrics(&m, &[0.0], &m.data().clone()).is_err());
    }

    #[test]
    fn labels_must_be_signed() {
        let data = Dataset::new(vec![pt(vec![1.0], 0.0)]).unwrap();
        assert!(LogisticRegressionModel::new(data, 1.0).is_err());
    }

    #[test]
    fn gradient_formula() {
        let m = tiny();
        let theta = [0.3, -0.2];
        let z = 0.3 * 1.0 - 0.2 * 2.0;
        let w = sigmoid(-z);
        let g = m.datum_loglik_grad(&theta, 0);
        assert!((g[0] - w).abs() < 1e-15 && (g[1] - 2.0 * w).abs() < 1e-15);
        assert_eq!(m.log_prior_grad(&theta), vec![-0.3, 0.2]);
    }

    #[test]
    fn rows_are_standardized_with_intercept() {
        let rows = Dataset::new(vec![vec![1.0, 10.0, 0.0], vec![3.0, 10.0, 1.0]]).unwrap();
        let pts = labeled_points_from_rows(&rows).unwrap();
        assert_eq!(pts.get(0).features, vec![-1.0, 0.0, 1.0]);
        assert_eq!(pts.get(1).features, vec![1.0, 0.0, 1.0]);
        assert_eq!(pts.get(0).label, -1.0);
        assert_eq!(pts.get(1).label, 1.0);
        let bad = Dataset::new(vec![vec![1.0, 2.0]]).unwrap();
        assert!(labeled_points_from_rows(&bad).is_err());
    }

    #[test]
    fn split_partitions_the_data() {
        let data = Dataset::new((0..10).collect::<Vec<i32>>()).unwrap();
        let mut rng = RngStream::for_chain(1, 0, Purpose::Split);
        let (train, test) = train_test_split(&data, 0.3, &mut rng).unwrap();
        assert_eq!(train.len(), 7);
        assert_eq!(test.len(), 3);
        let mut all: Vec<i32> = train.iter().chain(test.iter()).copied().collect();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn predictive_average_of_one_sample_matches_point_metrics() {
        let m = tiny();
        let mut avg = PredictiveAverage::new(m.data().clone()).unwrap();
        assert!(avg.metrics().is_none());
        avg.record(&[0.5, -1.0]);
        let a = avg.metrics().unwrap();
        let b = logistic_loss_metrics(&m, &[0.5, -1.0], m.data()).unwrap();
        assert!((a.nll - b.nll).abs() < 1e-12);
        assert_eq!(a.error_rate, b.error_rate);
    }

    #[test]
    fn synthetic_data_shape() {
        let mut rng = RngStream::for_chain(2, 0, Purpose::Data);
        let d = generate_logistic_data(200, &[1.0, -2.0, 0.5], &mut rng).unwrap();
        assert_eq!(d.len(), 200);
        assert!(d.iter().all(|p| p.features.len() == 3 && p.features[2] == 1.0));
        assert!(d.iter().any(|p| p.label > 0.0) && d.iter().any(|p| p.label < 0.0));
    }
}
