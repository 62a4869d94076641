//! Conjugate Gaussian mean model: `θ ~ N(0, 1)`, `xᵢ | θ ~ N(θ, 1)`.

use std::f64::consts::PI;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::GradientModel;
use crate::models::quadrature::adaptive_simpson;
use crate::models::TestFunction;
use crate::rng::RngStream;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

#[derive(Debug, Clone)]
pub struct GaussianMeanModel {
    data: Dataset<f64>,
    mean: f64,
}

impl GaussianMeanModel {
    pub fn new(data: Dataset<f64>) -> Result<Self> {
        if let Some(x) = data.iter().find(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("non-finite observation {x}")));
        }
        let mean = data.iter().sum::<f64>() / data.len() as f64;
        Ok(GaussianMeanModel { data, mean })
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        Self::new(Dataset::new(values)?)
    }

    pub fn data(&self) -> &Dataset<f64> {
        &self.data
    }

    pub fn data_mean(&self) -> f64 {
        self.mean
    }

    /// `N·x̄ / (N + 1)`
    pub fn posterior_mean(&self) -> f64 {
        let n = self.data.len() as f64;
        n * self.mean / (n + 1.0)
    }

    /// `1 / (N + 1)`
    pub fn posterior_variance(&self) -> f64 {
        1.0 / (self.data.len() as f64 + 1.0)
    }

    fn posterior_density(&self, theta: f64) -> f64 {
        let (mu, var) = (self.posterior_mean(), self.posterior_variance());
        (-(theta - mu).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
    }
}

impl GradientModel for GaussianMeanModel {
    fn dim(&self) -> usize {
        1
    }

    fn num_data(&self) -> usize {
        self.data.len()
    }

    fn log_prior_grad_into(&self, theta: &[f64], out: &mut [f64]) {
        out[0] = -theta[0];
    }

    fn datum_loglik_grad_into(&self, theta: &[f64], i: usize, out: &mut [f64]) {
        out[0] = self.data.get(i) - theta[0];
    }

    fn log_prior(&self, theta: &[f64]) -> Option<f64> {
        Some(-0.5 * theta[0] * theta[0] - HALF_LN_2PI)
    }

    fn datum_loglik(&self, theta: &[f64], i: usize) -> Option<f64> {
        let r = self.data.get(i) - theta[0];
        Some(-0.5 * r * r - HALF_LN_2PI)
    }
}

/// `N` i.i.d. draws from `N(θ_true, 1)`.
pub fn generate_gaussian_data(n: usize, theta_true: f64, rng: &mut RngStream) -> Result<Dataset<f64>> {
    if n == 0 {
        return Err(Error::invalid("need at least one datum"));
    }
    Dataset::new((0..n).map(|_| rng.normal(theta_true, 1.0)).collect())
}

/// Posterior average `φ̄ = E[φ(θ) | D]` under the analytic posterior.
///
/// `Identity` and `Square` use closed forms; anything else is integrated
/// against the posterior density.
pub fn gaussian_posterior_phi_bar(model: &GaussianMeanModel, phi: &TestFunction) -> Result<f64> {
    let mu = model.posterior_mean();
    match phi {
        TestFunction::Identity => Ok(mu),
        TestFunction::Square => Ok(model.posterior_variance() + mu * mu),
        TestFunction::Custom { .. } => gaussian_posterior_phi_bar_quadrature(model, phi),
    }
}

/// Quadrature route for [`gaussian_posterior_phi_bar`]: integrates `φ`
/// against the posterior density over mean ± 10 standard deviations.
pub fn gaussian_posterior_phi_bar_quadrature(model: &GaussianMeanModel, phi: &TestFunction) -> Result<f64> {
    let mu = model.posterior_mean();
    let sd = model.posterior_variance().sqrt();
    adaptive_simpson(
        |t| phi.eval(&[t]) * model.posterior_density(t),
        mu - 10.0 * sd,
        mu + 10.0 * sd,
        1e-10,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{full_gradient, stochastic_gradient};
    use crate::minibatch::MinibatchIndexSet;
    use crate::param::ParamVector;
    use crate::rng::Purpose;

    fn two_point() -> GaussianMeanModel {
        GaussianMeanModel::from_values(vec![1.0, 3.0]).unwrap()
    }

    #[test]
    fn gradient_vanishes_at_symmetric_point() {
        let m = GaussianMeanModel::from_values(vec![0.0; 5]).unwrap();
        let g = full_gradient(&m, &ParamVector::zeros(1)).unwrap();
        assert_eq!(g.as_slice(), &[0.0]);
    }

    #[test]
    fn hand_computed_gradients() {
        let m = two_point();
        let theta = ParamVector::zeros(1);
        assert_eq!(full_gradient(&m, &theta).unwrap()[0], 4.0);
        let s0 = MinibatchIndexSet::new(vec![0], 2).unwrap();
        let s1 = MinibatchIndexSet::new(vec![1], 2).unwrap();
        let g0 = stochastic_gradient(&m, &theta, &s0).unwrap()[0];
        let g1 = stochastic_gradient(&m, &theta, &s1).unwrap()[0];
        assert_eq!(g0, 2.0);
        assert_eq!(g1, 6.0);
        assert_eq!((g0 + g1) / 2.0, 4.0);
    }

    #[test]
    fn full_batch_is_bit_identical_to_full_gradient() {
        let mut rng = RngStream::for_chain(3, 0, Purpose::Data);
        let m = GaussianMeanModel::new(generate_gaussian_data(37, 0.3, &mut rng).unwrap()).unwrap();
        let all = MinibatchIndexSet::full(37).unwrap();
        for t in [-1.3, 0.0, 0.77] {
            let theta = ParamVector::scalar(t).unwrap();
            let a = full_gradient(&m, &theta).unwrap();
            let b = stochastic_gradient(&m, &theta, &all).unwrap();
            assert_eq!(a[0].to_bits(), b[0].to_bits());
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let m = two_point();
        assert!(full_gradient(&m, &ParamVector::zeros(2)).is_err());
    }

    #[test]
    fn generated_data_follows_the_sampling_law() {
        let mut a = RngStream::for_chain(5, 0, Purpose::Data);
        let mut b = RngStream::for_chain(5, 0, Purpose::Data);
        let x = generate_gaussian_data(1000, 1.5, &mut a).unwrap();
        let y = generate_gaussian_data(1000, 1.5, &mut b).unwrap();
        assert_eq!(x, y);
        let mean = x.iter().sum::<f64>() / 1000.0;
        assert!((mean - 1.5).abs() < 4.0 / 1000f64.sqrt());
        assert_eq!(generate_gaussian_data(1, 0.0, &mut a).unwrap().len(), 1);
        assert!(generate_gaussian_data(0, 0.0, &mut a).is_err());
    }

    #[test]
    fn phi_bar_closed_forms() {
        let zeros = GaussianMeanModel::from_values(vec![0.0; 9]).unwrap();
        assert_eq!(gaussian_posterior_phi_bar(&zeros, &TestFunction::Square).unwrap(), 0.1);
        let one = GaussianMeanModel::from_values(vec![2.0]).unwrap();
        assert_eq!(gaussian_posterior_phi_bar(&one, &TestFunction::Identity).unwrap(), 1.0);
        let m = two_point();
        assert_eq!(
            gaussian_posterior_phi_bar(&m, &TestFunction::Identity).unwrap(),
            m.posterior_mean()
        );
    }

    #[test]
    fn closed_form_matches_quadrature() {
        let mut rng = RngStream::for_chain(8, 0, Purpose::Data);
        for n in [1, 4, 50, 1000] {
            let m = GaussianMeanModel::new(generate_gaussian_data(n, 0.7, &mut rng).unwrap()).unwrap();
            for phi in [TestFunction::Identity, TestFunction::Square] {
                let closed = gaussian_posterior_phi_bar(&m, &phi).unwrap();
                let quad = gaussian_posterior_phi_bar_quadrature(&m, &phi).unwrap();
                assert!((closed - quad).abs() < 1e-9, "{n} {phi:?}: {closed} vs {quad}");
            }
        }
    }

    #[test]
    fn custom_phi_uses_quadrature() {
        let m = GaussianMeanModel::from_values(vec![0.0; 3]).unwrap();
        let cube = TestFunction::custom("cube", |t| t[0].powi(3));
        assert!(gaussian_posterior_phi_bar(&m, &cube).unwrap().abs() < 1e-12);
        let bad = TestFunction::custom("sqrt", |t| t[0].sqrt());
        assert!(matches!(
            gaussian_posterior_phi_bar(&m, &bad),
            Err(Error::QuadratureFailure(_))
        ));
    }
}
