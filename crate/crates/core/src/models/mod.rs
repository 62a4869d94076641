//! Concrete models with closed-form gradients.

mod gaussian;
mod logistic;
pub mod quadrature;
mod test_fn;

pub use gaussian::{
    gaussian_posterior_phi_bar, gaussian_posterior_phi_bar_quadrature, generate_gaussian_data,
    GaussianMeanModel,
};
pub use logistic::{
    generate_logistic_data, labeled_points_from_rows, log_sigmoid, logistic_loss_metrics, sigmoid,
    train_test_split, LabeledPoint, LogisticRegressionModel, LossMetrics, PredictiveAverage,
};
pub use test_fn::TestFunction;
