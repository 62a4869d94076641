use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::TestFunction;
use crate::param::ParamVector;
use crate::sampler::StepSizeSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    BudgetSweep,
    VrCompare,
    N1Sweep,
    OracleCheck,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::BudgetSweep => "budget_sweep",
            ExperimentKind::VrCompare => "vr_compare",
            ExperimentKind::N1Sweep => "n1_sweep",
            ExperimentKind::OracleCheck => "oracle_check",
        }
    }
}

/// Model section of an experiment config, tagged by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// `xᵢ ~ N(θ_true, 1)` with a standard normal prior on the mean.
    GaussianMean {
        n: usize,
        theta_true: f64,
        /// Data seed; the master seed when absent.
        #[serde(default)]
        data_seed: Option<u64>,
    },
    /// Synthetic logistic regression with a held-out test split.
    Logistic {
        n: usize,
        dim: usize,
        /// Generating coefficients; all ones when absent.
        #[serde(default)]
        theta_true: Option<Vec<f64>>,
        #[serde(default = "default_prior_scale")]
        prior_scale: f64,
        #[serde(default = "default_test_fraction")]
        test_fraction: f64,
        #[serde(default)]
        data_seed: Option<u64>,
    },
    /// Logistic regression on a numeric CSV whose last column is the label.
    LogisticCsv {
        path: PathBuf,
        #[serde(default = "default_prior_scale")]
        prior_scale: f64,
        #[serde(default = "default_test_fraction")]
        test_fraction: f64,
        #[serde(default)]
        data_seed: Option<u64>,
    },
}

fn default_prior_scale() -> f64 {
    1.0
}

fn default_test_fraction() -> f64 {
    0.2
}

fn default_minibatch_sizes() -> Vec<usize> {
    vec![1, 10, 100]
}

fn default_n1() -> usize {
    100
}

fn default_n2() -> usize {
    10
}

fn default_m() -> usize {
    10
}

/// Default anchor batch sizes of the sensitivity sweep.
pub const DEFAULT_N1_VALUES: [usize; 9] = [100, 200, 300, 400, 500, 600, 700, 1000, 2000];

fn default_repeats() -> usize {
    20
}

fn default_checkpoints() -> usize {
    20
}

fn default_test_function() -> String {
    "square".into()
}

/// JSON experiment description.
///
/// ```json
/// {
///   "experiment": "vr_compare",
///   "model": {"kind": "gaussian_mean", "n": 1000, "theta_true": 1.0},
///   "schedule": {"fixed": 0.001},
///   "budget": 50000,
///   "n1": 100, "n2": 10, "m": 10,
///   "repeats": 20,
///   "seed": 1
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub schedule: Option<StepSizeSchedule>,
    /// Budget `T` in per-datum gradient evaluations.
    #[serde(default)]
    pub budget: Option<u64>,
    #[serde(default = "default_minibatch_sizes")]
    pub minibatch_sizes: Vec<usize>,
    #[serde(default = "default_n1")]
    pub n1: usize,
    #[serde(default = "default_n2")]
    pub n2: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default)]
    pub include_svrg_ld: bool,
    /// Anchor batch sizes of the sensitivity sweep. When absent, a default
    /// list capped at `N` is used; explicit values above `N` are an error.
    #[serde(default)]
    pub n1_values: Option<Vec<usize>>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
    /// `identity` or `square`.
    #[serde(default = "default_test_function")]
    pub test_function: String,
    #[serde(default)]
    pub init: Option<ParamVector>,
    /// Output directory; the CLI flag takes precedence.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Config for a kind with every optional field at its default.
    pub fn new(experiment: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment,
            model: None,
            schedule: None,
            budget: None,
            minibatch_sizes: default_minibatch_sizes(),
            n1: default_n1(),
            n2: default_n2(),
            m: default_m(),
            include_svrg_ld: false,
            n1_values: None,
            repeats: default_repeats(),
            seed: 0,
            checkpoints: default_checkpoints(),
            test_function: default_test_function(),
            init: None,
            output: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads and validates a config file. A relative CSV path in the model
    /// section is resolved against the config file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::from_json(&text)?;
        if let Some(ModelSpec::LogisticCsv { path: csv, .. }) = &mut config.model {
            if csv.is_relative() {
                if let Some(dir) = path.parent() {
                    *csv = dir.join(&*csv);
                }
            }
        }
        Ok(config)
    }

    /// Anchor sizes for the sensitivity sweep on `population` data.
    ///
    /// Default values above `N` are capped at `N` (duplicates removed);
    /// explicit values above `N` are rejected.
    pub fn n1_sweep_values(&self, population: usize) -> Result<Vec<usize>> {
        match &self.n1_values {
            Some(values) => {
                if let Some(bad) = values.iter().find(|&&v| v > population) {
                    return Err(Error::invalid(format!("n1={bad} exceeds the {population} data")));
                }
                Ok(values.clone())
            }
            None => {
                let mut v: Vec<usize> = DEFAULT_N1_VALUES.iter().map(|&x| x.min(population)).collect();
                v.dedup();
                Ok(v)
            }
        }
    }

    pub fn phi(&self) -> Result<TestFunction> {
        self.test_function.parse()
    }

    /// Structural checks that need no data.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.experiment == ExperimentKind::OracleCheck {
            return Ok(());
        }
        if self.repeats == 0 {
            return fail("repeats must be at least 1".into());
        }
        if self.checkpoints == 0 {
            return fail("checkpoints must be at least 1".into());
        }
        let Some(model) = &self.model else {
            return fail(format!("{} needs a model section", self.experiment.name()));
        };
        let Some(schedule) = &self.schedule else {
            return fail(format!("{} needs a step size schedule", self.experiment.name()));
        };
        schedule.validate().map_err(|e| Error::Config(e.to_string()))?;
        let Some(budget) = self.budget else {
            return fail(format!("{} needs a gradient-evaluation budget", self.experiment.name()));
        };
        if budget == 0 {
            return fail("budget must be positive".into());
        }
        self.phi()?;
        match self.experiment {
            ExperimentKind::BudgetSweep => {
                if !matches!(model, ModelSpec::GaussianMean { .. }) {
                    return fail("budget_sweep needs the gaussian_mean model".into());
                }
                if self.minibatch_sizes.is_empty() || self.minibatch_sizes.contains(&0) {
                    return fail("minibatch_sizes must be a non-empty list of positive sizes".into());
                }
            }
            ExperimentKind::VrCompare => {
                if self.n2 == 0 || self.n2 >= self.n1 {
                    return fail(format!("need 1 <= n2 < n1, got n1={}, n2={}", self.n1, self.n2));
                }
            }
            ExperimentKind::N1Sweep => {
                let values = self.n1_values.as_deref().unwrap_or(&DEFAULT_N1_VALUES);
                if values.is_empty() {
                    return fail("n1_values must not be empty".into());
                }
                if let Some(bad) = values.iter().find(|&&n1| n1 <= self.n2) {
                    return fail(format!("every n1 must exceed n2={}, got {bad}", self.n2));
                }
            }
            ExperimentKind::OracleCheck => unreachable!(),
        }
        if matches!(self.experiment, ExperimentKind::VrCompare | ExperimentKind::N1Sweep) && self.m == 0 {
            return fail("m must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "experiment": "vr_compare",
        "model": {"kind": "gaussian_mean", "n": 100, "theta_true": 1.0},
        "schedule": {"fixed": 0.001},
        "budget": 1000
    }"#;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::from_json(BASE).unwrap();
        assert_eq!((c.n1, c.n2, c.m), (100, 10, 10));
        assert_eq!(c.repeats, 20);
        assert_eq!(c.minibatch_sizes, vec![1, 10, 100]);
        assert_eq!(c.n1_values, None);
    }

    #[test]
    fn rejects_bad_configs() {
        let with = |patch: &str| BASE.replacen('{', &format!("{{{patch},"), 1);
        assert!(ExperimentConfig::from_json(&with(r#""n1": 10"#)).is_err());
        assert!(ExperimentConfig::from_json(&with(r#""repeats": 0"#)).is_err());
        assert!(ExperimentConfig::from_json(&with(r#""bogus": 1"#)).is_err());
        assert!(ExperimentConfig::from_json(&with(r#""test_function": "cube""#)).is_err());
        let sweep = with(r#""n1_values": [10, 50]"#).replace("vr_compare", "n1_sweep");
        assert!(matches!(ExperimentConfig::from_json(&sweep), Err(Error::Config(_))));
        let no_budget = BASE.replace(r#""budget": 1000"#, r#""repeats": 2"#);
        assert!(ExperimentConfig::from_json(&no_budget).is_err());
    }

    #[test]
    fn sweep_values_are_capped_or_rejected() {
        let mut c = ExperimentConfig::from_json(BASE).unwrap();
        assert_eq!(c.n1_sweep_values(250).unwrap(), vec![100, 200, 250]);
        c.n1_values = Some(vec![20, 300]);
        assert!(c.n1_sweep_values(250).is_err());
        assert_eq!(c.n1_sweep_values(300).unwrap(), vec![20, 300]);
    }

    #[test]
    fn oracle_check_needs_nothing() {
        assert!(ExperimentConfig::from_json(r#"{"experiment": "oracle_check"}"#).is_ok());
    }
}
