use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::Error;

type PhiFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A test function `φ` whose posterior average is being estimated.
///
/// `Identity` reads the first coordinate; `Square` is the squared Euclidean
/// norm, which is `θ²` in one dimension.
#[derive(Clone)]
pub enum TestFunction {
    Identity,
    Square,
    Custom { name: String, f: PhiFn },
}

impl TestFunction {
    pub fn custom(name: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        TestFunction::Custom {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn eval(&self, theta: &[f64]) -> f64 {
        match self {
            TestFunction::Identity => theta[0],
            TestFunction::Square => theta.iter().map(|v| v * v).sum(),
            TestFunction::Custom { f, .. } => f(theta),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            TestFunction::Identity => "identity",
            TestFunction::Square => "square",
            TestFunction::Custom { name, .. } => name,
        }
    }
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TestFunction({})", self.name())
    }
}

impl FromStr for TestFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "identity" => Ok(TestFunction::Identity),
            "square" => Ok(TestFunction::Square),
            other => Err(Error::Config(format!(
                "unknown test function `{other}` (expected `identity` or `square`)"
            ))),
        }
    }
}
