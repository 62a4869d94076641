//! Euler–Maruyama Langevin transitions and the chain runner.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::GradientEstimator;
use crate::model::GradientModel;
use crate::param::ParamVector;
use crate::rng::{Purpose, RngStream};

/// Step size `h_l` as a function of the iteration.
///
/// JSON: `{"fixed": 0.001}` or `{"decay": {"a": 10.0, "b": 0.0018}}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StepSizeSchedule {
    Fixed(f64),
    /// `h_l = 1 / (a + b·l)`
    Decay { a: f64, b: f64 },
}

impl StepSizeSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StepSizeSchedule::Fixed(h) if h.is_finite() && h > 0.0 => Ok(()),
            StepSizeSchedule::Decay { a, b } if a.is_finite() && a > 0.0 && b.is_finite() && b >= 0.0 => {
                Ok(())
            }
            other => Err(Error::invalid(format!("invalid step size schedule {other:?}"))),
        }
    }

    pub fn at(&self, l: usize) -> f64 {
        match *self {
            StepSizeSchedule::Fixed(h) => h,
            StepSizeSchedule::Decay { a, b } => 1.0 / (a + b * l as f64),
        }
    }
}

/// `θ + h·g + √(2h)·ζ` for a given noise vector `ζ`.
pub fn sgld_step_with_noise(theta: &ParamVector, grad: &[f64], h: f64, noise: &[f64]) -> Result<ParamVector> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("step size must be positive, got {h}")));
    }
    let d = theta.dim();
    if grad.len() != d || noise.len() != d {
        return Err(Error::invalid(format!(
            "dimension mismatch: theta {d}, gradient {}, noise {}",
            grad.len(),
            noise.len()
        )));
    }
    let scale = (2.0 * h).sqrt();
    let next: Vec<f64> = (0..d).map(|k| theta[k] + h * grad[k] + scale * noise[k]).collect();
    if next.iter().all(|v| v.is_finite()) {
        Ok(ParamVector::from_finite(next))
    } else {
        Err(Error::Diverged {
            iteration: 0,
            step_size: h,
        })
    }
}

/// One Langevin step `θ + h·g + √(2h)·ζ`, `ζ ~ N(0, I_d)`.
///
/// Consumes exactly `d` standard normal draws from `rng`.
pub fn sgld_step(theta: &ParamVector, grad: &[f64], h: f64, rng: &mut RngStream) -> Result<ParamVector> {
    let noise: Vec<f64> = (0..theta.dim()).map(|_| rng.standard_normal()).collect();
    sgld_step_with_noise(theta, grad, h, &noise)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    /// Number of transitions `L`.
    pub iterations: usize,
    pub schedule: StepSizeSchedule,
    pub seed: u64,
    /// Chain index; selects the random streams together with `seed`.
    #[serde(default)]
    pub chain: u64,
    /// Samples with iteration `<= burn_in` are not recorded.
    #[serde(default)]
    pub burn_in: usize,
    #[serde(default = "one")]
    pub record_every: usize,
    /// Starting point; zeros when absent.
    #[serde(default)]
    pub init: Option<ParamVector>,
}

fn one() -> usize {
    1
}

impl ChainConfig {
    pub fn new(iterations: usize, schedule: StepSizeSchedule, seed: u64) -> Self {
        ChainConfig {
            iterations,
            schedule,
            seed,
            chain: 0,
            burn_in: 0,
            record_every: 1,
            init: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("a chain needs at least one iteration"));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::invalid(format!(
                "burn-in {} must be smaller than the {} iterations",
                self.burn_in, self.iterations
            )));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every must be at least 1"));
        }
        self.schedule.validate()
    }

    fn records(&self, iteration: usize) -> bool {
        iteration > self.burn_in && (iteration - self.burn_in - 1) % self.record_every == 0
    }
}

/// What the chain runner reports after every transition.
#[derive(Debug, Clone, Copy)]
pub struct StepInfo<'a> {
    /// `k` for the state `θ_k` reached after `k` transitions (starts at 1).
    pub iteration: usize,
    pub theta: &'a ParamVector,
    /// Cumulative per-datum gradient evaluations up to this state.
    pub grad_evals: u64,
    /// Step size of the transition that produced this state.
    pub step_size: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub theta: ParamVector,
    pub grad_evals: u64,
    pub step_size: f64,
}

/// Recorded samples in increasing iteration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChainTrace {
    records: Vec<TraceRecord>,
}

impl ChainTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a record; iterations must strictly increase and evaluation
    /// counts must not decrease.
    pub fn push(&mut self, record: TraceRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if record.iteration <= last.iteration || record.grad_evals < last.grad_evals {
                return Err(Error::invalid("trace records must be in chain order"));
            }
            if record.theta.dim() != last.theta.dim() {
                return Err(Error::invalid("trace dimension changed"));
            }
        }
        self.records.push(record);
        Ok(())
    }

    /// Builds a trace from bare samples labelled `1..=k`, with zero cost.
    pub fn from_samples(samples: Vec<ParamVector>) -> Result<Self> {
        let mut t = ChainTrace::new();
        for (k, theta) in samples.into_iter().enumerate() {
            t.push(TraceRecord {
                iteration: k + 1,
                theta,
                grad_evals: 0,
                step_size: 0.0,
            })?;
        }
        Ok(t)
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// Writes the trace as CSV.
    ///
    /// Columns are `iteration,grad_evals,h,theta_0,…` when `d <= 64`; above
    /// that only `theta_norm,theta_mean,theta_min,theta_max` are exported.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = self.records.first().map_or(0, |r| r.theta.dim());
        let mut header: Vec<String> = vec!["iteration".into(), "grad_evals".into(), "h".into()];
        if d <= MAX_EXPORT_DIM {
            header.extend((0..d).map(|k| format!("theta_{k}")));
        } else {
            header.extend(["theta_norm", "theta_mean", "theta_min", "theta_max"].map(String::from));
        }
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![r.iteration.to_string(), r.grad_evals.to_string(), r.step_size.to_string()];
            if d <= MAX_EXPORT_DIM {
                row.extend(r.theta.iter().map(|v| v.to_string()));
            } else {
                let t = r.theta.as_slice();
                let mean = t.iter().sum::<f64>() / d as f64;
                let min = t.iter().copied().fold(f64::INFINITY, f64::min);
                let max = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                row.extend([r.theta.norm_sq().sqrt(), mean, min, max].map(|v| v.to_string()));
            }
            w.write_record(&row)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<trace>".into(),
            source,
        })?;
        Ok(())
    }
}

const MAX_EXPORT_DIM: usize = 64;

/// Final state of a chain run.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutcome {
    pub theta: ParamVector,
    pub iterations: usize,
    pub grad_evals: u64,
}

/// Runs `config.iterations` transitions, calling `observer` after each one.
///
/// Minibatches are drawn from the `(seed, chain, Minibatch)` stream and noise
/// from `(seed, chain, Noise)`. Burn-in and thinning are not applied here;
/// the observer sees every state.
pub fn run_chain_with<M, F>(
    model: &M,
    estimator: &mut GradientEstimator,
    config: &ChainConfig,
    mut observer: F,
) -> Result<ChainOutcome>
where
    M: GradientModel + ?Sized,
    F: FnMut(&StepInfo<'_>) -> Result<()>,
{
    config.validate()?;
    let mut theta = match &config.init {
        Some(init) => {
            init.ensure_dim(model.dim())?;
            init.clone()
        }
        None => ParamVector::zeros(model.dim()),
    };
    let mut batch_rng = RngStream::for_chain(config.seed, config.chain, Purpose::Minibatch);
    let mut noise_rng = RngStream::for_chain(config.seed, config.chain, Purpose::Noise);
    let mut grad_evals = 0u64;
    for l in 0..config.iterations {
        let h = config.schedule.at(l);
        let (g, cost) = estimator
            .next_gradient(model, &theta, l, &mut batch_rng)
            .map_err(|e| e.at_iteration(l))?;
        theta = sgld_step(&theta, &g, h, &mut noise_rng).map_err(|e| e.at_iteration(l))?;
        grad_evals += cost;
        observer(&StepInfo {
            iteration: l + 1,
            theta: &theta,
            grad_evals,
            step_size: h,
        })?;
    }
    Ok(ChainOutcome {
        theta,
        iterations: config.iterations,
        grad_evals,
    })
}

/// Runs a chain and records the samples selected by burn-in and thinning.
pub fn run_chain<M: GradientModel + ?Sized>(
    model: &M,
    estimator: &mut GradientEstimator,
    config: &ChainConfig,
) -> Result<ChainTrace> {
    let mut trace = ChainTrace::new();
    run_chain_with(model, estimator, config, |step| {
        if config.records(step.iteration) {
            trace.push(TraceRecord {
                iteration: step.iteration,
                theta: step.theta.clone(),
                grad_evals: step.grad_evals,
                step_size: step.step_size,
            })?;
        }
        Ok(())
    })?;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::GaussianMeanModel;

    fn p(v: f64) -> ParamVector {
        ParamVector::scalar(v).unwrap()
    }

    #[test]
    fn step_with_forced_noise() {
        let theta = p(0.7);
        assert_eq!(sgld_step_with_noise(&theta, &[0.0], 0.3, &[0.0]).unwrap(), theta);
        assert_eq!(sgld_step_with_noise(&p(0.0), &[2.0], 0.5, &[0.0]).unwrap()[0], 1.0);
        assert_eq!(sgld_step_with_noise(&p(0.0), &[0.0], 0.5, &[1.0]).unwrap()[0], 1.0);
    }

    #[test]
    fn step_consumes_exactly_d_normals() {
        let theta = ParamVector::zeros(3);
        let mut a = RngStream::for_chain(1, 0, Purpose::Noise);
        let mut b = RngStream::for_chain(1, 0, Purpose::Noise);
        sgld_step(&theta, &[0.0; 3], 0.1, &mut a).unwrap();
        for _ in 0..3 {
            b.standard_normal();
        }
        assert_eq!(a.standard_normal().to_bits(), b.standard_normal().to_bits());
    }

    #[test]
    fn divergence_is_reported() {
        let err = sgld_step_with_noise(&p(1.0), &[f64::MAX], 10.0, &[0.0]).unwrap_err();
        assert!(matches!(err, Error::Diverged { step_size, .. } if step_size == 10.0));
        assert!(sgld_step_with_noise(&p(1.0), &[1.0], 0.0, &[0.0]).is_err());
    }

    #[test]
    fn noise_increment_variance_is_two_h() {
        let h = 0.05;
        let steps = 100_000;
        let mut rng = RngStream::for_chain(3, 0, Purpose::Noise);
        let zero = p(0.0);
        let incs: Vec<f64> = (0..steps)
            .map(|_| sgld_step(&zero, &[0.0], h, &mut rng).unwrap()[0])
            .collect();
        let mean = incs.iter().sum::<f64>() / steps as f64;
        let var = incs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (steps - 1) as f64;
        // Var of the sample variance of a Gaussian is 2σ⁴/(n−1).
        let se = (2.0 * (2.0 * h).powi(2) / (steps - 1) as f64).sqrt();
        assert!((var - 2.0 * h).abs() < 4.0 * se, "{var}");
    }

    #[test]
    fn schedules() {
        assert_eq!(StepSizeSchedule::Fixed(0.1).at(1000), 0.1);
        let d = StepSizeSchedule::Decay { a: 10.0, b: 1.8e-3 };
        assert_eq!(d.at(0), 0.1);
        assert!(d.at(10) < d.at(9));
        assert!(StepSizeSchedule::Fixed(0.0).validate().is_err());
        assert!(StepSizeSchedule::Decay { a: 0.0, b: 1.0 }.validate().is_err());
        assert!(StepSizeSchedule::Decay { a: 1.0, b: -1.0 }.validate().is_err());
        let json: StepSizeSchedule = serde_json::from_str(r#"{"decay":{"a":10,"b":0.0018}}"#).unwrap();
        assert_eq!(json, d);
        let fixed: StepSizeSchedule = serde_json::from_str(r#"{"fixed":0.001}"#).unwrap();
        assert_eq!(fixed, StepSizeSchedule::Fixed(0.001));
    }

    #[test]
    fn config_validation() {
        let mut c = ChainConfig::new(10, StepSizeSchedule::Fixed(0.1), 0);
        assert!(c.validate().is_ok());
        c.burn_in = 10;
        assert!(c.validate().is_err());
        c.burn_in = 0;
        c.record_every = 0;
        assert!(c.validate().is_err());
        assert!(ChainConfig::new(0, StepSizeSchedule::Fixed(0.1), 0).validate().is_err());
    }

    #[test]
    fn burn_in_and_thinning() {
        let m = GaussianMeanModel::from_values(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let mut est = GradientEstimator::plain(2, 4).unwrap();
        let mut c = ChainConfig::new(20, StepSizeSchedule::Fixed(0.01), 5);
        c.burn_in = 5;
        c.record_every = 4;
        let trace = run_chain(&m, &mut est, &c).unwrap();
        let its: Vec<usize> = trace.records().iter().map(|r| r.iteration).collect();
        assert_eq!(its, vec![6, 10, 14, 18]);
        let evals: Vec<u64> = trace.records().iter().map(|r| r.grad_evals).collect();
        assert_eq!(evals, vec![12, 20, 28, 36]);
    }

    #[test]
    fn cost_ledger_is_exact() {
        let m = GaussianMeanModel::from_values((0..40).map(|i| i as f64 * 0.05).collect()).unwrap();
        let c = ChainConfig::new(30, StepSizeSchedule::Fixed(1e-3), 2);
        let mut plain = GradientEstimator::plain(7, 40).unwrap();
        let t = run_chain(&m, &mut plain, &c).unwrap();
        assert_eq!(t.last().unwrap().grad_evals, 7 * 30);
        let mut vr = GradientEstimator::vr(20, 4, 5, 40).unwrap();
        let t = run_chain(&m, &mut vr, &c).unwrap();
        assert_eq!(t.last().unwrap().grad_evals, 4 * 2 * 30 + 20 * 30 / 5);
    }

    #[test]
    fn identical_seeds_identical_traces() {
        let m = GaussianMeanModel::from_values((0..40).map(|i| (i as f64).cos()).collect()).unwrap();
        let c = ChainConfig::new(50, StepSizeSchedule::Fixed(1e-3), 11);
        let a = run_chain(&m, &mut GradientEstimator::vr(10, 3, 4, 40).unwrap(), &c).unwrap();
        let b = run_chain(&m, &mut GradientEstimator::vr(10, 3, 4, 40).unwrap(), &c).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn minibatch_size_does_not_shift_the_noise() {
        // With a zero-gradient model the path is pure noise, so any two
        // estimators must produce the same trace.
        struct Flat(usize);
        impl GradientModel for Flat {
            fn dim(&self) -> usize {
                1
            }
            fn num_data(&self) -> usize {
                self.0
            }
            fn log_prior_grad_into(&self, _: &[f64], out: &mut [f64]) {
                out[0] = 0.0;
            }
            fn datum_loglik_grad_into(&self, _: &[f64], _: usize, out: &mut [f64]) {
                out[0] = 0.0;
            }
        }
        let c = ChainConfig::new(25, StepSizeSchedule::Fixed(0.01), 4);
        let a = run_chain(&Flat(10), &mut GradientEstimator::plain(1, 10).unwrap(), &c).unwrap();
        let b = run_chain(&Flat(10), &mut GradientEstimator::plain(9, 10).unwrap(), &c).unwrap();
        let ta: Vec<&ParamVector> = a.records().iter().map(|r| &r.theta).collect();
        let tb: Vec<&ParamVector> = b.records().iter().map(|r| &r.theta).collect();
        assert_eq!(ta, tb);
    }

    #[test]
    fn diverging_chain_aborts_with_iteration() {
        let m = GaussianMeanModel::from_values(vec![1.0; 100]).unwrap();
        let c = ChainConfig::new(10_000, StepSizeSchedule::Fixed(1.0), 0);
        let err = run_chain(&m, &mut GradientEstimator::plain(100, 100).unwrap(), &c).unwrap_err();
        assert!(err.is_divergence(), "{err}");
    }

    #[test]
    fn trace_csv_layout() {
        let t = ChainTrace::from_samples(vec![p(0.5), p(-1.25)]).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "iteration,grad_evals,h,theta_0\n1,0,0,0.5\n2,0,0,-1.25\n"
        );
        let wide = ChainTrace::from_samples(vec![ParamVector::new(vec![1.0; 65]).unwrap()]).unwrap();
        let mut buf = Vec::new();
        wide.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iteration,grad_evals,h,theta_norm,theta_mean,theta_min,theta_max\n"));
    }
}
