use rayon::prelude::*;

use crate::data::{read_numeric_csv_file, Dataset};
use crate::error::{Error, Result};
use crate::estimator::{EstimatorSpec, GradientEstimator};
use crate::model::GradientModel;
use crate::models::{
    gaussian_posterior_phi_bar, generate_gaussian_data, generate_logistic_data, labeled_points_from_rows,
    train_test_split, GaussianMeanModel, LabeledPoint, LogisticRegressionModel, PredictiveAverage, TestFunction,
};
use crate::rng::{Purpose, RngStream};
use crate::sampler::{run_chain_with, ChainConfig};

use super::config::{ExperimentConfig, ExperimentKind, ModelSpec};
use super::metrics::{median, ExperimentOutput, MetricRow};

/// A model together with the reference used to score its chains.
pub enum Workload {
    /// Scored by `(φ̂ − φ̄)²` against the analytic posterior average.
    Gaussian {
        model: GaussianMeanModel,
        phi: TestFunction,
        phi_bar: f64,
    },
    /// Scored by posterior-predictive test metrics.
    Logistic {
        model: LogisticRegressionModel,
        test: Dataset<LabeledPoint>,
    },
}

impl Workload {
    pub fn model(&self) -> &dyn GradientModel {
        match self {
            Workload::Gaussian { model, .. } => model,
            Workload::Logistic { model, .. } => model,
        }
    }

    pub fn num_data(&self) -> usize {
        self.model().num_data()
    }
}

/// Builds the dataset and model described by `config`.
///
/// Data come from the `(data_seed, 0, Data)` stream, with `data_seed`
/// defaulting to the master seed; logistic splits use the `Split` stream.
pub fn build_workload(config: &ExperimentConfig) -> Result<Workload> {
    let spec = config
        .model
        .as_ref()
        .ok_or_else(|| Error::Config("missing model section".into()))?;
    let data_rng = |data_seed: Option<u64>, purpose| RngStream::for_chain(data_seed.unwrap_or(config.seed), 0, purpose);
    match spec {
        ModelSpec::GaussianMean {
            n,
            theta_true,
            data_seed,
        } => {
            let data = generate_gaussian_data(*n, *theta_true, &mut data_rng(*data_seed, Purpose::Data))?;
            let model = GaussianMeanModel::new(data)?;
            let phi = config.phi()?;
            let phi_bar = gaussian_posterior_phi_bar(&model, &phi)?;
            Ok(Workload::Gaussian { model, phi, phi_bar })
        }
        ModelSpec::Logistic {
            n,
            dim,
            theta_true,
            prior_scale,
            test_fraction,
            data_seed,
        } => {
            let truth = theta_true.clone().unwrap_or_else(|| vec![1.0; *dim]);
            if truth.len() != *dim {
                return Err(Error::Config(format!(
                    "theta_true has {} entries for dim {dim}",
                    truth.len()
                )));
            }
            let all = generate_logistic_data(*n, &truth, &mut data_rng(*data_seed, Purpose::Data))?;
            let (train, test) = train_test_split(&all, *test_fraction, &mut data_rng(*data_seed, Purpose::Split))?;
            Ok(Workload::Logistic {
                model: LogisticRegressionModel::new(train, *prior_scale)?,
                test,
            })
        }
        ModelSpec::LogisticCsv {
            path,
            prior_scale,
            test_fraction,
            data_seed,
        } => {
            let all = labeled_points_from_rows(&read_numeric_csv_file(path)?)?;
            let (train, test) = train_test_split(&all, *test_fraction, &mut data_rng(*data_seed, Purpose::Split))?;
            Ok(Workload::Logistic {
                model: LogisticRegressionModel::new(train, *prior_scale)?,
                test,
            })
        }
    }
}

/// Largest `L` whose ledger cost fits in `budget`.
pub fn iterations_within_budget(spec: &EstimatorSpec, budget: u64, population: usize) -> usize {
    let (mut lo, mut hi) = (0usize, budget as usize);
    while lo < hi {
        let mid = lo + (hi - lo + 1) / 2;
        if spec.ledger_cost(mid, population) <= budget {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    lo
}

/// One `(coordinate, repeat)` chain.
struct Job {
    coordinate: String,
    spec: EstimatorSpec,
    iterations: usize,
    repeat: usize,
}

/// Gradient-evaluation thresholds `⌈k·T/K⌉` for `k = 1..K−1`; the final state
/// is always a checkpoint on top of these.
fn checkpoint_thresholds(budget: u64, count: usize) -> Vec<u64> {
    let k = count as u64;
    (1..k).map(|i| (i * budget).div_ceil(k)).collect()
}

fn run_job(workload: &Workload, config: &ExperimentConfig, job: &Job) -> Result<Vec<MetricRow>> {
    let budget = config.budget.unwrap_or(0);
    let population = workload.num_data();
    let model = workload.model();
    let thresholds = checkpoint_thresholds(budget, config.checkpoints);
    let mut next = 0usize;
    let mut phi_sum = 0.0;
    let mut count = 0usize;
    let mut completed = 0usize;
    let mut predictive = match workload {
        Workload::Logistic { test, .. } => Some(PredictiveAverage::new(test.clone())?),
        Workload::Gaussian { .. } => None,
    };
    let mut rows = Vec::new();
    let row = |grad_evals: u64| MetricRow {
        experiment: config.experiment.name().to_string(),
        coordinate: job.coordinate.clone(),
        repeat: Some(job.repeat),
        grad_evals,
        data_passes: grad_evals as f64 / population as f64,
        phi_hat: None,
        sq_err: None,
        nll: None,
        error_rate: None,
        diverged: false,
    };

    let schedule = config
        .schedule
        .ok_or_else(|| Error::Config("missing step size schedule".into()))?;
    let mut chain = ChainConfig::new(job.iterations, schedule, config.seed);
    chain.chain = job.repeat as u64;
    chain.init = config.init.clone();
    let mut estimator = GradientEstimator::new(job.spec, population)?;
    let outcome = run_chain_with(model, &mut estimator, &chain, |step| {
        completed = step.iteration;
        count += 1;
        if let Workload::Gaussian { phi, .. } = workload {
            phi_sum += phi.eval(step.theta);
        }
        if let Some(p) = predictive.as_mut() {
            p.record(step.theta);
        }
        let crossed = next < thresholds.len() && step.grad_evals >= thresholds[next];
        if crossed || step.iteration == job.iterations {
            while next < thresholds.len() && thresholds[next] <= step.grad_evals {
                next += 1;
            }
            let mut r = row(step.grad_evals);
            match workload {
                Workload::Gaussian { phi_bar, .. } => {
                    let phi_hat = phi_sum / count as f64;
                    r.phi_hat = Some(phi_hat);
                    r.sq_err = Some((phi_hat - phi_bar).powi(2));
                }
                Workload::Logistic { .. } => {
                    if let Some(m) = predictive.as_ref().and_then(PredictiveAverage::metrics) {
                        r.nll = Some(m.nll);
                        r.error_rate = Some(m.error_rate);
                    }
                }
            }
            rows.push(r);
        }
        Ok(())
    });
    match outcome {
        Ok(_) => Ok(rows),
        Err(e) if e.is_divergence() => {
            log::warn!("{} repeat {} diverged: {e}", job.coordinate, job.repeat);
            let mut r = row(job.spec.ledger_cost(completed + 1, population));
            r.diverged = true;
            rows.push(r);
            Ok(rows)
        }
        Err(e) => Err(e),
    }
}

fn run_jobs(workload: &Workload, config: &ExperimentConfig, jobs: &[Job], threads: usize) -> Result<Vec<MetricRow>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let per_job: Vec<Vec<MetricRow>> =
        pool.install(|| jobs.par_iter().map(|job| run_job(workload, config, job)).collect::<Result<_>>())?;
    Ok(per_job.into_iter().flatten().collect())
}

fn expect_kind(config: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    config.validate()?;
    if config.experiment != kind {
        return Err(Error::Config(format!(
            "expected a {} config, got {}",
            kind.name(),
            config.experiment.name()
        )));
    }
    Ok(())
}

fn jobs_for(config: &ExperimentConfig, specs: &[(String, EstimatorSpec, usize)]) -> Vec<Job> {
    specs
        .iter()
        .flat_map(|(coordinate, spec, iterations)| {
            (0..config.repeats).map(move |repeat| Job {
                coordinate: coordinate.clone(),
                spec: *spec,
                iterations: *iterations,
                repeat,
            })
        })
        .collect()
}

/// Plain SGLD for every minibatch size `n` with `L = ⌊T/n⌋` steps.
///
/// After the checkpoint rows, one `median` row per `n` carries the median
/// final `(φ̂ − φ̄)²` over repeats (diverged repeats count as `+∞`).
/// `threads = 0` uses every available core.
pub fn run_budget_sweep(config: &ExperimentConfig, threads: usize) -> Result<ExperimentOutput> {
    expect_kind(config, ExperimentKind::BudgetSweep)?;
    let workload = build_workload(config)?;
    let population = workload.num_data();
    let budget = config.budget.unwrap_or(0);
    let largest = *config.minibatch_sizes.iter().max().unwrap_or(&0);
    if budget < largest as u64 {
        return Err(Error::invalid(format!(
            "budget {budget} gives a zero-length chain for n={largest}"
        )));
    }
    let mut specs = Vec::new();
    for &n in &config.minibatch_sizes {
        let spec = EstimatorSpec::Plain { n };
        spec.validate(population)?;
        specs.push((n.to_string(), spec, (budget / n as u64) as usize));
    }
    let rows = run_jobs(&workload, config, &jobs_for(config, &specs), threads)?;
    let mut output = ExperimentOutput { rows };
    let mut summaries = Vec::new();
    for (coordinate, spec, iterations) in &specs {
        let finals: Vec<f64> = (0..config.repeats)
            .map(|r| match output.series(coordinate, r).last() {
                Some(row) if !row.diverged => row.sq_err.unwrap_or(f64::NAN),
                _ => f64::INFINITY,
            })
            .collect();
        let grad_evals = spec.ledger_cost(*iterations, population);
        summaries.push(MetricRow {
            experiment: config.experiment.name().to_string(),
            coordinate: coordinate.clone(),
            repeat: None,
            grad_evals,
            data_passes: grad_evals as f64 / population as f64,
            phi_hat: None,
            sq_err: Some(median(&finals)),
            nll: None,
            error_rate: None,
            diverged: false,
        });
    }
    output.rows.extend(summaries);
    Ok(output)
}

fn budgeted(spec: EstimatorSpec, budget: u64, population: usize) -> Result<(String, EstimatorSpec, usize)> {
    spec.validate(population)?;
    let iterations = iterations_within_budget(&spec, budget, population);
    if iterations == 0 {
        return Err(Error::invalid(format!(
            "budget {budget} does not cover one step of {}",
            spec.label()
        )));
    }
    Ok((spec.label(), spec, iterations))
}

/// `Plain(n₂)`, `VR(n₁, n₂, m)` and optionally `SvrgLD(n₂, m)`, each run for
/// as many steps as fit in the budget, all with the same master seed.
pub fn run_vr_compare(config: &ExperimentConfig, threads: usize) -> Result<ExperimentOutput> {
    expect_kind(config, ExperimentKind::VrCompare)?;
    let workload = build_workload(config)?;
    let population = workload.num_data();
    let budget = config.budget.unwrap_or(0);
    let (n1, n2, m) = (config.n1, config.n2, config.m);
    let mut specs = vec![
        budgeted(EstimatorSpec::Plain { n: n2 }, budget, population)?,
        budgeted(EstimatorSpec::Vr { n1, n2, m }, budget, population)?,
    ];
    if config.include_svrg_ld {
        specs.push(budgeted(EstimatorSpec::SvrgLd { n2, m }, budget, population)?);
    }
    let rows = run_jobs(&workload, config, &jobs_for(config, &specs), threads)?;
    Ok(ExperimentOutput { rows })
}

/// One `VR(n₁, n₂, m)` series per anchor size plus the `Plain(n₂)` baseline.
pub fn run_n1_sweep(config: &ExperimentConfig, threads: usize) -> Result<ExperimentOutput> {
    expect_kind(config, ExperimentKind::N1Sweep)?;
    let workload = build_workload(config)?;
    let population = workload.num_data();
    let budget = config.budget.unwrap_or(0);
    let (n2, m) = (config.n2, config.m);
    let mut specs = vec![budgeted(EstimatorSpec::Plain { n: n2 }, budget, population)?];
    for n1 in config.n1_sweep_values(population)? {
        specs.push(budgeted(EstimatorSpec::Vr { n1, n2, m }, budget, population)?);
    }
    let rows = run_jobs(&workload, config, &jobs_for(config, &specs), threads)?;
    Ok(ExperimentOutput { rows })
}

/// Dispatches on `config.experiment`; `oracle_check` produces no CSV and is
/// rejected here.
pub fn run_experiment(config: &ExperimentConfig, threads: usize) -> Result<ExperimentOutput> {
    match config.experiment {
        ExperimentKind::BudgetSweep => run_budget_sweep(config, threads),
        ExperimentKind::VrCompare => run_vr_compare(config, threads),
        ExperimentKind::N1Sweep => run_n1_sweep(config, threads),
        ExperimentKind::OracleCheck => Err(Error::Config(
            "oracle_check produces a report, not a CSV; use run_oracle_check".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::StepSizeSchedule;

    fn gaussian(kind: ExperimentKind, n: usize) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(kind);
        c.model = Some(ModelSpec::GaussianMean {
            n,
            theta_true: 1.0,
            data_seed: None,
        });
        c.schedule = Some(StepSizeSchedule::Fixed(1e-3));
        c.repeats = 3;
        c.checkpoints = 5;
        c.seed = 17;
        c
    }

    #[test]
    fn thresholds() {
        assert_eq!(checkpoint_thresholds(100, 4), vec![25, 50, 75]);
        assert_eq!(checkpoint_thresholds(10, 3), vec![4, 7]);
        assert!(checkpoint_thresholds(10, 1).is_empty());
    }

    #[test]
    fn budget_iterations() {
        let vr = EstimatorSpec::Vr { n1: 100, n2: 10, m: 10 };
        let l = iterations_within_budget(&vr, 50_000, 1000);
        assert!(vr.ledger_cost(l, 1000) <= 50_000 && vr.ledger_cost(l + 1, 1000) > 50_000);
        assert_eq!(iterations_within_budget(&EstimatorSpec::Plain { n: 10 }, 50_000, 1000), 5000);
        assert_eq!(iterations_within_budget(&EstimatorSpec::Plain { n: 10 }, 9, 1000), 0);
    }

    #[test]
    fn budget_sweep_rows_follow_the_ledger() {
        let mut c = gaussian(ExperimentKind::BudgetSweep, 200);
        c.budget = Some(2000);
        c.minibatch_sizes = vec![1, 10, 100];
        let out = run_budget_sweep(&c, 2).unwrap();
        for n in [1u64, 10, 100] {
            for r in 0..3 {
                let s = out.series(&n.to_string(), r);
                assert_eq!(s.len(), 5);
                assert!(s.windows(2).all(|w| w[0].grad_evals < w[1].grad_evals));
                assert!(s.iter().all(|row| row.grad_evals % n == 0));
                assert_eq!(s.last().unwrap().grad_evals, 2000);
            }
        }
        let medians: Vec<&MetricRow> = out.rows.iter().filter(|r| r.is_summary()).collect();
        assert_eq!(medians.len(), 3);
    }

    #[test]
    fn budget_smaller_than_a_batch_is_rejected() {
        let mut c = gaussian(ExperimentKind::BudgetSweep, 200);
        c.budget = Some(50);
        assert!(matches!(run_budget_sweep(&c, 1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn divergence_becomes_a_flagged_row() {
        let mut c = gaussian(ExperimentKind::BudgetSweep, 100);
        c.schedule = Some(StepSizeSchedule::Fixed(5.0));
        c.minibatch_sizes = vec![100];
        c.budget = Some(100_000);
        c.repeats = 1;
        let out = run_budget_sweep(&c, 1).unwrap();
        let s = out.series("100", 0);
        assert!(s.last().unwrap().diverged);
        let csv = out.to_csv_string().unwrap();
        assert!(csv.contains(",diverged,"));
        assert!(!csv.contains("NaN"));
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let mut c = gaussian(ExperimentKind::VrCompare, 300);
        c.budget = Some(3000);
        c.n1 = 50;
        c.n2 = 5;
        c.m = 5;
        let a = run_vr_compare(&c, 1).unwrap().to_csv_string().unwrap();
        let b = run_vr_compare(&c, 4).unwrap().to_csv_string().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn svrg_ld_matches_full_anchor_vr() {
        let mut c = gaussian(ExperimentKind::VrCompare, 60);
        c.budget = Some(3000);
        c.n1 = 60;
        c.n2 = 5;
        c.m = 4;
        c.include_svrg_ld = true;
        let out = run_vr_compare(&c, 2).unwrap();
        for r in 0..3 {
            let vr = out.series("vr_n1_60_n2_5_m4", r);
            let svrg = out.series("svrg_ld_n2_5_m4", r);
            assert_eq!(vr.len(), svrg.len());
            for (a, b) in vr.iter().zip(&svrg) {
                assert_eq!(a.grad_evals, b.grad_evals);
                assert_eq!(a.phi_hat.map(f64::to_bits), b.phi_hat.map(f64::to_bits));
            }
        }
    }

    #[test]
    fn n1_above_population_is_rejected() {
        let mut c = gaussian(ExperimentKind::N1Sweep, 100);
        c.budget = Some(5000);
        c.n1_values = Some(vec![50, 150]);
        assert!(matches!(run_n1_sweep(&c, 1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn logistic_rows_carry_test_metrics() {
        let mut c = ExperimentConfig::new(ExperimentKind::VrCompare);
        c.model = Some(ModelSpec::Logistic {
            n: 200,
            dim: 3,
            theta_true: None,
            prior_scale: 1.0,
            test_fraction: 0.25,
            data_seed: None,
        });
        c.schedule = Some(StepSizeSchedule::Fixed(1e-3));
        c.budget = Some(4000);
        c.n1 = 40;
        c.n2 = 5;
        c.repeats = 2;
        c.checkpoints = 4;
        let out = run_vr_compare(&c, 2).unwrap();
        assert!(!out.rows.is_empty());
        for r in &out.rows {
            assert!(r.phi_hat.is_none() && r.sq_err.is_none());
            let e = r.error_rate.unwrap();
            assert!((0.0..=1.0).contains(&e) && r.nll.unwrap() > 0.0);
        }
    }
}
