//! Self-check suite: enumeration against closed forms, unbiasedness and
//! gradient checks on small random instances.

use std::fmt;

use crate::diagnostics::{
    delta_v_variance_exact, delta_v_variance_formula, exhaustive_vr_mean_with, finite_difference_gradient,
    gamma_at, lambda_at, vr_delta_v_variance_exact, VrDecomposition,
};
use crate::error::Result;
use crate::estimator::{VrGradientParts, VrState};
use crate::minibatch::{sample_without_replacement, MinibatchIndexSet};
use crate::model::{datum_gradients, full_gradient, GradientModel};
use crate::models::{generate_logistic_data, GaussianMeanModel, LogisticRegressionModel};
use crate::param::ParamVector;
use crate::rng::{Purpose, RngStream};

/// Stand-in for the variance-reduced gradient pieces, so altered estimators
/// can be run through the same checks.
pub type PartsFn<'a> =
    dyn Fn(&dyn GradientModel, &VrState, &ParamVector, &MinibatchIndexSet) -> Result<VrGradientParts> + Sync + 'a;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCase {
    pub name: String,
    pub passed: bool,
    /// Inputs and the mismatch, filled in for failures.
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OracleReport {
    pub cases: Vec<OracleCase>,
}

impl OracleReport {
    pub fn all_passed(&self) -> bool {
        self.cases.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &OracleCase> {
        self.cases.iter().filter(|c| !c.passed)
    }

    fn push(&mut self, name: impl Into<String>, outcome: Result<std::result::Result<(), String>>) {
        let (passed, detail) = match outcome {
            Ok(Ok(())) => (true, String::new()),
            Ok(Err(why)) => (false, why),
            Err(e) => (false, format!("error: {e}")),
        };
        self.cases.push(OracleCase {
            name: name.into(),
            passed,
            detail,
        });
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.cases.iter().map(|c| c.name.len()).max().unwrap_or(0);
        for c in &self.cases {
            writeln!(f, "{:<width$}  {}", c.name, if c.passed { "PASS" } else { "FAIL" })?;
            if !c.passed {
                writeln!(f, "    {}", c.detail)?;
            }
        }
        let failed = self.failures().count();
        write!(f, "{} cases, {} failed", self.cases.len(), failed)
    }
}

fn default_parts(model: &dyn GradientModel, state: &VrState, theta: &ParamVector, batch: &MinibatchIndexSet) -> Result<VrGradientParts> {
    state.gradient_parts(model, theta, batch)
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// `total = A + B + C` to `1e-10` relative to the larger of `|total|` and
/// `|A| + |B| + |C|`; the total is exactly zero in some degenerate cases
/// (e.g. `n₁ = N` with per-datum differences all equal).
pub fn decomposition_matches(d: &VrDecomposition) -> bool {
    let scale = d.total.abs().max(d.a.abs() + d.b.abs() + d.c.abs());
    (d.total - (d.a + d.b + d.c)).abs() <= 1e-10 * scale
}

fn vec_close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * y.abs().max(1.0))
}

fn random_gaussian(n: usize, rng: &mut RngStream) -> GaussianMeanModel {
    GaussianMeanModel::from_values((0..n).map(|_| rng.normal(0.5, 1.5)).collect()).expect("non-empty finite data")
}

fn random_logistic(n: usize, dim: usize, rng: &mut RngStream) -> LogisticRegressionModel {
    let truth: Vec<f64> = (0..dim).map(|_| rng.normal(0.0, 1.0)).collect();
    let data = generate_logistic_data(n, &truth, rng).expect("non-empty data");
    LogisticRegressionModel::new(data, 1.0).expect("consistent features")
}

fn random_point(dim: usize, rng: &mut RngStream) -> ParamVector {
    ParamVector::new((0..dim).map(|_| rng.normal(0.0, 1.0)).collect()).expect("normal draws are finite")
}

fn data_summary(model: &GaussianMeanModel) -> String {
    format!("{:?}", model.data().items())
}

/// Runs every oracle with the crate's own estimator.
pub fn run_oracle_check(seed: u64) -> OracleReport {
    run_oracle_check_with(seed, &default_parts)
}

/// Runs every oracle with `parts` standing in for the variance-reduced
/// gradient pieces.
pub fn run_oracle_check_with(seed: u64, parts: &PartsFn<'_>) -> OracleReport {
    let mut report = OracleReport::default();
    let mut rng = RngStream::for_chain(seed, 0, Purpose::Aux);

    // ΔV enumeration against the closed form.
    for big_n in 2..=6 {
        let model = random_gaussian(big_n, &mut rng);
        let theta = ParamVector::scalar(rng.normal(0.0, 1.0)).expect("finite");
        for n in 1..=big_n {
            let outcome = (|| {
                let m = &model;
                let exact = delta_v_variance_exact(m, &theta, n)?;
                let formula = delta_v_variance_formula(big_n, n, gamma_at(m, &theta)?);
                Ok(if rel_close(exact, formula, 1e-10) || (exact.abs() < 1e-12 && formula.abs() < 1e-12) {
                    Ok(())
                } else {
                    Err(format!(
                        "data {} theta {} n {n}: enumerated {exact:e}, formula {formula:e}",
                        data_summary(m),
                        theta[0]
                    ))
                })
            })();
            report.push(format!("delta_v N={big_n} n={n}"), outcome);
        }
    }

    // A + B + C against the enumerated variance-reduced ΔV.
    for big_n in 3..=5 {
        let models: [(&str, Box<dyn GradientModel>); 2] = [
            ("gaussian", Box::new(random_gaussian(big_n, &mut rng))),
            ("logistic", Box::new(random_logistic(big_n, 2, &mut rng))),
        ];
        for (label, model) in models {
            let theta = random_point(model.dim(), &mut rng);
            let anchor = random_point(model.dim(), &mut rng);
            for n1 in 2..=big_n {
                for n2 in 1..n1 {
                    let outcome = (|| {
                        let d = vr_delta_v_variance_exact(model.as_ref(), &theta, &anchor, n1, n2)?;
                        Ok(if decomposition_matches(&d) {
                            Ok(())
                        } else {
                            Err(format!(
                                "{label} theta {:?} anchor {:?} alpha {:?} beta {:?} n1 {n1} n2 {n2}: enumerated {:e}, A {:e} B {:e} C {:e}",
                                theta.as_slice(),
                                anchor.as_slice(),
                                datum_gradients(model.as_ref(), &theta),
                                datum_gradients(model.as_ref(), &anchor),
                                d.total,
                                d.a,
                                d.b,
                                d.c
                            ))
                        })
                    })();
                    report.push(format!("decomposition {label} N={big_n} n1={n1} n2={n2}"), outcome);
                }
            }
        }
    }

    // Exhaustive unbiasedness, per term.
    for big_n in 2..=6 {
        let sizes = [(big_n, 1), (big_n, big_n - 1), (2, 1)];
        let models: [(&str, Box<dyn GradientModel>); 2] = [
            ("gaussian", Box::new(random_gaussian(big_n, &mut rng))),
            ("logistic", Box::new(random_logistic(big_n, 2, &mut rng))),
        ];
        for (label, model) in models {
            let d = model.dim();
            let theta = random_point(d, &mut rng);
            let anchor = random_point(d, &mut rng);
            let mut seen = Vec::new();
            for &(n1, n2) in &sizes {
                if seen.contains(&(n1, n2)) {
                    continue;
                }
                seen.push((n1, n2));
                let outcome = exhaustive_unbiased(model.as_ref(), &theta, &anchor, n1, n2, parts);
                report.push(format!("unbiased {label} N={big_n} n1={n1} n2={n2}"), outcome);
            }
        }
    }

    // Monte Carlo unbiasedness at a size too large to enumerate.
    report.push("unbiased monte carlo N=50", monte_carlo_unbiased(seed, parts));

    // λ is nonnegative.
    let lambda_outcome = (|| -> Result<std::result::Result<(), String>> {
        for trial in 0..100 {
            let big_n = 2 + rng.below(30) as usize;
            let model = random_gaussian(big_n, &mut rng);
            let n1 = 2 + rng.below(big_n as u64 - 1) as usize;
            let n2 = 1 + rng.below(n1 as u64 - 1) as usize;
            let anchor = ParamVector::scalar(rng.normal(0.0, 2.0)).expect("finite");
            let lambda = lambda_at(&model, &anchor, n1, n2)?;
            if lambda < -1e-10 {
                return Ok(Err(format!("trial {trial}: N {big_n} n1 {n1} n2 {n2} lambda {lambda:e}")));
            }
        }
        Ok(Ok(()))
    })();
    report.push("lambda nonnegative", lambda_outcome);

    // Model gradients against central differences.
    let models: [(&str, Box<dyn GradientModel>); 2] = [
        ("gaussian", Box::new(random_gaussian(40, &mut rng))),
        ("logistic", Box::new(random_logistic(40, 3, &mut rng))),
    ];
    for (label, m) in models {
        let outcome = (|| {
            for _ in 0..20 {
                let theta = random_point(m.dim(), &mut rng);
                let exact = full_gradient(m.as_ref(), &theta)?;
                let fd = finite_difference_gradient(m.as_ref(), &theta, 1e-5)?;
                let err: f64 = exact.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let scale = exact.norm_sq().sqrt().max(1e-8);
                if err / scale >= 1e-6 {
                    return Ok(Err(format!(
                        "theta {:?}: analytic {:?}, finite difference {fd:?}",
                        theta.as_slice(),
                        exact.as_slice()
                    )));
                }
            }
            Ok(Ok(()))
        })();
        report.push(format!("gradient check {label}"), outcome);
    }

    report
}

fn sum_rows(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut s = vec![0.0; rows[0].len()];
    for r in rows {
        for (a, v) in s.iter_mut().zip(r) {
            *a += v;
        }
    }
    s
}

fn exhaustive_unbiased(
    model: &dyn GradientModel,
    theta: &ParamVector,
    anchor: &ParamVector,
    n1: usize,
    n2: usize,
    parts: &PartsFn<'_>,
) -> Result<std::result::Result<(), String>> {
    let mean = exhaustive_vr_mean_with(model, theta, anchor, n1, n2, |state, theta, batch| {
        parts(model, state, theta, batch)
    })?;
    let alpha = sum_rows(&datum_gradients(model, theta));
    let beta = sum_rows(&datum_gradients(model, anchor));
    let diff: Vec<f64> = alpha.iter().zip(&beta).map(|(a, b)| a - b).collect();
    let full = full_gradient(model, theta)?;
    let context = format!(
        "theta {:?} anchor {:?} N {} n1 {n1} n2 {n2}",
        theta.as_slice(),
        anchor.as_slice(),
        model.num_data()
    );
    let checks: [(&str, &[f64], &[f64]); 3] = [
        ("anchor term", &mean.anchor_term, &beta),
        ("correction term", &mean.correction, &diff),
        ("total", &mean.total, &full),
    ];
    for (term, got, want) in checks {
        if !vec_close(got, want, 1e-12) {
            return Ok(Err(format!("{context}: {term} averages to {got:?}, expected {want:?}")));
        }
    }
    Ok(Ok(()))
}

fn monte_carlo_unbiased(seed: u64, parts: &PartsFn<'_>) -> Result<std::result::Result<(), String>> {
    const DRAWS: usize = 100_000;
    let (big_n, n1, n2) = (50, 20, 5);
    let mut data_rng = RngStream::for_chain(seed, 1, Purpose::Aux);
    let model = random_logistic(big_n, 3, &mut data_rng);
    let theta = random_point(3, &mut data_rng);
    let anchor = random_point(3, &mut data_rng);
    let full = full_gradient(&model, &theta)?;
    let mut rng = RngStream::for_chain(seed, 2, Purpose::Minibatch);
    let d = model.dim();
    let mut sum = vec![0.0; d];
    let mut sum_sq = vec![0.0; d];
    for _ in 0..DRAWS {
        let pi = sample_without_replacement(big_n, n1, &mut rng)?;
        let state = VrState::from_anchor_batch(&model, &anchor, &pi)?;
        let batch = sample_without_replacement(big_n, n2, &mut rng)?;
        let g = parts(&model, &state, &theta, &batch)?.total()?;
        for k in 0..d {
            sum[k] += g[k];
            sum_sq[k] += g[k] * g[k];
        }
    }
    let n = DRAWS as f64;
    for k in 0..d {
        let mean = sum[k] / n;
        let var = (sum_sq[k] - n * mean * mean) / (n - 1.0);
        let se = (var / n).sqrt();
        if (mean - full[k]).abs() > 4.0 * se {
            return Ok(Err(format!(
                "theta {:?} anchor {:?} N {big_n} n1 {n1} n2 {n2}: component {k} mean {mean} vs exact {} (se {se:e})",
                theta.as_slice(),
                anchor.as_slice(),
                full[k]
            )));
        }
    }
    Ok(Ok(()))
}
