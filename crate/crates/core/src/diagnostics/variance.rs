//! Minibatch variance functionals.
//!
//! Notation: `αᵢ = ∇log p(dᵢ|θ)` at the current point and `βᵢ` the same
//! gradient at the anchor `θ̃`. Expectations are over the minibatch draws only;
//! the points are fixed, so every quantity here is exact.
//!
//! For a plain size-`n` batch the likelihood-gradient error
//! `ΔV = Σᵢ αᵢ − (N/n) Σ_{i∈S} αᵢ` satisfies
//!
//! ```text
//! E‖ΔV‖² = (N − n) N² Γ / n,
//! Γ = (1/N²) Σ_{i,j} αᵢ·αⱼ − (1/(N(N−1))) Σ_{i≠j} αᵢ·αⱼ
//!   = Σᵢ ‖αᵢ − ᾱ‖² / (N(N−1)).
//! ```
//!
//! For the variance-reduced estimator with anchor batch `π` (`n₁`) and
//! correction batch `π̃` (`n₂`), `E‖ΔV‖² = A + B + C` with
//!
//! ```text
//! A = (N/n₂ − 1) Σ_{ij} αᵢ·αⱼ − 2 c₂ Σ_{i<j} αᵢ·αⱼ
//! B = (N/n₂ + N/n₁ − 2) Σ_{ij} βᵢ·βⱼ − 2 (c₂ + c₁) Σ_{i<j} βᵢ·βⱼ
//! C = 2 (1 − N/n₂) Σ_{ij} αᵢ·βⱼ + 4 c₂ Σ_{i<j} αᵢ·βⱼ
//! cₖ = N (N − nₖ) / (nₖ (N − 1))
//! ```
//!
//! `αᵢ·βⱼ` is not symmetric in `(i, j)`, so `Σ_{i<j} αᵢ·βⱼ` is taken as half
//! the off-diagonal sum `½ Σ_{i≠j} αᵢ·βⱼ`; with that reading the three terms
//! add up to the enumerated value exactly.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{datum_gradients, GradientModel};
use crate::param::{dot, ParamVector};

/// Upper bound on enumerated minibatch combinations.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

fn check_batch_size(population: usize, n: usize) -> Result<()> {
    if n == 0 || n > population {
        return Err(Error::invalid(format!("minibatch size {n} outside 1..={population}")));
    }
    Ok(())
}

fn guard(count: u128) -> Result<()> {
    if count > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            count,
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok(())
}

fn vec_sum(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut s = vec![0.0; rows[0].len()];
    for r in rows {
        for (a, v) in s.iter_mut().zip(r) {
            *a += v;
        }
    }
    s
}

/// `Γ` of a set of per-datum vectors, via the centred form `Σ‖αᵢ − ᾱ‖²/(N(N−1))`.
///
/// For a single vector the off-diagonal sum is empty and `Γ = ‖α₁‖²`.
pub fn gamma_of(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    assert!(n > 0, "gamma of an empty set");
    if n == 1 {
        return dot(&rows[0], &rows[0]);
    }
    let mean: Vec<f64> = vec_sum(rows).into_iter().map(|v| v / n as f64).collect();
    let spread: f64 = rows
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(a, m)| (a - m) * (a - m)).sum::<f64>())
        .sum();
    spread / (n as f64 * (n - 1) as f64)
}

/// `Γ` at `θ` for the model's per-datum likelihood gradients.
pub fn gamma_at<M: GradientModel + ?Sized>(model: &M, theta: &ParamVector) -> Result<f64> {
    theta.ensure_dim(model.dim())?;
    Ok(gamma_of(&datum_gradients(model, theta)))
}

/// `(N − n) N² Γ / n`
pub fn delta_v_variance_formula(population: usize, n: usize, gamma: f64) -> f64 {
    let big = population as f64;
    (population - n) as f64 * big * big * gamma / n as f64
}

/// `E‖ΔV‖²` by enumerating every size-`n` subset of the given gradients.
pub fn delta_v_variance_enumerated(rows: &[Vec<f64>], n: usize) -> Result<f64> {
    let population = rows.len();
    check_batch_size(population, n)?;
    let count = binomial(population, n);
    guard(count)?;
    let total = vec_sum(rows);
    let scale = population as f64 / n as f64;
    let mut acc = 0.0;
    for subset in (0..population).combinations(n) {
        let mut dv = total.clone();
        for &i in &subset {
            for (a, v) in dv.iter_mut().zip(&rows[i]) {
                *a -= scale * v;
            }
        }
        acc += dot(&dv, &dv);
    }
    Ok(acc / count as f64)
}

/// Exact `E‖ΔV‖²` for a plain size-`n` minibatch at `θ`.
pub fn delta_v_variance_exact<M: GradientModel + ?Sized>(
    model: &M,
    theta: &ParamVector,
    n: usize,
) -> Result<f64> {
    theta.ensure_dim(model.dim())?;
    delta_v_variance_enumerated(&datum_gradients(model, theta), n)
}

/// Enumerated total and closed-form terms of the variance-reduced `E‖ΔV‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VrDecomposition {
    pub total: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Pairwise sums of two vector families: `Σ_{ij} uᵢ·vⱼ` and `Σᵢ uᵢ·vᵢ`.
struct PairSums {
    all: f64,
    diag: f64,
}

impl PairSums {
    fn of(u: &[Vec<f64>], v: &[Vec<f64>]) -> Self {
        let all = dot(&vec_sum(u), &vec_sum(v));
        let diag = u.iter().zip(v).map(|(a, b)| dot(a, b)).sum();
        PairSums { all, diag }
    }

    /// `Σ_{i<j}` read as half the off-diagonal sum.
    fn upper(&self) -> f64 {
        0.5 * (self.all - self.diag)
    }
}

fn hypergeometric_coef(population: usize, n: usize) -> f64 {
    if n == population {
        return 0.0;
    }
    let big = population as f64;
    big * (big - n as f64) / (n as f64 * (big - 1.0))
}

/// Closed-form `(A, B, C)` from per-datum gradients at `θ_l` (`alpha`) and
/// at the anchor (`beta`).
pub fn vr_decomposition_terms(alpha: &[Vec<f64>], beta: &[Vec<f64>], n1: usize, n2: usize) -> (f64, f64, f64) {
    let population = alpha.len();
    let big = population as f64;
    let (c1, c2) = (hypergeometric_coef(population, n1), hypergeometric_coef(population, n2));
    let r1 = big / n1 as f64;
    let r2 = big / n2 as f64;
    let aa = PairSums::of(alpha, alpha);
    let bb = PairSums::of(beta, beta);
    let ab = PairSums::of(alpha, beta);
    let a = (r2 - 1.0) * aa.all - 2.0 * c2 * aa.upper();
    let b = (r2 + r1 - 2.0) * bb.all - 2.0 * (c2 + c1) * bb.upper();
    let c = 2.0 * (1.0 - r2) * ab.all + 4.0 * c2 * ab.upper();
    (a, b, c)
}

/// Enumerates every `(π, π̃)` pair for
/// `ΔV = Σᵢ αᵢ (1 − (N/n₂) zᵢ) + Σᵢ βᵢ ((N/n₂) zᵢ − (N/n₁) bᵢ)`.
pub fn vr_delta_v_variance_enumerated(alpha: &[Vec<f64>], beta: &[Vec<f64>], n1: usize, n2: usize) -> Result<f64> {
    let population = alpha.len();
    if beta.len() != population {
        return Err(Error::invalid("alpha and beta must cover the same data"));
    }
    check_batch_size(population, n1)?;
    check_batch_size(population, n2)?;
    let (k1, k2) = (binomial(population, n1), binomial(population, n2));
    guard(k1.saturating_mul(k2))?;
    let r1 = population as f64 / n1 as f64;
    let r2 = population as f64 / n2 as f64;
    let alpha_sum = vec_sum(alpha);

    // ΔV splits into a π̃ part and a π part; tabulate each once.
    let corrected: Vec<Vec<f64>> = (0..population)
        .combinations(n2)
        .map(|z| {
            let mut u = alpha_sum.clone();
            for &i in &z {
                for (k, a) in u.iter_mut().enumerate() {
                    *a -= r2 * (alpha[i][k] - beta[i][k]);
                }
            }
            u
        })
        .collect();
    let anchors: Vec<Vec<f64>> = (0..population)
        .combinations(n1)
        .map(|b| {
            let mut v = vec![0.0; alpha_sum.len()];
            for &i in &b {
                for (k, a) in v.iter_mut().enumerate() {
                    *a += r1 * beta[i][k];
                }
            }
            v
        })
        .collect();
    let mut acc = 0.0;
    for v in &anchors {
        for u in &corrected {
            acc += u.iter().zip(v).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
        }
    }
    Ok(acc / (k1 * k2) as f64)
}

/// Exact variance-reduced `E‖ΔV‖²` at `(θ_l, θ̃)` with its closed-form terms.
pub fn vr_delta_v_variance_exact<M: GradientModel + ?Sized>(
    model: &M,
    theta: &ParamVector,
    anchor: &ParamVector,
    n1: usize,
    n2: usize,
) -> Result<VrDecomposition> {
    theta.ensure_dim(model.dim())?;
    anchor.ensure_dim(model.dim())?;
    let alpha = datum_gradients(model, theta);
    let beta = datum_gradients(model, anchor);
    let total = vr_delta_v_variance_enumerated(&alpha, &beta, n1, n2)?;
    let (a, b, c) = vr_decomposition_terms(&alpha, &beta, n1, n2);
    Ok(VrDecomposition { total, a, b, c })
}

/// Variance-reduction gain `λ = N³ (n₁ − n₂)/(n₁ n₂) · Γ(β)` at the anchor.
///
/// This is `−(B + C)` evaluated with `α = β`, and is nonnegative because
/// `Γ` is.
pub fn lambda_at<M: GradientModel + ?Sized>(model: &M, anchor: &ParamVector, n1: usize, n2: usize) -> Result<f64> {
    anchor.ensure_dim(model.dim())?;
    let population = model.num_data();
    if n2 == 0 || n2 >= n1 || n1 > population {
        return Err(Error::invalid(format!(
            "lambda needs 1 <= n2 < n1 <= N, got n1={n1}, n2={n2}, N={population}"
        )));
    }
    let big = population as f64;
    let gamma = gamma_of(&datum_gradients(model, anchor));
    Ok(big.powi(3) * (n1 - n2) as f64 / (n1 as f64 * n2 as f64) * gamma)
}

/// Flat summary of the variance functionals at one point.
///
/// The plain-minibatch fields use batch size `n`; in variance-reduced mode `n`
/// plays the role of `n₂`, so `A` coincides with `deltaV_formula`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub gamma: f64,
    #[serde(rename = "deltaV_formula")]
    pub delta_v_formula: f64,
    #[serde(rename = "deltaV_exact")]
    pub delta_v_exact: f64,
    #[serde(rename = "A")]
    pub a: Option<f64>,
    #[serde(rename = "B")]
    pub b: Option<f64>,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub lambda: Option<f64>,
}

impl VarianceReport {
    /// Plain-minibatch report at `θ` for batch size `n`.
    pub fn plain<M: GradientModel + ?Sized>(model: &M, theta: &ParamVector, n: usize) -> Result<Self> {
        let gamma = gamma_at(model, theta)?;
        Ok(VarianceReport {
            gamma,
            delta_v_formula: delta_v_variance_formula(model.num_data(), n, gamma),
            delta_v_exact: delta_v_variance_exact(model, theta, n)?,
            a: None,
            b: None,
            c: None,
            lambda: None,
        })
    }

    /// Full report at `(θ_l, θ̃)` for anchor batch `n1` and correction batch `n2`.
    pub fn variance_reduced<M: GradientModel + ?Sized>(
        model: &M,
        theta: &ParamVector,
        anchor: &ParamVector,
        n1: usize,
        n2: usize,
    ) -> Result<Self> {
        let mut report = Self::plain(model, theta, n2)?;
        let d = vr_delta_v_variance_exact(model, theta, anchor, n1, n2)?;
        report.a = Some(d.a);
        report.b = Some(d.b);
        report.c = Some(d.c);
        report.lambda = Some(lambda_at(model, anchor, n1, n2)?);
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::GaussianMeanModel;

    fn scalars(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|x| vec![*x]).collect()
    }

    /// Γ straight from its definition with two nested loops.
    fn gamma_naive(rows: &[Vec<f64>]) -> f64 {
        let n = rows.len();
        let mut all = 0.0;
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                let p = dot(&rows[i], &rows[j]);
                all += p;
                if i != j {
                    off += p;
                }
            }
        }
        all / (n * n) as f64 - off / (n * (n - 1)) as f64
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), 6);
        assert_eq!(binomial(8, 4), 70);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(3, 4), 0);
        assert_eq!(binomial(60, 30), 118_264_581_564_861_424);
    }

    #[test]
    fn gamma_hand_values() {
        assert_eq!(gamma_of(&scalars(&[2.0, 2.0, 2.0])), 0.0);
        assert_eq!(gamma_of(&scalars(&[1.0, -1.0])), 1.0);
        assert_eq!(gamma_of(&scalars(&[3.0])), 9.0);
    }

    #[test]
    fn gamma_matches_double_loop() {
        let m = GaussianMeanModel::from_values(vec![0.3, -1.2, 2.5, 0.0, 1.1, 4.0, -0.7]).unwrap();
        for t in [-2.0, 0.0, 0.4, 3.3] {
            let theta = ParamVector::scalar(t).unwrap();
            let g = gamma_at(&m, &theta).unwrap();
            let naive = gamma_naive(&datum_gradients(&m, &theta));
            assert!((g - naive).abs() <= 1e-12 * naive.abs().max(1.0), "{g} vs {naive}");
        }
        let wide = vec![vec![1.0, -2.0, 0.5], vec![0.0, 3.0, 1.0], vec![-1.5, 0.2, 2.0]];
        assert!((gamma_of(&wide) - gamma_naive(&wide)).abs() < 1e-12);
    }

    #[test]
    fn two_point_delta_v() {
        let rows = scalars(&[1.0, -1.0]);
        assert_eq!(delta_v_variance_enumerated(&rows, 1).unwrap(), 4.0);
        assert_eq!(delta_v_variance_formula(2, 1, gamma_of(&rows)), 4.0);
        assert_eq!(delta_v_variance_enumerated(&rows, 2).unwrap(), 0.0);
    }

    #[test]
    fn lambda_two_point() {
        // β = {+1, −1}: datum gradients x − θ at θ = 0.
        let m = GaussianMeanModel::from_values(vec![1.0, -1.0]).unwrap();
        let zero = ParamVector::zeros(1);
        assert_eq!(lambda_at(&m, &zero, 2, 1).unwrap(), 4.0);
        let d = vr_delta_v_variance_exact(&m, &zero, &zero, 2, 1).unwrap();
        assert!((-(d.b + d.c) - 4.0).abs() < 1e-12);
        assert!(lambda_at(&m, &zero, 1, 1).is_err());
        assert!(lambda_at(&m, &zero, 1, 2).is_err());
    }

    #[test]
    fn lambda_zero_for_identical_gradients() {
        let m = GaussianMeanModel::from_values(vec![0.5; 6]).unwrap();
        assert_eq!(lambda_at(&m, &ParamVector::zeros(1), 4, 2).unwrap(), 0.0);
    }

    #[test]
    fn guard_trips() {
        let rows = scalars(&vec![1.0; 40]);
        assert!(matches!(
            delta_v_variance_enumerated(&rows, 20),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn report_json_keys() {
        let m = GaussianMeanModel::from_values(vec![0.0, 1.0, 3.0, -2.0]).unwrap();
        let theta = ParamVector::scalar(0.2).unwrap();
        let anchor = ParamVector::scalar(0.1).unwrap();
        let r = VarianceReport::variance_reduced(&m, &theta, &anchor, 3, 2).unwrap();
        assert_eq!(r.a.unwrap(), r.delta_v_formula.max(r.a.unwrap()).min(r.a.unwrap()));
        assert!((r.a.unwrap() - r.delta_v_formula).abs() < 1e-10);
        let v: serde_json::Value = serde_json::to_value(r).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        for k in ["gamma", "deltaV_formula", "deltaV_exact", "A", "B", "C", "lambda"] {
            assert!(keys.contains(&k), "{k} missing from {keys:?}");
        }
    }
}
