//! Adaptive Simpson quadrature on a finite interval.

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 48;

/// Integrates `f` over `[a, b]` to relative tolerance `rel_tol`.
///
/// The tolerance is taken relative to a coarse estimate of `∫|f|`, so
/// integrals that cancel to zero still terminate. Non-finite integrand values
/// and exhausted recursion depth are reported as failures.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::QuadratureFailure(format!("bad interval [{a}, {b}]")));
    }
    let eval = |x: f64| -> Result<f64> {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::QuadratureFailure(format!("integrand is {y} at {x}")))
        }
    };

    let panels = 64;
    let width = (b - a) / panels as f64;
    let mut scale = 0.0;
    for k in 0..panels {
        let lo = a + k as f64 * width;
        let hi = lo + width;
        let mid = 0.5 * (lo + hi);
        scale += width / 6.0 * (eval(lo)?.abs() + 4.0 * eval(mid)?.abs() + eval(hi)?.abs());
    }
    let tol = rel_tol * scale.max(f64::MIN_POSITIVE);

    // Integrate panel by panel so narrow peaks are not skipped at the top level.
    let mut total = 0.0;
    for k in 0..panels {
        let lo = a + k as f64 * width;
        let hi = lo + width;
        let (flo, fhi) = (eval(lo)?, eval(hi)?);
        let mid = 0.5 * (lo + hi);
        let fmid = eval(mid)?;
        let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        total += refine(&eval, lo, hi, flo, fmid, fhi, whole, tol / panels as f64, MAX_DEPTH)?;
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> Result<f64>>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm)?, f(rm)?);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::QuadratureFailure(format!(
            "no convergence on [{a}, {b}] (error estimate {delta:e})"
        )));
    }
    Ok(refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}
