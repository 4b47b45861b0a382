//! One-dimensional mode finding and Gaussian (Laplace) fitting.
//!
//! The log targets fitted here are smooth but can be flat, skewed or pushed
//! against a boundary, so the Newton iteration is safeguarded: it starts from
//! a coarse-scan argmax, backtracks when a step does not improve the target,
//! and falls back to golden-section search whenever the local curvature is
//! not negative.

use crate::{Error, Result};

/// Gaussian approximation of a log target on an interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fit1d {
    pub mode: f64,
    pub variance: f64,
    pub log_at_mode: f64,
    /// Mode clamped against an interval endpoint.
    pub at_boundary: bool,
    /// Curvature at the mode was not negative; the variance comes from
    /// moment-matching a dense quadrature over the interval instead.
    pub curvature_fallback: bool,
}

const COARSE_POINTS: usize = 32;
const MAX_NEWTON_ITERS: usize = 80;
const GOLDEN_RATIO_COMP: f64 = 0.381_966_011_250_105; // 2 - golden ratio
const FALLBACK_QUAD_POINTS: usize = 2000;

/// Golden-section search for the maximum of `f` on `[a, b]`.
fn golden_section_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let tol = 1e-11 * (1.0 + a.abs() + b.abs());
    let mut x1 = a + GOLDEN_RATIO_COMP * (b - a);
    let mut x2 = b - GOLDEN_RATIO_COMP * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..300 {
        if (b - a).abs() <= tol {
            break;
        }
        if f1 > f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = a + GOLDEN_RATIO_COMP * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = b - GOLDEN_RATIO_COMP * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}

/// Central-difference first and second derivatives at `x`, evaluated at a
/// point shifted inwards so that both stencil points stay inside `[lo, hi]`.
fn central_derivatives(f: &impl Fn(f64) -> f64, x: f64, lo: f64, hi: f64) -> (f64, f64, f64) {
    let mut h = 1e-3 * x.abs().max(1.0);
    h = h.min(0.25 * (hi - lo));
    let xa = x.clamp(lo + h, hi - h);
    let fp = f(xa + h);
    let fm = f(xa - h);
    let f0 = f(xa);
    let d1 = (fp - fm) / (2.0 * h);
    let d2 = (fp - 2.0 * f0 + fm) / (h * h);
    (d1, d2, xa)
}

/// Moment-matched variance of the density proportional to `exp(f)` on
/// `[lo, hi]`, by dense trapezoid quadrature.
fn quadrature_variance(f: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<f64> {
    let n = FALLBACK_QUAD_POINTS;
    let h = (hi - lo) / n as f64;
    let values: Vec<(f64, f64)> = (0..=n)
        .map(|i| {
            let x = lo + i as f64 * h;
            (x, f(x))
        })
        .collect();
    let fmax = values
        .iter()
        .map(|&(_, v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    if !fmax.is_finite() {
        return Err(Error::Numerical(
            "quadrature variance fallback: log target has no finite values".into(),
        ));
    }
    let mut mass = 0.0;
    let mut mean = 0.0;
    for (i, &(x, v)) in values.iter().enumerate() {
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        let d = w * (v - fmax).exp();
        mass += d;
        mean += d * x;
    }
    mean /= mass;
    let mut var = 0.0;
    for (i, &(x, v)) in values.iter().enumerate() {
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        var += w * (v - fmax).exp() * (x - mean) * (x - mean);
    }
    var /= mass;
    if !(var.is_finite() && var > 0.0) {
        return Err(Error::Numerical(format!(
            "quadrature variance fallback produced {var}"
        )));
    }
    Ok(var)
}

/// Fit a Gaussian to `exp(f)` on `[lo, hi]`: find the mode by safeguarded
/// Newton (coarse scan, backtracking, golden-section fallback on
/// non-negative curvature) and take the variance from the negative inverse
/// curvature at the mode.
pub fn laplace_fit_1d(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<Fit1d> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidInput(format!(
            "invalid interval [{lo}, {hi}]"
        )));
    }

    // coarse scan, including the endpoints
    let step = (hi - lo) / COARSE_POINTS as f64;
    let mut best_x = lo;
    let mut best_f = f64::NEG_INFINITY;
    let mut best_i = 0;
    for i in 0..=COARSE_POINTS {
        let x = lo + i as f64 * step;
        let v = f(x);
        if v > best_f {
            best_f = v;
            best_x = x;
            best_i = i;
        }
    }
    if !best_f.is_finite() {
        return Err(Error::Numerical(
            "log target is nowhere finite on the interval".into(),
        ));
    }
    let bracket_lo = lo + best_i.saturating_sub(1) as f64 * step;
    let bracket_hi = lo + (best_i + 1).min(COARSE_POINTS) as f64 * step;

    let mut x = best_x;
    let mut fx = best_f;
    let tol = |x: f64| 1e-9 * x.abs().max(1.0);
    for _ in 0..MAX_NEWTON_ITERS {
        let (d1, d2, xa) = central_derivatives(&f, x, lo, hi);
        if d2 >= 0.0 {
            // not locally concave: take the bracketed golden-section maximum
            x = golden_section_max(&f, bracket_lo, bracket_hi);
            fx = f(x);
            break;
        }
        let mut dx = -d1 / d2;
        let mut x_new = (xa + dx).clamp(lo, hi);
        let mut f_new = f(x_new);
        let mut tries = 0;
        while f_new < fx && tries < 12 {
            dx *= 0.5;
            x_new = (xa + dx).clamp(lo, hi);
            f_new = f(x_new);
            tries += 1;
        }
        if f_new < fx {
            // no improving step in this direction; treat as converged
            break;
        }
        let moved = (x_new - x).abs();
        x = x_new;
        fx = f_new;
        if moved <= tol(x) {
            break;
        }
    }

    // keep the better of the Newton/golden result and the scan best
    if best_f > fx {
        x = best_x;
        fx = best_f;
    }

    let at_boundary = x - lo <= 1e-6 * (hi - lo) || hi - x <= 1e-6 * (hi - lo);
    let (_, d2, _) = central_derivatives(&f, x, lo, hi);
    let (variance, curvature_fallback) = if d2 < 0.0 {
        (-1.0 / d2, false)
    } else {
        (quadrature_variance(&f, lo, hi)?, true)
    };
    Ok(Fit1d {
        mode: x,
        variance,
        log_at_mode: fx,
        at_boundary,
        curvature_fallback,
    })
}
