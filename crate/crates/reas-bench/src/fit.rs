//! Power-law fits on log-log axes.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("point ({0}, {1}) is not strictly positive")]
    NonPositive(f64, f64),
    #[error("{0} points in the fit window, need at least 3")]
    TooFewPoints(usize),
    #[error("all x values in the window coincide")]
    Degenerate,
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub exponent: f64,
    /// `ln` of the prefactor.
    pub intercept: f64,
    pub r2: f64,
    /// Inclusive `x` range actually fitted.
    pub window: (f64, f64),
    pub points: usize,
}

/// Fits `y = e^{intercept} x^{exponent}` to the points with `x` in `window`
/// (inclusive), or to all points when `window` is `None`.
pub fn fit_power_law(points: &[(f64, f64)], window: Option<(f64, f64)>) -> Result<ScalingFit, FitError> {
    let inside: Vec<(f64, f64)> =
        points.iter().copied().filter(|&(x, _)| window.is_none_or(|(lo, hi)| x >= lo && x <= hi)).collect();
    if let Some(&(x, y)) = inside.iter().find(|&&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(FitError::NonPositive(x, y));
    }
    if inside.len() < 3 {
        return Err(FitError::TooFewPoints(inside.len()));
    }
    let logs: Vec<(f64, f64)> = inside.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= f64::EPSILON * n {
        return Err(FitError::Degenerate);
    }
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    let lo = inside.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = inside.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    Ok(ScalingFit { exponent, intercept, r2, window: (lo, hi), points: inside.len() })
}

/// First `x` at or after `from` where the curve has flattened: the local
/// log-log slope from the previous point drops below `slope` while the value
/// has reached `level` times the curve's maximum.
///
/// Points must be sorted by `x`.
pub fn saturation_knee(points: &[(f64, f64)], from: f64, slope: f64, level: f64) -> Option<f64> {
    let peak = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    points.windows(2).find_map(|w| {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if x0 < from || y0 <= 0.0 || y1 <= 0.0 {
            return None;
        }
        let local = (y1 / y0).ln() / (x1 / x0).ln();
        (local < slope && y1 >= level * peak).then_some(x1)
    })
}

/// Fit window for a curve that may saturate: from `from` up to the point
/// before the knee, or to the last point when there is none.
pub fn pre_saturation_window(points: &[(f64, f64)], from: f64, slope: f64, level: f64) -> (f64, f64) {
    let last = points.last().map_or(from, |p| p.0);
    let hi = match saturation_knee(points, from, slope, level) {
        Some(knee) => points.iter().map(|p| p.0).filter(|&x| x < knee).fold(from, f64::max),
        None => last,
    };
    (from, hi)
}
