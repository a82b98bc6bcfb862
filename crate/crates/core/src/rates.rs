//! Empirical convergence-rate estimation from error sequences: power-law
//! slopes on log-log axes, geometric ratios, and superlinear order.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateModel {
    Power,
    Linear,
    SuperlinearOrder,
}

/// A fitted rate with its diagnostics.
#[derive(Clone, Debug, Serialize)]
pub struct RateFit {
    pub model: RateModel,
    /// Slope (power), ratio ρ (linear), or order q (superlinear).
    pub parameter: f64,
    pub r_squared: f64,
    pub window: (usize, usize),
    /// Machine-precision cutoff applied to the sequence.
    pub floor: f64,
}

/// Least squares y = a + b x; returns (b, r²).
fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - xm) * (y - ym);
        sxx += (x - xm) * (x - xm);
        syy += (y - ym) * (y - ym);
    }
    let b = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    (b, r2)
}

/// Default window: drop the first 10% of iterations (transient), keep the
/// rest; indices are positions in the error sequence.
pub fn default_window(len: usize) -> (usize, usize) {
    ((len / 10).max(1), len.saturating_sub(1))
}

/// Default precision floor relative to the initial error.
pub fn default_floor(errors: &[f64]) -> f64 {
    1e-13 * errors.first().copied().unwrap_or(1.0).abs()
}

fn windowed(errors: &[f64], window: Option<(usize, usize)>, floor: f64) -> Result<Vec<(usize, f64)>> {
    let (lo, hi) = window.unwrap_or_else(|| default_window(errors.len()));
    if hi >= errors.len() || lo > hi {
        return Err(Error::Invalid(format!(
            "window [{lo}, {hi}] outside the sequence of length {}",
            errors.len()
        )));
    }
    let mut out = Vec::new();
    for (i, &e) in errors.iter().enumerate().take(hi + 1).skip(lo) {
        if e <= 0.0 {
            return Err(Error::Invalid(format!("nonpositive error {e} at index {i} inside the window")));
        }
        if e >= floor {
            out.push((i, e));
        }
    }
    Ok(out)
}

/// Log-log slope of `e_i` against the iteration index.
pub fn fit_power(errors: &[f64], window: Option<(usize, usize)>) -> Result<RateFit> {
    let floor = default_floor(errors);
    let pts = windowed(errors, window, floor)?;
    let pts: Vec<(usize, f64)> = pts.into_iter().filter(|(i, _)| *i >= 1).collect();
    if pts.len() < 10 {
        return Err(Error::Precondition(format!("power fit needs a window of at least 10 points, got {}", pts.len())));
    }
    let xs: Vec<f64> = pts.iter().map(|(i, _)| (*i as f64).ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, e)| e.ln()).collect();
    let (slope, r2) = least_squares(&xs, &ys);
    Ok(RateFit {
        model: RateModel::Power,
        parameter: slope,
        r_squared: r2,
        window: (pts[0].0, pts[pts.len() - 1].0),
        floor,
    })
}

/// Geometric ratio `ρ = exp(slope of ln e_i vs i)`.
pub fn fit_linear(errors: &[f64], window: Option<(usize, usize)>) -> Result<RateFit> {
    let floor = default_floor(errors);
    let pts = windowed(errors, window, floor)?;
    if pts.len() < 10 {
        return Err(Error::Precondition(format!("linear fit needs a window of at least 10 points, got {}", pts.len())));
    }
    let xs: Vec<f64> = pts.iter().map(|(i, _)| *i as f64).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, e)| e.ln()).collect();
    let (slope, r2) = least_squares(&xs, &ys);
    Ok(RateFit {
        model: RateModel::Linear,
        parameter: slope.exp(),
        r_squared: r2,
        window: (pts[0].0, pts[pts.len() - 1].0),
        floor,
    })
}

/// Superlinear order estimate: slope of `ln e_{i+1}` against `ln e_i` over
/// consecutive pairs above the floor. Needs at least 4 usable points.
pub fn fit_order(errors: &[f64], window: Option<(usize, usize)>, floor: Option<f64>) -> Result<RateFit> {
    let floor = floor.unwrap_or_else(|| default_floor(errors));
    let pts = windowed(errors, window.or(Some((0, errors.len() - 1))), floor)?;
    if pts.len() < 4 {
        return Err(Error::Precondition(format!(
            "order fit needs at least 4 usable iterations above the floor, got {}",
            pts.len()
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for w in pts.windows(2) {
        // only consecutive iterates form valid pairs
        if w[1].0 == w[0].0 + 1 {
            xs.push(w[0].1.ln());
            ys.push(w[1].1.ln());
        }
    }
    if xs.len() < 3 {
        return Err(Error::Precondition("order fit needs at least 3 consecutive pairs".into()));
    }
    let (slope, r2) = least_squares(&xs, &ys);
    Ok(RateFit {
        model: RateModel::SuperlinearOrder,
        parameter: slope,
        r_squared: r2,
        window: (pts[0].0, pts[pts.len() - 1].0),
        floor,
    })
}

/// Superlinear-regime flag from the testing weights: the ratio
/// `φ_i/φ_{i+1}` must decay toward zero.
pub fn phi_ratio_vanishes(phis: &[f64]) -> bool {
    if phis.len() < 4 {
        return false;
    }
    let ratios: Vec<f64> = phis.windows(2).map(|w| w[0] / w[1]).collect();
    let last = *ratios.last().unwrap();
    let first = ratios[0];
    last < 0.25 * first && last < 0.1
}
