//! Order-fixed reductions and Monte Carlo summaries.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{FbmError, Result};
use crate::fmt::sig17;

/// Sum by recursive halving; the association order depends only on the length.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    const LEAF: usize = 16;
    if x.len() <= LEAF {
        return x.iter().sum();
    }
    let mid = x.len() / 2;
    pairwise_sum(&x[..mid]) + pairwise_sum(&x[mid..])
}

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(x) / x.len() as f64
}

/// Unbiased sample variance; 0 for fewer than two samples.
pub fn variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    let dev: Vec<f64> = x.iter().map(|v| (v - m) * (v - m)).collect();
    pairwise_sum(&dev) / (x.len() - 1) as f64
}

/// Standard error of the sample mean.
pub fn standard_error(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    (variance(x) / x.len() as f64).sqrt()
}

/// Linearly interpolated quantile (Hyndman–Fan type 7).
pub fn quantile(x: &[f64], q: f64) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

pub fn median(x: &[f64]) -> f64 {
    quantile(x, 0.5)
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub se: f64,
    pub n_samples: usize,
}

impl McEstimate {
    pub fn from_samples(x: &[f64]) -> Self {
        Self {
            mean: mean(x),
            se: standard_error(x),
            n_samples: x.len(),
        }
    }
}

/// Ensemble summary of one statistic at one ladder position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderPoint {
    pub x: f64,
    pub stat_mean: f64,
    pub stat_q95: f64,
    pub stat_median: f64,
    pub n_samples: usize,
    pub se: f64,
}

impl LadderPoint {
    pub fn summarize(x: f64, samples: &[f64]) -> Self {
        Self {
            x,
            stat_mean: mean(samples),
            stat_q95: quantile(samples, 0.95),
            stat_median: median(samples),
            n_samples: samples.len(),
            se: standard_error(samples),
        }
    }
}

/// CSV `x,stat_mean,stat_q95,n_samples,se`.
pub fn write_ladder_csv<W: Write>(points: &[LadderPoint], mut w: W) -> Result<()> {
    writeln!(w, "x,stat_mean,stat_q95,n_samples,se")?;
    for p in points {
        writeln!(
            w,
            "{},{},{},{},{}",
            sig17(p.x),
            sig17(p.stat_mean),
            sig17(p.stat_q95),
            p.n_samples,
            sig17(p.se)
        )?;
    }
    Ok(())
}

/// Ordinary least squares `y = intercept + slope · x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; 0 with two points.
    pub slope_se: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(FbmError::domain(
            "linear_fit",
            "need at least two (x, y) pairs",
        ));
    }
    let mx = mean(x);
    let my = mean(y);
    let sxx: Vec<f64> = x.iter().map(|v| (v - mx) * (v - mx)).collect();
    let sxy: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect();
    let sxx = pairwise_sum(&sxx);
    if !(sxx > 0.0) {
        return Err(FbmError::domain("linear_fit", "x values are all equal"));
    }
    let slope = pairwise_sum(&sxy) / sxx;
    let intercept = my - slope * mx;
    let resid: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .collect();
    let dof = x.len().saturating_sub(2);
    let slope_se = if dof == 0 {
        0.0
    } else {
        (pairwise_sum(&resid) / dof as f64 / sxx).sqrt()
    };
    Ok(LinearFit {
        slope,
        intercept,
        slope_se,
    })
}
