//! Monte Carlo statistics on sampled paths: modulus of continuity, iterated
//! logarithm ratios, difference quotients, closest approach and running-max
//! moment generating functions. Every reduction uses a fixed pairwise order.

mod closest;
mod stats;

pub use closest::*;
pub use stats::*;

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{lil_envelope, modulus_envelope};
use crate::error::{FbmError, Result};
use crate::kernel::HurstParameter;
use crate::sampler::Ensemble;

/// `max_{j-w ≤ i < j} |x_j - x_i|`, i.e. the largest range over windows of
/// `w + 1` consecutive points, in `O(len)` via monotone deques.
pub fn max_windowed_range(x: &[f64], w: usize) -> f64 {
    if x.len() < 2 || w == 0 {
        return 0.0;
    }
    let mut hi: VecDeque<usize> = VecDeque::new();
    let mut lo: VecDeque<usize> = VecDeque::new();
    let mut best: f64 = 0.0;
    for j in 0..x.len() {
        while hi.back().is_some_and(|&k| x[k] <= x[j]) {
            hi.pop_back();
        }
        hi.push_back(j);
        while lo.back().is_some_and(|&k| x[k] >= x[j]) {
            lo.pop_back();
        }
        lo.push_back(j);
        let start = j.saturating_sub(w);
        while hi.front().is_some_and(|&k| k < start) {
            hi.pop_front();
        }
        while lo.front().is_some_and(|&k| k < start) {
            lo.pop_front();
        }
        best = best.max(x[hi[0]] - x[lo[0]]);
    }
    best
}

/// Reference `O(len · w)` version of [`max_windowed_range`].
pub fn max_windowed_range_brute(x: &[f64], w: usize) -> f64 {
    let mut best: f64 = 0.0;
    for j in 0..x.len() {
        for i in j.saturating_sub(w)..j {
            best = best.max((x[j] - x[i]).abs());
        }
    }
    best
}

fn uniform_spacing(ens: &Ensemble, op: &'static str) -> Result<f64> {
    if ens.n_paths() == 0 {
        return Err(FbmError::domain(op, "empty ensemble"));
    }
    ens.spacing()
        .ok_or_else(|| FbmError::domain(op, "ensemble must be on a uniform grid"))
}

/// Number of grid steps in a lag of `delta`, or an error when the grid is
/// not at least `min_ratio` times finer.
fn lag_steps(delta: f64, dt: f64, min_ratio: f64, op: &'static str) -> Result<usize> {
    if !(delta > 0.0) || dt > delta / min_ratio * (1.0 + 1e-12) {
        return Err(FbmError::domain(
            op,
            format!("grid spacing {dt} is coarser than δ/{min_ratio} for δ = {delta}"),
        ));
    }
    Ok((delta / dt * (1.0 + 1e-12)).floor() as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusReport {
    pub hurst: HurstParameter,
    pub deltas: Vec<f64>,
    /// `per_path[k][p]`: statistic of path `p` at `deltas[k]`.
    pub per_path: Vec<Vec<f64>>,
    pub curve: Vec<LadderPoint>,
}

/// Per path and `δ`: `max_{t-s ≤ δ} |B_t - B_s| / g(δ)` over grid pairs.
pub fn modulus_ratio_curve(
    ens: &Ensemble,
    h: HurstParameter,
    deltas: &[f64],
) -> Result<ModulusReport> {
    const OP: &str = "modulus_ratio_curve";
    let dt = uniform_spacing(ens, OP)?;
    let mut per_path = Vec::with_capacity(deltas.len());
    let mut curve = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let w = lag_steps(delta, dt, 8.0, OP)?;
        let g = modulus_envelope(h, delta)?;
        let stat: Vec<f64> = ens
            .paths
            .par_iter()
            .map(|p| max_windowed_range(p, w) / g)
            .collect();
        curve.push(LadderPoint::summarize(delta, &stat));
        per_path.push(stat);
    }
    Ok(ModulusReport {
        hurst: h,
        deltas: deltas.to_vec(),
        per_path,
        curve,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LilReport {
    pub hurst: HurstParameter,
    pub theta: f64,
    pub n_range: (u32, u32),
    pub per_path: Vec<f64>,
    pub summary: LadderPoint,
    pub q05: f64,
    /// Set when `H > 1/2`, outside the regime where the limit is known.
    pub exploratory: bool,
}

/// The ladder `θ^n` for `n` in `n_range`, in increasing time order.
pub fn lil_ladder(theta: f64, n_range: (u32, u32)) -> Result<Vec<f64>> {
    if !(theta > 0.0 && theta < 1.0) || n_range.0 > n_range.1 {
        return Err(FbmError::domain(
            "lil_ratio",
            "need θ in (0,1) and n_lo <= n_hi",
        ));
    }
    let times: Vec<f64> = (n_range.0..=n_range.1)
        .rev()
        .map(|n| theta.powi(n as i32))
        .collect();
    if times.iter().any(|&t| !(t > 0.0 && t < (-1f64).exp())) {
        return Err(FbmError::domain("lil_ratio", "ladder must lie in (0, 1/e)"));
    }
    Ok(times)
}

/// Per path `max_n B(θ^n) / h(θ^n)`. The ensemble must be observed at every
/// ladder time, to 1e-12 relative.
pub fn lil_ratio(
    ens: &Ensemble,
    h: HurstParameter,
    theta: f64,
    n_range: (u32, u32),
) -> Result<LilReport> {
    let ladder = lil_ladder(theta, n_range)?;
    let mut idx = Vec::with_capacity(ladder.len());
    for &t in &ladder {
        let k = ens
            .times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12 * t)
            .ok_or_else(|| {
                FbmError::domain(
                    "lil_ratio",
                    format!("ensemble does not resolve ladder time {t:e}"),
                )
            })?;
        idx.push(k);
    }
    let env: Vec<f64> = ladder
        .iter()
        .map(|&t| lil_envelope(h, t))
        .collect::<Result<_>>()?;
    let per_path: Vec<f64> = ens
        .paths
        .iter()
        .map(|p| {
            idx.iter()
                .zip(&env)
                .map(|(&k, e)| p[k] / e)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    Ok(LilReport {
        hurst: h,
        theta,
        n_range,
        summary: LadderPoint::summarize(theta, &per_path),
        q05: quantile(&per_path, 0.05),
        per_path,
        exploratory: h.value() > 0.5,
    })
}

/// `min_t max_{0 < h ≤ 1/k} |x(t+h) - x(t)| / h` over grid `t ≤ horizon - 1/k`.
pub fn diff_quotient_statistic(path: &[f64], dt: f64, k: u32) -> Result<f64> {
    const OP: &str = "min_max_diff_quotient";
    if k == 0 {
        return Err(FbmError::domain(OP, "k must be at least 1"));
    }
    let m = lag_steps(1.0 / k as f64, dt, 8.0, OP)?;
    if path.len() <= m {
        return Err(FbmError::domain(OP, "path shorter than 1/k"));
    }
    let inv: Vec<f64> = (1..=m).map(|l| 1.0 / (l as f64 * dt)).collect();
    let mut best = f64::INFINITY;
    for t in 0..path.len() - m {
        let base = path[t];
        let mut top: f64 = 0.0;
        for (l, w) in inv.iter().enumerate() {
            top = top.max((path[t + l + 1] - base).abs() * w);
            // Cannot lower the running minimum any further.
            if top >= best {
                break;
            }
        }
        best = best.min(top);
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffQuotientReport {
    pub hurst: HurstParameter,
    pub k: u32,
    /// Cell counts of the resolution ladder.
    pub resolutions: Vec<usize>,
    pub per_path: Vec<Vec<f64>>,
    pub curve: Vec<LadderPoint>,
    /// Least-squares slope of log median `D_n` against log `n`.
    pub log_slope: LinearFit,
}

/// `D_n` on each coarsening of a uniform ensemble to `resolutions[i]` cells.
pub fn min_max_diff_quotient(
    ens: &Ensemble,
    h: HurstParameter,
    k: u32,
    resolutions: &[usize],
) -> Result<DiffQuotientReport> {
    const OP: &str = "min_max_diff_quotient";
    let dt = uniform_spacing(ens, OP)?;
    let cells = ens.len() - 1;
    let mut per_path = Vec::new();
    let mut curve = Vec::new();
    for &n in resolutions {
        if n == 0 || !cells.is_multiple_of(n) {
            return Err(FbmError::domain(
                OP,
                format!("{n} cells do not divide the grid of {cells}"),
            ));
        }
        let stride = cells / n;
        let coarse = ens.subsample(stride);
        let stat: Vec<f64> = coarse
            .paths
            .par_iter()
            .map(|p| diff_quotient_statistic(p, dt * stride as f64, k))
            .collect::<Result<_>>()?;
        curve.push(LadderPoint::summarize(n as f64, &stat));
        per_path.push(stat);
    }
    let x: Vec<f64> = resolutions.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = curve.iter().map(|c| c.stat_median.ln()).collect();
    let log_slope = if x.len() >= 2 {
        linear_fit(&x, &y)?
    } else {
        LinearFit {
            slope: f64::NAN,
            intercept: f64::NAN,
            slope_se: f64::NAN,
        }
    };
    Ok(DiffQuotientReport {
        hurst: h,
        k,
        resolutions: resolutions.to_vec(),
        per_path,
        curve,
        log_slope,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HurstEstimate {
    pub estimate: f64,
    pub fit: LinearFit,
    pub deltas: Vec<f64>,
    /// Ensemble mean of the maximal increment at each `δ`.
    pub mean_max_increment: Vec<f64>,
    pub n_paths: usize,
}

/// Lags of 1, 2, 4, 8 and 16 grid steps. With the number of candidate pairs
/// nearly fixed, `M(δ)` scales as `δ^H` up to a slowly varying factor.
pub fn default_hurst_ladder(ens: &Ensemble) -> Result<Vec<f64>> {
    let dt = uniform_spacing(ens, "hurst_loglog_estimate")?;
    if ens.len() <= 32 {
        return Err(FbmError::domain(
            "hurst_loglog_estimate",
            "need more than 32 grid cells",
        ));
    }
    Ok((0..5).map(|j| dt * (1u32 << j) as f64).collect())
}

/// Slope of `log M(δ)` against `log δ`, where `M(δ)` is the ensemble mean of
/// the largest increment over grid pairs at most `δ` apart.
pub fn hurst_loglog_estimate(ens: &Ensemble, deltas: &[f64]) -> Result<HurstEstimate> {
    const OP: &str = "hurst_loglog_estimate";
    let dt = uniform_spacing(ens, OP)?;
    if ens.n_paths() < 50 {
        return Err(FbmError::domain(OP, "need at least 50 paths"));
    }
    if deltas.len() < 4 {
        return Err(FbmError::domain(OP, "need at least 4 ladder points"));
    }
    let mut means = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let w = lag_steps(delta, dt, 1.0, OP)?;
        let stat: Vec<f64> = ens
            .paths
            .par_iter()
            .map(|p| max_windowed_range(p, w))
            .collect();
        means.push(mean(&stat));
    }
    let x: Vec<f64> = deltas.iter().map(|d| d.ln()).collect();
    let y: Vec<f64> = means.iter().map(|m| m.ln()).collect();
    if y.iter().any(|v| !v.is_finite()) {
        return Err(FbmError::domain(
            OP,
            "degenerate ladder: zero or non-finite increments",
        ));
    }
    let fit = linear_fit(&x, &y)?;
    Ok(HurstEstimate {
        estimate: fit.slope,
        fit,
        deltas: deltas.to_vec(),
        mean_max_increment: means,
        n_paths: ens.n_paths(),
    })
}

/// Mean and standard error of `exp(α · max_{s ≤ t_j ≤ t} (B_{t_j} - B_s))`;
/// the maximum includes `t_j = s`, so each sample is at least 1.
pub fn empirical_sup_mgf(ens: &Ensemble, alpha: f64, s: f64, t: f64) -> Result<McEstimate> {
    const OP: &str = "empirical_sup_mgf";
    if !(alpha >= 0.0 && alpha.is_finite()) || !(s < t) {
        return Err(FbmError::domain(OP, "need α >= 0 and s < t"));
    }
    let tol = 1e-12 * t.abs().max(1.0);
    let idx: Vec<usize> = (0..ens.len())
        .filter(|&k| ens.times[k] >= s - tol && ens.times[k] <= t + tol)
        .collect();
    if idx.is_empty() {
        return Err(FbmError::domain(OP, "no observation in [s, t]"));
    }
    let mut values = Vec::with_capacity(ens.n_paths());
    for p in &ens.paths {
        let base = p[idx[0]];
        let top = idx.iter().map(|&k| p[k] - base).fold(0.0, f64::max);
        let exponent = alpha * top;
        if exponent >= crate::bounds::EXP_LIMIT {
            return Err(FbmError::Overflow { op: OP, exponent });
        }
        values.push(exponent.exp());
    }
    Ok(McEstimate::from_samples(&values))
}

/// `E[B_{t_j} B_{t_k}]` estimated from the products, with standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEstimate {
    pub indices: Vec<usize>,
    pub cov: Vec<Vec<f64>>,
    pub se: Vec<Vec<f64>>,
    pub n_samples: usize,
}

pub fn empirical_covariance(ens: &Ensemble, indices: &[usize]) -> Result<CovarianceEstimate> {
    if ens.n_paths() < 2 || indices.iter().any(|&k| k >= ens.len()) {
        return Err(FbmError::domain(
            "empirical_covariance",
            "need 2+ paths and valid indices",
        ));
    }
    let m = indices.len();
    let mut cov = vec![vec![0.0; m]; m];
    let mut se = vec![vec![0.0; m]; m];
    for a in 0..m {
        for b in 0..=a {
            let prod: Vec<f64> = ens
                .paths
                .iter()
                .map(|p| p[indices[a]] * p[indices[b]])
                .collect();
            let e = McEstimate::from_samples(&prod);
            cov[a][b] = e.mean;
            cov[b][a] = e.mean;
            se[a][b] = e.se;
            se[b][a] = e.se;
        }
    }
    Ok(CovarianceEstimate {
        indices: indices.to_vec(),
        cov,
        se,
        n_samples: ens.n_paths(),
    })
}

/// `E|B_t - B_s|²` estimated over the ensemble.
pub fn increment_second_moment(ens: &Ensemble, i: usize, j: usize) -> McEstimate {
    let sq: Vec<f64> = ens.paths.iter().map(|p| (p[j] - p[i]).powi(2)).collect();
    McEstimate::from_samples(&sq)
}
