use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bounds::{
    ch_constant, double_point_dimension_threshold, gamma_factor, increment_capacity_bound,
    lil_envelope, mgf_sup_bound, modulus_envelope, sup_capacity_bound, CapacityParams, ChMode,
    SupVariant,
};
use crate::error::Result;
use crate::kernel::{covariance, increment_covariance, kernel_l2_inner, HurstParameter, TimeGrid};
use crate::pathstats::{
    closest_approach, default_hurst_ladder, empirical_covariance, empirical_sup_mgf,
    hurst_loglog_estimate, increment_second_moment, lil_ladder, lil_ratio, median,
    min_max_diff_quotient, modulus_ratio_curve, ClosestMethod, LadderPoint,
};
use crate::sampler::{
    cameron_martin_inner, export_ensemble, sample_at_times_cholesky, sample_ensemble_cholesky,
    sample_ensemble_volterra, subsample_path, BuildMethod, CoefficientMatrix, Ensemble, Increment,
    MatrixOptions, PathSample, SeedSpec,
};

use super::*;

/// Stream reserved for drawing test points, disjoint from path streams.
const AUX_STREAM: u64 = u64::MAX;

const KERNEL_TOL: f64 = 1e-6;
const COVARIANCE_Z: f64 = 4.0;
const MOMENT_Z: f64 = 3.0;
const MALLIAVIN_CHECKS: usize = 50;

pub(super) fn dispatch(cfg: &ExperimentConfig, out: &mut Partial) -> Result<()> {
    match cfg.experiment_kind() {
        Experiment::VerifyKernel => verify_kernel(cfg, out),
        Experiment::VerifyCovariance => verify_covariance(cfg, out),
        Experiment::VerifyBounds => verify_bounds(cfg, out),
        Experiment::McModulus => mc_modulus(cfg, out),
        Experiment::McLil => mc_lil(cfg, out),
        Experiment::McNondiff => mc_nondiff(cfg, out),
        Experiment::McDoublepoint => mc_doublepoint(cfg, out),
        Experiment::McMgf => mc_mgf(cfg, out),
        Experiment::EstimateHurst => estimate_hurst(cfg, out),
    }
}

fn aux_rng(cfg: &ExperimentConfig) -> ChaCha8Rng {
    SeedSpec::new(cfg.seed_spec().root_seed, AUX_STREAM).component_rng(0)
}

/// Uniform on `(0, max]`.
fn open_uniform(rng: &mut ChaCha8Rng, max: f64) -> f64 {
    max * (1.0 - rng.random::<f64>())
}

fn matrix(cfg: &ExperimentConfig, h: HurstParameter, grid: TimeGrid) -> Result<CoefficientMatrix> {
    let opts = MatrixOptions {
        renormalize: cfg.renormalize.unwrap_or(true),
        method: BuildMethod::Auto,
    };
    CoefficientMatrix::build(h, grid, &cfg.quad(), opts)
}

fn volterra_samples(
    cfg: &ExperimentConfig,
    h: HurstParameter,
    dim: usize,
) -> Result<Vec<PathSample>> {
    let a = matrix(cfg, h, cfg.time_grid())?;
    let samples = sample_ensemble_volterra(&a, dim, cfg.paths(), cfg.seed_spec())?;
    export(cfg, h, &samples)?;
    Ok(samples)
}

fn export(cfg: &ExperimentConfig, h: HurstParameter, samples: &[PathSample]) -> Result<()> {
    if let Some(layout) = cfg.export_paths {
        let dir = cfg
            .out_path()
            .join(format!("paths_H{}", hurst_tag(h.value())));
        export_ensemble(samples, &dir, layout)?;
    }
    Ok(())
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn verify_kernel(cfg: &ExperimentConfig, out: &mut Partial) -> Result<()> {
    let q = cfg.quad();
    let n_pairs = cfg.params.pairs.unwrap_or(20);
    let max_t = cfg.params.max_time.unwrap_or(4.0);
    let mut rng = aux_rng(cfg);
    for h in cfg.hurst_list() {
        let draws: Vec<(f64, f64)> = (0..n_pairs)
            .map(|_| (open_uniform(&mut rng, max_t), open_uniform(&mut rng, max_t)))
            .collect();
        let pairs: Vec<KernelPair> = draws
            .par_iter()
            .map(|&(t, u)| {
                let inner = kernel_l2_inner(h, t, u, &q)?;
                let cov = covariance(h, t, u)?;
                Ok(KernelPair {
                    t,
                    u,
                    inner,
                    covariance: cov,
                    rel_error: rel_err(inner, cov),
                })
            })
            .collect::<Result<_>>()?;
        let max_rel_error = pairs.iter().map(|p| p.rel_error).fold(0.0, f64::max);

        // Squared norm of an increment in the Cameron-Martin space.
        let diag: Vec<(f64, f64)> = (0..n_pairs)
            .map(|_| {
                let a = open_uniform(&mut rng, max_t);
                let b = open_uniform(&mut rng, max_t);
                (a.min(b), a.max(b))
            })
            .filter(|(s, t)| s < t)
            .collect();
        let diagonal_max_rel_error = diag
            .par_iter()
            .map(|&(s, t)| {
                let i = Increment::new(s, t)?;
                let v = cameron_martin_inner(h, i, i, &q)?;
                Ok(rel_err(v, (t - s).powf(2.0 * h.value())))
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);

        let tuples: Vec<[f64; 4]> = (0..MALLIAVIN_CHECKS)
            .map(|_| {
                let mut x = [0.0; 4];
                for v in &mut x {
                    *v = max_t * rng.random::<f64>();
                }
                x.sort_by(f64::total_cmp);
                x
            })
            .filter(|x| x[0] < x[1] && x[1] < x[2] && x[2] < x[3])
            .collect();
        let malliavin: Vec<MalliavinCheck> = tuples
            .par_iter()
            .map(|&[u, r, s, t]| {
                let ip = cameron_martin_inner(h, Increment::new(s, t)?, Increment::new(u, r)?, &q)?;
                let norm = ((t - s) * (r - u)).powf(h.value());
                let c = increment_covariance(h, u, r, s, t)?;
                Ok(MalliavinCheck {
                    times: [u, r, s, t],
                    inner_normalized: ip / norm,
                    increment_covariance: c,
                    abs_error: (ip / norm - c).abs(),
                })
            })
            .collect::<Result<_>>()?;
        let malliavin_max_abs_error = malliavin.iter().map(|m| m.abs_error).fold(0.0, f64::max);

        let tag = hurst_tag(h.value());
        let at_most = Threshold::AtMost { value: KERNEL_TOL };
        out.verdicts.push(Verdict::check(
            format!("kernel_identity_max_rel_error_H{tag}"),
            max_rel_error,
            at_most,
        ));
        out.verdicts.push(Verdict::check(
            format!("increment_norm_max_rel_error_H{tag}"),
            diagonal_max_rel_error,
            at_most,
        ));
        out.verdicts.push(Verdict::check(
            format!("increment_inner_max_abs_error_H{tag}"),
            malliavin_max_abs_error,
            at_most,
        ));
        let mut curve = Curve::new(
            format!("kernel_identity_H{tag}.csv"),
            &["t", "u", "inner", "covariance", "rel_error"],
        );
        for p in &pairs {
            curve.push(&[p.t, p.u, p.inner, p.covariance, p.rel_error]);
        }
        out.curves.push(curve);
        out.payload.push(Payload::KernelIdentity {
            hurst: h.value(),
            pairs,
            max_rel_error,
            diagonal_max_rel_error,
            malliavin,
            malliavin_max_abs_error,
        });
    }
    Ok(())
}

/// `count` grid indices spread evenly over `1..=n`.
fn spread_indices(n: usize, count: usize) -> Vec<usize> {
    (1..=count).map(|k| (k * n).div_ceil(count)).collect()
}

fn verify_covariance(cfg: &ExperimentConfig, out: &mut Partial) -> Result<()> {
    let grid = cfg.time_grid();
    let n = grid.n_cells();
    let n_paths = cfg.paths();
    let idx = spread_indices(n, cfg.params.covariance_points.unwrap_or(16));
    let n_moments = cfg.params.moment_pairs.unwrap_or(10);
    let mut rng = aux_rng(cfg);
    for h in cfg.hurst_list() {
        let samples = volterra_samples(cfg, h, 1)?;
        let vol = Ensemble::from_samples(&samples)?;
        drop(samples);
        // Independent streams: the oracle starts after the last Volterra path.
        let oracle_seed = cfg.seed_spec().for_path(n_paths);
        let chol =
            Ensemble::from_samples(&sample_ensemble_cholesky(h, grid, 1, n_paths, oracle_seed)?)?;
        let cv = empirical_covariance(&vol, &idx)?;
        let cc = empirical_covariance(&chol, &idx)?;
        let mut max_z: f64 = 0.0;
        for a in 0..idx.len() {
            for b in 0..=a {
                let se = cv.se[a][b].hypot(cc.se[a][b]);
                max_z = max_z.max((cv.cov[a][b] - cc.cov[a][b]).abs() / se);
            }
        }
        let mut moments = Vec::with_capacity(n_moments);
        for _ in 0..n_moments {
            let i = rng.random_range(0..n);
            let j = rng.random_range(i + 1..=n);
            let est = increment_second_moment(&vol, i, j);
            let (s, t) = (vol.times[i], vol.times[j]);
            let exact = (t - s).powf(2.0 * h.value());
            moments.push(MomentCheck {
                s,
                t,
                estimate: est,
                exact,
                z: (est.mean - exact).abs() / est.se,
            });
        }
        let max_moment_z = moments.iter().map(|m| m.z).fold(0.0, f64::max);
        let tag = hurst_tag(h.value());
        out.verdicts.push(Verdict::check(
            format!("covariance_max_z_H{tag}"),
            max_z,
            Threshold::AtMost {
                value: COVARIANCE_Z,
            },
        ));
        out.verdicts.push(Verdict::check(
            format!("increment_moment_max_z_H{tag}"),
            max_moment_z,
            Threshold::AtMost { value: MOMENT_Z },
        ));
        let mut curve = Curve::new(
            format!("covariance_diag_H{tag}.csv"),
            &["t", "volterra", "cholesky", "exact"],
        );
        for (a, &k) in idx.iter().enumerate() {
            let t = vol.times[k];
            curve.push(&[t, cv.cov[a][a], cc.cov[a][a], t.powf(2.0 * h.value())]);
        }
        out.curves.push(curve);
        out.payload.push(Payload::Covariance {
            hurst: h.value(),
            n_cells: n,
            n_paths,
            volterra: cv,
            cholesky: cc,
            max_z,
            moments,
        });
    }
    Ok(())
}

fn verify_bounds(cfg: &ExperimentConfig, out: &mut Partial) -> Result<()> {
    let half = HurstParameter::new(0.5)?;
    let golden = increment_capacity_bound(half, &CapacityParams::default(), 0.0, 1.0, 2.0)?;
    out.verdicts.push(Verdict::check(
        "increment_bound_golden_abs_error",
        (golden - 2.0 * (-1f64).exp()).abs(),
        Threshold::AtMost { value: 1e-12 },
    ));
    let etas = cfg.params.etas.clone().unwrap_or_default();
    let t = cfg.grid_spec().horizon;
    for h in cfg.hurst_list() {
        let tag = hurst_tag(h.value());
        let mut sweep = Vec::with_capacity(etas.len());
        let mut curve = Curve::new(
            format!("supbound_H{tag}.csv"),
            &["eta", "bound_one_sided", "bound_two_sided"],
        );
        for &eta in &etas {
            let one = sup_capacity_bound(h, 0.0, t, eta, SupVariant::OneSided)?;
            let two = sup_capacity_bound(h, 0.0, t, eta, SupVariant::TwoSided)?;
            curve.push(&[eta, one, two]);
            sweep.push(SupSweepPoint {
                eta,
                one_sided: one,
                two_sided: two,
                ratio: if one > 0.0 {
                    two / one
                } else {
                    std::f64::consts::SQRT_2
                },
            });
        }
        let worst = sweep
            .iter()
            .map(|p| (p.ratio - std::f64::consts::SQRT_2).abs())
            .fold(0.0, f64::max);
        out.verdicts.push(Verdict::check(
            format!("sup_two_to_one_sided_ratio_dev_H{tag}"),
            worst,
            Threshold::AtMost {
                value: 4.0 * f64::EPSILON,
            },
        ));
        let ch_literal = ch_constant(h, ChMode::Literal);
        out.verdicts.push(Verdict::check(
            format!("ch_literal_H{tag}"),
            ch_literal,
            Threshold::Between { lo: 1.0, hi: 1.0 },
        ));
        out.curves.push(curve);
        out.payload.push(Payload::Bounds {
            hurst: h.value(),
            gamma_factor: gamma_factor(h),
            ch_literal,
            ch_derived: ch_constant(h, ChMode::Derived),
            double_point_threshold: double_point_dimension_threshold(h),
            sup_sweep: sweep,
        });
    }
    let mode = cfg.ch_mode.unwrap_or_default();
    let queries = cfg.params.bound_queries.clone().unwrap_or_default();
    if !queries.is_empty() {
        let reports = queries
            .iter()
            .map(|q| q.evaluate(mode))
            .collect::<Result<_>>()?;
        out.payload.push(Payload::BoundQueries { reports });
    }
    Ok(())
}

/// Number of consecutive steps that move away from `target`.
fn approach_inversions(values: &[f64], target: f64) -> usize {
    values
        .windows(2)
        .filter(|w| (w[1] - target).abs() > (w[0] - target).abs())
        .count()
}

fn mc_modulus(cfg: &ExperimentConfig, out: &mut Partial) -> Result<()> {
    let deltas = cfg.params.deltas.clone().unwrap_or_default();
    for h in cfg.hurst_list() {
        let ens = Ensemble::from_samples(&volterra_samples(cfg, h, 1)?)?;
        let rep = modulus_ratio_curve(&ens, h, &deltas)?;
        let envelope: Vec<f64> = deltas
            .iter()
            .map(|&d| modulus_envelope(h, d))
            .collect::<Result<_>>()?;
        let tag = hurst_tag(h.value());
        let mut curve = Curve::new(
            format!("modulus_H{tag}.csv"),
            &["delta", "stat_mean", "stat_q95", "envelope"],
        );
        for (p, g) in rep.curve.iter().zip(&envelope) {
            curve.push(&[p.x, p.stat_mean, p.stat_q95, *g]);
        }
        out.curves.push(curve);
        // Ladder ordered by decreasing δ.
        let mut order: Vec<usize> = (0..deltas.len()).collect();
        order.sort_by(|&a, &b| deltas[b].total_cmp(&deltas[a]));
        let means: Vec<f64> = order.iter().map(|&k| rep.curve[k].stat_mean).collect();
        if h.is_half() {
            let last = *means.last().expect("non-empty ladder");
            out.verdicts.push(Verdict::check(
                format!("modulus_mean_ratio_smallest_delta_H{tag}"),
                last,
                Threshold::Between { lo: 0.85, hi: 1.05 },
            ));
        } else if h.value() < 0.5 {
            out.verdicts.push(Verdict::check(
                format!("modulus_ratio_approach_inversions_H{tag}"),
                approach_inversions(&means, 1.0) as f64,
                Threshold::AtMost { value: 1.0 },
            ));
        }
        out.payload.push(Payload::Modulus {
            hurst: h.value(),
            n_cells: cfg.time_grid().n_cells(),
            n_paths: ens.n_paths(),
            curve: rep.curve,
            envelope,
        });
    }
    Ok(())
}

fn mc_lil(cfg: &ExperimentConfig, out: &mut Partial) -> Result<()> {
    let theta = cfg.params.theta.unwrap_or(0.6);
    let n_range = cfg.params.n_range.unwrap_or((5, 40));
    let times = lil_ladder(theta, n_range)?;
    for h in cfg.hurst_list() {
        let ens = sample_at_times_cholesky(h, &times, cfg.paths(), cfg.seed_spec())?;
        let rep = lil_ratio(&ens, h, theta, n_range)?;
        let tag = hurst_tag(h.value());
        let mut curve = Curve::new(
            format!("lil_H{tag}.csv"),
            &["t", "stat_mean", "stat_q95", "envelope"],
        );
        for (k, &t) in times.iter().enumerate() {
            let env = lil_envelope(h, t)?;
            let ratios: Vec<f64> = ens.paths.iter().map(|p| p[k] / env).collect();
            let pt = LadderPoint::summarize(t, &ratios);
            curve.push(&[t, pt.stat_mean, pt.stat_q95, env]);
        }
        out.curves.push(curve);
        if !rep.exploratory {
            out.verdicts.push(Verdict::check(
                format!("lil_median_H{tag}"),
                rep.summary.stat_median,
                Threshold::Between { lo: 0.4, hi: 1.1 },
            ));
        }
        out.payload.push(Payload::Lil {
            hurst: h.value(),
            theta,
            n_range,
            n_paths: ens.n_paths(),
            summary: rep.summary,
            q05: rep.q05,
            exploratory: rep.exploratory,
        });
    }
    Ok(())
}

fn mc_nondiff(cfg: &ExperimentConfig, out: &mut Partial) -> Result<()> {
    let k = cfg.params.k.unwrap_or(32);
    let res = cfg.params.resolutions.clone().unwrap_or_default();
    for h in cfg.hurst_list() {
        let ens = Ensemble::from_samples(&volterra_samples(cfg, h, 1)?)?;
        let rep = min_max_diff_quotient(&ens, h, k, &res)?;
        let tag = hurst_tag(h.value());
        out.curves
            .push(Curve::ladder(format!("nondiff_H{tag}.csv"), &rep.curve));
        out.verdicts.push(Verdict::check(
            format!("nondiff_log_slope_H{tag}"),
            rep.log_slope.slope,
            Threshold::Between {
                lo: 1.0 - h.value() - 0.15,
                hi: 1.0 - h.value() + 0.15,
            },
        ));
        out.payload.push(Payload::DiffQuotient {
            hurst: h.value(),
            k,
            n_paths: ens.n_paths(),
            curve: rep.curve,
            log_slope: rep.log_slope,
        });
    }
    Ok(())
}

fn closest_medians(
    samples: &[PathSample],
    dim: usize,
    i: crate::pathstats::Window,
    j: crate::pathstats::Window,
) -> Result<Vec<f64>> {
    samples
        .par_iter()
        .map(|s| {
            let view = PathSample {
                dim,
                values: s.values[..dim].to_vec(),
                ..s.clone()
            };
            closest_approach(&view, i, j, ClosestMethod::Hashed)
        })
        .collect()
}

fn mc_doublepoint(cfg: &ExperimentConfig, out: &mut Partial) -> Result<()> {
    let dims = cfg.params.dims.clone().unwrap_or_else(|| vec![3, 8]);
    let (lo_dim, hi_dim) = (dims[0].min(dims[1]), dims[0].max(dims[1]));
    let wi = cfg.params.window_i.expect("resolved");
    let wj = cfg.params.window_j.expect("resolved");
    let fine_n = cfg.time_grid().n_cells();
    for h in cfg.hurst_list() {
        // The low-dimensional path is the leading components of the high one.
        let fine = volterra_samples(cfg, h, hi_dim)?;
        let coarse: Vec<PathSample> = fine
            .iter()
            .map(|s| subsample_path(s, 2))
            .collect::<Result<_>>()?;
        let mut results = Vec::new();
        for dim in [lo_dim, hi_dim] {
            let mut points = Vec::new();
            for (set, n) in [(&coarse, fine_n / 2), (&fine, fine_n)] {
                let d = closest_medians(set, dim, wi, wj)?;
                let summary = LadderPoint::summarize(n as f64, &d);
                points.push(summary);
                results.push(ClosestSummary {
                    dim,
                    n_cells: n,
                    median: median(&d),
                    summary,
                });
            }
            let tag = hurst_tag(h.value());
            out.curves.push(Curve::ladder(
                format!("doublepoint_H{tag}_d{dim}.csv"),
                &points,
            ));
        }
        // results: [lo coarse, lo fine, hi coarse, hi fine]
        let tag = hurst_tag(h.value());
        out.verdicts.push(Verdict::check(
            format!("closest_median_ratio_d{hi_dim}_to_d{lo_dim}_H{tag}"),
            results[2].median / results[0].median,
            Threshold::AtLeast { value: 5.0 },
        ));
        out.verdicts.push(Verdict::check(
            format!("closest_median_refinement_change_d{hi_dim}_H{tag}"),
            (results[3].median / results[2].median - 1.0).abs(),
            Threshold::AtMost { value: 0.2 },
        ));
        out.verdicts.push(Verdict::check(
            format!("closest_median_refinement_ratio_d{lo_dim}_H{tag}"),
            results[1].median / results[0].median,
            Threshold::AtMost { value: 1.0 },
        ));
        out.payload.push(Payload::DoublePoint {
            hurst: h.value(),
            threshold_dim: double_point_dimension_threshold(h),
            n_paths: fine.len(),
            results,
        });
    }
    Ok(())
}

fn mc_mgf(cfg: &ExperimentConfig, out: &mut Partial) -> Result<()> {
    let alphas = cfg.params.alphas.clone().unwrap_or_default();
    let t = cfg.grid_spec().horizon;
    for h in cfg.hurst_list() {
        let ens = Ensemble::from_samples(&volterra_samples(cfg, h, 1)?)?;
        let tag = hurst_tag(h.value());
        let mut curve = Curve::new(
            format!("mgf_H{tag}.csv"),
            &["alpha", "stat_mean", "se", "bound"],
        );
        let mut points = Vec::with_capacity(alphas.len());
        for &alpha in &alphas {
            let est = empirical_sup_mgf(&ens, alpha, 0.0, t)?;
            let bound = mgf_sup_bound(h, alpha, 0.0, t)?;
            curve.push(&[alpha, est.mean, est.se, bound]);
            // Passing means mean ≤ bound + 3 SE.
            out.verdicts.push(Verdict::check(
                format!("mgf_excess_in_se_H{tag}_alpha{alpha}"),
                (est.mean - bound) / est.se,
                Threshold::AtMost { value: 3.0 },
            ));
            points.push(MgfPoint {
                alpha,
                estimate: est,
                bound,
            });
        }
        out.curves.push(curve);
        out.payload.push(Payload::Mgf {
            hurst: h.value(),
            n_cells: cfg.time_grid().n_cells(),
            points,
        });
    }
    Ok(())
}

fn estimate_hurst(cfg: &ExperimentConfig, out: &mut Partial) -> Result<()> {
    for h in cfg.hurst_list() {
        let ens = Ensemble::from_samples(&volterra_samples(cfg, h, 1)?)?;
        let deltas = default_hurst_ladder(&ens)?;
        let est = hurst_loglog_estimate(&ens, &deltas)?;
        let tag = hurst_tag(h.value());
        let mut curve = Curve::new(format!("hurst_H{tag}.csv"), &["delta", "stat_mean", "fit"]);
        for (d, m) in est.deltas.iter().zip(&est.mean_max_increment) {
            curve.push(&[*d, *m, (est.fit.intercept + est.fit.slope * d.ln()).exp()]);
        }
        out.curves.push(curve);
        out.verdicts.push(Verdict::check(
            format!("hurst_estimate_H{tag}"),
            est.estimate,
            Threshold::Between {
                lo: h.value() - 0.05,
                hi: h.value() + 0.05,
            },
        ));
        out.payload.push(Payload::Hurst {
            hurst: h.value(),
            n_cells: cfg.time_grid().n_cells(),
            estimate: est,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spread_indices_end_at_last_point() {
        assert_eq!(spread_indices(256, 4), vec![64, 128, 192, 256]);
        assert_eq!(spread_indices(10, 3), vec![4, 7, 10]);
    }

    #[test]
    fn inversions_count_moves_away_from_target() {
        assert_eq!(approach_inversions(&[1.4, 1.3, 1.2, 1.1], 1.0), 0);
        assert_eq!(approach_inversions(&[0.6, 0.7, 0.65, 0.9], 1.0), 1);
        assert_eq!(approach_inversions(&[1.1, 1.2, 1.3], 1.0), 2);
    }
}
