//! Experiment driver: configuration, seeded parallel runs, verdicts, and
//! report and plot-data emission.

mod config;
mod experiments;

pub use config::*;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bounds::BoundReport;
use crate::error::{FbmError, Result};
use crate::fmt::sig17;
use crate::pathstats::{CovarianceEstimate, HurstEstimate, LadderPoint, LinearFit, McEstimate};
use crate::sampler::{GENERATOR_NAME, STREAM_POLICY};

pub const SCHEMA_VERSION: u32 = 1;
pub const REPORT_FILE: &str = "report.json";

/// Acceptance region of one verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Threshold {
    AtMost { value: f64 },
    AtLeast { value: f64 },
    Between { lo: f64, hi: f64 },
}

impl Threshold {
    /// NaN never passes.
    pub fn admits(self, x: f64) -> bool {
        match self {
            Threshold::AtMost { value } => x <= value,
            Threshold::AtLeast { value } => x >= value,
            Threshold::Between { lo, hi } => lo <= x && x <= hi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub observed: f64,
    pub threshold: Threshold,
    pub passed: bool,
}

impl Verdict {
    pub fn check(name: impl Into<String>, observed: f64, threshold: Threshold) -> Self {
        Self {
            name: name.into(),
            observed,
            threshold,
            passed: threshold.admits(observed),
        }
    }
}

/// A table written as one CSV file next to the report.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Curve {
    pub fn new(file: impl Into<String>, header: &[&str]) -> Self {
        Self {
            file: file.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|&v| sig17(v)).collect());
    }

    /// `x,stat_mean,stat_q95,n_samples,se`.
    pub fn ladder(file: impl Into<String>, points: &[LadderPoint]) -> Self {
        let mut c = Self::new(file, &["x", "stat_mean", "stat_q95", "n_samples", "se"]);
        for p in points {
            c.rows.push(vec![
                sig17(p.x),
                sig17(p.stat_mean),
                sig17(p.stat_q95),
                p.n_samples.to_string(),
                sig17(p.se),
            ]);
        }
        c
    }

    fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.header.join(","))?;
        for r in &self.rows {
            writeln!(w, "{}", r.join(","))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `H` formatted for file names: `0.5`, `0.25`.
pub fn hurst_tag(h: f64) -> String {
    format!("{h}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelPair {
    pub t: f64,
    pub u: f64,
    pub inner: f64,
    pub covariance: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MalliavinCheck {
    /// `(u, r, s, t)` with `u < r < s < t`.
    pub times: [f64; 4],
    pub inner_normalized: f64,
    pub increment_covariance: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub s: f64,
    pub t: f64,
    pub estimate: McEstimate,
    pub exact: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupSweepPoint {
    pub eta: f64,
    pub one_sided: f64,
    pub two_sided: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MgfPoint {
    pub alpha: f64,
    pub estimate: McEstimate,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosestSummary {
    pub dim: usize,
    pub n_cells: usize,
    pub median: f64,
    pub summary: LadderPoint,
}

/// One block of experiment output, usually for a single `H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    KernelIdentity {
        hurst: f64,
        pairs: Vec<KernelPair>,
        max_rel_error: f64,
        diagonal_max_rel_error: f64,
        malliavin: Vec<MalliavinCheck>,
        malliavin_max_abs_error: f64,
    },
    Covariance {
        hurst: f64,
        n_cells: usize,
        n_paths: usize,
        volterra: CovarianceEstimate,
        cholesky: CovarianceEstimate,
        max_z: f64,
        moments: Vec<MomentCheck>,
    },
    Bounds {
        hurst: f64,
        gamma_factor: f64,
        ch_literal: f64,
        ch_derived: f64,
        double_point_threshold: u32,
        sup_sweep: Vec<SupSweepPoint>,
    },
    BoundQueries {
        reports: Vec<BoundReport>,
    },
    Modulus {
        hurst: f64,
        n_cells: usize,
        n_paths: usize,
        curve: Vec<LadderPoint>,
        envelope: Vec<f64>,
    },
    Lil {
        hurst: f64,
        theta: f64,
        n_range: (u32, u32),
        n_paths: usize,
        summary: LadderPoint,
        q05: f64,
        exploratory: bool,
    },
    DiffQuotient {
        hurst: f64,
        k: u32,
        n_paths: usize,
        curve: Vec<LadderPoint>,
        log_slope: LinearFit,
    },
    DoublePoint {
        hurst: f64,
        threshold_dim: u32,
        n_paths: usize,
        results: Vec<ClosestSummary>,
    },
    Mgf {
        hurst: f64,
        n_cells: usize,
        points: Vec<MgfPoint>,
    },
    Hurst {
        hurst: f64,
        n_cells: usize,
        estimate: HurstEstimate,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngInfo {
    pub root_seed: u64,
    pub stream_id: u64,
    pub stream_policy: String,
    pub generator: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorInfo {
    pub module: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEnvelope {
    pub schema_version: u32,
    pub experiment: Experiment,
    pub status: Status,
    pub config: ExperimentConfig,
    pub code_version: String,
    pub wall_clock_seconds: f64,
    pub rng: Option<RngInfo>,
    pub payload: Vec<Payload>,
    pub verdicts: Vec<Verdict>,
    pub error: Option<ErrorInfo>,
    #[serde(skip)]
    pub curves: Vec<Curve>,
}

impl ReportEnvelope {
    pub fn all_passed(&self) -> bool {
        self.status == Status::Ok && self.verdicts.iter().all(|v| v.passed)
    }

    /// The JSON text written to `report.json`.
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| FbmError::Io(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }
}

/// What an experiment has produced so far; kept when it fails midway.
#[derive(Debug, Default)]
pub struct Partial {
    pub payload: Vec<Payload>,
    pub verdicts: Vec<Verdict>,
    pub curves: Vec<Curve>,
    pub exported: Vec<PathBuf>,
}

/// Runs a resolved config on a pool of `workers` threads. Never writes
/// files except exported paths; see [`write_outputs`].
pub fn run(config: &ExperimentConfig) -> Result<ReportEnvelope> {
    let started = Instant::now();
    let e = config.experiment_kind();
    let workers = config
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|err| FbmError::Config(err.to_string()))?;
    let mut partial = Partial::default();
    let outcome = pool.install(|| experiments::dispatch(config, &mut partial));
    let seed = config.seed_spec();
    let error = outcome.err().map(|err| {
        log::error!("{e} failed: {err}");
        ErrorInfo {
            module: err.provenance().to_string(),
            message: err.to_string(),
        }
    });
    Ok(ReportEnvelope {
        schema_version: SCHEMA_VERSION,
        experiment: e,
        status: if error.is_some() {
            Status::Failed
        } else {
            Status::Ok
        },
        config: config.clone(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        rng: e.is_random().then(|| RngInfo {
            root_seed: seed.root_seed,
            stream_id: seed.stream_id,
            stream_policy: STREAM_POLICY.to_string(),
            generator: GENERATOR_NAME.to_string(),
        }),
        payload: partial.payload,
        verdicts: partial.verdicts,
        error,
        curves: partial.curves,
    })
}

/// One CSV per curve in `dir`. An empty report writes nothing.
pub fn emit_plot_data(report: &ReportEnvelope, dir: &Path) -> Result<Vec<PathBuf>> {
    if report.curves.is_empty() {
        log::warn!(
            "report for {} has no curves; no plot data written",
            report.experiment
        );
        return Ok(Vec::new());
    }
    fs::create_dir_all(dir)?;
    let mut out = Vec::with_capacity(report.curves.len());
    for c in &report.curves {
        let path = dir.join(&c.file);
        c.write(BufWriter::new(fs::File::create(&path)?))?;
        out.push(path);
    }
    Ok(out)
}

/// Writes `report.json` and the curves into `dir`.
pub fn write_outputs(report: &ReportEnvelope, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let path = dir.join(REPORT_FILE);
    fs::write(&path, report.to_json()?)?;
    let mut files = vec![path];
    files.extend(emit_plot_data(report, dir)?);
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds_reject_nan() {
        for t in [
            Threshold::AtMost { value: 1.0 },
            Threshold::AtLeast { value: 1.0 },
            Threshold::Between { lo: 0.0, hi: 2.0 },
        ] {
            assert!(t.admits(1.0));
            assert!(!t.admits(f64::NAN));
        }
    }

    #[test]
    fn empty_report_writes_no_curves() {
        let cfg = ExperimentConfig {
            experiment: Some(Experiment::VerifyBounds),
            ..Default::default()
        }
        .resolve()
        .unwrap();
        let report = ReportEnvelope {
            schema_version: SCHEMA_VERSION,
            experiment: Experiment::VerifyBounds,
            status: Status::Ok,
            config: cfg,
            code_version: String::new(),
            wall_clock_seconds: 0.0,
            rng: None,
            payload: Vec::new(),
            verdicts: Vec::new(),
            error: None,
            curves: Vec::new(),
        };
        let dir = std::env::temp_dir().join("fbmlab-empty-report-test");
        let _ = fs::remove_dir_all(&dir);
        assert!(emit_plot_data(&report, &dir).unwrap().is_empty());
        assert!(!dir.exists());
    }

    #[test]
    fn curve_csv_layout() {
        let mut c = Curve::new("x.csv", &["a", "b"]);
        c.push(&[0.5, 1.0]);
        let mut buf = Vec::new();
        c.write(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "a,b\n5.0000000000000000e-1,1.0000000000000000e0\n"
        );
    }
}
