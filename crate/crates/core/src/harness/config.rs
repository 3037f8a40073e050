use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bounds::{BoundQuery, ChMode};
use crate::error::{FbmError, Result};
use crate::kernel::{HurstParameter, QuadratureConfig, TimeGrid};
use crate::pathstats::Window;
use crate::sampler::{ExportLayout, SeedSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    VerifyKernel,
    VerifyCovariance,
    VerifyBounds,
    McModulus,
    McLil,
    McNondiff,
    McDoublepoint,
    McMgf,
    EstimateHurst,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::VerifyKernel,
        Experiment::VerifyCovariance,
        Experiment::VerifyBounds,
        Experiment::McModulus,
        Experiment::McLil,
        Experiment::McNondiff,
        Experiment::McDoublepoint,
        Experiment::McMgf,
        Experiment::EstimateHurst,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::VerifyKernel => "verify-kernel",
            Experiment::VerifyCovariance => "verify-covariance",
            Experiment::VerifyBounds => "verify-bounds",
            Experiment::McModulus => "mc-modulus",
            Experiment::McLil => "mc-lil",
            Experiment::McNondiff => "mc-nondiff",
            Experiment::McDoublepoint => "mc-doublepoint",
            Experiment::McMgf => "mc-mgf",
            Experiment::EstimateHurst => "estimate-hurst",
        }
    }

    /// Whether the experiment draws random numbers.
    pub fn is_random(self) -> bool {
        !matches!(self, Experiment::VerifyBounds)
    }

    fn default_hurst(self) -> Vec<f64> {
        match self {
            Experiment::VerifyKernel => vec![0.25, 0.4, 0.5, 0.6, 0.75],
            Experiment::VerifyCovariance | Experiment::McMgf => vec![0.3, 0.5, 0.7],
            Experiment::VerifyBounds => vec![0.3, 0.5, 0.7],
            Experiment::McModulus => vec![0.5, 0.25],
            Experiment::McLil => vec![0.25, 0.5, 0.75],
            Experiment::McNondiff => vec![0.3, 0.5],
            Experiment::McDoublepoint => vec![0.4],
            Experiment::EstimateHurst => vec![0.25, 0.5, 0.75],
        }
    }

    fn default_cells(self) -> usize {
        match self {
            Experiment::VerifyCovariance => 256,
            Experiment::McModulus | Experiment::McNondiff => 1 << 14,
            Experiment::McDoublepoint => 1 << 13,
            Experiment::EstimateHurst => 1 << 12,
            Experiment::McMgf => 1024,
            _ => 64,
        }
    }

    fn default_paths(self) -> usize {
        match self {
            Experiment::VerifyCovariance => 20_000,
            Experiment::McModulus | Experiment::McDoublepoint => 200,
            Experiment::McNondiff | Experiment::EstimateHurst => 100,
            Experiment::McLil => 2000,
            Experiment::McMgf => 4000,
            _ => 0,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = FbmError;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| FbmError::Config(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub horizon: f64,
    pub n_cells: usize,
}

/// Experiment-specific knobs; unset values take per-experiment defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentParams {
    /// verify-kernel: number of random `(t, u)` pairs per `H`.
    pub pairs: Option<usize>,
    /// verify-kernel: pairs are drawn from `(0, max_time]²`.
    pub max_time: Option<f64>,
    /// verify-covariance: number of evenly spaced grid points compared.
    pub covariance_points: Option<usize>,
    /// verify-covariance: number of random pairs for the increment moment.
    pub moment_pairs: Option<usize>,
    /// verify-bounds: η values of the supremum-bound sweep.
    pub etas: Option<Vec<f64>>,
    /// verify-bounds: extra evaluations requested by the user.
    pub bound_queries: Option<Vec<BoundQuery>>,
    /// mc-modulus: δ ladder.
    pub deltas: Option<Vec<f64>>,
    /// mc-lil: ladder ratio θ and exponent range.
    pub theta: Option<f64>,
    pub n_range: Option<(u32, u32)>,
    /// mc-nondiff: lag cut-off `1/k` and resolution ladder.
    pub k: Option<u32>,
    pub resolutions: Option<Vec<usize>>,
    /// mc-doublepoint: dimensions compared and the two time windows.
    pub dims: Option<Vec<usize>>,
    pub window_i: Option<Window>,
    pub window_j: Option<Window>,
    /// mc-mgf: α values.
    pub alphas: Option<Vec<f64>>,
}

/// One self-contained experiment description. Every field is optional in
/// the file; [`ExperimentConfig::resolve`] fills defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<Experiment>,
    pub hurst: Option<Vec<f64>>,
    pub grid: Option<GridSpec>,
    pub n_paths: Option<usize>,
    pub seed: Option<SeedSpec>,
    pub workers: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub ch_mode: Option<ChMode>,
    pub renormalize: Option<bool>,
    pub quadrature: Option<QuadratureConfig>,
    pub export_paths: Option<ExportLayout>,
    #[serde(default)]
    pub params: ExperimentParams,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub experiment: Option<Experiment>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub ch_mode: Option<ChMode>,
    pub no_renormalize: bool,
    pub export_paths: Option<ExportLayout>,
}

fn config_err(msg: impl Into<String>) -> FbmError {
    FbmError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn apply(mut self, o: &Overrides) -> Self {
        if o.experiment.is_some() {
            self.experiment = o.experiment;
        }
        if let Some(s) = o.seed {
            let stream = self.seed.map_or(0, |x| x.stream_id);
            self.seed = Some(SeedSpec::new(s, stream));
        }
        if o.workers.is_some() {
            self.workers = o.workers;
        }
        if o.out_dir.is_some() {
            self.out_dir = o.out_dir.clone();
        }
        if o.ch_mode.is_some() {
            self.ch_mode = o.ch_mode;
        }
        if o.no_renormalize {
            self.renormalize = Some(false);
        }
        if o.export_paths.is_some() {
            self.export_paths = o.export_paths;
        }
        self
    }

    /// Fills every unset field with the experiment's default and validates
    /// the result. Nothing is written before this succeeds.
    pub fn resolve(mut self) -> Result<Self> {
        let e = self
            .experiment
            .ok_or_else(|| config_err("no experiment given"))?;
        let hurst = self.hurst.take().unwrap_or_else(|| e.default_hurst());
        if hurst.is_empty() {
            return Err(config_err("hurst list is empty"));
        }
        for &h in &hurst {
            HurstParameter::new(h).map_err(|err| config_err(err.to_string()))?;
        }
        self.hurst = Some(hurst);
        let grid = self.grid.unwrap_or(GridSpec {
            horizon: 1.0,
            n_cells: e.default_cells(),
        });
        TimeGrid::new(grid.horizon, grid.n_cells).map_err(|err| config_err(err.to_string()))?;
        self.grid = Some(grid);
        let n_paths = self.n_paths.unwrap_or(e.default_paths());
        if e.is_random() && e != Experiment::VerifyKernel && n_paths < 2 {
            return Err(config_err("n_paths must be at least 2"));
        }
        self.n_paths = Some(n_paths);
        self.seed = Some(self.seed.unwrap_or(SeedSpec::new(20_240_601, 0)));
        if self.workers == Some(0) {
            return Err(config_err("workers must be at least 1"));
        }
        self.out_dir = Some(self.out_dir.take().unwrap_or_else(|| PathBuf::from("out")));
        self.ch_mode = Some(self.ch_mode.unwrap_or_default());
        self.renormalize = Some(self.renormalize.unwrap_or(true));
        let q = self.quadrature.unwrap_or_default();
        q.validate().map_err(|err| config_err(err.to_string()))?;
        self.quadrature = Some(q);
        self.resolve_params(e)?;
        Ok(self)
    }

    fn resolve_params(&mut self, e: Experiment) -> Result<()> {
        let n = self.grid_spec().n_cells;
        let p = &mut self.params;
        match e {
            Experiment::VerifyKernel => {
                p.pairs.get_or_insert(20);
                let m = *p.max_time.get_or_insert(4.0);
                if !(m > 0.0 && m.is_finite()) {
                    return Err(config_err("max_time must be positive"));
                }
            }
            Experiment::VerifyCovariance => {
                let c = *p.covariance_points.get_or_insert(16);
                if c == 0 || c > n {
                    return Err(config_err("covariance_points must be in 1..=n_cells"));
                }
                p.moment_pairs.get_or_insert(10);
            }
            Experiment::VerifyBounds => {
                let etas = p
                    .etas
                    .get_or_insert_with(|| (1..=40).map(|k| 0.25 * k as f64).collect());
                if etas.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                    return Err(config_err("etas must be positive"));
                }
                p.bound_queries.get_or_insert_with(Vec::new);
            }
            Experiment::McModulus => {
                let d = p
                    .deltas
                    .get_or_insert_with(|| (6..=10).map(|k| 0.5f64.powi(k)).collect());
                if d.is_empty() || d.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
                    return Err(config_err("deltas must lie in (0, 1)"));
                }
            }
            Experiment::McLil => {
                let th = *p.theta.get_or_insert(0.6);
                let r = *p.n_range.get_or_insert((5, 40));
                crate::pathstats::lil_ladder(th, r).map_err(|err| config_err(err.to_string()))?;
            }
            Experiment::McNondiff => {
                let k = *p.k.get_or_insert(32);
                if k == 0 {
                    return Err(config_err("k must be at least 1"));
                }
                let res = p.resolutions.get_or_insert_with(|| {
                    (8..=14).map(|j| 1usize << j).filter(|&m| m <= n).collect()
                });
                if res.len() < 2 || res.iter().any(|&m| m == 0 || !n.is_multiple_of(m)) {
                    return Err(config_err("resolutions must divide n_cells (two or more)"));
                }
            }
            Experiment::McDoublepoint => {
                let dims = p.dims.get_or_insert_with(|| vec![3, 8]);
                if dims.len() != 2 || dims.contains(&0) {
                    return Err(config_err("dims must hold a low and a high dimension"));
                }
                let i = *p.window_i.get_or_insert(Window {
                    start: 0.0,
                    end: 0.4,
                });
                let j = *p.window_j.get_or_insert(Window {
                    start: 0.6,
                    end: 1.0,
                });
                if !(i.start <= i.end && i.end < j.start && j.start <= j.end) {
                    return Err(config_err("windows must be disjoint with I before J"));
                }
                if !n.is_multiple_of(2) {
                    return Err(config_err("n_cells must be even for the refinement step"));
                }
            }
            Experiment::McMgf => {
                let a = p.alphas.get_or_insert_with(|| vec![0.5, 1.0, 2.0]);
                if a.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                    return Err(config_err("alphas must be positive"));
                }
            }
            Experiment::EstimateHurst => {
                if n <= 32 {
                    return Err(config_err("estimate-hurst needs more than 32 cells"));
                }
            }
        }
        Ok(())
    }

    pub fn experiment_kind(&self) -> Experiment {
        self.experiment.expect("resolved config")
    }

    pub fn hurst_list(&self) -> Vec<HurstParameter> {
        self.hurst
            .as_deref()
            .unwrap_or_default()
            .iter()
            .map(|&h| HurstParameter::new(h).expect("validated"))
            .collect()
    }

    pub fn grid_spec(&self) -> GridSpec {
        self.grid.expect("resolved config")
    }

    pub fn time_grid(&self) -> TimeGrid {
        let g = self.grid_spec();
        TimeGrid::new(g.horizon, g.n_cells).expect("validated")
    }

    pub fn paths(&self) -> usize {
        self.n_paths.unwrap_or(0)
    }

    pub fn seed_spec(&self) -> SeedSpec {
        self.seed.expect("resolved config")
    }

    pub fn out_path(&self) -> &Path {
        self.out_dir.as_deref().expect("resolved config")
    }

    pub fn quad(&self) -> QuadratureConfig {
        self.quadrature.unwrap_or_default()
    }
}
