use fbmlab::bounds::{self, BoundQuery, CapacityParams, ChMode, SupVariant};
use fbmlab::harness::{self, ExperimentConfig};
use fbmlab::kernel::{self, HurstParameter, QuadratureConfig, TimeGrid};
use fbmlab::pathstats;
use fbmlab::sampler::{self, BuildMethod, MatrixOptions, SeedSpec};
use fbmlab::FbmError;
use pyo3::exceptions::{PyOverflowError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: FbmError) -> PyErr {
    let msg = format!("[{}] {e}", e.provenance());
    match e {
        FbmError::Overflow { .. } => PyOverflowError::new_err(msg),
        FbmError::Io(_) => PyRuntimeError::new_err(msg),
        _ => PyValueError::new_err(msg),
    }
}

fn hurst(h: f64) -> PyResult<HurstParameter> {
    HurstParameter::new(h).map_err(to_py)
}

fn q() -> QuadratureConfig {
    QuadratureConfig::default()
}

#[pyfunction]
fn kernel_eval(h: f64, t: f64, s: f64) -> PyResult<f64> {
    kernel::kernel_eval(hurst(h)?, t, s, &q()).map_err(to_py)
}

#[pyfunction]
fn covariance(h: f64, t: f64, s: f64) -> PyResult<f64> {
    kernel::covariance(hurst(h)?, t, s).map_err(to_py)
}

#[pyfunction]
fn kernel_l2_inner(h: f64, t: f64, u: f64) -> PyResult<f64> {
    kernel::kernel_l2_inner(hurst(h)?, t, u, &q()).map_err(to_py)
}

#[pyfunction]
fn fgn_autocov(h: f64, lag: f64) -> PyResult<f64> {
    kernel::fgn_autocov(hurst(h)?, lag).map_err(to_py)
}

#[pyfunction]
fn increment_covariance(h: f64, u: f64, r: f64, s: f64, t: f64) -> PyResult<f64> {
    kernel::increment_covariance(hurst(h)?, u, r, s, t).map_err(to_py)
}

#[pyfunction]
fn cameron_martin_inner(h: f64, a: (f64, f64), b: (f64, f64)) -> PyResult<f64> {
    let a = sampler::Increment::new(a.0, a.1).map_err(to_py)?;
    let b = sampler::Increment::new(b.0, b.1).map_err(to_py)?;
    sampler::cameron_martin_inner(hurst(h)?, a, b, &q()).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (h, s, t, eta, p=2.0, r=1, m_r=1.0, c=1.0))]
#[allow(clippy::too_many_arguments)]
fn increment_capacity_bound(
    h: f64,
    s: f64,
    t: f64,
    eta: f64,
    p: f64,
    r: u32,
    m_r: f64,
    c: f64,
) -> PyResult<f64> {
    let params = CapacityParams::new(p, r, m_r, c).map_err(to_py)?;
    bounds::increment_capacity_bound(hurst(h)?, &params, s, t, eta).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (h, s, t, eta, variant="one_sided"))]
fn sup_capacity_bound(h: f64, s: f64, t: f64, eta: f64, variant: &str) -> PyResult<f64> {
    let v = match variant {
        "one_sided" => SupVariant::OneSided,
        "two_sided" => SupVariant::TwoSided,
        "terminal" => SupVariant::Terminal,
        other => return Err(PyValueError::new_err(format!("unknown variant `{other}`"))),
    };
    bounds::sup_capacity_bound(hurst(h)?, s, t, eta, v).map_err(to_py)
}

#[pyfunction]
fn gamma_factor(h: f64) -> PyResult<f64> {
    Ok(bounds::gamma_factor(hurst(h)?))
}

#[pyfunction]
fn mgf_sup_bound(h: f64, alpha: f64, s: f64, t: f64) -> PyResult<f64> {
    bounds::mgf_sup_bound(hurst(h)?, alpha, s, t).map_err(to_py)
}

#[pyfunction]
fn modulus_envelope(h: f64, delta: f64) -> PyResult<f64> {
    bounds::modulus_envelope(hurst(h)?, delta).map_err(to_py)
}

#[pyfunction]
fn lil_envelope(h: f64, t: f64) -> PyResult<f64> {
    bounds::lil_envelope(hurst(h)?, t).map_err(to_py)
}

#[pyfunction]
fn double_point_dimension_threshold(h: f64) -> PyResult<u32> {
    Ok(bounds::double_point_dimension_threshold(hurst(h)?))
}

/// Evaluates a JSON bound query such as `{"formula":"tail_lower","a":1.0}`
/// and returns the JSON report.
#[pyfunction]
#[pyo3(signature = (query, ch_mode="literal"))]
fn evaluate_bound(query: &str, ch_mode: &str) -> PyResult<String> {
    let q: BoundQuery =
        serde_json::from_str(query).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let mode = match ch_mode {
        "literal" => ChMode::Literal,
        "derived" => ChMode::Derived,
        other => return Err(PyValueError::new_err(format!("unknown ch_mode `{other}`"))),
    };
    let report = q.evaluate(mode).map_err(to_py)?;
    serde_json::to_string(&report).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Lower-triangular synthesis matrix on a uniform grid of `[0, horizon]`.
#[pyclass(name = "CoefficientMatrix")]
struct PyCoefficientMatrix {
    inner: sampler::CoefficientMatrix,
}

#[pymethods]
impl PyCoefficientMatrix {
    #[new]
    #[pyo3(signature = (h, n_cells, horizon=1.0, renormalize=true))]
    fn new(h: f64, n_cells: usize, horizon: f64, renormalize: bool) -> PyResult<Self> {
        let grid = TimeGrid::new(horizon, n_cells).map_err(to_py)?;
        let opts = MatrixOptions {
            renormalize,
            method: BuildMethod::Auto,
        };
        let inner =
            sampler::CoefficientMatrix::build(hurst(h)?, grid, &q(), opts).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n_cells(&self) -> usize {
        self.inner.grid().n_cells()
    }

    fn times(&self) -> Vec<f64> {
        self.inner.grid().points()
    }

    fn row(&self, j: usize) -> PyResult<Vec<f64>> {
        if j == 0 || j > self.n_cells() {
            return Err(PyValueError::new_err(format!(
                "row must be in 1..={}",
                self.n_cells()
            )));
        }
        Ok(self.inner.row(j).to_vec())
    }

    fn scheme_covariance(&self, j: usize, k: usize) -> PyResult<f64> {
        let n = self.n_cells();
        if j == 0 || k == 0 || j > n || k > n {
            return Err(PyValueError::new_err(format!("indices must be in 1..={n}")));
        }
        Ok(self.inner.scheme_covariance(j, k))
    }

    /// `n_paths` paths as `[path][component][grid point]`.
    #[pyo3(signature = (n_paths, dim=1, seed=0, stream_id=0))]
    fn sample(
        &self,
        py: Python<'_>,
        n_paths: usize,
        dim: usize,
        seed: u64,
        stream_id: u64,
    ) -> PyResult<Vec<Vec<Vec<f64>>>> {
        let s = SeedSpec::new(seed, stream_id);
        let paths = py
            .detach(|| sampler::sample_ensemble_volterra(&self.inner, dim, n_paths, s))
            .map_err(to_py)?;
        Ok(paths.into_iter().map(|p| p.values).collect())
    }
}

/// Exact-law paths on a uniform grid, `[path][component][grid point]`.
#[pyfunction]
#[pyo3(signature = (h, n_cells, n_paths, horizon=1.0, dim=1, seed=0, stream_id=0))]
#[allow(clippy::too_many_arguments)]
fn sample_cholesky(
    py: Python<'_>,
    h: f64,
    n_cells: usize,
    n_paths: usize,
    horizon: f64,
    dim: usize,
    seed: u64,
    stream_id: u64,
) -> PyResult<Vec<Vec<Vec<f64>>>> {
    let h = hurst(h)?;
    let grid = TimeGrid::new(horizon, n_cells).map_err(to_py)?;
    let paths = py
        .detach(|| {
            sampler::sample_ensemble_cholesky(h, grid, dim, n_paths, SeedSpec::new(seed, stream_id))
        })
        .map_err(to_py)?;
    Ok(paths.into_iter().map(|p| p.values).collect())
}

/// Log-log slope of the mean maximal increment over lags of 1..16 steps.
#[pyfunction]
fn hurst_loglog_estimate(times: Vec<f64>, paths: Vec<Vec<f64>>) -> PyResult<f64> {
    let ens = sampler::Ensemble::new(times, paths).map_err(to_py)?;
    let deltas = pathstats::default_hurst_ladder(&ens).map_err(to_py)?;
    Ok(pathstats::hurst_loglog_estimate(&ens, &deltas)
        .map_err(to_py)?
        .estimate)
}

/// Runs an experiment from a JSON config and returns the report as JSON.
/// Files are written only when `write` is true.
#[pyfunction]
#[pyo3(signature = (config, write=false))]
fn run_experiment(py: Python<'_>, config: &str, write: bool) -> PyResult<String> {
    let cfg = ExperimentConfig::from_json(config)
        .and_then(ExperimentConfig::resolve)
        .map_err(to_py)?;
    let report = py.detach(|| harness::run(&cfg)).map_err(to_py)?;
    if write {
        harness::write_outputs(&report, cfg.out_path()).map_err(to_py)?;
    }
    report.to_json().map_err(to_py)
}

#[pymodule]
#[pyo3(name = "fbmlab")]
fn fbmlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyCoefficientMatrix>()?;
    m.add_function(wrap_pyfunction!(kernel_eval, m)?)?;
    m.add_function(wrap_pyfunction!(covariance, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_l2_inner, m)?)?;
    m.add_function(wrap_pyfunction!(fgn_autocov, m)?)?;
    m.add_function(wrap_pyfunction!(increment_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(cameron_martin_inner, m)?)?;
    m.add_function(wrap_pyfunction!(increment_capacity_bound, m)?)?;
    m.add_function(wrap_pyfunction!(sup_capacity_bound, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_factor, m)?)?;
    m.add_function(wrap_pyfunction!(mgf_sup_bound, m)?)?;
    m.add_function(wrap_pyfunction!(modulus_envelope, m)?)?;
    m.add_function(wrap_pyfunction!(lil_envelope, m)?)?;
    m.add_function(wrap_pyfunction!(double_point_dimension_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_bound, m)?)?;
    m.add_function(wrap_pyfunction!(sample_cholesky, m)?)?;
    m.add_function(wrap_pyfunction!(hurst_loglog_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
