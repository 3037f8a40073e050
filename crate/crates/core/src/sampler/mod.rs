//! Path synthesis from Brownian increments, an exact Gaussian oracle, and
//! the Malliavin-side quantities of the kernel representation.

mod cholesky;
mod export;
mod malliavin;
mod matrix;
mod rng;

pub use cholesky::*;
pub use export::*;
pub use malliavin::*;
pub use matrix::*;
pub use rng::*;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FbmError, Result};
use crate::kernel::TimeGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Volterra,
    Cholesky,
}

/// One `dim`-dimensional path on a grid; `values[c][0] = 0` for every component.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub grid: TimeGrid,
    pub dim: usize,
    pub values: Vec<Vec<f64>>,
    pub method: Method,
    pub seed: SeedSpec,
}

impl PathSample {
    pub fn component(&self, c: usize) -> &[f64] {
        &self.values[c]
    }

    /// Point `j` of the path as a `dim`-vector.
    pub fn point(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[j]).collect()
    }
}

/// Paths processed together by one GEMM call. Fixed, so the work split and
/// therefore every floating-point sum is independent of the thread count.
const CHUNK_ROWS: usize = 32;

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(FbmError::domain("sample_path", "dim must be at least 1"));
    }
    Ok(())
}

pub fn sample_path_volterra(
    a: &CoefficientMatrix,
    dim: usize,
    seed: SeedSpec,
) -> Result<PathSample> {
    check_dim(dim)?;
    let n = a.grid().n_cells();
    let dt = a.grid().spacing();
    let mut w = vec![0.0; dim * n];
    for (c, row) in w.chunks_exact_mut(n).enumerate() {
        seed.fill_normals(c, dt, row);
    }
    let out = a.synthesize(&w, dim);
    Ok(PathSample {
        grid: *a.grid(),
        dim,
        values: out.chunks_exact(n + 1).map(<[f64]>::to_vec).collect(),
        method: Method::Volterra,
        seed,
    })
}

/// `n_paths` independent paths; path `p` uses `seed.for_path(p)`.
pub fn sample_ensemble_volterra(
    a: &CoefficientMatrix,
    dim: usize,
    n_paths: usize,
    seed: SeedSpec,
) -> Result<Vec<PathSample>> {
    check_dim(dim)?;
    let n = a.grid().n_cells();
    let dt = a.grid().spacing();
    let total = n_paths * dim;
    let chunks: Vec<Vec<f64>> = (0..total.div_ceil(CHUNK_ROWS))
        .into_par_iter()
        .map(|k| {
            let lo = k * CHUNK_ROWS;
            let hi = (lo + CHUNK_ROWS).min(total);
            let mut w = vec![0.0; (hi - lo) * n];
            for (r, row) in (lo..hi).zip(w.chunks_exact_mut(n)) {
                seed.for_path(r / dim).fill_normals(r % dim, dt, row);
            }
            a.synthesize(&w, hi - lo)
        })
        .collect();
    let mut rows = chunks.iter().flat_map(|c| c.chunks_exact(n + 1));
    let mut out = Vec::with_capacity(n_paths);
    for p in 0..n_paths {
        let values = (0..dim)
            .map(|_| rows.next().expect("row count").to_vec())
            .collect();
        out.push(PathSample {
            grid: *a.grid(),
            dim,
            values,
            method: Method::Volterra,
            seed: seed.for_path(p),
        });
    }
    Ok(out)
}

/// One-dimensional paths sharing a time axis. `times[0]` is the first
/// observation, which is the origin for grid ensembles.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub times: Vec<f64>,
    pub paths: Vec<Vec<f64>>,
}

impl Ensemble {
    pub fn new(times: Vec<f64>, paths: Vec<Vec<f64>>) -> Result<Self> {
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(FbmError::domain(
                "ensemble",
                "times must be strictly increasing",
            ));
        }
        if paths.iter().any(|p| p.len() != times.len()) {
            return Err(FbmError::domain(
                "ensemble",
                "path length differs from time axis",
            ));
        }
        Ok(Self { times, paths })
    }

    /// Every component of every sample becomes its own path.
    pub fn from_samples(samples: &[PathSample]) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| FbmError::domain("ensemble", "no samples"))?;
        let times = first.grid.points();
        let paths = samples
            .iter()
            .flat_map(|s| s.values.iter().cloned())
            .collect();
        Self::new(times, paths)
    }

    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Common spacing when the axis is uniform to 1e-9 relative.
    pub fn spacing(&self) -> Option<f64> {
        if self.times.len() < 2 {
            return None;
        }
        let d = (self.times[self.times.len() - 1] - self.times[0]) / (self.times.len() - 1) as f64;
        let uniform = self
            .times
            .windows(2)
            .all(|w| ((w[1] - w[0]) - d).abs() <= 1e-9 * d);
        uniform.then_some(d)
    }

    /// Keeps every `stride`-th observation starting from the first.
    pub fn subsample(&self, stride: usize) -> Self {
        let stride = stride.max(1);
        let pick = |v: &Vec<f64>| v.iter().step_by(stride).copied().collect();
        Self {
            times: pick(&self.times),
            paths: self.paths.iter().map(pick).collect(),
        }
    }

    /// Negated paths; the law of a centred Gaussian process is symmetric.
    pub fn reflected(&self) -> Self {
        Self {
            times: self.times.clone(),
            paths: self
                .paths
                .iter()
                .map(|p| p.iter().map(|x| -x).collect())
                .collect(),
        }
    }
}

/// Keeps every `stride`-th grid point of a path.
pub fn subsample_path(sample: &PathSample, stride: usize) -> Result<PathSample> {
    let n = sample.grid.n_cells();
    if stride == 0 || n % stride != 0 {
        return Err(FbmError::domain(
            "subsample_path",
            format!("stride {stride} does not divide {n} cells"),
        ));
    }
    Ok(PathSample {
        grid: TimeGrid::new(sample.grid.horizon(), n / stride)?,
        dim: sample.dim,
        values: sample
            .values
            .iter()
            .map(|v| v.iter().step_by(stride).copied().collect())
            .collect(),
        method: sample.method,
        seed: sample.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{HurstParameter, QuadratureConfig};

    fn matrix(h: f64, n: usize) -> CoefficientMatrix {
        build_coefficient_matrix(
            HurstParameter::new(h).unwrap(),
            TimeGrid::new(1.0, n).unwrap(),
            &QuadratureConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn brownian_paths_are_cumulative_sums() {
        let a = matrix(0.5, 50);
        let seed = SeedSpec::new(11, 2);
        let p = sample_path_volterra(&a, 2, seed).unwrap();
        for c in 0..2 {
            let mut w = vec![0.0; 50];
            seed.fill_normals(c, 1.0 / 50.0, &mut w);
            let mut acc = 0.0;
            assert_eq!(p.values[c][0], 0.0);
            for i in 0..50 {
                acc += w[i];
                assert_eq!(p.values[c][i + 1], acc);
            }
        }
    }

    #[test]
    fn ensemble_rows_match_single_paths() {
        let a = matrix(0.35, 40);
        let ens = sample_ensemble_volterra(&a, 3, 25, SeedSpec::new(99, 4)).unwrap();
        assert_eq!(ens.len(), 25);
        for p in [0, 7, 24] {
            let single = sample_path_volterra(&a, 3, SeedSpec::new(99, 4 + p as u64)).unwrap();
            assert_eq!(ens[p].seed, single.seed);
            for c in 0..3 {
                for (x, y) in ens[p].values[c].iter().zip(&single.values[c]) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn ensemble_is_identical_across_thread_counts() {
        let a = matrix(0.7, 64);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| sample_ensemble_volterra(&a, 2, 70, SeedSpec::new(5, 0)).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn subsampling_keeps_grid_points() {
        let a = matrix(0.5, 8);
        let p = sample_path_volterra(&a, 1, SeedSpec::new(1, 0)).unwrap();
        let s = subsample_path(&p, 4).unwrap();
        assert_eq!(
            s.values[0],
            vec![p.values[0][0], p.values[0][4], p.values[0][8]]
        );
        assert!(subsample_path(&p, 3).is_err());
        let e = Ensemble::from_samples(&[p]).unwrap();
        assert_eq!(e.spacing(), Some(0.125));
        assert_eq!(e.reflected().paths[0][3], -e.paths[0][3]);
    }
}
