use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{FbmError, Result};
use crate::kernel::{covariance, HurstParameter, TimeGrid};

use super::{check_dim, Ensemble, Method, PathSample, SeedSpec, CHUNK_ROWS};

const JITTER_START: f64 = 1e-14;
const JITTER_LIMIT: f64 = 1e-10;

/// Cholesky factor of `[R(t_j, t_k)]` on strictly positive, increasing times.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    times: Vec<f64>,
    /// Row-major lower triangle, `m × m`.
    lower: Vec<f64>,
    jitter: f64,
}

impl CholeskyFactor {
    pub fn new(h: HurstParameter, times: &[f64]) -> Result<Self> {
        if times.is_empty() || !(times[0] > 0.0) || times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(FbmError::domain(
                "sample_path_cholesky",
                "times must be positive and strictly increasing",
            ));
        }
        let m = times.len();
        let mut cov = DMatrix::<f64>::zeros(m, m);
        for j in 0..m {
            for k in 0..=j {
                let r = covariance(h, times[j], times[k])?;
                cov[(j, k)] = r;
                cov[(k, j)] = r;
            }
        }
        let scale = (0..m).map(|j| cov[(j, j)]).fold(0.0, f64::max);
        let mut jitter = 0.0;
        loop {
            let mut c = cov.clone();
            for j in 0..m {
                c[(j, j)] += jitter * scale;
            }
            if let Some(ch) = c.cholesky() {
                let l = ch.l();
                let mut lower = vec![0.0; m * m];
                for j in 0..m {
                    for k in 0..=j {
                        lower[j * m + k] = l[(j, k)];
                    }
                }
                return Ok(Self {
                    times: times.to_vec(),
                    lower,
                    jitter,
                });
            }
            jitter = if jitter == 0.0 {
                JITTER_START
            } else {
                jitter * 10.0
            };
            if jitter > JITTER_LIMIT * (1.0 + 1e-9) {
                return Err(FbmError::Factorization {
                    jitter: jitter / 10.0,
                });
            }
        }
    }

    pub fn for_grid(h: HurstParameter, grid: &TimeGrid) -> Result<Self> {
        Self::new(h, &grid.points()[1..])
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Relative diagonal jitter that was needed, 0 when none.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Applies the factor to `rows` standard normal vectors (row-major).
    fn apply(&self, z: &[f64], rows: usize) -> Vec<f64> {
        let m = self.times.len();
        let mut out = vec![0.0; rows * m];
        // out[p][j] = Σ_k z[p][k] L[j][k]
        unsafe {
            matrixmultiply::dgemm(
                rows,
                m,
                m,
                1.0,
                z.as_ptr(),
                m as isize,
                1,
                self.lower.as_ptr(),
                1,
                m as isize,
                0.0,
                out.as_mut_ptr(),
                m as isize,
                1,
            );
        }
        out
    }

    /// `n_paths` one-dimensional samples at the factor's times.
    pub fn sample_ensemble(&self, n_paths: usize, seed: SeedSpec) -> Ensemble {
        let rows = self.rows(n_paths, 1, seed);
        Ensemble {
            times: self.times.clone(),
            paths: rows,
        }
    }

    fn rows(&self, n_paths: usize, dim: usize, seed: SeedSpec) -> Vec<Vec<f64>> {
        let m = self.times.len();
        let total = n_paths * dim;
        let chunks: Vec<Vec<f64>> = (0..total.div_ceil(CHUNK_ROWS))
            .into_par_iter()
            .map(|k| {
                let lo = k * CHUNK_ROWS;
                let hi = (lo + CHUNK_ROWS).min(total);
                let mut z = vec![0.0; (hi - lo) * m];
                for (r, row) in (lo..hi).zip(z.chunks_exact_mut(m)) {
                    seed.for_path(r / dim).fill_normals(r % dim, 1.0, row);
                }
                self.apply(&z, hi - lo)
            })
            .collect();
        chunks
            .iter()
            .flat_map(|c| c.chunks_exact(m).map(<[f64]>::to_vec))
            .collect()
    }
}

fn with_origin(v: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(v.len() + 1);
    out.push(0.0);
    out.extend_from_slice(v);
    out
}

pub fn sample_path_cholesky(
    h: HurstParameter,
    grid: TimeGrid,
    dim: usize,
    seed: SeedSpec,
) -> Result<PathSample> {
    check_dim(dim)?;
    let f = CholeskyFactor::for_grid(h, &grid)?;
    let m = grid.n_cells();
    let mut z = vec![0.0; dim * m];
    for (c, row) in z.chunks_exact_mut(m).enumerate() {
        seed.fill_normals(c, 1.0, row);
    }
    let out = f.apply(&z, dim);
    Ok(PathSample {
        grid,
        dim,
        values: out.chunks_exact(m).map(with_origin).collect(),
        method: Method::Cholesky,
        seed,
    })
}

/// Exact-law ensemble on a grid; path `p` uses `seed.for_path(p)`.
pub fn sample_ensemble_cholesky(
    h: HurstParameter,
    grid: TimeGrid,
    dim: usize,
    n_paths: usize,
    seed: SeedSpec,
) -> Result<Vec<PathSample>> {
    check_dim(dim)?;
    let f = CholeskyFactor::for_grid(h, &grid)?;
    let rows = f.rows(n_paths, dim, seed);
    Ok(rows
        .chunks(dim)
        .enumerate()
        .map(|(p, comps)| PathSample {
            grid,
            dim,
            values: comps.iter().map(|v| with_origin(v)).collect(),
            method: Method::Cholesky,
            seed: seed.for_path(p),
        })
        .collect())
}

/// Exact-law one-dimensional samples at arbitrary positive times.
pub fn sample_at_times_cholesky(
    h: HurstParameter,
    times: &[f64],
    n_paths: usize,
    seed: SeedSpec,
) -> Result<Ensemble> {
    Ok(CholeskyFactor::new(h, times)?.sample_ensemble(n_paths, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_reproduces_covariance() {
        let h = HurstParameter::new(0.3).unwrap();
        let times = [0.1, 0.25, 0.7, 1.0, 3.0];
        let f = CholeskyFactor::new(h, &times).unwrap();
        assert_eq!(f.jitter(), 0.0);
        let m = times.len();
        for j in 0..m {
            for k in 0..m {
                let s: f64 = (0..m)
                    .map(|i| f.lower[j * m + i] * f.lower[k * m + i])
                    .sum();
                assert!((s - covariance(h, times[j], times[k]).unwrap()).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn rejects_unordered_times() {
        let h = HurstParameter::new(0.3).unwrap();
        assert!(CholeskyFactor::new(h, &[0.0, 1.0]).is_err());
        assert!(CholeskyFactor::new(h, &[0.5, 0.5]).is_err());
    }

    #[test]
    fn duplicate_like_times_need_jitter_or_fail() {
        // Nearly coincident times make the matrix numerically singular.
        let h = HurstParameter::new(0.9).unwrap();
        let times: Vec<f64> = (1..=200).map(|k| 1.0 + k as f64 * 1e-12).collect();
        match CholeskyFactor::new(h, &times) {
            Ok(f) => assert!(f.jitter() > 0.0),
            Err(e) => assert!(matches!(e, FbmError::Factorization { .. })),
        }
    }

    #[test]
    fn grid_path_starts_at_origin() {
        let h = HurstParameter::new(0.6).unwrap();
        let g = TimeGrid::new(2.0, 16).unwrap();
        let p = sample_path_cholesky(h, g, 2, SeedSpec::new(3, 1)).unwrap();
        assert_eq!(p.values.len(), 2);
        assert!(p.values.iter().all(|v| v.len() == 17 && v[0] == 0.0));
        let e = sample_ensemble_cholesky(h, g, 2, 3, SeedSpec::new(3, 0)).unwrap();
        assert_eq!(e[1].values, p.values);
    }
}
