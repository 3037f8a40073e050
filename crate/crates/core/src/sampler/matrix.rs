//! Lower-triangular cell-average matrix `A[j][i] = Δ^{-1} ∫_{t_i}^{t_{i+1}} K(t_j, r) dr`
//! and batched path synthesis `B_{t_j} = Σ_{i<j} A[j][i] ΔW_i`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FbmError, Result};
use crate::kernel::{HurstParameter, QuadratureConfig, TimeGrid, UnitPrimitive, VolterraKernel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BuildMethod {
    /// Direct for small grids, scaled otherwise.
    #[default]
    Auto,
    /// One adaptive quadrature per cell.
    Direct,
    /// Homogeneity of the kernel plus an interpolated unit primitive.
    Scaled,
}

/// Largest grid built cell-by-cell under [`BuildMethod::Auto`].
pub const AUTO_DIRECT_MAX_CELLS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixOptions {
    /// Rescale each row so `Σ_i A[j][i]² Δ = t_j^{2H}` exactly.
    pub renormalize: bool,
    pub method: BuildMethod,
}

impl Default for MatrixOptions {
    fn default() -> Self {
        Self {
            renormalize: true,
            method: BuildMethod::Auto,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CoefficientMatrix {
    grid: TimeGrid,
    hurst: HurstParameter,
    /// Row `j ≥ 1` occupies `entries[j(j-1)/2 .. j(j+1)/2]`.
    entries: Vec<f64>,
    /// `Σ_i A[j][i]² Δ` before any renormalisation, indexed by `j`.
    raw_variance: Vec<f64>,
    renormalized: bool,
}

#[inline]
fn row_offset(j: usize) -> usize {
    j * (j - 1) / 2
}

fn split_rows(entries: &mut [f64], n: usize) -> Vec<&mut [f64]> {
    let mut rows = Vec::with_capacity(n);
    let mut rest = entries;
    for j in 1..=n {
        let (row, tail) = rest.split_at_mut(j);
        rows.push(row);
        rest = tail;
    }
    rows
}

pub fn build_coefficient_matrix(
    h: HurstParameter,
    grid: TimeGrid,
    q: &QuadratureConfig,
) -> Result<CoefficientMatrix> {
    CoefficientMatrix::build(h, grid, q, MatrixOptions::default())
}

impl CoefficientMatrix {
    pub fn build(
        h: HurstParameter,
        grid: TimeGrid,
        q: &QuadratureConfig,
        opts: MatrixOptions,
    ) -> Result<Self> {
        q.validate()?;
        let n = grid.n_cells();
        let mut entries = vec![0.0; n * (n + 1) / 2];
        if h.is_half() {
            entries.fill(1.0);
        } else {
            let kernel = VolterraKernel::new(h, *q);
            let method = match opts.method {
                BuildMethod::Auto if n <= AUTO_DIRECT_MAX_CELLS => BuildMethod::Direct,
                BuildMethod::Auto => BuildMethod::Scaled,
                m => m,
            };
            let mut rows = split_rows(&mut entries, n);
            match method {
                BuildMethod::Direct => Self::fill_direct(&kernel, &grid, &mut rows)?,
                _ => Self::fill_scaled(kernel, &grid, &mut rows)?,
            }
        }
        let dt = grid.spacing();
        let mut raw_variance = vec![0.0; n + 1];
        for j in 1..=n {
            let row = &entries[row_offset(j)..row_offset(j) + j];
            raw_variance[j] = row.iter().map(|a| a * a).sum::<f64>() * dt;
        }
        let mut m = Self {
            grid,
            hurst: h,
            entries,
            raw_variance,
            renormalized: false,
        };
        if opts.renormalize && !h.is_half() {
            m.renormalize();
        }
        Ok(m)
    }

    fn fill_direct(
        kernel: &VolterraKernel,
        grid: &TimeGrid,
        rows: &mut [&mut [f64]],
    ) -> Result<()> {
        let dt = grid.spacing();
        rows.par_iter_mut().enumerate().try_for_each(|(r, row)| {
            let j = r + 1;
            let t = grid.point(j);
            for (i, a) in row.iter_mut().enumerate() {
                let lo = grid.point(i);
                let hi = if i + 1 == j { t } else { grid.point(i + 1) };
                let mass = kernel
                    .cell_integral(t, lo, hi)
                    .map_err(|e| FbmError::Cell {
                        row: j,
                        col: i,
                        source: Box::new(e),
                    })?;
                *a = mass / dt;
            }
            Ok(())
        })
    }

    fn fill_scaled(kernel: VolterraKernel, grid: &TimeGrid, rows: &mut [&mut [f64]]) -> Result<()> {
        let prim = UnitPrimitive::build(kernel).map_err(|e| FbmError::Cell {
            row: 0,
            col: 0,
            source: Box::new(e),
        })?;
        let h = kernel.hurst().value();
        // A[j][i] = Δ^{H-1/2} j^{H+1/2} ∫_{i/j}^{(i+1)/j} K(1, x) dx
        let front = grid.spacing().powf(h - 0.5);
        rows.par_iter_mut().enumerate().for_each(|(r, row)| {
            let j = r + 1;
            prim.row_masses(j as u64, row);
            let scale = front * (j as f64).powf(h + 0.5);
            for a in row.iter_mut() {
                *a *= scale;
            }
        });
        Ok(())
    }

    fn renormalize(&mut self) {
        let n = self.grid.n_cells();
        let h = self.hurst.value();
        for j in 1..=n {
            let target = self.grid.point(j).powf(2.0 * h);
            let scale = (target / self.raw_variance[j]).sqrt();
            let off = row_offset(j);
            for a in &mut self.entries[off..off + j] {
                *a *= scale;
            }
        }
        self.renormalized = true;
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn hurst(&self) -> HurstParameter {
        self.hurst
    }

    pub fn is_renormalized(&self) -> bool {
        self.renormalized
    }

    /// Row `j` (length `j`); row 0 is empty.
    pub fn row(&self, j: usize) -> &[f64] {
        if j == 0 {
            return &[];
        }
        &self.entries[row_offset(j)..row_offset(j) + j]
    }

    /// `A[j][i]`, zero off the kernel support `i ≥ j`.
    pub fn entry(&self, j: usize, i: usize) -> f64 {
        if i >= j {
            0.0
        } else {
            self.entries[row_offset(j) + i]
        }
    }

    /// `Σ_i A[j][i]² Δ` of the unnormalised scheme; tends to `t_j^{2H}`.
    pub fn raw_variance(&self, j: usize) -> f64 {
        self.raw_variance[j]
    }

    /// Covariance of the synthesised values, `Σ_i A[j][i] A[k][i] Δ`.
    pub fn scheme_covariance(&self, j: usize, k: usize) -> f64 {
        let m = j.min(k);
        let (a, b) = (self.row(j), self.row(k));
        (0..m).map(|i| a[i] * b[i]).sum::<f64>() * self.grid.spacing()
    }

    /// Maps `rows` increment vectors (row-major, `n` each) to paths
    /// (row-major, `n + 1` each, starting at 0).
    pub fn synthesize(&self, increments: &[f64], rows: usize) -> Vec<f64> {
        let n = self.grid.n_cells();
        assert_eq!(increments.len(), rows * n);
        let mut out = vec![0.0; rows * (n + 1)];
        if self.hurst.is_half() {
            for (w, b) in increments.chunks_exact(n).zip(out.chunks_exact_mut(n + 1)) {
                let mut acc = 0.0;
                for (i, dw) in w.iter().enumerate() {
                    acc += dw;
                    b[i + 1] = acc;
                }
            }
            return out;
        }
        const BLOCK: usize = 128;
        let mut dense = Vec::new();
        let mut j0 = 1;
        while j0 <= n {
            let j1 = (j0 + BLOCK).min(n + 1);
            let bs = j1 - j0;
            let width = j1 - 1;
            dense.clear();
            dense.resize(bs * width, 0.0);
            for (r, j) in (j0..j1).enumerate() {
                dense[r * width..r * width + j].copy_from_slice(self.row(j));
            }
            // out[p][j0 + r] = Σ_i W[p][i] · dense[r][i]
            unsafe {
                matrixmultiply::dgemm(
                    rows,
                    width,
                    bs,
                    1.0,
                    increments.as_ptr(),
                    n as isize,
                    1,
                    dense.as_ptr(),
                    1,
                    width as isize,
                    0.0,
                    out.as_mut_ptr().add(j0),
                    (n + 1) as isize,
                    1,
                );
            }
            j0 = j1;
        }
        out
    }
}
