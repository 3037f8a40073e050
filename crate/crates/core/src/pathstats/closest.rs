//! Closest approach `min |B_s - B_t|` between two disjoint time windows.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{FbmError, Result};
use crate::sampler::PathSample;

/// Closed time window `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start >= 0.0 && start <= end && end.is_finite()) {
            return Err(FbmError::domain(
                "closest_approach",
                format!("invalid window [{start}, {end}]"),
            ));
        }
        Ok(Self { start, end })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ClosestMethod {
    BruteForce,
    #[default]
    Hashed,
}

/// Grid indices falling inside each window; rejects overlapping windows.
fn window_indices(path: &PathSample, i: Window, j: Window) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(i.end < j.start) {
        return Err(FbmError::domain(
            "closest_approach",
            format!("windows must be disjoint with I before J, got I={i:?}, J={j:?}"),
        ));
    }
    let pts = path.grid.points();
    let tol = 1e-12 * path.grid.horizon();
    let pick = |w: Window| -> Vec<usize> {
        (0..pts.len())
            .filter(|&k| pts[k] >= w.start - tol && pts[k] <= w.end + tol)
            .collect()
    };
    let (a, b) = (pick(i), pick(j));
    if a.is_empty() || b.is_empty() {
        return Err(FbmError::domain(
            "closest_approach",
            "a window contains no grid point",
        ));
    }
    if a.last() >= b.first() {
        return Err(FbmError::domain(
            "closest_approach",
            "windows share a grid point",
        ));
    }
    Ok((a, b))
}

/// Row-major `len × dim` copy of the selected points.
fn gather(path: &PathSample, idx: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(idx.len() * path.dim);
    for &k in idx {
        for c in 0..path.dim {
            out.push(path.values[c][k]);
        }
    }
    out
}

#[inline]
fn dist2(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s
}

fn brute(a: &[f64], b: &[f64], dim: usize) -> f64 {
    let mut best = f64::INFINITY;
    for p in a.chunks_exact(dim) {
        for q in b.chunks_exact(dim) {
            best = best.min(dist2(p, q));
        }
    }
    best
}

type Cell = [i64; 3];

fn cell_of(p: &[f64], size: f64) -> Cell {
    let mut c = [0i64; 3];
    for (k, ck) in c.iter_mut().enumerate().take(p.len().min(3)) {
        *ck = (p[k] / size).floor() as i64;
    }
    c
}

fn hashed(a: &[f64], b: &[f64], dim: usize) -> f64 {
    // Any pair gives an upper bound; a strided subsample gives a good one.
    let stride_a = (a.len() / dim / 64).max(1);
    let stride_b = (b.len() / dim / 64).max(1);
    let mut best = f64::INFINITY;
    for p in a.chunks_exact(dim).step_by(stride_a) {
        for q in b.chunks_exact(dim).step_by(stride_b) {
            best = best.min(dist2(p, q));
        }
    }
    let size = best.sqrt();
    if !(size > 0.0 && size.is_finite()) {
        return best;
    }
    // Projection onto the hashed coordinates never increases distances, so
    // every pair closer than `size` lies in neighbouring cells.
    let mut cells: HashMap<Cell, Vec<usize>> = HashMap::new();
    for (k, q) in b.chunks_exact(dim).enumerate() {
        cells.entry(cell_of(q, size)).or_default().push(k);
    }
    let hashed_dims = dim.min(3);
    let reach: Vec<Cell> = {
        let mut v = Vec::new();
        for x in -1..=1 {
            for y in -1..=1 {
                for z in -1..=1 {
                    let off = [x, y, z];
                    if off[hashed_dims..].iter().all(|&o| o == 0) {
                        v.push(off);
                    }
                }
            }
        }
        v
    };
    for p in a.chunks_exact(dim) {
        let home = cell_of(p, size);
        for off in &reach {
            let key = [home[0] + off[0], home[1] + off[1], home[2] + off[2]];
            if let Some(list) = cells.get(&key) {
                for &k in list {
                    best = best.min(dist2(p, &b[k * dim..(k + 1) * dim]));
                }
            }
        }
    }
    best
}

/// Smallest Euclidean distance between `B_s`, `s ∈ I`, and `B_t`, `t ∈ J`,
/// over grid points. Both methods return the same value.
pub fn closest_approach(
    path: &PathSample,
    i: Window,
    j: Window,
    method: ClosestMethod,
) -> Result<f64> {
    let (ia, jb) = window_indices(path, i, j)?;
    let a = gather(path, &ia);
    let b = gather(path, &jb);
    let d2 = match method {
        ClosestMethod::BruteForce => brute(&a, &b, path.dim),
        ClosestMethod::Hashed => hashed(&a, &b, path.dim),
    };
    Ok(d2.sqrt())
}
