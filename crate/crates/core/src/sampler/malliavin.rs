use serde::{Deserialize, Serialize};

use crate::error::{FbmError, Result};
use crate::kernel::{HurstParameter, QuadratureConfig, TimeGrid, VolterraKernel};
use crate::quad::{integrate_singular, Endpoint};

/// The increment `B_end - B_start`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Increment {
    pub start: f64,
    pub end: f64,
}

impl Increment {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start >= 0.0 && start < end && end.is_finite()) {
            return Err(FbmError::domain(
                "increment",
                format!("need 0 <= start < end, got ({start}, {end})"),
            ));
        }
        Ok(Self { start, end })
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }
}

/// `DB_t(s) = ∫_0^{s∧t} K(t, u) du` at every grid point `s_j`.
pub fn malliavin_derivative(
    h: HurstParameter,
    t: f64,
    grid: &TimeGrid,
    q: &QuadratureConfig,
) -> Result<Vec<f64>> {
    q.validate()?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(FbmError::domain(
            "malliavin_derivative",
            format!("need t > 0, got {t}"),
        ));
    }
    let points = grid.points();
    if h.is_half() {
        return Ok(points.iter().map(|&s| s.min(t)).collect());
    }
    let k = VolterraKernel::new(h, *q);
    let mut out = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1].min(t));
        if a < b {
            acc += k.cell_integral(t, a, b)?;
        }
        out.push(acc);
    }
    Ok(out)
}

/// `⟨D(B_t - B_s), D(B_r - B_u)⟩`, the `L²` inner product of the kernel
/// differences `K(t,·)1_{·<t} - K(s,·)1_{·<s}`.
pub fn cameron_martin_inner(
    h: HurstParameter,
    a: Increment,
    b: Increment,
    q: &QuadratureConfig,
) -> Result<f64> {
    q.validate()?;
    Increment::new(a.start, a.end)?;
    Increment::new(b.start, b.end)?;
    if h.is_half() {
        let lo = a.start.max(b.start);
        let hi = a.end.min(b.end);
        return Ok((hi - lo).max(0.0));
    }
    let outer = VolterraKernel::new(h, *q);
    let k = outer.inner();
    // (end, sign) pairs of the two kernel differences.
    let terms_a = [(a.end, 1.0), (a.start, -1.0)];
    let terms_b = [(b.end, 1.0), (b.start, -1.0)];
    let mut breaks = vec![0.0, a.start, a.end, b.start, b.end];
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let diag = (2.0 * outer.diagonal_exponent()).min(0.0);
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo || hi > a.end.max(b.end) {
            continue;
        }
        let side = |terms: &[(f64, f64); 2], v: f64, to_hi: f64| -> f64 {
            terms
                .iter()
                .filter(|(end, _)| *end >= hi)
                .map(|&(end, sign)| sign * k.eval_gap(v, (end - hi) + to_hi).unwrap_or(f64::NAN))
                .sum()
        };
        let left = if lo == 0.0 {
            Endpoint::power(2.0 * outer.origin_exponent())
        } else {
            Endpoint::REGULAR
        };
        total += integrate_singular(
            |v, to_hi| side(&terms_a, v, to_hi) * side(&terms_b, v, to_hi),
            lo,
            hi,
            left,
            Endpoint::power(diag),
            q,
        )?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp(v: f64) -> HurstParameter {
        HurstParameter::new(v).unwrap()
    }

    #[test]
    fn brownian_derivative_is_min() {
        let g = TimeGrid::new(2.0, 8).unwrap();
        let d = malliavin_derivative(hp(0.5), 1.1, &g, &QuadratureConfig::default()).unwrap();
        for (s, v) in g.points().iter().zip(&d) {
            assert_eq!(*v, s.min(1.1));
        }
    }

    #[test]
    fn derivative_is_monotone_and_flat_after_t() {
        let g = TimeGrid::new(2.0, 20).unwrap();
        for h in [0.2, 0.8] {
            let d = malliavin_derivative(hp(h), 1.05, &g, &QuadratureConfig::default()).unwrap();
            assert!(d.windows(2).all(|w| w[1] >= w[0]));
            assert!(d[11..].iter().all(|&v| v == d[11]));
        }
    }

    #[test]
    fn brownian_inner_product_is_overlap() {
        let q = QuadratureConfig::default();
        let a = Increment::new(0.2, 0.9).unwrap();
        let b = Increment::new(0.5, 1.5).unwrap();
        assert!((cameron_martin_inner(hp(0.5), a, b, &q).unwrap() - 0.4).abs() < 1e-15);
        let c = Increment::new(1.0, 2.0).unwrap();
        assert_eq!(cameron_martin_inner(hp(0.5), a, c, &q).unwrap(), 0.0);
    }

    #[test]
    fn self_inner_product_is_increment_variance() {
        let q = QuadratureConfig::default();
        for h in [0.25, 0.75] {
            let a = Increment::new(0.3, 1.1).unwrap();
            let v = cameron_martin_inner(hp(h), a, a, &q).unwrap();
            let expect = 0.8f64.powf(2.0 * h);
            assert!(
                ((v - expect) / expect).abs() < 1e-6,
                "H={h}: {v} vs {expect}"
            );
        }
    }
}
