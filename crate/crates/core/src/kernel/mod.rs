//! The Volterra kernel `K(t,s)` that writes fBM as `B_t = ∫_0^t K(t,s) dω(s)`,
//! the covariance `R(t,s)`, and the integral identities tying them together.

mod primitive;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

pub use self::primitive::UnitPrimitive;
use crate::error::{FbmError, Result};
pub use crate::quad::QuadratureConfig;
use crate::quad::{integrate, integrate_singular, Endpoint};

/// Hurst index, strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HurstParameter(f64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    SubHalf,
    Half,
    SuperHalf,
}

impl HurstParameter {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(FbmError::domain(
                "hurst",
                format!("H must lie in the open interval (0,1), got {value}"),
            ))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn regime(self) -> Regime {
        if self.0 < 0.5 {
            Regime::SubHalf
        } else if self.0 == 0.5 {
            Regime::Half
        } else {
            Regime::SuperHalf
        }
    }

    pub fn is_half(self) -> bool {
        self.regime() == Regime::Half
    }
}

impl TryFrom<f64> for HurstParameter {
    type Error = FbmError;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<HurstParameter> for f64 {
    fn from(h: HurstParameter) -> f64 {
        h.0
    }
}

/// Uniform partition `0 = t_0 < … < t_n = horizon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    n_cells: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_cells: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(FbmError::domain(
                "grid",
                "horizon must be positive and finite",
            ));
        }
        if n_cells == 0 {
            return Err(FbmError::domain("grid", "n_cells must be at least 1"));
        }
        Ok(Self { horizon, n_cells })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_points(&self) -> usize {
        self.n_cells + 1
    }

    pub fn spacing(&self) -> f64 {
        self.horizon / self.n_cells as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        if i == self.n_cells {
            self.horizon
        } else {
            self.horizon * i as f64 / self.n_cells as f64
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..=self.n_cells).map(|i| self.point(i)).collect()
    }
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Normalising constant in front of the kernel. Beta values go through
/// log-gamma because one argument tends to zero as `H → 1/2`.
fn kernel_constant(h: f64) -> f64 {
    let log_sq = if h > 0.5 {
        (h * (2.0 * h - 1.0)).ln() - ln_beta(2.0 - 2.0 * h, h - 0.5)
    } else {
        (2.0 * h / (1.0 - 2.0 * h)).ln() - ln_beta(1.0 - 2.0 * h, h + 0.5)
    };
    (0.5 * log_sq).exp()
}

/// Kernel evaluator bound to one `H`. Cheap to construct and `Copy`, so it
/// can be handed to worker threads freely.
#[derive(Debug, Clone, Copy)]
pub struct VolterraKernel {
    hurst: HurstParameter,
    constant: f64,
    cfg: QuadratureConfig,
}

impl VolterraKernel {
    pub fn new(hurst: HurstParameter, cfg: QuadratureConfig) -> Self {
        let constant = if hurst.is_half() {
            1.0
        } else {
            kernel_constant(hurst.value())
        };
        Self {
            hurst,
            constant,
            cfg,
        }
    }

    pub fn hurst(&self) -> HurstParameter {
        self.hurst
    }

    pub fn config(&self) -> &QuadratureConfig {
        &self.cfg
    }

    /// Normalising constant `c` such that `K = c · (…)`.
    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// `K(t, s)` for `0 < s < t`.
    pub fn eval(&self, t: f64, s: f64) -> Result<f64> {
        if !(s > 0.0 && s < t && t.is_finite()) {
            return Err(FbmError::domain(
                "kernel_eval",
                format!("kernel support requires 0 < s < t, got t={t}, s={s}"),
            ));
        }
        self.eval_gap(s, t - s)
    }

    /// `K(s + gap, s)`. Taking the gap directly keeps evaluations next to
    /// the diagonal accurate.
    pub(crate) fn eval_gap(&self, s: f64, gap: f64) -> Result<f64> {
        let h = self.hurst.value();
        match self.hurst.regime() {
            Regime::Half => Ok(1.0),
            Regime::SuperHalf => {
                // ∫_s^t (u-s)^{H-3/2} u^{H-1/2} du with u = s + x^m, m = 1/(H-1/2):
                // the singular factor cancels against the Jacobian exactly.
                let a = h - 0.5;
                let m = 1.0 / a;
                let upper = gap.powf(a);
                let inner = integrate(|x: f64| (s + x.powf(m)).powf(a), 0.0, upper, &self.cfg)?;
                Ok(self.constant * s.powf(-a) * m * inner)
            }
            Regime::SubHalf => {
                // ∫_s^t u^{H-3/2} (u-s)^{H-1/2} du with u = s + x^m, m = 1/(H+1/2).
                let a = h - 0.5;
                let m = 1.0 / (h + 0.5);
                let upper = gap.powf(h + 0.5);
                let g = |x: f64| (s + x.powf(m)).powf(h - 1.5);
                // The integrand decays from s^{H-3/2} on the length scale
                // s^{1/m}; past that it is a power law best integrated in log x.
                let scale = s.powf(h + 0.5);
                let inner = if scale < 0.25 * upper {
                    integrate(g, 0.0, scale, &self.cfg)?
                        + integrate(
                            |y: f64| {
                                let x = y.exp();
                                g(x) * x
                            },
                            scale.ln(),
                            upper.ln(),
                            &self.cfg,
                        )?
                } else {
                    integrate(g, 0.0, upper, &self.cfg)?
                };
                let t = s + gap;
                let lead = (t / s).powf(a) * gap.powf(a);
                Ok(self.constant * (lead - a * s.powf(-a) * m * inner))
            }
        }
    }

    /// Exponent of the kernel's singularity at `s → 0`.
    pub(crate) fn origin_exponent(&self) -> f64 {
        -(self.hurst.value() - 0.5).abs()
    }

    /// Exponent of `K(t, s)` as `s → t`; negative only when `H < 1/2`.
    pub(crate) fn diagonal_exponent(&self) -> f64 {
        self.hurst.value() - 0.5
    }

    /// `∫_a^b K(t, r) dr` for `0 ≤ a < b ≤ t`, with the origin and diagonal
    /// singularities mapped out when the cell touches them.
    pub fn cell_integral(&self, t: f64, a: f64, b: f64) -> Result<f64> {
        if !(0.0 <= a && a < b && b <= t) {
            return Err(FbmError::domain(
                "cell_integral",
                format!("need 0 <= a < b <= t, got a={a}, b={b}, t={t}"),
            ));
        }
        if self.hurst.is_half() {
            return Ok(b - a);
        }
        let tail = t - b;
        let left = if a == 0.0 {
            Endpoint::power(self.origin_exponent())
        } else {
            Endpoint::REGULAR
        };
        let right = if tail == 0.0 {
            Endpoint::power(self.diagonal_exponent())
        } else {
            Endpoint::REGULAR
        };
        let inner = self.inner();
        let value = integrate_singular(
            |r, to_b| inner.eval_gap(r, tail + to_b).unwrap_or(f64::NAN),
            a,
            b,
            left,
            right,
            &self.cfg,
        )?;
        Ok(value)
    }

    /// Copy with tolerances tight enough for use inside an outer quadrature.
    pub(crate) fn inner(&self) -> Self {
        Self {
            cfg: self.cfg.tightened(1e-12, 1e-14),
            ..*self
        }
    }
}

pub fn kernel_eval(h: HurstParameter, t: f64, s: f64, q: &QuadratureConfig) -> Result<f64> {
    q.validate()?;
    VolterraKernel::new(h, *q).eval(t, s)
}

/// `c_H r^{-|H-1/2|} (t-r)^{-(1/2-H)_+}`.
pub fn kernel_upper_bound(h: HurstParameter, t: f64, r: f64, c_h: f64) -> Result<f64> {
    if !(r > 0.0 && r < t && t.is_finite()) {
        return Err(FbmError::domain(
            "kernel_upper_bound",
            format!("need 0 < r < t, got t={t}, r={r}"),
        ));
    }
    if !(c_h > 0.0 && c_h.is_finite()) {
        return Err(FbmError::domain(
            "kernel_upper_bound",
            "c_H must be positive",
        ));
    }
    let h = h.value();
    Ok(c_h * r.powf(-(h - 0.5).abs()) * (t - r).powf(-(0.5 - h).max(0.0)))
}

/// Largest ratio `K(t,s) / shape(t,s)` over `0 < s < t ≤ horizon`, i.e. an
/// empirical `c_H` for [`kernel_upper_bound`]. Each `t = horizon·a/steps`
/// is scanned on a linear mesh in `s/t` plus geometric meshes towards both
/// ends, where the ratio takes its extreme values.
pub fn estimate_bound_constant(
    h: HurstParameter,
    horizon: f64,
    steps: usize,
    q: &QuadratureConfig,
) -> Result<f64> {
    if !(horizon > 0.0 && horizon.is_finite()) || steps < 2 {
        return Err(FbmError::domain(
            "estimate_bound_constant",
            "need horizon > 0 and at least 2 steps",
        ));
    }
    let kernel = VolterraKernel::new(h, *q);
    let mut fractions: Vec<f64> = (1..steps).map(|b| b as f64 / steps as f64).collect();
    for k in 1..=40 {
        let e = 0.5f64.powi(k);
        fractions.push(e);
        fractions.push(1.0 - e);
    }
    let mut best: f64 = 0.0;
    for a in 1..=steps {
        let t = horizon * a as f64 / steps as f64;
        for &f in &fractions {
            let s = t * f;
            let ratio = kernel.eval_gap(s, t * (1.0 - f))? / kernel_upper_bound(h, t, s, 1.0)?;
            best = best.max(ratio);
        }
    }
    Ok(best)
}

/// `R(t,s) = ½(t^{2H} + s^{2H} - |t-s|^{2H})`.
pub fn covariance(h: HurstParameter, t: f64, s: f64) -> Result<f64> {
    if !(t >= 0.0 && s >= 0.0 && t.is_finite() && s.is_finite()) {
        return Err(FbmError::domain(
            "covariance",
            format!("times must be non-negative, got t={t}, s={s}"),
        ));
    }
    if h.is_half() {
        return Ok(t.min(s));
    }
    let e = 2.0 * h.value();
    Ok(0.5 * (t.powf(e) + s.powf(e) - (t - s).abs().powf(e)))
}

/// `∫_0^{t∧u} K(t,s) K(u,s) ds`, computed by quadrature; equals `R(t,u)`.
pub fn kernel_l2_inner(h: HurstParameter, t: f64, u: f64, q: &QuadratureConfig) -> Result<f64> {
    q.validate()?;
    if !(t > 0.0 && u > 0.0 && t.is_finite() && u.is_finite()) {
        return Err(FbmError::domain(
            "kernel_l2_inner",
            format!("times must be positive, got t={t}, u={u}"),
        ));
    }
    let m = t.min(u);
    if h.is_half() {
        return Ok(m);
    }
    let outer = VolterraKernel::new(h, *q);
    let k = outer.inner();
    let (dt, du) = (t - m, u - m);
    let left = Endpoint::power(2.0 * outer.origin_exponent());
    let right = Endpoint::power((2.0 * outer.diagonal_exponent()).min(0.0));
    let value = integrate_singular(
        |s, to_m| {
            let a = k.eval_gap(s, dt + to_m);
            let b = k.eval_gap(s, du + to_m);
            match (a, b) {
                (Ok(a), Ok(b)) => a * b,
                _ => f64::NAN,
            }
        },
        0.0,
        m,
        left,
        right,
        q,
    )?;
    Ok(value)
}

/// Autocovariance of unit-lag fractional Gaussian noise at gap `lag ≥ 1`.
pub fn fgn_autocov(h: HurstParameter, lag: f64) -> Result<f64> {
    if !(lag >= 1.0 && lag.is_finite()) {
        return Err(FbmError::domain(
            "fgn_autocov",
            format!("lag must be at least 1, got {lag}"),
        ));
    }
    if h.is_half() {
        return Ok(0.0);
    }
    let e = 2.0 * h.value();
    Ok(0.5 * ((lag + 1.0).powf(e) + (lag - 1.0).powf(e) - 2.0 * lag.powf(e)))
}

/// `|2^{2H-1} - 1|`, the bound on `|fgn_autocov|` over integer lags.
pub fn fgn_autocov_bound(h: HurstParameter) -> f64 {
    (2f64.powf(2.0 * h.value() - 1.0) - 1.0).abs()
}

/// Correlation of the standardised increments `(B_t-B_s)/(t-s)^H` and
/// `(B_r-B_u)/(r-u)^H` for `0 ≤ u < r < s < t`.
pub fn increment_covariance(h: HurstParameter, u: f64, r: f64, s: f64, t: f64) -> Result<f64> {
    if !(0.0 <= u && u < r && r < s && s < t && t.is_finite()) {
        return Err(FbmError::domain(
            "increment_covariance",
            format!("need 0 <= u < r < s < t, got ({u}, {r}, {s}, {t})"),
        ));
    }
    if h.is_half() {
        return Ok(0.0);
    }
    let hv = h.value();
    let e = 2.0 * hv;
    let num = (t - u).powf(e) - (t - r).powf(e) - (s - u).powf(e) + (s - r).powf(e);
    Ok(0.5 * num / ((t - s).powf(hv) * (r - u).powf(hv)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp(v: f64) -> HurstParameter {
        HurstParameter::new(v).unwrap()
    }

    #[test]
    fn hurst_validation_and_regimes() {
        for bad in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(HurstParameter::new(bad).is_err());
        }
        assert_eq!(hp(0.3).regime(), Regime::SubHalf);
        assert_eq!(hp(0.5).regime(), Regime::Half);
        assert_eq!(hp(0.5000000001).regime(), Regime::SuperHalf);
    }

    #[test]
    fn grid_points() {
        let g = TimeGrid::new(2.0, 8).unwrap();
        let p = g.points();
        assert_eq!(p.len(), 9);
        assert_eq!(p[0], 0.0);
        assert_eq!(p[8], 2.0);
        assert!(p.windows(2).all(|w| w[1] > w[0]));
        for w in p.windows(2) {
            assert!(((w[1] - w[0]) - g.spacing()).abs() <= 4.0 * f64::EPSILON);
        }
        assert!(TimeGrid::new(1.0, 0).is_err());
        assert!(TimeGrid::new(0.0, 4).is_err());
    }

    #[test]
    fn brownian_kernel_is_one() {
        let q = QuadratureConfig::default();
        assert_eq!(kernel_eval(hp(0.5), 1.0, 0.3, &q).unwrap(), 1.0);
    }

    #[test]
    fn kernel_support_is_enforced() {
        let q = QuadratureConfig::default();
        for h in [0.3, 0.5, 0.7] {
            assert!(kernel_eval(hp(h), 1.0, 1.0, &q).is_err());
            assert!(kernel_eval(hp(h), 1.0, 1.5, &q).is_err());
            assert!(kernel_eval(hp(h), 1.0, 0.0, &q).is_err());
        }
    }

    #[test]
    fn upper_bound_golden_values() {
        assert_eq!(kernel_upper_bound(hp(0.5), 1.0, 0.4, 2.5).unwrap(), 2.5);
        let v = kernel_upper_bound(hp(0.75), 1.0, 0.25, 1.0).unwrap();
        assert!((v - 0.25f64.powf(-0.25)).abs() < 1e-15);
        assert!((v - std::f64::consts::SQRT_2).abs() < 1e-12);
        let v = kernel_upper_bound(hp(0.25), 1.0, 0.5, 1.0).unwrap();
        assert!((v - 2f64.sqrt()).abs() < 1e-14);
        assert!(kernel_upper_bound(hp(0.25), 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn covariance_cases() {
        for h in [0.2, 0.5, 0.8] {
            let v = covariance(hp(h), 1.7, 1.7).unwrap();
            assert!((v - 1.7f64.powf(2.0 * h)).abs() < 1e-14);
        }
        assert!((covariance(hp(0.5), 0.3, 0.9).unwrap() - 0.3).abs() < 1e-15);
        let v = covariance(hp(0.75), 2.0, 1.0).unwrap();
        assert!((v - 2f64.sqrt()).abs() < 1e-14);
        assert_eq!(
            covariance(hp(0.3), 0.4, 2.2).unwrap(),
            covariance(hp(0.3), 2.2, 0.4).unwrap()
        );
        assert!(covariance(hp(0.3), -0.1, 1.0).is_err());
    }

    #[test]
    fn fgn_autocov_cases() {
        assert_eq!(fgn_autocov(hp(0.5), 3.0).unwrap(), 0.0);
        let v = fgn_autocov(hp(0.3), 1.0).unwrap();
        assert!((v - 0.5 * (2f64.powf(0.6) - 2.0)).abs() < 1e-15);
        assert!((v + 0.242_141_716).abs() < 1e-6);
        assert!(fgn_autocov(hp(0.3), 0.5).is_err());
        for h in [0.1, 0.3, 0.45, 0.55, 0.7, 0.95] {
            let bound = fgn_autocov_bound(hp(h));
            for lag in 1..=64 {
                let g = fgn_autocov(hp(h), lag as f64).unwrap();
                assert!(g.abs() <= bound + 1e-15);
                if h < 0.5 {
                    assert!(g <= 0.0);
                } else {
                    assert!(g >= 0.0);
                }
            }
        }
    }

    #[test]
    fn increment_covariance_cases() {
        assert_eq!(
            increment_covariance(hp(0.5), 0.0, 0.5, 1.0, 2.0).unwrap(),
            0.0
        );
        assert!(increment_covariance(hp(0.3), 0.0, 1.0, 1.0, 2.0).is_err());
        let v = increment_covariance(hp(0.25), 0.0, 1.0, 2.0, 3.0).unwrap();
        assert!(v < 0.0 && v >= -1.0);
        let v = increment_covariance(hp(0.75), 0.0, 1.0, 2.0, 3.0).unwrap();
        assert!(v > 0.0 && v <= 1.0);
    }

    #[test]
    fn quadrature_failure_is_distinct() {
        let q = QuadratureConfig {
            rel_tol: 1e-15,
            abs_tol: 1e-300,
            max_subdivisions: 4,
            singularity_split: 0.1,
        };
        let err = kernel_l2_inner(hp(0.2), 1.0, 0.999, &q).unwrap_err();
        assert!(matches!(err, FbmError::Quadrature { .. }), "{err:?}");
    }
}
