//! Closed-form bounds, constants and envelopes, as pure functions.

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{FbmError, Result};
use crate::kernel::HurstParameter;

/// Largest exponent accepted before reporting overflow.
pub const EXP_LIMIT: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityParams {
    pub p: f64,
    pub r: u32,
    /// Cut-off derivative constant; values below 1 are accepted with a warning.
    #[serde(default = "one")]
    pub m_r: f64,
    /// Cut-off margin.
    #[serde(default = "one")]
    pub c: f64,
}

fn one() -> f64 {
    1.0
}

impl CapacityParams {
    pub fn new(p: f64, r: u32, m_r: f64, c: f64) -> Result<Self> {
        let params = Self { p, r, m_r, c };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(FbmError::domain(
                "capacity_params",
                format!("need p > 1, got {}", self.p),
            ));
        }
        if !(self.m_r > 0.0 && self.m_r.is_finite()) {
            return Err(FbmError::domain("capacity_params", "M_r must be positive"));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(FbmError::domain("capacity_params", "c must be positive"));
        }
        if self.m_r < 1.0 {
            log::warn!("M_r = {} is below 1", self.m_r);
        }
        Ok(())
    }

    /// Non-fatal remarks about the parameters.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.m_r < 1.0 {
            w.push(format!("M_r = {} is below 1", self.m_r));
        }
        w
    }
}

impl Default for CapacityParams {
    fn default() -> Self {
        Self {
            p: 2.0,
            r: 1,
            m_r: 1.0,
            c: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ChMode {
    /// `max{2^{2H-1} - 1, 1}` as written, which is 1 for every `H`.
    #[default]
    Literal,
    /// `|2^{2H-1} - 1|`, the bound on the unit-lag increment correlations.
    Derived,
}

impl ChMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ChMode::Literal => "literal",
            ChMode::Derived => "derived",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupVariant {
    OneSided,
    TwoSided,
    Terminal,
}

fn check_interval(op: &'static str, s: f64, t: f64) -> Result<f64> {
    if !(s >= 0.0 && s < t && t.is_finite()) {
        return Err(FbmError::domain(
            op,
            format!("need 0 <= s < t, got s={s}, t={t}"),
        ));
    }
    Ok(t - s)
}

fn check_positive(op: &'static str, name: &str, x: f64) -> Result<()> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(FbmError::domain(
            op,
            format!("{name} must be positive, got {x}"),
        ));
    }
    Ok(())
}

fn checked_exp(op: &'static str, exponent: f64) -> Result<f64> {
    if exponent > EXP_LIMIT {
        return Err(FbmError::Overflow { op, exponent });
    }
    Ok(exponent.max(-EXP_LIMIT).exp())
}

/// `(2 Σ_{l≤r} (η / (p (t-s)^H))^{lp})^{1/p} · exp(-η² / (2p (t-s)^{2H}))`.
pub fn increment_capacity_bound(
    h: HurstParameter,
    params: &CapacityParams,
    s: f64,
    t: f64,
    eta: f64,
) -> Result<f64> {
    const OP: &str = "increment_capacity_bound";
    params.validate()?;
    let len = check_interval(OP, s, t)?;
    check_positive(OP, "eta", eta)?;
    let p = params.p;
    let scale = len.powf(h.value());
    let x = eta / (p * scale);
    // The sum and the Gaussian factor are combined in log space so large η
    // underflows to a tiny positive number instead of `inf · 0`.
    let log_terms: Vec<f64> = (0..=params.r).map(|l| l as f64 * p * x.ln()).collect();
    let top = log_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = top + log_terms.iter().map(|v| (v - top).exp()).sum::<f64>().ln();
    let log_value = (2f64.ln() + log_sum) / p - eta * eta / (2.0 * p * scale * scale);
    checked_exp(OP, log_value)
}

/// 1 for `H ≤ 1/2`, 3/2 above.
pub fn gamma_factor(h: HurstParameter) -> f64 {
    if h.value() <= 0.5 {
        1.0
    } else {
        1.5
    }
}

fn sup_denominator(h: HurstParameter, len: f64) -> f64 {
    gamma_factor(h) * len.powf(2.0 * h.value()) + len
}

pub fn sup_capacity_bound(
    h: HurstParameter,
    s: f64,
    t: f64,
    eta: f64,
    variant: SupVariant,
) -> Result<f64> {
    const OP: &str = "sup_capacity_bound";
    let len = check_interval(OP, s, t)?;
    check_positive(OP, "eta", eta)?;
    let d = sup_denominator(h, len);
    let c = (eta * eta * len.powf(2.0 * h.value()) / (2.0 * d * d) + 2.0).sqrt();
    let one_sided = c * checked_exp(OP, -eta * eta / (4.0 * d))?;
    Ok(match variant {
        SupVariant::OneSided => one_sided,
        SupVariant::TwoSided | SupVariant::Terminal => SQRT_2 * one_sided,
    })
}

/// `C_H` under the chosen mode.
pub fn ch_constant(h: HurstParameter, mode: ChMode) -> f64 {
    let base = 2f64.powf(2.0 * h.value() - 1.0) - 1.0;
    match mode {
        ChMode::Literal => base.max(1.0),
        ChMode::Derived => base.abs(),
    }
}

/// `(Σ_{l≤r} N^{lp} C_H^{lp/2} (M_r/c)^{lp})^{1/p}`.
pub fn cap_prob_factor(
    n: u64,
    params: &CapacityParams,
    h: HurstParameter,
    mode: ChMode,
) -> Result<f64> {
    const OP: &str = "cap_prob_factor";
    params.validate()?;
    if n == 0 {
        return Err(FbmError::domain(OP, "N must be at least 1"));
    }
    let p = params.p;
    let ch = ch_constant(h, mode);
    let base = n as f64 * ch.sqrt() * params.m_r / params.c;
    let sum: f64 = (0..=params.r).map(|l| base.powf(l as f64 * p)).sum();
    let v = sum.powf(1.0 / p);
    if !v.is_finite() {
        return Err(FbmError::Overflow {
            op: OP,
            exponent: params.r as f64 * p * base.ln(),
        });
    }
    Ok(v)
}

/// `2 exp((α²/2)[γ_H (t-s)^{2H} + (t-s)])`.
pub fn mgf_sup_bound(h: HurstParameter, alpha: f64, s: f64, t: f64) -> Result<f64> {
    const OP: &str = "mgf_sup_bound";
    let len = check_interval(OP, s, t)?;
    check_positive(OP, "alpha", alpha)?;
    Ok(2.0 * checked_exp(OP, 0.5 * alpha * alpha * sup_denominator(h, len))?)
}

/// `sqrt(2 δ^{2H} log(1/δ))` for `δ ∈ (0, 1)`.
pub fn modulus_envelope(h: HurstParameter, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(FbmError::domain(
            "modulus_envelope",
            format!("need 0 < δ < 1, got {delta}"),
        ));
    }
    Ok((2.0 * delta.powf(2.0 * h.value()) * (1.0 / delta).ln()).sqrt())
}

/// `sqrt(2 t^{2H} log log(1/t))` for `t ∈ (0, 1/e)`.
pub fn lil_envelope(h: HurstParameter, t: f64) -> Result<f64> {
    if !(t > 0.0 && t < (-1f64).exp()) {
        return Err(FbmError::domain(
            "lil_envelope",
            format!("need 0 < t < 1/e, got {t}"),
        ));
    }
    Ok((2.0 * t.powf(2.0 * h.value()) * (1.0 / t).ln().ln()).sqrt())
}

fn check_tail(op: &'static str, a: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(FbmError::domain(op, format!("need a > 0, got {a}")));
    }
    Ok(())
}

/// `φ(a) · a / (1 + a²)`, a lower bound on `P(Z > a)`.
pub fn gaussian_tail_lower(a: f64) -> Result<f64> {
    check_tail("gaussian_tail_lower", a)?;
    Ok((-0.5 * a * a).exp() / (2.0 * PI).sqrt() * a / (1.0 + a * a))
}

/// `φ(a) / a`, an upper bound on `P(Z > a)`.
pub fn gaussian_tail_upper(a: f64) -> Result<f64> {
    check_tail("gaussian_tail_upper", a)?;
    Ok((-0.5 * a * a).exp() / (2.0 * PI).sqrt() / a)
}

/// Smallest dimension `d` meeting the sufficient condition for absence of
/// double points: `d > 2/H + 2` when `H ≤ 1/2`, `d > 6` otherwise.
pub fn double_point_dimension_threshold(h: HurstParameter) -> u32 {
    let h = h.value();
    if h > 0.5 {
        return 7;
    }
    let x = 2.0 / h + 2.0;
    // 2/0.4 is 5.000000000000001 in binary; snap near-integers so the strict
    // inequality is decided on the intended value.
    let near = x.round();
    let x = if (x - near).abs() < 1e-9 { near } else { x };
    x.floor() as u32 + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulaId {
    Increment,
    Sup1,
    Sup2,
    Sup3,
    CapProbFactor,
    MgfSup,
    ModulusEnv,
    LilEnv,
    TailLower,
    TailUpper,
}

/// One bound evaluation, echoing its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub formula_id: FormulaId,
    pub inputs: BTreeMap<String, f64>,
    pub bound_value: f64,
    pub mode_flags: BTreeMap<String, String>,
}

/// A bound evaluation request, as read from experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "formula", rename_all = "snake_case")]
pub enum BoundQuery {
    Increment {
        h: HurstParameter,
        #[serde(default)]
        params: CapacityParams,
        s: f64,
        t: f64,
        eta: f64,
    },
    Sup {
        h: HurstParameter,
        s: f64,
        t: f64,
        eta: f64,
        variant: SupVariant,
    },
    CapProbFactor {
        h: HurstParameter,
        n: u64,
        #[serde(default)]
        params: CapacityParams,
    },
    MgfSup {
        h: HurstParameter,
        alpha: f64,
        s: f64,
        t: f64,
    },
    ModulusEnv {
        h: HurstParameter,
        delta: f64,
    },
    LilEnv {
        h: HurstParameter,
        t: f64,
    },
    TailLower {
        a: f64,
    },
    TailUpper {
        a: f64,
    },
}

fn inputs(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn params_inputs(
    h: HurstParameter,
    p: &CapacityParams,
    rest: &[(&str, f64)],
) -> BTreeMap<String, f64> {
    let mut m = inputs(&[
        ("H", h.value()),
        ("p", p.p),
        ("r", p.r as f64),
        ("M_r", p.m_r),
        ("c", p.c),
    ]);
    m.extend(inputs(rest));
    m
}

impl BoundQuery {
    pub fn evaluate(&self, ch_mode: ChMode) -> Result<BoundReport> {
        let mut flags = BTreeMap::new();
        let (formula_id, inputs, value) = match *self {
            BoundQuery::Increment {
                h,
                params,
                s,
                t,
                eta,
            } => {
                for w in params.warnings() {
                    flags.insert("warning".into(), w);
                }
                (
                    FormulaId::Increment,
                    params_inputs(h, &params, &[("s", s), ("t", t), ("eta", eta)]),
                    increment_capacity_bound(h, &params, s, t, eta)?,
                )
            }
            BoundQuery::Sup {
                h,
                s,
                t,
                eta,
                variant,
            } => {
                let id = match variant {
                    SupVariant::OneSided => FormulaId::Sup1,
                    SupVariant::TwoSided => FormulaId::Sup2,
                    SupVariant::Terminal => FormulaId::Sup3,
                };
                (
                    id,
                    inputs(&[("H", h.value()), ("s", s), ("t", t), ("eta", eta)]),
                    sup_capacity_bound(h, s, t, eta, variant)?,
                )
            }
            BoundQuery::CapProbFactor { h, n, params } => {
                flags.insert("ch_mode".into(), ch_mode.as_str().into());
                for w in params.warnings() {
                    flags.insert("warning".into(), w);
                }
                (
                    FormulaId::CapProbFactor,
                    params_inputs(h, &params, &[("N", n as f64)]),
                    cap_prob_factor(n, &params, h, ch_mode)?,
                )
            }
            BoundQuery::MgfSup { h, alpha, s, t } => (
                FormulaId::MgfSup,
                inputs(&[("H", h.value()), ("alpha", alpha), ("s", s), ("t", t)]),
                mgf_sup_bound(h, alpha, s, t)?,
            ),
            BoundQuery::ModulusEnv { h, delta } => (
                FormulaId::ModulusEnv,
                inputs(&[("H", h.value()), ("delta", delta)]),
                modulus_envelope(h, delta)?,
            ),
            BoundQuery::LilEnv { h, t } => (
                FormulaId::LilEnv,
                inputs(&[("H", h.value()), ("t", t)]),
                lil_envelope(h, t)?,
            ),
            BoundQuery::TailLower { a } => (
                FormulaId::TailLower,
                inputs(&[("a", a)]),
                gaussian_tail_lower(a)?,
            ),
            BoundQuery::TailUpper { a } => (
                FormulaId::TailUpper,
                inputs(&[("a", a)]),
                gaussian_tail_upper(a)?,
            ),
        };
        Ok(BoundReport {
            formula_id,
            inputs,
            bound_value: value,
            mode_flags: flags,
        })
    }
}
