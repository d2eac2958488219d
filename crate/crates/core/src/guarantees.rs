//! Finite-sample training-conditional coverage bounds.
//!
//! Each evaluator returns a [`BoundReport`]: a threshold `T` and a failure
//! probability `p` such that `P{α_P(D_n) < T} ≥ 1 − p`. Reports are never
//! clamped; `vacuous` is set when `T ≥ 1` or `p ≥ 1`.
//!
//! The stability inputs are taken as given. Callers are responsible for the
//! index shifts: jackknife+ bounds want `β^out_{m,n−1}` (or `ε, ν` at
//! `(m, n−1)`), full conformal bounds want `β^in_{m−1,n+1}`. Swap-stability
//! values may be supplied in place of the add/remove ones.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quantile::quantile_rank;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Theorem {
    Split,
    JplusInflated,
    JplusUninflated,
    FullConformal,
    AltJplus,
    AltJplusUninflated,
    AltFullConformal,
}

impl std::str::FromStr for Theorem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "split" => Theorem::Split,
            "jplus" | "jplus-inflated" => Theorem::JplusInflated,
            "jplus-uninflated" => Theorem::JplusUninflated,
            "full-conformal" | "full_cp" => Theorem::FullConformal,
            "alt-jplus" => Theorem::AltJplus,
            "alt-jplus-uninflated" => Theorem::AltJplusUninflated,
            "alt-full-conformal" => Theorem::AltFullConformal,
            other => return Err(invalid(format!("unknown theorem `{other}`"))),
        })
    }
}

/// Which alternative (`ε, ν`) bound to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alternative {
    Jplus,
    JplusUninflated,
    FullConformal,
}

/// Every symbol appearing in the bounds; each evaluator reads only the
/// fields it needs and rejects missing ones.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundInputs {
    pub alpha: f64,
    pub delta: f64,
    pub n: usize,
    pub m: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_dens: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
}

impl BoundInputs {
    pub fn new(alpha: f64, delta: f64, n: usize, m: usize) -> Self {
        Self { alpha, delta, n, m, ..Default::default() }
    }

    pub fn beta(mut self, beta: f64) -> Self {
        self.beta = Some(beta);
        self
    }

    pub fn gamma(mut self, gamma: f64) -> Self {
        self.gamma = Some(gamma);
        self
    }

    pub fn b_dens(mut self, b_dens: f64) -> Self {
        self.b_dens = Some(b_dens);
        self
    }

    pub fn tail(mut self, epsilon: f64, nu: f64) -> Self {
        self.epsilon = Some(epsilon);
        self.nu = Some(nu);
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(invalid(format!("delta must lie in (0, 1], got {}", self.delta)));
        }
        if self.n == 0 || self.m == 0 {
            return Err(invalid("n and m must be >= 1"));
        }
        Ok(())
    }
}

fn require(v: Option<f64>, name: &'static str) -> Result<f64> {
    v.ok_or(Error::MissingField(name))
}

fn require_nonneg(v: Option<f64>, name: &'static str) -> Result<f64> {
    let v = require(v, name)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(invalid(format!("{name} must be >= 0, got {v}")))
    }
}

fn require_pos(v: Option<f64>, name: &'static str) -> Result<f64> {
    let v = require(v, name)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(format!("{name} must be > 0, got {v}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    pub theorem: Theorem,
    pub threshold: f64,
    pub failure_prob: f64,
    pub vacuous: bool,
    /// Inflation the guarantee applies to (`2ε` for the inflated
    /// alternative bounds, `γ` for the inflated expectation bounds).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inflation: Option<f64>,
    pub inputs: BoundInputs,
}

impl BoundReport {
    fn new(theorem: Theorem, threshold: f64, failure_prob: f64, inflation: Option<f64>, inputs: BoundInputs) -> Self {
        Self { theorem, threshold, failure_prob, vacuous: threshold >= 1.0 || failure_prob >= 1.0, inflation, inputs }
    }
}

/// `3·√(log(1/δ) / (2·min{n, m}))`.
pub fn concentration_term(delta: f64, n: usize, m: usize) -> f64 {
    3.0 * ((1.0 / delta).ln() / (2.0 * n.min(m) as f64)).sqrt()
}

/// Jackknife+ with inflation `γ > 0`, `β = β^out_{m,n−1}`:
/// `T = α + 3√(log(1/δ)/(2 min{n,m})) + 2·(2β/γ)^{1/3}`, `p = 3δ + (2β/γ)^{1/3}`.
pub fn bound_jplus_inflated(inputs: &BoundInputs) -> Result<BoundReport> {
    inflated_shape(Theorem::JplusInflated, inputs)
}

/// Full conformal with inflation `γ > 0`, `β = β^in_{m−1,n+1}`; same shape
/// as [`bound_jplus_inflated`].
pub fn bound_full_conformal(inputs: &BoundInputs) -> Result<BoundReport> {
    inflated_shape(Theorem::FullConformal, inputs)
}

fn inflated_shape(theorem: Theorem, inputs: &BoundInputs) -> Result<BoundReport> {
    inputs.validate()?;
    let beta = require_nonneg(inputs.beta, "beta")?;
    let gamma = require_pos(inputs.gamma, "gamma")?;
    let s = (2.0 * beta / gamma).cbrt();
    let threshold = inputs.alpha + concentration_term(inputs.delta, inputs.n, inputs.m) + 2.0 * s;
    Ok(BoundReport::new(theorem, threshold, 3.0 * inputs.delta + s, Some(gamma), *inputs))
}

/// Uninflated jackknife+ under a bounded conditional density:
/// `T = α + 3√(…) + 4·(2·B_dens·β)^{1/4}`, `p = 3δ + (2·B_dens·β)^{1/4}`.
pub fn bound_jplus_uninflated(inputs: &BoundInputs) -> Result<BoundReport> {
    inputs.validate()?;
    let beta = require_nonneg(inputs.beta, "beta")?;
    let b_dens = require_pos(inputs.b_dens, "b_dens")?;
    let s = (2.0 * b_dens * beta).powf(0.25);
    let threshold = inputs.alpha + concentration_term(inputs.delta, inputs.n, inputs.m) + 4.0 * s;
    Ok(BoundReport::new(Theorem::JplusUninflated, threshold, 3.0 * inputs.delta + s, None, *inputs))
}

/// Bounds under `(ε, ν)` tail stability. The inflated variants apply to
/// inflation `2ε`; the uninflated jackknife+ variant adds `4·B_dens·ε`.
pub fn bound_alternative(inputs: &BoundInputs, which: Alternative) -> Result<BoundReport> {
    inputs.validate()?;
    let epsilon = require_nonneg(inputs.epsilon, "epsilon")?;
    let nu = require_nonneg(inputs.nu, "nu")?;
    let s = (2.0 * nu).cbrt();
    let base = inputs.alpha + concentration_term(inputs.delta, inputs.n, inputs.m) + 2.0 * s;
    let failure = 3.0 * inputs.delta + s;
    Ok(match which {
        Alternative::Jplus => BoundReport::new(Theorem::AltJplus, base, failure, Some(2.0 * epsilon), *inputs),
        Alternative::FullConformal => {
            BoundReport::new(Theorem::AltFullConformal, base, failure, Some(2.0 * epsilon), *inputs)
        }
        Alternative::JplusUninflated => {
            let b_dens = require_pos(inputs.b_dens, "b_dens")?;
            BoundReport::new(Theorem::AltJplusUninflated, base + 4.0 * b_dens * epsilon, failure, None, *inputs)
        }
    })
}

/// Split conformal: `T = α + √(log(1/δ)/(2n₁))`, `p = δ`.
pub fn bound_split_conformal(alpha: f64, delta: f64, n1: usize) -> Result<BoundReport> {
    let inputs = BoundInputs::new(alpha, delta, n1, n1);
    inputs.validate()?;
    let threshold = alpha + ((1.0 / delta).ln() / (2.0 * n1 as f64)).sqrt();
    Ok(BoundReport::new(Theorem::Split, threshold, delta, None, inputs))
}

/// Dispatch on [`Theorem`]; `n1` for the split bound is `inputs.n`.
pub fn evaluate(theorem: Theorem, inputs: &BoundInputs) -> Result<BoundReport> {
    match theorem {
        Theorem::Split => bound_split_conformal(inputs.alpha, inputs.delta, inputs.n),
        Theorem::JplusInflated => bound_jplus_inflated(inputs),
        Theorem::JplusUninflated => bound_jplus_uninflated(inputs),
        Theorem::FullConformal => bound_full_conformal(inputs),
        Theorem::AltJplus => bound_alternative(inputs, Alternative::Jplus),
        Theorem::AltJplusUninflated => bound_alternative(inputs, Alternative::JplusUninflated),
        Theorem::AltFullConformal => bound_alternative(inputs, Alternative::FullConformal),
    }
}

/// Among candidate inputs (e.g. a grid over `m`, `γ`, `δ`), the non-vacuous
/// report with the smallest threshold.
pub fn tightest(theorem: Theorem, candidates: &[BoundInputs]) -> Result<Option<BoundReport>> {
    let mut best: Option<BoundReport> = None;
    for c in candidates {
        let r = evaluate(theorem, c)?;
        if !r.vacuous && best.is_none_or(|b| r.threshold < b.threshold) {
            best = Some(r);
        }
    }
    Ok(best)
}

/// Finite-`n` instantiation of the asymptotic schedule, given a 1-stability
/// level `b` and either an inflation `γ` or a density bound `B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticPoint {
    pub n: usize,
    pub m_n: usize,
    /// Excess miscoverage `ε_n`.
    pub epsilon_n: f64,
    /// Failure probability `δ_n`.
    pub delta_n: f64,
}

/// Inflated schedule: `m_n = ⌈(b/γ)^{−1/2}⌉`,
/// `ε_n = 3/(4 min{n,m_n})^{1/4} + 2(2 m_n b/γ)^{1/3}`,
/// `δ_n = 3 exp(−√min{n,m_n}) + (2 m_n b/γ)^{1/3}`.
pub fn asymptotic_schedule_inflated(n: usize, b: f64, gamma: f64) -> Result<AsymptoticPoint> {
    if !(b > 0.0 && gamma > 0.0) || n == 0 {
        return Err(invalid("asymptotic schedule needs n >= 1, b > 0, gamma > 0"));
    }
    let ratio = b / gamma;
    let m_n = quantile_rank(1, ratio.powf(-0.5));
    let k = n.min(m_n) as f64;
    let s = (2.0 * m_n as f64 * ratio).cbrt();
    Ok(AsymptoticPoint {
        n,
        m_n,
        epsilon_n: 3.0 / (4.0 * k).powf(0.25) + 2.0 * s,
        delta_n: 3.0 * (-k.sqrt()).exp() + s,
    })
}

/// Density-bounded schedule: `m_n = ⌈(b·B)^{−1/2}⌉`,
/// `ε_n = 3/(4 min{n,m_n})^{1/4} + 4(2 B m_n b)^{1/4}`,
/// `δ_n = 3 exp(−√min{n,m_n}) + (2 B m_n b)^{1/4}`.
pub fn asymptotic_schedule_uninflated(n: usize, b: f64, b_dens: f64) -> Result<AsymptoticPoint> {
    if !(b > 0.0 && b_dens > 0.0) || n == 0 {
        return Err(invalid("asymptotic schedule needs n >= 1, b > 0, B > 0"));
    }
    let prod = b * b_dens;
    let m_n = quantile_rank(1, prod.powf(-0.5));
    let k = n.min(m_n) as f64;
    let s = (2.0 * m_n as f64 * prod).powf(0.25);
    Ok(AsymptoticPoint {
        n,
        m_n,
        epsilon_n: 3.0 / (4.0 * k).powf(0.25) + 4.0 * s,
        delta_n: 3.0 * (-k.sqrt()).exp() + s,
    })
}
