//! Split conformal, jackknife+ and full conformal prediction sets.
//!
//! All three use the conformal quantile at level `(1 − α)(1 + 1/n)`, where
//! `n` is the number of scores. Jackknife+ and full conformal accept an
//! inflation `γ ≥ 0` added to the threshold; `γ = 0` gives the usual methods.

use rayon::prelude::*;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::quantile::{conformal_level, conformal_quantile, ExtendedReal, Interval};
use crate::regressors::{Predictor, RegressionAlgorithm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Split,
    JackknifePlus,
    FullConformal,
}

/// Sorted, pairwise disjoint union of closed intervals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionSet {
    pub intervals: Vec<Interval>,
    pub method: Method,
    pub alpha: f64,
    pub gamma: f64,
}

impl PredictionSet {
    pub fn single(interval: Interval, method: Method, alpha: f64, gamma: f64) -> Self {
        Self { intervals: vec![interval], method, alpha, gamma }
    }

    pub fn empty(method: Method, alpha: f64, gamma: f64) -> Self {
        Self { intervals: Vec::new(), method, alpha, gamma }
    }

    pub fn contains(&self, y: f64) -> bool {
        self.intervals.iter().any(|i| i.contains(y))
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Total Lebesgue measure.
    pub fn length(&self) -> f64 {
        self.intervals.iter().map(Interval::length).sum()
    }

    pub fn is_real_line(&self) -> bool {
        self.intervals.len() == 1 && self.intervals[0] == Interval::real_line()
    }

    /// Smallest interval containing the set.
    pub fn hull(&self) -> Option<Interval> {
        Some(Interval { lo: self.intervals.first()?.lo, hi: self.intervals.last()?.hi })
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma >= 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("inflation must be a finite value >= 0, got {gamma}")))
    }
}

/// A model fit on the proper training set plus its calibrated margin.
#[derive(Debug, Clone)]
pub struct SplitConformal {
    pub predictor: Predictor,
    pub margin: ExtendedReal,
    pub alpha: f64,
}

impl SplitConformal {
    pub fn calibrate(train: &Dataset, calib: &Dataset, alg: &dyn RegressionAlgorithm, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if calib.is_empty() {
            return Err(Error::EmptyCalibration);
        }
        if train.is_empty() {
            return Err(Error::EmptySample);
        }
        let predictor = alg.fit(train)?;
        let scores: Vec<f64> = calib.iter().map(|(x, y)| (y - predictor.predict(x)).abs()).collect();
        let margin = conformal_quantile(&scores, conformal_level(alpha, calib.len()))?;
        Ok(Self { predictor, margin, alpha })
    }

    pub fn predict(&self, x: &[f64]) -> PredictionSet {
        let interval = Interval::centered(self.predictor.predict(x), self.margin);
        PredictionSet::single(interval, Method::Split, self.alpha, 0.0)
    }
}

/// `μ̂(x) ± q` with `μ̂` fit on `train` and `q` the conformal quantile of the
/// calibration residuals.
pub fn split_conformal(
    train: &Dataset,
    calib: &Dataset,
    alg: &dyn RegressionAlgorithm,
    alpha: f64,
    x: &[f64],
) -> Result<PredictionSet> {
    Ok(SplitConformal::calibrate(train, calib, alg, alpha)?.predict(x))
}

/// Leave-one-out models `μ̂_{−i}` and residuals `R_i = |Y_i − μ̂_{−i}(X_i)|`,
/// indexed like the input dataset.
#[derive(Debug, Clone)]
pub struct LooFit {
    pub predictors: Vec<Predictor>,
    pub residuals: Vec<f64>,
}

pub fn loo_fit(train: &Dataset, alg: &dyn RegressionAlgorithm) -> Result<LooFit> {
    let n = train.len();
    if n < 2 {
        return Err(Error::TooFewPoints);
    }
    let fits = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = alg.fit(&train.without(i))?;
            let r = (train.y(i) - p.predict(train.x(i))).abs();
            Ok((p, r))
        })
        .collect::<Result<Vec<_>>>()?;
    let (predictors, residuals) = fits.into_iter().unzip();
    Ok(LooFit { predictors, residuals })
}

impl LooFit {
    pub fn len(&self) -> usize {
        self.residuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residuals.is_empty()
    }

    /// The γ-inflated jackknife+ interval at `x`. Empty when the lower order
    /// statistic exceeds the upper one (possible only for `α > 1/2`).
    pub fn jackknife_plus(&self, alpha: f64, gamma: f64, x: &[f64]) -> Result<PredictionSet> {
        check_alpha(alpha)?;
        check_gamma(gamma)?;
        let level = conformal_level(alpha, self.len());
        let preds: Vec<f64> = self.predictors.iter().map(|p| p.predict(x)).collect();
        let upper: Vec<f64> = preds.iter().zip(&self.residuals).map(|(m, r)| m + r).collect();
        let lower: Vec<f64> = preds.iter().zip(&self.residuals).map(|(m, r)| -m + r).collect();
        let hi = conformal_quantile(&upper, level)?;
        let lo = conformal_quantile(&lower, level)?.neg();
        if !hi.is_finite() || !lo.is_finite() {
            return Ok(PredictionSet::single(Interval::real_line(), Method::JackknifePlus, alpha, gamma));
        }
        Ok(match Interval::new(lo.shift(-gamma), hi.shift(gamma)) {
            Some(i) => PredictionSet::single(i, Method::JackknifePlus, alpha, gamma),
            None => PredictionSet::empty(Method::JackknifePlus, alpha, gamma),
        })
    }
}

pub fn jackknife_plus(
    train: &Dataset,
    alg: &dyn RegressionAlgorithm,
    alpha: f64,
    gamma: f64,
    x: &[f64],
) -> Result<PredictionSet> {
    check_alpha(alpha)?;
    check_gamma(gamma)?;
    loo_fit(train, alg)?.jackknife_plus(alpha, gamma, x)
}

/// Uniform grid of candidate responses for full conformal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl GridSpec {
    pub const DEFAULT_COUNT: usize = 2001;

    pub fn new(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(invalid(format!("grid needs finite lo < hi, got [{lo}, {hi}]")));
        }
        if count < 2 {
            return Err(invalid("grid needs at least 2 points"));
        }
        Ok(Self { lo, hi, count })
    }

    /// `[min Y − 3·range − 1, max Y + 3·range + 1]`.
    pub fn covering(train: &Dataset, count: usize) -> Result<Self> {
        let (Some(min), Some(max)) = (train.min_y(), train.max_y()) else {
            return Err(Error::EmptySample);
        };
        let range = max - min;
        Self::new(min - 3.0 * range - 1.0, max + 3.0 * range + 1.0, count)
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.count - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.count {
            self.hi
        } else {
            self.lo + i as f64 * self.step()
        }
    }
}

/// Whether `y` belongs to the γ-inflated full conformal set at `x`.
pub fn full_conformal_contains(
    train: &Dataset,
    alg: &dyn RegressionAlgorithm,
    alpha: f64,
    gamma: f64,
    x: &[f64],
    y: f64,
) -> Result<bool> {
    let augmented = train.with_point(x, y)?;
    let model = alg.fit(&augmented)?;
    let scores: Vec<f64> = train.iter().map(|(xi, yi)| (yi - model.predict(xi)).abs()).collect();
    let threshold = conformal_quantile(&scores, conformal_level(alpha, train.len()))?.shift(gamma);
    Ok(threshold >= (y - model.predict(x)).abs())
}

/// Full conformal over a response grid. Each maximal run of accepted grid
/// points becomes one interval, widened by half a grid step on both sides.
pub fn full_conformal(
    train: &Dataset,
    alg: &dyn RegressionAlgorithm,
    alpha: f64,
    gamma: f64,
    x: &[f64],
    grid: &GridSpec,
) -> Result<PredictionSet> {
    check_alpha(alpha)?;
    check_gamma(gamma)?;
    if train.is_empty() {
        return Err(Error::EmptySample);
    }
    if x.len() != train.dim() {
        return Err(Error::DimensionMismatch { expected: train.dim(), got: x.len() });
    }
    let accepted = (0..grid.count)
        .into_par_iter()
        .map(|i| full_conformal_contains(train, alg, alpha, gamma, x, grid.point(i)))
        .collect::<Result<Vec<bool>>>()?;
    Ok(PredictionSet {
        intervals: runs_to_intervals(&accepted, grid),
        method: Method::FullConformal,
        alpha,
        gamma,
    })
}

pub(crate) fn runs_to_intervals(accepted: &[bool], grid: &GridSpec) -> Vec<Interval> {
    let half = 0.5 * grid.step();
    let mut out = Vec::new();
    let mut start = None;
    for (i, &ok) in accepted.iter().chain(std::iter::once(&false)).enumerate() {
        match (ok, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                let lo = grid.point(s) - half;
                let hi = grid.point(i - 1) + half;
                out.extend(Interval::finite(lo, hi));
                start = None;
            }
            _ => {}
        }
    }
    out
}
