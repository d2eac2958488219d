//! Training-conditional miscoverage: for each trial, draw `D_n`, build the
//! prediction rule once, and estimate `α_P(D_n)` as the non-coverage rate on
//! `n_test` fresh points.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conformal::{full_conformal, loo_fit, GridSpec, LooFit, SplitConformal};
use crate::data::{mix64, Dataset};
use crate::error::{invalid, Error, Result};
use crate::experiments::distributions::Sampler;
use crate::guarantees::{self, BoundInputs, BoundReport};
use crate::regressors::RegressionAlgorithm;
use crate::rng::{derive_stream, RngStream};
use crate::stability::{estimate_stability, mean_and_stderr, StabilityEstimate, StabilityVariant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageMethod {
    Split,
    Jplus,
    FullCp,
}

impl std::str::FromStr for CoverageMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "split" => Ok(CoverageMethod::Split),
            "jplus" => Ok(CoverageMethod::Jplus),
            "full_cp" | "full-cp" | "full" => Ok(CoverageMethod::FullCp),
            other => Err(invalid(format!("unknown method `{other}` (split, jplus, full_cp)"))),
        }
    }
}

impl std::fmt::Display for CoverageMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CoverageMethod::Split => "split",
            CoverageMethod::Jplus => "jplus",
            CoverageMethod::FullCp => "full_cp",
        })
    }
}

/// Everything needed to reproduce one miscoverage experiment.
#[derive(Clone, Copy)]
pub struct CoverageSetup<'a> {
    pub method: CoverageMethod,
    pub alg: &'a dyn RegressionAlgorithm,
    pub dist: &'a dyn Sampler,
    pub alpha: f64,
    pub gamma: f64,
    pub n: usize,
    pub n_test: usize,
    /// Grid size for full conformal.
    pub grid_count: usize,
}

impl CoverageSetup<'_> {
    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.gamma >= 0.0) {
            return Err(invalid("gamma must be >= 0"));
        }
        if self.n_test == 0 {
            return Err(invalid("n_test must be >= 1"));
        }
        let min_n = match self.method {
            CoverageMethod::Split | CoverageMethod::Jplus => 2,
            CoverageMethod::FullCp => 1,
        };
        if self.n < min_n {
            return Err(invalid(format!("{} needs n >= {min_n}", self.method)));
        }
        if self.method == CoverageMethod::FullCp && self.grid_count < 2 {
            return Err(invalid("grid_count must be >= 2"));
        }
        Ok(())
    }
}

/// A prediction rule built once from `D_n`.
pub enum PredictionRule<'a> {
    Split(SplitConformal),
    Jplus { fit: LooFit, alpha: f64, gamma: f64 },
    FullCp { train: Dataset, alg: &'a dyn RegressionAlgorithm, alpha: f64, gamma: f64, grid: GridSpec },
}

impl<'a> PredictionRule<'a> {
    /// Split conformal uses the first `⌊n/2⌋` points for fitting and the rest
    /// for calibration.
    pub fn build(setup: &CoverageSetup<'a>, train: &Dataset) -> Result<Self> {
        Ok(match setup.method {
            CoverageMethod::Split => {
                let n0 = train.len() / 2;
                let proper = train.prefix(n0);
                let calib = train.slice(n0, train.len());
                PredictionRule::Split(SplitConformal::calibrate(&proper, &calib, setup.alg, setup.alpha)?)
            }
            CoverageMethod::Jplus => {
                PredictionRule::Jplus { fit: loo_fit(train, setup.alg)?, alpha: setup.alpha, gamma: setup.gamma }
            }
            CoverageMethod::FullCp => PredictionRule::FullCp {
                train: train.clone(),
                alg: setup.alg,
                alpha: setup.alpha,
                gamma: setup.gamma,
                grid: GridSpec::covering(train, setup.grid_count)?,
            },
        })
    }

    pub fn covers(&self, x: &[f64], y: f64) -> Result<bool> {
        Ok(match self {
            PredictionRule::Split(s) => s.predict(x).contains(y),
            PredictionRule::Jplus { fit, alpha, gamma } => fit.jackknife_plus(*alpha, *gamma, x)?.contains(y),
            PredictionRule::FullCp { train, alg, alpha, gamma, grid } => {
                full_conformal(train, *alg, *alpha, *gamma, x, grid)?.contains(y)
            }
        })
    }

    /// Fraction of `test` not covered.
    pub fn miscoverage(&self, test: &Dataset) -> Result<f64> {
        let mut missed = 0usize;
        for (x, y) in test.iter() {
            if !self.covers(x, y)? {
                missed += 1;
            }
        }
        Ok(missed as f64 / test.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MiscoverageSample {
    pub trial: u64,
    pub alpha_hat: f64,
    pub method: CoverageMethod,
    pub alpha: f64,
    pub gamma: f64,
    pub n: usize,
    pub n_test: usize,
}

/// One trial: `D_n` then the `n_test` test points, both from `rng`.
pub fn estimate_miscoverage(setup: &CoverageSetup<'_>, rng: &mut RngStream) -> Result<MiscoverageSample> {
    setup.validate()?;
    let train = setup.dist.sample(setup.n, rng);
    let rule = PredictionRule::build(setup, &train)?;
    let test = setup.dist.sample(setup.n_test, rng);
    Ok(MiscoverageSample {
        trial: rng.index(),
        alpha_hat: rule.miscoverage(&test)?,
        method: setup.method,
        alpha: setup.alpha,
        gamma: setup.gamma,
        n: setup.n,
        n_test: setup.n_test,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailFrequency {
    pub threshold: f64,
    /// Fraction of trials with `alpha_hat > threshold`.
    pub freq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MiscoverageSummary {
    pub trials: usize,
    pub mean: f64,
    pub stderr: f64,
    pub q50: f64,
    pub q90: f64,
    pub q99: f64,
    pub tail_freqs: Vec<TailFrequency>,
}

/// `⌈q·T⌉`-th smallest sample.
fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    let k = crate::quantile::quantile_rank(sorted.len(), q).min(sorted.len());
    sorted[k - 1]
}

impl MiscoverageSummary {
    pub fn from_samples(samples: &[MiscoverageSample], thresholds: &[f64]) -> Self {
        let values: Vec<f64> = samples.iter().map(|s| s.alpha_hat).collect();
        let (mean, stderr) = mean_and_stderr(&values);
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        let tail_freqs = thresholds
            .iter()
            .map(|&t| TailFrequency {
                threshold: t,
                freq: values.iter().filter(|&&v| v > t).count() as f64 / values.len() as f64,
            })
            .collect();
        Self {
            trials: values.len(),
            mean,
            stderr,
            q50: empirical_quantile(&sorted, 0.5),
            q90: empirical_quantile(&sorted, 0.9),
            q99: empirical_quantile(&sorted, 0.99),
            tail_freqs,
        }
    }
}

/// `trials` independent trials; trial `t` uses `derive_stream(seed, t)`.
pub fn miscoverage_distribution(setup: &CoverageSetup<'_>, trials: usize, seed: u64) -> Result<Vec<MiscoverageSample>> {
    setup.validate()?;
    if trials == 0 {
        return Err(invalid("trials must be >= 1"));
    }
    (0..trials as u64)
        .into_par_iter()
        .map(|t| estimate_miscoverage(setup, &mut derive_stream(seed, t)))
        .collect()
}

/// Root seed for the stability estimate feeding a bound comparison; kept
/// apart from the coverage seed so the two Monte Carlo runs are independent.
pub fn stability_seed(seed: u64) -> u64 {
    mix64(seed ^ 0x5ab1_1117_0000_0000)
}

/// A theorem evaluated for the setup, with the empirical frequency of
/// `alpha_hat ≥ threshold`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremComparison {
    pub report: BoundReport,
    pub beta_hat: Option<StabilityEstimate>,
    pub exceed_freq: f64,
    pub exceed_stderr: f64,
}

impl TheoremComparison {
    /// Empirical failure frequency within `sigmas` binomial standard errors
    /// of the guaranteed failure probability.
    pub fn holds(&self, sigmas: f64) -> bool {
        self.exceed_freq <= self.report.failure_prob + sigmas * self.exceed_stderr
    }
}

/// Parameters of the bound matched to a coverage experiment.
#[derive(Debug, Clone, Copy)]
pub struct BoundPlan {
    pub delta: f64,
    pub m: usize,
    pub stability_trials: usize,
    /// Needed for uninflated jackknife+.
    pub b_dens: Option<f64>,
}

/// The bound that applies to `setup`, with the stability input estimated at
/// the shifted indices: split uses `n₁ = n − ⌊n/2⌋`; inflated jackknife+ uses
/// `β̂^out_{m,n−1}`; uninflated jackknife+ uses `β̂^out_{m,n−1}` and `B_dens`;
/// inflated full conformal uses `β̂^in_{m−1,n+1}`.
pub fn matched_bound(setup: &CoverageSetup<'_>, plan: &BoundPlan, seed: u64) -> Result<(BoundReport, Option<StabilityEstimate>)> {
    let sseed = stability_seed(seed);
    let inputs = BoundInputs::new(setup.alpha, plan.delta, setup.n, plan.m);
    match setup.method {
        CoverageMethod::Split => {
            Ok((guarantees::bound_split_conformal(setup.alpha, plan.delta, setup.n - setup.n / 2)?, None))
        }
        CoverageMethod::Jplus => {
            let est = estimate_stability(
                setup.alg,
                setup.dist,
                StabilityVariant::OUT,
                setup.n - 1,
                plan.m,
                plan.stability_trials,
                sseed,
            )?;
            let report = if setup.gamma > 0.0 {
                guarantees::bound_jplus_inflated(&inputs.beta(est.mean).gamma(setup.gamma))?
            } else {
                let b_dens = plan.b_dens.ok_or(Error::MissingField("b_dens"))?;
                guarantees::bound_jplus_uninflated(&inputs.beta(est.mean).b_dens(b_dens))?
            };
            Ok((report, Some(est)))
        }
        CoverageMethod::FullCp => {
            if setup.gamma <= 0.0 {
                return Err(invalid("the full conformal bound needs gamma > 0"));
            }
            let est = estimate_stability(
                setup.alg,
                setup.dist,
                StabilityVariant::IN,
                setup.n + 1,
                plan.m - 1,
                plan.stability_trials,
                sseed,
            )?;
            let report = guarantees::bound_full_conformal(&inputs.beta(est.mean).gamma(setup.gamma))?;
            Ok((report, Some(est)))
        }
    }
}

pub fn compare_with_bound(
    samples: &[MiscoverageSample],
    report: BoundReport,
    beta_hat: Option<StabilityEstimate>,
) -> TheoremComparison {
    let t = samples.len() as f64;
    let exceed = samples.iter().filter(|s| s.alpha_hat >= report.threshold).count() as f64 / t;
    TheoremComparison { report, beta_hat, exceed_freq: exceed, exceed_stderr: (exceed * (1.0 - exceed) / t).sqrt() }
}
