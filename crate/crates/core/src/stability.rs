//! Monte Carlo estimation of m-stability and closed-form stability bounds.
//!
//! Four functionals are supported, indexed by where the prediction is
//! evaluated (a fresh point, or the first training point) and how the data
//! are perturbed:
//!
//! | variant      | compared fits                                   | evaluated at |
//! |--------------|-------------------------------------------------|--------------|
//! | `out`        | `A(D_n)` vs `A(D_{n+m})`                        | fresh `X`    |
//! | `in`         | `A(D_n)` vs `A(D_{n+m})`                        | `X_1`        |
//! | `swap-out`   | `A(D_n)` vs `A(D_n` with last `m` replaced`)`   | fresh `X`    |
//! | `swap-in`    | same as above                                   | `X_1`        |
//!
//! Within a trial the draws are consumed in a fixed order: the fresh
//! evaluation point (out-of-sample variants only), then the `n` (or `n + m`)
//! training points, then the `m` replacement points (swap variants only).
//! Because the samplers draw point by point, the same seed and trial index
//! give nested data sets across different `n` and `m`; [`stability_curve`]
//! relies on this so its entries agree exactly with [`estimate_stability`].

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::experiments::distributions::Sampler;
use crate::regressors::RegressionAlgorithm;
use crate::rng::{derive_stream, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    OutOfSample,
    InSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    AddRemove,
    Swap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StabilityVariant {
    pub side: Side,
    pub perturbation: Perturbation,
}

impl StabilityVariant {
    pub const OUT: Self = Self { side: Side::OutOfSample, perturbation: Perturbation::AddRemove };
    pub const IN: Self = Self { side: Side::InSample, perturbation: Perturbation::AddRemove };
    pub const SWAP_OUT: Self = Self { side: Side::OutOfSample, perturbation: Perturbation::Swap };
    pub const SWAP_IN: Self = Self { side: Side::InSample, perturbation: Perturbation::Swap };

    pub fn tag(&self) -> &'static str {
        match (self.side, self.perturbation) {
            (Side::OutOfSample, Perturbation::AddRemove) => "out",
            (Side::InSample, Perturbation::AddRemove) => "in",
            (Side::OutOfSample, Perturbation::Swap) => "swap-out",
            (Side::InSample, Perturbation::Swap) => "swap-in",
        }
    }

    fn validate(&self, n: usize, m: usize) -> Result<()> {
        let ok = match (self.side, self.perturbation) {
            (_, Perturbation::AddRemove) => n >= 1,
            (Side::OutOfSample, Perturbation::Swap) => n >= m && n >= 1,
            (Side::InSample, Perturbation::Swap) => n > m,
        };
        if ok {
            Ok(())
        } else {
            let need = match (self.side, self.perturbation) {
                (_, Perturbation::AddRemove) => "n >= 1",
                (Side::OutOfSample, Perturbation::Swap) => "n >= m and n >= 1",
                (Side::InSample, Perturbation::Swap) => "n > m",
            };
            Err(invalid(format!("{} stability requires {need} (n = {n}, m = {m})", self.tag())))
        }
    }
}

impl fmt::Display for StabilityVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for StabilityVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "out" => Ok(Self::OUT),
            "in" => Ok(Self::IN),
            "swap-out" => Ok(Self::SWAP_OUT),
            "swap-in" => Ok(Self::SWAP_IN),
            other => Err(invalid(format!("unknown stability variant `{other}` (out, in, swap-out, swap-in)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityEstimate {
    pub variant: StabilityVariant,
    pub m: usize,
    pub n: usize,
    pub trials: usize,
    pub mean: f64,
    pub stderr: f64,
}

impl StabilityEstimate {
    pub fn from_gaps(variant: StabilityVariant, n: usize, m: usize, gaps: &[f64]) -> Self {
        let (mean, stderr) = mean_and_stderr(gaps);
        Self { variant, m, n, trials: gaps.len(), mean, stderr }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailStabilityEstimate {
    pub m: usize,
    pub n: usize,
    pub epsilon: f64,
    pub nu_hat: f64,
    pub trials: usize,
}

impl TailStabilityEstimate {
    pub fn from_gaps(n: usize, m: usize, epsilon: f64, gaps: &[f64]) -> Self {
        let exceed = gaps.iter().filter(|&&g| g > epsilon).count();
        Self { m, n, epsilon, nu_hat: exceed as f64 / gaps.len() as f64, trials: gaps.len() }
    }

    /// Binomial standard error of `nu_hat`.
    pub fn stderr(&self) -> f64 {
        (self.nu_hat * (1.0 - self.nu_hat) / self.trials as f64).sqrt()
    }
}

/// Sample mean and standard error (sample sd / √trials); the error is 0 for
/// a single trial.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let t = values.len();
    if t == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / t as f64;
    if t == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (t - 1) as f64;
    (mean, (var / t as f64).sqrt())
}

/// `√(a² + b²)`, the standard error budget for comparing two estimates.
pub fn combined_stderr(a: f64, b: f64) -> f64 {
    a.hypot(b)
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        Err(invalid("trials must be >= 1"))
    } else {
        Ok(())
    }
}

/// `|μ̂(X_eval) − μ̂′(X_eval)|` for one trial.
pub fn trial_gap(
    alg: &dyn RegressionAlgorithm,
    dist: &dyn Sampler,
    variant: StabilityVariant,
    n: usize,
    m: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    let fresh = match variant.side {
        Side::OutOfSample => Some(dist.sample(1, rng)),
        Side::InSample => None,
    };
    let (a, b) = match variant.perturbation {
        Perturbation::AddRemove => {
            let all = dist.sample(n + m, rng);
            (all.prefix(n), all)
        }
        Perturbation::Swap => {
            let base = dist.sample(n, rng);
            let repl = dist.sample(m, rng);
            let swapped = base.prefix(n - m).concat(&repl)?;
            (base, swapped)
        }
    };
    let eval: Vec<f64> = match &fresh {
        Some(f) => f.x(0).to_vec(),
        None => a.x(0).to_vec(),
    };
    let mu = alg.fit(&a)?;
    let mu_prime = if m == 0 { mu.clone() } else { alg.fit(&b)? };
    Ok((mu.predict(&eval) - mu_prime.predict(&eval)).abs())
}

/// Per-trial gaps, ordered by trial index. Trial `t` draws from
/// `derive_stream(seed, t)`.
pub fn stability_gaps(
    alg: &dyn RegressionAlgorithm,
    dist: &dyn Sampler,
    variant: StabilityVariant,
    n: usize,
    m: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    variant.validate(n, m)?;
    check_trials(trials)?;
    (0..trials)
        .into_par_iter()
        .map(|t| trial_gap(alg, dist, variant, n, m, &mut derive_stream(seed, t as u64)))
        .collect()
}

pub fn estimate_stability(
    alg: &dyn RegressionAlgorithm,
    dist: &dyn Sampler,
    variant: StabilityVariant,
    n: usize,
    m: usize,
    trials: usize,
    seed: u64,
) -> Result<StabilityEstimate> {
    let gaps = stability_gaps(alg, dist, variant, n, m, trials, seed)?;
    Ok(StabilityEstimate::from_gaps(variant, n, m, &gaps))
}

/// Fraction of trials with out-of-sample gap `|μ̂_n(X) − μ̂_{n+m}(X)| > ε`.
pub fn estimate_tail_stability(
    alg: &dyn RegressionAlgorithm,
    dist: &dyn Sampler,
    n: usize,
    m: usize,
    epsilon: f64,
    trials: usize,
    seed: u64,
) -> Result<TailStabilityEstimate> {
    estimate_tail_stability_variant(alg, dist, StabilityVariant::OUT, n, m, epsilon, trials, seed)
}

#[allow(clippy::too_many_arguments)]
pub fn estimate_tail_stability_variant(
    alg: &dyn RegressionAlgorithm,
    dist: &dyn Sampler,
    variant: StabilityVariant,
    n: usize,
    m: usize,
    epsilon: f64,
    trials: usize,
    seed: u64,
) -> Result<TailStabilityEstimate> {
    if !(epsilon > 0.0) {
        return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    let gaps = stability_gaps(alg, dist, variant, n, m, trials, seed)?;
    Ok(TailStabilityEstimate::from_gaps(n, m, epsilon, &gaps))
}

/// One point of a stability curve with its 1-vs-m composite bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub estimate: StabilityEstimate,
    /// Add/remove: `Σ_{k=n}^{n+m−1} β̂_{1,k}`. Swap: `m·β̄̂_{1,n}`.
    pub lemma_bound: f64,
    pub lemma_stderr: f64,
}

impl CurvePoint {
    /// `√(stderr(β̂)² + stderr(bound)²)`.
    pub fn combined_stderr(&self) -> f64 {
        combined_stderr(self.estimate.stderr, self.lemma_stderr)
    }
}

/// `β̂_{m,n}` for every `m` in `m_list` plus the composite 1-vs-m bound.
///
/// For add/remove variants each trial draws one nested sample of size
/// `n + max(m)` and fits every prefix from `n` upwards, so
/// `β̂_{1,k} = mean |μ̂_k − μ̂_{k+1}|` shares its draws with `β̂_{m,n}`.
pub fn stability_curve(
    alg: &dyn RegressionAlgorithm,
    dist: &dyn Sampler,
    variant: StabilityVariant,
    n: usize,
    m_list: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    if m_list.is_empty() {
        return Err(invalid("m_list must be nonempty"));
    }
    if m_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("m_list must be strictly ascending"));
    }
    check_trials(trials)?;
    let m_max = *m_list.last().expect("nonempty");
    variant.validate(n, m_max)?;
    match variant.perturbation {
        Perturbation::AddRemove => nested_curve(alg, dist, variant, n, m_list, trials, seed),
        Perturbation::Swap => {
            let one = stability_gaps(alg, dist, variant, n, 1.min(n), trials, seed)?;
            let one_est = StabilityEstimate::from_gaps(variant, n, 1, &one);
            m_list
                .iter()
                .map(|&m| {
                    let est = estimate_stability(alg, dist, variant, n, m, trials, seed)?;
                    Ok(CurvePoint {
                        estimate: est,
                        lemma_bound: m as f64 * one_est.mean,
                        lemma_stderr: m as f64 * one_est.stderr,
                    })
                })
                .collect()
        }
    }
}

struct NestedTrial {
    /// `|μ̂_n − μ̂_{n+m}|` for each requested m.
    gaps: Vec<f64>,
    /// Partial sums of `|μ̂_k − μ̂_{k+1}|`, k = n..n+m−1, for each requested m.
    lemma: Vec<f64>,
}

fn nested_curve(
    alg: &dyn RegressionAlgorithm,
    dist: &dyn Sampler,
    variant: StabilityVariant,
    n: usize,
    m_list: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    let m_max = *m_list.last().expect("nonempty");
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<NestedTrial> {
            let mut rng = derive_stream(seed, t as u64);
            let fresh = match variant.side {
                Side::OutOfSample => Some(dist.sample(1, &mut rng)),
                Side::InSample => None,
            };
            let all: Dataset = dist.sample(n + m_max, &mut rng);
            let eval = match &fresh {
                Some(f) => f.x(0).to_vec(),
                None => all.x(0).to_vec(),
            };
            let preds = (0..=m_max)
                .map(|j| Ok(alg.fit(&all.prefix(n + j))?.predict(&eval)))
                .collect::<Result<Vec<f64>>>()?;
            let mut partial = vec![0.0; m_max + 1];
            for j in 0..m_max {
                partial[j + 1] = partial[j] + (preds[j] - preds[j + 1]).abs();
            }
            Ok(NestedTrial {
                gaps: m_list.iter().map(|&m| (preds[0] - preds[m]).abs()).collect(),
                lemma: m_list.iter().map(|&m| partial[m]).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(m_list
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let gaps: Vec<f64> = per_trial.iter().map(|t| t.gaps[i]).collect();
            let lemma: Vec<f64> = per_trial.iter().map(|t| t.lemma[i]).collect();
            let (lemma_bound, lemma_stderr) = mean_and_stderr(&lemma);
            CurvePoint { estimate: StabilityEstimate::from_gaps(variant, n, m, &gaps), lemma_bound, lemma_stderr }
        })
        .collect())
}

/// kNN: `β_{m,n} ≤ 2·B_Y·m/(n + m)` for responses bounded by `B_Y`.
pub fn knn_stability_bound(b_y: f64, m: usize, n: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    2.0 * b_y * m as f64 / (n + m) as f64
}

/// Ridge with `‖X‖ ≤ B_X`, `|Y| ≤ B_Y`:
/// `(2·B_X²·B_Y/λ)(1 + B_X²/λ) · m/(n+m) · (1/√m + 1/√n)`.
pub fn ridge_stability_bound(b_x: f64, b_y: f64, lambda: f64, m: usize, n: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let (m, n) = (m as f64, n as f64);
    let bx2 = b_x * b_x;
    2.0 * bx2 * b_y / lambda * (1.0 + bx2 / lambda) * m / (n + m) * (1.0 / m.sqrt() + 1.0 / n.sqrt())
}

/// Subbagging a `[0, 1]`-valued base learner with `B` bags of size `N`:
/// `√(m/(4n) · N/(n + 1 − N)) + 1/√B`.
pub fn bagging_stability_bound(n: usize, bag_size: usize, m: usize, bags: usize) -> Result<f64> {
    if bag_size >= n {
        return Err(Error::BagSizeTooLarge { bag_size, n });
    }
    if bag_size == 0 || bags == 0 {
        return Err(invalid("bag size and bag count must be >= 1"));
    }
    let (nf, big_n) = (n as f64, bag_size as f64);
    Ok((m as f64 / (4.0 * nf) * big_n / (nf + 1.0 - big_n)).sqrt() + 1.0 / (bags as f64).sqrt())
}
