//! Synthetic data-generating distributions.
//!
//! Samplers draw points one at a time in a fixed pattern, so
//! `sample(a + b)` starts with exactly the points `sample(a)` would return.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;

/// Anything that can draw i.i.d. datasets from a stream.
pub trait Sampler: Send + Sync {
    fn dim(&self) -> usize;

    fn sample(&self, count: usize, rng: &mut RngStream) -> Dataset;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionSpec {
    /// `X ~ Unif([0,1]^d)`, `Y = Σ_j sin(X_j / j) + ε`, with `ε ~ Unif[−1,1]`
    /// w.p. 1/3 and `Unif[−0.1, 0.1]` otherwise.
    SineMixture { d: usize },
    /// `X ~ N(0, I_d)`, `Y = Xᵀw + N(0, σ²)` with `w_j = 1/√d`.
    LinearGaussian { d: usize, noise_sd: f64 },
    /// `X ~ Unif([0,1]^d)`, `Y = mean(X)/2 + U/2` with `U ~ Unif[0,1]`, so
    /// `Y ∈ [0, 1]`.
    CustomBounded { d: usize },
}

impl DistributionSpec {
    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(invalid("distribution dimension must be >= 1"));
        }
        if let DistributionSpec::LinearGaussian { noise_sd, .. } = self {
            if !(*noise_sd >= 0.0 && noise_sd.is_finite()) {
                return Err(invalid(format!("noise_sd must be >= 0, got {noise_sd}")));
            }
        }
        Ok(())
    }

    pub fn tag(&self) -> &'static str {
        match self {
            DistributionSpec::SineMixture { .. } => "sine",
            DistributionSpec::LinearGaussian { .. } => "linear",
            DistributionSpec::CustomBounded { .. } => "bounded",
        }
    }

    /// Almost-sure bound on `|Y|`.
    pub fn b_y(&self) -> Option<f64> {
        match *self {
            DistributionSpec::SineMixture { d } => Some(1.0 + (1..=d).map(|j| (1.0f64 / j as f64).min(1.0)).sum::<f64>()),
            DistributionSpec::LinearGaussian { .. } => None,
            DistributionSpec::CustomBounded { .. } => Some(1.0),
        }
    }

    /// Almost-sure bound on `‖X‖₂`.
    pub fn b_x(&self) -> Option<f64> {
        match *self {
            DistributionSpec::SineMixture { d } | DistributionSpec::CustomBounded { d } => Some((d as f64).sqrt()),
            DistributionSpec::LinearGaussian { .. } => None,
        }
    }

    /// `E[sup_y f(y | X)]`.
    pub fn b_dens(&self) -> Option<f64> {
        match *self {
            // (1/3)·(1/2) + (2/3)·5
            DistributionSpec::SineMixture { .. } => Some(3.5),
            DistributionSpec::LinearGaussian { noise_sd, .. } if noise_sd > 0.0 => {
                Some(1.0 / (noise_sd * (2.0 * std::f64::consts::PI).sqrt()))
            }
            DistributionSpec::LinearGaussian { .. } => None,
            DistributionSpec::CustomBounded { .. } => Some(2.0),
        }
    }

    pub fn linear_weights(d: usize) -> Vec<f64> {
        vec![1.0 / (d as f64).sqrt(); d]
    }
}

impl Sampler for DistributionSpec {
    fn dim(&self) -> usize {
        match *self {
            DistributionSpec::SineMixture { d }
            | DistributionSpec::LinearGaussian { d, .. }
            | DistributionSpec::CustomBounded { d } => d,
        }
    }

    fn sample(&self, count: usize, rng: &mut RngStream) -> Dataset {
        match *self {
            DistributionSpec::SineMixture { d } => sample_sine_mixture(d, count, rng),
            DistributionSpec::LinearGaussian { d, noise_sd } => {
                sample_linear_gaussian(d, count, noise_sd, &Self::linear_weights(d), rng)
            }
            DistributionSpec::CustomBounded { d } => sample_custom_bounded(d, count, rng),
        }
    }
}

impl FromStr for DistributionSpec {
    type Err = Error;

    /// `sine:d=40`, `linear:d=5,noise=1`, `bounded:d=3`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut d = None;
        let mut noise = None;
        for part in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| invalid(format!("expected key=value, got `{part}`")))?;
            match k.trim() {
                "d" => d = Some(v.trim().parse::<usize>().map_err(|_| invalid(format!("bad d `{v}`")))?),
                "noise" => noise = Some(v.trim().parse::<f64>().map_err(|_| invalid(format!("bad noise `{v}`")))?),
                other => return Err(invalid(format!("unknown distribution parameter `{other}`"))),
            }
        }
        let spec = match kind.trim() {
            "sine" | "sine_mixture" => DistributionSpec::SineMixture { d: d.unwrap_or(40) },
            "linear" | "linear_gaussian" => {
                DistributionSpec::LinearGaussian { d: d.unwrap_or(5), noise_sd: noise.unwrap_or(1.0) }
            }
            "bounded" | "custom_bounded" => DistributionSpec::CustomBounded { d: d.unwrap_or(5) },
            other => return Err(invalid(format!("unknown distribution `{other}`"))),
        };
        if noise.is_some() && !matches!(spec, DistributionSpec::LinearGaussian { .. }) {
            return Err(invalid("`noise` only applies to the linear distribution"));
        }
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistributionSpec::SineMixture { d } => write!(f, "sine:d={d}"),
            DistributionSpec::LinearGaussian { d, noise_sd } => write!(f, "linear:d={d},noise={noise_sd}"),
            DistributionSpec::CustomBounded { d } => write!(f, "bounded:d={d}"),
        }
    }
}

/// The two-component noise of the sine mixture.
pub fn sine_mixture_noise(rng: &mut RngStream) -> f64 {
    let wide = rng.random::<f64>() < 1.0 / 3.0;
    let u = rng.random::<f64>() * 2.0 - 1.0;
    if wide {
        u
    } else {
        0.1 * u
    }
}

pub fn sample_sine_mixture(d: usize, count: usize, rng: &mut RngStream) -> Dataset {
    let mut ds = Dataset::with_capacity(d, count).expect("d >= 1");
    let mut x = vec![0.0; d];
    for _ in 0..count {
        for v in x.iter_mut() {
            *v = rng.random::<f64>();
        }
        let signal: f64 = x.iter().enumerate().map(|(j, v)| (v / (j + 1) as f64).sin()).sum();
        let y = signal + sine_mixture_noise(rng);
        ds.push(&x, y).expect("finite draw");
    }
    ds
}

pub fn sample_linear_gaussian(d: usize, count: usize, noise_sd: f64, weights: &[f64], rng: &mut RngStream) -> Dataset {
    let mut ds = Dataset::with_capacity(d, count).expect("d >= 1");
    let mut x = vec![0.0; d];
    for _ in 0..count {
        for v in x.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        let z: f64 = StandardNormal.sample(rng);
        let y = x.iter().zip(weights).map(|(a, w)| a * w).sum::<f64>() + noise_sd * z;
        ds.push(&x, y).expect("finite draw");
    }
    ds
}

pub fn sample_custom_bounded(d: usize, count: usize, rng: &mut RngStream) -> Dataset {
    let mut ds = Dataset::with_capacity(d, count).expect("d >= 1");
    let mut x = vec![0.0; d];
    for _ in 0..count {
        for v in x.iter_mut() {
            *v = rng.random::<f64>();
        }
        let mean = x.iter().sum::<f64>() / d as f64;
        let y = 0.5 * mean + 0.5 * rng.random::<f64>();
        ds.push(&x, y).expect("finite draw");
    }
    ds
}
