//! TOML experiment configuration. Every field is optional in the file;
//! command-line values take precedence via [`ExperimentConfig::merge`].

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::experiments::coverage::CoverageMethod;
use crate::experiments::distributions::DistributionSpec;
use crate::regressors::AlgorithmSpec;
use crate::stability::StabilityVariant;

pub const DEFAULT_N_TEST: usize = 2000;
pub const DEFAULT_TRIALS: usize = 1000;
/// Grid size used by full conformal experiments.
pub const DEFAULT_GRID_COUNT: usize = 1001;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Option<String>,
    /// String form, e.g. `knn:k=20`.
    pub alg: Option<String>,
    /// String form, e.g. `sine:d=40`.
    pub dist: Option<String>,
    pub variant: Option<String>,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub delta: Option<f64>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub m_list: Option<Vec<usize>>,
    pub trials: Option<usize>,
    pub n_test: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub grid_count: Option<usize>,
    pub stability_trials: Option<usize>,
    pub thresholds: Option<Vec<f64>>,
}

macro_rules! take_override {
    ($self:ident, $other:ident, $($f:ident),*) => {
        $( if $other.$f.is_some() { $self.$f = $other.$f; } )*
    };
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Fields set in `other` replace those in `self`.
    pub fn merge(mut self, other: ExperimentConfig) -> Self {
        take_override!(
            self, other, method, alg, dist, variant, alpha, gamma, delta, n, m, m_list, trials, n_test, seed, out,
            grid_count, stability_trials, thresholds
        );
        self
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::Config("a seed is required (--seed or `seed =` in the config)".into()))
    }

    pub fn algorithm(&self) -> Result<AlgorithmSpec> {
        required(&self.alg, "alg")?.parse().map_err(to_config)
    }

    pub fn distribution(&self) -> Result<DistributionSpec> {
        required(&self.dist, "dist")?.parse().map_err(to_config)
    }

    pub fn coverage_method(&self) -> Result<CoverageMethod> {
        required(&self.method, "method")?.parse().map_err(to_config)
    }

    pub fn stability_variant(&self) -> Result<StabilityVariant> {
        self.variant.as_deref().unwrap_or("out").parse().map_err(to_config)
    }

    pub fn require_n(&self) -> Result<usize> {
        self.n.ok_or_else(|| Error::Config("`n` is required".into()))
    }

    pub fn require_out(&self) -> Result<&Path> {
        self.out.as_deref().ok_or_else(|| Error::Config("`out` is required".into()))
    }
}

fn required<'a>(v: &'a Option<String>, name: &str) -> Result<&'a str> {
    v.as_deref().ok_or_else(|| Error::Config(format!("`{name}` is required")))
}

fn to_config(e: Error) -> Error {
    match e {
        Error::InvalidParameter(msg) => Error::Config(msg),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_merge() {
        let file = ExperimentConfig::from_toml_str(
            r#"
            method = "jplus"
            alg = "ridge:lambda=1"
            dist = "sine:d=5"
            alpha = 0.2
            n = 100
            seed = 7
            thresholds = [0.25, 0.3]
            "#,
        )
        .unwrap();
        let cli = ExperimentConfig { n: Some(50), ..Default::default() };
        let merged = file.merge(cli);
        assert_eq!(merged.n, Some(50));
        assert_eq!(merged.seed().unwrap(), 7);
        assert_eq!(merged.algorithm().unwrap(), AlgorithmSpec::Ridge { lambda: 1.0 });
        assert_eq!(merged.coverage_method().unwrap(), CoverageMethod::Jplus);
        assert_eq!(merged.thresholds.as_deref(), Some(&[0.25, 0.3][..]));
    }

    #[test]
    fn rejects_unknown_keys_and_missing_seed() {
        assert!(matches!(ExperimentConfig::from_toml_str("sed = 3"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::default().seed(), Err(Error::Config(_))));
        let bad = ExperimentConfig { alg: Some("svm".into()), ..Default::default() };
        assert!(matches!(bad.algorithm(), Err(Error::Config(_))));
    }
}
