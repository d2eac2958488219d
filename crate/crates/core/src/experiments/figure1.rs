//! Out-of-sample m-stability curves against the 1-vs-m composite bound for
//! the four reference learners.

use std::path::{Path, PathBuf};

use crate::error::{invalid, Result};
use crate::experiments::distributions::DistributionSpec;
use crate::experiments::output::write_stability_csv;
use crate::regressors::AlgorithmSpec;
use crate::stability::{stability_curve, CurvePoint, StabilityVariant};

#[derive(Debug, Clone, PartialEq)]
pub struct Figure1Config {
    pub n: usize,
    pub d: usize,
    pub trials: usize,
    pub m_max: usize,
    pub seed: u64,
    /// `None` runs [`default_algorithms`].
    pub algorithms: Option<Vec<AlgorithmSpec>>,
}

impl Default for Figure1Config {
    fn default() -> Self {
        Self { n: 500, d: 40, trials: 1000, m_max: 25, seed: 0, algorithms: None }
    }
}

/// kNN (k = 20), ridge (λ = 0.01), a depth-8 tree, and 50 subbagged depth-8
/// trees on bags of size `n/2`.
pub fn default_algorithms(n: usize, seed: u64) -> Vec<AlgorithmSpec> {
    vec![
        AlgorithmSpec::Knn { k: 20 },
        AlgorithmSpec::Ridge { lambda: 0.01 },
        AlgorithmSpec::Tree { max_depth: 8, min_leaf: 1 },
        AlgorithmSpec::SubbagTree { max_depth: 8, min_leaf: 1, bag_size: n / 2, bags: 50, seed, clip: false },
    ]
}

#[derive(Debug, Clone)]
pub struct Figure1Curve {
    pub algorithm: AlgorithmSpec,
    pub points: Vec<CurvePoint>,
    pub path: Option<PathBuf>,
}

/// Curves for every algorithm; writes `figure1_<tag>.csv` into `outdir`
/// when given.
pub fn run_figure1(config: &Figure1Config, outdir: Option<&Path>) -> Result<Vec<Figure1Curve>> {
    if config.m_max == 0 {
        return Err(invalid("m_max must be >= 1"));
    }
    let dist = DistributionSpec::SineMixture { d: config.d };
    dist.validate()?;
    let algorithms = config.algorithms.clone().unwrap_or_else(|| default_algorithms(config.n, config.seed));
    let m_list: Vec<usize> = (1..=config.m_max).collect();
    algorithms
        .into_iter()
        .map(|spec| {
            let alg = spec.build()?;
            let points = stability_curve(&*alg, &dist, StabilityVariant::OUT, config.n, &m_list, config.trials, config.seed)?;
            let path = match outdir {
                Some(dir) => {
                    let p = dir.join(format!("figure1_{}.csv", spec.tag()));
                    write_stability_csv(&p, &points, &spec, &dist)?;
                    Some(p)
                }
                None => None,
            };
            Ok(Figure1Curve { algorithm: spec, points, path })
        })
        .collect()
}
