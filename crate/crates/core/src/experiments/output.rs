//! File formats written by the experiment runners.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::data::format_f64;
use crate::error::Result;
use crate::experiments::coverage::{MiscoverageSample, MiscoverageSummary, TailFrequency};
use crate::regressors::AlgorithmSpec;
use crate::stability::{
    bagging_stability_bound, knn_stability_bound, ridge_stability_bound, CurvePoint, Perturbation, Side,
    StabilityVariant,
};
use crate::experiments::distributions::DistributionSpec;

pub const STABILITY_HEADER: &str = "variant,n,m,trials,beta_hat,stderr,lemma_bound,theory_bound,theory_bound_kind";

/// Closed-form stability bound applicable to `(alg, dist, variant)`, with its
/// kind tag. Swap variants use twice the add/remove bound.
pub fn theory_bound(
    alg: &AlgorithmSpec,
    dist: &DistributionSpec,
    variant: StabilityVariant,
    n: usize,
    m: usize,
) -> Option<(f64, &'static str)> {
    let swap = variant.perturbation == Perturbation::Swap;
    if swap && variant.side == Side::InSample {
        return None;
    }
    let (value, kind) = match *alg {
        AlgorithmSpec::Knn { .. } => (knn_stability_bound(dist.b_y()?, m, n), "knn"),
        AlgorithmSpec::Ridge { lambda } => (ridge_stability_bound(dist.b_x()?, dist.b_y()?, lambda, m, n), "ridge"),
        AlgorithmSpec::SubbagTree { bag_size, bags, clip: true, .. } if variant.side == Side::OutOfSample => {
            (bagging_stability_bound(n, bag_size, m, bags).ok()?, "bagging")
        }
        AlgorithmSpec::Zero => (0.0, "zero"),
        _ => return None,
    };
    Some(if swap { (2.0 * value, kind) } else { (value, kind) })
}

pub fn stability_row(point: &CurvePoint, theory: Option<(f64, &str)>) -> String {
    let e = &point.estimate;
    let (tb, kind) = match theory {
        Some((v, k)) => (format_f64(v), k),
        None => (String::new(), "none"),
    };
    format!(
        "{},{},{},{},{},{},{},{},{}",
        e.variant,
        e.n,
        e.m,
        e.trials,
        format_f64(e.mean),
        format_f64(e.stderr),
        format_f64(point.lemma_bound),
        tb,
        kind
    )
}

pub fn write_stability_csv(
    path: &Path,
    points: &[CurvePoint],
    alg: &AlgorithmSpec,
    dist: &DistributionSpec,
) -> Result<()> {
    let mut out = String::from(STABILITY_HEADER);
    out.push('\n');
    for p in points {
        let e = &p.estimate;
        out.push_str(&stability_row(p, theory_bound(alg, dist, e.variant, e.n, e.m)));
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

pub fn write_coverage_csv(path: &Path, samples: &[MiscoverageSample]) -> Result<()> {
    let mut out = String::from("trial,alpha_hat\n");
    for s in samples {
        out.push_str(&format!("{},{}\n", s.trial, format_f64(s.alpha_hat)));
    }
    write_file(path, out.as_bytes())
}

/// Sidecar JSON written next to the coverage CSV.
#[derive(Debug, Clone, Serialize)]
pub struct CoverageSidecar {
    pub method: String,
    pub algorithm: String,
    pub distribution: String,
    pub alpha: f64,
    pub gamma: f64,
    pub n: usize,
    pub n_test: usize,
    pub seed: u64,
    pub trials: usize,
    pub mean: f64,
    pub stderr: f64,
    pub q50: f64,
    pub q90: f64,
    pub q99: f64,
    pub tail_freqs: Vec<TailFrequency>,
    pub bound_threshold: Option<f64>,
    pub bound_failure_prob: Option<f64>,
    pub bound_vacuous: Option<bool>,
    pub beta_hat: Option<f64>,
    pub beta_hat_stderr: Option<f64>,
    pub exceed_freq: Option<f64>,
    pub exceed_stderr: Option<f64>,
}

impl CoverageSidecar {
    pub fn summary_fields(mut self, s: &MiscoverageSummary) -> Self {
        self.trials = s.trials;
        self.mean = s.mean;
        self.stderr = s.stderr;
        self.q50 = s.q50;
        self.q90 = s.q90;
        self.q99 = s.q99;
        self.tail_freqs = s.tail_freqs.clone();
        self
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_file(path, s.as_bytes())
}

/// `out.csv` → `out.json`.
pub fn sidecar_path(csv: &Path) -> std::path::PathBuf {
    csv.with_extension("json")
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stability::StabilityEstimate;

    #[test]
    fn row_format() {
        let p = CurvePoint {
            estimate: StabilityEstimate { variant: StabilityVariant::OUT, m: 2, n: 10, trials: 4, mean: 0.5, stderr: 0.25 },
            lemma_bound: 1.0,
            lemma_stderr: 0.0,
        };
        assert_eq!(
            stability_row(&p, None),
            "out,10,2,4,5.0000000000000000e-1,2.5000000000000000e-1,1.0000000000000000e0,,none"
        );
        let r = stability_row(&p, Some((0.125, "knn")));
        assert!(r.ends_with(",1.2500000000000000e-1,knn"));
    }

    #[test]
    fn theory_bound_kinds() {
        let dist = DistributionSpec::CustomBounded { d: 2 };
        let knn = AlgorithmSpec::Knn { k: 3 };
        let (v, k) = theory_bound(&knn, &dist, StabilityVariant::OUT, 100, 25).unwrap();
        assert_eq!(k, "knn");
        assert!((v - 0.4).abs() < 1e-15);
        let (v2, _) = theory_bound(&knn, &dist, StabilityVariant::SWAP_OUT, 100, 25).unwrap();
        assert_eq!(v2, 2.0 * v);
        assert!(theory_bound(&knn, &dist, StabilityVariant::SWAP_IN, 100, 25).is_none());
        let tree = AlgorithmSpec::Tree { max_depth: 3, min_leaf: 1 };
        assert!(theory_bound(&tree, &dist, StabilityVariant::OUT, 100, 1).is_none());
        let unclipped = AlgorithmSpec::SubbagTree { max_depth: 3, min_leaf: 1, bag_size: 50, bags: 50, seed: 0, clip: false };
        assert!(theory_bound(&unclipped, &dist, StabilityVariant::OUT, 100, 1).is_none());
        let clipped = AlgorithmSpec::SubbagTree { max_depth: 3, min_leaf: 1, bag_size: 50, bags: 50, seed: 0, clip: true };
        assert_eq!(theory_bound(&clipped, &dist, StabilityVariant::OUT, 100, 1).unwrap().1, "bagging");
        assert!(theory_bound(&knn, &DistributionSpec::LinearGaussian { d: 2, noise_sd: 1.0 }, StabilityVariant::OUT, 10, 1).is_none());
    }
}
