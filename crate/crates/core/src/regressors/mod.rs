//! Symmetric regression algorithms.
//!
//! Every learner fits on the canonical (lexicographically sorted) view of its
//! training data, so permuting the input yields bitwise-identical predictions.

mod knn;
mod ridge;
mod subbag;
mod tree;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{invalid, Error, Result};

pub use knn::{fit_knn, Knn, KnnParams};
pub use ridge::{fit_ridge, Ridge, RidgeParams};
pub use subbag::{fit_subbag, Subbag, SubbagParams};
pub use tree::{fit_tree, Tree, TreeParams};

/// A fitted regression function.
pub trait Model: Send + Sync {
    fn predict(&self, x: &[f64]) -> f64;
}

impl<F> Model for F
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn predict(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// Immutable fitted predictor plus the metadata of the fit that produced it.
#[derive(Clone)]
pub struct Predictor {
    model: Arc<dyn Model>,
    n_train: usize,
    algorithm: Arc<str>,
}

impl Predictor {
    pub fn new(model: impl Model + 'static, n_train: usize, algorithm: impl Into<Arc<str>>) -> Self {
        Self { model: Arc::new(model), n_train, algorithm: algorithm.into() }
    }

    pub fn constant(c: f64, n_train: usize, algorithm: impl Into<Arc<str>>) -> Self {
        Self::new(move |_: &[f64]| c, n_train, algorithm)
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.model.predict(x)
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn algorithm(&self) -> &str {
        &self.algorithm
    }
}

impl fmt::Debug for Predictor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Predictor")
            .field("algorithm", &self.algorithm)
            .field("n_train", &self.n_train)
            .finish()
    }
}

/// A deterministic, permutation-invariant fitting rule.
pub trait RegressionAlgorithm: Send + Sync {
    fn name(&self) -> String;

    fn fit(&self, train: &Dataset) -> Result<Predictor>;
}

impl<A: RegressionAlgorithm + ?Sized> RegressionAlgorithm for Arc<A> {
    fn name(&self) -> String {
        (**self).name()
    }

    fn fit(&self, train: &Dataset) -> Result<Predictor> {
        (**self).fit(train)
    }
}

impl<A: RegressionAlgorithm + ?Sized> RegressionAlgorithm for &A {
    fn name(&self) -> String {
        (**self).name()
    }

    fn fit(&self, train: &Dataset) -> Result<Predictor> {
        (**self).fit(train)
    }
}

/// Always predicts 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantZero;

impl RegressionAlgorithm for ConstantZero {
    fn name(&self) -> String {
        "zero".into()
    }

    fn fit(&self, train: &Dataset) -> Result<Predictor> {
        Ok(Predictor::constant(0.0, train.len(), "zero"))
    }
}

/// Predicts the sample mean of the responses (0 on empty data).
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanResponse;

impl RegressionAlgorithm for MeanResponse {
    fn name(&self) -> String {
        "mean".into()
    }

    fn fit(&self, train: &Dataset) -> Result<Predictor> {
        let mut ys = train.ys().to_vec();
        ys.sort_by(f64::total_cmp);
        let mean = if ys.is_empty() { 0.0 } else { ys.iter().sum::<f64>() / ys.len() as f64 };
        Ok(Predictor::constant(mean, train.len(), "mean"))
    }
}

/// Wraps a learner and clamps its predictions to `[lo, hi]`.
#[derive(Clone)]
pub struct Clipped<A> {
    pub inner: A,
    pub lo: f64,
    pub hi: f64,
}

impl<A: RegressionAlgorithm> RegressionAlgorithm for Clipped<A> {
    fn name(&self) -> String {
        format!("clip[{},{}]({})", self.lo, self.hi, self.inner.name())
    }

    fn fit(&self, train: &Dataset) -> Result<Predictor> {
        let p = self.inner.fit(train)?;
        let (lo, hi) = (self.lo, self.hi);
        let name = self.name();
        Ok(Predictor::new(move |x: &[f64]| p.predict(x).clamp(lo, hi), train.len(), name))
    }
}

/// Declarative description of a learner, as used by configs and the CLI.
///
/// String form: `knn:k=20`, `ridge:lambda=0.01`, `tree:depth=8,min_leaf=1`,
/// `subbag-tree:depth=8,bag=250,bags=50,seed=0,clip=1`, `zero`, `mean`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AlgorithmSpec {
    Knn { k: usize },
    Ridge { lambda: f64 },
    Tree { max_depth: usize, min_leaf: usize },
    SubbagTree { max_depth: usize, min_leaf: usize, bag_size: usize, bags: usize, seed: u64, clip: bool },
    Zero,
    Mean,
}

impl AlgorithmSpec {
    pub fn build(&self) -> Result<Arc<dyn RegressionAlgorithm>> {
        Ok(match *self {
            AlgorithmSpec::Knn { k } => Arc::new(Knn::new(KnnParams::new(k)?)),
            AlgorithmSpec::Ridge { lambda } => Arc::new(Ridge::new(RidgeParams::new(lambda)?)),
            AlgorithmSpec::Tree { max_depth, min_leaf } => Arc::new(Tree::new(TreeParams::new(max_depth, min_leaf)?)),
            AlgorithmSpec::SubbagTree { max_depth, min_leaf, bag_size, bags, seed, clip } => {
                let tree: Arc<dyn RegressionAlgorithm> = if clip {
                    Arc::new(Clipped { inner: Tree::new(TreeParams::new(max_depth, min_leaf)?), lo: 0.0, hi: 1.0 })
                } else {
                    Arc::new(Tree::new(TreeParams::new(max_depth, min_leaf)?))
                };
                Arc::new(Subbag::new(SubbagParams::new(tree, bag_size, bags, seed)?))
            }
            AlgorithmSpec::Zero => Arc::new(ConstantZero),
            AlgorithmSpec::Mean => Arc::new(MeanResponse),
        })
    }

    /// Short identifier used in file names and CSV rows.
    pub fn tag(&self) -> &'static str {
        match self {
            AlgorithmSpec::Knn { .. } => "knn",
            AlgorithmSpec::Ridge { .. } => "ridge",
            AlgorithmSpec::Tree { .. } => "tree",
            AlgorithmSpec::SubbagTree { .. } => "subbag-tree",
            AlgorithmSpec::Zero => "zero",
            AlgorithmSpec::Mean => "mean",
        }
    }

    /// Output range guaranteed by construction, if any.
    pub fn output_range(&self) -> Option<(f64, f64)> {
        match self {
            AlgorithmSpec::SubbagTree { clip: true, .. } => Some((0.0, 1.0)),
            AlgorithmSpec::Zero => Some((0.0, 0.0)),
            _ => None,
        }
    }
}

impl FromStr for AlgorithmSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut kv = Vec::new();
        for part in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| invalid(format!("expected key=value, got `{part}`")))?;
            kv.push((k.trim(), v.trim()));
        }
        let get = |key: &str| kv.iter().find(|(k, _)| *k == key).map(|(_, v)| *v);
        let num = |key: &str, default: Option<f64>| -> Result<f64> {
            match get(key) {
                Some(v) => v.parse().map_err(|_| invalid(format!("`{key}` must be a number, got `{v}`"))),
                None => default.ok_or_else(|| invalid(format!("`{kind}` requires `{key}=`"))),
            }
        };
        let spec = match kind.trim() {
            "knn" => AlgorithmSpec::Knn { k: num("k", Some(20.0))? as usize },
            "ridge" => AlgorithmSpec::Ridge { lambda: num("lambda", Some(0.01))? },
            "tree" => AlgorithmSpec::Tree {
                max_depth: num("depth", Some(8.0))? as usize,
                min_leaf: num("min_leaf", Some(1.0))? as usize,
            },
            "subbag-tree" => AlgorithmSpec::SubbagTree {
                max_depth: num("depth", Some(8.0))? as usize,
                min_leaf: num("min_leaf", Some(1.0))? as usize,
                bag_size: num("bag", None)? as usize,
                bags: num("bags", Some(50.0))? as usize,
                seed: num("seed", Some(0.0))? as u64,
                clip: num("clip", Some(0.0))? != 0.0,
            },
            "zero" => AlgorithmSpec::Zero,
            "mean" => AlgorithmSpec::Mean,
            other => return Err(invalid(format!("unknown algorithm `{other}`"))),
        };
        let known: &[&str] = match spec {
            AlgorithmSpec::Knn { .. } => &["k"],
            AlgorithmSpec::Ridge { .. } => &["lambda"],
            AlgorithmSpec::Tree { .. } => &["depth", "min_leaf"],
            AlgorithmSpec::SubbagTree { .. } => &["depth", "min_leaf", "bag", "bags", "seed", "clip"],
            AlgorithmSpec::Zero | AlgorithmSpec::Mean => &[],
        };
        if let Some((k, _)) = kv.iter().find(|(k, _)| !known.contains(k)) {
            return Err(invalid(format!("unknown parameter `{k}` for `{kind}`")));
        }
        Ok(spec)
    }
}

impl fmt::Display for AlgorithmSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlgorithmSpec::Knn { k } => write!(f, "knn:k={k}"),
            AlgorithmSpec::Ridge { lambda } => write!(f, "ridge:lambda={lambda}"),
            AlgorithmSpec::Tree { max_depth, min_leaf } => write!(f, "tree:depth={max_depth},min_leaf={min_leaf}"),
            AlgorithmSpec::SubbagTree { max_depth, min_leaf, bag_size, bags, seed, clip } => write!(
                f,
                "subbag-tree:depth={max_depth},min_leaf={min_leaf},bag={bag_size},bags={bags},seed={seed},clip={}",
                u8::from(*clip)
            ),
            AlgorithmSpec::Zero => f.write_str("zero"),
            AlgorithmSpec::Mean => f.write_str("mean"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_strings_round_trip() {
        for s in ["knn:k=20", "ridge:lambda=0.01", "tree:depth=8,min_leaf=1", "subbag-tree:depth=3,min_leaf=2,bag=50,bags=50,seed=7,clip=1", "zero", "mean"] {
            let spec: AlgorithmSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert!("knn:kk=3".parse::<AlgorithmSpec>().is_err());
        assert!("svm".parse::<AlgorithmSpec>().is_err());
        assert!("subbag-tree:depth=3".parse::<AlgorithmSpec>().is_err());
    }

    #[test]
    fn clipped_clamps() {
        let alg = Clipped { inner: MeanResponse, lo: 0.0, hi: 1.0 };
        let ds = Dataset::from_pairs(&[(0.0, 3.0), (1.0, 5.0)]).unwrap();
        assert_eq!(alg.fit(&ds).unwrap().predict(&[0.5]), 1.0);
    }

    #[test]
    fn mean_response_is_order_free() {
        let a = Dataset::from_pairs(&[(0.0, 0.1), (1.0, 0.2), (2.0, 0.3)]).unwrap();
        let b = Dataset::from_pairs(&[(2.0, 0.3), (0.0, 0.1), (1.0, 0.2)]).unwrap();
        let pa = MeanResponse.fit(&a).unwrap().predict(&[0.0]);
        let pb = MeanResponse.fit(&b).unwrap().predict(&[0.0]);
        assert_eq!(pa.to_bits(), pb.to_bits());
    }
}
