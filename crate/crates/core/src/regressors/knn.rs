use std::cmp::Ordering;

use crate::data::Dataset;
use crate::error::{invalid, Error, Result};

use super::{Predictor, RegressionAlgorithm};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KnnParams {
    pub k: usize,
}

impl KnnParams {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(invalid("k must be >= 1"));
        }
        Ok(Self { k })
    }
}

/// k-nearest neighbours regression in Euclidean distance.
#[derive(Debug, Clone, Copy)]
pub struct Knn {
    pub params: KnnParams,
}

impl Knn {
    pub fn new(params: KnnParams) -> Self {
        Self { params }
    }
}

impl RegressionAlgorithm for Knn {
    fn name(&self) -> String {
        format!("knn(k={})", self.params.k)
    }

    fn fit(&self, train: &Dataset) -> Result<Predictor> {
        fit_knn(train, self.params)
    }
}

/// Mean response of the `k` nearest training points. Distance ties are broken
/// towards the smaller index in the canonical order.
pub fn fit_knn(train: &Dataset, params: KnnParams) -> Result<Predictor> {
    let n = train.len();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if params.k > n {
        return Err(Error::KExceedsSampleSize { k: params.k, n });
    }
    let canon = train.canonical();
    let k = params.k;
    let name = format!("knn(k={k})");
    let model = move |x: &[f64]| -> f64 {
        let mut dist: Vec<(f64, usize)> = canon
            .iter()
            .enumerate()
            .map(|(i, (xi, _))| (xi.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        let by_dist = |a: &(f64, usize), b: &(f64, usize)| -> Ordering { a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)) };
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, by_dist);
        }
        let mut nearest: Vec<usize> = dist[..k].iter().map(|&(_, i)| i).collect();
        nearest.sort_unstable();
        nearest.iter().map(|&i| canon.y(i)).sum::<f64>() / k as f64
    };
    Ok(Predictor::new(model, n, name))
}
