use std::sync::Arc;

use rand::seq::index;

use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;

use super::{Predictor, RegressionAlgorithm};

#[derive(Clone)]
pub struct SubbagParams {
    pub base: Arc<dyn RegressionAlgorithm>,
    /// Bag size `N`.
    pub bag_size: usize,
    /// Number of bags `B`.
    pub bags: usize,
    pub bag_seed: u64,
}

impl SubbagParams {
    pub fn new(base: Arc<dyn RegressionAlgorithm>, bag_size: usize, bags: usize, bag_seed: u64) -> Result<Self> {
        if bag_size == 0 {
            return Err(invalid("bag size must be >= 1"));
        }
        if bags == 0 {
            return Err(invalid("bag count must be >= 1"));
        }
        Ok(Self { base, bag_size, bags, bag_seed })
    }
}

impl std::fmt::Debug for SubbagParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SubbagParams")
            .field("base", &self.base.name())
            .field("bag_size", &self.bag_size)
            .field("bags", &self.bags)
            .field("bag_seed", &self.bag_seed)
            .finish()
    }
}

/// Subbagging: average of `B` base fits on size-`N` subsamples drawn without
/// replacement.
#[derive(Debug, Clone)]
pub struct Subbag {
    pub params: SubbagParams,
}

impl Subbag {
    pub fn new(params: SubbagParams) -> Self {
        Self { params }
    }
}

impl RegressionAlgorithm for Subbag {
    fn name(&self) -> String {
        format!("subbag(N={},B={},{})", self.params.bag_size, self.params.bags, self.params.base.name())
    }

    fn fit(&self, train: &Dataset) -> Result<Predictor> {
        fit_subbag(train, &self.params)
    }
}

/// Index sets into the canonical order of `train`, one per bag, each sorted.
///
/// The sampling stream is keyed by `bag_seed` and the dataset's
/// order-invariant digest, so the bags depend only on the multiset.
pub fn draw_bags(train: &Dataset, params: &SubbagParams) -> Result<Vec<Vec<usize>>> {
    let n = train.len();
    if params.bag_size >= n {
        return Err(Error::BagSizeTooLarge { bag_size: params.bag_size, n });
    }
    let mut rng = RngStream::new(params.bag_seed, train.digest());
    Ok((0..params.bags)
        .map(|_| {
            let mut bag = index::sample(&mut rng, n, params.bag_size).into_vec();
            bag.sort_unstable();
            bag
        })
        .collect())
}

pub fn fit_subbag(train: &Dataset, params: &SubbagParams) -> Result<Predictor> {
    let bags = draw_bags(train, params)?;
    let canon = train.canonical();
    let fits = bags
        .iter()
        .map(|bag| params.base.fit(&canon.select(bag)))
        .collect::<Result<Vec<_>>>()?;
    let name = format!("subbag(N={},B={},{})", params.bag_size, params.bags, params.base.name());
    let model = move |x: &[f64]| -> f64 { fits.iter().map(|p| p.predict(x)).sum::<f64>() / fits.len() as f64 };
    Ok(Predictor::new(model, train.len(), name))
}
