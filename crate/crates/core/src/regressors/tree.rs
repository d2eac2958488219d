use crate::data::Dataset;
use crate::error::{invalid, Error, Result};

use super::{Predictor, RegressionAlgorithm};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl TreeParams {
    pub fn new(max_depth: usize, min_leaf: usize) -> Result<Self> {
        if max_depth == 0 {
            return Err(invalid("max_depth must be >= 1"));
        }
        if min_leaf == 0 {
            return Err(invalid("min_leaf must be >= 1"));
        }
        Ok(Self { max_depth, min_leaf })
    }
}

/// CART regression tree grown greedily on squared error.
#[derive(Debug, Clone, Copy)]
pub struct Tree {
    pub params: TreeParams,
}

impl Tree {
    pub fn new(params: TreeParams) -> Self {
        Self { params }
    }
}

impl RegressionAlgorithm for Tree {
    fn name(&self) -> String {
        format!("tree(depth={},min_leaf={})", self.params.max_depth, self.params.min_leaf)
    }

    fn fit(&self, train: &Dataset) -> Result<Predictor> {
        fit_tree(train, self.params)
    }
}

#[derive(Debug, Clone, Copy)]
enum Node {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub(crate) struct FittedTree {
    nodes: Vec<Node>,
}

impl FittedTree {
    pub(crate) fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    #[cfg(test)]
    pub(crate) fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }
}

struct Best {
    score: f64,
    feature: usize,
    threshold: f64,
}

struct Builder<'a> {
    data: &'a Dataset,
    params: TreeParams,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    /// `idx` is ascending in canonical order; every split keeps it that way.
    fn grow(&mut self, idx: &[usize], depth: usize) -> usize {
        let at = self.nodes.len();
        let sum: f64 = idx.iter().map(|&i| self.data.y(i)).sum();
        let mean = sum / idx.len() as f64;
        self.nodes.push(Node::Leaf(mean));

        let first = self.data.y(idx[0]);
        let pure = idx.iter().all(|&i| self.data.y(i) == first);
        if depth >= self.params.max_depth || idx.len() < 2 * self.params.min_leaf || pure {
            return at;
        }
        let Some(best) = self.best_split(idx, sum) else {
            return at;
        };
        let (left, right): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| self.data.x(i)[best.feature] <= best.threshold);
        let l = self.grow(&left, depth + 1);
        let r = self.grow(&right, depth + 1);
        self.nodes[at] = Node::Split { feature: best.feature, threshold: best.threshold, left: l, right: r };
        at
    }

    /// Maximises `S_L²/n_L + S_R²/n_R`, which is equivalent to minimising the
    /// children's summed squared error. Ties keep the first candidate found
    /// (lowest feature, then lowest threshold).
    fn best_split(&self, idx: &[usize], total: f64) -> Option<Best> {
        let n = idx.len();
        let min_leaf = self.params.min_leaf;
        let parent = total * total / n as f64;
        let sumsq: f64 = idx.iter().map(|&i| self.data.y(i).powi(2)).sum();
        let tol = 1e-12 * sumsq.max(f64::MIN_POSITIVE);
        let mut best: Option<Best> = None;
        let mut order: Vec<usize> = idx.to_vec();
        for feature in 0..self.data.dim() {
            order.copy_from_slice(idx);
            order.sort_by(|&a, &b| self.data.x(a)[feature].total_cmp(&self.data.x(b)[feature]));
            let mut left_sum = 0.0;
            for split in 1..n {
                left_sum += self.data.y(order[split - 1]);
                if split < min_leaf || n - split < min_leaf {
                    continue;
                }
                let lo = self.data.x(order[split - 1])[feature];
                let hi = self.data.x(order[split])[feature];
                if lo >= hi {
                    continue;
                }
                let right_sum = total - left_sum;
                let score = left_sum * left_sum / split as f64 + right_sum * right_sum / (n - split) as f64;
                if score <= parent + tol {
                    continue;
                }
                if best.as_ref().is_none_or(|b| score > b.score) {
                    let mut threshold = 0.5 * (lo + hi);
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(Best { score, feature, threshold });
                }
            }
        }
        best
    }
}

pub(crate) fn grow_tree(train: &Dataset, params: TreeParams) -> Result<FittedTree> {
    if train.is_empty() {
        return Err(Error::EmptySample);
    }
    let canon = train.canonical();
    let idx: Vec<usize> = (0..canon.len()).collect();
    let mut builder = Builder { data: &canon, params, nodes: Vec::new() };
    builder.grow(&idx, 0);
    Ok(FittedTree { nodes: builder.nodes })
}

/// Leaves predict the mean response; internal nodes send `x_j <= t` left,
/// with thresholds at midpoints between consecutive distinct feature values.
pub fn fit_tree(train: &Dataset, params: TreeParams) -> Result<Predictor> {
    let tree = grow_tree(train, params)?;
    let name = format!("tree(depth={},min_leaf={})", params.max_depth, params.min_leaf);
    Ok(Predictor::new(move |x: &[f64]| tree.predict(x), train.len(), name))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Best single split by brute force: every feature, every cut between
    /// sorted distinct values, SSE recomputed from scratch.
    fn exhaustive_stump(ds: &Dataset, min_leaf: usize) -> Option<(usize, f64, f64, f64)> {
        let sse = |ys: &[f64]| {
            let m = ys.iter().sum::<f64>() / ys.len() as f64;
            ys.iter().map(|y| (y - m) * (y - m)).sum::<f64>()
        };
        let mut best: Option<(f64, usize, f64, f64, f64)> = None;
        for j in 0..ds.dim() {
            let mut vals: Vec<f64> = (0..ds.len()).map(|i| ds.x(i)[j]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let t = 0.5 * (w[0] + w[1]);
                let l: Vec<f64> = (0..ds.len()).filter(|&i| ds.x(i)[j] <= t).map(|i| ds.y(i)).collect();
                let r: Vec<f64> = (0..ds.len()).filter(|&i| ds.x(i)[j] > t).map(|i| ds.y(i)).collect();
                if l.len() < min_leaf || r.len() < min_leaf {
                    continue;
                }
                let total = sse(&l) + sse(&r);
                if best.is_none_or(|b| total < b.0 - 1e-12) {
                    let ml = l.iter().sum::<f64>() / l.len() as f64;
                    let mr = r.iter().sum::<f64>() / r.len() as f64;
                    best = Some((total, j, t, ml, mr));
                }
            }
        }
        best.map(|(_, j, t, ml, mr)| (j, t, ml, mr))
    }

    #[test]
    fn constant_response() {
        let ds = Dataset::from_pairs(&[(0.0, 2.5), (1.0, 2.5), (3.0, 2.5), (-1.0, 2.5)]).unwrap();
        for depth in [1, 3, 8] {
            let p = fit_tree(&ds, TreeParams::new(depth, 1).unwrap()).unwrap();
            for q in [-5.0, 0.5, 2.0, 9.0] {
                assert_eq!(p.predict(&[q]), 2.5);
            }
        }
    }

    #[test]
    fn two_point_stump() {
        let ds = Dataset::from_pairs(&[(0.0, 0.0), (1.0, 1.0)]).unwrap();
        let p = fit_tree(&ds, TreeParams::new(1, 1).unwrap()).unwrap();
        assert_eq!(p.predict(&[0.0]), 0.0);
        assert_eq!(p.predict(&[1.0]), 1.0);
        assert_eq!(exhaustive_stump(&ds, 1).unwrap().1, 0.5);
    }

    #[test]
    fn isolates_outlier() {
        let ds = Dataset::from_pairs(&[(0.0, 0.0), (0.4, 0.0), (1.0, 10.0)]).unwrap();
        let p = fit_tree(&ds, TreeParams::new(1, 1).unwrap()).unwrap();
        assert_eq!(p.predict(&[1.0]), 10.0);
        assert_eq!(p.predict(&[0.4]), 0.0);
        let (j, t, _, mr) = exhaustive_stump(&ds, 1).unwrap();
        assert_eq!((j, t, mr), (0, 0.7, 10.0));
    }

    #[test]
    fn stump_matches_exhaustive_enumeration() {
        use rand::Rng;
        let mut rng = crate::rng::derive_stream(11, 0);
        for _ in 0..200 {
            let d = rng.random_range(1..4);
            let n = rng.random_range(2..15);
            let min_leaf = rng.random_range(1..3);
            let mut ds = Dataset::new(d).unwrap();
            for _ in 0..n {
                let x: Vec<f64> = (0..d).map(|_| (rng.random_range(0..6) as f64) * 0.5).collect();
                ds.push(&x, rng.random_range(-3.0..3.0)).unwrap();
            }
            let p = fit_tree(&ds, TreeParams::new(1, min_leaf).unwrap()).unwrap();
            match exhaustive_stump(&ds, min_leaf) {
                Some((j, t, ml, mr)) => {
                    let mut q = vec![0.0; d];
                    q[j] = t - 0.01;
                    let got_l = p.predict(&q);
                    q[j] = t + 0.01;
                    let got_r = p.predict(&q);
                    // the chosen split may be a different but equally good one;
                    // compare the achieved SSE instead of the split identity
                    let tree = grow_tree(&ds, TreeParams::new(1, min_leaf).unwrap()).unwrap();
                    let sse_tree: f64 = ds.iter().map(|(x, y)| (y - tree.predict(x)).powi(2)).sum();
                    let sse_best: f64 = ds
                        .iter()
                        .map(|(x, y)| (y - if x[j] <= t { ml } else { mr }).powi(2))
                        .sum();
                    assert!((sse_tree - sse_best).abs() < 1e-9, "{sse_tree} vs {sse_best} ({got_l}, {got_r})");
                }
                None => {
                    let mean = ds.ys().iter().sum::<f64>() / n as f64;
                    assert!((p.predict(&vec![0.0; d]) - mean).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn respects_depth_and_leaf_size() {
        use rand::Rng;
        let mut rng = crate::rng::derive_stream(5, 0);
        let mut ds = Dataset::new(2).unwrap();
        for _ in 0..200 {
            let x = [rng.random::<f64>(), rng.random::<f64>()];
            ds.push(&x, (6.0 * x[0]).sin() + x[1] + 0.1 * rng.random::<f64>()).unwrap();
        }
        for depth in 1..6 {
            let tree = grow_tree(&ds, TreeParams::new(depth, 7).unwrap()).unwrap();
            assert!(tree.depth() <= depth);
            let mut counts = std::collections::HashMap::new();
            for (x, _) in ds.iter() {
                *counts.entry(tree.predict(x).to_bits()).or_insert(0usize) += 1;
            }
            assert!(counts.values().all(|&c| c >= 7));
        }
    }
}
