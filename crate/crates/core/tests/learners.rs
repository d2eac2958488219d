use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use stabconf::regressors::{fit_knn, fit_ridge, fit_tree, AlgorithmSpec, KnnParams, RidgeParams, TreeParams};
use stabconf::{derive_stream, Dataset};

fn random_dataset(seed: u64, n: usize, d: usize, coarse: bool) -> Dataset {
    let mut rng = derive_stream(seed, 0);
    let mut ds = Dataset::new(d).unwrap();
    for _ in 0..n {
        let x: Vec<f64> = (0..d)
            .map(|_| if coarse { rng.random_range(0..4) as f64 / 3.0 } else { rng.random::<f64>() })
            .collect();
        ds.push(&x, rng.random_range(-2.0..2.0)).unwrap();
    }
    ds
}

fn shuffled(ds: &Dataset, seed: u64) -> Dataset {
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    idx.shuffle(&mut derive_stream(seed, 1));
    ds.select(&idx)
}

#[test]
fn all_learners_are_permutation_symmetric() {
    let specs = [
        "knn:k=4",
        "ridge:lambda=0.05",
        "tree:depth=5,min_leaf=2",
        "subbag-tree:depth=4,min_leaf=1,bag=10,bags=8,seed=3,clip=0",
    ];
    for spec in specs {
        let alg = spec.parse::<AlgorithmSpec>().unwrap().build().unwrap();
        for case in 0..100u64 {
            let ds = random_dataset(case, 20 + (case % 7) as usize, 1 + (case % 3) as usize, case % 2 == 0);
            let mut rng = derive_stream(case, 9);
            let queries: Vec<Vec<f64>> =
                (0..10).map(|_| (0..ds.dim()).map(|_| rng.random_range(-0.5..1.5)).collect()).collect();
            let base = alg.fit(&ds).unwrap();
            let want: Vec<u64> = queries.iter().map(|q| base.predict(q).to_bits()).collect();
            for p in 0..5 {
                let fit = alg.fit(&shuffled(&ds, case * 100 + p)).unwrap();
                let got: Vec<u64> = queries.iter().map(|q| fit.predict(q).to_bits()).collect();
                assert_eq!(got, want, "{spec} case {case}");
            }
        }
    }
}

proptest! {
    #[test]
    fn knn_and_tree_stay_within_response_range(seed in 0u64..10_000, n in 3usize..30, k in 1usize..3, q in -1.0f64..2.0) {
        let ds = random_dataset(seed, n, 2, seed % 2 == 0);
        let (lo, hi) = (ds.min_y().unwrap(), ds.max_y().unwrap());
        let knn = fit_knn(&ds, KnnParams::new(k).unwrap()).unwrap();
        let tree = fit_tree(&ds, TreeParams::new(4, 1).unwrap()).unwrap();
        for p in [knn.predict(&[q, q]), tree.predict(&[q, 1.0 - q])] {
            prop_assert!(p >= lo - 1e-12 && p <= hi + 1e-12);
        }
    }

    #[test]
    fn ridge_is_linear_in_the_query(seed in 0u64..10_000, a in -5.0f64..5.0, x0 in -1.0f64..1.0, x1 in -1.0f64..1.0) {
        let ds = random_dataset(seed, 15, 2, false);
        let p = fit_ridge(&ds, RidgeParams::new(0.3).unwrap()).unwrap();
        let lhs = p.predict(&[a * x0, a * x1]);
        let rhs = a * p.predict(&[x0, x1]);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
    }
}
