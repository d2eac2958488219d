//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line for each,
//! and exits non-zero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;

use stabconf::conformal::{full_conformal, GridSpec};
use stabconf::experiments::coverage::{
    compare_with_bound, matched_bound, miscoverage_distribution, BoundPlan, CoverageMethod, CoverageSetup,
    MiscoverageSample,
};
use stabconf::experiments::DistributionSpec;
use stabconf::guarantees::bound_split_conformal;
use stabconf::quantile::{conformal_level, conformal_quantile, ExtendedReal};
use stabconf::regressors::{AlgorithmSpec, ConstantZero, Knn, KnnParams, Ridge, RidgeParams};
use stabconf::stability::{
    bagging_stability_bound, combined_stderr, estimate_stability, knn_stability_bound, mean_and_stderr,
    stability_curve, StabilityVariant,
};
use stabconf::{derive_stream, Dataset, RegressionAlgorithm};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("quantile oracle", c01_quantile_oracle),
        ("learner symmetry", c02_symmetry),
        ("marginal coverage", c03_marginal_coverage),
        ("split training-conditional bound", c04_split_tail),
        ("knn stability bound", c05_knn_bound),
        ("bagging stability bound", c06_bagging_bound),
        ("1-vs-m composite bound", c07_composite_bound),
        ("swap vs add/remove", c08_swap),
        ("stability curve shape", c09_figure1),
        ("jackknife+ theorem end to end", c10_jplus_theorem),
        ("cli determinism", c11_cli_determinism),
        ("full conformal oracle", c12_full_conformal_oracle),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let secs = start.elapsed().as_secs_f64();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} [{tag}] {name} ({secs:.1}s): {}", i + 1, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn c01_quantile_oracle() -> Outcome {
    let mut rng = derive_stream(101, 0);
    let mut mismatches = 0;
    for case in 0..10_000 {
        let n = rng.random_range(1..=40usize);
        // coarse values so ties are common
        let v: Vec<f64> = (0..n).map(|_| (rng.random_range(-20..20) as f64) / 4.0).collect();
        let mut sorted = v.clone();
        sorted.sort_by(f64::total_cmp);
        let (tau, rank) = if case % 2 == 0 {
            let k = rng.random_range(0..=n + 1);
            let tau = k as f64 / n as f64;
            (tau, k)
        } else {
            let tau: f64 = rng.random_range(0.0..1.1);
            (tau, (tau * n as f64).ceil() as usize)
        };
        let expected = if rank > n {
            ExtendedReal::PosInf
        } else {
            ExtendedReal::Finite(sorted[rank.max(1) - 1])
        };
        if conformal_quantile(&v, tau).unwrap() != expected {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("10000 instances, {mismatches} mismatches"))
}

fn symmetry_learners() -> Vec<(&'static str, std::sync::Arc<dyn RegressionAlgorithm>)> {
    let specs = [
        "knn:k=3",
        "ridge:lambda=0.1",
        "tree:depth=4,min_leaf=1",
        "subbag-tree:depth=3,min_leaf=1,bag=8,bags=10,seed=5,clip=0",
    ];
    specs.iter().map(|s| (*s, s.parse::<AlgorithmSpec>().unwrap().build().unwrap())).collect()
}

fn c02_symmetry() -> Outcome {
    let learners = symmetry_learners();
    let mut rng = derive_stream(202, 0);
    let mut broken = Vec::new();
    for _ in 0..100 {
        let d = rng.random_range(1..=3usize);
        let n = rng.random_range(12..=30usize);
        let mut pts: Vec<(Vec<f64>, f64)> = (0..n)
            .map(|_| {
                // x on a coarse grid to force distance ties and duplicate x
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(0..5) as f64 / 4.0).collect();
                (x, rng.random_range(-1.0..1.0))
            })
            .collect();
        let probes: Vec<Vec<f64>> = (0..5).map(|_| (0..d).map(|_| rng.random_range(-0.2..1.2)).collect()).collect();
        let build = |pts: &[(Vec<f64>, f64)]| {
            let mut ds = Dataset::new(d).unwrap();
            for (x, y) in pts {
                ds.push(x, *y).unwrap();
            }
            ds
        };
        let base = build(&pts);
        let reference: Vec<Vec<u64>> = learners
            .iter()
            .map(|(_, a)| {
                let p = a.fit(&base).unwrap();
                probes.iter().map(|x| p.predict(x).to_bits()).collect()
            })
            .collect();
        for _ in 0..100 {
            pts.shuffle(&mut rng);
            let ds = build(&pts);
            for ((name, a), want) in learners.iter().zip(&reference) {
                let p = a.fit(&ds).unwrap();
                let got: Vec<u64> = probes.iter().map(|x| p.predict(x).to_bits()).collect();
                if &got != want && !broken.contains(name) {
                    broken.push(*name);
                }
            }
        }
    }
    outcome(broken.is_empty(), format!("100 datasets x 100 permutations x 4 learners, asymmetric: {broken:?}"))
}

fn mean_se(samples: &[MiscoverageSample]) -> (f64, f64) {
    mean_and_stderr(&samples.iter().map(|s| s.alpha_hat).collect::<Vec<_>>())
}

fn split_samples() -> Vec<MiscoverageSample> {
    let dist = DistributionSpec::SineMixture { d: 5 };
    let alg = Ridge::new(RidgeParams::new(1.0).unwrap());
    let setup = CoverageSetup {
        method: CoverageMethod::Split,
        alg: &alg,
        dist: &dist,
        alpha: 0.2,
        gamma: 0.0,
        n: 200,
        n_test: 1000,
        grid_count: 2,
    };
    miscoverage_distribution(&setup, 500, 303).unwrap()
}

fn c03_marginal_coverage() -> Outcome {
    let (m_split, se_split) = mean_se(&split_samples());
    let dist = DistributionSpec::SineMixture { d: 5 };
    let alg = Ridge::new(RidgeParams::new(1.0).unwrap());
    let setup = CoverageSetup {
        method: CoverageMethod::Jplus,
        alg: &alg,
        dist: &dist,
        alpha: 0.2,
        gamma: 0.0,
        n: 100,
        n_test: 1000,
        grid_count: 2,
    };
    let (m_jp, se_jp) = mean_se(&miscoverage_distribution(&setup, 500, 304).unwrap());
    let ok_split = m_split <= 0.2 + 3.0 * se_split;
    let ok_jp = m_jp <= 0.4 + 3.0 * se_jp;
    outcome(
        ok_split && ok_jp,
        format!(
            "split mean {m_split:.4} (se {se_split:.4}) vs 0.2; jackknife+ mean {m_jp:.4} (se {se_jp:.4}) vs 0.4"
        ),
    )
}

fn c04_split_tail() -> Outcome {
    let samples = split_samples();
    let report = bound_split_conformal(0.2, 0.05, 100).unwrap();
    let t = samples.len() as f64;
    let freq = samples.iter().filter(|s| s.alpha_hat > report.threshold).count() as f64 / t;
    let se = (freq * (1.0 - freq) / t).sqrt();
    outcome(
        freq <= 0.05 + 3.0 * se,
        format!("threshold {:.4}, exceed frequency {freq:.4} (se {se:.4}) vs 0.05", report.threshold),
    )
}

fn c05_knn_bound() -> Outcome {
    let dist = DistributionSpec::CustomBounded { d: 3 };
    let alg = Knn::new(KnnParams::new(10).unwrap());
    let b_y = dist.b_y().unwrap();
    let mut worst = f64::NEG_INFINITY;
    let mut ok = true;
    for variant in [StabilityVariant::OUT, StabilityVariant::IN] {
        for m in [1, 5, 10, 25] {
            let e = estimate_stability(&alg, &dist, variant, 100, m, 1000, 505).unwrap();
            let bound = knn_stability_bound(b_y, m, 100);
            ok &= e.mean <= bound + 3.0 * e.stderr;
            worst = worst.max(e.mean / bound);
        }
    }
    outcome(ok, format!("out and in, m in {{1,5,10,25}}, max beta_hat/bound = {worst:.3}"))
}

fn c06_bagging_bound() -> Outcome {
    let dist = DistributionSpec::CustomBounded { d: 3 };
    let spec = AlgorithmSpec::SubbagTree { max_depth: 8, min_leaf: 1, bag_size: 50, bags: 50, seed: 606, clip: true };
    let alg = spec.build().unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for m in [1, 4, 9] {
        let e = estimate_stability(&*alg, &dist, StabilityVariant::OUT, 100, m, 500, 606).unwrap();
        let bound = bagging_stability_bound(100, 50, m, 50).unwrap();
        ok &= e.mean <= bound + 3.0 * e.stderr;
        parts.push(format!("m={m}: {:.4} <= {bound:.4}", e.mean));
    }
    outcome(ok, parts.join(", "))
}

fn c07_composite_bound() -> Outcome {
    let dist = DistributionSpec::SineMixture { d: 5 };
    let m_list: Vec<usize> = (1..=10).collect();
    let knn = Knn::new(KnnParams::new(10).unwrap());
    let ridge = Ridge::new(RidgeParams::new(0.1).unwrap());
    let algs: [(&str, &dyn RegressionAlgorithm); 2] = [("knn", &knn), ("ridge", &ridge)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, alg) in algs {
        let curve = stability_curve(alg, &dist, StabilityVariant::OUT, 100, &m_list, 1000, 707).unwrap();
        let mut worst = f64::NEG_INFINITY;
        for p in &curve {
            ok &= p.estimate.mean <= p.lemma_bound + 3.0 * p.combined_stderr();
            worst = worst.max(p.estimate.mean / p.lemma_bound);
        }
        parts.push(format!("{name} max beta_hat/bound {worst:.3}"));
    }
    outcome(ok, parts.join(", "))
}

fn c08_swap() -> Outcome {
    let dist = DistributionSpec::SineMixture { d: 5 };
    let knn = Knn::new(KnnParams::new(10).unwrap());
    let ridge = Ridge::new(RidgeParams::new(0.1).unwrap());
    let algs: [(&str, &dyn RegressionAlgorithm); 2] = [("knn", &knn), ("ridge", &ridge)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, alg) in algs {
        let add = estimate_stability(alg, &dist, StabilityVariant::OUT, 100, 5, 1000, 808).unwrap();
        let swap = estimate_stability(alg, &dist, StabilityVariant::SWAP_OUT, 100, 5, 1000, 809).unwrap();
        ok &= swap.mean <= 2.0 * add.mean + 3.0 * combined_stderr(swap.stderr, 2.0 * add.stderr);
        parts.push(format!("{name}: swap {:.4} vs 2x add {:.4}", swap.mean, 2.0 * add.mean));
    }
    outcome(ok, parts.join(", "))
}

/// kNN within 15% of the composite bound and ridge at most 0.8 of it, at
/// `m = 25`.
fn figure1_shape(n: usize, trials: usize, seed: u64) -> (bool, String) {
    let dist = DistributionSpec::SineMixture { d: 40 };
    let knn = Knn::new(KnnParams::new(20).unwrap());
    let ridge = Ridge::new(RidgeParams::new(0.01).unwrap());
    let m_list: Vec<usize> = (1..=25).collect();
    let k = stability_curve(&knn, &dist, StabilityVariant::OUT, n, &m_list, trials, seed).unwrap();
    let r = stability_curve(&ridge, &dist, StabilityVariant::OUT, n, &m_list, trials, seed).unwrap();
    let (k25, r25) = (k[24], r[24]);
    let k_rel = (k25.lemma_bound - k25.estimate.mean).abs() / k25.lemma_bound;
    let r_ratio = r25.estimate.mean / r25.lemma_bound;
    (
        k_rel <= 0.15 && r_ratio <= 0.8,
        format!("n={n}: knn gap {:.1}%, ridge ratio {r_ratio:.3}", 100.0 * k_rel),
    )
}

fn c09_figure1() -> Outcome {
    let (desk_ok, desk) = figure1_shape(100, 200, 909);
    let (full_ok, full) = figure1_shape(500, 1000, 910);
    outcome(desk_ok && full_ok, format!("{desk}; {full}"))
}

fn c10_jplus_theorem() -> Outcome {
    let dist = DistributionSpec::SineMixture { d: 5 };
    let alg = Ridge::new(RidgeParams::new(1.0).unwrap());
    let setup = CoverageSetup {
        method: CoverageMethod::Jplus,
        alg: &alg,
        dist: &dist,
        alpha: 0.2,
        gamma: 0.2,
        n: 100,
        n_test: 1000,
        grid_count: 2,
    };
    let samples = miscoverage_distribution(&setup, 300, 1010).unwrap();
    let plan = BoundPlan { delta: 0.1, m: 50, stability_trials: 1000, b_dens: dist.b_dens() };
    let (report, beta) = matched_bound(&setup, &plan, 1010).unwrap();
    let c = compare_with_bound(&samples, report, beta);
    let beta = c.beta_hat.unwrap();
    outcome(
        c.holds(3.0) && beta.n == 99 && beta.m == 50,
        format!(
            "beta_hat_out(50,99) {:.4}, threshold {:.4}, failure prob {:.4}{}, exceed {:.4} (se {:.4})",
            beta.mean,
            c.report.threshold,
            c.report.failure_prob,
            if c.report.vacuous { " (vacuous)" } else { "" },
            c.exceed_freq,
            c.exceed_stderr
        ),
    )
}

fn run_cli(args: &[&str], workers: usize) -> bool {
    Command::new(env!("CARGO_BIN_EXE_stabconf"))
        .args(args)
        .arg("--workers")
        .arg(workers.to_string())
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}

fn c11_cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let runs: Vec<(Vec<String>, Vec<&str>)> = vec![
        (
            vec![
                "stability", "--alg", "knn:k=5", "--dist", "sine:d=5", "--variant", "out", "--n", "60", "--m-list",
                "1,3,5", "--trials", "200", "--seed", "11", "--out",
            ]
            .into_iter()
            .map(String::from)
            .collect(),
            vec!["stab.csv"],
        ),
        (
            vec![
                "coverage", "--method", "jplus", "--alg", "ridge:lambda=1", "--dist", "sine:d=5", "--alpha", "0.2",
                "--gamma", "0.1", "--n", "40", "--n-test", "300", "--trials", "40", "--seed", "12",
                "--compare-bound", "--m", "20", "--stability-trials", "100", "--out",
            ]
            .into_iter()
            .map(String::from)
            .collect(),
            vec!["cov.csv", "cov.json"],
        ),
    ];
    let mut ok = true;
    let mut compared = 0;
    for (args, files) in &runs {
        let mut outputs: Vec<Vec<Vec<u8>>> = Vec::new();
        for (rep, workers) in [(0, 1), (1, 8), (2, 1), (3, 8)] {
            let stem = format!("r{rep}_{}", files[0]);
            let mut a: Vec<&str> = args.iter().map(String::as_str).collect();
            let out = p(&stem);
            a.push(&out);
            ok &= run_cli(&a, workers);
            outputs.push(
                files
                    .iter()
                    .map(|f| {
                        let path = Path::new(&out).with_extension(Path::new(f).extension().unwrap());
                        std::fs::read(path).unwrap_or_default()
                    })
                    .collect(),
            );
        }
        ok &= outputs.iter().all(|o| o == &outputs[0]) && outputs[0].iter().all(|b| !b.is_empty());
        compared += files.len();
    }
    outcome(ok, format!("{compared} output files byte-identical across 4 runs at 1 and 8 workers"))
}

fn c12_full_conformal_oracle() -> Outcome {
    let mut rng = derive_stream(1212, 0);
    let mut bad = 0;
    for _ in 0..100 {
        let n = rng.random_range(3..=30usize);
        let alpha: f64 = rng.random_range(0.05..0.5);
        let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut train = Dataset::new(1).unwrap();
        for &y in &ys {
            train.push(&[rng.random::<f64>()], y).unwrap();
        }
        let grid = GridSpec::covering(&train, 801).unwrap();
        let set = full_conformal(&train, &ConstantZero, alpha, 0.0, &[0.5], &grid).unwrap();
        let abs: Vec<f64> = ys.iter().map(|y| y.abs()).collect();
        let pass = match conformal_quantile(&abs, conformal_level(alpha, n)).unwrap() {
            ExtendedReal::Finite(q) => {
                set.intervals.len() == 1
                    && (set.intervals[0].lo.to_f64() + q).abs() <= grid.step()
                    && (set.intervals[0].hi.to_f64() - q).abs() <= grid.step()
            }
            _ => {
                set.intervals.len() == 1
                    && set.intervals[0].lo.to_f64() <= grid.lo
                    && set.intervals[0].hi.to_f64() >= grid.hi
            }
        };
        if !pass {
            bad += 1;
        }
    }
    outcome(bad == 0, format!("100 cases, {bad} outside one grid step of [-q, q]"))
}
