use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use stabconf::conformal::{full_conformal, loo_fit, GridSpec, PredictionSet, SplitConformal};
use stabconf::experiments::config::{DEFAULT_GRID_COUNT, DEFAULT_N_TEST, DEFAULT_TRIALS};
use stabconf::experiments::coverage::{
    compare_with_bound, matched_bound, miscoverage_distribution, BoundPlan, CoverageMethod, CoverageSetup,
    MiscoverageSummary,
};
use stabconf::experiments::output::{sidecar_path, write_coverage_csv, write_json, write_stability_csv, CoverageSidecar};
use stabconf::experiments::{run_figure1, ExperimentConfig, Figure1Config};
use stabconf::guarantees::{evaluate, BoundInputs, Theorem};
use stabconf::stability::stability_curve;
use stabconf::{Dataset, Error, Result};

#[derive(Parser)]
#[command(name = "stabconf", version, about = "Conformal prediction sets, stability estimation and coverage bounds")]
struct Cli {
    /// TOML file with experiment settings; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads (defaults to all cores). Output does not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate an m-stability curve and write it as CSV.
    Stability(StabilityArgs),
    /// Estimate the distribution of training-conditional miscoverage.
    Coverage(CoverageArgs),
    /// Evaluate a coverage bound and print it as JSON.
    Bounds(BoundsArgs),
    /// Stability curves of the four reference learners.
    Figure1(Figure1Args),
    /// Build a prediction set from a training CSV.
    Predict(PredictArgs),
}

#[derive(Args)]
struct StabilityArgs {
    #[arg(long)]
    alg: Option<String>,
    #[arg(long)]
    dist: Option<String>,
    /// out, in, swap-out or swap-in.
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated, strictly ascending.
    #[arg(long, value_delimiter = ',')]
    m_list: Option<Vec<usize>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CoverageArgs {
    /// split, jplus or full_cp.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    alg: Option<String>,
    #[arg(long)]
    dist: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also evaluate the matching coverage bound.
    #[arg(long)]
    compare_bound: bool,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    stability_trials: Option<usize>,
    #[arg(long)]
    grid_count: Option<usize>,
    /// Comma-separated miscoverage levels for tail frequencies.
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
}

#[derive(Args)]
struct BoundsArgs {
    /// split, jplus, jplus-uninflated, full-conformal, alt-jplus,
    /// alt-jplus-uninflated or alt-full-conformal.
    #[arg(long)]
    theorem: String,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    n: usize,
    /// Defaults to `n` (ignored by the split bound).
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    b_dens: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
}

#[derive(Args)]
struct Figure1Args {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    m_max: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    outdir: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    train_file: PathBuf,
    /// split, jplus or full_cp.
    #[arg(long)]
    method: String,
    #[arg(long)]
    alg: String,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    /// Comma-separated test point.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    x: Vec<f64>,
    #[arg(long)]
    grid_count: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(Error::Config("--workers must be >= 1".into()));
        }
        pool = pool.num_threads(w);
    }
    let pool = pool.build().map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| match cli.command {
        Command::Stability(a) => stability(file, a),
        Command::Coverage(a) => coverage(file, a),
        Command::Bounds(a) => bounds(a),
        Command::Figure1(a) => figure1(file, a),
        Command::Predict(a) => predict(a),
    })
}

fn stability(file: ExperimentConfig, a: StabilityArgs) -> Result<()> {
    let cfg = file.merge(ExperimentConfig {
        alg: a.alg,
        dist: a.dist,
        variant: a.variant,
        n: a.n,
        m_list: a.m_list,
        trials: a.trials,
        seed: a.seed,
        out: a.out,
        ..Default::default()
    });
    let seed = cfg.seed()?;
    let spec = cfg.algorithm()?;
    let dist = cfg.distribution()?;
    let variant = cfg.stability_variant()?;
    let n = cfg.require_n()?;
    let out = cfg.require_out()?;
    let m_list = match (&cfg.m_list, cfg.m) {
        (Some(list), _) => list.clone(),
        (None, Some(m)) => vec![m],
        (None, None) => return Err(Error::Config("`m_list` is required".into())),
    };
    let alg = spec.build()?;
    let points = stability_curve(&*alg, &dist, variant, n, &m_list, cfg.trials.unwrap_or(DEFAULT_TRIALS), seed)?;
    write_stability_csv(out, &points, &spec, &dist)
}

fn coverage(file: ExperimentConfig, a: CoverageArgs) -> Result<()> {
    let cfg = file.merge(ExperimentConfig {
        method: a.method,
        alg: a.alg,
        dist: a.dist,
        alpha: a.alpha,
        gamma: a.gamma,
        delta: a.delta,
        n: a.n,
        m: a.m,
        trials: a.trials,
        n_test: a.n_test,
        seed: a.seed,
        out: a.out,
        grid_count: a.grid_count,
        stability_trials: a.stability_trials,
        thresholds: a.thresholds,
        ..Default::default()
    });
    let seed = cfg.seed()?;
    let method = cfg.coverage_method()?;
    let spec = cfg.algorithm()?;
    let dist = cfg.distribution()?;
    let n = cfg.require_n()?;
    let out = cfg.require_out()?;
    let alpha = cfg.alpha.ok_or_else(|| Error::Config("`alpha` is required".into()))?;
    let alg = spec.build()?;
    let setup = CoverageSetup {
        method,
        alg: &*alg,
        dist: &dist,
        alpha,
        gamma: cfg.gamma.unwrap_or(0.0),
        n,
        n_test: cfg.n_test.unwrap_or(DEFAULT_N_TEST),
        grid_count: cfg.grid_count.unwrap_or(DEFAULT_GRID_COUNT),
    };
    let trials = cfg.trials.unwrap_or(DEFAULT_TRIALS);
    let samples = miscoverage_distribution(&setup, trials, seed)?;

    let comparison = if a.compare_bound {
        let plan = BoundPlan {
            delta: cfg.delta.unwrap_or(0.1),
            m: cfg.m.unwrap_or((n / 2).max(1)),
            stability_trials: cfg.stability_trials.unwrap_or(DEFAULT_TRIALS),
            b_dens: dist.b_dens(),
        };
        let (report, beta) = matched_bound(&setup, &plan, seed)?;
        Some(compare_with_bound(&samples, report, beta))
    } else {
        None
    };
    let mut thresholds = cfg.thresholds.clone().unwrap_or_else(|| vec![alpha]);
    if let Some(c) = &comparison {
        thresholds.push(c.report.threshold);
    }
    let summary = MiscoverageSummary::from_samples(&samples, &thresholds);

    write_coverage_csv(out, &samples)?;
    let sidecar = CoverageSidecar {
        method: method.to_string(),
        algorithm: spec.to_string(),
        distribution: dist.to_string(),
        alpha,
        gamma: setup.gamma,
        n,
        n_test: setup.n_test,
        seed,
        trials: 0,
        mean: 0.0,
        stderr: 0.0,
        q50: 0.0,
        q90: 0.0,
        q99: 0.0,
        tail_freqs: Vec::new(),
        bound_threshold: comparison.as_ref().map(|c| c.report.threshold),
        bound_failure_prob: comparison.as_ref().map(|c| c.report.failure_prob),
        bound_vacuous: comparison.as_ref().map(|c| c.report.vacuous),
        beta_hat: comparison.as_ref().and_then(|c| c.beta_hat.map(|b| b.mean)),
        beta_hat_stderr: comparison.as_ref().and_then(|c| c.beta_hat.map(|b| b.stderr)),
        exceed_freq: comparison.as_ref().map(|c| c.exceed_freq),
        exceed_stderr: comparison.as_ref().map(|c| c.exceed_stderr),
    }
    .summary_fields(&summary);
    write_json(&sidecar_path(out), &sidecar)
}

fn bounds(a: BoundsArgs) -> Result<()> {
    let theorem: Theorem = a.theorem.parse().map_err(as_config)?;
    let mut inputs = BoundInputs::new(a.alpha, a.delta, a.n, a.m.unwrap_or(a.n));
    inputs.beta = a.beta;
    inputs.gamma = a.gamma;
    inputs.b_dens = a.b_dens;
    inputs.epsilon = a.epsilon;
    inputs.nu = a.nu;
    let report = evaluate(theorem, &inputs).map_err(as_config)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn figure1(file: ExperimentConfig, a: Figure1Args) -> Result<()> {
    let base = Figure1Config::default();
    let seed = a.seed.or(file.seed).ok_or_else(|| Error::Config("a seed is required".into()))?;
    let cfg = Figure1Config {
        n: a.n.or(file.n).unwrap_or(base.n),
        d: a.d.unwrap_or(base.d),
        trials: a.trials.or(file.trials).unwrap_or(base.trials),
        m_max: a.m_max.unwrap_or(base.m_max),
        seed,
        algorithms: None,
    };
    for curve in run_figure1(&cfg, Some(&a.outdir))? {
        if let Some(p) = curve.path {
            eprintln!("wrote {}", p.display());
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct PredictOutput<'a> {
    x: &'a [f64],
    #[serde(flatten)]
    set: PredictionSet,
}

fn predict(a: PredictArgs) -> Result<()> {
    let train = Dataset::read_csv(&a.train_file)?;
    let method: CoverageMethod = a.method.parse().map_err(as_config)?;
    let alg = a.alg.parse::<stabconf::regressors::AlgorithmSpec>().map_err(as_config)?.build()?;
    if a.x.len() != train.dim() {
        return Err(Error::DimensionMismatch { expected: train.dim(), got: a.x.len() });
    }
    let set = match method {
        CoverageMethod::Split => {
            let n0 = train.len() / 2;
            let rule = SplitConformal::calibrate(&train.prefix(n0), &train.slice(n0, train.len()), &*alg, a.alpha)?;
            rule.predict(&a.x)
        }
        CoverageMethod::Jplus => loo_fit(&train, &*alg)?.jackknife_plus(a.alpha, a.gamma, &a.x)?,
        CoverageMethod::FullCp => {
            let grid = GridSpec::covering(&train, a.grid_count.unwrap_or(GridSpec::DEFAULT_COUNT))?;
            full_conformal(&train, &*alg, a.alpha, a.gamma, &a.x, &grid)?
        }
    };
    println!("{}", serde_json::to_string_pretty(&PredictOutput { x: &a.x, set })?);
    Ok(())
}

fn as_config(e: Error) -> Error {
    match e {
        Error::InvalidParameter(msg) => Error::Config(msg),
        Error::MissingField(f) => Error::Config(format!("missing `{f}`")),
        other => other,
    }
}
