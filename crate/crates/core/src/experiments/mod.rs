//! Data generators, experiment runners, and the file formats behind the CLI.

pub mod config;
pub mod coverage;
pub mod distributions;
pub mod figure1;
pub mod output;

pub use config::ExperimentConfig;
pub use coverage::{
    compare_with_bound, estimate_miscoverage, matched_bound, miscoverage_distribution, BoundPlan, CoverageMethod,
    CoverageSetup, MiscoverageSample, MiscoverageSummary, PredictionRule, TheoremComparison,
};
pub use distributions::{DistributionSpec, Sampler};
pub use figure1::{run_figure1, Figure1Config};
