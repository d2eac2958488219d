//! Distribution-free prediction sets and algorithmic stability.
//!
//! The crate is organised bottom-up:
//!
//! * [`data`], [`quantile`], [`rng`] hold the shared primitives: datasets,
//!   extended reals and the conformal quantile, and per-trial random streams.
//! * [`regressors`] provides the symmetric base learners (kNN, ridge, CART,
//!   subbagging) behind the [`RegressionAlgorithm`] trait.
//! * [`conformal`] builds split conformal, jackknife+ and full conformal
//!   prediction sets.
//! * [`stability`] estimates m-stability by Monte Carlo and evaluates the
//!   closed-form stability bounds for kNN, ridge and subbagging.
//! * [`guarantees`] evaluates the finite-sample training-conditional coverage
//!   bounds.
//! * [`experiments`] contains the data generators, the miscoverage harness,
//!   the stability-curve reproduction and the file formats used by the CLI.

pub mod conformal;
pub mod data;
pub mod error;
pub mod experiments;
pub mod guarantees;
pub mod quantile;
pub mod regressors;
pub mod rng;
pub mod stability;

pub use data::{DataPoint, Dataset};
pub use error::{Error, Result};
pub use quantile::{conformal_quantile, ExtendedReal, Interval};
pub use regressors::{Predictor, RegressionAlgorithm};
pub use rng::{derive_stream, RngStream};
