//! Reward estimation from pairwise and K-wise human preference feedback
//! under label differential privacy.
//!
//! The library estimates the latent parameter of a linear Bradley-Terry-Luce
//! (or Thurstone / top-choice Plackett-Luce) preference model from binary or
//! K-ary comparisons whose labels are treated as sensitive. It provides:
//!
//! * [`model`] — the probability models, the centered parameter ball
//!   `Theta_B`, and feature-covariance utilities;
//! * [`privacy`] — randomized response, its K-ary analogue, and Gaussian
//!   noise calibration for the central model;
//! * [`losses`] — the clear-text, noisy, and de-biased log-likelihood
//!   objectives with analytic gradients, plus per-sample SGD gradients;
//! * [`estimators`] — projected-gradient batch solvers, one-pass SGD
//!   estimators, objective perturbation, and the greedy plug-in policy;
//! * [`datagen`] — reproducible synthetic instances;
//! * [`metrics`] — l2 / semi-norm errors, rate fitting, and the policy
//!   suboptimality gap;
//! * [`experiment`] — config-driven sweeps with deterministic per-repetition
//!   seeding (rayon-parallel by default, sequential without the `parallel`
//!   feature), CSV output, and the `check-privacy` / `gradcheck` reports;
//! * [`svg`] — log-log error charts rendered as standalone SVG.

pub mod datagen;
pub mod error;
pub mod estimators;
pub mod experiment;
mod linalg;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod privacy;
pub mod svg;

pub use error::{Error, Result};
pub use estimators::{EstimatorResult, OptimizerConfig, StepSchedule};
pub use experiment::{EstimatorKind, ExperimentConfig};
pub use metrics::ErrorRecord;
pub use model::{CovarianceMatrix, KWiseSample, ParamSpace, PreferenceSample, RewardParam};
pub use privacy::{PrivacyBudget, PrivacyMode, RngStream};
