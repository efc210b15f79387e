//! Local label randomizers (randomized response and its K-ary analogue) and
//! Gaussian noise calibration for the central model.
//!
//! Under the local model every label passes through randomized response
//! before the learner sees it: the true label survives with probability
//! `e^eps / (1 + e^eps) = sigmoid(eps)`. Under the central model the learner
//! sees raw labels and instead perturbs its objective with `N(0, sigma^2 I)`
//! noise, with `sigma` calibrated to the `(eps, delta)` budget.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{sig, KWiseSample, PreferenceSample};

/// Which trust model a budget applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrivacyMode {
    /// Labels are randomized at the source; pure epsilon-DP (delta = 0).
    LocalLabel,
    /// Learner sees raw data; output must be insensitive to one label change.
    CentralLabel,
    /// Learner sees raw data; output must be insensitive to one full
    /// (feature, label) change.
    CentralStandard,
}

/// An `(epsilon, delta)` privacy budget plus its trust model.
#[derive(Debug, Clone, PartialEq)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
    pub mode: PrivacyMode,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64, mode: PrivacyMode) -> Result<Self> {
        if !(epsilon >= 0.0) {
            return Err(Error::domain("epsilon must be >= 0"));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::domain("delta must be in [0, 1)"));
        }
        if mode == PrivacyMode::LocalLabel && delta != 0.0 {
            // Randomized response is a pure-epsilon mechanism.
            return Err(Error::domain("local-label mode requires delta = 0"));
        }
        Ok(PrivacyBudget {
            epsilon,
            delta,
            mode,
        })
    }

    pub fn local(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, 0.0, PrivacyMode::LocalLabel)
    }

    pub fn central_label(epsilon: f64, delta: f64) -> Result<Self> {
        Self::new(epsilon, delta, PrivacyMode::CentralLabel)
    }

    pub fn central_standard(epsilon: f64, delta: f64) -> Result<Self> {
        Self::new(epsilon, delta, PrivacyMode::CentralStandard)
    }
}

/// The RNG type used everywhere randomness is consumed.
pub type StreamRng = ChaCha12Rng;

/// A named, reproducible randomness source: the same `(seed, stream_index)`
/// always yields the same draw sequence within one build. Each logical
/// consumer (parameter generation, data generation, label randomization,
/// objective noise) gets its own stream index so reordering one consumer
/// never perturbs the others.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        RngStream { seed, stream_index }
    }

    /// Mints a fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

/// Keep-probability of randomized response: `e^eps / (1 + e^eps)`.
/// Shares the sigmoid code path so the identity holds exactly.
pub fn rr_keep_probability(epsilon: f64) -> Result<f64> {
    if !(epsilon >= 0.0) {
        return Err(Error::domain("epsilon must be >= 0"));
    }
    Ok(sig(epsilon))
}

/// Randomized response on a binary label: returns `y` with probability
/// `sigmoid(epsilon)`, otherwise `1 - y`.
pub fn randomized_response(y: u8, epsilon: f64, rng: &mut StreamRng) -> Result<u8> {
    if y > 1 {
        return Err(Error::domain("binary label must be 0 or 1"));
    }
    let keep = rr_keep_probability(epsilon)?;
    if rng.random::<f64>() < keep {
        Ok(y)
    } else {
        Ok(1 - y)
    }
}

/// Keep-probability of K-ary randomized response:
/// `e^eps / (e^eps + K - 1)`, evaluated as `1 / (1 + (K-1) e^{-eps})` so it
/// cannot overflow. For K = 2 this is exactly `sigmoid(epsilon)`.
pub fn krr_keep_probability(epsilon: f64, k: usize) -> Result<f64> {
    if !(epsilon >= 0.0) {
        return Err(Error::domain("epsilon must be >= 0"));
    }
    if k < 2 {
        return Err(Error::domain("K must be >= 2"));
    }
    Ok(1.0 / (1.0 + (k - 1) as f64 * (-epsilon).exp()))
}

/// K-ary randomized response on a label in `1..=K`: returns `y` with
/// probability `e^eps / (e^eps + K - 1)`, otherwise one of the remaining
/// `K - 1` labels uniformly.
pub fn k_randomized_response(y: usize, k: usize, epsilon: f64, rng: &mut StreamRng) -> Result<usize> {
    if y < 1 || y > k {
        return Err(Error::domain(format!("label {y} out of range 1..={k}")));
    }
    let keep = krr_keep_probability(epsilon, k)?;
    if rng.random::<f64>() < keep {
        return Ok(y);
    }
    // Uniform over the other K - 1 labels.
    let idx = rng.random_range(0..k - 1) + 1;
    Ok(if idx >= y { idx + 1 } else { idx })
}

/// Noise scale for the objective-perturbation mechanism.
///
/// Central label DP: `sigma = L sqrt(8 ln(2/delta) + 4 eps) / eps`.
/// Central standard DP: `sigma = 4 L sqrt(8 ln(4/delta) + 2 eps) / eps`.
pub fn central_noise_sigma(feature_bound: f64, budget: &PrivacyBudget) -> Result<f64> {
    if !(budget.epsilon > 0.0) {
        return Err(Error::domain("central noise calibration needs epsilon > 0"));
    }
    if !(budget.delta > 0.0 && budget.delta < 1.0) {
        return Err(Error::domain("central noise calibration needs delta in (0, 1)"));
    }
    if !(feature_bound >= 0.0) {
        return Err(Error::domain("feature bound L must be >= 0"));
    }
    let (eps, delta) = (budget.epsilon, budget.delta);
    match budget.mode {
        PrivacyMode::CentralLabel => {
            Ok(feature_bound * (8.0 * (2.0 / delta).ln() + 4.0 * eps).sqrt() / eps)
        }
        PrivacyMode::CentralStandard => {
            Ok(4.0 * feature_bound * (8.0 * (4.0 / delta).ln() + 2.0 * eps).sqrt() / eps)
        }
        PrivacyMode::LocalLabel => Err(Error::mode(
            "central_noise_sigma is undefined for local-label budgets",
        )),
    }
}

/// Minimum regularizer `beta >= 4 L^2 / eps` required for the
/// central-standard privacy guarantee of objective perturbation.
pub fn standard_dp_beta_floor(feature_bound: f64, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::domain("beta floor needs epsilon > 0"));
    }
    Ok(4.0 * feature_bound * feature_bound / epsilon)
}

/// Draws `d` independent `N(0, sigma^2)` coordinates.
pub fn sample_gaussian_vector(d: usize, sigma: f64, rng: &mut StreamRng) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(Error::domain("gaussian vector needs d >= 1"));
    }
    if !(sigma >= 0.0) {
        return Err(Error::domain("sigma must be >= 0"));
    }
    Ok((0..d)
        .map(|_| sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
        .collect())
}

/// A pairwise dataset whose labels went through randomized response, tagged
/// with the budget spent.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomizedDataset {
    pub samples: Vec<PreferenceSample>,
    pub epsilon: f64,
}

/// A K-wise dataset whose labels went through K-ary randomized response.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomizedKWiseDataset {
    pub samples: Vec<KWiseSample>,
    pub epsilon: f64,
}

impl RandomizedKWiseDataset {
    pub fn k(&self) -> usize {
        self.samples.first().map_or(0, |s| s.k())
    }
}
