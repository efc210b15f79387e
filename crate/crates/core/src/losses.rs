//! Loss functions and their analytic gradients.
//!
//! Three dataset-level objectives (all plain sums over samples, so callers
//! wanting means divide by n):
//!
//! * [`nll_clear`] — the clear-text negative log-likelihood of the BTL model.
//! * [`nll_rr`] — the likelihood of the observed randomized labels, i.e. the
//!   clear-text predicted probability pushed through the randomized-response
//!   channel: `p~_1 = s q + (1-s)(1-q)` with `s = sigmoid(x.theta)` and
//!   `q = sigmoid(eps)`.
//! * [`debiased_rr_loss`] — the randomization-tailored loss built from the
//!   predicted scores `p^_1 = s^q / (1-s)^{1-q}` (and symmetrically for
//!   label 0). The scores are not probabilities, but their log-odds equal the
//!   clear-text log-odds `x.theta` for every `eps`, which de-biases the label
//!   noise and keeps the objective strongly convex at any positive budget.
//!
//! Score logs are always evaluated in log space
//! (`q log s - (1-q) log(1-s)`), never by exponentiating the scores.
//!
//! Per-sample gradients for the one-pass SGD estimators ([`sgd_rr_gradient`],
//! [`sgd_krr_gradient`]) follow the unbiased construction
//! `g^ = (sum_y grad log p_y) / (e^eps + K - 1) - grad log p_{y~}`,
//! whose expectation over the randomizer is the clear-text gradient scaled by
//! `(e^eps - 1) / (e^eps + K - 1)`.

use crate::error::{Error, Result};
use crate::linalg::axpy;
use crate::model::{log_sig, sig, softmax_scores, RewardParam};
use crate::privacy::RandomizedDataset;
use crate::PreferenceSample;

/// A loss value together with its gradient in theta.
#[derive(Debug, Clone, PartialEq)]
pub struct LossEval {
    pub value: f64,
    pub gradient: Vec<f64>,
}

fn check_dims(samples: &[PreferenceSample], theta: &RewardParam) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::domain("loss needs a nonempty dataset"));
    }
    if samples.iter().any(|s| s.x.len() != theta.dim()) {
        return Err(Error::domain("sample dimension does not match parameter"));
    }
    Ok(())
}

/// Clear-text negative log-likelihood
/// `-(sum_i) [ 1(y_i=1) log s_i + 1(y_i=0) log(1 - s_i) ]` with gradient
/// `sum_i (s_i - y_i) x_i`.
pub fn nll_clear(samples: &[PreferenceSample], theta: &RewardParam) -> Result<LossEval> {
    check_dims(samples, theta)?;
    let mut value = 0.0;
    let mut gradient = vec![0.0; theta.dim()];
    for s in samples {
        let z = crate::linalg::dot(&s.x, theta.coords());
        value -= if s.y == 1 { log_sig(z) } else { log_sig(-z) };
        axpy(&mut gradient, sig(z) - f64::from(s.y), &s.x);
    }
    Ok(LossEval { value, gradient })
}

/// Negative log-likelihood of the randomized labels (the noisy MLE
/// objective). The per-sample probability of the observed label is the BTL
/// probability mixed through the randomized-response channel.
pub fn nll_rr(data: &RandomizedDataset, theta: &RewardParam) -> Result<LossEval> {
    check_dims(&data.samples, theta)?;
    if !(data.epsilon >= 0.0) {
        return Err(Error::domain("epsilon must be >= 0"));
    }
    let q = sig(data.epsilon);
    let mut value = 0.0;
    let mut gradient = vec![0.0; theta.dim()];
    for sample in &data.samples {
        let z = crate::linalg::dot(&sample.x, theta.coords());
        let s = sig(z);
        let p1 = s * q + (1.0 - s) * (1.0 - q);
        let p0 = 1.0 - p1;
        // d p~_1 / dz = s'(2q - 1); labels far from the model can push p~
        // toward the q-dependent floor but never to 0 for finite eps.
        let coef = s * (1.0 - s) * (2.0 * q - 1.0);
        if sample.y == 1 {
            value -= p1.max(1e-300).ln();
            axpy(&mut gradient, -coef / p1, &sample.x);
        } else {
            value -= p0.max(1e-300).ln();
            axpy(&mut gradient, coef / p0, &sample.x);
        }
    }
    Ok(LossEval { value, gradient })
}

/// The de-biased randomized-response loss
/// `-(sum_i) [ 1(y~_i=1) log p^_{i,1} + 1(y~_i=0) log p^_{i,0} ]` with
/// `log p^_{i,1} = q log s_i - (1-q) log(1-s_i)` and symmetrically for 0.
pub fn debiased_rr_loss(data: &RandomizedDataset, theta: &RewardParam) -> Result<LossEval> {
    check_dims(&data.samples, theta)?;
    if !(data.epsilon >= 0.0) {
        return Err(Error::domain("epsilon must be >= 0"));
    }
    let q = sig(data.epsilon);
    let mut value = 0.0;
    let mut gradient = vec![0.0; theta.dim()];
    for sample in &data.samples {
        let z = crate::linalg::dot(&sample.x, theta.coords());
        let s = sig(z);
        let (log_s, log_1ms) = (log_sig(z), log_sig(-z));
        if sample.y == 1 {
            value -= q * log_s - (1.0 - q) * log_1ms;
            axpy(&mut gradient, -(q * (1.0 - s) + (1.0 - q) * s), &sample.x);
        } else {
            value -= q * log_1ms - (1.0 - q) * log_s;
            axpy(&mut gradient, q * s + (1.0 - q) * (1.0 - s), &sample.x);
        }
    }
    Ok(LossEval { value, gradient })
}

// Value-only twins of the three objectives, used by the batch solvers'
// line searches where the gradient of a rejected trial point is wasted
// work. Kept textually next to their full versions; a unit test pins the
// values equal.

pub(crate) fn nll_clear_value(samples: &[PreferenceSample], coords: &[f64]) -> f64 {
    samples
        .iter()
        .map(|s| {
            let z = crate::linalg::dot(&s.x, coords);
            if s.y == 1 {
                -log_sig(z)
            } else {
                -log_sig(-z)
            }
        })
        .sum()
}

pub(crate) fn nll_rr_value(data: &RandomizedDataset, coords: &[f64]) -> f64 {
    let q = sig(data.epsilon);
    data.samples
        .iter()
        .map(|sample| {
            let s = sig(crate::linalg::dot(&sample.x, coords));
            let p1 = s * q + (1.0 - s) * (1.0 - q);
            let p = if sample.y == 1 { p1 } else { 1.0 - p1 };
            -p.max(1e-300).ln()
        })
        .sum()
}

pub(crate) fn debiased_rr_value(data: &RandomizedDataset, coords: &[f64]) -> f64 {
    let q = sig(data.epsilon);
    data.samples
        .iter()
        .map(|sample| {
            let z = crate::linalg::dot(&sample.x, coords);
            let (log_s, log_1ms) = (log_sig(z), log_sig(-z));
            if sample.y == 1 {
                -(q * log_s - (1.0 - q) * log_1ms)
            } else {
                -(q * log_1ms - (1.0 - q) * log_s)
            }
        })
        .sum()
}

/// Log-odds of the de-biased predicted scores, exposed for the identity
/// `log p^_1 - log p^_0 = x . theta`.
pub fn debiased_score_log_odds(x: &[f64], theta: &RewardParam, epsilon: f64) -> Result<f64> {
    if x.len() != theta.dim() {
        return Err(Error::domain("dimension mismatch"));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::domain("epsilon must be >= 0"));
    }
    let q = sig(epsilon);
    let z = crate::linalg::dot(x, theta.coords());
    let (log_s, log_1ms) = (log_sig(z), log_sig(-z));
    let log_p1 = q * log_s - (1.0 - q) * log_1ms;
    let log_p0 = q * log_1ms - (1.0 - q) * log_s;
    Ok(log_p1 - log_p0)
}

/// Per-sample SGD gradient under randomized response:
/// `g^ = (grad log p_1 + grad log p_0) / (e^eps + 1) - grad log p_{y~}`
/// with `grad log p_1 = (1-s) x` and `grad log p_0 = -s x`.
pub fn sgd_rr_gradient(
    x: &[f64],
    y_tilde: u8,
    theta: &RewardParam,
    epsilon: f64,
) -> Result<Vec<f64>> {
    if x.len() != theta.dim() {
        return Err(Error::domain("dimension mismatch"));
    }
    if y_tilde > 1 {
        return Err(Error::domain("binary label must be 0 or 1"));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::domain("epsilon must be >= 0"));
    }
    let s = sig(crate::linalg::dot(x, theta.coords()));
    let base = (1.0 - 2.0 * s) / (epsilon.exp() + 1.0);
    let observed = if y_tilde == 1 { 1.0 - s } else { -s };
    Ok(x.iter().map(|v| (base - observed) * v).collect())
}

/// Per-sample SGD gradient under K-ary randomized response with top-choice
/// Plackett-Luce probabilities:
/// `g^ = (sum_y grad log p_y) / (e^eps + K - 1) - grad log p_{y~}` with
/// `grad log p_y = phi_y - sum_j softmax_j phi_j`.
pub fn sgd_krr_gradient(
    action_features: &[Vec<f64>],
    y_tilde: usize,
    theta: &RewardParam,
    epsilon: f64,
) -> Result<Vec<f64>> {
    let k = action_features.len();
    if k < 2 {
        return Err(Error::domain("K-wise gradient needs K >= 2"));
    }
    if action_features.iter().any(|f| f.len() != theta.dim()) {
        return Err(Error::domain("action feature dimension mismatch"));
    }
    if y_tilde < 1 || y_tilde > k {
        return Err(Error::domain(format!("label {y_tilde} out of range 1..={k}")));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::domain("epsilon must be >= 0"));
    }
    let d = theta.dim();
    let probs = softmax_scores(action_features, theta.coords());
    let mut weighted = vec![0.0; d];
    for (p, phi) in probs.iter().zip(action_features) {
        axpy(&mut weighted, *p, phi);
    }
    // sum_y grad log p_y = sum_y phi_y - K * weighted
    let mut sum_grad = vec![0.0; d];
    for phi in action_features {
        axpy(&mut sum_grad, 1.0, phi);
    }
    axpy(&mut sum_grad, -(k as f64), &weighted);
    let denom = epsilon.exp() + k as f64 - 1.0;
    let observed_phi = &action_features[y_tilde - 1];
    Ok((0..d)
        .map(|i| sum_grad[i] / denom - (observed_phi[i] - weighted[i]))
        .collect())
}
