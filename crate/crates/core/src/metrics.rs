//! Estimation-error metrics, power-law rate fitting, and the greedy-policy
//! suboptimality gap.

use crate::error::{Error, Result};
use crate::estimators::greedy_policy_action;
use crate::linalg::{dot, norm, sub};
use crate::model::{CovarianceMatrix, RewardParam};

/// One repetition's outcome inside a sweep; serialized as a CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRecord {
    pub estimator: String,
    pub n: usize,
    pub epsilon: f64,
    pub repetition: u32,
    /// The mixed per-repetition seed, sufficient to reproduce this row alone.
    pub seed: u64,
    pub l2_error: f64,
    pub seminorm_error: f64,
}

/// `|| theta_hat - theta_star ||_2`.
pub fn l2_error(theta_hat: &RewardParam, theta_star: &RewardParam) -> Result<f64> {
    if theta_hat.dim() != theta_star.dim() {
        return Err(Error::domain("dimension mismatch in l2_error"));
    }
    Ok(norm(&sub(theta_hat.coords(), theta_star.coords())))
}

/// Semi-norm error `sqrt(Delta^T (Sigma_D + lambda I) Delta)` with
/// `Delta = theta_hat - theta_star`.
pub fn seminorm_error(
    theta_hat: &RewardParam,
    theta_star: &RewardParam,
    sigma_d: &CovarianceMatrix,
    lambda: f64,
) -> Result<f64> {
    if theta_hat.dim() != theta_star.dim() || sigma_d.dim() != theta_hat.dim() {
        return Err(Error::domain("dimension mismatch in seminorm_error"));
    }
    if !(lambda >= 0.0) {
        return Err(Error::domain("lambda must be >= 0"));
    }
    let delta = sub(theta_hat.coords(), theta_star.coords());
    Ok(sigma_d.regularized_quadratic_form(&delta, lambda).max(0.0).sqrt())
}

/// The regularization level the semi-norm theory tunes to:
/// `lambda = ((e^eps + 1)/(e^eps - 1))^2 (d + ln(1/alpha)) / (B^2 gamma^2 n)`,
/// with the privacy factor dropped (`= 1`) for a non-private estimator.
pub fn default_seminorm_lambda(
    epsilon: Option<f64>,
    d: usize,
    n: usize,
    norm_bound: f64,
    gamma: f64,
    alpha: f64,
) -> Result<f64> {
    if n == 0 || !(norm_bound > 0.0) || !(gamma > 0.0) || !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain("invalid seminorm lambda inputs"));
    }
    let privacy_factor = match epsilon {
        Some(eps) => {
            if !(eps > 0.0) {
                return Err(Error::domain("epsilon must be positive"));
            }
            let r = (eps.exp() + 1.0) / (eps.exp() - 1.0);
            r * r
        }
        None => 1.0,
    };
    Ok(privacy_factor * (d as f64 + (1.0 / alpha).ln())
        / (norm_bound * norm_bound * gamma * gamma * n as f64))
}

/// Least-squares slope of `log(mean_error)` against `log(n)`.
pub fn rate_fit(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::domain("rate_fit needs at least 3 points"));
    }
    if points.iter().any(|(n, e)| !(*n > 0.0) || !(*e > 0.0)) {
        return Err(Error::domain("rate_fit needs positive samples and errors"));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|(n, e)| (n.ln(), e.ln())).collect();
    let m = logs.len() as f64;
    let mean_x = logs.iter().map(|(x, _)| x).sum::<f64>() / m;
    let mean_y = logs.iter().map(|(_, y)| y).sum::<f64>() / m;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in &logs {
        sxy += (x - mean_x) * (y - mean_y);
        sxx += (x - mean_x) * (x - mean_x);
    }
    if sxx == 0.0 {
        return Err(Error::domain("rate_fit needs at least two distinct n"));
    }
    Ok(sxy / sxx)
}

/// Mean shortfall of the greedy plug-in policy under the true parameter:
/// average over states of `max_a phi(s,a).theta* - phi(s, pi_hat(s)).theta*`,
/// where `pi_hat` picks the argmax action under `theta_hat`. Nonnegative by
/// construction.
pub fn suboptimality_gap(
    theta_hat: &RewardParam,
    theta_star: &RewardParam,
    eval_states: &[Vec<Vec<f64>>],
) -> Result<f64> {
    if eval_states.is_empty() {
        return Err(Error::domain("suboptimality_gap needs at least one state"));
    }
    if theta_hat.dim() != theta_star.dim() {
        return Err(Error::domain("dimension mismatch in suboptimality_gap"));
    }
    let mut total = 0.0;
    for actions in eval_states {
        let picked = greedy_policy_action(theta_hat, actions)?;
        let picked_value = dot(&actions[picked], theta_star.coords());
        let best_value = actions
            .iter()
            .map(|a| dot(a, theta_star.coords()))
            .fold(f64::NEG_INFINITY, f64::max);
        total += best_value - picked_value;
    }
    Ok((total / eval_states.len() as f64).max(0.0))
}
