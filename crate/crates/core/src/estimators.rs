//! The reward estimators.
//!
//! Batch estimators (clear-text MLE, noisy MLE, de-biased RR, objective
//! perturbation) minimize their objective over the centered ball `Theta_B`
//! with projected gradient descent and a backtracking (Armijo) line search.
//! The one-pass SGD estimators follow the sequential update
//! `theta_{t+1} = proj(theta_t - eta_t g^_t)`, visiting each sample once in
//! order.
//!
//! Every estimator is deterministic given its inputs (including the RNG state
//! handed to objective perturbation), and every returned parameter lies in
//! `Theta_B` because the last step is always a projection.

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, sub};
use crate::losses::{
    debiased_rr_loss, debiased_rr_value, nll_clear, nll_clear_value, nll_rr, nll_rr_value,
    sgd_krr_gradient, sgd_rr_gradient,
};
use crate::model::{
    empirical_covariance, gamma_constant, min_eigenvalue, sig, ParamSpace, PreferenceSample,
    RewardParam,
};
use crate::privacy::{
    central_noise_sigma, sample_gaussian_vector, standard_dp_beta_floor, PrivacyBudget,
    PrivacyMode, RandomizedDataset, RandomizedKWiseDataset, StreamRng,
};

/// Step-size rule for the SGD estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    /// `eta_t = 1 / (gamma_eps * kappa * t)` — the decaying schedule the
    /// convergence proof uses, with `gamma_eps = gamma (2 sigmoid(eps) - 1)`
    /// (binary) or `gamma (e^eps - 1)/(e^eps + K - 1)` (K-wise).
    InverseT,
    /// `eta_t = 1 / (gamma * kappa)`, constant across steps.
    Constant,
    /// A fixed literal step size, e.g. the 0.1 used in the simulations.
    Fixed(f64),
}

/// Knobs for both the batch solvers and the SGD loops.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    pub step: StepSchedule,
    /// Batch solvers stop when the gradient-mapping norm drops below this.
    pub gradient_tolerance: f64,
    /// Overrides the data-driven coverage estimate `kappa`.
    pub kappa_override: Option<f64>,
    /// Overrides the curvature constant `gamma` (required for Thurstone runs,
    /// where no closed form is available).
    pub gamma_override: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iterations: 100_000,
            step: StepSchedule::InverseT,
            gradient_tolerance: 1e-8,
            kappa_override: None,
            gamma_override: None,
        }
    }
}

impl OptimizerConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::domain("max_iterations must be >= 1"));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(Error::domain("gradient_tolerance must be positive"));
        }
        if let StepSchedule::Fixed(h) = self.step {
            if !(h > 0.0) {
                return Err(Error::domain("fixed step size must be positive"));
            }
        }
        for o in [self.kappa_override, self.gamma_override].into_iter().flatten() {
            if !(o > 0.0) {
                return Err(Error::domain("optimizer overrides must be positive"));
            }
        }
        Ok(())
    }
}

/// What an estimator produced, plus convergence and privacy bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorResult {
    pub theta_hat: RewardParam,
    pub iterations_used: usize,
    pub final_gradient_norm: f64,
    /// The budget of the mechanism actually applied; `None` for the
    /// non-private estimator.
    pub budget_spent: Option<PrivacyBudget>,
    /// False when a batch solver hit `max_iterations` before reaching the
    /// gradient tolerance.
    pub converged: bool,
    pub notes: Vec<String>,
}

/// Euclidean projection onto `Theta_B = { <1,v> = 0, ||v|| <= B }`: subtract
/// the coordinate mean, then rescale onto the sphere when the centered vector
/// is too long. The composition is the exact projection because the centering
/// hyperplane passes through the ball's center.
pub fn project_theta_b(v: &[f64], norm_bound: f64) -> RewardParam {
    assert!(norm_bound > 0.0, "projection needs B > 0");
    RewardParam::from_centered(project_coords(v, norm_bound))
}

fn project_coords(v: &[f64], norm_bound: f64) -> Vec<f64> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let mut c: Vec<f64> = v.iter().map(|x| x - mean).collect();
    let n = norm(&c);
    if n > norm_bound {
        let scale = norm_bound / n;
        c.iter_mut().for_each(|x| *x *= scale);
    }
    c
}

struct PgdOutcome {
    coords: Vec<f64>,
    iterations: usize,
    gm_norm: f64,
    converged: bool,
}

/// Projected gradient descent with halving backtracking (Armijo constant
/// 1e-4). Stops when the gradient-mapping norm `||theta - proj(theta - t g)|| / t`
/// falls below the tolerance. Rejected trial points only need the objective
/// value, so the line search takes a value-only closure; the accepted step
/// doubles as the next trial so a pessimistic smoothness estimate only costs
/// a few early halvings.
fn pgd<F, V>(
    objective: F,
    value_only: V,
    d: usize,
    norm_bound: f64,
    smoothness: f64,
    cfg: &OptimizerConfig,
) -> PgdOutcome
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
    V: Fn(&[f64]) -> f64,
{
    const ARMIJO: f64 = 1e-4;
    let mut theta = vec![0.0; d];
    let (mut value, mut grad) = objective(&theta);
    let mut trial_step = 1.0 / smoothness.max(1e-12);
    let mut iterations = 0;
    let mut gm_norm = f64::INFINITY;
    let mut converged = false;

    while iterations < cfg.max_iterations {
        iterations += 1;
        let mut t = trial_step;
        loop {
            let mut probe = theta.clone();
            for i in 0..d {
                probe[i] -= t * grad[i];
            }
            let cand = project_coords(&probe, norm_bound);
            let gm = norm(&sub(&theta, &cand)) / t;
            let cand_value = value_only(&cand);
            let accepted = cand_value <= value - ARMIJO * t * gm * gm;
            if accepted || t < 1e-18 {
                gm_norm = gm;
                theta = cand;
                value = cand_value;
                break;
            }
            t *= 0.5;
        }
        if gm_norm <= cfg.gradient_tolerance {
            converged = true;
            break;
        }
        grad = objective(&theta).1;
        trial_step = t * 2.0;
    }

    PgdOutcome {
        coords: theta,
        iterations,
        gm_norm,
        converged,
    }
}

fn check_samples(samples: &[PreferenceSample], space: &ParamSpace) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::domain("estimator needs a nonempty dataset"));
    }
    if samples.iter().any(|s| s.x.len() != space.d) {
        return Err(Error::domain("sample dimension does not match space"));
    }
    Ok(())
}

/// Crude smoothness bound `n * max ||x||^2` for the batch objectives; the
/// line search adapts from there.
fn smoothness_estimate(samples: &[PreferenceSample]) -> f64 {
    let max_sq = samples
        .iter()
        .map(|s| dot(&s.x, &s.x))
        .fold(0.0f64, f64::max);
    (samples.len() as f64) * max_sq.max(1e-12)
}

fn batch_result(out: PgdOutcome, budget: Option<PrivacyBudget>, mut notes: Vec<String>) -> EstimatorResult {
    if !out.converged {
        notes.push("hit max_iterations before reaching the gradient tolerance".into());
    }
    EstimatorResult {
        theta_hat: RewardParam::from_centered(out.coords),
        iterations_used: out.iterations,
        final_gradient_norm: out.gm_norm,
        budget_spent: budget,
        converged: out.converged,
        notes,
    }
}

/// Non-private MLE: projected gradient descent on the clear-text negative
/// log-likelihood over `Theta_B`.
pub fn fit_mle_clear(
    samples: &[PreferenceSample],
    space: &ParamSpace,
    cfg: &OptimizerConfig,
) -> Result<EstimatorResult> {
    check_samples(samples, space)?;
    cfg.validate()?;
    let out = pgd(
        |c| {
            let eval = nll_clear(samples, &RewardParam::from_centered(c.to_vec())).unwrap();
            (eval.value, eval.gradient)
        },
        |c| nll_clear_value(samples, c),
        space.d,
        space.norm_bound,
        smoothness_estimate(samples),
        cfg,
    );
    Ok(batch_result(out, None, Vec::new()))
}

/// Noisy MLE: minimizes the likelihood of the randomized labels. Well-defined
/// for every `eps >= 0`, but only strongly convex (and therefore covered by a
/// guarantee) when `eps > 2LB`; runs outside that regime are flagged.
pub fn fit_mle_rr(
    data: &RandomizedDataset,
    space: &ParamSpace,
    cfg: &OptimizerConfig,
) -> Result<EstimatorResult> {
    check_samples(&data.samples, space)?;
    cfg.validate()?;
    let mut notes = Vec::new();
    let threshold = 2.0 * space.feature_bound * space.norm_bound;
    if data.epsilon <= threshold {
        notes.push(format!(
            "epsilon {} <= 2LB = {threshold}: noisy-MLE objective is not strongly convex here",
            data.epsilon
        ));
    }
    let out = pgd(
        |c| {
            let eval = nll_rr(data, &RewardParam::from_centered(c.to_vec())).unwrap();
            (eval.value, eval.gradient)
        },
        |c| nll_rr_value(data, c),
        space.d,
        space.norm_bound,
        smoothness_estimate(&data.samples),
        cfg,
    );
    Ok(batch_result(
        out,
        Some(PrivacyBudget::local(data.epsilon)?),
        notes,
    ))
}

/// The de-biased batch estimator: minimizes the randomization-tailored loss,
/// strongly convex for every positive budget.
pub fn fit_debiased_rr(
    data: &RandomizedDataset,
    space: &ParamSpace,
    cfg: &OptimizerConfig,
) -> Result<EstimatorResult> {
    check_samples(&data.samples, space)?;
    cfg.validate()?;
    if !(data.epsilon > 0.0) {
        return Err(Error::domain("de-biased estimator needs epsilon > 0"));
    }
    let out = pgd(
        |c| {
            let eval = debiased_rr_loss(data, &RewardParam::from_centered(c.to_vec())).unwrap();
            (eval.value, eval.gradient)
        },
        |c| debiased_rr_value(data, c),
        space.d,
        space.norm_bound,
        smoothness_estimate(&data.samples),
        cfg,
    );
    Ok(batch_result(
        out,
        Some(PrivacyBudget::local(data.epsilon)?),
        Vec::new(),
    ))
}

/// Coverage estimate: smallest eigenvalue of the sample covariance, floored
/// away from zero so step sizes stay finite.
fn kappa_estimate(samples: &[PreferenceSample], cfg: &OptimizerConfig) -> Result<f64> {
    if let Some(k) = cfg.kappa_override {
        return Ok(k);
    }
    let cov = empirical_covariance(samples)?;
    Ok(min_eigenvalue(&cov)?.max(1e-6))
}

fn sgd_step(schedule: StepSchedule, gamma_eps: f64, gamma: f64, kappa: f64, t: usize) -> f64 {
    match schedule {
        StepSchedule::InverseT => 1.0 / (gamma_eps.max(1e-12) * kappa * t as f64),
        StepSchedule::Constant => 1.0 / (gamma * kappa),
        StepSchedule::Fixed(h) => h,
    }
}

/// One-pass SGD with randomized-response labels: `theta_1 = 0`,
/// `theta_{t+1} = proj(theta_t - eta_t g^_t)` over the samples in order.
pub fn sgd_rr(
    data: &RandomizedDataset,
    space: &ParamSpace,
    cfg: &OptimizerConfig,
) -> Result<EstimatorResult> {
    check_samples(&data.samples, space)?;
    cfg.validate()?;
    let eps = data.epsilon;
    if !(eps >= 0.0) {
        return Err(Error::domain("epsilon must be >= 0"));
    }
    let kappa = kappa_estimate(&data.samples, cfg)?;
    let gamma = match cfg.gamma_override {
        Some(g) => g,
        None => gamma_constant(space.feature_bound, space.norm_bound)?,
    };
    let gamma_eps = gamma * (2.0 * sig(eps) - 1.0);
    let mut theta = RewardParam::zeros(space.d);
    let mut last_grad_norm = 0.0;
    for (t, sample) in data.samples.iter().enumerate() {
        let g = sgd_rr_gradient(&sample.x, sample.y, &theta, eps)?;
        let eta = sgd_step(cfg.step, gamma_eps, gamma, kappa, t + 1);
        let mut probe = theta.coords().to_vec();
        for i in 0..space.d {
            probe[i] -= eta * g[i];
        }
        theta = project_theta_b(&probe, space.norm_bound);
        last_grad_norm = norm(&g);
    }
    Ok(EstimatorResult {
        theta_hat: theta,
        iterations_used: data.samples.len(),
        final_gradient_norm: last_grad_norm,
        budget_spent: Some(PrivacyBudget::local(eps)?),
        converged: true,
        notes: Vec::new(),
    })
}

/// One-pass SGD with K-ary randomized-response labels under the top-choice
/// Plackett-Luce model. The curvature default is the K-wise constant
/// `e^{-4LB} / 2`, and the coverage estimate pools every pairwise feature
/// difference within each comparison.
pub fn sgd_krr(
    data: &RandomizedKWiseDataset,
    space: &ParamSpace,
    cfg: &OptimizerConfig,
) -> Result<EstimatorResult> {
    if data.samples.is_empty() {
        return Err(Error::domain("estimator needs a nonempty dataset"));
    }
    cfg.validate()?;
    let k = data.k();
    if k < 2 {
        return Err(Error::domain("K-wise estimator needs K >= 2"));
    }
    for s in &data.samples {
        if s.k() != k {
            return Err(Error::domain("samples have inconsistent K"));
        }
        if s.y < 1 || s.y > k {
            return Err(Error::domain(format!("label {} out of range 1..={k}", s.y)));
        }
        if s.action_features.iter().any(|f| f.len() != space.d) {
            return Err(Error::domain("sample dimension does not match space"));
        }
    }
    let eps = data.epsilon;
    if !(eps >= 0.0) {
        return Err(Error::domain("epsilon must be >= 0"));
    }
    let kappa = match cfg.kappa_override {
        Some(v) => v,
        None => {
            let diffs: Vec<PreferenceSample> = data
                .samples
                .iter()
                .flat_map(|s| {
                    let feats = &s.action_features;
                    let mut pairs = Vec::with_capacity(k * (k - 1) / 2);
                    for i in 0..k {
                        for j in (i + 1)..k {
                            pairs.push(PreferenceSample {
                                x: sub(&feats[i], &feats[j]),
                                y: 0,
                            });
                        }
                    }
                    pairs
                })
                .collect();
            min_eigenvalue(&empirical_covariance(&diffs)?)?.max(1e-6)
        }
    };
    let gamma = match cfg.gamma_override {
        Some(g) => g,
        None => (-4.0 * space.feature_bound * space.norm_bound).exp() / 2.0,
    };
    let gamma_eps = gamma * (eps.exp() - 1.0) / (eps.exp() + k as f64 - 1.0);
    let mut theta = RewardParam::zeros(space.d);
    let mut last_grad_norm = 0.0;
    for (t, sample) in data.samples.iter().enumerate() {
        let g = sgd_krr_gradient(&sample.action_features, sample.y, &theta, eps)?;
        let eta = sgd_step(cfg.step, gamma_eps, gamma, kappa, t + 1);
        let mut probe = theta.coords().to_vec();
        for i in 0..space.d {
            probe[i] -= eta * g[i];
        }
        theta = project_theta_b(&probe, space.norm_bound);
        last_grad_norm = norm(&g);
    }
    Ok(EstimatorResult {
        theta_hat: theta,
        iterations_used: data.samples.len(),
        final_gradient_norm: last_grad_norm,
        budget_spent: Some(PrivacyBudget::local(eps)?),
        converged: true,
        notes: Vec::new(),
    })
}

/// Objective perturbation for the central model: minimizes
/// `l_D(theta) + (beta/2) ||theta||^2 + w . theta` over `Theta_B` with
/// `w ~ N(0, sigma^2 I)` calibrated to the budget.
///
/// The regularizer defaults to `beta = sqrt(n)/B`, raised to the
/// `4L^2/eps` floor in central-standard mode. `sigma_override` exists for
/// the degenerate no-noise reduction; leaving it `None` applies the
/// calibrated noise.
///
/// The formal privacy guarantee covers the exact minimizer; the returned
/// iterate is approximate (within the gradient tolerance), which is recorded
/// in the result notes.
pub fn fit_objective_perturbation(
    samples: &[PreferenceSample],
    space: &ParamSpace,
    budget: &PrivacyBudget,
    beta: Option<f64>,
    sigma_override: Option<f64>,
    rng: &mut StreamRng,
    cfg: &OptimizerConfig,
) -> Result<EstimatorResult> {
    check_samples(samples, space)?;
    cfg.validate()?;
    if budget.mode == PrivacyMode::LocalLabel {
        return Err(Error::mode(
            "objective perturbation needs a central-model budget",
        ));
    }
    let n = samples.len() as f64;
    let default_beta = n.sqrt() / space.norm_bound;
    let beta = match (beta, budget.mode) {
        (Some(b), _) => {
            if !(b >= 0.0) {
                return Err(Error::domain("beta must be >= 0"));
            }
            b
        }
        (None, PrivacyMode::CentralStandard) => {
            default_beta.max(standard_dp_beta_floor(space.feature_bound, budget.epsilon)?)
        }
        (None, _) => default_beta,
    };
    let sigma = match sigma_override {
        Some(s) => {
            if !(s >= 0.0) {
                return Err(Error::domain("sigma must be >= 0"));
            }
            s
        }
        None => central_noise_sigma(space.feature_bound, budget)?,
    };
    let w = sample_gaussian_vector(space.d, sigma, rng)?;
    let out = pgd(
        |c| {
            let eval = nll_clear(samples, &RewardParam::from_centered(c.to_vec())).unwrap();
            let value = eval.value + dot(&w, c) + 0.5 * beta * dot(c, c);
            let mut grad = eval.gradient;
            for i in 0..space.d {
                grad[i] += w[i] + beta * c[i];
            }
            (value, grad)
        },
        |c| nll_clear_value(samples, c) + dot(&w, c) + 0.5 * beta * dot(c, c),
        space.d,
        space.norm_bound,
        smoothness_estimate(samples) + beta,
        cfg,
    );
    Ok(batch_result(
        out,
        Some(budget.clone()),
        vec!["privacy guarantee covers the exact minimizer; iterate is approximate".into()],
    ))
}

/// Greedy plug-in policy: the index of the action maximizing
/// `phi(s, a) . theta_hat`, ties broken toward the lowest index.
pub fn greedy_policy_action(theta_hat: &RewardParam, action_features: &[Vec<f64>]) -> Result<usize> {
    if action_features.is_empty() {
        return Err(Error::domain("greedy policy needs at least one action"));
    }
    if action_features.iter().any(|f| f.len() != theta_hat.dim()) {
        return Err(Error::domain("action feature dimension mismatch"));
    }
    let mut best = 0;
    let mut best_score = dot(&action_features[0], theta_hat.coords());
    for (i, f) in action_features.iter().enumerate().skip(1) {
        let score = dot(f, theta_hat.coords());
        if score > best_score {
            best = i;
            best_score = score;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::KWiseSample;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn rng(seed: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(seed)
    }

    fn random_vec(d: usize, scale: f64, r: &mut ChaCha12Rng) -> Vec<f64> {
        (0..d).map(|_| (r.random::<f64>() * 2.0 - 1.0) * scale).collect()
    }

    #[test]
    fn projection_leaves_feasible_points_alone() {
        let v = vec![0.3, -0.1, -0.2];
        let p = project_theta_b(&v, 1.0);
        for i in 0..3 {
            assert!((p.coords()[i] - v[i]).abs() <= 1e-15);
        }
    }

    #[test]
    fn projection_kills_constant_vectors() {
        let p = project_theta_b(&[2.5, 2.5, 2.5, 2.5], 1.0);
        assert!(p.coords().iter().all(|c| c.abs() < 1e-15));
    }

    #[test]
    fn projection_satisfies_variational_inequality() {
        // <v - p, q - p> <= tol for every feasible q characterizes the
        // Euclidean projection onto a convex set.
        let mut r = rng(21);
        for _ in 0..20 {
            let d = 2 + (r.random::<u32>() % 5) as usize;
            let b = 0.5 + r.random::<f64>() * 2.0;
            let v = random_vec(d, 4.0, &mut r);
            let p = project_theta_b(&v, b);
            for _ in 0..50 {
                let q = project_theta_b(&random_vec(d, 4.0, &mut r), b);
                let vp = sub(&v, p.coords());
                let qp = sub(q.coords(), p.coords());
                assert!(dot(&vp, &qp) <= 1e-9);
            }
        }
    }

    fn symmetric_pair() -> Vec<PreferenceSample> {
        vec![
            PreferenceSample {
                x: vec![1.0, -0.5, -0.5],
                y: 1,
            },
            PreferenceSample {
                x: vec![-1.0, 0.5, 0.5],
                y: 1,
            },
        ]
    }

    #[test]
    fn mle_clear_symmetric_dataset_stays_at_zero() {
        let space = ParamSpace::new(3, 1.0, 1.0).unwrap();
        let res = fit_mle_clear(&symmetric_pair(), &space, &OptimizerConfig::default()).unwrap();
        assert!(res.converged);
        assert!(res.theta_hat.norm() < 1e-9);
    }

    #[test]
    fn mle_clear_separable_sample_hits_boundary() {
        let space = ParamSpace::new(3, 1.0, 1.0).unwrap();
        let samples = vec![PreferenceSample {
            x: vec![1.0, -1.0, 0.0],
            y: 1,
        }];
        let res = fit_mle_clear(&samples, &space, &OptimizerConfig::default()).unwrap();
        assert!((res.theta_hat.norm() - 1.0).abs() < 1e-6);
        assert!(res.theta_hat.in_space(&space));
    }

    #[test]
    fn estimators_are_deterministic() {
        let mut r = rng(22);
        let samples: Vec<PreferenceSample> = (0..40)
            .map(|_| PreferenceSample {
                x: random_vec(3, 1.5, &mut r),
                y: u8::from(r.random::<f64>() < 0.5),
            })
            .collect();
        let space = ParamSpace::new(3, 1.0, 1.0).unwrap();
        let cfg = OptimizerConfig::default();
        let a = fit_mle_clear(&samples, &space, &cfg).unwrap();
        let b = fit_mle_clear(&samples, &space, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noisy_mle_matches_clear_at_large_epsilon() {
        let mut r = rng(23);
        let samples: Vec<PreferenceSample> = (0..200)
            .map(|_| PreferenceSample {
                x: random_vec(4, 1.0, &mut r),
                y: u8::from(r.random::<f64>() < 0.6),
            })
            .collect();
        let space = ParamSpace::new(4, 1.0, 1.0).unwrap();
        let cfg = OptimizerConfig::default();
        let data = RandomizedDataset {
            samples: samples.clone(),
            epsilon: 50.0,
        };
        let noisy = fit_mle_rr(&data, &space, &cfg).unwrap();
        let clear = fit_mle_clear(&samples, &space, &cfg).unwrap();
        let diff = sub(noisy.theta_hat.coords(), clear.theta_hat.coords());
        assert!(norm(&diff) < 1e-4);
        assert!(noisy.notes.is_empty(), "eps=50 is inside the regime");
    }

    #[test]
    fn noisy_mle_flags_low_epsilon_regime() {
        let data = RandomizedDataset {
            samples: symmetric_pair(),
            epsilon: 0.5,
        };
        let space = ParamSpace::new(3, 1.0, 1.0).unwrap();
        let res = fit_mle_rr(&data, &space, &OptimizerConfig::default()).unwrap();
        assert!(!res.notes.is_empty());
    }

    #[test]
    fn noisy_mle_at_zero_epsilon_stays_at_zero() {
        // eps = 0 makes every predicted probability 1/2: zero gradient, so
        // the estimator returns exactly theta = 0 and matches the error of
        // the zero vector rep for rep.
        let mut r = rng(24);
        for rep in 0..50 {
            let samples: Vec<PreferenceSample> = (0..30)
                .map(|_| PreferenceSample {
                    x: random_vec(3, 1.0, &mut r),
                    y: u8::from(r.random::<f64>() < 0.5),
                })
                .collect();
            let data = RandomizedDataset {
                samples,
                epsilon: 0.0,
            };
            let space = ParamSpace::new(3, 1.0, 1.0).unwrap();
            let res = fit_mle_rr(&data, &space, &OptimizerConfig::default()).unwrap();
            assert!(res.theta_hat.norm() == 0.0, "rep {rep}: drifted from zero");
        }
    }

    #[test]
    fn debiased_matches_clear_at_large_epsilon() {
        let mut r = rng(25);
        let samples: Vec<PreferenceSample> = (0..200)
            .map(|_| PreferenceSample {
                x: random_vec(4, 1.0, &mut r),
                y: u8::from(r.random::<f64>() < 0.4),
            })
            .collect();
        let space = ParamSpace::new(4, 1.0, 1.0).unwrap();
        let cfg = OptimizerConfig::default();
        let data = RandomizedDataset {
            samples: samples.clone(),
            epsilon: 50.0,
        };
        let deb = fit_debiased_rr(&data, &space, &cfg).unwrap();
        let clear = fit_mle_clear(&samples, &space, &cfg).unwrap();
        let diff = sub(deb.theta_hat.coords(), clear.theta_hat.coords());
        assert!(norm(&diff) < 1e-4);
    }

    #[test]
    fn sgd_rr_single_step_matches_hand_computation() {
        let space = ParamSpace::new(2, 1.0, 1.0).unwrap();
        let x = vec![0.6, -0.2];
        let eps = 1.0;
        let data = RandomizedDataset {
            samples: vec![PreferenceSample { x: x.clone(), y: 1 }],
            epsilon: eps,
        };
        let cfg = OptimizerConfig {
            kappa_override: Some(2.0),
            gamma_override: Some(0.25),
            ..OptimizerConfig::default()
        };
        let res = sgd_rr(&data, &space, &cfg).unwrap();
        // By hand: s = 1/2 at theta_1 = 0, so g = -x/2;
        // eta_1 = 1/(0.25 * (2 sigmoid(1) - 1) * 2.0 * 1).
        let gamma_eps = 0.25 * (2.0 * sig(1.0) - 1.0);
        let eta = 1.0 / (gamma_eps * 2.0);
        let raw: Vec<f64> = x.iter().map(|v| eta * 0.5 * v).collect();
        let want = project_theta_b(&raw, 1.0);
        for i in 0..2 {
            assert!((res.theta_hat.coords()[i] - want.coords()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn sgd_rr_zero_features_stay_at_zero() {
        let data = RandomizedDataset {
            samples: (0..50)
                .map(|i| PreferenceSample {
                    x: vec![0.0; 3],
                    y: (i % 2) as u8,
                })
                .collect(),
            epsilon: 1.0,
        };
        let space = ParamSpace::new(3, 1.0, 1.0).unwrap();
        let res = sgd_rr(&data, &space, &OptimizerConfig::default()).unwrap();
        assert_eq!(res.theta_hat.norm(), 0.0);
    }

    #[test]
    fn sgd_krr_identical_features_stay_at_zero() {
        let data = RandomizedKWiseDataset {
            samples: (0..30)
                .map(|i| KWiseSample {
                    action_features: vec![vec![0.7, -0.1, 0.4]; 3],
                    y: 1 + i % 3,
                })
                .collect(),
            epsilon: 1.0,
        };
        let space = ParamSpace::new(3, 1.0, 1.0).unwrap();
        let res = sgd_krr(&data, &space, &OptimizerConfig::default()).unwrap();
        assert_eq!(res.theta_hat.norm(), 0.0);
    }

    #[test]
    fn sgd_krr_k2_trajectory_matches_sgd_rr() {
        let mut r = rng(26);
        let n = 400;
        let mut pair_samples = Vec::with_capacity(n);
        let mut kwise_samples = Vec::with_capacity(n);
        for _ in 0..n {
            let phi0 = random_vec(3, 1.0, &mut r);
            let phi1 = random_vec(3, 1.0, &mut r);
            let y = u8::from(r.random::<f64>() < 0.5);
            pair_samples.push(PreferenceSample {
                x: sub(&phi1, &phi0),
                y,
            });
            kwise_samples.push(KWiseSample {
                action_features: vec![phi0, phi1],
                y: 1 + y as usize,
            });
        }
        let space = ParamSpace::new(3, 1.0, 1.0).unwrap();
        // Matching overrides give identical step sizes at K = 2 because
        // (e^eps - 1)/(e^eps + 1) = 2 sigmoid(eps) - 1.
        let cfg = OptimizerConfig {
            kappa_override: Some(1.5),
            gamma_override: Some(0.1),
            ..OptimizerConfig::default()
        };
        let eps = 0.8;
        let a = sgd_rr(
            &RandomizedDataset {
                samples: pair_samples,
                epsilon: eps,
            },
            &space,
            &cfg,
        )
        .unwrap();
        let b = sgd_krr(
            &RandomizedKWiseDataset {
                samples: kwise_samples,
                epsilon: eps,
            },
            &space,
            &cfg,
        )
        .unwrap();
        let diff = sub(a.theta_hat.coords(), b.theta_hat.coords());
        assert!(norm(&diff) <= 1e-10, "trajectories diverged: {}", norm(&diff));
    }

    #[test]
    fn objective_perturbation_degenerate_matches_clear_mle() {
        let mut r = rng(27);
        let samples: Vec<PreferenceSample> = (0..150)
            .map(|_| PreferenceSample {
                x: random_vec(3, 1.2, &mut r),
                y: u8::from(r.random::<f64>() < 0.5),
            })
            .collect();
        let space = ParamSpace::new(3, 1.0, 1.0).unwrap();
        let cfg = OptimizerConfig::default();
        let budget = PrivacyBudget::central_label(1.0, 0.001).unwrap();
        let mut noise_rng = rng(1000);
        let pert = fit_objective_perturbation(
            &samples,
            &space,
            &budget,
            Some(0.0),
            Some(0.0),
            &mut noise_rng,
            &cfg,
        )
        .unwrap();
        let clear = fit_mle_clear(&samples, &space, &cfg).unwrap();
        let diff = sub(pert.theta_hat.coords(), clear.theta_hat.coords());
        assert!(norm(&diff) < 1e-6);
    }

    #[test]
    fn objective_perturbation_rejects_local_budget() {
        let space = ParamSpace::new(3, 1.0, 1.0).unwrap();
        let budget = PrivacyBudget::local(1.0).unwrap();
        let mut noise_rng = rng(5);
        let err = fit_objective_perturbation(
            &symmetric_pair(),
            &space,
            &budget,
            None,
            None,
            &mut noise_rng,
            &OptimizerConfig::default(),
        );
        assert!(matches!(err, Err(Error::Mode(_))));
    }

    #[test]
    fn objective_perturbation_standard_mode_raises_beta_floor() {
        // With eps small the 4L^2/eps floor exceeds sqrt(n)/B; the run must
        // still complete and stay feasible.
        let mut r = rng(28);
        let samples: Vec<PreferenceSample> = (0..50)
            .map(|_| PreferenceSample {
                x: random_vec(3, 1.0, &mut r),
                y: u8::from(r.random::<f64>() < 0.5),
            })
            .collect();
        let space = ParamSpace::new(3, 1.0, 1.0).unwrap();
        let budget = PrivacyBudget::central_standard(0.1, 0.001).unwrap();
        let mut noise_rng = rng(6);
        let res = fit_objective_perturbation(
            &samples,
            &space,
            &budget,
            None,
            None,
            &mut noise_rng,
            &OptimizerConfig::default(),
        )
        .unwrap();
        assert!(res.theta_hat.in_space(&space));
    }

    #[test]
    fn greedy_policy_tie_breaks_to_lowest_index() {
        let theta = RewardParam::zeros(2);
        let actions = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]];
        assert_eq!(greedy_policy_action(&theta, &actions).unwrap(), 0);
    }

    #[test]
    fn greedy_policy_invariant_to_positive_scaling() {
        let mut r = rng(29);
        for _ in 0..50 {
            let c = {
                let mut c = random_vec(2, 1.0, &mut r);
                let m = (c[0] + c[1]) / 2.0;
                c[0] -= m;
                c[1] -= m;
                c
            };
            let theta = RewardParam::new(c.clone()).unwrap();
            let scaled = RewardParam::new(c.iter().map(|v| v * 7.3).collect()).unwrap();
            let actions: Vec<Vec<f64>> = (0..4).map(|_| random_vec(2, 2.0, &mut r)).collect();
            assert_eq!(
                greedy_policy_action(&theta, &actions).unwrap(),
                greedy_policy_action(&scaled, &actions).unwrap()
            );
        }
    }

    #[test]
    fn greedy_policy_matches_brute_force_oracle() {
        let mut r = rng(30);
        for _ in 0..100 {
            let c = {
                let mut c = random_vec(2, 1.0, &mut r);
                let m = (c[0] + c[1]) / 2.0;
                c[0] -= m;
                c[1] -= m;
                c
            };
            let theta = RewardParam::new(c).unwrap();
            let actions: Vec<Vec<f64>> = (0..3).map(|_| random_vec(2, 2.0, &mut r)).collect();
            let got = greedy_policy_action(&theta, &actions).unwrap();
            let mut best = 0;
            for i in 1..3 {
                if dot(&actions[i], theta.coords()) > dot(&actions[best], theta.coords()) {
                    best = i;
                }
            }
            assert_eq!(got, best);
        }
    }

    #[test]
    fn greedy_policy_empty_errors() {
        assert!(greedy_policy_action(&RewardParam::zeros(2), &[]).is_err());
    }

    #[test]
    fn every_estimator_output_is_feasible() {
        let mut r = rng(31);
        let samples: Vec<PreferenceSample> = (0..100)
            .map(|_| PreferenceSample {
                x: random_vec(3, 2.0, &mut r),
                y: u8::from(r.random::<f64>() < 0.7),
            })
            .collect();
        let space = ParamSpace::new(3, 0.8, 1.0).unwrap();
        let cfg = OptimizerConfig::default();
        let data = RandomizedDataset {
            samples: samples.clone(),
            epsilon: 1.0,
        };
        assert!(fit_mle_clear(&samples, &space, &cfg)
            .unwrap()
            .theta_hat
            .in_space(&space));
        assert!(fit_mle_rr(&data, &space, &cfg)
            .unwrap()
            .theta_hat
            .in_space(&space));
        assert!(fit_debiased_rr(&data, &space, &cfg)
            .unwrap()
            .theta_hat
            .in_space(&space));
        assert!(sgd_rr(&data, &space, &cfg).unwrap().theta_hat.in_space(&space));
        let budget = PrivacyBudget::central_label(1.0, 0.001).unwrap();
        let mut noise_rng = rng(7);
        assert!(fit_objective_perturbation(
            &samples, &space, &budget, None, None, &mut noise_rng, &cfg
        )
        .unwrap()
        .theta_hat
        .in_space(&space));
    }
}
