//! Synthetic instance generation for the simulation protocol.
//!
//! The true parameter is a random direction on the sphere of `Theta_B`
//! (standard normal draw, centered, rescaled to norm exactly B). Action
//! features are iid standard normal; `gaussian-clipped` mode radially
//! rescales any feature with norm above `L` so the boundedness assumption
//! holds, while the default `gaussian-unbounded` mode matches the protocol
//! literally and treats `L` as a nominal constant.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, sub};
use crate::model::{normal_cdf, sig, softmax_scores, KWiseSample, PreferenceSample, RewardParam};
use crate::privacy::{
    k_randomized_response, randomized_response, RandomizedDataset, RandomizedKWiseDataset,
    StreamRng,
};

/// How action features are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureMode {
    /// Raw standard normals; `L` is reported, not enforced.
    GaussianUnbounded,
    /// Standard normals radially clipped to norm `L`.
    GaussianClipped,
}

/// Which preference model labels are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreferenceModel {
    Btl,
    Thurstone,
    PlackettLuce,
}

/// Everything needed to generate one synthetic instance.
#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub d: usize,
    pub n: usize,
    /// Norm of the generated true parameter.
    pub norm_bound: f64,
    /// Per-action feature norm bound (enforced only in clipped mode).
    pub feature_bound: f64,
    pub feature_mode: FeatureMode,
    pub model: PreferenceModel,
    /// Number of compared actions; used only by the Plackett-Luce model.
    pub k: usize,
    pub seed: u64,
}

impl GenSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::domain("generation needs d >= 2"));
        }
        if self.n < 1 {
            return Err(Error::domain("generation needs n >= 1"));
        }
        if !(self.norm_bound > 0.0) || !(self.feature_bound > 0.0) {
            return Err(Error::domain("bounds B and L must be positive"));
        }
        if self.model == PreferenceModel::PlackettLuce && self.k < 2 {
            return Err(Error::domain("Plackett-Luce needs K >= 2"));
        }
        Ok(())
    }
}

/// Draws the true parameter: standard normals, centered, rescaled to norm
/// exactly `B` so it sits on the sphere of `Theta_B`. The probability-zero
/// degenerate draw (all coordinates equal) is redrawn.
pub fn generate_theta_star(spec: &GenSpec, rng: &mut StreamRng) -> Result<RewardParam> {
    spec.validate()?;
    loop {
        let mut c: Vec<f64> = (0..spec.d)
            .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
            .collect();
        let mean = c.iter().sum::<f64>() / spec.d as f64;
        c.iter_mut().for_each(|v| *v -= mean);
        let n = norm(&c);
        if n < 1e-12 {
            continue;
        }
        let scale = spec.norm_bound / n;
        c.iter_mut().for_each(|v| *v *= scale);
        return Ok(RewardParam::from_centered(c));
    }
}

fn draw_feature(spec: &GenSpec, rng: &mut StreamRng) -> Vec<f64> {
    let mut phi: Vec<f64> = (0..spec.d)
        .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
        .collect();
    if spec.feature_mode == FeatureMode::GaussianClipped {
        let n = norm(&phi);
        if n > spec.feature_bound {
            let scale = spec.feature_bound / n;
            phi.iter_mut().for_each(|v| *v *= scale);
        }
    }
    phi
}

/// Generates pairwise comparisons: two action features per sample, a
/// differential feature, and a label from the BTL or Thurstone probability.
pub fn generate_pairwise(
    spec: &GenSpec,
    theta_star: &RewardParam,
    rng: &mut StreamRng,
) -> Result<Vec<PreferenceSample>> {
    spec.validate()?;
    if theta_star.dim() != spec.d {
        return Err(Error::domain("theta_star dimension does not match spec"));
    }
    if spec.model == PreferenceModel::PlackettLuce {
        return Err(Error::domain(
            "Plackett-Luce generates K-wise samples; use generate_kwise",
        ));
    }
    let mut samples = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let phi0 = draw_feature(spec, rng);
        let phi1 = draw_feature(spec, rng);
        let x = sub(&phi1, &phi0);
        let z = dot(&x, theta_star.coords());
        let p1 = match spec.model {
            PreferenceModel::Btl => sig(z),
            PreferenceModel::Thurstone => normal_cdf(z),
            PreferenceModel::PlackettLuce => unreachable!(),
        };
        let y = u8::from(rng.random::<f64>() < p1);
        samples.push(PreferenceSample { x, y });
    }
    Ok(samples)
}

/// Generates K-wise comparisons with a top-choice Plackett-Luce label.
pub fn generate_kwise(
    spec: &GenSpec,
    theta_star: &RewardParam,
    rng: &mut StreamRng,
) -> Result<Vec<KWiseSample>> {
    spec.validate()?;
    if theta_star.dim() != spec.d {
        return Err(Error::domain("theta_star dimension does not match spec"));
    }
    if spec.model != PreferenceModel::PlackettLuce {
        return Err(Error::domain("K-wise generation needs the Plackett-Luce model"));
    }
    let mut samples = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let action_features: Vec<Vec<f64>> =
            (0..spec.k).map(|_| draw_feature(spec, rng)).collect();
        let probs = softmax_scores(&action_features, theta_star.coords());
        let u = rng.random::<f64>();
        let mut acc = 0.0;
        let mut y = spec.k;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                y = i + 1;
                break;
            }
        }
        samples.push(KWiseSample { action_features, y });
    }
    Ok(samples)
}

/// Passes every binary label through randomized response; features are left
/// untouched and the spent budget is recorded on the dataset.
pub fn randomize_labels(
    samples: &[PreferenceSample],
    epsilon: f64,
    rng: &mut StreamRng,
) -> Result<RandomizedDataset> {
    let mut randomized = Vec::with_capacity(samples.len());
    for s in samples {
        randomized.push(PreferenceSample {
            x: s.x.clone(),
            y: randomized_response(s.y, epsilon, rng)?,
        });
    }
    Ok(RandomizedDataset {
        samples: randomized,
        epsilon,
    })
}

/// K-wise analogue of [`randomize_labels`] using K-ary randomized response.
pub fn randomize_kwise_labels(
    samples: &[KWiseSample],
    epsilon: f64,
    rng: &mut StreamRng,
) -> Result<RandomizedKWiseDataset> {
    let mut randomized = Vec::with_capacity(samples.len());
    for s in samples {
        randomized.push(KWiseSample {
            action_features: s.action_features.clone(),
            y: k_randomized_response(s.y, s.k(), epsilon, rng)?,
        });
    }
    Ok(RandomizedKWiseDataset {
        samples: randomized,
        epsilon,
    })
}

/// Observed scale report for unbounded mode: the q-th percentile of the
/// differential-feature norms divided by 2, an empirical stand-in for the
/// nominal per-action bound `L`.
pub fn observed_feature_bound(samples: &[PreferenceSample], q: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::domain("need at least one sample"));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::domain("percentile must be in [0, 1]"));
    }
    let mut norms: Vec<f64> = samples.iter().map(|s| norm(&s.x) / 2.0).collect();
    norms.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let idx = ((norms.len() - 1) as f64 * q).round() as usize;
    Ok(norms[idx])
}
