//! Preference probability models and the reward-parameter space.
//!
//! The reward model is linear: an action with feature vector `phi` has reward
//! `phi . theta`, and a pairwise comparison with differential feature
//! `x = phi1 - phi0` is won by action 1 with probability `sigmoid(x . theta)`
//! (Bradley-Terry-Luce). The Thurstone variant replaces the sigmoid with the
//! standard normal CDF, and K-wise comparisons follow the top-choice
//! Plackett-Luce softmax.
//!
//! The parameter itself lives in the centered ball
//! `Theta_B = { theta : <1, theta> = 0, ||theta|| <= B }`; centering makes the
//! parameter identifiable (adding a constant to every reward changes nothing).

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};

/// Tolerance on the centering constraint `<1, theta> = 0`.
pub const CENTERING_TOL: f64 = 1e-9;
/// Slack allowed on norm bounds (`||theta|| <= B + NORM_SLACK`).
pub const NORM_SLACK: f64 = 1e-9;

/// A reward parameter vector constrained to the centered ball `Theta_B`.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardParam {
    coords: Vec<f64>,
}

impl RewardParam {
    /// Wraps a coordinate vector, checking the centering constraint.
    /// The norm bound is relative to a `ParamSpace`; see [`RewardParam::in_space`].
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::domain("reward parameter needs dimension >= 2"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain("reward parameter has non-finite coordinate"));
        }
        let s: f64 = coords.iter().sum();
        if s.abs() > CENTERING_TOL {
            return Err(Error::domain(format!(
                "reward parameter not centered: coordinate sum {s:e}"
            )));
        }
        Ok(RewardParam { coords })
    }

    /// The zero vector, feasible in every `Theta_B`.
    pub fn zeros(d: usize) -> Self {
        RewardParam {
            coords: vec![0.0; d],
        }
    }

    /// Internal constructor skipping the centering check; used where the
    /// caller centers by construction (projection) and by finite-difference
    /// probes that deliberately step off the constraint plane.
    pub(crate) fn from_centered(coords: Vec<f64>) -> Self {
        RewardParam { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.coords)
    }

    /// True when both `Theta_B` invariants hold for the given space.
    pub fn in_space(&self, space: &ParamSpace) -> bool {
        self.dim() == space.d
            && self.coords.iter().sum::<f64>().abs() <= CENTERING_TOL
            && self.norm() <= space.norm_bound + NORM_SLACK
    }
}

/// The problem geometry: dimension `d`, reward-norm bound `B`, and
/// per-action feature-norm bound `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpace {
    pub d: usize,
    /// Bound `B` on `||theta||`.
    pub norm_bound: f64,
    /// Bound `L` on `||phi(s, a)||`, so differential features satisfy `||x|| <= 2L`.
    pub feature_bound: f64,
}

impl ParamSpace {
    pub fn new(d: usize, norm_bound: f64, feature_bound: f64) -> Result<Self> {
        if d < 2 {
            // A nonzero centered vector needs at least two coordinates.
            return Err(Error::domain(format!("dimension must be >= 2, got {d}")));
        }
        if !(norm_bound > 0.0) || !(feature_bound > 0.0) {
            return Err(Error::domain("norm bounds B and L must be positive"));
        }
        Ok(ParamSpace {
            d,
            norm_bound,
            feature_bound,
        })
    }
}

/// One pairwise comparison: differential feature `x = phi(s,a1) - phi(s,a0)`
/// and binary label `y` (1 means action 1 preferred).
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceSample {
    pub x: Vec<f64>,
    pub y: u8,
}

/// One K-wise comparison: per-action features and the index (1-based, in
/// `1..=K`) of the most preferred action.
#[derive(Debug, Clone, PartialEq)]
pub struct KWiseSample {
    pub action_features: Vec<Vec<f64>>,
    pub y: usize,
}

impl KWiseSample {
    pub fn k(&self) -> usize {
        self.action_features.len()
    }
}

/// Symmetric sample covariance `Sigma_D = (1/n) sum_i x_i x_i^T` of the
/// differential features, plus the sample count it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    entries: Vec<f64>, // row-major d*d
    d: usize,
    n: usize,
}

impl CovarianceMatrix {
    /// Builds from row-major entries, checking symmetry to 1e-12.
    pub fn from_entries(d: usize, entries: Vec<f64>, n: usize) -> Result<Self> {
        if entries.len() != d * d {
            return Err(Error::domain("covariance entries have wrong length"));
        }
        for i in 0..d {
            for j in (i + 1)..d {
                if (entries[i * d + j] - entries[j * d + i]).abs() > 1e-12 {
                    return Err(Error::domain("covariance matrix is not symmetric"));
                }
            }
        }
        Ok(CovarianceMatrix { entries, d, n })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn sample_count(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.d + j]
    }

    /// Quadratic form `v^T (Sigma_D + lambda I) v`.
    pub fn regularized_quadratic_form(&self, v: &[f64], lambda: f64) -> f64 {
        let mut q = 0.0;
        for i in 0..self.d {
            for j in 0..self.d {
                q += v[i] * self.entry(i, j) * v[j];
            }
        }
        q + lambda * dot(v, v)
    }
}

/// Numerically stable sigmoid `1 / (1 + exp(-z))`.
///
/// Errors on non-finite input; for finite `z` the result is strictly inside
/// `(0, 1)`, with saturated tails clamped to the representable neighbors of
/// 0 and 1.
pub fn sigmoid(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::domain(format!("sigmoid input must be finite: {z}")));
    }
    Ok(sig(z))
}

/// Unchecked stable sigmoid for internal hot paths.
///
/// For z < 0 evaluates `exp(z) / (1 + exp(z))` so the exponential never
/// overflows; both branches share the denominator `1 + exp(-|z|)`, which makes
/// `sig(z) + sig(-z)` sum to 1 to machine precision. The tails are clamped to
/// the representable neighbors of 0 and 1 (within one ulp of the true value)
/// so the output stays strictly inside (0, 1) for every finite input.
#[inline]
pub(crate) fn sig(z: f64) -> f64 {
    // largest double below 1.0
    const ONE_BELOW: f64 = 1.0 - f64::EPSILON / 2.0;
    if z >= 0.0 {
        (1.0 / (1.0 + (-z).exp())).min(ONE_BELOW)
    } else {
        let e = z.exp();
        (e / (1.0 + e)).max(f64::MIN_POSITIVE)
    }
}

/// `log(sigmoid(z))`, evaluated as `-softplus(-z)` so it stays accurate for
/// large |z| where `sigmoid(z)` rounds to 0 or 1. `log(1 - sigmoid(z))` is
/// `log_sig(-z)`.
#[inline]
pub(crate) fn log_sig(z: f64) -> f64 {
    // softplus(t) = ln(1 + e^t) = max(t, 0) + ln(1 + e^{-|t|})
    let t = -z;
    -(t.max(0.0) + (-t.abs()).exp().ln_1p())
}

/// `P[y = 1 | x] = sigmoid(x . theta)` under the BTL model.
pub fn btl_label_prob(x: &[f64], theta: &RewardParam) -> Result<f64> {
    if x.len() != theta.dim() {
        return Err(Error::domain(format!(
            "dimension mismatch: feature has {} coordinates, parameter has {}",
            x.len(),
            theta.dim()
        )));
    }
    Ok(sig(dot(x, theta.coords())))
}

/// Top-choice Plackett-Luce probabilities: component `k` is
/// `exp(phi_k . theta) / sum_j exp(phi_j . theta)`, computed with
/// max-subtraction so the exponentials cannot overflow.
pub fn pl_label_probs(action_features: &[Vec<f64>], theta: &RewardParam) -> Result<Vec<f64>> {
    if action_features.len() < 2 {
        return Err(Error::domain("Plackett-Luce needs at least 2 actions"));
    }
    for phi in action_features {
        if phi.len() != theta.dim() {
            return Err(Error::domain("action feature dimension mismatch"));
        }
    }
    Ok(softmax_scores(action_features, theta.coords()))
}

pub(crate) fn softmax_scores(action_features: &[Vec<f64>], theta: &[f64]) -> Vec<f64> {
    let scores: Vec<f64> = action_features.iter().map(|phi| dot(phi, theta)).collect();
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `P[y = 1 | x] = Phi(x . theta)` under the Thurstone model, where `Phi` is
/// the standard normal CDF.
pub fn thurstone_label_prob(x: &[f64], theta: &RewardParam) -> Result<f64> {
    if x.len() != theta.dim() {
        return Err(Error::domain("dimension mismatch in thurstone_label_prob"));
    }
    Ok(normal_cdf(dot(x, theta.coords())))
}

/// The curvature constant `gamma = 1 / (2 + e^{-2LB} + e^{2LB})`: a lower
/// bound on `sigmoid'(x . theta)` over `theta` in `Theta_B` and `||x|| <= 2L`.
pub fn gamma_constant(feature_bound: f64, norm_bound: f64) -> Result<f64> {
    if !(feature_bound >= 0.0) || !(norm_bound >= 0.0) {
        return Err(Error::domain("gamma_constant needs L >= 0 and B >= 0"));
    }
    let c = 2.0 * feature_bound * norm_bound;
    Ok(1.0 / (2.0 + (-c).exp() + c.exp()))
}

/// Sample covariance `(1/n) sum_i x_i x_i^T`, exactly symmetric by
/// construction (the lower triangle is mirrored from the upper).
pub fn empirical_covariance(samples: &[PreferenceSample]) -> Result<CovarianceMatrix> {
    if samples.is_empty() {
        return Err(Error::domain("empirical_covariance needs at least 1 sample"));
    }
    let d = samples[0].x.len();
    if samples.iter().any(|s| s.x.len() != d) {
        return Err(Error::domain("samples have inconsistent dimensions"));
    }
    let n = samples.len();
    let mut entries = vec![0.0; d * d];
    for s in samples {
        for i in 0..d {
            for j in i..d {
                entries[i * d + j] += s.x[i] * s.x[j];
            }
        }
    }
    let inv_n = 1.0 / n as f64;
    for i in 0..d {
        for j in i..d {
            entries[i * d + j] *= inv_n;
            entries[j * d + i] = entries[i * d + j];
        }
    }
    Ok(CovarianceMatrix { entries, d, n })
}

/// Smallest eigenvalue of a symmetric matrix via cyclic Jacobi sweeps.
/// Rejects matrices that are asymmetric beyond 1e-9.
pub fn min_eigenvalue(m: &CovarianceMatrix) -> Result<f64> {
    let d = m.d;
    for i in 0..d {
        for j in (i + 1)..d {
            if (m.entry(i, j) - m.entry(j, i)).abs() > 1e-9 {
                return Err(Error::domain("matrix is asymmetric beyond 1e-9"));
            }
        }
    }
    let mut a = m.entries.clone();
    // Symmetrize exactly so the rotations stay orthogonal.
    for i in 0..d {
        for j in (i + 1)..d {
            let avg = 0.5 * (a[i * d + j] + a[j * d + i]);
            a[i * d + j] = avg;
            a[j * d + i] = avg;
        }
    }
    Ok(jacobi_eigenvalues(&mut a, d)
        .into_iter()
        .fold(f64::INFINITY, f64::min))
}

/// Cyclic Jacobi diagonalization. Quadratic convergence makes a handful of
/// sweeps plenty at d <= 64; returns the diagonal after the off-diagonal mass
/// drops below machine-level tolerance.
fn jacobi_eigenvalues(a: &mut [f64], d: usize) -> Vec<f64> {
    if d == 1 {
        return vec![a[0]];
    }
    let scale: f64 = (0..d)
        .map(|i| a[i * d + i].abs())
        .fold(1e-300, f64::max)
        .max(off_diagonal_norm(a, d));
    let tol = 1e-15 * scale;
    for _sweep in 0..64 {
        if off_diagonal_norm(a, d) <= tol {
            break;
        }
        for p in 0..d - 1 {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                if apq.abs() <= 1e-300 * scale {
                    continue;
                }
                // Classic Jacobi rotation annihilating a[p][q].
                let theta = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..d).map(|i| a[i * d + i]).collect()
}

fn off_diagonal_norm(a: &[f64], d: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                s += a[i * d + j] * a[i * d + j];
            }
        }
    }
    s.sqrt()
}

/// Standard normal CDF via Cody's rational Chebyshev approximation to the
/// complementary error function (`Phi(z) = erfc(-z / sqrt(2)) / 2`).
/// Absolute accuracy is well below 1e-14 everywhere.
pub(crate) fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc_cody(-z / std::f64::consts::SQRT_2)
}

/// W. J. Cody's CALERF rational approximations for erf/erfc.
fn erfc_cody(x: f64) -> f64 {
    let y = x.abs();
    if y <= 0.46875 {
        return 1.0 - erf_small(x);
    }
    let r = if y <= 4.0 {
        erfc_mid(y)
    } else {
        erfc_large(y)
    };
    if x < 0.0 {
        2.0 - r
    } else {
        r
    }
}

// erf(x) for |x| <= 0.46875.
fn erf_small(x: f64) -> f64 {
    const A: [f64; 5] = [
        3.16112374387056560e0,
        1.13864154151050156e2,
        3.77485237685302021e2,
        3.20937758913846947e3,
        1.85777706184603153e-1,
    ];
    const B: [f64; 4] = [
        2.36012909523441209e1,
        2.44024637934444173e2,
        1.28261652607737228e3,
        2.84423683343917062e3,
    ];
    let z = x * x;
    let mut num = A[4] * z;
    let mut den = z;
    for i in 0..3 {
        num = (num + A[i]) * z;
        den = (den + B[i]) * z;
    }
    x * (num + A[3]) / (den + B[3])
}

// erfc(y) for 0.46875 < y <= 4.
fn erfc_mid(y: f64) -> f64 {
    const C: [f64; 9] = [
        5.64188496988670089e-1,
        8.88314979438837594e0,
        6.61191906371416295e1,
        2.98635138197400131e2,
        8.81952221241769090e2,
        1.71204761263407058e3,
        2.05107837782607147e3,
        1.23033935479799725e3,
        2.15311535474403846e-8,
    ];
    const D: [f64; 8] = [
        1.57449261107098347e1,
        1.17693950891312499e2,
        5.37181101862009858e2,
        1.62138957456669019e3,
        3.29079923573345963e3,
        4.36261909014324716e3,
        3.43936767414372164e3,
        1.23033935480374942e3,
    ];
    let mut num = C[8] * y;
    let mut den = y;
    for i in 0..7 {
        num = (num + C[i]) * y;
        den = (den + D[i]) * y;
    }
    let ratio = (num + C[7]) / (den + D[7]);
    scaled_exp_product(y, ratio)
}

// erfc(y) for y > 4.
fn erfc_large(y: f64) -> f64 {
    const P: [f64; 6] = [
        3.05326634961232344e-1,
        3.60344899949804439e-1,
        1.25781726111229246e-1,
        1.60837851487422766e-2,
        6.58749161529837803e-4,
        1.63153871373020978e-2,
    ];
    const Q: [f64; 5] = [
        2.56852019228982242e0,
        1.87295284992346047e0,
        5.27905102951428412e-1,
        6.05183413124413191e-2,
        2.33520497626869185e-3,
    ];
    if y >= 26.6 {
        return 0.0; // below the smallest positive normal
    }
    let z = 1.0 / (y * y);
    let mut num = P[5] * z;
    let mut den = z;
    for i in 0..4 {
        num = (num + P[i]) * z;
        den = (den + Q[i]) * z;
    }
    let mut ratio = z * (num + P[4]) / (den + Q[4]);
    const INV_SQRT_PI: f64 = 5.6418958354775628695e-1;
    ratio = (INV_SQRT_PI - ratio) / y;
    scaled_exp_product(y, ratio)
}

// exp(-y^2) * ratio with the argument split to limit rounding in the
// exponential (the standard CALERF trick).
fn scaled_exp_product(y: f64, ratio: f64) -> f64 {
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp() * ratio
}
