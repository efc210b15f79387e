//! Configuration-driven experiment sweeps with deterministic, per-repetition
//! randomness, plus the `check-privacy` and `gradcheck` verification reports.
//!
//! Every `(estimator, n, epsilon, repetition)` cell of the sweep grid derives
//! its own seed by splitmix-mixing the base seed with the cell coordinates,
//! and each consumer inside a cell (parameter draw, data generation, label
//! randomization, objective noise) uses its own stream index. Repetitions are
//! therefore independent work items: the sweep runs them on a rayon pool when
//! the `parallel` feature is enabled (the default) and the result is
//! byte-identical to a sequential run at any worker count.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use rand::Rng;

use crate::datagen::{
    generate_kwise, generate_pairwise, generate_theta_star, randomize_kwise_labels,
    randomize_labels, FeatureMode, GenSpec, PreferenceModel,
};
use crate::error::{Error, Result};
use crate::estimators::{
    fit_debiased_rr, fit_mle_clear, fit_mle_rr, fit_objective_perturbation, sgd_krr, sgd_rr,
    EstimatorResult, OptimizerConfig, StepSchedule,
};
use crate::linalg::{norm, sub};
use crate::losses::{debiased_rr_loss, nll_clear, nll_rr, sgd_krr_gradient, sgd_rr_gradient};
use crate::metrics::{default_seminorm_lambda, l2_error, seminorm_error, ErrorRecord};
use crate::model::{
    empirical_covariance, gamma_constant, sig, softmax_scores, ParamSpace, PreferenceSample,
    RewardParam,
};
use crate::privacy::{krr_keep_probability, k_randomized_response, randomized_response, PrivacyBudget, RngStream, StreamRng};

/// Nominal geometry used by sweeps: the generated parameter has norm 1 and
/// the per-action feature scale is treated as 1.
pub const SWEEP_NORM_BOUND: f64 = 1.0;
pub const SWEEP_FEATURE_BOUND: f64 = 1.0;

/// Stream indices, one per randomness consumer within a repetition.
const STREAM_THETA: u64 = 0;
const STREAM_DATA: u64 = 1;
const STREAM_RANDOMIZE: u64 = 2;
const STREAM_NOISE: u64 = 3;

/// The estimators a sweep can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EstimatorKind {
    Mle,
    MleRr,
    DebiasedRr,
    SgdRr,
    SgdKrr,
    ObjPert,
}

impl EstimatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::Mle => "mle",
            EstimatorKind::MleRr => "mle-rr",
            EstimatorKind::DebiasedRr => "debiased-rr",
            EstimatorKind::SgdRr => "sgd-rr",
            EstimatorKind::SgdKrr => "sgd-krr",
            EstimatorKind::ObjPert => "obj-pert",
        }
    }

    fn needs_kwise_data(&self) -> bool {
        matches!(self, EstimatorKind::SgdKrr)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mle" => Ok(EstimatorKind::Mle),
            "mle-rr" => Ok(EstimatorKind::MleRr),
            "debiased-rr" => Ok(EstimatorKind::DebiasedRr),
            "sgd-rr" => Ok(EstimatorKind::SgdRr),
            "sgd-krr" => Ok(EstimatorKind::SgdKrr),
            "obj-pert" => Ok(EstimatorKind::ObjPert),
            other => Err(Error::config(
                "estimators",
                format!("unknown estimator tag `{other}`"),
            )),
        }
    }
}

/// A full sweep description, parsed from the flat `key = value` config format.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub d: usize,
    pub n_values: Vec<usize>,
    pub epsilon_values: Vec<f64>,
    pub delta: f64,
    pub estimators: Vec<EstimatorKind>,
    pub repetitions: u32,
    pub base_seed: u64,
    pub model: PreferenceModel,
    pub k: usize,
    pub step_schedule: StepSchedule,
    pub output_path: String,
}

impl ExperimentConfig {
    /// Parses the flat config format: one `key = value` per line, `#` starts
    /// a comment, lists are comma-separated.
    pub fn parse(text: &str) -> Result<Self> {
        let mut d = None;
        let mut n_values = None;
        let mut epsilon_values = None;
        let mut delta = 0.001;
        let mut estimators = None;
        let mut repetitions = None;
        let mut base_seed = 0u64;
        let mut model = PreferenceModel::Btl;
        let mut k = 2usize;
        let mut step_schedule = StepSchedule::InverseT;
        let mut output_path = String::from("results.csv");

        for (idx, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: idx + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "d" => d = Some(parse_scalar(key, value)?),
                "n_values" => n_values = Some(parse_list(key, value)?),
                "epsilon_values" => epsilon_values = Some(parse_list(key, value)?),
                "delta" => delta = parse_scalar(key, value)?,
                "estimators" => {
                    let mut tags = Vec::new();
                    for tok in value.split(',') {
                        tags.push(tok.trim().parse::<EstimatorKind>()?);
                    }
                    estimators = Some(tags);
                }
                "repetitions" => repetitions = Some(parse_scalar(key, value)?),
                "base_seed" => base_seed = parse_scalar(key, value)?,
                "model" => {
                    model = match value {
                        "btl" => PreferenceModel::Btl,
                        "thurstone" => PreferenceModel::Thurstone,
                        "plackett-luce" => PreferenceModel::PlackettLuce,
                        other => {
                            return Err(Error::config(
                                "model",
                                format!("unknown model `{other}`"),
                            ))
                        }
                    }
                }
                "k" => k = parse_scalar(key, value)?,
                "step_schedule" => {
                    step_schedule = match value {
                        "inverse-t" => StepSchedule::InverseT,
                        "constant" => StepSchedule::Constant,
                        // the fixed rate the simulations use
                        "paper-eta" => StepSchedule::Fixed(0.1),
                        other => {
                            return Err(Error::config(
                                "step_schedule",
                                format!("unknown schedule `{other}`"),
                            ))
                        }
                    }
                }
                "output_path" => output_path = value.to_string(),
                other => {
                    return Err(Error::config(other, "unknown configuration key"));
                }
            }
        }

        let cfg = ExperimentConfig {
            d: d.ok_or_else(|| Error::config("d", "missing required key"))?,
            n_values: n_values.ok_or_else(|| Error::config("n_values", "missing required key"))?,
            epsilon_values: epsilon_values
                .ok_or_else(|| Error::config("epsilon_values", "missing required key"))?,
            delta,
            estimators: estimators
                .ok_or_else(|| Error::config("estimators", "missing required key"))?,
            repetitions: repetitions
                .ok_or_else(|| Error::config("repetitions", "missing required key"))?,
            base_seed,
            model,
            k,
            step_schedule,
            output_path,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::config("d", "must be >= 2"));
        }
        if self.n_values.is_empty() {
            return Err(Error::config("n_values", "must be nonempty"));
        }
        if self.n_values.iter().any(|n| *n == 0) {
            return Err(Error::config("n_values", "entries must be >= 1"));
        }
        if self.epsilon_values.is_empty() {
            return Err(Error::config("epsilon_values", "must be nonempty"));
        }
        if self.epsilon_values.iter().any(|e| !(*e >= 0.0)) {
            return Err(Error::config("epsilon_values", "entries must be >= 0"));
        }
        if self.estimators.is_empty() {
            return Err(Error::config("estimators", "must be nonempty"));
        }
        if self.repetitions == 0 {
            return Err(Error::config("repetitions", "must be >= 1"));
        }
        if self.estimators.contains(&EstimatorKind::ObjPert)
            && !(self.delta > 0.0 && self.delta < 1.0)
        {
            return Err(Error::config(
                "delta",
                "must be in (0, 1) when obj-pert is present",
            ));
        }
        let kwise_model = self.model == PreferenceModel::PlackettLuce;
        for est in &self.estimators {
            if est.needs_kwise_data() && !kwise_model {
                return Err(Error::config(
                    "estimators",
                    "sgd-krr needs model = plackett-luce",
                ));
            }
            if !est.needs_kwise_data() && kwise_model {
                return Err(Error::config(
                    "estimators",
                    format!("{est} needs a pairwise model (btl or thurstone)"),
                ));
            }
        }
        if kwise_model && self.k < 2 {
            return Err(Error::config("k", "must be >= 2 for plackett-luce"));
        }
        Ok(())
    }
}

fn parse_scalar<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| Error::config(key, format!("cannot parse `{value}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|tok| parse_scalar(key, tok.trim()))
        .collect()
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// The per-repetition seed: a splitmix chain over the base seed, the
/// estimator tag, the sample count, the epsilon bit pattern, and the
/// repetition index. Any row of a sweep can be reproduced standalone from
/// this value.
pub fn repetition_seed(
    base_seed: u64,
    estimator: EstimatorKind,
    n: usize,
    epsilon: f64,
    repetition: u32,
) -> u64 {
    let mut h = splitmix64(base_seed);
    h = splitmix64(h ^ fnv1a(estimator.as_str().as_bytes()));
    h = splitmix64(h ^ n as u64);
    h = splitmix64(h ^ epsilon.to_bits());
    h ^ splitmix64(u64::from(repetition))
}

#[derive(Debug, Clone, Copy)]
struct SweepTask {
    estimator: EstimatorKind,
    n: usize,
    epsilon: f64,
    repetition: u32,
}

fn task_grid(cfg: &ExperimentConfig) -> Vec<SweepTask> {
    let mut estimators = cfg.estimators.clone();
    estimators.sort_by_key(|e| e.as_str());
    estimators.dedup();
    let mut tasks = Vec::new();
    for est in &estimators {
        let mut ns = cfg.n_values.clone();
        ns.sort_unstable();
        ns.dedup();
        for n in ns {
            let mut eps = cfg.epsilon_values.clone();
            eps.sort_by(|a, b| a.partial_cmp(b).unwrap());
            eps.dedup();
            for e in eps {
                for rep in 0..cfg.repetitions {
                    tasks.push(SweepTask {
                        estimator: *est,
                        n,
                        epsilon: e,
                        repetition: rep,
                    });
                }
            }
        }
    }
    tasks
}

/// Runs one grid cell standalone; rows in a sweep's CSV can be reproduced by
/// calling this with the same coordinates.
pub fn run_repetition(
    cfg: &ExperimentConfig,
    estimator: EstimatorKind,
    n: usize,
    epsilon: f64,
    repetition: u32,
) -> Result<ErrorRecord> {
    let task = SweepTask {
        estimator,
        n,
        epsilon,
        repetition,
    };
    run_task(cfg, &task)
}

fn run_task(cfg: &ExperimentConfig, task: &SweepTask) -> Result<ErrorRecord> {
    let seed = repetition_seed(
        cfg.base_seed,
        task.estimator,
        task.n,
        task.epsilon,
        task.repetition,
    );
    let space = ParamSpace::new(cfg.d, SWEEP_NORM_BOUND, SWEEP_FEATURE_BOUND)?;
    let gen = GenSpec {
        d: cfg.d,
        n: task.n,
        norm_bound: SWEEP_NORM_BOUND,
        feature_bound: SWEEP_FEATURE_BOUND,
        feature_mode: FeatureMode::GaussianUnbounded,
        model: cfg.model,
        k: cfg.k,
        seed,
    };
    let opt = OptimizerConfig {
        step: cfg.step_schedule,
        // Sum-form objectives have O(n)-scaled gradients; 1e-4 here is
        // ~1e-8 parameter precision at the sweep sizes, far below the
        // statistical error being measured.
        gradient_tolerance: 1e-4,
        ..OptimizerConfig::default()
    };
    let theta_star = generate_theta_star(&gen, &mut RngStream::new(seed, STREAM_THETA).rng())?;
    let mut data_rng = RngStream::new(seed, STREAM_DATA).rng();
    let mut randomize_rng = RngStream::new(seed, STREAM_RANDOMIZE).rng();

    let (result, pairwise): (EstimatorResult, Vec<PreferenceSample>) = if task
        .estimator
        .needs_kwise_data()
    {
        let samples = generate_kwise(&gen, &theta_star, &mut data_rng)?;
        let randomized = randomize_kwise_labels(&samples, task.epsilon, &mut randomize_rng)?;
        let result = sgd_krr(&randomized, &space, &opt)?;
        // Pool pairwise feature differences for the covariance metric.
        let diffs: Vec<PreferenceSample> = samples
            .iter()
            .flat_map(|s| {
                let mut pairs = Vec::new();
                for i in 0..s.k() {
                    for j in (i + 1)..s.k() {
                        pairs.push(PreferenceSample {
                            x: sub(&s.action_features[i], &s.action_features[j]),
                            y: 0,
                        });
                    }
                }
                pairs
            })
            .collect();
        (result, diffs)
    } else {
        let samples = generate_pairwise(&gen, &theta_star, &mut data_rng)?;
        let result = match task.estimator {
            EstimatorKind::Mle => fit_mle_clear(&samples, &space, &opt)?,
            EstimatorKind::MleRr => {
                let data = randomize_labels(&samples, task.epsilon, &mut randomize_rng)?;
                fit_mle_rr(&data, &space, &opt)?
            }
            EstimatorKind::DebiasedRr => {
                let data = randomize_labels(&samples, task.epsilon, &mut randomize_rng)?;
                fit_debiased_rr(&data, &space, &opt)?
            }
            EstimatorKind::SgdRr => {
                let data = randomize_labels(&samples, task.epsilon, &mut randomize_rng)?;
                sgd_rr(&data, &space, &opt)?
            }
            EstimatorKind::ObjPert => {
                let budget = PrivacyBudget::central_label(task.epsilon, cfg.delta)?;
                let mut noise_rng = RngStream::new(seed, STREAM_NOISE).rng();
                fit_objective_perturbation(
                    &samples, &space, &budget, None, None, &mut noise_rng, &opt,
                )?
            }
            EstimatorKind::SgdKrr => unreachable!(),
        };
        (result, samples)
    };

    let sigma_d = empirical_covariance(&pairwise)?;
    let gamma = gamma_constant(SWEEP_FEATURE_BOUND, SWEEP_NORM_BOUND)?;
    // Semi-norm reporting uses the local-model tuning of lambda; mle and
    // obj-pert see no label randomization, so their privacy factor is 1.
    let lambda_eps = match task.estimator {
        EstimatorKind::Mle | EstimatorKind::ObjPert => None,
        _ if task.epsilon > 0.0 => Some(task.epsilon),
        _ => None,
    };
    let lambda = default_seminorm_lambda(lambda_eps, cfg.d, task.n, SWEEP_NORM_BOUND, gamma, 0.1)?;
    Ok(ErrorRecord {
        estimator: task.estimator.as_str().to_string(),
        n: task.n,
        epsilon: task.epsilon,
        repetition: task.repetition,
        seed,
        l2_error: l2_error(&result.theta_hat, &theta_star)?,
        seminorm_error: seminorm_error(&result.theta_hat, &theta_star, &sigma_d, lambda)?,
    })
}

/// Runs the full sweep grid. With the `parallel` feature (default) the
/// repetitions run on the rayon pool; the output is identical either way
/// because tasks are independent and results keep grid order.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<ErrorRecord>> {
    cfg.validate()?;
    let tasks = task_grid(cfg);
    #[cfg(feature = "parallel")]
    {
        tasks.par_iter().map(|t| run_task(cfg, t)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        tasks.iter().map(|t| run_task(cfg, t)).collect()
    }
}

/// Sequential fallback with the identical contract as [`run_sweep`]; kept as
/// a separate entry point so the two paths can be compared directly.
pub fn run_sweep_sequential(cfg: &ExperimentConfig) -> Result<Vec<ErrorRecord>> {
    cfg.validate()?;
    task_grid(cfg).iter().map(|t| run_task(cfg, t)).collect()
}

/// Runs the sweep and writes the CSV to the configured output path.
pub fn run_and_write(cfg: &ExperimentConfig) -> Result<Vec<ErrorRecord>> {
    let records = run_sweep(cfg)?;
    write_csv(&records, Path::new(&cfg.output_path))?;
    Ok(records)
}

pub const CSV_HEADER: &str = "estimator,n,epsilon,repetition,seed,l2_error,seminorm_error";

fn format_real(v: f64) -> String {
    // 17 significant digits: round-trips f64 exactly.
    format!("{v:.16e}")
}

/// Serializes records in the fixed schema; rows keep their order.
pub fn records_to_csv(records: &[ErrorRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.estimator,
            r.n,
            format_real(r.epsilon),
            r.repetition,
            r.seed,
            format_real(r.l2_error),
            format_real(r.seminorm_error),
        ));
    }
    out
}

pub fn write_csv(records: &[ErrorRecord], path: &Path) -> Result<()> {
    std::fs::write(path, records_to_csv(records))?;
    Ok(())
}

/// Parses the sweep CSV schema back into records, reporting 1-based line
/// numbers on malformed input.
pub fn parse_csv(text: &str) -> Result<Vec<ErrorRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end() == CSV_HEADER => {}
        Some((_, header)) => {
            return Err(Error::Parse {
                line: 1,
                message: format!("unexpected header `{header}`"),
            })
        }
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "empty file".into(),
            })
        }
    }
    let mut records = Vec::new();
    for (idx, raw) in lines {
        let line = raw.trim_end();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected 7 fields, got {}", fields.len()),
            });
        }
        let parse_field = |what: &str, s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("bad {what} `{s}`"),
            })
        };
        records.push(ErrorRecord {
            estimator: fields[0].to_string(),
            n: fields[1].parse().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("bad n `{}`", fields[1]),
            })?,
            epsilon: parse_field("epsilon", fields[2])?,
            repetition: fields[3].parse().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("bad repetition `{}`", fields[3]),
            })?,
            seed: fields[4].parse().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("bad seed `{}`", fields[4]),
            })?,
            l2_error: parse_field("l2_error", fields[5])?,
            seminorm_error: parse_field("seminorm_error", fields[6])?,
        });
    }
    Ok(records)
}

/// Outcome of the randomized-response frequency checks.
#[derive(Debug, Clone)]
pub struct PrivacyCheckReport {
    pub epsilon: f64,
    pub trials: u32,
    pub rr_keep_rate: f64,
    pub rr_expected: f64,
    pub rr_z: f64,
    pub krr_chi_square: f64,
    pub krr_critical: f64,
    pub pass: bool,
}

impl fmt::Display for PrivacyCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "rr: keep-rate {:.5} vs expected {:.5} (z = {:+.3})",
            self.rr_keep_rate, self.rr_expected, self.rr_z
        )?;
        writeln!(
            f,
            "k-rr (K=4): chi-square {:.3} vs critical {:.3}",
            self.krr_chi_square, self.krr_critical
        )?;
        write!(f, "{}", if self.pass { "PASS" } else { "FAIL" })
    }
}

pub(crate) fn binomial_z(count: u64, trials: u64, p: f64) -> f64 {
    let t = trials as f64;
    let sd = (p * (1.0 - p) * t).sqrt().max(1e-300);
    (count as f64 - p * t) / sd
}

/// chi-square critical value at significance 0.001 with 3 degrees of freedom
/// (the K = 4 goodness-of-fit test below).
const CHI2_CRITICAL_3DF: f64 = 16.266;

/// Empirically verifies the randomizer frequencies: a z-test of the binary
/// keep-rate against `sigmoid(eps)` (PASS iff |z| <= 4) and a chi-square
/// goodness-of-fit of K-RR label frequencies at K = 4.
pub fn check_privacy(epsilon: f64, trials: u32, rng: &mut StreamRng) -> Result<PrivacyCheckReport> {
    if trials < 10_000 {
        return Err(Error::domain("check_privacy needs at least 10^4 trials"));
    }
    let expected = crate::privacy::rr_keep_probability(epsilon)?;
    let mut kept = 0u64;
    for i in 0..trials {
        let y = (i % 2) as u8;
        if randomized_response(y, epsilon, rng)? == y {
            kept += 1;
        }
    }
    let keep_rate = kept as f64 / f64::from(trials);
    let z = binomial_z(kept, u64::from(trials), expected);

    let k = 4usize;
    let keep = krr_keep_probability(epsilon, k)?;
    let other = (1.0 - keep) / (k as f64 - 1.0);
    let mut counts = vec![0u64; k];
    for i in 0..trials {
        let y = 1 + (i as usize % k);
        let out = k_randomized_response(y, k, epsilon, rng)?;
        // Tally relative position so expected frequencies are constant:
        // slot 0 collects "kept", slot j the j-th other label.
        let slot = if out == y {
            0
        } else {
            let mut others: Vec<usize> = (1..=k).filter(|v| *v != y).collect();
            others.sort_unstable();
            1 + others.iter().position(|v| *v == out).unwrap()
        };
        counts[slot] += 1;
    }
    let mut chi2 = 0.0;
    for (slot, c) in counts.iter().enumerate() {
        let p = if slot == 0 { keep } else { other };
        let e = p * f64::from(trials);
        chi2 += (*c as f64 - e) * (*c as f64 - e) / e;
    }

    let pass = z.abs() <= 4.0 && chi2 <= CHI2_CRITICAL_3DF;
    Ok(PrivacyCheckReport {
        epsilon,
        trials,
        rr_keep_rate: keep_rate,
        rr_expected: expected,
        rr_z: z,
        krr_chi_square: chi2,
        krr_critical: CHI2_CRITICAL_3DF,
        pass,
    })
}

/// Outcome of the gradient verification run.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub cases: u32,
    /// Worst relative error of the analytic gradients of the three losses
    /// against central finite differences.
    pub max_fd_rel_error: f64,
    /// Worst absolute error in the exhaustive-expectation identities of the
    /// two per-sample SGD gradients.
    pub max_expectation_error: f64,
    pub pass: bool,
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "finite differences: max relative error {:.3e} (limit 1e-5)",
            self.max_fd_rel_error
        )?;
        writeln!(
            f,
            "unbiasedness identities: max error {:.3e} (limit 1e-10)",
            self.max_expectation_error
        )?;
        write!(f, "{}", if self.pass { "PASS" } else { "FAIL" })
    }
}

/// Worst-case relative FD error of `value_grad` over the coordinates of
/// `point`, using central differences with the given step.
pub(crate) fn fd_rel_error<F>(value_grad: &F, point: &[f64], step: f64) -> f64
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = value_grad(point);
    let numeric: Vec<f64> = (0..point.len())
        .map(|i| {
            let mut hi = point.to_vec();
            let mut lo = point.to_vec();
            hi[i] += step;
            lo[i] -= step;
            (value_grad(&hi).0 - value_grad(&lo).0) / (2.0 * step)
        })
        .collect();
    norm(&sub(&analytic, &numeric)) / norm(&numeric).max(1e-10)
}

/// Finite-difference checks on all three losses plus exhaustive-expectation
/// unbiasedness checks on both SGD gradients, over `cases` random instances
/// (d <= 10, n <= 20). PASS iff the FD error stays below 1e-5 and the
/// identities hold to 1e-10.
pub fn gradcheck(seed: u64, cases: u32) -> Result<GradCheckReport> {
    if cases == 0 {
        return Err(Error::domain("gradcheck needs at least 1 case"));
    }
    let mut rng = RngStream::new(seed, 0).rng();
    let mut max_fd = 0.0f64;
    let mut max_ident = 0.0f64;

    for _ in 0..cases {
        let d = 2 + (rng.random::<u32>() as usize % 9); // 2..=10
        let n = 1 + (rng.random::<u32>() as usize % 20); // 1..=20
        let eps = 0.1 + rng.random::<f64>() * 3.9;
        let samples: Vec<PreferenceSample> = (0..n)
            .map(|_| PreferenceSample {
                x: (0..d).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect(),
                y: u8::from(rng.random::<f64>() < 0.5),
            })
            .collect();
        let data = crate::privacy::RandomizedDataset {
            samples: samples.clone(),
            epsilon: eps,
        };
        let point: Vec<f64> = {
            let mut c: Vec<f64> = (0..d).map(|_| rng.random::<f64>() - 0.5).collect();
            let m = c.iter().sum::<f64>() / d as f64;
            c.iter_mut().for_each(|v| *v -= m);
            c
        };

        let clear = |c: &[f64]| {
            let e = nll_clear(&samples, &RewardParam::from_centered(c.to_vec())).unwrap();
            (e.value, e.gradient)
        };
        let noisy = |c: &[f64]| {
            let e = nll_rr(&data, &RewardParam::from_centered(c.to_vec())).unwrap();
            (e.value, e.gradient)
        };
        let debiased = |c: &[f64]| {
            let e = debiased_rr_loss(&data, &RewardParam::from_centered(c.to_vec())).unwrap();
            (e.value, e.gradient)
        };
        max_fd = max_fd.max(fd_rel_error(&clear, &point, 1e-6));
        max_fd = max_fd.max(fd_rel_error(&noisy, &point, 1e-6));
        max_fd = max_fd.max(fd_rel_error(&debiased, &point, 1e-6));

        // Binary identity: E[g^] = (2 sigmoid(eps) - 1)(s - y) x.
        let theta = RewardParam::from_centered(point.clone());
        let x = &samples[0].x;
        let y = samples[0].y;
        let q = sig(eps);
        let g_keep = sgd_rr_gradient(x, y, &theta, eps)?;
        let g_flip = sgd_rr_gradient(x, 1 - y, &theta, eps)?;
        let s = sig(crate::linalg::dot(x, theta.coords()));
        for i in 0..d {
            let got = q * g_keep[i] + (1.0 - q) * g_flip[i];
            let want = (2.0 * q - 1.0) * (s - f64::from(y)) * x[i];
            max_ident = max_ident.max((got - want).abs());
        }

        // K-wise identity with scale (e^eps - 1)/(e^eps + K - 1).
        let k = 2 + (rng.random::<u32>() as usize % 4); // 2..=5
        let phi: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
            .collect();
        let y_true = 1 + (rng.random::<u32>() as usize % k);
        let keep = krr_keep_probability(eps, k)?;
        let other = (1.0 - keep) / (k as f64 - 1.0);
        let probs = softmax_scores(&phi, theta.coords());
        let mut weighted = vec![0.0; d];
        for (p, f) in probs.iter().zip(&phi) {
            crate::linalg::axpy(&mut weighted, *p, f);
        }
        let scale = (eps.exp() - 1.0) / (eps.exp() + k as f64 - 1.0);
        let mut expect = vec![0.0; d];
        for y in 1..=k {
            let g = sgd_krr_gradient(&phi, y, &theta, eps)?;
            let w = if y == y_true { keep } else { other };
            crate::linalg::axpy(&mut expect, w, &g);
        }
        for i in 0..d {
            let want = -scale * (phi[y_true - 1][i] - weighted[i]);
            max_ident = max_ident.max((expect[i] - want).abs());
        }
    }

    Ok(GradCheckReport {
        cases,
        max_fd_rel_error: max_fd,
        max_expectation_error: max_ident,
        pass: max_fd < 1e-5 && max_ident < 1e-10,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            d: 3,
            n_values: vec![40],
            epsilon_values: vec![1.0],
            delta: 0.001,
            estimators: vec![EstimatorKind::Mle, EstimatorKind::SgdRr],
            repetitions: 2,
            base_seed: 11,
            model: PreferenceModel::Btl,
            k: 2,
            step_schedule: StepSchedule::InverseT,
            output_path: "unused.csv".into(),
        }
    }

    #[test]
    fn config_parses_the_flat_format() {
        let text = "\
# sweep description
d = 5
n_values = 1000, 2154, 4642
epsilon_values = 0.1, 1
estimators = mle, sgd-rr, obj-pert
repetitions = 3   # per cell
base_seed = 42
step_schedule = paper-eta
output_path = out.csv
";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.d, 5);
        assert_eq!(cfg.n_values, vec![1000, 2154, 4642]);
        assert_eq!(cfg.epsilon_values, vec![0.1, 1.0]);
        assert_eq!(
            cfg.estimators,
            vec![EstimatorKind::Mle, EstimatorKind::SgdRr, EstimatorKind::ObjPert]
        );
        assert_eq!(cfg.repetitions, 3);
        assert_eq!(cfg.base_seed, 42);
        assert_eq!(cfg.step_schedule, StepSchedule::Fixed(0.1));
        assert_eq!(cfg.output_path, "out.csv");
        assert_eq!(cfg.delta, 0.001); // default
    }

    #[test]
    fn config_rejects_unknown_keys_by_name() {
        let err = ExperimentConfig::parse("d = 3\nwhatever = 1\n").unwrap_err();
        match err {
            Error::Config { key, .. } => assert_eq!(key, "whatever"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn config_rejects_model_estimator_mismatch() {
        let text = "\
d = 3
n_values = 10
epsilon_values = 1
estimators = sgd-krr
repetitions = 1
";
        assert!(ExperimentConfig::parse(text).is_err());
        let ok = format!("{text}model = plackett-luce\nk = 3\n");
        assert!(ExperimentConfig::parse(&ok).is_ok());
    }

    #[test]
    fn config_requires_delta_for_obj_pert() {
        let text = "\
d = 3
n_values = 10
epsilon_values = 1
estimators = obj-pert
repetitions = 1
delta = 0
";
        assert!(ExperimentConfig::parse(text).is_err());
    }

    #[test]
    fn sweep_has_one_row_per_cell_and_is_sorted() {
        let mut cfg = tiny_config();
        cfg.estimators = vec![EstimatorKind::SgdRr, EstimatorKind::Mle];
        let records = run_sweep(&cfg).unwrap();
        assert_eq!(records.len(), 4);
        let keys: Vec<(String, usize, u32)> = records
            .iter()
            .map(|r| (r.estimator.clone(), r.n, r.repetition))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn sweep_is_reproducible_and_parallelism_invariant() {
        let cfg = tiny_config();
        let a = records_to_csv(&run_sweep(&cfg).unwrap());
        let b = records_to_csv(&run_sweep(&cfg).unwrap());
        let c = records_to_csv(&run_sweep_sequential(&cfg).unwrap());
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn sweep_rows_are_reproducible_standalone() {
        let cfg = tiny_config();
        let records = run_sweep(&cfg).unwrap();
        let probe = &records[3];
        let est: EstimatorKind = probe.estimator.parse().unwrap();
        let again = run_repetition(&cfg, est, probe.n, probe.epsilon, probe.repetition).unwrap();
        assert_eq!(*probe, again);
    }

    #[test]
    fn csv_round_trips_exactly() {
        let cfg = tiny_config();
        let records = run_sweep(&cfg).unwrap();
        let parsed = parse_csv(&records_to_csv(&records)).unwrap();
        assert_eq!(records, parsed);
    }

    #[test]
    fn csv_parse_reports_line_numbers() {
        let bad = format!("{CSV_HEADER}\nmle,10,1.0,0,7,not-a-number,0.1\n");
        match parse_csv(&bad).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(parse_csv("bogus header\n").is_err());
    }

    #[test]
    fn repetition_seeds_differ_across_cells() {
        let a = repetition_seed(1, EstimatorKind::Mle, 100, 1.0, 0);
        assert_ne!(a, repetition_seed(1, EstimatorKind::SgdRr, 100, 1.0, 0));
        assert_ne!(a, repetition_seed(1, EstimatorKind::Mle, 101, 1.0, 0));
        assert_ne!(a, repetition_seed(1, EstimatorKind::Mle, 100, 0.5, 0));
        assert_ne!(a, repetition_seed(1, EstimatorKind::Mle, 100, 1.0, 1));
        assert_ne!(a, repetition_seed(2, EstimatorKind::Mle, 100, 1.0, 0));
    }

    #[test]
    fn check_privacy_passes_for_faithful_randomizer() {
        for eps in [0.0, 1.0] {
            let mut rng = RngStream::new(77, 10).rng();
            let report = check_privacy(eps, 100_000, &mut rng).unwrap();
            assert!(report.pass, "eps={eps}: {report}");
        }
    }

    #[test]
    fn check_privacy_z_detects_always_keep_stub() {
        // A broken randomizer that never flips at eps = 1 produces a huge z.
        let trials = 100_000u64;
        let p = crate::privacy::rr_keep_probability(1.0).unwrap();
        let z = binomial_z(trials, trials, p);
        assert!(z.abs() > 4.0);
    }

    #[test]
    fn gradcheck_passes_and_is_deterministic() {
        let a = gradcheck(3, 25).unwrap();
        assert!(a.pass, "{a}");
        let b = gradcheck(3, 25).unwrap();
        assert_eq!(a.max_fd_rel_error, b.max_fd_rel_error);
        assert_eq!(a.max_expectation_error, b.max_expectation_error);
    }

    #[test]
    fn fd_helper_detects_sign_flipped_gradient() {
        let broken = |c: &[f64]| {
            let e = nll_clear(
                &[PreferenceSample {
                    x: vec![1.0, -0.4],
                    y: 1,
                }],
                &RewardParam::from_centered(c.to_vec()),
            )
            .unwrap();
            (e.value, e.gradient.iter().map(|g| -g).collect())
        };
        assert!(fd_rel_error(&broken, &[0.2, -0.2], 1e-6) > 1e-2);
    }
}
