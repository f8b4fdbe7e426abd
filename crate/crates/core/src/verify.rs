//! Frame-equality and no-signalling checks, plus a deterministic batch harness
//! over random scenarios.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditional::verify_star_equalities;
use crate::error::{Error, Result};
use crate::frames::{
    apply_channel, bipartite_state, choi_identity_check, gamma_table, lifted_operator, max_table_deviation,
    prob_alpha, prob_alpha_with, prob_beta_with, prob_gamma_with, real_probability, JointDistribution,
};
use crate::linalg::{kron, partial_trace, ComplexMatrix, Subsystem};
use crate::objects::Scenario;
use crate::random::random_scenario;

/// Default tolerance for frame equality and the accompanying identities.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Outcome of comparing the three frames on one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameReport {
    pub scenario: String,
    pub alpha: JointDistribution,
    pub beta: JointDistribution,
    pub gamma: JointDistribution,
    pub alpha_beta: f64,
    pub alpha_gamma: f64,
    pub beta_gamma: f64,
    /// `(I (x) T)(|Phi><Phi|)` against `tau_12`.
    pub choi: f64,
    /// `rho^T * rho^s` against `tau_12`.
    pub star_acausal: f64,
    /// `rho * rho^t` against `T_rho`.
    pub star_causal: f64,
    pub tol: f64,
    pub passed: bool,
    pub wall_time_secs: f64,
}

impl FrameReport {
    /// Every deviation with its name, in report order.
    pub fn deviations(&self) -> [(&'static str, f64); 6] {
        [
            ("alpha-beta", self.alpha_beta),
            ("alpha-gamma", self.alpha_gamma),
            ("beta-gamma", self.beta_gamma),
            ("choi", self.choi),
            ("star-acausal", self.star_acausal),
            ("star-causal", self.star_causal),
        ]
    }

    pub fn max_deviation(&self) -> f64 {
        self.deviations().iter().fold(0.0, |acc, (_, d)| acc.max(*d))
    }

    /// Largest disagreement between the probability tables.
    pub fn max_frame_deviation(&self) -> f64 {
        self.alpha_beta.max(self.alpha_gamma).max(self.beta_gamma)
    }
}

/// Compute the three frames' distributions through their own pipelines and
/// check them against each other, together with the Choi and star-product
/// identities.
pub fn verify_frame_equality(scenario: &Scenario, tol: f64) -> Result<FrameReport> {
    let start = Instant::now();
    scenario.rho().require_full_rank("frame verification")?;
    let lifted = lifted_operator(scenario.rho(), scenario.channel())?;
    let alpha = prob_alpha_with(scenario, &lifted)?;
    let beta = prob_beta_with(scenario, &lifted)?;
    let gamma = prob_gamma_with(scenario, &lifted)?;
    let choi = choi_identity_check(scenario.rho(), scenario.channel(), tol)?;
    let star = verify_star_equalities(scenario.rho(), scenario.channel(), tol)?;
    let mut report = FrameReport {
        scenario: scenario.name().to_string(),
        alpha_beta: alpha.max_deviation(&beta)?,
        alpha_gamma: alpha.max_deviation(&gamma)?,
        beta_gamma: beta.max_deviation(&gamma)?,
        alpha,
        beta,
        gamma,
        choi: choi.max_deviation,
        star_acausal: star.acausal_deviation,
        star_causal: star.causal_deviation,
        tol,
        passed: false,
        wall_time_secs: 0.0,
    };
    report.passed = report.deviations().iter().all(|(_, d)| *d <= tol);
    report.wall_time_secs = start.elapsed().as_secs_f64();
    Ok(report)
}

/// B-marginals under two different measurements at device A.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoSignallingReport {
    pub scenario: String,
    pub labels_b: Vec<String>,
    /// `sum_i p(a_i, b_j)` under POVM A.
    pub marginal_a: Vec<f64>,
    /// `sum_i p(a'_i, b_j)` under POVM A'.
    pub marginal_a_alt: Vec<f64>,
    /// `Tr[b_j T(rho)]`.
    pub expected: Vec<f64>,
    pub max_deviation: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Compare the space-like observer's B-marginals under A and A' with each
/// other and with `Tr[b_j T(rho)]`.
pub fn verify_no_signalling(scenario: &Scenario, tol: f64) -> Result<NoSignallingReport> {
    let alt = scenario.povm_a_alt().ok_or(Error::MissingAltPovm)?;
    scenario.rho().require_full_rank("no-signalling verification")?;
    let tau = bipartite_state(&lifted_operator(scenario.rho(), scenario.channel())?)?;
    let marginal = |table: Vec<Vec<f64>>| -> Vec<f64> {
        (0..scenario.povm_b().len())
            .map(|j| table.iter().map(|row| row[j]).sum())
            .collect()
    };
    let marginal_a = marginal(gamma_table(scenario.povm_a(), scenario.povm_b(), tau.matrix(), false)?);
    let marginal_a_alt = marginal(gamma_table(alt, scenario.povm_b(), tau.matrix(), false)?);
    let evolved = apply_channel(scenario.channel(), scenario.rho())?;
    let expected = scenario
        .povm_b()
        .effects()
        .iter()
        .map(|b| real_probability(b.matmul(evolved.matrix())?.trace()?))
        .collect::<Result<Vec<_>>>()?;
    let max_deviation = marginal_a
        .iter()
        .zip(&marginal_a_alt)
        .zip(&expected)
        .map(|((x, y), e)| (x - y).abs().max((x - e).abs()).max((y - e).abs()))
        .fold(0.0, f64::max);
    Ok(NoSignallingReport {
        scenario: scenario.name().to_string(),
        labels_b: scenario.povm_b().labels().to_vec(),
        marginal_a,
        marginal_a_alt,
        expected,
        max_deviation,
        tol,
        passed: max_deviation <= tol,
    })
}

/// Deliberately wrong frame pipelines. Each returns an unnormalized table and
/// should disagree with [`prob_alpha`] on generic complex scenarios.
pub mod controls {
    use super::*;

    /// Which convention to break.
    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum Control {
        /// Beta's rule with `T_rho^dagger` in place of `T_rho^T`.
        BetaDagger,
        /// Gamma's rule applied to `T_rho` instead of `T_rho^{T_1}`.
        GammaWithoutPartialTranspose,
        /// Gamma's rule with `b_j^T` in place of `b_j`.
        GammaTransposedB,
    }

    pub fn control_table(scenario: &Scenario, control: Control) -> Result<Vec<Vec<f64>>> {
        let lifted = lifted_operator(scenario.rho(), scenario.channel())?;
        let dims = lifted.dims();
        match control {
            Control::BetaDagger => {
                let reversed = lifted.matrix().dagger();
                let id1 = ComplexMatrix::identity(dims.d1());
                scenario
                    .povm_a()
                    .effects()
                    .iter()
                    .map(|a| {
                        scenario
                            .povm_b()
                            .effects()
                            .iter()
                            .map(|b| {
                                let prepared = partial_trace(
                                    &reversed.matmul(&kron(&id1, &b.transpose()))?,
                                    dims,
                                    Subsystem::Second,
                                )?;
                                Ok(a.transpose().matmul(&prepared)?.trace()?.re)
                            })
                            .collect()
                    })
                    .collect()
            }
            Control::GammaWithoutPartialTranspose => {
                raw_gamma(scenario, lifted.matrix(), false)
            }
            Control::GammaTransposedB => {
                let tau = bipartite_state(&lifted)?;
                raw_gamma(scenario, tau.matrix(), true)
            }
        }
    }

    fn raw_gamma(scenario: &Scenario, tau: &ComplexMatrix, transpose_b: bool) -> Result<Vec<Vec<f64>>> {
        gamma_table(scenario.povm_a(), scenario.povm_b(), tau, transpose_b)
    }

    /// `max_ij |p_alpha - p_control|`.
    pub fn control_deviation(scenario: &Scenario, control: Control) -> Result<f64> {
        let alpha = prob_alpha(scenario)?;
        max_table_deviation(&alpha.probabilities, &control_table(scenario, control)?)
    }
}

/// Which random scenarios a batch draws and how strictly it checks them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchConfig {
    /// `(d1, d2)` pairs to cycle through.
    pub dims: Vec<(usize, usize)>,
    pub kraus_counts: Vec<usize>,
    pub n_trials: usize,
    pub base_seed: u64,
    pub tol: f64,
}

impl BatchConfig {
    /// Every `(d1, d2, k)` combination that admits a trace-preserving channel
    /// (`k * d2 >= d1`), in config order.
    pub fn shapes(&self) -> Vec<(usize, usize, usize)> {
        self.dims
            .iter()
            .flat_map(|&(d1, d2)| self.kraus_counts.iter().map(move |&k| (d1, d2, k)))
            .filter(|&(d1, d2, k)| k >= 1 && k * d2 >= d1)
            .collect()
    }

    /// Shape and seed of trial `index`.
    pub fn trial(&self, index: usize) -> (usize, usize, usize, u64) {
        let shapes = self.shapes();
        let (d1, d2, k) = shapes[index % shapes.len()];
        (d1, d2, k, self.base_seed.wrapping_add(index as u64))
    }
}

/// The scenario that produced the largest deviation in a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorstCase {
    pub trial: usize,
    pub seed: u64,
    pub d1: usize,
    pub d2: usize,
    pub kraus: usize,
    pub deviation: f64,
}

/// The scheduling-independent part of a batch result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSummary {
    pub n_trials: usize,
    pub passed: usize,
    pub failed: usize,
    pub errored: usize,
    /// Error class name to count.
    pub errors: BTreeMap<String, usize>,
    /// Largest deviation across all frame, Choi and star checks.
    pub worst: Option<WorstCase>,
    /// Largest deviation between the three probability tables alone.
    pub worst_frame_deviation: f64,
    pub worst_no_signalling: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingStats {
    pub total_secs: f64,
    pub mean_trial_secs: f64,
    pub max_trial_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchReport {
    pub config: BatchConfig,
    pub summary: BatchSummary,
    pub timing: TimingStats,
}

impl BatchReport {
    pub fn all_passed(&self) -> bool {
        self.summary.passed == self.summary.n_trials
    }
}

enum TrialOutcome {
    Checked {
        frame_deviation: f64,
        max_deviation: f64,
        no_signalling: f64,
        passed: bool,
    },
    Errored(&'static str),
}

fn classify(err: &Error) -> &'static str {
    match err.root() {
        Error::Singularity(_) | Error::Rank(_) => "generation_retry_exhausted",
        Error::InternalInvariant(_) => "internal_invariant",
        _ => "validation_failure",
    }
}

fn run_trial(config: &BatchConfig, index: usize) -> (TrialOutcome, f64) {
    let start = Instant::now();
    let (d1, d2, k, seed) = config.trial(index);
    let outcome = match random_scenario(d1, d2, k, seed) {
        Err(e) => TrialOutcome::Errored(match e.root() {
            Error::Singularity(_) | Error::Rank(_) => "generation_retry_exhausted",
            _ => "validation_failure",
        }),
        Ok(scenario) => match (
            verify_frame_equality(&scenario, config.tol),
            verify_no_signalling(&scenario, config.tol),
        ) {
            (Ok(frames), Ok(ns)) => TrialOutcome::Checked {
                passed: frames.passed && ns.passed,
                no_signalling: ns.max_deviation,
                frame_deviation: frames.max_frame_deviation(),
                max_deviation: frames.max_deviation(),
            },
            (Err(e), _) | (_, Err(e)) => TrialOutcome::Errored(classify(&e)),
        },
    };
    (outcome, start.elapsed().as_secs_f64())
}

/// Verify `n_trials` seeded random scenarios in parallel. The summary depends
/// only on the config; trial `i` uses seed `base_seed + i`.
pub fn batch_verify(config: &BatchConfig) -> Result<BatchReport> {
    if config.n_trials == 0 {
        return Err(Error::InvalidArgument("n_trials must be at least 1".into()));
    }
    if config.tol.is_nan() || config.tol < 0.0 {
        return Err(Error::InvalidArgument(format!("tolerance {} is not a nonnegative number", config.tol)));
    }
    if config.shapes().is_empty() {
        return Err(Error::InvalidArgument(
            "no (d1, d2, kraus) combination admits a trace-preserving channel".into(),
        ));
    }
    if let Some(&(d1, d2)) = config.dims.iter().find(|&&(d1, d2)| d1 < 2 || d2 < 2) {
        return Err(Error::InvalidArgument(format!("dimensions ({d1}, {d2}) must both be at least 2")));
    }
    let start = Instant::now();
    let outcomes: Vec<(TrialOutcome, f64)> = (0..config.n_trials)
        .into_par_iter()
        .map(|i| run_trial(config, i))
        .collect();
    let total_secs = start.elapsed().as_secs_f64();

    let mut summary = BatchSummary {
        n_trials: config.n_trials,
        passed: 0,
        failed: 0,
        errored: 0,
        errors: BTreeMap::new(),
        worst: None,
        worst_frame_deviation: 0.0,
        worst_no_signalling: 0.0,
    };
    for (index, (outcome, _)) in outcomes.iter().enumerate() {
        match outcome {
            TrialOutcome::Checked {
                frame_deviation,
                max_deviation,
                no_signalling,
                passed,
            } => {
                if *passed {
                    summary.passed += 1;
                } else {
                    summary.failed += 1;
                }
                summary.worst_frame_deviation = summary.worst_frame_deviation.max(*frame_deviation);
                summary.worst_no_signalling = summary.worst_no_signalling.max(*no_signalling);
                let deviation = *max_deviation;
                if summary.worst.as_ref().is_none_or(|w| deviation > w.deviation) {
                    let (d1, d2, kraus, seed) = config.trial(index);
                    summary.worst = Some(WorstCase {
                        trial: index,
                        seed,
                        d1,
                        d2,
                        kraus,
                        deviation,
                    });
                }
            }
            TrialOutcome::Errored(class) => {
                summary.errored += 1;
                *summary.errors.entry((*class).to_string()).or_default() += 1;
            }
        }
    }
    let times: Vec<f64> = outcomes.iter().map(|(_, t)| *t).collect();
    let timing = TimingStats {
        total_secs,
        mean_trial_secs: times.iter().sum::<f64>() / times.len() as f64,
        max_trial_secs: times.iter().copied().fold(0.0, f64::max),
    };
    Ok(BatchReport {
        config: config.clone(),
        summary,
        timing,
    })
}
