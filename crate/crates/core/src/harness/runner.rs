//! Seeded trial execution and per-round invariant monitoring.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::{sample_instance, ProblemInstance};
use crate::error::{Error, Result};
use crate::estimation::RlsEstimator;
use crate::geometry::norm;
use crate::policies::{Algorithm, AnyPolicy, Decision, Knowledge};
use crate::rng::{trial_rng, Stream};

use super::aggregate::{aggregate, AggregateRow};
use super::config::ExperimentConfig;

/// Absolute slack on the invariant inequalities.
pub const INVARIANT_TOL: f64 = 1e-9;

/// One logged round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: u64,
    pub regret: f64,
    pub cumulative_regret: f64,
    pub violation: bool,
    pub gamma: Option<f64>,
    pub width: Option<f64>,
    pub direction: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub algorithm: Algorithm,
    pub trial: u64,
    pub rounds: u64,
    pub final_regret: f64,
    pub violations: u64,
    /// Rounds whose action is not a positive multiple of `x_*`.
    pub wrong_directions: u64,
    /// Whether the policy's confidence statements held at every round.
    pub confidence_held: bool,
    pub optimal_direction: Option<usize>,
    /// Safe-PE: whether the optimal direction survived every phase.
    pub retained_optimal: Option<bool>,
    /// PD wrappers: the committed grid direction and the round it was chosen.
    pub committed_direction: Option<usize>,
    pub commit_round: Option<u64>,
    /// Cumulative regret at the commit round.
    pub commit_regret: Option<f64>,
    /// `Σ ‖x_t‖²_{V_t⁻¹}` under a fresh global estimator, and its bound.
    pub potential: f64,
    pub potential_bound: f64,
    /// Rounds where ROFUL and the κ-form selector disagreed.
    pub equivalence_mismatches: u64,
    /// Confidence-holding rounds that broke the safety, scaling-floor or
    /// optimism invariants.
    pub unsafe_under_confidence: u64,
    pub gamma_bound_failures: u64,
    pub optimism_failures: u64,
    /// First invariant failure in a confidence-holding round.
    pub invariant_failure: Option<String>,
    pub abort: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub summary: TrialSummary,
    pub rows: Vec<RoundRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub trials: Vec<TrialResult>,
    pub aggregate: Vec<AggregateRow>,
}

/// The instance every algorithm sees in trial `trial`.
pub fn trial_instance(config: &ExperimentConfig, trial: u64) -> Result<ProblemInstance> {
    let mut rng = trial_rng(config.master_seed, trial, Stream::Instance);
    sample_instance(&config.instance_config(), &mut rng)
}

#[derive(Default)]
struct Monitor {
    checks: bool,
    first_failure: Option<String>,
    unsafe_rounds: u64,
    gamma_failures: u64,
    optimism_failures: u64,
}

impl Monitor {
    fn fail(&mut self, t: u64, what: impl FnOnce() -> String) {
        if self.first_failure.is_none() {
            self.first_failure = Some(format!("round {t}: {}", what()));
        }
    }

    /// Per-round checks that only make sense while the confidence event holds.
    fn check_round(&mut self, t: u64, policy: &AnyPolicy, inst: &ProblemInstance, decision: &Decision) {
        if !self.checks {
            return;
        }
        if !inst.is_safe(&decision.action) {
            self.unsafe_rounds += 1;
            self.fail(t, || "unsafe action under the confidence event".into());
        }
        let k = policy.knowledge();
        if let (Some(gamma), Some(width)) = (decision.gamma, decision.width) {
            let norm_bound = k.action_set.norm_bound().max(1.0);
            let floor = (1.0 - 2.0 / k.effective_limit() * width).max(k.nu() / norm_bound);
            if gamma < floor - INVARIANT_TOL {
                self.gamma_failures += 1;
                self.fail(t, || format!("gamma {gamma} below its lower bound {floor}"));
            }
        }
        if let Some(ucb) = decision.optimistic_value {
            let best = inst.optimal_action().value;
            if ucb < best - INVARIANT_TOL {
                self.optimism_failures += 1;
                self.fail(t, || format!("optimistic value {ucb} below the optimum {best}"));
            }
        }
    }
}

fn potential_bound(dim: usize, horizon: u64, lambda: f64) -> f64 {
    let d = dim as f64;
    2.0 * d * (1.0 + horizon as f64 / (lambda * d)).ln()
}

/// Runs one algorithm on trial `trial`. Policy aborts end the trial early
/// and are recorded in the summary; only configuration problems are errors.
pub fn run_trial(config: &ExperimentConfig, algorithm: Algorithm, trial: u64) -> Result<TrialResult> {
    config.validate()?;
    let inst = trial_instance(config, trial)?;
    let knowledge = Knowledge::from_instance(&inst, config.delta, config.lambda, config.horizon)?;
    let options = config.policy_options(algorithm, inst.reward_gap());
    let mut policy = AnyPolicy::new(algorithm, knowledge, options)?;
    let mut noise_rng = trial_rng(config.master_seed, trial, Stream::Noise);
    let mut policy_rng = trial_rng(config.master_seed, trial, Stream::Policy);

    let horizon = config.horizon;
    let optimal = inst.optimal_action().clone();
    let mut global = RlsEstimator::new(inst.dim(), config.lambda, 1)?;
    let mut monitor = Monitor {
        checks: config.invariant_checks,
        ..Monitor::default()
    };
    let mut rows = Vec::with_capacity((horizon / config.log_stride + 1) as usize);
    let mut cumulative = 0.0;
    let mut violations = 0;
    let mut wrong_directions = 0;
    let mut potential = 0.0;
    let mut mismatches = 0;
    let mut confidence_held = true;
    let mut abort = None;
    let mut rounds = 0;
    let mut commit_regret = None;

    for t in 1..=horizon {
        let held_now = policy.confidence_holds(&inst)?;
        confidence_held &= held_now;

        let decision = match policy.select(&mut policy_rng) {
            Ok(d) => d,
            Err(Error::PolicyAbort(msg)) => {
                abort = Some(msg);
                break;
            }
            Err(e) => return Err(e),
        };
        if config.invariant_checks {
            if let Some(kappa_direction) = policy.kappa_form_direction() {
                if Some(kappa_direction?) != decision.direction {
                    mismatches += 1;
                }
            }
        }
        if held_now {
            monitor.check_round(t, &policy, &inst, &decision);
        }

        let x = &decision.action;
        potential += global.weighted_norm(x).powi(2);
        global.update(x, &[0.0])?;

        let violation = !inst.is_safe(x);
        violations += u64::from(violation);
        let on_optimal_ray = norm(x) > 0.0 && decision.direction.is_some() && decision.direction == optimal.direction;
        wrong_directions += u64::from(!on_optimal_ray);
        let regret = inst.regret(x);
        cumulative += regret;
        rounds = t;
        if commit_regret.is_none() {
            if let Some(pd) = policy.as_pd() {
                if pd.committed_direction().is_some() {
                    commit_regret = Some(cumulative);
                }
            }
        }

        let feedback = inst.feedback(x, &mut noise_rng);
        if t % config.log_stride == 0 || t == horizon {
            rows.push(RoundRecord {
                t,
                regret,
                cumulative_regret: cumulative,
                violation,
                gamma: decision.gamma,
                width: decision.width,
                direction: decision.direction,
            });
        }
        match policy.observe(x, feedback.reward, &feedback.constraint) {
            Ok(()) => {}
            Err(Error::PolicyAbort(msg)) => {
                abort = Some(msg);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    if abort.is_none() {
        confidence_held &= policy.confidence_holds(&inst)?;
    }

    let retained_optimal = policy.as_safe_pe().map(|pe| {
        let kept = |active: &[usize]| optimal.direction.is_some_and(|i| active.contains(&i));
        pe.history().iter().all(|h| kept(&h.active)) && kept(pe.active_directions())
    });
    let (committed_direction, commit_round) = match policy.as_pd().map(|pd| pd.phase()) {
        Some(crate::policies::PdPhase::Commit {
            direction,
            explore_rounds,
        }) => (Some(direction), Some(explore_rounds)),
        _ => (None, None),
    };
    let potential_bound = potential_bound(inst.dim(), rounds, config.lambda);
    if config.invariant_checks && confidence_held {
        if potential > potential_bound + INVARIANT_TOL {
            monitor.fail(rounds, || {
                format!("elliptic potential {potential} exceeds {potential_bound}")
            });
        }
        if retained_optimal == Some(false) {
            monitor.fail(rounds, || "optimal direction eliminated".into());
        }
        if committed_direction.is_some() && committed_direction != optimal.direction {
            monitor.fail(rounds, || "committed to a suboptimal direction".into());
        }
        if abort.is_some() {
            monitor.fail(rounds, || "policy aborted".into());
        }
        if mismatches > 0 {
            monitor.fail(rounds, || {
                format!("{mismatches} rounds where the κ-form selector disagreed")
            });
        }
    }

    Ok(TrialResult {
        summary: TrialSummary {
            algorithm,
            trial,
            rounds,
            final_regret: cumulative,
            violations,
            wrong_directions,
            confidence_held,
            optimal_direction: optimal.direction,
            retained_optimal,
            committed_direction,
            commit_round,
            commit_regret,
            potential,
            potential_bound,
            equivalence_mismatches: mismatches,
            unsafe_under_confidence: monitor.unsafe_rounds,
            gamma_bound_failures: monitor.gamma_failures,
            optimism_failures: monitor.optimism_failures,
            invariant_failure: monitor.first_failure,
            abort,
        },
        rows,
    })
}

/// Runs every configured algorithm on every trial, in parallel across
/// trials, and aggregates. Results are ordered by algorithm then trial.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let jobs: Vec<(Algorithm, u64)> = config
        .algorithms
        .iter()
        .flat_map(|&a| (0..config.trials).map(move |t| (a, t)))
        .collect();
    let trials = jobs
        .par_iter()
        .map(|&(algo, trial)| run_trial(config, algo, trial))
        .collect::<Result<Vec<_>>>()?;
    let aggregate = aggregate(&trials);
    Ok(ExperimentResult { trials, aggregate })
}
