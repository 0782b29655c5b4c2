//! Explore-then-commit wrapper for a known reward gap.
//!
//! The base policy runs until one grid direction has been played more than
//! `B̄` times. Under the confidence event only the optimal direction can
//! reach that count, so the wrapper then commits to it and learns the
//! largest safe scaling along it with a one-dimensional estimator.

use crate::environment::ProblemInstance;
use crate::error::{ensure_dim, Error, Result};
use crate::estimation::{ConfidenceParams, RlsEstimator};
use crate::geometry::{dot, ConstraintTarget};

use super::optimistic::observe_into;
use super::{Decision, Knowledge, Oplb, Roful};

#[derive(Debug, Clone)]
pub enum BasePolicy {
    Roful(Roful),
    Oplb(Oplb),
}

impl BasePolicy {
    fn select(&mut self) -> Result<Decision> {
        match self {
            Self::Roful(p) => p.select(),
            Self::Oplb(p) => p.select(),
        }
    }

    fn observe(&mut self, action: &[f64], reward: f64, constraint: &[f64]) -> Result<()> {
        match self {
            Self::Roful(p) => p.observe(action, reward, constraint),
            Self::Oplb(p) => p.observe(action, reward, constraint),
        }
    }

    fn confidence_holds(&self, truth: &ProblemInstance) -> Result<bool> {
        match self {
            Self::Roful(p) => p.confidence_holds(truth),
            Self::Oplb(p) => p.confidence_holds(truth),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdPhase {
    Explore,
    /// Committed to grid direction `direction` after `explore_rounds` rounds.
    Commit {
        direction: usize,
        explore_rounds: u64,
    },
}

/// Largest `ξ ∈ [0, max_scaling]` whose pessimistic constraint value along
/// the committed ray stays inside the target.
pub fn commit_scaling(target: &ConstraintTarget, constraint_hat: &[f64], width: f64, max_scaling: f64) -> f64 {
    max_scaling
        .min(target.pessimistic_scaling(constraint_hat, width))
        .max(0.0)
}

#[derive(Debug, Clone)]
pub struct PdWrapper {
    knowledge: Knowledge,
    base: BasePolicy,
    reward_gap: f64,
    b_bar: f64,
    counts: Vec<u64>,
    phase: PdPhase,
    rounds: u64,
    scalar: RlsEstimator,
    scalar_confidence: ConfidenceParams,
}

impl PdWrapper {
    pub fn new(knowledge: Knowledge, base: BasePolicy, reward_gap: f64) -> Result<Self> {
        if !(reward_gap > 0.0 && reward_gap.is_finite()) {
            return Err(Error::Config(format!("reward gap must be positive, got {reward_gap}")));
        }
        let c = &knowledge.confidence;
        let horizon = knowledge.horizon.max(1);
        let beta_t = c.radius_rls(horizon)?;
        let d = knowledge.dim() as f64;
        let log_term = (1.0 + horizon as f64 / (c.lambda * d)).ln();
        let s = knowledge.bounds.s();
        let b = knowledge.effective_limit();
        let b_bar = match base {
            BasePolicy::Roful(_) => 32.0 * s * s * beta_t * beta_t * d / (b * b * reward_gap * reward_gap) * log_term,
            BasePolicy::Oplb(_) => {
                let k = 1.0 + 2.0 * s / b;
                8.0 * d * k * k * beta_t * beta_t * log_term / (reward_gap * reward_gap)
            }
        };
        let scalar_confidence = ConfidenceParams::new(c.rho, c.delta, c.s_bound, c.lambda, c.streams, 1)?
            .with_action_norm_bound(c.action_norm_bound)?;
        let scalar = RlsEstimator::new(1, c.lambda, c.streams)?;
        let counts = vec![0; knowledge.grid.len()];
        Ok(Self {
            knowledge,
            base,
            reward_gap,
            b_bar,
            counts,
            phase: PdPhase::Explore,
            rounds: 0,
            scalar,
            scalar_confidence,
        })
    }

    pub fn knowledge(&self) -> &Knowledge {
        &self.knowledge
    }

    pub fn reward_gap(&self) -> f64 {
        self.reward_gap
    }

    pub fn b_bar(&self) -> f64 {
        self.b_bar
    }

    pub fn phase(&self) -> PdPhase {
        self.phase
    }

    pub fn committed_direction(&self) -> Option<usize> {
        match self.phase {
            PdPhase::Explore => None,
            PdPhase::Commit { direction, .. } => Some(direction),
        }
    }

    pub fn direction_counts(&self) -> &[u64] {
        &self.counts
    }

    fn scalar_radius(&self) -> Result<f64> {
        self.scalar_confidence.radius_rls(self.scalar.count() + 1)
    }

    /// `(ξ-estimates per constraint row, β̃/√V)` for the committed ray.
    fn scalar_state(&self) -> Result<(Vec<f64>, f64)> {
        let beta = self.scalar_radius()?;
        let estimates = self.scalar.estimates();
        let rows = estimates[1..].iter().map(|e| e[0]).collect();
        Ok((rows, beta * self.scalar.weighted_norm(&[1.0])))
    }

    pub fn select(&mut self) -> Result<Decision> {
        match self.phase {
            PdPhase::Explore => {
                let decision = self.base.select()?;
                if let Some(i) = decision.direction {
                    self.counts[i] += 1;
                    if self.counts[i] as f64 > self.b_bar {
                        self.phase = PdPhase::Commit {
                            direction: i,
                            explore_rounds: self.rounds + 1,
                        };
                    }
                }
                self.rounds += 1;
                Ok(decision)
            }
            PdPhase::Commit { direction, .. } => {
                let (rows, width) = self.scalar_state()?;
                let grid = &self.knowledge.grid;
                let xi = commit_scaling(&self.knowledge.target, &rows, width, grid.max_scaling(direction));
                self.rounds += 1;
                Ok(Decision {
                    action: grid.direction(direction).iter().map(|v| v * xi).collect(),
                    direction: Some(direction),
                    gamma: None,
                    optimistic_value: None,
                    width: Some(xi * width),
                })
            }
        }
    }

    /// Feedback from a round that was still exploring goes to the base
    /// policy; afterwards it feeds the scalar estimator in `ξ`.
    pub fn observe(&mut self, action: &[f64], reward: f64, constraint: &[f64]) -> Result<()> {
        match self.phase {
            PdPhase::Commit {
                direction,
                explore_rounds,
            } if self.rounds > explore_rounds => {
                ensure_dim(self.knowledge.dim(), action.len())?;
                let xi = dot(action, self.knowledge.grid.direction(direction));
                observe_into(&self.knowledge, &mut self.scalar, &[xi], reward, constraint)
            }
            _ => self.base.observe(action, reward, constraint),
        }
    }

    pub fn confidence_holds(&self, truth: &ProblemInstance) -> Result<bool> {
        if !self.base.confidence_holds(truth)? {
            return Ok(false);
        }
        let Some(direction) = self.committed_direction() else {
            return Ok(true);
        };
        let u = self.knowledge.grid.direction(direction);
        let beta = self.scalar_radius()?;
        let width = beta * self.scalar.weighted_norm(&[1.0]) + 1e-12;
        let estimates = self.scalar.estimates();
        let truths = std::iter::once(dot(&truth.theta, u)).chain(truth.constraint.iter().map(|row| dot(row, u)));
        Ok(estimates.iter().zip(truths).all(|(e, t)| (e[0] - t).abs() <= width))
    }
}
