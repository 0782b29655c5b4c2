//! Constraint-respecting decision rules.
//!
//! Continuous argmaxes are taken over the learner's [`DirectionGrid`]: for
//! every grid ray the objective is positively homogeneous in the scaling, so
//! each ray is evaluated at one scaling (the end of the relevant set along
//! that ray) and the best ray wins. Ties (values within [`TIE_TOLERANCE`],
//! relative) go to the lowest grid index.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::environment::{safe_radius, Bounds, ProblemInstance};
use crate::error::{Error, Result};
use crate::estimation::{quadratic_form, ConfidenceParams, RlsEstimator};
use crate::geometry::{dot, ActionSet, ConstraintTarget, DirectionGrid};

mod optimistic;
mod pessimistic;
mod phased;
mod problem_dependent;

pub use optimistic::{adaptive_kappa, kappa_form_choose, roful_choose, Croful, KappaChoice, Roful, RofulChoice};
pub use pessimistic::{lts_choose, oplb_choose, Lts, Oplb, PessimisticChoice};
pub use phased::{PhaseEstimates, SafePe};
pub use problem_dependent::{commit_scaling, BasePolicy, PdPhase, PdWrapper};

/// Relative tolerance under which two objective values count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Everything the learner knows before the first round.
#[derive(Debug, Clone)]
pub struct Knowledge {
    pub action_set: ActionSet,
    pub grid: DirectionGrid,
    pub target: ConstraintTarget,
    pub bounds: Bounds,
    pub confidence: ConfidenceParams,
    pub horizon: u64,
}

impl Knowledge {
    pub fn new(
        action_set: ActionSet,
        grid: DirectionGrid,
        target: ConstraintTarget,
        bounds: Bounds,
        confidence: ConfidenceParams,
        horizon: u64,
    ) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if grid.dim() != confidence.dim || action_set.dim() != confidence.dim {
            return Err(Error::DimensionMismatch {
                expected: confidence.dim,
                actual: grid.dim(),
            });
        }
        let nu = safe_radius(&target, bounds.s_a);
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::Config("safe radius must be positive".into()));
        }
        Ok(Self {
            action_set,
            grid,
            target,
            bounds,
            confidence,
            horizon,
        })
    }

    /// The learner's view of a ground-truth instance: parameters hidden,
    /// shape, target and bounds revealed. δ is split over `1 + rows` streams.
    pub fn from_instance(inst: &ProblemInstance, delta: f64, lambda: f64, horizon: u64) -> Result<Self> {
        let confidence = ConfidenceParams::new(
            inst.noise_scale,
            delta,
            inst.bounds.s(),
            lambda,
            1 + inst.rows(),
            inst.dim(),
        )?
        .with_action_norm_bound(inst.action_set.norm_bound().max(1.0))?;
        Self::new(
            inst.action_set.clone(),
            inst.grid.clone(),
            inst.target,
            inst.bounds,
            confidence,
            horizon,
        )
    }

    pub fn dim(&self) -> usize {
        self.confidence.dim
    }

    pub fn rows(&self) -> usize {
        self.target.rows()
    }

    /// Norm radius ν inside which every action is known to be safe.
    pub fn nu(&self) -> f64 {
        safe_radius(&self.target, self.bounds.s_a)
    }

    /// `b` for a half-space, `r/√n` for a linked target: the constant in the
    /// scaling lower bound `γ ≥ 1 − (2/b_eff) β ‖x‖_{V⁻¹}`.
    pub fn effective_limit(&self) -> f64 {
        self.target.inner_radius() / (self.rows() as f64).sqrt()
    }

    /// Fixed optimism multiplier `1 + 2 S_θ / b_eff`.
    pub fn kappa_cap(&self) -> f64 {
        1.0 + 2.0 * self.bounds.s_theta / self.effective_limit()
    }

    pub fn fresh_estimator(&self) -> Result<RlsEstimator> {
        RlsEstimator::new(self.dim(), self.confidence.lambda, 1 + self.rows())
    }
}

/// Point estimates and confidence radius for one round.
#[derive(Debug, Clone)]
pub struct EstimateView {
    pub theta_hat: Vec<f64>,
    /// One estimated row per constraint output.
    pub constraint_hat: Vec<Vec<f64>>,
    pub gram_inverse: DMatrix<f64>,
    pub beta: f64,
}

impl EstimateView {
    pub fn from_estimator(est: &RlsEstimator, beta: f64) -> Self {
        let mut estimates = est.estimates();
        let theta_hat = estimates.remove(0);
        Self {
            theta_hat,
            constraint_hat: estimates,
            gram_inverse: est.gram_inverse().clone(),
            beta,
        }
    }

    /// `‖x‖_{V⁻¹}`.
    pub fn weighted_norm(&self, x: &[f64]) -> f64 {
        quadratic_form(&self.gram_inverse, x).max(0.0).sqrt()
    }

    /// Estimated reward, confidence width `β‖u‖_{V⁻¹}`, and `Âu` written into `c`.
    pub fn ray(&self, u: &[f64], c: &mut [f64]) -> (f64, f64) {
        for (ci, row) in c.iter_mut().zip(&self.constraint_hat) {
            *ci = dot(row, u);
        }
        (dot(&self.theta_hat, u), self.beta * self.weighted_norm(u))
    }

    /// Whether the true parameters sit inside the confidence set along every
    /// listed direction: `|uᵀ(θ̂ − θ)| ≤ β‖u‖_{V⁻¹}` and likewise per row.
    pub fn covers<'a>(
        &self,
        theta: &[f64],
        constraint: &[Vec<f64>],
        directions: impl Iterator<Item = &'a [f64]>,
    ) -> bool {
        const SLACK: f64 = 1e-12;
        directions.into_iter().all(|u| {
            let width = self.beta * self.weighted_norm(u) + SLACK;
            let reward_ok = (dot(&self.theta_hat, u) - dot(theta, u)).abs() <= width;
            reward_ok
                && self
                    .constraint_hat
                    .iter()
                    .zip(constraint)
                    .all(|(est, truth)| (dot(est, u) - dot(truth, u)).abs() <= width)
        })
    }
}

/// Lowest index whose value is within [`TIE_TOLERANCE`] of the maximum.
pub(crate) fn argmax_lowest(values: &[f64]) -> Option<(usize, f64)> {
    let best = values
        .iter()
        .copied()
        .filter(|v| !v.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY && values.iter().all(|v| v.is_nan() || *v == f64::NEG_INFINITY) {
        return values.first().map(|&v| (0, v));
    }
    let threshold = best - TIE_TOLERANCE * best.abs().max(1.0);
    values.iter().position(|&v| v >= threshold).map(|i| (i, values[i]))
}

/// One round's action plus what the invariant checks need to see.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub action: Vec<f64>,
    /// Grid index of the played ray; `None` for the zero action.
    pub direction: Option<usize>,
    /// Fraction of the optimistic point actually played (ROFUL family only).
    pub gamma: Option<f64>,
    /// `θ̂ᵀx̃ + β‖x̃‖_{V⁻¹}` at the optimistic point (ROFUL only).
    pub optimistic_value: Option<f64>,
    /// `β_t ‖x_t‖_{V_t⁻¹}` under the policy's own estimator.
    pub width: Option<f64>,
}

impl Decision {
    pub fn zero(dim: usize) -> Self {
        Self {
            action: vec![0.0; dim],
            direction: None,
            gamma: None,
            optimistic_value: None,
            width: None,
        }
    }
}

/// Names accepted on the command line and in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Roful,
    Croful,
    Oplb,
    Lts,
    PdRoful,
    PdOplb,
    SafePe,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Roful,
        Algorithm::Croful,
        Algorithm::Oplb,
        Algorithm::Lts,
        Algorithm::PdRoful,
        Algorithm::PdOplb,
        Algorithm::SafePe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Roful => "roful",
            Self::Croful => "croful",
            Self::Oplb => "oplb",
            Self::Lts => "lts",
            Self::PdRoful => "pd-roful",
            Self::PdOplb => "pd-oplb",
            Self::SafePe => "safe-pe",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }
}

/// Per-algorithm knobs; `None` picks the documented default.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PolicyOptions {
    /// OPLB / Safe-LTS multiplier κ, C-ROFUL cap. Default [`Knowledge::kappa_cap`].
    pub kappa: Option<f64>,
    /// Reward gap Δ for the PD wrappers. Required for them.
    pub reward_gap: Option<f64>,
}

/// A running policy of any kind.
#[derive(Debug, Clone)]
pub enum AnyPolicy {
    Roful(Roful),
    Croful(Croful),
    Oplb(Oplb),
    Lts(Lts),
    Pd(Box<PdWrapper>),
    SafePe(SafePe),
}

impl AnyPolicy {
    pub fn new(algorithm: Algorithm, knowledge: Knowledge, options: PolicyOptions) -> Result<Self> {
        let kappa = options.kappa.unwrap_or_else(|| knowledge.kappa_cap());
        Ok(match algorithm {
            Algorithm::Roful => Self::Roful(Roful::new(knowledge)?),
            Algorithm::Croful => Self::Croful(Croful::new(knowledge, kappa)?),
            Algorithm::Oplb => Self::Oplb(Oplb::new(knowledge, kappa)?),
            Algorithm::Lts => Self::Lts(Lts::new(knowledge, kappa)?),
            Algorithm::PdRoful | Algorithm::PdOplb => {
                let gap = options
                    .reward_gap
                    .ok_or_else(|| Error::Config("the PD wrappers need a reward gap".into()))?;
                let base = if algorithm == Algorithm::PdRoful {
                    BasePolicy::Roful(Roful::new(knowledge.clone())?)
                } else {
                    BasePolicy::Oplb(Oplb::new(knowledge.clone(), kappa)?)
                };
                Self::Pd(Box::new(PdWrapper::new(knowledge, base, gap)?))
            }
            Algorithm::SafePe => Self::SafePe(SafePe::new(knowledge)?),
        })
    }

    pub fn select(&mut self, rng: &mut dyn RngCore) -> Result<Decision> {
        match self {
            Self::Roful(p) => p.select(),
            Self::Croful(p) => p.select(),
            Self::Oplb(p) => p.select(),
            Self::Lts(p) => p.select(rng),
            Self::Pd(p) => p.select(),
            Self::SafePe(p) => p.select(),
        }
    }

    /// Routes one round of feedback: reward `y` to the reward stream, `z[i]`
    /// to constraint stream `i`.
    pub fn observe(&mut self, action: &[f64], reward: f64, constraint: &[f64]) -> Result<()> {
        match self {
            Self::Roful(p) => p.observe(action, reward, constraint),
            Self::Croful(p) => p.observe(action, reward, constraint),
            Self::Oplb(p) => p.observe(action, reward, constraint),
            Self::Lts(p) => p.observe(action, reward, constraint),
            Self::Pd(p) => p.observe(action, reward, constraint),
            Self::SafePe(p) => p.observe(action, reward, constraint),
        }
    }

    /// Whether the policy's current confidence statements contain the truth.
    pub fn confidence_holds(&self, truth: &ProblemInstance) -> Result<bool> {
        match self {
            Self::Roful(p) => p.confidence_holds(truth),
            Self::Croful(p) => p.confidence_holds(truth),
            Self::Oplb(p) => p.confidence_holds(truth),
            Self::Lts(p) => p.confidence_holds(truth),
            Self::Pd(p) => p.confidence_holds(truth),
            Self::SafePe(p) => Ok(p.confidence_holds(truth)),
        }
    }

    /// The uncapped κ-form selector's grid index in the current state; ROFUL only.
    pub fn kappa_form_direction(&self) -> Option<Result<usize>> {
        match self {
            Self::Roful(p) => Some(p.kappa_form_direction()),
            _ => None,
        }
    }

    pub fn as_pd(&self) -> Option<&PdWrapper> {
        match self {
            Self::Pd(p) => Some(p),
            _ => None,
        }
    }

    pub fn as_safe_pe(&self) -> Option<&SafePe> {
        match self {
            Self::SafePe(p) => Some(p),
            _ => None,
        }
    }

    pub fn knowledge(&self) -> &Knowledge {
        match self {
            Self::Roful(p) => p.knowledge(),
            Self::Croful(p) => p.knowledge(),
            Self::Oplb(p) => p.knowledge(),
            Self::Lts(p) => p.knowledge(),
            Self::Pd(p) => p.knowledge(),
            Self::SafePe(p) => p.knowledge(),
        }
    }
}

/// Shared check for the streaming policies.
pub(crate) fn streaming_confidence_holds(
    knowledge: &Knowledge,
    estimator: &RlsEstimator,
    truth: &ProblemInstance,
) -> Result<bool> {
    let beta = knowledge.confidence.radius_rls(estimator.count() + 1)?;
    let view = EstimateView::from_estimator(estimator, beta);
    Ok(view.covers(&truth.theta, &truth.constraint, knowledge.grid.iter().map(|(u, _)| u)))
}
