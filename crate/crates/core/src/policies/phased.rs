//! Safe phased elimination over a finite star-convex action set.
//!
//! Phase `j` lasts `2^{j−1}` rounds and starts from a fresh Gram matrix.
//! Each round plays the active, currently-safe point `ζ_i u_i` with the
//! largest confidence width. At the end of a phase the phase estimates
//! eliminate directions that are provably worse than the best pessimistic
//! point, and the safe scalings `ζ_i` grow along the surviving rays.

use nalgebra::DMatrix;

use crate::environment::ProblemInstance;
use crate::error::{Error, Result};
use crate::estimation::{quadratic_form, RlsEstimator};
use crate::geometry::{dot, ActionSet};

use super::optimistic::observe_into;
use super::{argmax_lowest, Decision, Knowledge};

/// What one completed phase produced.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseEstimates {
    pub phase: usize,
    pub theta_hat: Vec<f64>,
    pub constraint_hat: Vec<Vec<f64>>,
    pub gram_inverse: DMatrix<f64>,
    /// Active directions after the elimination step.
    pub active: Vec<usize>,
    /// Scalings after the update.
    pub zeta: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SafePe {
    knowledge: Knowledge,
    beta: f64,
    phases_planned: usize,
    phase: usize,
    phase_rounds: u64,
    active: Vec<usize>,
    zeta: Vec<f64>,
    within: RlsEstimator,
    previous_gram_inverse: DMatrix<f64>,
    history: Vec<PhaseEstimates>,
}

impl SafePe {
    pub fn new(knowledge: Knowledge) -> Result<Self> {
        if !matches!(knowledge.action_set, ActionSet::FiniteStarConvex { .. }) {
            return Err(Error::Config(
                "phased elimination needs a finite star-convex action set".into(),
            ));
        }
        let k = knowledge.grid.len();
        // Enough doubling phases to cover every round up to the horizon.
        let phases_planned = (64 - knowledge.horizon.leading_zeros()).max(1) as usize;
        let beta = knowledge.confidence.radius_phased(k, phases_planned, knowledge.rows());
        let initial = knowledge.effective_limit() / knowledge.bounds.s();
        let zeta = (0..k).map(|i| knowledge.grid.max_scaling(i).min(initial)).collect();
        let within = knowledge.fresh_estimator()?;
        let d = knowledge.dim();
        let previous_gram_inverse = DMatrix::identity(d, d) / knowledge.confidence.lambda;
        Ok(Self {
            beta,
            phases_planned,
            phase: 1,
            phase_rounds: 0,
            active: (0..k).collect(),
            zeta,
            within,
            previous_gram_inverse,
            history: Vec::new(),
            knowledge,
        })
    }

    pub fn knowledge(&self) -> &Knowledge {
        &self.knowledge
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn phases_planned(&self) -> usize {
        self.phases_planned
    }

    /// Current (1-based) phase index.
    pub fn phase(&self) -> usize {
        self.phase
    }

    pub fn phase_length(&self) -> u64 {
        1u64 << (self.phase - 1).min(63)
    }

    pub fn active_directions(&self) -> &[usize] {
        &self.active
    }

    pub fn zeta(&self) -> &[f64] {
        &self.zeta
    }

    pub fn history(&self) -> &[PhaseEstimates] {
        &self.history
    }

    pub fn select(&mut self) -> Result<Decision> {
        let grid = &self.knowledge.grid;
        let gram_inverse = self.within.gram_inverse();
        let widths: Vec<f64> = self
            .active
            .iter()
            .map(|&i| self.zeta[i] * quadratic_form(gram_inverse, grid.direction(i)).max(0.0).sqrt())
            .collect();
        let (pos, width) = argmax_lowest(&widths).ok_or_else(|| Error::PolicyAbort("no active directions".into()))?;
        let i = self.active[pos];
        Ok(Decision {
            action: grid.direction(i).iter().map(|v| v * self.zeta[i]).collect(),
            direction: Some(i),
            gamma: None,
            optimistic_value: None,
            width: Some(self.beta * width),
        })
    }

    pub fn observe(&mut self, action: &[f64], reward: f64, constraint: &[f64]) -> Result<()> {
        observe_into(&self.knowledge, &mut self.within, action, reward, constraint)?;
        self.phase_rounds += 1;
        if self.phase_rounds == self.phase_length() {
            self.end_phase()?;
        }
        Ok(())
    }

    fn end_phase(&mut self) -> Result<()> {
        let k = &self.knowledge;
        let grid = &k.grid;
        let beta = self.beta;
        let mut estimates = self.within.estimates();
        let theta_hat = estimates.remove(0);
        let constraint_hat = estimates;
        let gram_inverse = self.within.gram_inverse().clone();
        let norm_now = |u: &[f64]| quadratic_form(&gram_inverse, u).max(0.0).sqrt();
        let norm_before = |u: &[f64]| quadratic_form(&self.previous_gram_inverse, u).max(0.0).sqrt();

        // Best pessimistic point under the phase estimates.
        let lower: Vec<f64> = self
            .active
            .iter()
            .map(|&i| {
                let u = grid.direction(i);
                self.zeta[i] * (dot(&theta_hat, u) - beta * norm_now(u))
            })
            .collect();
        let (best, _) = argmax_lowest(&lower).ok_or_else(|| Error::PolicyAbort("no active directions".into()))?;
        let best = self.active[best];
        let x_hat: Vec<f64> = grid.direction(best).iter().map(|v| v * self.zeta[best]).collect();
        let x_hat_value = dot(&theta_hat, &x_hat);
        let x_hat_width = beta * norm_now(&x_hat);

        let factor = 2.0 * k.bounds.s() / k.effective_limit();
        let survivors: Vec<usize> = self
            .active
            .iter()
            .copied()
            .filter(|&i| {
                let u = grid.direction(i);
                let z = self.zeta[i];
                let gap = x_hat_value - z * dot(&theta_hat, u);
                gap <= x_hat_width + beta * z * norm_now(u) + factor * beta * z * norm_before(u)
            })
            .collect();
        if survivors.is_empty() {
            return Err(Error::PolicyAbort(format!(
                "every direction eliminated in phase {}",
                self.phase
            )));
        }

        let mut c = vec![0.0; k.rows()];
        for &i in &survivors {
            let u = grid.direction(i);
            for (ci, row) in c.iter_mut().zip(&constraint_hat) {
                *ci = dot(row, u);
            }
            let safe = grid
                .max_scaling(i)
                .min(k.target.pessimistic_scaling(&c, beta * norm_now(u)));
            self.zeta[i] = self.zeta[i].max(safe);
        }

        self.active = survivors;
        self.history.push(PhaseEstimates {
            phase: self.phase,
            theta_hat,
            constraint_hat,
            gram_inverse: gram_inverse.clone(),
            active: self.active.clone(),
            zeta: self.zeta.clone(),
        });
        self.previous_gram_inverse = gram_inverse;
        self.within = k.fresh_estimator()?;
        self.phase += 1;
        self.phase_rounds = 0;
        Ok(())
    }

    /// Whether every completed phase's estimates cover the truth along every
    /// ray with the phased radius.
    pub fn confidence_holds(&self, truth: &ProblemInstance) -> bool {
        let grid = &self.knowledge.grid;
        self.history.iter().all(|h| {
            (0..grid.len()).all(|i| {
                let u = grid.direction(i);
                let width = self.beta * quadratic_form(&h.gram_inverse, u).max(0.0).sqrt() + 1e-12;
                (dot(&h.theta_hat, u) - dot(&truth.theta, u)).abs() <= width
                    && h.constraint_hat
                        .iter()
                        .zip(&truth.constraint)
                        .all(|(est, row)| (dot(est, u) - dot(row, u)).abs() <= width)
            })
        })
    }
}
