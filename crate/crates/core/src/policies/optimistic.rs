//! ROFUL and its adaptive-κ forms.
//!
//! ROFUL picks the ray maximizing the upper confidence bound over the
//! optimistic set, then shrinks the optimistic point `x̃` by
//! `γ = max(min(ν/‖x̃‖, 1), μ)` where `μ` is the largest pessimistic-feasible
//! fraction of `x̃`. The κ-form selector re-expresses the same choice as an
//! argmax over the outer boundary of `Y^p ∪ (νB ∩ Y^o)` with a per-point
//! multiplier `κ_t(x)`; C-ROFUL caps that multiplier.

use crate::environment::ProblemInstance;
use crate::error::{ensure_dim, Error, Result};
use crate::estimation::RlsEstimator;
use crate::geometry::{norm, ConstraintTarget, DirectionGrid};

use super::{argmax_lowest, streaming_confidence_holds, Decision, EstimateView, Knowledge};

#[derive(Debug, Clone, PartialEq)]
pub struct RofulChoice {
    pub direction: usize,
    /// Scaling of the optimistic point along the chosen unit ray.
    pub optimistic_scale: f64,
    /// `θ̂ᵀx̃ + β‖x̃‖_{V⁻¹}`.
    pub optimistic_value: f64,
    pub b_tilde: f64,
    pub mu: f64,
    pub gamma: f64,
    pub action: Vec<f64>,
    /// `β‖x_t‖_{V⁻¹}` at the played point.
    pub width: f64,
}

/// One ROFUL decision from explicit estimates.
pub fn roful_choose(
    view: &EstimateView,
    grid: &DirectionGrid,
    target: &ConstraintTarget,
    nu: f64,
) -> Result<RofulChoice> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut c = vec![0.0; target.rows()];
    let mut scales = Vec::with_capacity(grid.len());
    let mut values = Vec::with_capacity(grid.len());
    for (u, max_scaling) in grid.iter() {
        let (reward, width) = view.ray(u, &mut c);
        let scale = max_scaling.min(target.optimistic_scaling(&c, width));
        scales.push(scale);
        values.push(scale * (reward + width));
    }
    let (direction, optimistic_value) = argmax_lowest(&values).ok_or(Error::EmptyGrid)?;
    let optimistic_scale = scales[direction];
    let x_tilde: Vec<f64> = grid.direction(direction).iter().map(|v| v * optimistic_scale).collect();

    let len = norm(&x_tilde);
    let b_tilde = if len > 0.0 { (nu / len).min(1.0) } else { 1.0 };
    let (_, width_tilde) = view.ray(&x_tilde, &mut c);
    let mu = target.pessimistic_scaling(&c, width_tilde).clamp(0.0, 1.0);
    let gamma = b_tilde.max(mu);
    let action = x_tilde.iter().map(|v| v * gamma).collect();
    Ok(RofulChoice {
        direction,
        optimistic_scale,
        optimistic_value,
        b_tilde,
        mu,
        gamma,
        action,
        width: gamma * width_tilde,
    })
}

/// `κ_t(x) = (α − 1) θ̂ᵀx / (β‖x‖_{V⁻¹}) + α`, where `α` is the optimistic
/// headroom of `x`. At zero width the removable singularity resolves to `α`.
pub fn adaptive_kappa(alpha: f64, reward_hat: f64, width: f64) -> f64 {
    if width > 0.0 {
        (alpha - 1.0) * reward_hat / width + alpha
    } else {
        alpha
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KappaChoice {
    pub direction: usize,
    /// Boundary scaling of `Y^p ∪ (νB ∩ Y^o)` along the chosen ray.
    pub scale: f64,
    /// Scaling of the optimistic boundary along the same ray.
    pub optimistic_scale: f64,
    pub kappa: f64,
    pub value: f64,
    pub action: Vec<f64>,
    pub width: f64,
}

/// Argmax of `θ̂ᵀx + κ̃(x) β‖x‖_{V⁻¹}` over the outer boundary of
/// `Y^p ∪ (νB ∩ Y^o)`, with `κ̃ = min(κ_t, cap)`; `cap = None` is uncapped.
pub fn kappa_form_choose(
    view: &EstimateView,
    grid: &DirectionGrid,
    target: &ConstraintTarget,
    nu: f64,
    cap: Option<f64>,
) -> Result<KappaChoice> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let rows = target.rows();
    let mut c = vec![0.0; rows];
    let mut x = vec![0.0; grid.dim()];
    let mut candidates = Vec::with_capacity(grid.len());
    let mut values = Vec::with_capacity(grid.len());
    for (u, max_scaling) in grid.iter() {
        let (_, width_u) = view.ray(u, &mut c);
        let optimistic = max_scaling.min(target.optimistic_scaling(&c, width_u));
        let pessimistic = max_scaling.min(target.pessimistic_scaling(&c, width_u));
        let scale = pessimistic.max(nu.min(optimistic));

        for (xi, ui) in x.iter_mut().zip(u) {
            *xi = ui * scale;
        }
        let (reward_x, width_x) = view.ray(&x, &mut c);
        let alpha = optimistic / scale;
        let kappa = adaptive_kappa(alpha, reward_x, width_x);
        let kappa = cap.map_or(kappa, |cap| kappa.min(cap));
        values.push(reward_x + kappa * width_x);
        candidates.push((scale, optimistic, kappa, width_x));
    }
    let (direction, value) = argmax_lowest(&values).ok_or(Error::EmptyGrid)?;
    let (scale, optimistic_scale, kappa, width) = candidates[direction];
    Ok(KappaChoice {
        direction,
        scale,
        optimistic_scale,
        kappa,
        value,
        action: grid.direction(direction).iter().map(|v| v * scale).collect(),
        width,
    })
}

pub(super) fn observe_into(
    knowledge: &Knowledge,
    estimator: &mut RlsEstimator,
    action: &[f64],
    reward: f64,
    constraint: &[f64],
) -> Result<()> {
    ensure_dim(knowledge.rows(), constraint.len())?;
    let mut responses = Vec::with_capacity(1 + constraint.len());
    responses.push(reward);
    responses.extend_from_slice(constraint);
    estimator.update(action, &responses)
}

#[derive(Debug, Clone)]
pub struct Roful {
    knowledge: Knowledge,
    estimator: RlsEstimator,
    last: Option<RofulChoice>,
}

impl Roful {
    pub fn new(knowledge: Knowledge) -> Result<Self> {
        let estimator = knowledge.fresh_estimator()?;
        Ok(Self {
            knowledge,
            estimator,
            last: None,
        })
    }

    pub fn knowledge(&self) -> &Knowledge {
        &self.knowledge
    }

    pub fn estimator(&self) -> &RlsEstimator {
        &self.estimator
    }

    pub fn last_choice(&self) -> Option<&RofulChoice> {
        self.last.as_ref()
    }

    pub fn view(&self) -> Result<EstimateView> {
        let beta = self.knowledge.confidence.radius_rls(self.estimator.count() + 1)?;
        Ok(EstimateView::from_estimator(&self.estimator, beta))
    }

    pub fn select(&mut self) -> Result<Decision> {
        let k = &self.knowledge;
        let choice = roful_choose(&self.view()?, &k.grid, &k.target, k.nu())?;
        let decision = Decision {
            action: choice.action.clone(),
            direction: Some(choice.direction),
            gamma: Some(choice.gamma),
            optimistic_value: Some(choice.optimistic_value),
            width: Some(choice.width),
        };
        self.last = Some(choice);
        Ok(decision)
    }

    /// Grid index the uncapped κ-form selector picks in the current state.
    pub fn kappa_form_direction(&self) -> Result<usize> {
        let k = &self.knowledge;
        Ok(kappa_form_choose(&self.view()?, &k.grid, &k.target, k.nu(), None)?.direction)
    }

    pub fn observe(&mut self, action: &[f64], reward: f64, constraint: &[f64]) -> Result<()> {
        observe_into(&self.knowledge, &mut self.estimator, action, reward, constraint)
    }

    pub fn confidence_holds(&self, truth: &ProblemInstance) -> Result<bool> {
        streaming_confidence_holds(&self.knowledge, &self.estimator, truth)
    }
}

/// ROFUL with its adaptive multiplier capped at the fixed OPLB value.
#[derive(Debug, Clone)]
pub struct Croful {
    knowledge: Knowledge,
    estimator: RlsEstimator,
    cap: f64,
}

impl Croful {
    pub fn new(knowledge: Knowledge, cap: f64) -> Result<Self> {
        if cap.is_nan() || cap < 1.0 {
            return Err(Error::Config(format!("kappa cap must be at least 1, got {cap}")));
        }
        let estimator = knowledge.fresh_estimator()?;
        Ok(Self {
            knowledge,
            estimator,
            cap,
        })
    }

    pub fn knowledge(&self) -> &Knowledge {
        &self.knowledge
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn view(&self) -> Result<EstimateView> {
        let beta = self.knowledge.confidence.radius_rls(self.estimator.count() + 1)?;
        Ok(EstimateView::from_estimator(&self.estimator, beta))
    }

    pub fn select(&mut self) -> Result<Decision> {
        let k = &self.knowledge;
        let choice = kappa_form_choose(&self.view()?, &k.grid, &k.target, k.nu(), Some(self.cap))?;
        Ok(Decision {
            gamma: Some(choice.scale / choice.optimistic_scale),
            direction: Some(choice.direction),
            optimistic_value: None,
            width: Some(choice.width),
            action: choice.action,
        })
    }

    pub fn observe(&mut self, action: &[f64], reward: f64, constraint: &[f64]) -> Result<()> {
        observe_into(&self.knowledge, &mut self.estimator, action, reward, constraint)
    }

    pub fn confidence_holds(&self, truth: &ProblemInstance) -> Result<bool> {
        streaming_confidence_holds(&self.knowledge, &self.estimator, truth)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ActionSet;
    use nalgebra::DMatrix;

    fn line_grid() -> DirectionGrid {
        ActionSet::finite_star(vec![vec![1.0]], vec![1.0])
            .unwrap()
            .grid(0)
            .unwrap()
    }

    #[test]
    fn one_dimensional_hand_trace() {
        // â = 0, β‖u‖ = 1, θ̂ = 1, b = 0.5, ν = 0.5 on X = [0, 1].
        let view = EstimateView {
            theta_hat: vec![1.0],
            constraint_hat: vec![vec![0.0]],
            gram_inverse: DMatrix::identity(1, 1),
            beta: 1.0,
        };
        let target = ConstraintTarget::HalfSpace { limit: 0.5 };
        let choice = roful_choose(&view, &line_grid(), &target, 0.5).unwrap();
        assert_eq!(choice.optimistic_scale, 1.0);
        assert_eq!(choice.mu, 0.5);
        assert_eq!(choice.b_tilde, 0.5);
        assert_eq!(choice.gamma, 0.5);
        assert_eq!(choice.action, vec![0.5]);
        assert_eq!(choice.optimistic_value, 2.0);
    }

    #[test]
    fn zero_uncertainty_collapses_to_true_optimum() {
        // Exact estimates on the unit disc with a half-space on e₁.
        let theta = vec![0.8, 0.6];
        let a = vec![1.0, 0.0];
        let view = EstimateView {
            theta_hat: theta.clone(),
            constraint_hat: vec![a.clone()],
            gram_inverse: DMatrix::identity(2, 2),
            beta: 0.0,
        };
        let grid = ActionSet::UnitBall { dim: 2 }.grid(360).unwrap();
        let target = ConstraintTarget::HalfSpace { limit: 0.5 };
        let choice = roful_choose(&view, &grid, &target, 0.5).unwrap();

        let oracle = (0..grid.len())
            .map(|i| {
                let u = grid.direction(i);
                let s = grid.max_scaling(i).min(target.pessimistic_scaling(&[a[0] * u[0]], 0.0));
                (i, s * (theta[0] * u[0] + theta[1] * u[1]))
            })
            .fold(
                (0, f64::NEG_INFINITY),
                |best, cur| if cur.1 > best.1 { cur } else { best },
            );
        assert_eq!(choice.direction, oracle.0);
        assert_eq!(choice.gamma, 1.0);
        assert_eq!(choice.mu, 1.0);
    }

    #[test]
    fn adaptive_kappa_examples() {
        assert_eq!(adaptive_kappa(1.0, 0.7, 0.2), 1.0);
        assert_eq!(adaptive_kappa(2.0, 0.0, 0.4), 2.0);
        assert!((adaptive_kappa(1.5, 0.3, 0.1) - 3.0).abs() < 1e-12);
        assert_eq!(adaptive_kappa(1.7, 0.3, 0.0), 1.7);
    }

    #[test]
    fn empty_grid_is_an_error() {
        assert_eq!(DirectionGrid::new(1, vec![], vec![]), Err(Error::EmptyGrid));
    }
}
