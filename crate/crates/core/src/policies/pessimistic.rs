//! OPLB and its Thompson-sampling variant.
//!
//! Both stay on the pessimistic set `Y^p`: OPLB inflates the bonus by a
//! fixed `κ`, Safe-LTS perturbs `θ̂` by `κβ V^{-1/2} g`. Because the
//! objective is linear along each ray, a negative best value means the
//! origin is better, and the zero action is always safe.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::environment::ProblemInstance;
use crate::error::{Error, Result};
use crate::estimation::RlsEstimator;
use crate::geometry::{dot, ConstraintTarget, DirectionGrid};

use super::optimistic::observe_into;
use super::{argmax_lowest, streaming_confidence_holds, Decision, EstimateView, Knowledge};

#[derive(Debug, Clone, PartialEq)]
pub struct PessimisticChoice {
    /// `None` when the zero action wins.
    pub direction: Option<usize>,
    pub scale: f64,
    pub value: f64,
    pub action: Vec<f64>,
    /// `β‖x‖_{V⁻¹}` at the returned action.
    pub width: f64,
}

impl PessimisticChoice {
    fn into_decision(self) -> Decision {
        Decision {
            action: self.action,
            direction: self.direction,
            gamma: None,
            optimistic_value: None,
            width: Some(self.width),
        }
    }
}

/// Shared argmax of `s_p(u)·score(u)` with the zero-action floor.
fn pessimistic_argmax(
    view: &EstimateView,
    grid: &DirectionGrid,
    target: &ConstraintTarget,
    mut score: impl FnMut(&[f64], f64, f64) -> f64,
) -> Result<PessimisticChoice> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut c = vec![0.0; target.rows()];
    let mut scales = Vec::with_capacity(grid.len());
    let mut widths = Vec::with_capacity(grid.len());
    let mut values = Vec::with_capacity(grid.len());
    for (u, max_scaling) in grid.iter() {
        let (reward, width) = view.ray(u, &mut c);
        let scale = max_scaling.min(target.pessimistic_scaling(&c, width)).max(0.0);
        scales.push(scale);
        widths.push(width);
        values.push(scale * score(u, reward, width));
    }
    let (direction, value) = argmax_lowest(&values).ok_or(Error::EmptyGrid)?;
    if value.is_nan() || value < 0.0 {
        return Ok(PessimisticChoice {
            direction: None,
            scale: 0.0,
            value: 0.0,
            action: vec![0.0; grid.dim()],
            width: 0.0,
        });
    }
    let scale = scales[direction];
    Ok(PessimisticChoice {
        direction: Some(direction),
        scale,
        value,
        action: grid.direction(direction).iter().map(|v| v * scale).collect(),
        width: scale * widths[direction],
    })
}

/// Argmax of `θ̂ᵀx + κβ‖x‖_{V⁻¹}` over the boundary of `Y^p`, or the origin.
pub fn oplb_choose(
    view: &EstimateView,
    grid: &DirectionGrid,
    target: &ConstraintTarget,
    kappa: f64,
) -> Result<PessimisticChoice> {
    pessimistic_argmax(view, grid, target, |_, reward, width| reward + kappa * width)
}

/// Argmax of `θ̃ᵀx` over the boundary of `Y^p`, or the origin, where
/// `θ̃ = θ̂ + κβ V^{-1/2} g`.
pub fn lts_choose(
    view: &EstimateView,
    grid: &DirectionGrid,
    target: &ConstraintTarget,
    kappa: f64,
    g: &[f64],
) -> Result<PessimisticChoice> {
    crate::error::ensure_dim(grid.dim(), g.len())?;
    let root = inverse_sqrt(&view.gram_inverse);
    let perturbation = root * DVector::from_column_slice(g) * (kappa * view.beta);
    let theta_tilde: Vec<f64> = view
        .theta_hat
        .iter()
        .zip(perturbation.iter())
        .map(|(t, p)| t + p)
        .collect();
    pessimistic_argmax(view, grid, target, |u, _, _| dot(&theta_tilde, u))
}

/// Symmetric square root of a positive semi-definite matrix.
fn inverse_sqrt(gram_inverse: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(gram_inverse.clone());
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa >= 1.0 && kappa.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "kappa must be finite and at least 1, got {kappa}"
        )))
    }
}

#[derive(Debug, Clone)]
pub struct Oplb {
    knowledge: Knowledge,
    estimator: RlsEstimator,
    kappa: f64,
}

impl Oplb {
    pub fn new(knowledge: Knowledge, kappa: f64) -> Result<Self> {
        check_kappa(kappa)?;
        let estimator = knowledge.fresh_estimator()?;
        Ok(Self {
            knowledge,
            estimator,
            kappa,
        })
    }

    pub fn knowledge(&self) -> &Knowledge {
        &self.knowledge
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn estimator(&self) -> &RlsEstimator {
        &self.estimator
    }

    pub fn select(&mut self) -> Result<Decision> {
        let beta = self.knowledge.confidence.radius_rls(self.estimator.count() + 1)?;
        let view = EstimateView::from_estimator(&self.estimator, beta);
        let k = &self.knowledge;
        Ok(oplb_choose(&view, &k.grid, &k.target, self.kappa)?.into_decision())
    }

    pub fn observe(&mut self, action: &[f64], reward: f64, constraint: &[f64]) -> Result<()> {
        observe_into(&self.knowledge, &mut self.estimator, action, reward, constraint)
    }

    pub fn confidence_holds(&self, truth: &ProblemInstance) -> Result<bool> {
        streaming_confidence_holds(&self.knowledge, &self.estimator, truth)
    }
}

#[derive(Debug, Clone)]
pub struct Lts {
    knowledge: Knowledge,
    estimator: RlsEstimator,
    kappa: f64,
}

impl Lts {
    pub fn new(knowledge: Knowledge, kappa: f64) -> Result<Self> {
        check_kappa(kappa)?;
        let estimator = knowledge.fresh_estimator()?;
        Ok(Self {
            knowledge,
            estimator,
            kappa,
        })
    }

    pub fn knowledge(&self) -> &Knowledge {
        &self.knowledge
    }

    pub fn select(&mut self, rng: &mut dyn RngCore) -> Result<Decision> {
        let beta = self.knowledge.confidence.radius_rls(self.estimator.count() + 1)?;
        let view = EstimateView::from_estimator(&self.estimator, beta);
        let g: Vec<f64> = (0..self.knowledge.dim()).map(|_| rng.sample(StandardNormal)).collect();
        let k = &self.knowledge;
        Ok(lts_choose(&view, &k.grid, &k.target, self.kappa, &g)?.into_decision())
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

    fn view(theta: Vec<f64>, a: Vec<f64>, beta: f64) -> EstimateView {
        let d = theta.len();
        EstimateView {
            theta_hat: theta,
            constraint_hat: vec![a],
            gram_inverse: DMatrix::identity(d, d),
            beta,
        }
    }

    #[test]
    fn negative_values_fall_back_to_zero_action() {
        let grid = ActionSet::finite_star(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![1.0, 1.0])
            .unwrap()
            .grid(0)
            .unwrap();
        let target = ConstraintTarget::HalfSpace { limit: 0.5 };
        let v = view(vec![-1.0, -2.0], vec![0.0, 0.0], 0.1);
        let choice = oplb_choose(&v, &grid, &target, 2.0).unwrap();
        assert_eq!(choice.direction, None);
        assert_eq!(choice.action, vec![0.0, 0.0]);

        let v = view(vec![-1.0, -0.05], vec![0.0, 0.0], 0.1);
        let choice = oplb_choose(&v, &grid, &target, 1.0).unwrap();
        assert_eq!(choice.direction, Some(1));
    }

    #[test]
    fn zero_perturbation_is_greedy_pessimistic() {
        let grid = ActionSet::UnitBall { dim: 2 }.grid(72).unwrap();
        let target = ConstraintTarget::HalfSpace { limit: 0.3 };
        let v = view(vec![0.4, 0.9], vec![0.2, 0.7], 0.2);
        let greedy = oplb_choose(&v, &grid, &target, 0.0).unwrap();
        let g0 = lts_choose(&v, &grid, &target, 2.0, &[0.0, 0.0]).unwrap();
        let k0 = lts_choose(&v, &grid, &target, 0.0, &[1.3, -0.4]).unwrap();
        assert_eq!(g0, greedy);
        assert_eq!(k0, greedy);
    }

    #[test]
    fn inverse_sqrt_squares_back() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let r = inverse_sqrt(&m);
        assert!((&r * &r - &m).abs().max() < 1e-12);
    }

    #[test]
    fn kappa_below_one_is_rejected() {
        assert!(check_kappa(0.5).is_err());
        assert!(check_kappa(f64::INFINITY).is_err());
        assert!(check_kappa(1.0).is_ok());
    }
}
