//! Ground-truth problem instances, noisy feedback, safety checks and the
//! grid-restricted regret oracle.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, ensure_finite, Error, Result};
use crate::geometry::{dot, norm, random_unit_vector, ActionSet, ConstraintTarget, DirectionGrid};

/// Absolute tolerance of the safety check.
pub const SAFETY_TOL: f64 = 1e-9;

/// Number of random rays in the star-shaped linked-constraint setting.
pub const STAR_RAYS: usize = 10;

/// The experiment families instances can be sampled from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Setting {
    /// Box action set, one random linear constraint.
    Linear,
    /// Ball action set, `Ax` must stay in a ball of random radius.
    ConvexBall,
    /// Ten random rays, `Ax` must stay in a box of random half-width.
    ConvexBoxStar,
    /// Coordinate rays with `θ = a = e₁`, `b = 0.5`, `S = 2`.
    FiniteStar,
    /// Coordinate rays with `θ = a = e₁`, `b = 0.9`, `S = 1.5`.
    FiniteStarPd,
}

impl Setting {
    pub const ALL: [Setting; 5] = [
        Setting::Linear,
        Setting::ConvexBall,
        Setting::ConvexBoxStar,
        Setting::FiniteStar,
        Setting::FiniteStarPd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::ConvexBall => "convex-ball",
            Self::ConvexBoxStar => "convex-box-star",
            Self::FiniteStar => "finite-star",
            Self::FiniteStarPd => "finite-star-pd",
        }
    }

    /// Default (dimension, constraint rows).
    pub fn default_shape(self) -> (usize, usize) {
        match self {
            Self::Linear => (2, 1),
            Self::ConvexBall | Self::ConvexBoxStar => (2, 2),
            Self::FiniteStar | Self::FiniteStarPd => (10, 1),
        }
    }

    pub fn is_linked(self) -> bool {
        matches!(self, Self::ConvexBall | Self::ConvexBoxStar)
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|setting| setting.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown setting `{s}`")))
    }
}

/// Norm bounds known to the learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    /// Bound on the constraint rows, `‖a_i‖ ≤ S_a`.
    pub s_a: f64,
    /// Bound on the reward parameter, `‖θ‖ ≤ S_θ`.
    pub s_theta: f64,
}

impl Bounds {
    pub fn uniform(s: f64) -> Self {
        Self { s_a: s, s_theta: s }
    }

    /// `S = max(S_a, S_θ)`.
    pub fn s(&self) -> f64 {
        self.s_a.max(self.s_theta)
    }
}

/// Best grid-feasible action under the true parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalAction {
    pub action: Vec<f64>,
    pub value: f64,
    /// Grid index of the optimal ray; `None` when the origin is optimal.
    pub direction: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feedback {
    pub reward: f64,
    pub constraint: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub theta: Vec<f64>,
    /// Constraint matrix rows; a single row for a half-space constraint.
    pub constraint: Vec<Vec<f64>>,
    pub target: ConstraintTarget,
    pub action_set: ActionSet,
    pub grid: DirectionGrid,
    pub noise_scale: f64,
    pub bounds: Bounds,
    optimal: OptimalAction,
}

impl ProblemInstance {
    pub fn new(
        theta: Vec<f64>,
        constraint: Vec<Vec<f64>>,
        target: ConstraintTarget,
        action_set: ActionSet,
        grid: DirectionGrid,
        noise_scale: f64,
        bounds: Bounds,
    ) -> Result<Self> {
        let dim = action_set.dim();
        ensure_dim(dim, theta.len())?;
        ensure_dim(dim, grid.dim())?;
        ensure_dim(target.rows(), constraint.len())?;
        ensure_finite(&theta, "reward parameter")?;
        for row in &constraint {
            ensure_dim(dim, row.len())?;
            ensure_finite(row, "constraint row")?;
        }
        if !(noise_scale >= 0.0 && noise_scale.is_finite()) {
            return Err(Error::Config(format!(
                "noise scale must be nonnegative, got {noise_scale}"
            )));
        }
        if target.inner_radius().is_nan() || target.inner_radius() <= 0.0 {
            return Err(Error::Config(
                "constraint target must contain a ball around the origin".into(),
            ));
        }
        const SLACK: f64 = 1e-12;
        if norm(&theta) > bounds.s_theta + SLACK {
            return Err(Error::Config("reward parameter exceeds its norm bound".into()));
        }
        if constraint.iter().any(|row| norm(row) > bounds.s_a + SLACK) {
            return Err(Error::Config("constraint row exceeds its norm bound".into()));
        }
        let optimal = grid_optimum(&grid, &theta, &constraint, &target);
        Ok(Self {
            theta,
            constraint,
            target,
            action_set,
            grid,
            noise_scale,
            bounds,
            optimal,
        })
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn rows(&self) -> usize {
        self.constraint.len()
    }

    /// Norm radius inside which every action is safe:
    /// `b/S_a` for a half-space, `r/(√n S_a)` for linked targets.
    pub fn nu(&self) -> f64 {
        safe_radius(&self.target, self.bounds.s_a)
    }

    pub fn reward(&self, x: &[f64]) -> f64 {
        dot(&self.theta, x)
    }

    pub fn constraint_output(&self, x: &[f64]) -> Vec<f64> {
        self.constraint.iter().map(|row| dot(row, x)).collect()
    }

    /// Whether `x` satisfies the true constraint within [`SAFETY_TOL`].
    pub fn is_safe(&self, x: &[f64]) -> bool {
        self.target.contains(&self.constraint_output(x), SAFETY_TOL)
    }

    /// `y = θᵀx + ε` and `z = Ax + η` with i.i.d. Gaussian noise of std ρ.
    /// The reward noise is drawn before the constraint noise.
    pub fn feedback<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Feedback {
        let mut noise = || -> f64 {
            let g: f64 = rng.sample(StandardNormal);
            self.noise_scale * g
        };
        let reward = self.reward(x) + noise();
        let constraint = self.constraint.iter().map(|row| dot(row, x) + noise()).collect();
        Feedback { reward, constraint }
    }

    pub fn optimal_action(&self) -> &OptimalAction {
        &self.optimal
    }

    /// Largest feasible scaling along the `index`-th grid ray under the true constraint.
    pub fn feasible_scaling(&self, index: usize) -> f64 {
        let u = self.grid.direction(index);
        let c = self.constraint_output(u);
        self.grid
            .max_scaling(index)
            .min(self.target.pessimistic_scaling(&c, 0.0))
    }

    /// Smallest reward deficit of a grid-feasible point not on the optimal ray.
    pub fn reward_gap(&self) -> f64 {
        let best_other = (0..self.grid.len())
            .filter(|&i| Some(i) != self.optimal.direction)
            .map(|i| self.feasible_scaling(i) * dot(&self.theta, self.grid.direction(i)))
            .fold(0.0_f64, f64::max);
        self.optimal.value - best_other
    }

    /// Instantaneous pseudo-regret `θᵀ(x_* − x)`.
    pub fn regret(&self, x: &[f64]) -> f64 {
        self.optimal.value - self.reward(x)
    }
}

/// `b/S_a` for a half-space; `r/(√n S_a)` for a linked target.
pub fn safe_radius(target: &ConstraintTarget, s_a: f64) -> f64 {
    let n = target.rows() as f64;
    target.inner_radius() / (n.sqrt() * s_a)
}

fn grid_optimum(
    grid: &DirectionGrid,
    theta: &[f64],
    constraint: &[Vec<f64>],
    target: &ConstraintTarget,
) -> OptimalAction {
    let mut best = OptimalAction {
        action: vec![0.0; grid.dim()],
        value: 0.0,
        direction: None,
    };
    let mut c = vec![0.0; constraint.len()];
    for (i, (u, max_scaling)) in grid.iter().enumerate() {
        for (ci, row) in c.iter_mut().zip(constraint) {
            *ci = dot(row, u);
        }
        let scale = max_scaling.min(target.pessimistic_scaling(&c, 0.0));
        let value = scale * dot(theta, u);
        if value > best.value {
            best = OptimalAction {
                action: u.iter().map(|v| v * scale).collect(),
                value,
                direction: Some(i),
            };
        }
    }
    best
}

/// What to sample: the setting plus the shape and noise the harness chose.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceConfig {
    pub setting: Setting,
    pub dim: usize,
    pub rows: usize,
    pub grid_size: usize,
    pub noise_scale: f64,
}

impl InstanceConfig {
    pub fn for_setting(setting: Setting) -> Self {
        let (dim, rows) = setting.default_shape();
        let grid_size = if dim > 2 {
            crate::geometry::DEFAULT_GRID_HIGH_DIM
        } else {
            crate::geometry::DEFAULT_GRID_2D
        };
        Self {
            setting,
            dim,
            rows,
            grid_size,
            noise_scale: 0.1,
        }
    }
}

fn uniform_box<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

fn coordinate_rays(dim: usize) -> Vec<Vec<f64>> {
    (0..dim)
        .map(|i| {
            let mut e = vec![0.0; dim];
            e[i] = 1.0;
            e
        })
        .collect()
}

/// Samples an instance of `config.setting`, resampling until `θᵀx_* > 0`.
pub fn sample_instance<R: Rng + ?Sized>(config: &InstanceConfig, rng: &mut R) -> Result<ProblemInstance> {
    let InstanceConfig {
        setting,
        dim,
        rows,
        grid_size,
        noise_scale,
    } = *config;
    if dim == 0 {
        return Err(Error::Config("dimension must be positive".into()));
    }
    if setting.is_linked() {
        if rows == 0 {
            return Err(Error::Config("linked settings need at least one constraint row".into()));
        }
    } else if rows != 1 {
        return Err(Error::Config(format!(
            "setting `{setting}` has exactly one constraint row"
        )));
    }

    const MAX_ATTEMPTS: usize = 1000;
    for _ in 0..MAX_ATTEMPTS {
        let inst = match setting {
            Setting::Linear => {
                let b = rng.random_range(0.25..=1.0);
                let a = uniform_box(rng, dim);
                let theta = uniform_box(rng, dim);
                let action_set = ActionSet::Box {
                    half_widths: vec![1.0; dim],
                };
                let grid = action_set.grid(grid_size)?;
                ProblemInstance::new(
                    theta,
                    vec![a],
                    ConstraintTarget::HalfSpace { limit: b },
                    action_set,
                    grid,
                    noise_scale,
                    Bounds::uniform((dim as f64).sqrt()),
                )?
            }
            Setting::ConvexBall | Setting::ConvexBoxStar => {
                let b = rng.random_range(0.25..=1.0);
                let constraint: Vec<Vec<f64>> = (0..rows).map(|_| uniform_box(rng, dim)).collect();
                let theta = uniform_box(rng, dim);
                let (action_set, target) = if setting == Setting::ConvexBall {
                    (ActionSet::UnitBall { dim }, ConstraintTarget::Ball { radius: b, rows })
                } else {
                    let rays: Vec<Vec<f64>> = (0..STAR_RAYS).map(|_| random_unit_vector(rng, dim)).collect();
                    (
                        ActionSet::finite_star(rays, vec![1.0; STAR_RAYS])?,
                        ConstraintTarget::Box { half_width: b, rows },
                    )
                };
                let grid = action_set.grid(grid_size)?;
                ProblemInstance::new(
                    theta,
                    constraint,
                    target,
                    action_set,
                    grid,
                    noise_scale,
                    Bounds::uniform((dim as f64).sqrt()),
                )?
            }
            Setting::FiniteStar | Setting::FiniteStarPd => {
                let (b, s) = if setting == Setting::FiniteStar {
                    (0.5, 2.0)
                } else {
                    (0.9, 1.5)
                };
                let mut e1 = vec![0.0; dim];
                e1[0] = 1.0;
                let action_set = ActionSet::finite_star(coordinate_rays(dim), vec![1.0; dim])?;
                let grid = action_set.grid(grid_size)?;
                ProblemInstance::new(
                    e1.clone(),
                    vec![e1],
                    ConstraintTarget::HalfSpace { limit: b },
                    action_set,
                    grid,
                    noise_scale,
                    Bounds::uniform(s),
                )?
            }
        };
        if inst.optimal_action().value > 0.0 {
            return Ok(inst);
        }
    }
    Err(Error::Config(format!(
        "could not sample an instance of `{setting}` with positive optimal reward"
    )))
}
