//! Action-set and constraint-target geometry.
//!
//! Everything here is a pure function of immutable values. Scalings are
//! expressed along a ray `α·u`: the caller supplies the constraint estimate
//! along the ray, `c = Âu`, and the confidence width `w = β‖u‖_{V⁻¹}`, and the
//! uncertainty box at `α·u` is `α·c + α·w·B_∞`. Unbounded rays return
//! `f64::INFINITY`; clipping against the action set is the caller's job.
//!
//! Grid resolution: in d = 2 a grid of `M` uniform angles puts every
//! direction within `π/M` of a grid ray. A feasible region containing the
//! ball of radius `ρ₀` and contained in the ball of radius `R` has a radial
//! function that is `R²/ρ₀`-Lipschitz in angle, so the best grid point trails
//! the continuous optimum by at most `‖θ‖ (R²/ρ₀ + R) π/M`
//! ([`grid_resolution_bound`]). Scalings are closed-form and exact up to
//! rounding; the predicates add a relative slack of `1e-12`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Seed for the random part of direction grids in d > 2.
pub const GRID_SEED: u64 = 0x5AFE_B0A7;

/// Default grid size in d = 2 (uniform angles).
pub const DEFAULT_GRID_2D: usize = 720;

/// Default number of sphere samples in d > 2.
pub const DEFAULT_GRID_HIGH_DIM: usize = 2048;

/// Relative slack used by the containment and intersection predicates.
const PREDICATE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ActionSet {
    /// Euclidean unit ball in `dim` dimensions.
    UnitBall { dim: usize },
    /// Symmetric box with the given per-coordinate half-widths.
    Box { half_widths: Vec<f64> },
    /// Union of segments `{α u_i : α ∈ [0, α_i]}` over unit directions `u_i`.
    FiniteStarConvex {
        directions: Vec<Vec<f64>>,
        scalings: Vec<f64>,
    },
}

impl ActionSet {
    pub fn finite_star(directions: Vec<Vec<f64>>, scalings: Vec<f64>) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if directions.len() != scalings.len() {
            return Err(Error::DimensionMismatch {
                expected: directions.len(),
                actual: scalings.len(),
            });
        }
        let dim = directions[0].len();
        for (u, &a) in directions.iter().zip(&scalings) {
            if u.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: u.len(),
                });
            }
            ensure_finite(u, "direction")?;
            check_unit(u)?;
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::InvalidInput(format!("ray scaling must be positive, got {a}")));
            }
        }
        Ok(Self::FiniteStarConvex { directions, scalings })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::UnitBall { dim } => *dim,
            Self::Box { half_widths } => half_widths.len(),
            Self::FiniteStarConvex { directions, .. } => directions[0].len(),
        }
    }

    /// Largest Euclidean norm of any member.
    pub fn norm_bound(&self) -> f64 {
        match self {
            Self::UnitBall { .. } => 1.0,
            Self::Box { half_widths } => half_widths.iter().map(|h| h * h).sum::<f64>().sqrt(),
            Self::FiniteStarConvex { scalings, .. } => scalings.iter().cloned().fold(0.0, f64::max),
        }
    }

    /// Largest `α` with `α·u ∈ X` for a unit vector `u`.
    ///
    /// Finite star-convex sets only accept their own listed directions, looked
    /// up by exact identity; use [`ActionSet::ray_scaling`] when the index is known.
    pub fn max_scaling(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: u.len(),
            });
        }
        ensure_finite(u, "direction")?;
        check_unit(u)?;
        match self {
            Self::UnitBall { .. } => Ok(1.0),
            Self::Box { half_widths } => Ok(half_widths
                .iter()
                .zip(u)
                .filter(|(_, &ui)| ui != 0.0)
                .map(|(h, ui)| h / ui.abs())
                .fold(f64::INFINITY, f64::min)),
            Self::FiniteStarConvex { directions, scalings } => directions
                .iter()
                .position(|d| d.as_slice() == u)
                .map(|i| scalings[i])
                .ok_or(Error::DirectionNotInSet),
        }
    }

    /// Maximum scaling of the `index`-th ray of a finite star-convex set.
    pub fn ray_scaling(&self, index: usize) -> Result<f64> {
        match self {
            Self::FiniteStarConvex { scalings, .. } => scalings.get(index).copied().ok_or(Error::DirectionNotInSet),
            _ => Err(Error::DirectionNotInSet),
        }
    }

    /// Membership test with absolute tolerance `tol`.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            Self::UnitBall { .. } => norm(x) <= 1.0 + tol,
            Self::Box { half_widths } => half_widths.iter().zip(x).all(|(h, v)| v.abs() <= h + tol),
            Self::FiniteStarConvex { directions, scalings } => {
                let len = norm(x);
                if len <= tol {
                    return true;
                }
                directions.iter().zip(scalings).any(|(u, &a)| {
                    let along: f64 = u.iter().zip(x).map(|(p, q)| p * q).sum();
                    let off: f64 = u
                        .iter()
                        .zip(x)
                        .map(|(p, q)| (q - along * p).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    along >= -tol && along <= a + tol && off <= tol
                })
            }
        }
    }

    /// The direction grid policies optimize over.
    ///
    /// Finite star-convex sets use their own rays. Continuous sets use `size`
    /// uniformly spaced angles in d = 2, the two signed axes in d = 1, and in
    /// d > 2 the signed coordinate axes followed by `size` seeded uniform
    /// sphere samples.
    pub fn grid(&self, size: usize) -> Result<DirectionGrid> {
        let dim = self.dim();
        let directions: Vec<Vec<f64>> = match self {
            Self::FiniteStarConvex { directions, .. } => directions.clone(),
            _ => match dim {
                1 => vec![vec![1.0], vec![-1.0]],
                2 => {
                    if size == 0 {
                        return Err(Error::EmptyGrid);
                    }
                    (0..size)
                        .map(|k| {
                            let angle = std::f64::consts::TAU * k as f64 / size as f64;
                            vec![angle.cos(), angle.sin()]
                        })
                        .collect()
                }
                _ => {
                    let mut dirs = Vec::with_capacity(2 * dim + size);
                    for i in 0..dim {
                        for sign in [1.0, -1.0] {
                            let mut e = vec![0.0; dim];
                            e[i] = sign;
                            dirs.push(e);
                        }
                    }
                    let mut rng = ChaCha8Rng::seed_from_u64(GRID_SEED);
                    dirs.extend((0..size).map(|_| random_unit_vector(&mut rng, dim)));
                    dirs
                }
            },
        };
        let max_scalings = match self {
            Self::FiniteStarConvex { scalings, .. } => scalings.clone(),
            _ => directions
                .iter()
                .map(|u| self.max_scaling(u))
                .collect::<Result<Vec<_>>>()?,
        };
        DirectionGrid::new(dim, directions, max_scalings)
    }
}

/// Ordered unit directions together with the action-set scaling along each.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionGrid {
    dim: usize,
    directions: Vec<f64>,
    max_scalings: Vec<f64>,
}

impl DirectionGrid {
    pub fn new(dim: usize, directions: Vec<Vec<f64>>, max_scalings: Vec<f64>) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if directions.len() != max_scalings.len() {
            return Err(Error::DimensionMismatch {
                expected: directions.len(),
                actual: max_scalings.len(),
            });
        }
        let mut flat = Vec::with_capacity(dim * directions.len());
        for u in &directions {
            if u.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: u.len(),
                });
            }
            flat.extend_from_slice(u);
        }
        Ok(Self {
            dim,
            directions: flat,
            max_scalings,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.max_scalings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.max_scalings.is_empty()
    }

    pub fn direction(&self, index: usize) -> &[f64] {
        &self.directions[index * self.dim..(index + 1) * self.dim]
    }

    pub fn max_scaling(&self, index: usize) -> f64 {
        self.max_scalings[index]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.directions
            .chunks_exact(self.dim)
            .zip(self.max_scalings.iter().copied())
    }
}

/// Known convex target the constraint output must land in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ConstraintTarget {
    /// Scalar constraint `aᵀx ≤ limit`.
    HalfSpace { limit: f64 },
    /// `Ax ∈ radius·B` for an `rows × d` constraint matrix.
    Ball { radius: f64, rows: usize },
    /// `Ax ∈ half_width·B_∞`.
    Box { half_width: f64, rows: usize },
}

impl ConstraintTarget {
    pub fn rows(&self) -> usize {
        match *self {
            Self::HalfSpace { .. } => 1,
            Self::Ball { rows, .. } | Self::Box { rows, .. } => rows,
        }
    }

    /// Largest `r` with `r·B ⊆ G`.
    pub fn inner_radius(&self) -> f64 {
        match *self {
            Self::HalfSpace { limit } => limit,
            Self::Ball { radius, .. } => radius,
            Self::Box { half_width, .. } => half_width,
        }
    }

    pub fn is_linked(&self) -> bool {
        !matches!(self, Self::HalfSpace { .. })
    }

    /// Largest `α ≥ 0` such that `α·c + α·w·B_∞ ⊆ G`.
    pub fn pessimistic_scaling(&self, c_hat: &[f64], w: f64) -> f64 {
        debug_assert_eq!(c_hat.len(), self.rows());
        let w = w.max(0.0);
        match *self {
            Self::HalfSpace { limit } => {
                let coef = c_hat[0] + w;
                if coef <= 0.0 {
                    f64::INFINITY
                } else {
                    limit / coef
                }
            }
            Self::Box { half_width, .. } => c_hat
                .iter()
                .map(|c| c.abs() + w)
                .filter(|&den| den > 0.0)
                .map(|den| half_width / den)
                .fold(f64::INFINITY, f64::min),
            Self::Ball { radius, .. } => {
                // Farthest box corner from the origin.
                let corner = c_hat.iter().map(|c| (c.abs() + w).powi(2)).sum::<f64>().sqrt();
                if corner > 0.0 {
                    radius / corner
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Largest `α ≥ 0` such that `α·c + α·w·B_∞` meets `G`.
    pub fn optimistic_scaling(&self, c_hat: &[f64], w: f64) -> f64 {
        debug_assert_eq!(c_hat.len(), self.rows());
        let w = w.max(0.0);
        match *self {
            Self::HalfSpace { limit } => {
                let coef = c_hat[0] - w;
                if coef <= 0.0 {
                    f64::INFINITY
                } else {
                    limit / coef
                }
            }
            Self::Box { half_width, .. } => c_hat
                .iter()
                .filter(|c| c.abs() > w)
                .map(|c| half_width / (c.abs() - w))
                .fold(f64::INFINITY, f64::min),
            Self::Ball { radius, .. } => {
                // Distance from the origin to the box.
                let gap = c_hat.iter().map(|c| (c.abs() - w).max(0.0).powi(2)).sum::<f64>().sqrt();
                if gap > 0.0 {
                    radius / gap
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Whether `center + radius·B_∞ ⊆ G`.
    pub fn box_contained(&self, center: &[f64], radius: f64) -> bool {
        self.pessimistic_scaling(center, radius) >= 1.0 - PREDICATE_SLACK
    }

    /// Whether `center + radius·B_∞` meets `G`.
    pub fn box_intersects(&self, center: &[f64], radius: f64) -> bool {
        self.optimistic_scaling(center, radius) >= 1.0 - PREDICATE_SLACK
    }

    /// Membership of a constraint output with absolute tolerance `tol`.
    pub fn contains(&self, value: &[f64], tol: f64) -> bool {
        match *self {
            Self::HalfSpace { limit } => value[0] <= limit + tol,
            Self::Ball { radius, .. } => norm(value) <= radius + tol,
            Self::Box { half_width, .. } => value.iter().all(|v| v.abs() <= half_width + tol),
        }
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Largest shortfall of the best ray in a `size`-angle 2-D grid against the
/// continuous optimum, for a feasible region between radii `inner` and `outer`.
pub fn grid_resolution_bound(theta_norm: f64, inner: f64, outer: f64, size: usize) -> f64 {
    theta_norm * (outer * outer / inner + outer) * std::f64::consts::PI / size as f64
}

fn check_unit(u: &[f64]) -> Result<()> {
    let len = norm(u);
    if (len - 1.0).abs() <= 1e-9 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "direction must be a unit vector, norm is {len}"
        )))
    }
}

/// Uniform sample on the unit sphere via normalized Gaussians.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let len = norm(&v);
        if len > 1e-12 {
            return v.into_iter().map(|x| x / len).collect();
        }
    }
}
