//! Brute-force oracles shared by the integration tests. None of these call
//! the closed-form scalings they are used to check.
#![allow(dead_code)]

use rand::Rng;
use slb_core::environment::ProblemInstance;
use slb_core::geometry::{dot, norm, ActionSet, ConstraintTarget};

pub fn in_target(target: &ConstraintTarget, v: &[f64]) -> bool {
    match *target {
        ConstraintTarget::HalfSpace { limit } => v[0] <= limit,
        ConstraintTarget::Ball { radius, .. } => v.iter().map(|x| x * x).sum::<f64>() <= radius * radius,
        ConstraintTarget::Box { half_width, .. } => v.iter().all(|x| x.abs() <= half_width),
    }
}

/// `center + radius·B_∞ ⊆ G`, checked on every corner (G is convex).
pub fn box_contained_by_corners(target: &ConstraintTarget, center: &[f64], radius: f64) -> bool {
    let n = center.len();
    (0..1usize << n).all(|mask| {
        let corner: Vec<f64> = center
            .iter()
            .enumerate()
            .map(|(i, c)| if mask >> i & 1 == 1 { c + radius } else { c - radius })
            .collect();
        in_target(target, &corner)
    })
}

/// `center + radius·B_∞` meets `G`, via the box point closest to G's
/// centre (the origin for every target here) or per-axis interval overlap.
pub fn box_meets_by_clamping(target: &ConstraintTarget, center: &[f64], radius: f64) -> bool {
    match *target {
        ConstraintTarget::HalfSpace { limit } => center[0] - radius <= limit,
        ConstraintTarget::Ball { .. } | ConstraintTarget::Box { .. } => {
            let nearest: Vec<f64> = center.iter().map(|c| 0f64.clamp(c - radius, c + radius)).collect();
            in_target(target, &nearest)
        }
    }
}

/// Largest `α ∈ [0, cap]` with `holds(α)`, for a predicate that is true on
/// an initial segment. Returns `cap` when it holds throughout.
pub fn bisect(holds: impl Fn(f64) -> bool, cap: f64) -> f64 {
    if holds(cap) {
        return cap;
    }
    let (mut lo, mut hi) = (0.0, cap);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Uniform point of the action set by rejection from its bounding box.
pub fn random_action<R: Rng + ?Sized>(set: &ActionSet, rng: &mut R) -> Vec<f64> {
    match set {
        ActionSet::UnitBall { dim } => loop {
            let x: Vec<f64> = (0..*dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
            if norm(&x) <= 1.0 {
                return x;
            }
        },
        ActionSet::Box { half_widths } => half_widths.iter().map(|h| rng.random_range(-h..=*h)).collect(),
        ActionSet::FiniteStarConvex { directions, scalings } => {
            let i = rng.random_range(0..directions.len());
            let a = rng.random_range(0.0..=scalings[i]);
            directions[i].iter().map(|u| u * a).collect()
        }
    }
}

/// Largest truly feasible scaling along unit `u`, by bisection on membership.
pub fn feasible_scaling_by_bisection(inst: &ProblemInstance, u: &[f64], action_cap: f64) -> f64 {
    bisect(
        |a| {
            let x: Vec<f64> = u.iter().map(|v| v * a).collect();
            let z: Vec<f64> = inst.constraint.iter().map(|row| dot(row, &x)).collect();
            in_target(&inst.target, &z)
        },
        action_cap,
    )
}

/// Best reward over rejection-sampled feasible actions.
pub fn sampled_optimum<R: Rng + ?Sized>(inst: &ProblemInstance, samples: usize, rng: &mut R) -> f64 {
    let mut best = 0.0f64;
    for _ in 0..samples {
        let x = random_action(&inst.action_set, rng);
        let z: Vec<f64> = inst.constraint.iter().map(|row| dot(row, &x)).collect();
        if in_target(&inst.target, &z) {
            best = best.max(dot(&inst.theta, &x));
        }
    }
    best
}

/// Largest box scaling along a 2-D unit direction.
pub fn box_cap(half_widths: &[f64], u: &[f64]) -> f64 {
    half_widths
        .iter()
        .zip(u)
        .filter(|(_, v)| **v != 0.0)
        .map(|(h, v)| h / v.abs())
        .fold(f64::INFINITY, f64::min)
}

/// Optimum over `angles` equally spaced rays in 2-D, each scaled by bisection.
pub fn dense_ray_optimum(inst: &ProblemInstance, angles: usize) -> f64 {
    let mut best = 0.0f64;
    for k in 0..angles {
        let phi = std::f64::consts::TAU * k as f64 / angles as f64;
        let u = [phi.cos(), phi.sin()];
        let cap = match &inst.action_set {
            ActionSet::UnitBall { .. } => 1.0,
            ActionSet::Box { half_widths } => box_cap(half_widths, &u),
            ActionSet::FiniteStarConvex { .. } => unreachable!("finite sets have no continuum of rays"),
        };
        let s = feasible_scaling_by_bisection(inst, &u, cap);
        best = best.max(s * dot(&inst.theta, &u));
    }
    best
}

/// Every brute-force comparison for one 2-D instance; returns the failures.
///
/// Checks the optimal action against per-ray bisection, a dense angular
/// sweep (10× the grid, so it contains the grid) and rejection sampling,
/// with slack given by the grid resolution bound; then checks both ray
/// scalings under a perturbed estimate against the corner/clamp oracles
/// and Monte-Carlo membership of the pessimistic box.
pub fn oracle_failures<R: Rng + ?Sized>(inst: &ProblemInstance, mc_samples: usize, rng: &mut R) -> Vec<String> {
    use slb_core::geometry::grid_resolution_bound;

    let mut failures = Vec::new();
    let opt = inst.optimal_action();
    let grid = &inst.grid;

    let mut best_by_bisection = 0.0f64;
    for i in 0..grid.len() {
        let u = grid.direction(i);
        let oracle = feasible_scaling_by_bisection(inst, u, grid.max_scaling(i));
        let got = inst.feasible_scaling(i);
        if (got - oracle).abs() > 1e-9 * got.max(1.0) {
            failures.push(format!("ray {i}: feasible scaling {got} vs bisection {oracle}"));
        }
        best_by_bisection = best_by_bisection.max(oracle * dot(&inst.theta, u));
    }
    if (opt.value - best_by_bisection).abs() > 1e-9 {
        failures.push(format!(
            "grid optimum {} vs per-ray bisection {best_by_bisection}",
            opt.value
        ));
    }
    if (dot(&inst.theta, &opt.action) - opt.value).abs() > 1e-12 {
        failures.push("optimal action does not attain the optimal value".into());
    }

    let sampled = sampled_optimum(inst, mc_samples, rng);
    match &inst.action_set {
        ActionSet::FiniteStarConvex { .. } => {
            if sampled > opt.value + 1e-9 {
                failures.push(format!(
                    "sampled feasible reward {sampled} beats the optimum {}",
                    opt.value
                ));
            }
        }
        set => {
            let inner = match set {
                ActionSet::Box { half_widths } => half_widths.iter().cloned().fold(f64::INFINITY, f64::min),
                _ => 1.0,
            }
            .min(inst.nu());
            let outer = set.norm_bound();
            let theta_norm = norm(&inst.theta);
            let dense_angles = 10 * grid.len();
            let dense = dense_ray_optimum(inst, dense_angles);
            let coarse = grid_resolution_bound(theta_norm, inner, outer, grid.len());
            let fine = grid_resolution_bound(theta_norm, inner, outer, dense_angles);
            if opt.value > dense + 1e-9 || opt.value < dense - coarse {
                failures.push(format!(
                    "grid optimum {} vs dense sweep {dense} (resolution {coarse})",
                    opt.value
                ));
            }
            if sampled > dense + fine + 1e-9 {
                failures.push(format!(
                    "sampled feasible reward {sampled} beats the dense sweep {dense}"
                ));
            }
        }
    }

    // A perturbed estimate, as a learner would hold mid-run.
    let w = rng.random_range(0.0..0.3);
    let a_hat: Vec<Vec<f64>> = inst
        .constraint
        .iter()
        .map(|row| row.iter().map(|v| v + rng.random_range(-0.2..0.2)).collect())
        .collect();
    const CAP: f64 = 1e6;
    for i in (0..grid.len()).step_by((grid.len() / 40).max(1)) {
        let u = grid.direction(i);
        let c: Vec<f64> = a_hat.iter().map(|row| dot(row, u)).collect();
        let scale = |a: f64| c.iter().map(|v| v * a).collect::<Vec<_>>();
        let pess = inst.target.pessimistic_scaling(&c, w);
        let optimistic = inst.target.optimistic_scaling(&c, w);
        let oracle_p = bisect(|a| box_contained_by_corners(&inst.target, &scale(a), a * w), CAP);
        let oracle_o = bisect(|a| box_meets_by_clamping(&inst.target, &scale(a), a * w), CAP);
        for (name, got, oracle) in [("pessimistic", pess, oracle_p), ("optimistic", optimistic, oracle_o)] {
            let ok = if got >= CAP {
                oracle >= CAP * (1.0 - 1e-9)
            } else {
                (got - oracle).abs() <= 1e-9 * got.max(1.0)
            };
            if !ok {
                failures.push(format!("ray {i}: {name} scaling {got} vs bisection {oracle}"));
            }
        }
        if pess.is_finite() {
            let center = scale(pess);
            for _ in 0..50 {
                let point: Vec<f64> = center
                    .iter()
                    .map(|v| v + pess * w * rng.random_range(-1.0..=1.0))
                    .collect();
                let shrunk: Vec<f64> = point.iter().map(|v| v * (1.0 - 1e-9)).collect();
                if !in_target(&inst.target, &shrunk) {
                    failures.push(format!(
                        "ray {i}: sampled point of the pessimistic box leaves the target"
                    ));
                    break;
                }
            }
        }
    }
    failures
}

/// A random mid-run learner state: estimator after a few random updates,
/// random point estimates and radius.
pub fn random_view<R: Rng + ?Sized>(rng: &mut R, dim: usize, rows: usize) -> slb_core::policies::EstimateView {
    use slb_core::estimation::RlsEstimator;
    use slb_core::policies::EstimateView;

    let mut est = RlsEstimator::new(dim, 1.0, 1).unwrap();
    for _ in 0..rng.random_range(0..60) {
        let scale = rng.random_range(0.0..1.0);
        let x: Vec<f64> = slb_core::geometry::random_unit_vector(rng, dim)
            .iter()
            .map(|v| v * scale)
            .collect();
        est.update(&x, &[0.0]).unwrap();
    }
    let mut view = EstimateView::from_estimator(&est, rng.random_range(0.05..2.0));
    view.theta_hat = (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect();
    view.constraint_hat = (0..rows)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect())
        .collect();
    view
}

/// A random target with `rows` outputs, or a half-space when `rows == 1`
/// and the coin says so.
pub fn random_target<R: Rng + ?Sized>(rng: &mut R, rows: usize) -> ConstraintTarget {
    let r = rng.random_range(0.25..1.0);
    match rng.random_range(0..3) {
        0 if rows == 1 => ConstraintTarget::HalfSpace { limit: r },
        0 | 1 => ConstraintTarget::Ball { radius: r, rows },
        _ => ConstraintTarget::Box { half_width: r, rows },
    }
}
