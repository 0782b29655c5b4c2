//! Online regularized least squares and the confidence radii built on it.
//!
//! One [`RlsEstimator`] holds a single Gram matrix `V = λI + Σ x xᵀ` shared by
//! several observation streams (the reward stream and one stream per
//! constraint row). Each stream keeps its own response accumulator `Σ x y`,
//! and its estimate is `V⁻¹ Σ x y`.
//!
//! The inverse is maintained with the Sherman–Morrison rank-one identity and
//! recomputed exactly from the Gram matrix every [`REINVERSION_PERIOD`]
//! updates so floating-point drift stays bounded.

use nalgebra::{DMatrix, DVector};

use crate::error::{ensure_dim, ensure_finite, Error, Result};

/// Number of rank-one updates between exact re-inversions of the Gram matrix.
pub const REINVERSION_PERIOD: u64 = 1000;

#[derive(Debug, Clone)]
pub struct RlsEstimator {
    dim: usize,
    lambda: f64,
    gram: DMatrix<f64>,
    gram_inverse: DMatrix<f64>,
    response_sums: Vec<DVector<f64>>,
    count: u64,
}

impl RlsEstimator {
    /// Fresh estimator with `V = λI` and `streams` zeroed response accumulators.
    pub fn new(dim: usize, lambda: f64, streams: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidInput(format!(
                "regularization must be positive and finite, got {lambda}"
            )));
        }
        if streams == 0 {
            return Err(Error::InvalidInput("at least one stream is required".into()));
        }
        Ok(Self {
            dim,
            lambda,
            gram: DMatrix::identity(dim, dim) * lambda,
            gram_inverse: DMatrix::identity(dim, dim) / lambda,
            response_sums: vec![DVector::zeros(dim); streams],
            count: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn streams(&self) -> usize {
        self.response_sums.len()
    }

    /// Rounds absorbed so far.
    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn gram_inverse(&self) -> &DMatrix<f64> {
        &self.gram_inverse
    }

    pub fn response_sum(&self, stream: usize) -> &DVector<f64> {
        &self.response_sums[stream]
    }

    /// Absorbs one action and its per-stream responses.
    pub fn update(&mut self, x: &[f64], responses: &[f64]) -> Result<()> {
        ensure_dim(self.dim, x.len())?;
        ensure_dim(self.response_sums.len(), responses.len())?;
        ensure_finite(x, "action")?;
        ensure_finite(responses, "responses")?;

        let xv = DVector::from_column_slice(x);
        self.gram.ger(1.0, &xv, &xv, 1.0);
        for (sum, &y) in self.response_sums.iter_mut().zip(responses) {
            sum.axpy(y, &xv, 1.0);
        }
        self.count += 1;

        if self.count.is_multiple_of(REINVERSION_PERIOD) {
            self.reinvert();
        } else {
            let vx = &self.gram_inverse * &xv;
            let denom = 1.0 + xv.dot(&vx);
            self.gram_inverse.ger(-1.0 / denom, &vx, &vx, 1.0);
            symmetrize(&mut self.gram_inverse);
        }
        Ok(())
    }

    /// Recomputes `V⁻¹` from `V` by Cholesky factorization.
    pub fn reinvert(&mut self) {
        // V ⪰ λI with λ > 0, so the factorization cannot fail.
        let chol = self
            .gram
            .clone()
            .cholesky()
            .expect("regularized Gram matrix is positive definite");
        self.gram_inverse = chol.inverse();
        symmetrize(&mut self.gram_inverse);
    }

    /// `√(xᵀ V⁻¹ x)`.
    pub fn weighted_norm(&self, x: &[f64]) -> f64 {
        quadratic_form(&self.gram_inverse, x).max(0.0).sqrt()
    }

    /// Current least-squares estimate `V⁻¹ Σ x y` for one stream.
    pub fn estimate(&self, stream: usize) -> DVector<f64> {
        &self.gram_inverse * &self.response_sums[stream]
    }

    /// Estimates for every stream, reward stream first.
    pub fn estimates(&self) -> Vec<Vec<f64>> {
        (0..self.streams())
            .map(|s| self.estimate(s).as_slice().to_vec())
            .collect()
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// `xᵀ M x` for a square column-major matrix, without allocating.
pub fn quadratic_form(m: &DMatrix<f64>, x: &[f64]) -> f64 {
    let n = x.len();
    debug_assert_eq!(m.nrows(), n);
    let data = m.as_slice();
    let mut acc = 0.0;
    for (j, &xj) in x.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        let col = &data[j * n..(j + 1) * n];
        let mut s = 0.0;
        for (mij, &xi) in col.iter().zip(x) {
            s += mij * xi;
        }
        acc += s * xj;
    }
    acc
}

/// Confidence-set parameters shared by the streaming and phased radii.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceParams {
    /// Subgaussian noise scale ρ.
    pub rho: f64,
    /// Total failure probability δ.
    pub delta: f64,
    /// Norm bound S = max(S_a, S_θ).
    pub s_bound: f64,
    /// Regularization λ.
    pub lambda: f64,
    /// Number of parallel confidence statements δ is split over:
    /// 2 for a scalar constraint, n + 1 for an n-row linked constraint.
    pub streams: usize,
    pub dim: usize,
    /// Upper bound L on ‖x‖ over the action set. 1 for sets inside the unit ball.
    pub action_norm_bound: f64,
}

impl ConfidenceParams {
    pub fn new(rho: f64, delta: f64, s_bound: f64, lambda: f64, streams: usize, dim: usize) -> Result<Self> {
        let params = Self {
            rho,
            delta,
            s_bound,
            lambda,
            streams,
            dim,
            action_norm_bound: 1.0,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_action_norm_bound(mut self, bound: f64) -> Result<Self> {
        self.action_norm_bound = bound;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(Error::Config(format!("rho must be nonnegative, got {}", self.rho)));
        }
        if !(self.s_bound >= 0.0 && self.s_bound.is_finite()) {
            return Err(Error::Config(format!(
                "norm bound must be nonnegative, got {}",
                self.s_bound
            )));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.action_norm_bound > 0.0 && self.action_norm_bound.is_finite()) {
            return Err(Error::Config("action norm bound must be positive".into()));
        }
        if self.streams < 2 {
            return Err(Error::Config("at least two confidence streams are required".into()));
        }
        if self.dim == 0 {
            return Err(Error::Config("dimension must be positive".into()));
        }
        Ok(())
    }

    /// Streaming radius β_t at round `t ≥ 1`:
    /// `ρ √(d log((1 + (t−1)L²/λ) / (δ/m))) + √λ S` with `m = streams`.
    pub fn radius_rls(&self, t: u64) -> Result<f64> {
        if t < 1 {
            return Err(Error::InvalidInput("round index must be at least 1".into()));
        }
        let growth = 1.0 + (t - 1) as f64 * self.action_norm_bound.powi(2) / self.lambda;
        let split = self.delta / self.streams as f64;
        let log_term = (growth / split).ln().max(0.0);
        Ok(self.rho * (self.dim as f64 * log_term).sqrt() + self.lambda.sqrt() * self.s_bound)
    }

    /// Phased-elimination radius `ρ √(2 log(4 n k J / δ)) + √λ S`; independent of d.
    pub fn radius_phased(&self, directions: usize, phases: usize, rows: usize) -> f64 {
        let count = 4.0 * rows.max(1) as f64 * directions.max(1) as f64 * phases.max(1) as f64;
        let log_term = (count / self.delta).ln().max(0.0);
        self.rho * (2.0 * log_term).sqrt() + self.lambda.sqrt() * self.s_bound
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn rank_one_add_on_fresh_estimator() {
        let mut est = RlsEstimator::new(2, 1.0, 2).unwrap();
        est.update(&[1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(est.gram(), &DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]));
        assert_eq!(est.count(), 1);
    }

    #[test]
    fn zero_action_leaves_state_unchanged() {
        let mut est = RlsEstimator::new(2, 1.0, 2).unwrap();
        est.update(&[0.0, 0.0], &[5.0, 5.0]).unwrap();
        assert_eq!(est.gram(), &DMatrix::identity(2, 2));
        assert_eq!(est.response_sum(0), &DVector::zeros(2));
        assert_eq!(est.response_sum(1), &DVector::zeros(2));
    }

    #[test]
    fn rejects_non_finite_and_misshaped_input() {
        let mut est = RlsEstimator::new(2, 1.0, 2).unwrap();
        assert!(matches!(
            est.update(&[f64::NAN, 0.0], &[0.0, 0.0]),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            est.update(&[1.0, 0.0], &[f64::INFINITY, 0.0]),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            est.update(&[1.0], &[0.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            est.update(&[1.0, 0.0], &[0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert_eq!(est.count(), 0);
    }

    #[test]
    fn inverse_tracks_direct_inversion() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut est = RlsEstimator::new(4, 1.0, 3).unwrap();
        for _ in 0..100 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            est.update(&x, &[0.1, 0.2, 0.3]).unwrap();
        }
        // LU-based inverse as the independent oracle.
        let direct = est.gram().clone().lu().try_inverse().unwrap();
        assert!(max_abs_diff(est.gram_inverse(), &direct) <= 1e-8);
    }

    #[test]
    fn long_update_sequences_stay_within_drift_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut est = RlsEstimator::new(3, 1.0, 2).unwrap();
        for i in 0..100_000u32 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-0.8..0.8)).collect();
            est.update(&x, &[0.0, 0.0]).unwrap();
            if i % 9_973 == 0 {
                let direct = est.gram().clone().lu().try_inverse().unwrap();
                assert!(max_abs_diff(est.gram_inverse(), &direct) <= 1e-8);
                let product = est.gram() * est.gram_inverse();
                assert!(max_abs_diff(&product, &DMatrix::identity(3, 3)) <= 1e-8);
            }
        }
        let direct = est.gram().clone().lu().try_inverse().unwrap();
        assert!(max_abs_diff(est.gram_inverse(), &direct) <= 1e-8);
    }

    #[test]
    fn estimate_matches_inverse_times_sums() {
        let mut est = RlsEstimator::new(2, 1.0, 2).unwrap();
        est.update(&[1.0, 0.0], &[2.0, -1.0]).unwrap();
        est.update(&[0.0, 1.0], &[3.0, 4.0]).unwrap();
        // V = diag(2, 2), sums = (2, 3) and (-1, 4).
        assert_eq!(est.estimate(0).as_slice(), &[1.0, 1.5]);
        assert_eq!(est.estimate(1).as_slice(), &[-0.5, 2.0]);
    }

    #[test]
    fn weighted_norm_examples() {
        let mut est = RlsEstimator::new(2, 1.0, 2).unwrap();
        assert_eq!(est.weighted_norm(&[1.0, 0.0]), 1.0);
        assert_eq!(est.weighted_norm(&[0.0, 0.0]), 0.0);
        est.update(&[1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!((est.weighted_norm(&[1.0, 0.0]) - 1.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn weighted_norm_matches_linear_solve_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let d = rng.random_range(1..6);
            let mut est = RlsEstimator::new(d, 1.0 + rng.random::<f64>(), 2).unwrap();
            for _ in 0..rng.random_range(0..40) {
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                est.update(&x, &[0.0, 0.0]).unwrap();
            }
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let xv = DVector::from_column_slice(&x);
            let solved = est.gram().clone().lu().solve(&xv).unwrap();
            let oracle = xv.dot(&solved).sqrt();
            let got = est.weighted_norm(&x);
            assert!((got - oracle).abs() <= 1e-10 * oracle.max(1e-300), "{got} vs {oracle}");
        }
    }

    #[test]
    fn rls_radius_examples() {
        let p = ConfidenceParams::new(0.0, 0.5, 1.0, 1.0, 2, 3).unwrap();
        for t in [1, 2, 100, 10_000] {
            assert_eq!(p.radius_rls(t).unwrap(), 1.0);
        }

        let p = ConfidenceParams::new(1.0, 2.0 / std::f64::consts::E, 0.0, 1.0, 2, 1).unwrap();
        assert!((p.radius_rls(1).unwrap() - 1.0).abs() < 1e-12);

        // ρ=0.1, d=2, λ=1, S=√2, δ=0.01, t=101:
        // 0.1·√(2·ln(101/0.005)) + √2 evaluated by hand ≈ 1.8595.
        let p = ConfidenceParams::new(0.1, 0.01, 2f64.sqrt(), 1.0, 2, 2).unwrap();
        let expected = 0.1 * (2.0 * (101.0f64 / 0.005).ln()).sqrt() + 2f64.sqrt();
        let got = p.radius_rls(101).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 1.8595).abs() < 1e-3);

        assert!(p.radius_rls(0).is_err());
    }

    #[test]
    fn linked_radius_splits_delta_over_rows() {
        let scalar = ConfidenceParams::new(0.1, 0.01, 1.0, 1.0, 2, 2).unwrap();
        let linked = ConfidenceParams { streams: 3, ..scalar };
        let t = 50;
        let expected = 0.1 * (2.0 * ((1.0f64 + 49.0) / (0.01 / 3.0)).ln()).sqrt() + 1.0;
        assert!((linked.radius_rls(t).unwrap() - expected).abs() < 1e-12);
        assert!(linked.radius_rls(t).unwrap() > scalar.radius_rls(t).unwrap());
    }

    #[test]
    fn phased_radius_examples() {
        let p = ConfidenceParams::new(0.0, 0.01, 2.0, 4.0, 2, 7).unwrap();
        assert_eq!(p.radius_phased(10, 15, 1), 4.0);

        // 4kJ/δ = e^{1/2} forces the log term to one half.
        let k = 3;
        let j = 5;
        let delta = 4.0 * (k * j) as f64 / 0.5f64.exp();
        let p = ConfidenceParams {
            rho: 1.0,
            delta,
            s_bound: 0.0,
            lambda: 1.0,
            streams: 2,
            dim: 1,
            action_norm_bound: 1.0,
        };
        assert!((p.radius_phased(k, j, 1) - 1.0).abs() < 1e-12);

        let p = ConfidenceParams::new(0.1, 0.01, 2.0, 1.0, 2, 10).unwrap();
        let expected = 0.1 * (2.0 * (4.0 * 10.0 * 15.0 / 0.01f64).ln()).sqrt() + 2.0;
        assert!((p.radius_phased(10, 15, 1) - expected).abs() < 1e-12);
        assert!((p.radius_phased(10, 15, 1) - 2.46909).abs() < 1e-4);
        let wide = ConfidenceParams { dim: 1000, ..p };
        assert_eq!(wide.radius_phased(10, 15, 1), p.radius_phased(10, 15, 1));
        assert!(p.radius_phased(10, 15, 2) > p.radius_phased(10, 15, 1));
    }

    #[test]
    fn params_reject_bad_values() {
        assert!(ConfidenceParams::new(0.1, 0.0, 1.0, 1.0, 2, 2).is_err());
        assert!(ConfidenceParams::new(0.1, 1.0, 1.0, 1.0, 2, 2).is_err());
        assert!(ConfidenceParams::new(-0.1, 0.5, 1.0, 1.0, 2, 2).is_err());
        assert!(ConfidenceParams::new(0.1, 0.5, 1.0, 1.0, 1, 2).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::{any, prop_assert, proptest};

        proptest! {
            #[test]
            fn weighted_norm_bounded_by_regularization(
                seed in any::<u64>(),
                lambda in 1.0f64..10.0,
                updates in 0usize..30,
            ) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut est = RlsEstimator::new(3, lambda, 2).unwrap();
                for _ in 0..updates {
                    let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                    est.update(&x, &[0.0, 0.0]).unwrap();
                }
                let x: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
                let euclid = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                prop_assert!(est.weighted_norm(&x) <= euclid / lambda.sqrt() * (1.0 + 1e-12) + 1e-15);
            }

            #[test]
            fn rls_radius_monotone_in_round_and_dimension(
                rho in 0.0f64..2.0,
                delta in 0.001f64..0.99,
                s in 0.0f64..3.0,
                lambda in 1.0f64..5.0,
                d in 1usize..20,
                t in 1u64..100_000,
                step in 0u64..1000,
            ) {
                let p = ConfidenceParams::new(rho, delta, s, lambda, 2, d).unwrap();
                let base = p.radius_rls(t).unwrap();
                prop_assert!(p.radius_rls(t + step).unwrap() >= base);
                let wider = ConfidenceParams { dim: d + 1, ..p };
                prop_assert!(wider.radius_rls(t).unwrap() >= base);
            }
        }
    }
}
