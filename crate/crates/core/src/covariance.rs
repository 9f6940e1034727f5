//! Covariance propagation for the exactly determined planar two-station
//! case: the observation covariance is carried through the inverse of the
//! 2x2 position Jacobian. Overdetermined covariance is out of scope.

use crate::model::{Mode, ProblemSpec};
use nalgebra::Matrix2;
use thiserror::Error;

/// Condition numbers above this make the propagation numerically
/// meaningless in double precision.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CovarianceError {
    #[error("covariance propagation requires planar2 mode, got {0}")]
    WrongMode(Mode),
    #[error(
        "position Jacobian is singular or ill-conditioned (condition {condition:.3e}): \
         the point is collinear with the two stations"
    )]
    IllConditioned { condition: f64 },
    #[error("distance {index} is not positive")]
    NonPositiveDistance { index: usize },
}

/// Propagated uncertainty of a planar2 estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceReport {
    /// `2 [[x-u1, y-v1], [x-u2, y-v2]]`.
    pub jacobian: Matrix2<f64>,
    /// Covariance of the squared-distance observations (m^4).
    pub sigma_l: Matrix2<f64>,
    /// Covariance of the (x, y) estimate (m^2).
    pub sigma_x: Matrix2<f64>,
    pub condition_number: f64,
}

/// Jacobian of the squared-distance pair with respect to the planar
/// position. Rows match [`crate::model::model_jacobian`] restricted to
/// the two unknown columns.
pub fn position_jacobian(spec: &ProblemSpec, x: f64, y: f64) -> Result<Matrix2<f64>, CovarianceError> {
    if spec.mode != Mode::Planar2 {
        return Err(CovarianceError::WrongMode(spec.mode));
    }
    Ok(Matrix2::new(
        2.0 * (x - spec.stations[0].u),
        2.0 * (y - spec.stations[0].v),
        2.0 * (x - spec.stations[1].u),
        2.0 * (y - spec.stations[1].v),
    ))
}

/// Carry `sigma_l` through the inverse position Jacobian:
/// `sigma_x = J^-1 sigma_l J^-T`, symmetrized against round-off.
pub fn propagate(
    spec: &ProblemSpec,
    point: (f64, f64),
    sigma_l: Matrix2<f64>,
) -> Result<CovarianceReport, CovarianceError> {
    let jac = position_jacobian(spec, point.0, point.1)?;
    let svd = jac.svd(false, false);
    let (smax, smin) = (svd.singular_values[0], svd.singular_values[1]);
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !condition.is_finite() || condition > CONDITION_LIMIT {
        return Err(CovarianceError::IllConditioned { condition });
    }
    let inv = jac.try_inverse().ok_or(CovarianceError::IllConditioned { condition })?;
    let raw = inv * sigma_l * inv.transpose();
    let sigma_x = 0.5 * (raw + raw.transpose());
    Ok(CovarianceReport { jacobian: jac, sigma_l, sigma_x, condition_number: condition })
}

/// First-order variance of a squared distance: `var(d^2) = 4 d^2 sigma_d^2`.
/// Returns the diagonal observation covariance for the two-station case.
pub fn distance_sigma_to_l_sigma(
    distances: [f64; 2],
    sigma_d: [f64; 2],
) -> Result<Matrix2<f64>, CovarianceError> {
    for (index, &d) in distances.iter().enumerate() {
        if d <= 0.0 || d.is_nan() {
            return Err(CovarianceError::NonPositiveDistance { index });
        }
    }
    Ok(Matrix2::new(
        4.0 * distances[0] * distances[0] * sigma_d[0] * sigma_d[0],
        0.0,
        0.0,
        4.0 * distances[1] * distances[1] * sigma_d[1] * sigma_d[1],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{model_jacobian, ObservationSet, Station};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn reference() -> ProblemSpec {
        ProblemSpec::new(
            vec![Station::new("A", 0.0, 0.0, 0.0), Station::new("B", 4.0, 0.0, 0.0)],
            ObservationSet::from_squares(vec![5.0, 13.0]),
            Mode::Planar2,
            Some(0.0),
        )
        .unwrap()
    }

    #[test]
    fn jacobian_reference_values() {
        let jac = position_jacobian(&reference(), 1.0, 2.0).unwrap();
        assert_eq!(jac, Matrix2::new(2.0, 4.0, -6.0, 4.0));
    }

    #[test]
    fn jacobian_matches_model_jacobian_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let spec = reference();
        for _ in 0..50 {
            let (x, y) = (rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
            let jac = position_jacobian(&spec, x, y).unwrap();
            let full = model_jacobian(&spec, &spec.point(x, y, 0.0)).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert_eq!(jac[(i, j)], full[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn collinear_point_rejected() {
        // on the station line the second column vanishes
        let err = propagate(&reference(), (2.5, 0.0), Matrix2::identity()).unwrap_err();
        assert!(matches!(err, CovarianceError::IllConditioned { .. }));
        let msg = err.to_string();
        assert!(msg.contains("collinear"), "{msg}");
    }

    #[test]
    fn reference_propagation_values() {
        // J^-1 = (1/32) [[4, -4], [6, 2]]; sigma_x = J^-1 J^-T
        let report = propagate(&reference(), (1.0, 2.0), Matrix2::identity()).unwrap();
        let expected = Matrix2::new(0.03125, 0.015625, 0.015625, 0.0390625);
        assert!((report.sigma_x - expected).norm() <= 1e-15);
        // forward identity J sigma_x J^T = sigma_l
        let back = report.jacobian * report.sigma_x * report.jacobian.transpose();
        assert!((back - Matrix2::identity()).norm() <= 1e-10);
    }

    #[test]
    fn zero_and_scaled_sigma() {
        let spec = reference();
        let zero = propagate(&spec, (1.0, 2.0), Matrix2::zeros()).unwrap();
        assert_eq!(zero.sigma_x, Matrix2::zeros());
        let base = propagate(&spec, (1.0, 2.0), Matrix2::identity()).unwrap();
        let scaled = propagate(&spec, (1.0, 2.0), 3.5 * Matrix2::identity()).unwrap();
        assert!((scaled.sigma_x - 3.5 * base.sigma_x).norm() <= 1e-14);
    }

    #[test]
    fn rotation_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let spec = reference();
            let (x, y) = (rng.gen_range(0.0..3.0), rng.gen_range(0.5..3.0));
            let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let rot = Matrix2::new(phi.cos(), -phi.sin(), phi.sin(), phi.cos());
            let rotate = |u: f64, v: f64| (rot[(0, 0)] * u + rot[(0, 1)] * v, rot[(1, 0)] * u + rot[(1, 1)] * v);
            let mut turned = spec.clone();
            for st in &mut turned.stations {
                let (u, v) = rotate(st.u, st.v);
                st.u = u;
                st.v = v;
            }
            let (xr, yr) = rotate(x, y);
            let base = propagate(&spec, (x, y), Matrix2::identity()).unwrap();
            let moved = propagate(&turned, (xr, yr), Matrix2::identity()).unwrap();
            let expected = rot * base.sigma_x * rot.transpose();
            assert!(
                (moved.sigma_x - expected).norm() <= 1e-10 * expected.norm().max(1.0),
                "{:?} vs {:?}",
                moved.sigma_x,
                expected
            );
        }
    }

    #[test]
    fn distance_sigma_formula() {
        let sigma = distance_sigma_to_l_sigma([5.0f64.sqrt(), 13.0f64.sqrt()], [0.01, 0.0]).unwrap();
        assert!((sigma[(0, 0)] - 2e-3).abs() <= 1e-18);
        assert_eq!(sigma[(1, 1)], 0.0);
        assert!(matches!(
            distance_sigma_to_l_sigma([0.0, 1.0], [0.01, 0.01]),
            Err(CovarianceError::NonPositiveDistance { index: 0 })
        ));
    }

    #[test]
    fn distance_sigma_matches_monte_carlo() {
        let d: f64 = 37.0;
        let sigma_d = 0.2; // sigma/d below 1%
        let normal = Normal::new(0.0, sigma_d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let n = 1_000_000usize;
        let (mut sum, mut sum2) = (0.0f64, 0.0f64);
        for _ in 0..n {
            let l = (d + normal.sample(&mut rng)).powi(2);
            sum += l;
            sum2 += l * l;
        }
        let mean = sum / n as f64;
        let var = sum2 / n as f64 - mean * mean;
        let predicted = 4.0 * d * d * sigma_d * sigma_d;
        assert!(
            (var - predicted).abs() <= 0.05 * predicted,
            "empirical {var} vs predicted {predicted}"
        );
    }
}
