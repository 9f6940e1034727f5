//! Algebraic reduction of the planar two-station stationarity system.
//!
//! With the height fixed, the two stationarity equations are a pair of
//! cubic curves in (x, y). Collecting station-dependent constants, then
//! passing to the complex variable `z = x + i y` and its polar form
//! `rho e^{i theta}`, turns the pair into two equations that are cubic in
//! `rho` with trigonometric coefficients in `theta`. Eliminating first the
//! constant terms and then the `rho^3` terms yields two quadratics in
//! `rho` whose coefficients this module computes, in both a phase-based
//! and a homogeneous `(sin, cos)` representation. The two representations
//! are derived independently and cross-checked in the tests; downstream
//! root finding lives in [`crate::cubic`].
//!
//! Diagonal observation weights are folded into the station sums after
//! normalizing their mean to one, which leaves every identity below
//! unchanged and reduces to the plain sums for unit weights.

use num_complex::Complex64;
use thiserror::Error;

use crate::model::{Mode, ProblemSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReductionError {
    #[error("reduction requires planar2 mode, got {0}")]
    WrongMode(Mode),
    #[error("elimination constants vanish (|d| + |f| = {sum:.3e} <= {threshold:.3e}); \
             the configuration is too symmetric for the algebraic path")]
    DegenerateElimination { sum: f64, threshold: f64 },
}

/// Per-station constants `a_i = u_i^2 + v_i^2 + (z0 - w_i)^2 - L_i`.
///
/// They express each misfit as the fixed quadratic
/// `model_i - L_i = x^2 + y^2 - 2 x u_i - 2 y v_i + a_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarConstants {
    pub a1: f64,
    pub a2: f64,
}

/// Station sums entering the reduced equations. With normalized weights
/// `pi_i` (mean one):
///
/// ```text
/// s = pi_1 u_1 + pi_2 u_2        t = pi_1 v_1 + pi_2 v_2
/// p = pi_1 u_1^2 + pi_2 u_2^2    q = pi_1 v_1^2 + pi_2 v_2^2
/// a = pi_1 a_1 + pi_2 a_2        r = pi_1 u_1 v_1 + pi_2 u_2 v_2
/// d = pi_1 a_1 u_1 + pi_2 a_2 u_2
/// f = pi_1 a_1 v_1 + pi_2 a_2 v_2
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregates {
    pub s: f64,
    pub t: f64,
    pub p: f64,
    pub q: f64,
    pub a: f64,
    pub r: f64,
    pub d: f64,
    pub f: f64,
}

/// Magnitude/phase pairs of the complex constants of the polar equations:
/// `l e^{i omega} = s + i t`, `m e^{i alpha} = a + 2p + 2ir`,
/// `k e^{i mu} = a + 2q + 2ir`. Magnitudes are nonnegative and phases lie
/// in (-pi, pi]; the zero complex number gets phase 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarConstants {
    pub l: f64,
    pub omega: f64,
    pub m: f64,
    pub alpha: f64,
    pub k: f64,
    pub mu: f64,
}

/// Coefficients of the two quadratics in `rho` at a fixed `theta`:
/// `A rho^2 + B rho + C = 0` (constant terms eliminated) and
/// `A' rho^2 + B' rho + C' = 0` (`rho^3` terms eliminated).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoThetaCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub a_prime: f64,
    pub b_prime: f64,
    pub c_prime: f64,
}

fn require_planar2(spec: &ProblemSpec) -> Result<(), ReductionError> {
    if spec.mode != Mode::Planar2 {
        return Err(ReductionError::WrongMode(spec.mode));
    }
    Ok(())
}

pub fn planar_constants(spec: &ProblemSpec) -> Result<PlanarConstants, ReductionError> {
    require_planar2(spec)?;
    let z0 = spec.z0.expect("planar2 spec carries z0");
    let a = |i: usize| {
        let st = &spec.stations[i];
        st.u * st.u + st.v * st.v + (z0 - st.w) * (z0 - st.w) - spec.observations.values[i]
    };
    Ok(PlanarConstants { a1: a(0), a2: a(1) })
}

/// The fixed quadratic form of a misfit, `x^2 + y^2 - 2xu - 2yv + a`.
pub fn quadratic_misfit(a: f64, u: f64, v: f64, x: f64, y: f64) -> f64 {
    x * x + y * y - 2.0 * x * u - 2.0 * y * v + a
}

pub fn aggregates(spec: &ProblemSpec, constants: &PlanarConstants) -> Result<Aggregates, ReductionError> {
    require_planar2(spec)?;
    let (u1, v1) = (spec.stations[0].u, spec.stations[0].v);
    let (u2, v2) = (spec.stations[1].u, spec.stations[1].v);
    let (a1, a2) = (constants.a1, constants.a2);
    // normalize the two weights to mean one so the leading cubic terms
    // keep coefficient 2
    let (w1, w2) = (spec.observations.weights[0], spec.observations.weights[1]);
    let pi1 = 2.0 * w1 / (w1 + w2);
    let pi2 = 2.0 * w2 / (w1 + w2);
    Ok(Aggregates {
        s: pi1 * u1 + pi2 * u2,
        t: pi1 * v1 + pi2 * v2,
        p: pi1 * u1 * u1 + pi2 * u2 * u2,
        q: pi1 * v1 * v1 + pi2 * v2 * v2,
        a: pi1 * a1 + pi2 * a2,
        r: pi1 * u1 * v1 + pi2 * u2 * v2,
        d: pi1 * a1 * u1 + pi2 * a2 * u2,
        f: pi1 * a1 * v1 + pi2 * a2 * v2,
    })
}

impl Aggregates {
    /// The elimination below divides by combinations of `d` and `f`;
    /// when both vanish the quadratic pair loses rank and the solver must
    /// fall back to the numeric path.
    pub fn elimination_degenerate(&self, a1: f64, station_scale: f64) -> bool {
        self.d.abs() + self.f.abs() <= 1e-12 * (a1.abs() * station_scale).max(1.0)
    }
}

pub fn polar_constants(agg: &Aggregates) -> PolarConstants {
    let polar = |re: f64, im: f64| {
        let mag = re.hypot(im);
        let phase = if mag == 0.0 { 0.0 } else { im.atan2(re) };
        (mag, phase)
    };
    let (l, omega) = polar(agg.s, agg.t);
    let (m, alpha) = polar(agg.a + 2.0 * agg.p, 2.0 * agg.r);
    let (k, mu) = polar(agg.a + 2.0 * agg.q, 2.0 * agg.r);
    PolarConstants { l, omega, m, alpha, k, mu }
}

impl PolarConstants {
    /// Rebuild the defining complex numbers from magnitude and phase.
    pub fn reconstruct(&self) -> [Complex64; 3] {
        [
            Complex64::from_polar(self.l, self.omega),
            Complex64::from_polar(self.m, self.alpha),
            Complex64::from_polar(self.k, self.mu),
        ]
    }
}

/// The expanded stationarity polynomials at (x, y). With normalized
/// weights these equal `sum_i pi_i (x - u_i)(model_i - L_i)` and the
/// analogue in y, i.e. minus the (normalized) stationarity residual.
pub fn expanded_residuals(agg: &Aggregates, x: f64, y: f64) -> [f64; 2] {
    let Aggregates { s, t, p, q, a, r, d, f } = *agg;
    let e1 = 2.0 * x * x * x + 2.0 * x * y * y - 3.0 * s * x * x - s * y * y - 2.0 * t * x * y
        + (a + 2.0 * p) * x
        + 2.0 * r * y
        - d;
    let e2 = 2.0 * y * y * y + 2.0 * x * x * y - 3.0 * t * y * y - t * x * x - 2.0 * s * x * y
        + (a + 2.0 * q) * y
        + 2.0 * r * x
        - f;
    [e1, e2]
}

/// The same pair in the complex variable `z = x + i y`. The first value
/// is real and equals 4 times the first expanded polynomial; the second
/// is purely imaginary and equals 4i times the second. Used only to
/// cross-validate the reduction algebra.
pub fn complex_form_residuals(agg: &Aggregates, x: f64, y: f64) -> [Complex64; 2] {
    let Aggregates { s, t, p, q, a, r, d, f } = *agg;
    let i = Complex64::i();
    let z = Complex64::new(x, y);
    let zb = z.conj();
    let z2 = z * z;
    let zb2 = zb * zb;
    let zzb = z * zb;
    let first = 4.0 * z2 * zb + 4.0 * z * zb2 + 2.0 * (i * t - s) * z2 - 8.0 * s * zzb
        - 2.0 * (s + i * t) * zb2
        + 2.0 * z * Complex64::new(a + 2.0 * p, -2.0 * r)
        + 2.0 * zb * Complex64::new(a + 2.0 * p, 2.0 * r)
        - Complex64::new(4.0 * d, 0.0);
    let second = 4.0 * z2 * zb - 4.0 * z * zb2 + 2.0 * (i * t - s) * z2 - 8.0 * i * t * zzb
        + 2.0 * (s + i * t) * zb2
        + 2.0 * z * Complex64::new(a + 2.0 * q, 2.0 * r)
        - 2.0 * zb * Complex64::new(a + 2.0 * q, -2.0 * r)
        - 4.0 * i * f;
    [first, second]
}

/// The polar-form equations at (rho, theta); each equals 2 times the
/// corresponding expanded polynomial at `(rho cos theta, rho sin theta)`:
///
/// ```text
/// 4 rho^3 cos(th) - [4s + 2l cos(2th - omega)] rho^2 + 2 m rho cos(th - alpha) - 2d
/// 4 rho^3 sin(th) - [4t + 2l sin(2th - omega)] rho^2 + 2 k rho sin(th + mu)    - 2f
/// ```
pub fn polar_form_residuals(
    agg: &Aggregates,
    polar: &PolarConstants,
    rho: f64,
    theta: f64,
) -> [f64; 2] {
    let (s, t, d, f) = (agg.s, agg.t, agg.d, agg.f);
    let PolarConstants { l, omega, m, alpha, k, mu } = *polar;
    let rho2 = rho * rho;
    let rho3 = rho2 * rho;
    let first = 4.0 * rho3 * theta.cos() - (4.0 * s + 2.0 * l * (2.0 * theta - omega).cos()) * rho2
        + 2.0 * m * rho * (theta - alpha).cos()
        - 2.0 * d;
    let second = 4.0 * rho3 * theta.sin()
        - (4.0 * t + 2.0 * l * (2.0 * theta - omega).sin()) * rho2
        + 2.0 * k * rho * (theta + mu).sin()
        - 2.0 * f;
    [first, second]
}

/// Quadratic-pair coefficients at `theta`, built from the polar constants.
///
/// The first quadratic is `(d * second - f * first) / rho` of the polar
/// pair; the second is `cos(th) * second - sin(th) * first`.
pub fn rho_theta_coefficients(
    polar: &PolarConstants,
    agg: &Aggregates,
    theta: f64,
) -> RhoThetaCoefficients {
    let (s, t, d, f) = (agg.s, agg.t, agg.d, agg.f);
    let PolarConstants { l, omega, m, alpha, k, mu } = *polar;
    let (sin, cos) = theta.sin_cos();
    let a = 4.0 * (d * sin - f * cos);
    let b = 4.0 * (s * f - t * d) + 2.0 * l * f * (2.0 * theta - omega).cos()
        - 2.0 * l * d * (2.0 * theta - omega).sin();
    let c = 2.0 * k * d * (theta + mu).sin() - 2.0 * m * f * (theta - alpha).cos();
    let a_prime = 4.0 * s * sin - 4.0 * t * cos + 2.0 * l * (omega - theta).sin();
    let b_prime = 2.0 * (k * cos * (theta + mu).sin() - m * sin * (theta - alpha).cos());
    let c_prime = 2.0 * d * sin - 2.0 * f * cos;
    RhoThetaCoefficients { a, b, c, a_prime, b_prime, c_prime }
}

impl RhoThetaCoefficients {
    /// Residuals of the two quadratics at `rho`.
    pub fn evaluate(&self, rho: f64) -> [f64; 2] {
        [
            self.a * rho * rho + self.b * rho + self.c,
            self.a_prime * rho * rho + self.b_prime * rho + self.c_prime,
        ]
    }

    /// Magnitude scales of the two quadratics at `rho`, for relative
    /// residual checks.
    pub fn scales(&self, rho: f64) -> [f64; 2] {
        let rho2 = rho * rho;
        [
            (self.a * rho2).abs().max((self.b * rho).abs()).max(self.c.abs()),
            (self.a_prime * rho2)
                .abs()
                .max((self.b_prime * rho).abs())
                .max(self.c_prime.abs()),
        ]
    }
}

/// The same six coefficients as homogeneous binary forms in
/// `(S, K) = (sin theta, cos theta)`, ascending in `S`:
/// `coeffs[j]` multiplies `S^j K^(deg - j)`.
///
/// Derived independently of [`rho_theta_coefficients`] by expanding the
/// double-angle terms, so agreement of the two routes checks the algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousForms {
    pub a: [f64; 2],
    pub b: [f64; 3],
    pub c: [f64; 2],
    pub a_prime: [f64; 2],
    pub b_prime: [f64; 3],
    pub c_prime: [f64; 2],
}

pub fn homogeneous_forms(agg: &Aggregates) -> HomogeneousForms {
    let Aggregates { s, t, p, q, a, r, d, f } = *agg;
    HomogeneousForms {
        a: [-4.0 * f, 4.0 * d],
        b: [
            6.0 * s * f - 2.0 * t * d,
            4.0 * (t * f - s * d),
            2.0 * s * f - 6.0 * t * d,
        ],
        c: [
            4.0 * r * d - 2.0 * f * (a + 2.0 * p),
            2.0 * d * (a + 2.0 * q) - 4.0 * r * f,
        ],
        a_prime: [-2.0 * t, 2.0 * s],
        b_prime: [4.0 * r, 4.0 * (q - p), -4.0 * r],
        c_prime: [-2.0 * f, 2.0 * d],
    }
}

/// Evaluate a homogeneous binary form at `(sin theta, cos theta)`.
pub fn eval_form(coeffs: &[f64], theta: f64) -> f64 {
    let (sin, cos) = theta.sin_cos();
    let deg = coeffs.len() - 1;
    coeffs
        .iter()
        .enumerate()
        .map(|(j, &c)| c * sin.powi(j as i32) * cos.powi((deg - j) as i32))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{predicted_squares, stationarity_residual, ObservationSet, Station};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn reference() -> ProblemSpec {
        ProblemSpec::new(
            vec![Station::new("A", 0.0, 0.0, 0.0), Station::new("B", 4.0, 0.0, 0.0)],
            ObservationSet::from_squares(vec![5.0, 13.0]),
            Mode::Planar2,
            Some(0.0),
        )
        .unwrap()
    }

    fn random_spec(rng: &mut ChaCha8Rng, unit_weights: bool) -> ProblemSpec {
        loop {
            let st = vec![
                Station::new("A", rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), rng.gen_range(-2.0..2.0)),
                Station::new("B", rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), rng.gen_range(-2.0..2.0)),
            ];
            let mut obs = ObservationSet::from_squares(vec![
                rng.gen_range(1.0..50.0),
                rng.gen_range(1.0..50.0),
            ]);
            if !unit_weights {
                obs.weights = vec![rng.gen_range(0.2..3.0), rng.gen_range(0.2..3.0)];
            }
            if let Ok(spec) = ProblemSpec::new(st, obs, Mode::Planar2, Some(rng.gen_range(-2.0..2.0))) {
                return spec;
            }
        }
    }

    #[test]
    fn constants_reference_values() {
        let c = planar_constants(&reference()).unwrap();
        assert_eq!(c.a1, -5.0);
        assert_eq!(c.a2, 3.0);
    }

    #[test]
    fn constants_symmetric_instance() {
        let spec = ProblemSpec::new(
            vec![Station::new("A", -1.0, 0.0, 0.0), Station::new("B", 1.0, 0.0, 0.0)],
            ObservationSet::from_squares(vec![2.0, 2.0]),
            Mode::Planar2,
            Some(0.0),
        )
        .unwrap();
        let c = planar_constants(&spec).unwrap();
        assert_eq!(c.a1, -1.0);
        assert_eq!(c.a2, -1.0);
    }

    #[test]
    fn constants_wrong_mode_rejected() {
        let spec = ProblemSpec::new(
            vec![
                Station::new("A", 0.0, 0.0, 0.0),
                Station::new("B", 4.0, 0.0, 0.0),
                Station::new("C", 0.0, 4.0, 0.0),
            ],
            ObservationSet::from_squares(vec![5.0, 13.0, 13.0]),
            Mode::Planar3,
            Some(0.0),
        )
        .unwrap();
        assert!(matches!(planar_constants(&spec), Err(ReductionError::WrongMode(Mode::Planar3))));
    }

    #[test]
    fn quadratic_misfit_matches_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let spec = random_spec(&mut rng, true);
            let c = planar_constants(&spec).unwrap();
            let consts = [c.a1, c.a2];
            let (x, y) = (rng.gen_range(-15.0..15.0), rng.gen_range(-15.0..15.0));
            let zeta = predicted_squares(&spec, &spec.point(x, y, 0.0)).unwrap();
            for i in 0..2 {
                let direct = zeta[i] - spec.observations.values[i];
                let via = quadratic_misfit(consts[i], spec.stations[i].u, spec.stations[i].v, x, y);
                assert!((direct - via).abs() <= 1e-10 * direct.abs().max(1.0));
            }
        }
    }

    #[test]
    fn aggregates_reference_values() {
        let spec = reference();
        let agg = aggregates(&spec, &planar_constants(&spec).unwrap()).unwrap();
        assert_eq!(
            (agg.s, agg.t, agg.p, agg.q, agg.a, agg.r, agg.d, agg.f),
            (4.0, 0.0, 16.0, 0.0, -2.0, 0.0, 12.0, 0.0)
        );
    }

    #[test]
    fn aggregates_symmetric_values() {
        let spec = ProblemSpec::new(
            vec![Station::new("A", -1.0, 0.0, 0.0), Station::new("B", 1.0, 0.0, 0.0)],
            ObservationSet::from_squares(vec![2.0, 2.0]),
            Mode::Planar2,
            Some(0.0),
        )
        .unwrap();
        let agg = aggregates(&spec, &planar_constants(&spec).unwrap()).unwrap();
        assert_eq!(
            (agg.s, agg.t, agg.p, agg.q, agg.a, agg.r, agg.d, agg.f),
            (0.0, 0.0, 2.0, 0.0, -2.0, 0.0, 0.0, 0.0)
        );
        // fully symmetric: the elimination path is unavailable
        assert!(agg.elimination_degenerate(-1.0, 2.0));
    }

    #[test]
    fn aggregates_match_independent_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let spec = random_spec(&mut rng, true);
            let c = planar_constants(&spec).unwrap();
            let agg = aggregates(&spec, &c).unwrap();
            let (u1, v1) = (spec.stations[0].u, spec.stations[0].v);
            let (u2, v2) = (spec.stations[1].u, spec.stations[1].v);
            assert_eq!(agg.s, u1 + u2);
            assert_eq!(agg.t, v1 + v2);
            assert_eq!(agg.p, u1 * u1 + u2 * u2);
            assert_eq!(agg.q, v1 * v1 + v2 * v2);
            assert_eq!(agg.a, c.a1 + c.a2);
            assert_eq!(agg.r, u1 * v1 + u2 * v2);
            assert_eq!(agg.d, c.a1 * u1 + c.a2 * u2);
            assert_eq!(agg.f, c.a1 * v1 + c.a2 * v2);
        }
    }

    #[test]
    fn polar_constants_reference_values() {
        let spec = reference();
        let agg = aggregates(&spec, &planar_constants(&spec).unwrap()).unwrap();
        let pc = polar_constants(&agg);
        assert_eq!((pc.l, pc.omega), (4.0, 0.0));
        assert_eq!((pc.m, pc.alpha), (30.0, 0.0));
        assert_eq!(pc.k, 2.0);
        assert_eq!(pc.mu, std::f64::consts::PI);
    }

    #[test]
    fn polar_constants_pure_imaginary() {
        let agg = Aggregates { s: 0.0, t: 1.0, p: 0.0, q: 0.0, a: 0.0, r: 0.0, d: 0.0, f: 0.0 };
        let pc = polar_constants(&agg);
        assert_eq!(pc.l, 1.0);
        assert!((pc.omega - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn polar_constants_reconstruct() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let spec = random_spec(&mut rng, true);
            let agg = aggregates(&spec, &planar_constants(&spec).unwrap()).unwrap();
            let pc = polar_constants(&agg);
            let [zl, zm, zk] = pc.reconstruct();
            let targets = [
                Complex64::new(agg.s, agg.t),
                Complex64::new(agg.a + 2.0 * agg.p, 2.0 * agg.r),
                Complex64::new(agg.a + 2.0 * agg.q, 2.0 * agg.r),
            ];
            for (z, t) in [zl, zm, zk].iter().zip(&targets) {
                assert!((z - t).norm() <= 1e-12 * t.norm().max(1.0));
            }
        }
    }

    #[test]
    fn complex_form_zero_at_exact_solution() {
        let spec = reference();
        let agg = aggregates(&spec, &planar_constants(&spec).unwrap()).unwrap();
        for (x, y) in [(1.0, 2.0), (1.0, -2.0)] {
            let [z1, z2] = complex_form_residuals(&agg, x, y);
            assert!(z1.norm() < 1e-10);
            assert!(z2.norm() < 1e-10);
        }
    }

    #[test]
    fn chain_proportionality_constants() {
        // complex = 4 * expanded (first), 4i * expanded (second);
        // polar = 2 * expanded; stationarity = -(mean weight) * expanded.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..300 {
            let spec = random_spec(&mut rng, false);
            let agg = aggregates(&spec, &planar_constants(&spec).unwrap()).unwrap();
            let pc = polar_constants(&agg);
            let (x, y) = (rng.gen_range(-15.0..15.0), rng.gen_range(-15.0..15.0));
            let e = expanded_residuals(&agg, x, y);
            let scale = e[0].abs().max(e[1].abs()).max(1.0);

            let [z1, z2] = complex_form_residuals(&agg, x, y);
            assert!((z1 - Complex64::new(4.0 * e[0], 0.0)).norm() <= 1e-10 * scale);
            assert!((z2 - Complex64::new(0.0, 4.0 * e[1])).norm() <= 1e-10 * scale);

            let (rho, theta) = (x.hypot(y), y.atan2(x));
            let pf = polar_form_residuals(&agg, &pc, rho, theta);
            assert!((pf[0] - 2.0 * e[0]).abs() <= 1e-9 * scale);
            assert!((pf[1] - 2.0 * e[1]).abs() <= 1e-9 * scale);

            let st = stationarity_residual(&spec, &spec.point(x, y, 0.0)).unwrap();
            let half_sum = 0.5 * (spec.observations.weights[0] + spec.observations.weights[1]);
            assert!((st.components[0] + half_sum * e[0]).abs() <= 1e-10 * scale * half_sum.max(1.0));
            assert!((st.components[1] + half_sum * e[1]).abs() <= 1e-10 * scale * half_sum.max(1.0));
        }
    }

    #[test]
    fn coefficients_symmetric_instance_vanish() {
        // d = f = 0 makes A and C' identically zero
        let agg = Aggregates { s: 0.0, t: 0.0, p: 2.0, q: 0.0, a: -2.0, r: 0.0, d: 0.0, f: 0.0 };
        let pc = polar_constants(&agg);
        for theta in [-2.5, -0.3, 0.0, 0.7, 1.9] {
            let co = rho_theta_coefficients(&pc, &agg, theta);
            assert_eq!(co.a, 0.0);
            assert_eq!(co.c_prime, 0.0);
        }
    }

    #[test]
    fn reference_solution_is_common_root() {
        let spec = reference();
        let agg = aggregates(&spec, &planar_constants(&spec).unwrap()).unwrap();
        let pc = polar_constants(&agg);
        // exact intersections (1, 2) and (1, -2): rho = sqrt(5)
        for (x, y) in [(1.0f64, 2.0f64), (1.0, -2.0)] {
            let (rho, theta) = (x.hypot(y), y.atan2(x));
            let co = rho_theta_coefficients(&pc, &agg, theta);
            let [q1, q2] = co.evaluate(rho);
            let [s1, s2] = co.scales(rho);
            assert!(q1.abs() <= 1e-12 * s1, "q1 = {q1}");
            assert!(q2.abs() <= 1e-12 * s2, "q2 = {q2}");
        }
    }

    #[test]
    fn elimination_identities_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let spec = random_spec(&mut rng, true);
            let agg = aggregates(&spec, &planar_constants(&spec).unwrap()).unwrap();
            let pc = polar_constants(&agg);
            let theta = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            let co = rho_theta_coefficients(&pc, &agg, theta);
            for _ in 0..5 {
                let rho = rng.gen_range(0.1..20.0);
                let [p1, p2] = polar_form_residuals(&agg, &pc, rho, theta);
                let [q1, q2] = co.evaluate(rho);
                // f * first - d * second == -rho * (A rho^2 + B rho + C)
                let lhs = agg.f * p1 - agg.d * p2;
                let rhs = -rho * q1;
                let scale = lhs.abs().max(rhs.abs()).max(1.0);
                assert!((lhs - rhs).abs() <= 1e-9 * scale);
                // cos * second - sin * first == A' rho^2 + B' rho + C'
                let lhs2 = theta.cos() * p2 - theta.sin() * p1;
                let scale2 = lhs2.abs().max(q2.abs()).max(1.0);
                assert!((lhs2 - q2).abs() <= 1e-9 * scale2);
            }
        }
    }

    #[test]
    fn homogeneous_forms_match_phase_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let spec = random_spec(&mut rng, true);
            let agg = aggregates(&spec, &planar_constants(&spec).unwrap()).unwrap();
            let pc = polar_constants(&agg);
            let forms = homogeneous_forms(&agg);
            let theta = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            let co = rho_theta_coefficients(&pc, &agg, theta);
            let pairs = [
                (co.a, eval_form(&forms.a, theta)),
                (co.b, eval_form(&forms.b, theta)),
                (co.c, eval_form(&forms.c, theta)),
                (co.a_prime, eval_form(&forms.a_prime, theta)),
                (co.b_prime, eval_form(&forms.b_prime, theta)),
                (co.c_prime, eval_form(&forms.c_prime, theta)),
            ];
            for (phase, homog) in pairs {
                assert!(
                    (phase - homog).abs() <= 1e-9 * phase.abs().max(1.0),
                    "{phase} vs {homog}"
                );
            }
        }
    }
}
