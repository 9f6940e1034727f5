//! Closed-form candidate extraction for the planar two-station problem.
//!
//! At a stationary point the two quadratics in `rho` produced by
//! [`crate::reduction`] share a root. For fixed `theta` that happens
//! exactly when their resultant vanishes:
//!
//! ```text
//! (A C' - A' C)^2 - (A B' - A' B)(B C' - B' C) = 0
//! ```
//!
//! All six coefficients are homogeneous forms in `(sin theta, cos theta)`
//! of degree one or two, so the resultant is an even homogeneous form of
//! degree six; dividing by `cos^6 theta` and substituting `xi = tan theta`
//! turns the compatibility condition into a polynomial of degree at most
//! six in `xi`. Its real roots give candidate directions; the shared
//! `rho` follows rationally from the quadratic pair, and each recovered
//! point is polished by Newton steps on the gradient before it is
//! classified.
//!
//! The solve runs in a working frame translated so candidates stay away
//! from `rho = 0` (the reduction divides by `rho`) and scaled by the
//! station distance to limit cancellation in the aggregate constants.
//! Two deterministic frames are used and their candidate sets merged:
//! a direction that is poorly conditioned in one frame (clustered
//! polynomial roots) is generically well separated in the other.

use crate::candidate::{dedup, normalize_order, CandidateSolution, Provenance};
use crate::model::{
    classify_stationary, objective, objective_gradient, objective_hessian, stationarity_residual,
    Mode, ProblemSpec, CLASSIFY_TOL,
};
use crate::poly::{quadratic_real_roots, Polynomial};
use crate::reduction::{
    aggregates, homogeneous_forms, planar_constants, polar_constants, rho_theta_coefficients,
    Aggregates, HomogeneousForms, PolarConstants, ReductionError, RhoThetaCoefficients,
};
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

/// Candidates with working-frame radius below `RHO_MIN_REL` (the frame is
/// scaled so the station distance is 1) are rejected: the reduction is
/// invalid at the origin.
pub const RHO_MIN_REL: f64 = 1e-6;

/// Accepted candidates must satisfy the stationarity residual bound
/// `norm <= SOUNDNESS_TOL * max(1, |L|)`.
pub const SOUNDNESS_TOL: f64 = 1e-7;

/// Candidates closer than `DEDUP_REL * D` are considered the same point.
pub const DEDUP_REL: f64 = 1e-6;

/// Both quadratics must vanish at an accepted candidate to this relative
/// tolerance (checked after polishing).
pub const QUADRATIC_CONSISTENCY_TOL: f64 = 1e-8;

/// Pre-polish acceptance for quadratic residuals at a recovered root.
/// Loose on purpose: clustered compatibility roots are ill-conditioned
/// and the Newton polish plus the final residual filter decide.
const RAW_QUADRATIC_TOL: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CubicError {
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error("compatibility polynomial is identically zero; configuration degenerate")]
    IdenticallySatisfied,
    #[error("no candidate direction produced a valid stationary point")]
    NoCandidates,
}

/// Coefficients of the compatibility polynomial in `xi = tan theta`,
/// ascending degree, plus the frame scale they were computed at.
#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilityPoly {
    pub poly: Polynomial,
}

impl CompatibilityPoly {
    pub fn coefficient_scale(&self) -> f64 {
        self.poly.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }

    /// Near-zero leading coefficient means vertical directions
    /// (`cos theta = 0`) may carry roots the `xi` parametrization cannot
    /// represent.
    pub fn leading_degenerate(&self) -> bool {
        let scale = self.coefficient_scale();
        scale == 0.0 || self.poly.coeffs[6].abs() <= 1e-12 * scale
    }
}

fn form_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ca) in a.iter().enumerate() {
        for (j, &cb) in b.iter().enumerate() {
            out[i + j] += ca * cb;
        }
    }
    out
}

fn form_sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Build the compatibility polynomial by exact convolution arithmetic on
/// the homogeneous coefficient forms.
pub fn build_compatibility(agg: &Aggregates) -> CompatibilityPoly {
    let HomogeneousForms { a, b, c, a_prime, b_prime, c_prime } = homogeneous_forms(agg);
    let ac = form_sub(&form_mul(&a, &c_prime), &form_mul(&a_prime, &c)); // degree 2
    let ab = form_sub(&form_mul(&a, &b_prime), &form_mul(&a_prime, &b)); // degree 3
    let bc = form_sub(&form_mul(&b, &c_prime), &form_mul(&b_prime, &c)); // degree 3
    // homogenize (A C' - A' C)^2 with sin^2 + cos^2 before subtracting
    let ac2 = form_mul(&form_mul(&ac, &ac), &[1.0, 0.0, 1.0]);
    let coeffs = form_sub(&ac2, &form_mul(&ab, &bc));
    CompatibilityPoly { poly: Polynomial::new(coeffs) }
}

/// The same polynomial recovered by sampling the resultant at seven
/// tangent values and solving the Vandermonde system. Independent of the
/// convolution route; the two must agree.
pub fn sample_compatibility(polar: &PolarConstants, agg: &Aggregates) -> CompatibilityPoly {
    let xis: [f64; 7] = [0.0, 0.5, -0.5, 1.0, -1.0, 2.0, 3.0];
    let mut vander = DMatrix::zeros(7, 7);
    let mut rhs = DVector::zeros(7);
    for (row, &xi) in xis.iter().enumerate() {
        let theta = xi.atan();
        let co = rho_theta_coefficients(polar, agg, theta);
        let cos6 = theta.cos().powi(6);
        rhs[row] = compatibility_at(&co) / cos6;
        let mut pow = 1.0;
        for col in 0..7 {
            vander[(row, col)] = pow;
            pow *= xi;
        }
    }
    let solved = vander.lu().solve(&rhs).expect("fixed sample points give a regular system");
    CompatibilityPoly { poly: Polynomial::new(solved.iter().copied().collect()) }
}

/// Resultant of the quadratic pair at one angle.
pub fn compatibility_at(co: &RhoThetaCoefficients) -> f64 {
    let ac = co.a * co.c_prime - co.a_prime * co.c;
    let ab = co.a * co.b_prime - co.a_prime * co.b;
    let bc = co.b * co.c_prime - co.b_prime * co.c;
    ac * ac - ab * bc
}

/// Translation and scaling between the user frame and a working frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkingFrame {
    pub offset_x: f64,
    pub offset_y: f64,
    /// Working units per meter (1 / station distance).
    pub scale: f64,
}

impl WorkingFrame {
    /// Frame placing the station centroid at `centroid_target` (in units
    /// of the station distance) and rescaling lengths by the station
    /// distance.
    pub fn for_spec(spec: &ProblemSpec, centroid_target: (f64, f64)) -> Self {
        let d = spec.station_scale();
        let n = spec.stations.len() as f64;
        let cx = spec.stations.iter().map(|s| s.u).sum::<f64>() / n;
        let cy = spec.stations.iter().map(|s| s.v).sum::<f64>() / n;
        WorkingFrame {
            offset_x: cx - centroid_target.0 * d,
            offset_y: cy - centroid_target.1 * d,
            scale: 1.0 / d,
        }
    }

    /// Identity frame (used by tests that pin untranslated values).
    pub fn identity() -> Self {
        WorkingFrame { offset_x: 0.0, offset_y: 0.0, scale: 1.0 }
    }

    /// The problem re-expressed in this frame.
    pub fn apply(&self, spec: &ProblemSpec) -> ProblemSpec {
        let mut out = spec.clone();
        for st in &mut out.stations {
            st.u = (st.u - self.offset_x) * self.scale;
            st.v = (st.v - self.offset_y) * self.scale;
            st.w *= self.scale;
        }
        out.z0 = out.z0.map(|z| z * self.scale);
        let s2 = self.scale * self.scale;
        for l in &mut out.observations.values {
            *l *= s2;
        }
        out
    }

    pub fn to_user(&self, xw: f64, yw: f64) -> (f64, f64) {
        (xw / self.scale + self.offset_x, yw / self.scale + self.offset_y)
    }

    pub fn to_working(&self, x: f64, y: f64) -> (f64, f64) {
        ((x - self.offset_x) * self.scale, (y - self.offset_y) * self.scale)
    }
}

/// Default pair of working frames; candidates from both are merged.
pub const FRAME_TARGETS: [(f64, f64); 2] = [(1.5, 0.7), (-0.9, 1.8)];

/// A direction or root rejected during candidate recovery.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcludedRoot {
    pub xi: f64,
    pub theta: f64,
    pub rho: Option<f64>,
    pub reason: String,
}

/// Outcome of the algebraic planar2 solve.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraicSolve {
    pub candidates: Vec<CandidateSolution>,
    pub excluded: Vec<ExcludedRoot>,
}

/// Candidate radii for one direction: the rational shared root when the
/// pair is independent, otherwise the positive roots of whichever
/// quadratic is nondegenerate.
fn rho_candidates(co: &RhoThetaCoefficients) -> Vec<f64> {
    let den = co.a * co.b_prime - co.a_prime * co.b;
    let den_scale = (co.a * co.b_prime).abs().max((co.a_prime * co.b).abs()).max(1e-300);
    if den.abs() > 1e-10 * den_scale {
        return vec![(co.c * co.a_prime - co.c_prime * co.a) / den];
    }
    // proportional (or doubly degenerate) pair: fall back to solving one
    // quadratic outright
    let roots = if co.a_prime.abs().max(co.b_prime.abs()).max(co.c_prime.abs())
        >= co.a.abs().max(co.b.abs()).max(co.c.abs())
    {
        quadratic_real_roots(co.a_prime, co.b_prime, co.c_prime)
    } else {
        quadratic_real_roots(co.a, co.b, co.c)
    };
    roots.into_iter().filter(|r| *r > 0.0).collect()
}

/// Newton iteration on the gradient in the user frame. Returns the
/// refined planar position.
fn polish_planar(spec: &ProblemSpec, x0: f64, y0: f64) -> (f64, f64) {
    let z0 = spec.z0.unwrap_or(0.0);
    let (mut x, mut y) = (x0, y0);
    for _ in 0..6 {
        let pt = spec.point(x, y, z0);
        let (Ok(g), Ok(h)) = (objective_gradient(spec, &pt), objective_hessian(spec, &pt)) else {
            break;
        };
        let hm = Matrix2::new(h[(0, 0)], h[(0, 1)], h[(1, 0)], h[(1, 1)]);
        let Some(inv) = hm.try_inverse() else { break };
        let step = inv * Vector2::new(g[0], g[1]);
        if !step.x.is_finite() || !step.y.is_finite() {
            break;
        }
        x -= step.x;
        y -= step.y;
        if step.norm() <= 1e-15 * (1.0 + x.hypot(y)) {
            break;
        }
    }
    // keep the polish only if it did not make things worse
    let before = stationarity_residual(spec, &spec.point(x0, y0, z0)).map(|r| r.norm());
    let after = stationarity_residual(spec, &spec.point(x, y, z0)).map(|r| r.norm());
    match (before, after) {
        (Ok(b), Ok(a)) if a <= b => (x, y),
        _ => (x0, y0),
    }
}

fn classify_candidate(
    spec: &ProblemSpec,
    x: f64,
    y: f64,
    rho: f64,
    theta: f64,
) -> Option<CandidateSolution> {
    let z0 = spec.z0.unwrap_or(0.0);
    let pt = spec.point(x, y, z0);
    let resid = stationarity_residual(spec, &pt).ok()?;
    let obs_norm = spec.observations.norm();
    if resid.norm() > SOUNDNESS_TOL * obs_norm.max(1.0) {
        return None;
    }
    let hess = objective_hessian(spec, &pt).ok()?;
    Some(CandidateSolution {
        x,
        y,
        z: z0,
        rho: Some(rho),
        theta: Some(theta),
        residual_norm: resid.norm(),
        classification: classify_stationary(&hess, CLASSIFY_TOL),
        objective: objective(spec, &pt).ok()?,
        provenance: Provenance::Algebraic,
        on_search_boundary: false,
    })
}

/// Recover candidates from compatibility roots in one working frame.
pub fn recover_candidates(
    roots: &[f64],
    polar: &PolarConstants,
    agg: &Aggregates,
    frame: &WorkingFrame,
    spec: &ProblemSpec,
    include_vertical: bool,
    excluded: &mut Vec<ExcludedRoot>,
) -> Vec<CandidateSolution> {
    let mut directions: Vec<(f64, f64)> = Vec::new(); // (xi, theta)
    for &xi in roots {
        let theta = xi.atan();
        directions.push((xi, theta));
        directions.push((xi, theta + PI));
    }
    if include_vertical {
        directions.push((f64::INFINITY, FRAC_PI_2));
        directions.push((f64::INFINITY, -FRAC_PI_2));
    }

    let mut found = Vec::new();
    for (xi, theta) in directions {
        let co = rho_theta_coefficients(polar, agg, theta);
        for rho in rho_candidates(&co) {
            if rho <= RHO_MIN_REL {
                excluded.push(ExcludedRoot {
                    xi,
                    theta,
                    rho: Some(rho),
                    reason: "radius at or below the working-frame origin".into(),
                });
                continue;
            }
            let [q1, q2] = co.evaluate(rho);
            let [s1, s2] = co.scales(rho);
            if q1.abs() > RAW_QUADRATIC_TOL * s1.max(1e-300)
                || q2.abs() > RAW_QUADRATIC_TOL * s2.max(1e-300)
            {
                excluded.push(ExcludedRoot {
                    xi,
                    theta,
                    rho: Some(rho),
                    reason: format!(
                        "quadratic pair inconsistent (relative residuals {:.2e}, {:.2e})",
                        q1.abs() / s1.max(1e-300),
                        q2.abs() / s2.max(1e-300)
                    ),
                });
                continue;
            }
            let (x0, y0) = frame.to_user(rho * theta.cos(), rho * theta.sin());
            let (x, y) = polish_planar(spec, x0, y0);
            match classify_candidate(spec, x, y, rho, theta) {
                Some(cand) => found.push(cand),
                None => excluded.push(ExcludedRoot {
                    xi,
                    theta,
                    rho: Some(rho),
                    reason: "stationarity residual above tolerance after polish".into(),
                }),
            }
        }
    }
    found
}

/// Algebraic solve of a planar2 problem in one frame.
fn solve_in_frame(
    spec: &ProblemSpec,
    frame: &WorkingFrame,
    excluded: &mut Vec<ExcludedRoot>,
) -> Result<Vec<CandidateSolution>, CubicError> {
    let working = frame.apply(spec);
    let constants = planar_constants(&working)?;
    let agg = aggregates(&working, &constants)?;
    let polar = polar_constants(&agg);
    let compat = build_compatibility(&agg);
    let roots = match compat.poly.real_roots() {
        Ok(roots) => roots,
        Err(_) => return Err(CubicError::IdenticallySatisfied),
    };
    Ok(recover_candidates(
        &roots,
        &polar,
        &agg,
        frame,
        spec,
        compat.leading_degenerate(),
        excluded,
    ))
}

/// Full algebraic pipeline: reject degenerate configurations, solve in
/// both working frames, merge, dedupe, order.
pub fn solve_planar2(spec: &ProblemSpec) -> Result<AlgebraicSolve, CubicError> {
    if spec.mode != Mode::Planar2 {
        return Err(CubicError::Reduction(ReductionError::WrongMode(spec.mode)));
    }
    let d = spec.station_scale();
    // degeneracy is judged in the scaled user frame, before any shift
    let unshifted = WorkingFrame { offset_x: 0.0, offset_y: 0.0, scale: 1.0 / d }.apply(spec);
    let constants = planar_constants(&unshifted)?;
    let agg = aggregates(&unshifted, &constants)?;
    if agg.elimination_degenerate(constants.a1, 1.0) {
        return Err(CubicError::Reduction(ReductionError::DegenerateElimination {
            sum: agg.d.abs() + agg.f.abs(),
            threshold: 1e-12 * (constants.a1.abs()).max(1.0),
        }));
    }

    let mut excluded = Vec::new();
    let mut merged = Vec::new();
    let mut last_err = None;
    for target in FRAME_TARGETS {
        let frame = WorkingFrame::for_spec(spec, target);
        match solve_in_frame(spec, &frame, &mut excluded) {
            Ok(cands) => merged.extend(cands),
            Err(e) => last_err = Some(e),
        }
    }
    if merged.is_empty() {
        return Err(last_err.unwrap_or(CubicError::NoCandidates));
    }
    normalize_order(&mut merged);
    let candidates = dedup(merged, DEDUP_REL * d);
    Ok(AlgebraicSolve { candidates, excluded })
}
