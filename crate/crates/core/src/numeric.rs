//! Iterative reference solvers: damped Gauss-Newton with deterministic
//! multistart, and a grid-search-then-polish brute-force path used as the
//! test oracle and as the fallback when the algebraic reduction is
//! unavailable.

use crate::candidate::{dedup, normalize_order, CandidateSolution, Provenance};
use crate::exec;
use crate::model::{
    classify_stationary, objective, objective_gradient, objective_hessian, stationarity_residual,
    PointEstimate, ProblemSpec, CLASSIFY_TOL,
};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Relative step-size stop: `|step| <= step_tolerance * (1 + |X|)`.
    pub step_tolerance: f64,
    /// Stationarity stop: residual norm `<= residual_tolerance * max(1, |L|)`.
    pub residual_tolerance: f64,
    pub damping_initial: f64,
    pub multistart_count: usize,
    pub grid_resolution: usize,
    /// Expansion factor of the search box over the station bounding box.
    pub search_box: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            step_tolerance: 1e-12,
            residual_tolerance: 1e-10,
            damping_initial: 1e-3,
            multistart_count: 16,
            grid_resolution: 201,
            search_box: 2.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), NumericError> {
        let positive = self.max_iterations > 0
            && self.step_tolerance > 0.0
            && self.residual_tolerance > 0.0
            && self.damping_initial > 0.0
            && self.multistart_count > 0
            && self.search_box > 0.0;
        if !positive || self.grid_resolution < 3 {
            return Err(NumericError::InvalidConfig);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericError {
    #[error("solver configuration values must be positive (grid resolution >= 3)")]
    InvalidConfig,
    #[error("station geometry is degenerate: {0}")]
    DegenerateGeometry(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    Converged,
    MaxIterations,
    SingularNormalMatrix,
}

impl TerminationReason {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminationReason::Converged => "converged",
            TerminationReason::MaxIterations => "max_iterations",
            TerminationReason::SingularNormalMatrix => "singular_normal_matrix",
        }
    }
}

/// One accepted iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub objective: f64,
    pub gradient_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace {
    pub iterates: Vec<TraceStep>,
    pub termination: TerminationReason,
}

/// Result of a single damped Gauss-Newton run. `candidate` is present
/// only when the run reached a stationary point within tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussNewtonOutcome {
    pub candidate: Option<CandidateSolution>,
    pub trace: SolveTrace,
}

fn trace_step(spec: &ProblemSpec, pt: &PointEstimate) -> TraceStep {
    TraceStep {
        x: pt.x,
        y: pt.y,
        z: pt.z,
        objective: objective(spec, pt).unwrap_or(f64::NAN),
        gradient_norm: objective_gradient(spec, pt).map(|g| g.norm()).unwrap_or(f64::NAN),
    }
}

fn to_candidate(spec: &ProblemSpec, pt: &PointEstimate, residual_norm: f64) -> Option<CandidateSolution> {
    let hess = objective_hessian(spec, pt).ok()?;
    Some(CandidateSolution {
        x: pt.x,
        y: pt.y,
        z: pt.z,
        rho: None,
        theta: None,
        residual_norm,
        classification: classify_stationary(&hess, CLASSIFY_TOL),
        objective: objective(spec, pt).ok()?,
        provenance: Provenance::Numeric,
        on_search_boundary: false,
    })
}

/// Damped Gauss-Newton on the squared-distance misfit. The normal matrix
/// gets a Levenberg-style additive regularization scaled by its trace;
/// steps are accepted only when the objective strictly decreases, with
/// the damping raised by 10 on rejection and lowered by 0.1 on success.
pub fn gauss_newton(spec: &ProblemSpec, start: &PointEstimate, config: &SolverConfig) -> GaussNewtonOutcome {
    let m = spec.mode.unknowns();
    let obs = &spec.observations;
    let resid_tol = config.residual_tolerance * obs.norm().max(1.0);

    let mut pt = *start;
    let mut lambda = config.damping_initial;
    let mut iterates = vec![trace_step(spec, &pt)];

    for _ in 0..config.max_iterations {
        let Ok(resid) = stationarity_residual(spec, &pt) else {
            return GaussNewtonOutcome {
                candidate: None,
                trace: SolveTrace { iterates, termination: TerminationReason::SingularNormalMatrix },
            };
        };
        if resid.norm() <= resid_tol {
            return GaussNewtonOutcome {
                candidate: to_candidate(spec, &pt, resid.norm()),
                trace: SolveTrace { iterates, termination: TerminationReason::Converged },
            };
        }

        let jac = model_weighted_pieces(spec, &pt);
        let Some((normal, rhs)) = jac else {
            return GaussNewtonOutcome {
                candidate: None,
                trace: SolveTrace { iterates, termination: TerminationReason::SingularNormalMatrix },
            };
        };
        let scale = normal.trace() / m as f64;
        if !(scale.is_finite() && scale > 0.0) {
            return GaussNewtonOutcome {
                candidate: None,
                trace: SolveTrace { iterates, termination: TerminationReason::SingularNormalMatrix },
            };
        }

        let current_obj = objective(spec, &pt).unwrap_or(f64::INFINITY);
        let mut accepted = false;
        for _ in 0..25 {
            let mut damped = normal.clone();
            for i in 0..m {
                damped[(i, i)] += lambda * scale;
            }
            let Some(step) = damped.clone().cholesky().map(|ch| ch.solve(&rhs)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = offset_point(spec, &pt, &step);
            let trial_obj = objective(spec, &trial).unwrap_or(f64::INFINITY);
            if trial_obj < current_obj {
                let step_norm = step.norm();
                pt = trial;
                iterates.push(trace_step(spec, &pt));
                lambda = (lambda * 0.1).max(1e-15);
                accepted = true;
                if step_norm <= config.step_tolerance * (1.0 + pt.unknowns().norm()) {
                    return finish(spec, pt, iterates, resid_tol);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // damping exhausted without a descent direction
            break;
        }
    }

    finish(spec, pt, iterates, resid_tol)
}

/// Final refinement and classification of a Gauss-Newton run.
///
/// Gauss-Newton converges only linearly when the residual at the minimum
/// is large (the normal matrix drops the residual curvature), so a stalled
/// run may sit close to a stationary point without meeting the residual
/// tolerance. A few guarded steps of exact Newton on the gradient, which
/// costs nothing extra because the Hessian is closed-form, finish the job
/// quadratically; steps are only accepted while the objective does not
/// increase.
fn finish(
    spec: &ProblemSpec,
    mut pt: PointEstimate,
    mut iterates: Vec<TraceStep>,
    resid_tol: f64,
) -> GaussNewtonOutcome {
    let m = spec.mode.unknowns();
    let mut resid = stationarity_residual(spec, &pt).map(|r| r.norm()).unwrap_or(f64::INFINITY);
    'newton: for _ in 0..12 {
        if resid <= resid_tol {
            break;
        }
        let (Ok(grad), Ok(hess)) = (objective_gradient(spec, &pt), objective_hessian(spec, &pt))
        else {
            break;
        };
        let Some(full) = hess.clone().lu().solve(&grad) else { break };
        if !full.iter().all(|v| v.is_finite()) {
            break;
        }
        let current_obj = objective(spec, &pt).unwrap_or(f64::INFINITY);
        let mut alpha = 1.0;
        for _ in 0..6 {
            let mut step = DVector::zeros(m);
            for i in 0..m {
                step[i] = -alpha * full[i];
            }
            let trial = offset_point(spec, &pt, &step);
            let trial_resid =
                stationarity_residual(spec, &trial).map(|r| r.norm()).unwrap_or(f64::INFINITY);
            // strict residual decrease is the acceptance criterion; the
            // objective cannot serve as a guard here because its
            // round-off noise dwarfs the decrease near a large-residual
            // minimum. A step landing on a neighboring stationary point
            // is still a valid candidate.
            if trial_resid < 0.9 * resid {
                let trial_obj = objective(spec, &trial).unwrap_or(f64::INFINITY);
                if trial_obj < current_obj {
                    iterates.push(trace_step(spec, &trial));
                }
                pt = trial;
                resid = trial_resid;
                continue 'newton;
            }
            alpha *= 0.5;
        }
        break;
    }
    if resid <= resid_tol {
        GaussNewtonOutcome {
            candidate: to_candidate(spec, &pt, resid),
            trace: SolveTrace { iterates, termination: TerminationReason::Converged },
        }
    } else {
        GaussNewtonOutcome {
            candidate: None,
            trace: SolveTrace { iterates, termination: TerminationReason::MaxIterations },
        }
    }
}

/// Weighted normal matrix `J^T P J` and right-hand side `J^T P (L - model)`.
fn model_weighted_pieces(spec: &ProblemSpec, pt: &PointEstimate) -> Option<(DMatrix<f64>, DVector<f64>)> {
    use crate::model::{model_jacobian, predicted_squares};
    let jac = model_jacobian(spec, pt).ok()?;
    let zeta = predicted_squares(spec, pt).ok()?;
    let obs = &spec.observations;
    let m = spec.mode.unknowns();
    let n = spec.station_count();
    let mut normal = DMatrix::zeros(m, m);
    let mut rhs = DVector::zeros(m);
    for i in 0..n {
        let p = obs.weights[i];
        let misfit = obs.values[i] - zeta[i];
        for a in 0..m {
            rhs[a] += p * jac[(i, a)] * misfit;
            for b in 0..m {
                normal[(a, b)] += p * jac[(i, a)] * jac[(i, b)];
            }
        }
    }
    Some((normal, rhs))
}

fn offset_point(spec: &ProblemSpec, pt: &PointEstimate, step: &DVector<f64>) -> PointEstimate {
    if spec.mode.is_planar() {
        PointEstimate::planar(pt.x + step[0], pt.y + step[1], pt.z)
    } else {
        PointEstimate::spatial(pt.x + step[0], pt.y + step[1], pt.z + step[2])
    }
}

/// Axis-aligned search region around the stations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl SearchBox {
    pub fn for_spec(spec: &ProblemSpec, expansion: f64) -> Self {
        let d = spec.station_scale();
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        for st in &spec.stations {
            for (axis, value) in [st.u, st.v, st.w].into_iter().enumerate() {
                min[axis] = min[axis].min(value);
                max[axis] = max[axis].max(value);
            }
        }
        let mut out = SearchBox { min: [0.0; 3], max: [0.0; 3] };
        for axis in 0..3 {
            let center = 0.5 * (min[axis] + max[axis]);
            // degenerate extents (all stations sharing a coordinate) still
            // get a usable search range
            let half = (0.5 * (max[axis] - min[axis])).max(0.5 * d) * expansion;
            out.min[axis] = center - half;
            out.max[axis] = center + half;
        }
        out
    }

    fn lerp(&self, axis: usize, t: f64) -> f64 {
        self.min[axis] + t * (self.max[axis] - self.min[axis])
    }
}

/// Van der Corput radical inverse, the 1-D building block of the
/// low-discrepancy start sequence.
fn radical_inverse(mut index: usize, base: usize) -> f64 {
    let mut result = 0.0;
    let mut weight = 1.0 / base as f64;
    while index > 0 {
        result += (index % base) as f64 * weight;
        index /= base;
        weight /= base as f64;
    }
    result
}

/// Deterministic multistart: damped Gauss-Newton from low-discrepancy
/// points in the search box, deduplicated and order-normalized. Runs
/// are independent and may execute in parallel; merging is by start
/// index so the output never depends on scheduling.
pub fn multistart_solve(spec: &ProblemSpec, config: &SolverConfig) -> Vec<CandidateSolution> {
    let planar = spec.mode.is_planar();
    let z0 = spec.z0.unwrap_or(0.0);
    let boxy = SearchBox::for_spec(spec, config.search_box);
    let d = spec.station_scale();

    let outcomes = exec::map_indexed(config.multistart_count, |i| {
        let t0 = radical_inverse(i + 1, 2);
        let t1 = radical_inverse(i + 1, 3);
        let start = if planar {
            PointEstimate::planar(boxy.lerp(0, t0), boxy.lerp(1, t1), z0)
        } else {
            let t2 = radical_inverse(i + 1, 5);
            PointEstimate::spatial(boxy.lerp(0, t0), boxy.lerp(1, t1), boxy.lerp(2, t2))
        };
        gauss_newton(spec, &start, config)
    });

    let mut found: Vec<CandidateSolution> =
        outcomes.into_iter().filter_map(|o| o.candidate).collect();
    normalize_order(&mut found);
    dedup(found, crate::cubic::DEDUP_REL * d)
}

/// Objective evaluation over a regular grid, local-minimum harvesting
/// among grid neighbors, then a Gauss-Newton polish of every local
/// minimum. Boundary-node minima are kept and flagged; they usually mean
/// the search box does not contain the basin.
pub fn grid_then_polish(spec: &ProblemSpec, config: &SolverConfig) -> Vec<CandidateSolution> {
    let planar = spec.mode.is_planar();
    let z0 = spec.z0.unwrap_or(0.0);
    let boxy = SearchBox::for_spec(spec, config.search_box);
    let d = spec.station_scale();
    // a full-resolution 3-D grid is needlessly slow; coarse plus polish
    // reaches the same minima
    let res = if planar { config.grid_resolution } else { config.grid_resolution.min(41) };
    let axes = if planar { 2 } else { 3 };

    let node = |idx: &[usize]| -> PointEstimate {
        let coord = |axis: usize| boxy.lerp(axis, idx[axis] as f64 / (res - 1) as f64);
        if planar {
            PointEstimate::planar(coord(0), coord(1), z0)
        } else {
            PointEstimate::spatial(coord(0), coord(1), coord(2))
        }
    };

    let total = res.pow(axes as u32);
    let unravel = |flat: usize| -> Vec<usize> {
        let mut rem = flat;
        let mut idx = vec![0usize; axes];
        for axis in (0..axes).rev() {
            idx[axis] = rem % res;
            rem /= res;
        }
        idx
    };
    let values = exec::map_indexed(total, |flat| {
        objective(spec, &node(&unravel(flat))).unwrap_or(f64::INFINITY)
    });

    // local minima among the full neighbor stencil; boundary nodes compare
    // against the neighbors that exist
    let mut seeds: Vec<(usize, bool)> = Vec::new();
    'nodes: for flat in 0..total {
        let idx = unravel(flat);
        let center = values[flat];
        if !center.is_finite() {
            continue;
        }
        let mut offsets = vec![0isize; axes];
        loop {
            // advance the mixed-radix offset counter over {-1, 0, 1}^axes
            let mut carry = true;
            for off in offsets.iter_mut() {
                if carry {
                    *off += 1;
                    if *off > 1 {
                        *off = -1;
                    } else {
                        carry = false;
                    }
                }
            }
            if carry {
                break;
            }
            if offsets.iter().all(|&o| o == 0) {
                continue;
            }
            let mut neighbor = Vec::with_capacity(axes);
            let mut valid = true;
            for (axis, &off) in offsets.iter().enumerate() {
                let pos = idx[axis] as isize + off;
                if pos < 0 || pos >= res as isize {
                    valid = false;
                    break;
                }
                neighbor.push(pos as usize);
            }
            if !valid {
                continue;
            }
            let nflat = neighbor.iter().fold(0usize, |acc, &i| acc * res + i);
            if values[nflat] < center {
                continue 'nodes;
            }
        }
        let on_boundary = idx.iter().any(|&i| i == 0 || i == res - 1);
        seeds.push((flat, on_boundary));
    }

    let polished = exec::map_indexed(seeds.len(), |si| {
        let (flat, on_boundary) = seeds[si];
        let outcome = gauss_newton(spec, &node(&unravel(flat)), config);
        outcome.candidate.map(|mut c| {
            c.on_search_boundary = on_boundary;
            c
        })
    });

    let mut found: Vec<CandidateSolution> = polished.into_iter().flatten().collect();
    normalize_order(&mut found);
    dedup(found, crate::cubic::DEDUP_REL * d)
}
