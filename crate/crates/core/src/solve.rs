//! Solver orchestration: routes a problem to the algebraic or numeric
//! pipeline, handles fallbacks for degenerate configurations, optionally
//! cross-checks the two paths against each other, and assembles the
//! final report data.

use crate::candidate::{normalize_order, CandidateSolution};
use crate::covariance::{propagate, CovarianceError, CovarianceReport};
use crate::cubic::{solve_planar2, CubicError, DEDUP_REL};
use crate::model::{Classification, Mode, ProblemSpec};
use crate::numeric::{grid_then_polish, multistart_solve, SolverConfig};
use crate::reduction::ReductionError;
use nalgebra::Matrix2;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveOptions {
    /// Cross-check the primary path against the independent one and
    /// record the agreement.
    pub verify: bool,
    /// Attach covariance propagation at the selected minimum (planar2).
    pub sigma_l: Option<Matrix2<f64>>,
    pub config: SolverConfig,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("no solver path converged: {0}")]
    NoConvergence(String),
}

/// Agreement record between two independently computed minima sets.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCheck {
    pub agreement: bool,
    /// Largest distance between matched minima (meters); infinite when the
    /// sets have different cardinality.
    pub max_mismatch: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionReport {
    pub candidates: Vec<CandidateSolution>,
    /// Index into `candidates` of the selected global minimum.
    pub selected: Option<usize>,
    pub covariance: Option<CovarianceReport>,
    pub cross_check: Option<CrossCheck>,
    pub fallback_used: bool,
    pub diagnostics: Vec<String>,
}

impl SolutionReport {
    pub fn selected_candidate(&self) -> Option<&CandidateSolution> {
        self.selected.map(|i| &self.candidates[i])
    }
}

/// Match two minima sets within `tol`.
pub fn compare_minima(a: &[CandidateSolution], b: &[CandidateSolution], tol: f64) -> CrossCheck {
    let minima = |set: &[CandidateSolution]| -> Vec<CandidateSolution> {
        set.iter().filter(|c| c.is_minimum()).cloned().collect()
    };
    let (ma, mb) = (minima(a), minima(b));
    if ma.len() != mb.len() {
        return CrossCheck { agreement: false, max_mismatch: f64::INFINITY, tolerance: tol };
    }
    let mut max_mismatch = 0.0f64;
    let mut agreement = true;
    for m in &ma {
        let nearest = mb
            .iter()
            .map(|n| m.distance_to(n))
            .fold(f64::INFINITY, f64::min);
        max_mismatch = max_mismatch.max(nearest);
        if nearest > tol {
            agreement = false;
        }
    }
    CrossCheck { agreement, max_mismatch, tolerance: tol }
}

fn select_minimum(candidates: &[CandidateSolution]) -> Option<usize> {
    // candidates are already objective-ordered; the first minimum wins
    candidates.iter().position(|c| c.classification == Classification::Minimum)
}

fn numeric_with_grid_fallback(
    spec: &ProblemSpec,
    config: &SolverConfig,
    diagnostics: &mut Vec<String>,
) -> Vec<CandidateSolution> {
    let found = multistart_solve(spec, config);
    if found.is_empty() {
        diagnostics.push("multistart produced no stationary point; grid search used".into());
        grid_then_polish(spec, config)
    } else {
        found
    }
}

/// Solve a validated problem end to end.
pub fn solve_problem(spec: &ProblemSpec, options: &SolveOptions) -> Result<SolutionReport, SolveError> {
    if spec.degenerate_station_geometry() {
        return Err(SolveError::DegenerateGeometry(format!(
            "stations are collinear (spread ratio {:.3e}): the model derivative vectors are \
             linearly dependent at every point",
            spec.station_spread_ratio()
        )));
    }
    let d = spec.station_scale();
    let tol = DEDUP_REL * d;
    let mut diagnostics = Vec::new();
    let mut fallback_used = false;

    let mut candidates: Vec<CandidateSolution>;
    let mut cross_check = None;

    match spec.mode {
        Mode::Planar2 => {
            let algebraic = match solve_planar2(spec) {
                Ok(solve) => {
                    for ex in &solve.excluded {
                        diagnostics.push(format!(
                            "excluded direction tan(theta) = {:.6e}, rho = {}: {}",
                            ex.xi,
                            ex.rho.map_or("-".to_string(), |r| format!("{r:.6e}")),
                            ex.reason
                        ));
                    }
                    Some(solve.candidates)
                }
                Err(CubicError::Reduction(ReductionError::DegenerateElimination {
                    sum,
                    threshold,
                })) => {
                    log::debug!("planar2 elimination degenerate (|d|+|f| = {sum:.3e}), falling back");
                    diagnostics.push(format!(
                        "algebraic elimination degenerate (|d| + |f| = {sum:.3e} <= {threshold:.3e}, \
                         symmetric configuration); numeric fallback used"
                    ));
                    None
                }
                Err(err) => {
                    log::debug!("algebraic path failed: {err}");
                    diagnostics.push(format!("algebraic path failed ({err}); numeric fallback used"));
                    None
                }
            };
            match algebraic {
                Some(found) => {
                    candidates = found;
                    if options.verify {
                        let numeric = numeric_with_grid_fallback(spec, &options.config, &mut diagnostics);
                        cross_check = Some(compare_minima(&candidates, &numeric, tol));
                        candidates.extend(numeric);
                    }
                }
                None => {
                    fallback_used = true;
                    candidates = numeric_with_grid_fallback(spec, &options.config, &mut diagnostics);
                    if options.verify {
                        let grid = grid_then_polish(spec, &options.config);
                        cross_check = Some(compare_minima(&candidates, &grid, tol));
                    }
                }
            }
        }
        Mode::Planar3 | Mode::Spatial => {
            candidates = numeric_with_grid_fallback(spec, &options.config, &mut diagnostics);
            if options.verify {
                let grid = grid_then_polish(spec, &options.config);
                cross_check = Some(compare_minima(&candidates, &grid, tol));
            }
        }
    }

    normalize_order(&mut candidates);
    if let Some(check) = &cross_check {
        log::debug!(
            "cross-check: agreement={} max_mismatch={:.3e}",
            check.agreement,
            check.max_mismatch
        );
    }
    if candidates.is_empty() {
        return Err(SolveError::NoConvergence(
            "no stationary point found by any path; consider enlarging the search box".into(),
        ));
    }
    if candidates.iter().any(|c| c.on_search_boundary) {
        diagnostics.push(
            "a candidate sits on the search-box boundary; the true minimum may lie outside \
             (enlarge search_box)"
                .into(),
        );
    }
    let selected = select_minimum(&candidates);
    if selected.is_none() {
        diagnostics.push("no candidate classified as a minimum; report lists stationary points only".into());
    }

    let covariance = match (&options.sigma_l, selected, spec.mode) {
        (Some(sigma_l), Some(sel), Mode::Planar2) => {
            let at = &candidates[sel];
            match propagate(spec, (at.x, at.y), *sigma_l) {
                Ok(report) => Some(report),
                Err(err @ CovarianceError::IllConditioned { .. }) => {
                    diagnostics.push(format!("covariance unavailable: {err}"));
                    None
                }
                Err(err) => {
                    diagnostics.push(format!("covariance unavailable: {err}"));
                    None
                }
            }
        }
        (Some(_), _, mode) if mode != Mode::Planar2 => {
            diagnostics.push("covariance propagation is planar2-only; skipped".into());
            None
        }
        _ => None,
    };

    Ok(SolutionReport { candidates, selected, covariance, cross_check, fallback_used, diagnostics })
}
