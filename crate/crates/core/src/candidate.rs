//! Stationary-point candidates shared by the algebraic and numeric solvers.

use crate::model::Classification;

/// Which pipeline produced a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Closed-form reduction of the planar two-station system.
    Algebraic,
    /// Iterative least-squares solve.
    Numeric,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Algebraic => "algebraic",
            Provenance::Numeric => "numeric",
        }
    }
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A stationary point of the objective, classified and annotated.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSolution {
    /// Position in the user frame, meters. `z` equals the plane height in
    /// planar modes.
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Polar coordinates in the working frame that produced the candidate
    /// (algebraic path only).
    pub rho: Option<f64>,
    pub theta: Option<f64>,
    /// Norm of the stationarity residual at the candidate.
    pub residual_norm: f64,
    pub classification: Classification,
    pub objective: f64,
    pub provenance: Provenance,
    /// Set when the candidate sits on the boundary of a search box.
    pub on_search_boundary: bool,
}

impl CandidateSolution {
    pub fn is_minimum(&self) -> bool {
        self.classification == Classification::Minimum
    }

    pub fn distance_to(&self, other: &CandidateSolution) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2))
            .sqrt()
    }
}

/// Sort candidates by objective, then x, then y, then z, so output order
/// never depends on evaluation order.
pub fn normalize_order(candidates: &mut [CandidateSolution]) {
    candidates.sort_by(|a, b| {
        (a.objective, a.x, a.y, a.z)
            .partial_cmp(&(b.objective, b.x, b.y, b.z))
            .expect("candidate fields are finite")
    });
}

/// Drop candidates closer than `tol` to an earlier one, keeping the first
/// (lowest objective after [`normalize_order`]).
pub fn dedup(candidates: Vec<CandidateSolution>, tol: f64) -> Vec<CandidateSolution> {
    let mut kept: Vec<CandidateSolution> = Vec::with_capacity(candidates.len());
    for cand in candidates {
        if kept.iter().all(|k| k.distance_to(&cand) > tol) {
            kept.push(cand);
        }
    }
    kept
}
