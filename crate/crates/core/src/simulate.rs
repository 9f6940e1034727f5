//! Synthetic scenario generation and Monte Carlo validation of the
//! covariance propagation.

use crate::candidate::CandidateSolution;
use crate::covariance::{distance_sigma_to_l_sigma, propagate, CovarianceError};
use crate::exec;
use crate::model::{Mode, ObservationSet, ProblemSpec, SpecError, Station};
use crate::numeric::{gauss_newton, SolverConfig};
use crate::problem::{fmt_f64, ProblemDocument};
use crate::solve::{solve_problem, SolveError, SolveOptions};
use nalgebra::Matrix2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

/// Inputs for the scenario generator.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub stations: Vec<Station>,
    pub mode: Mode,
    pub z0: Option<f64>,
    pub true_point: (f64, f64, f64),
    /// Distance-noise standard deviation in meters (0 for noise-free).
    pub noise_sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulateError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("noise sigma must be finite and >= 0")]
    BadNoise,
}

pub const TRUTH_HEADER: &str = "format trilat-truth v1";

/// True-point sidecar emitted next to a generated problem file.
pub fn truth_sidecar(scenario: &Scenario) -> String {
    format!(
        "{TRUTH_HEADER}\nx {}\ny {}\nz {}\nseed {}\n",
        fmt_f64(scenario.true_point.0),
        fmt_f64(scenario.true_point.1),
        fmt_f64(scenario.true_point.2),
        scenario.seed
    )
}

/// Generate a problem document with observations `d_i + noise`, squared
/// on ingestion like user-measured distances. Deterministic per seed.
pub fn generate(scenario: &Scenario) -> Result<ProblemDocument, SimulateError> {
    if !(scenario.noise_sigma.is_finite() && scenario.noise_sigma >= 0.0) {
        return Err(SimulateError::BadNoise);
    }
    let (xt, yt, zt) = scenario.true_point;
    let zt = if scenario.mode.is_planar() { scenario.z0.unwrap_or(zt) } else { zt };
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let normal = Normal::new(0.0, scenario.noise_sigma.max(f64::MIN_POSITIVE)).unwrap();
    let mut distances = Vec::with_capacity(scenario.stations.len());
    for st in &scenario.stations {
        let d = ((xt - st.u).powi(2) + (yt - st.v).powi(2) + (zt - st.w).powi(2)).sqrt();
        let noise = if scenario.noise_sigma > 0.0 { normal.sample(&mut rng) } else { 0.0 };
        distances.push((d + noise).max(0.0));
    }
    let observations = ObservationSet::from_distances(&distances);
    let spec =
        ProblemSpec::new(scenario.stations.clone(), observations, scenario.mode, scenario.z0)?;
    let n = spec.station_count();
    Ok(ProblemDocument {
        spec,
        given_squared: vec![false; n],
        distance_sigmas: vec![
            if scenario.noise_sigma > 0.0 { Some(scenario.noise_sigma) } else { None };
            n
        ],
        solver_overrides: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonteCarloError {
    #[error("monte carlo requires planar2 mode, got {0}")]
    WrongMode(Mode),
    #[error("monte carlo requires a sigma for every observation")]
    MissingSigmas,
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Covariance(#[from] CovarianceError),
}

/// Empirical-versus-analytic covariance comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloStats {
    pub trials: usize,
    /// Trials that converged back to the nominal minimum.
    pub used: usize,
    /// Trials excluded because the re-solve hopped to a different minimum.
    pub basin_hops: usize,
    /// Trials excluded because the re-solve did not converge.
    pub failed: usize,
    pub nominal: (f64, f64),
    pub empirical_mean: (f64, f64),
    pub empirical_cov: Matrix2<f64>,
    pub analytic_cov: Matrix2<f64>,
    /// Entrywise `|empirical - analytic| / |analytic|` (absolute
    /// difference where the analytic entry is zero).
    pub relative_diff: Matrix2<f64>,
    pub seed: u64,
}

enum TrialOutcome {
    Used(f64, f64),
    BasinHop,
    Failed,
}

/// Re-solve the problem `trials` times under squared-distance noise with
/// covariance taken from the per-observation sigmas, and compare the
/// scatter of the estimates with the propagated covariance.
///
/// Each trial draws from an independent, trial-indexed random stream, so
/// results are identical whether trials run in parallel or not.
pub fn monte_carlo(
    doc: &ProblemDocument,
    trials: usize,
    seed: u64,
    config: &SolverConfig,
) -> Result<MonteCarloStats, MonteCarloError> {
    let spec = &doc.spec;
    if spec.mode != Mode::Planar2 {
        return Err(MonteCarloError::WrongMode(spec.mode));
    }
    let sigmas: Vec<f64> = doc
        .distance_sigmas
        .iter()
        .map(|s| s.ok_or(MonteCarloError::MissingSigmas))
        .collect::<Result<_, _>>()?;

    let base = solve_problem(spec, &SolveOptions { config: config.clone(), ..Default::default() })?;
    let nominal = base
        .selected_candidate()
        .ok_or_else(|| SolveError::NoConvergence("no minimum to perturb around".into()))?
        .clone();
    let minima: Vec<CandidateSolution> =
        base.candidates.iter().filter(|c| c.is_minimum()).cloned().collect();

    let distances = [spec.observations.values[0].sqrt(), spec.observations.values[1].sqrt()];
    let sigma_l = distance_sigma_to_l_sigma(distances, [sigmas[0], sigmas[1]])?;
    let analytic = propagate(spec, (nominal.x, nominal.y), sigma_l)?;

    let l_sigmas = [sigma_l[(0, 0)].sqrt(), sigma_l[(1, 1)].sqrt()];
    let outcomes = exec::map_indexed(trials, |trial| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial as u64 + 1);
        let mut noisy = spec.clone();
        for (i, l) in noisy.observations.values.iter_mut().enumerate() {
            if l_sigmas[i] > 0.0 {
                let normal = Normal::new(0.0, l_sigmas[i]).unwrap();
                *l = (*l + normal.sample(&mut rng)).max(0.0);
            }
        }
        let start = noisy.point(nominal.x, nominal.y, nominal.z);
        let Some(found) = gauss_newton(&noisy, &start, config).candidate else {
            return TrialOutcome::Failed;
        };
        // nearest catalog minimum decides whether the trial stayed in the
        // nominal basin
        let mut nearest = 0usize;
        let mut nearest_dist = f64::INFINITY;
        for (i, m) in minima.iter().enumerate() {
            let dist = (found.x - m.x).hypot(found.y - m.y);
            if dist < nearest_dist {
                nearest_dist = dist;
                nearest = i;
            }
        }
        let is_nominal = (minima[nearest].x - nominal.x).hypot(minima[nearest].y - nominal.y)
            < f64::EPSILON.sqrt();
        if is_nominal {
            TrialOutcome::Used(found.x, found.y)
        } else {
            TrialOutcome::BasinHop
        }
    });

    let mut used = 0usize;
    let mut hops = 0usize;
    let mut failed = 0usize;
    let (mut sx, mut sy) = (0.0f64, 0.0f64);
    let mut points = Vec::new();
    for outcome in &outcomes {
        match outcome {
            TrialOutcome::Used(x, y) => {
                used += 1;
                sx += x;
                sy += y;
                points.push((*x, *y));
            }
            TrialOutcome::BasinHop => hops += 1,
            TrialOutcome::Failed => failed += 1,
        }
    }

    let mean = if used > 0 { (sx / used as f64, sy / used as f64) } else { (0.0, 0.0) };
    let mut cov = Matrix2::zeros();
    if used > 1 {
        for (x, y) in &points {
            let (dx, dy) = (x - mean.0, y - mean.1);
            cov[(0, 0)] += dx * dx;
            cov[(0, 1)] += dx * dy;
            cov[(1, 0)] += dx * dy;
            cov[(1, 1)] += dy * dy;
        }
        cov /= (used - 1) as f64;
    }
    let mut rel = Matrix2::zeros();
    for i in 0..2 {
        for j in 0..2 {
            let a = analytic.sigma_x[(i, j)];
            let diff = (cov[(i, j)] - a).abs();
            rel[(i, j)] = if a != 0.0 { diff / a.abs() } else { diff };
        }
    }

    Ok(MonteCarloStats {
        trials,
        used,
        basin_hops: hops,
        failed,
        nominal: (nominal.x, nominal.y),
        empirical_mean: mean,
        empirical_cov: cov,
        analytic_cov: analytic.sigma_x,
        relative_diff: rel,
        seed,
    })
}
