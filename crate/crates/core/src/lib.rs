//! Spatial intersection (trilateration) by nonlinear least squares.
//!
//! Determines an unknown point from squared-distance observations to
//! known control stations. Three problem shapes are supported:
//!
//! - **planar2** — two stations, height fixed: solved in closed form by
//!   a polar reduction of the stationarity system to two quadratics in
//!   the radius whose compatibility condition is a low-degree polynomial
//!   in `tan theta` ([`cubic`]), with every stationary point recovered
//!   and classified by the Hessian.
//! - **planar3** — three stations, height fixed: damped Gauss-Newton
//!   with deterministic multistart ([`numeric`]).
//! - **spatial** — three or more stations, all three coordinates free:
//!   the same numeric path.
//!
//! [`covariance`] propagates observation covariance through the inverse
//! position Jacobian for the exactly determined planar2 case, and
//! [`simulate`] validates the propagation by Monte Carlo. [`problem`] and
//! [`report`] define the text file formats used by the `trilat` CLI.
//!
//! Batch work (multistart, grid search, Monte Carlo trials) runs on a
//! thread pool when the default `parallel` feature is enabled; results
//! are bit-identical to the sequential path.

pub mod candidate;
pub mod covariance;
pub mod cubic;
pub mod exec;
pub mod model;
pub mod numeric;
pub mod poly;
pub mod problem;
pub mod reduction;
pub mod report;
pub mod simulate;
pub mod solve;

pub use candidate::{CandidateSolution, Provenance};
pub use model::{
    Classification, Mode, ObservationSet, PointEstimate, ProblemSpec, Station,
};
pub use numeric::SolverConfig;
pub use problem::{parse_problem, serialize_problem, ProblemDocument};
pub use solve::{solve_problem, SolutionReport, SolveError, SolveOptions};
