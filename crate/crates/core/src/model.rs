//! Observation model for spatial intersection and its derivatives.
//!
//! A problem consists of known control stations and squared-distance
//! observations toward an unknown point. The model value for station `k`
//! is the squared spatial distance from the current point estimate to
//! that station; the weighted least-squares objective and its first and
//! second derivatives are all available in closed form because the
//! second derivatives of the model are constant.
//!
//! Everything in this module is a pure function over immutable inputs
//! and safe to call concurrently.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// A known control point.
#[derive(Debug, Clone, PartialEq)]
pub struct Station {
    pub id: String,
    /// East coordinate, meters.
    pub u: f64,
    /// North coordinate, meters.
    pub v: f64,
    /// Height coordinate, meters.
    pub w: f64,
}

impl Station {
    pub fn new(id: impl Into<String>, u: f64, v: f64, w: f64) -> Self {
        Self { id: id.into(), u, v, w }
    }
}

/// Squared-distance observations with diagonal weights.
///
/// Each entry of `values` is the *square* of a measured spatial distance,
/// in square meters. `weights` holds the diagonal of the weight matrix;
/// full weight matrices are not supported. `sigma0` is the a-priori
/// standard deviation of unit weight; it only enters covariance scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
    pub sigma0: f64,
}

impl ObservationSet {
    /// Unit-weight observations from squared distances.
    pub fn from_squares(values: Vec<f64>) -> Self {
        let n = values.len();
        Self { values, weights: vec![1.0; n], sigma0: 1.0 }
    }

    /// Unit-weight observations from plain distances (squared on ingestion).
    pub fn from_distances(distances: &[f64]) -> Self {
        Self::from_squares(distances.iter().map(|d| d * d).collect())
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|l| l * l).sum::<f64>().sqrt()
    }
}

/// Problem dimensionality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Two stations, height fixed at `z0`; unknowns (x, y).
    Planar2,
    /// Three stations, height fixed at `z0`; unknowns (x, y).
    Planar3,
    /// Three or more stations; unknowns (x, y, z).
    Spatial,
}

impl Mode {
    pub fn is_planar(self) -> bool {
        matches!(self, Mode::Planar2 | Mode::Planar3)
    }

    /// Number of unknown coordinates.
    pub fn unknowns(self) -> usize {
        if self.is_planar() {
            2
        } else {
            3
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Planar2 => "planar2",
            Mode::Planar3 => "planar3",
            Mode::Spatial => "spatial",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A point estimate, planar (z fixed) or spatial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointEstimate {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Whether z is a fixed plane height rather than an unknown.
    pub planar: bool,
}

impl PointEstimate {
    pub fn planar(x: f64, y: f64, z0: f64) -> Self {
        Self { x, y, z: z0, planar: true }
    }

    pub fn spatial(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z, planar: false }
    }

    /// Unknown coordinates as a vector (length 2 or 3).
    pub fn unknowns(&self) -> DVector<f64> {
        if self.planar {
            DVector::from_vec(vec![self.x, self.y])
        } else {
            DVector::from_vec(vec![self.x, self.y, self.z])
        }
    }
}

/// Validation failures when assembling a [`ProblemSpec`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("mode {mode} requires {expected} stations, got {actual}")]
    StationCount { mode: Mode, expected: String, actual: usize },
    #[error("planar mode requires a fixed plane height z0")]
    MissingZ0,
    #[error("z0 given but mode is spatial")]
    UnexpectedZ0,
    #[error("stations {first} and {second} coincide")]
    CoincidentStations { first: String, second: String },
    #[error("observation count {observations} does not match station count {stations}")]
    ObservationCount { observations: usize, stations: usize },
    #[error("weight count {weights} does not match station count {stations}")]
    WeightCount { weights: usize, stations: usize },
    #[error("observation {index} is negative: squared distances must be >= 0")]
    NegativeObservation { index: usize },
    #[error("weight {index} is not positive")]
    NonPositiveWeight { index: usize },
    #[error("sigma0 must be positive")]
    NonPositiveSigma0,
    #[error("non-finite value in {what}")]
    NonFinite { what: String },
}

/// Errors from model evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("point is {point} but problem mode is {mode}")]
    PointModeMismatch { point: &'static str, mode: Mode },
    #[error("planar point height {z} does not match plane z0 = {z0}")]
    PlaneMismatch { z: f64, z0: f64 },
}

/// A fully validated problem description.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub stations: Vec<Station>,
    pub observations: ObservationSet,
    pub mode: Mode,
    /// Fixed plane height, present iff mode is planar.
    pub z0: Option<f64>,
}

impl ProblemSpec {
    pub fn new(
        stations: Vec<Station>,
        observations: ObservationSet,
        mode: Mode,
        z0: Option<f64>,
    ) -> Result<Self, SpecError> {
        let spec = Self { stations, observations, mode, z0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        let n = self.stations.len();
        match self.mode {
            Mode::Planar2 if n != 2 => {
                return Err(SpecError::StationCount {
                    mode: self.mode,
                    expected: "exactly 2".into(),
                    actual: n,
                })
            }
            Mode::Planar3 if n != 3 => {
                return Err(SpecError::StationCount {
                    mode: self.mode,
                    expected: "exactly 3".into(),
                    actual: n,
                })
            }
            Mode::Spatial if n < 3 => {
                return Err(SpecError::StationCount {
                    mode: self.mode,
                    expected: "at least 3".into(),
                    actual: n,
                })
            }
            _ => {}
        }
        if self.mode.is_planar() {
            match self.z0 {
                Some(z0) if z0.is_finite() => {}
                Some(_) => return Err(SpecError::NonFinite { what: "z0".into() }),
                None => return Err(SpecError::MissingZ0),
            }
        } else if self.z0.is_some() {
            return Err(SpecError::UnexpectedZ0);
        }
        for st in &self.stations {
            if !(st.u.is_finite() && st.v.is_finite() && st.w.is_finite()) {
                return Err(SpecError::NonFinite { what: format!("station {}", st.id) });
            }
        }
        for (i, a) in self.stations.iter().enumerate() {
            for b in &self.stations[i + 1..] {
                if a.u == b.u && a.v == b.v && a.w == b.w {
                    return Err(SpecError::CoincidentStations {
                        first: a.id.clone(),
                        second: b.id.clone(),
                    });
                }
            }
        }
        let obs = &self.observations;
        if obs.values.len() != n {
            return Err(SpecError::ObservationCount { observations: obs.values.len(), stations: n });
        }
        if obs.weights.len() != n {
            return Err(SpecError::WeightCount { weights: obs.weights.len(), stations: n });
        }
        for (i, &l) in obs.values.iter().enumerate() {
            if !l.is_finite() {
                return Err(SpecError::NonFinite { what: format!("observation {i}") });
            }
            if l < 0.0 {
                return Err(SpecError::NegativeObservation { index: i });
            }
        }
        for (i, &p) in obs.weights.iter().enumerate() {
            if !p.is_finite() {
                return Err(SpecError::NonFinite { what: format!("weight {i}") });
            }
            if p <= 0.0 {
                return Err(SpecError::NonPositiveWeight { index: i });
            }
        }
        if !(obs.sigma0.is_finite() && obs.sigma0 > 0.0) {
            return Err(SpecError::NonPositiveSigma0);
        }
        Ok(())
    }

    pub fn station_count(&self) -> usize {
        self.stations.len()
    }

    /// Point constructor consistent with the problem mode.
    pub fn point(&self, x: f64, y: f64, z: f64) -> PointEstimate {
        if self.mode.is_planar() {
            PointEstimate::planar(x, y, self.z0.unwrap_or(z))
        } else {
            PointEstimate::spatial(x, y, z)
        }
    }

    /// Largest pairwise station distance; the natural length scale `D`.
    pub fn station_scale(&self) -> f64 {
        let mut best = 0.0f64;
        for (i, a) in self.stations.iter().enumerate() {
            for b in &self.stations[i + 1..] {
                let d2 = (a.u - b.u).powi(2) + (a.v - b.v).powi(2) + (a.w - b.w).powi(2);
                best = best.max(d2);
            }
        }
        best.sqrt()
    }

    /// Ratio of smallest to largest singular value of the centered station
    /// coordinate matrix, restricted to the unknown axes. Near zero for
    /// collinear stations.
    pub fn station_spread_ratio(&self) -> f64 {
        let n = self.stations.len();
        let m = self.mode.unknowns();
        if n < m {
            return 0.0;
        }
        let cu: f64 = self.stations.iter().map(|s| s.u).sum::<f64>() / n as f64;
        let cv: f64 = self.stations.iter().map(|s| s.v).sum::<f64>() / n as f64;
        let cw: f64 = self.stations.iter().map(|s| s.w).sum::<f64>() / n as f64;
        let mat = DMatrix::from_fn(n, m, |i, j| match j {
            0 => self.stations[i].u - cu,
            1 => self.stations[i].v - cv,
            _ => self.stations[i].w - cw,
        });
        let sv = mat.singular_values();
        let largest = sv.max();
        if largest == 0.0 {
            return 0.0;
        }
        sv.min() / largest
    }

    /// Spatial-mode stations spanning fewer than two dimensions violate the
    /// linear-independence condition at every point.
    pub fn degenerate_station_geometry(&self) -> bool {
        self.mode == Mode::Spatial && self.station_spread_ratio() < 1e-10
    }

    fn check_point(&self, point: &PointEstimate) -> Result<(), ModelError> {
        match (self.mode.is_planar(), point.planar) {
            (true, false) => {
                return Err(ModelError::PointModeMismatch { point: "spatial", mode: self.mode })
            }
            (false, true) => {
                return Err(ModelError::PointModeMismatch { point: "planar", mode: self.mode })
            }
            _ => {}
        }
        if let Some(z0) = self.z0 {
            if point.z != z0 {
                return Err(ModelError::PlaneMismatch { z: point.z, z0 });
            }
        }
        Ok(())
    }
}

/// Model values: squared distance from `point` to each station.
pub fn predicted_squares(spec: &ProblemSpec, point: &PointEstimate) -> Result<Vec<f64>, ModelError> {
    spec.check_point(point)?;
    Ok(spec
        .stations
        .iter()
        .map(|s| (point.x - s.u).powi(2) + (point.y - s.v).powi(2) + (point.z - s.w).powi(2))
        .collect())
}

/// Jacobian of the model: row per station, column per unknown,
/// entry `2 (X_j - station_j)`.
pub fn model_jacobian(spec: &ProblemSpec, point: &PointEstimate) -> Result<DMatrix<f64>, ModelError> {
    spec.check_point(point)?;
    let m = spec.mode.unknowns();
    Ok(DMatrix::from_fn(spec.station_count(), m, |i, j| {
        let s = &spec.stations[i];
        match j {
            0 => 2.0 * (point.x - s.u),
            1 => 2.0 * (point.y - s.v),
            _ => 2.0 * (point.z - s.w),
        }
    }))
}

/// The model's second derivatives, which are constant: 2 along each
/// unknown's diagonal, 0 for mixed pairs, identically for every station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSecondDerivatives {
    pub diagonal: f64,
    pub mixed: f64,
    pub unknowns: usize,
}

pub fn model_second_derivatives(spec: &ProblemSpec) -> ModelSecondDerivatives {
    ModelSecondDerivatives { diagonal: 2.0, mixed: 0.0, unknowns: spec.mode.unknowns() }
}

/// Weighted least-squares objective `sum_k p_k (L_k - model_k)^2`.
pub fn objective(spec: &ProblemSpec, point: &PointEstimate) -> Result<f64, ModelError> {
    let zeta = predicted_squares(spec, point)?;
    let obs = &spec.observations;
    Ok(zeta
        .iter()
        .zip(&obs.values)
        .zip(&obs.weights)
        .map(|((&z, &l), &p)| p * (l - z) * (l - z))
        .sum())
}

/// Gradient of the objective with respect to the unknowns.
pub fn objective_gradient(spec: &ProblemSpec, point: &PointEstimate) -> Result<DVector<f64>, ModelError> {
    let zeta = predicted_squares(spec, point)?;
    let jac = model_jacobian(spec, point)?;
    let obs = &spec.observations;
    let m = spec.mode.unknowns();
    let mut g = DVector::zeros(m);
    for i in 0..spec.station_count() {
        let factor = 2.0 * obs.weights[i] * (zeta[i] - obs.values[i]);
        for j in 0..m {
            g[j] += factor * jac[(i, j)];
        }
    }
    Ok(g)
}

/// First-order stationarity residuals, one per unknown.
///
/// Components use the un-doubled form `sum_k p_k (L_k - model_k) (X_j - station_j)`,
/// i.e. half the weighted inner product of the misfit with the Jacobian
/// column. The gradient equals `-4` times these components.
#[derive(Debug, Clone, PartialEq)]
pub struct StationarityResidual {
    pub components: Vec<f64>,
}

impl StationarityResidual {
    pub fn norm(&self) -> f64 {
        self.components.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Largest weighted inner product `|<L - model, d(model)/dX_j>|`.
    pub fn max_inner_product(&self) -> f64 {
        2.0 * self.components.iter().fold(0.0f64, |acc, c| acc.max(c.abs()))
    }
}

pub fn stationarity_residual(
    spec: &ProblemSpec,
    point: &PointEstimate,
) -> Result<StationarityResidual, ModelError> {
    let zeta = predicted_squares(spec, point)?;
    let obs = &spec.observations;
    let m = spec.mode.unknowns();
    let mut components = vec![0.0; m];
    for (i, s) in spec.stations.iter().enumerate() {
        let misfit = obs.weights[i] * (obs.values[i] - zeta[i]);
        components[0] += misfit * (point.x - s.u);
        components[1] += misfit * (point.y - s.v);
        if m == 3 {
            components[2] += misfit * (point.z - s.w);
        }
    }
    Ok(StationarityResidual { components })
}

/// Hessian of the objective. Using the constant model second derivatives,
/// `H = 2 J^T P J + 4 (sum_k p_k (model_k - L_k)) I`.
pub fn objective_hessian(spec: &ProblemSpec, point: &PointEstimate) -> Result<DMatrix<f64>, ModelError> {
    let zeta = predicted_squares(spec, point)?;
    let jac = model_jacobian(spec, point)?;
    let obs = &spec.observations;
    let m = spec.mode.unknowns();
    let mut h = DMatrix::zeros(m, m);
    let mut trace_term = 0.0;
    for i in 0..spec.station_count() {
        let p = obs.weights[i];
        trace_term += p * (zeta[i] - obs.values[i]);
        for a in 0..m {
            for b in 0..m {
                h[(a, b)] += 2.0 * p * jac[(i, a)] * jac[(i, b)];
            }
        }
    }
    for a in 0..m {
        h[(a, a)] += 4.0 * trace_term;
    }
    Ok(h)
}

/// Nature of a stationary point, from the Hessian's eigenvalue signs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Minimum,
    Saddle,
    Maximum,
    Degenerate,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Minimum => "minimum",
            Classification::Saddle => "saddle",
            Classification::Maximum => "maximum",
            Classification::Degenerate => "degenerate",
        }
    }
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Default relative eigenvalue tolerance for [`classify_stationary`].
pub const CLASSIFY_TOL: f64 = 1e-9;

/// Classify a symmetric Hessian by its eigenvalues. An eigenvalue within
/// `tol * |H|` of zero makes the point degenerate; otherwise the signs
/// decide. `tol` scales with the matrix so the answer does not depend on
/// the coordinate unit.
pub fn classify_stationary(hessian: &DMatrix<f64>, tol: f64) -> Classification {
    let sym = hessian.clone().symmetric_part();
    let eigs = sym.symmetric_eigenvalues();
    let scale = eigs.iter().fold(0.0f64, |acc, e| acc.max(e.abs()));
    if scale == 0.0 {
        return Classification::Degenerate;
    }
    let cutoff = tol * scale;
    if eigs.iter().any(|e| e.abs() <= cutoff) {
        Classification::Degenerate
    } else if eigs.iter().all(|&e| e > 0.0) {
        Classification::Minimum
    } else if eigs.iter().all(|&e| e < 0.0) {
        Classification::Maximum
    } else {
        Classification::Saddle
    }
}
