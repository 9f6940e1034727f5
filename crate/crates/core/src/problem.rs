//! The line-oriented problem file format.
//!
//! One directive per line, `#` starts a comment, whitespace separates
//! tokens. The header line carries the format version.
//!
//! ```text
//! format trilat-problem v1
//! mode planar2                 # planar2 | planar3 | spatial
//! z0 0                         # meters; required for planar modes
//! sigma0 1                     # optional, default 1
//! station S1 0 0 0             # id, then u v w in meters
//! station S2 4 0 0
//! obs S1 distance 2.236067977  # plain distance, squared on ingestion
//! obs S2 distance-squared 13   # already squared
//! solver grid_resolution 201   # optional solver overrides
//! ```
//!
//! An `obs` line may append `sigma <meters>` and `weight <value>` pairs.
//! Whether a value was given plain or squared is an explicit field and is
//! preserved by serialization. Unknown directives are rejected; so is any
//! attempt to supply a full weight matrix, since only diagonal weights
//! are supported.

use crate::model::{Mode, ObservationSet, ProblemSpec, SpecError, Station};
use crate::numeric::SolverConfig;
use std::collections::HashMap;
use thiserror::Error;

pub const FORMAT_HEADER: &str = "format trilat-problem v1";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("{0}")]
    Semantic(String),
    #[error("only diagonal weights are supported; a full weight matrix cannot be expressed \
             (line {line})")]
    WeightMatrix { line: usize },
}

impl From<SpecError> for ParseError {
    fn from(err: SpecError) -> Self {
        ParseError::Semantic(err.to_string())
    }
}

/// A parsed problem file: the validated spec plus everything the solver
/// front end needs that is not part of the mathematical problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemDocument {
    pub spec: ProblemSpec,
    /// Per observation: whether the file carried the squared value.
    pub given_squared: Vec<bool>,
    /// Per observation: distance standard deviation in meters, if given.
    pub distance_sigmas: Vec<Option<f64>>,
    /// Solver overrides in file order, as `(key, value)`.
    pub solver_overrides: Vec<(String, f64)>,
}

impl ProblemDocument {
    pub fn from_spec(spec: ProblemSpec) -> Self {
        let n = spec.station_count();
        Self {
            spec,
            given_squared: vec![true; n],
            distance_sigmas: vec![None; n],
            solver_overrides: Vec::new(),
        }
    }

    /// Solver configuration with the file's overrides applied.
    pub fn solver_config(&self) -> SolverConfig {
        let mut config = SolverConfig::default();
        for (key, value) in &self.solver_overrides {
            match key.as_str() {
                "max_iterations" => config.max_iterations = *value as usize,
                "step_tolerance" => config.step_tolerance = *value,
                "residual_tolerance" => config.residual_tolerance = *value,
                "damping_initial" => config.damping_initial = *value,
                "multistart_count" => config.multistart_count = *value as usize,
                "grid_resolution" => config.grid_resolution = *value as usize,
                "search_box" => config.search_box = *value,
                _ => unreachable!("validated at parse time"),
            }
        }
        config
    }

    /// Indices of observations that were given as plain distances and
    /// squared on ingestion.
    pub fn squared_on_ingestion(&self) -> Vec<usize> {
        self.given_squared
            .iter()
            .enumerate()
            .filter_map(|(i, &sq)| (!sq).then_some(i))
            .collect()
    }
}

const SOLVER_KEYS: [&str; 7] = [
    "max_iterations",
    "step_tolerance",
    "residual_tolerance",
    "damping_initial",
    "multistart_count",
    "grid_resolution",
    "search_box",
];

struct RawObs {
    station: String,
    value: f64,
    squared: bool,
    sigma: Option<f64>,
    weight: f64,
    line: usize,
}

/// 17 significant digits: enough to reproduce any f64 exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn parse_problem(text: &str) -> Result<ProblemDocument, ParseError> {
    let mut mode: Option<Mode> = None;
    let mut z0: Option<f64> = None;
    let mut sigma0: Option<f64> = None;
    let mut stations: Vec<Station> = Vec::new();
    let mut raw_obs: Vec<RawObs> = Vec::new();
    let mut overrides: Vec<(String, f64)> = Vec::new();
    let mut header_seen = false;

    let syntax = |line: usize, column: usize, message: String| ParseError::Syntax {
        line,
        column,
        message,
    };
    // column of the nth whitespace-separated token (1-based)
    let token_column = |text: &str, index: usize| -> usize {
        let mut col = 1;
        let mut count = 0;
        let mut in_token = false;
        for (i, ch) in text.char_indices() {
            if ch.is_whitespace() {
                in_token = false;
            } else if !in_token {
                in_token = true;
                if count == index {
                    col = i + 1;
                    break;
                }
                count += 1;
            }
        }
        col
    };

    for (lineno, raw_line) in text.lines().enumerate() {
        let line_num = lineno + 1;
        let content = raw_line.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if !header_seen {
            if content.trim() != FORMAT_HEADER {
                return Err(syntax(
                    line_num,
                    1,
                    format!("expected header '{FORMAT_HEADER}', got '{}'", content.trim()),
                ));
            }
            header_seen = true;
            continue;
        }
        let parse_num = |tok: &str, idx: usize, what: &str| -> Result<f64, ParseError> {
            tok.parse::<f64>().map_err(|_| {
                syntax(line_num, token_column(raw_line, idx), format!("invalid {what}: '{tok}'"))
            })
        };
        match tokens[0] {
            "mode" => {
                if tokens.len() != 2 {
                    return Err(syntax(line_num, 1, "mode takes one value".into()));
                }
                mode = Some(match tokens[1] {
                    "planar2" => Mode::Planar2,
                    "planar3" => Mode::Planar3,
                    "spatial" => Mode::Spatial,
                    other => {
                        return Err(syntax(
                            line_num,
                            token_column(raw_line, 1),
                            format!("unknown mode '{other}' (planar2, planar3, spatial)"),
                        ))
                    }
                });
            }
            "z0" => {
                if tokens.len() != 2 {
                    return Err(syntax(line_num, 1, "z0 takes one value".into()));
                }
                z0 = Some(parse_num(tokens[1], 1, "z0")?);
            }
            "sigma0" => {
                if tokens.len() != 2 {
                    return Err(syntax(line_num, 1, "sigma0 takes one value".into()));
                }
                sigma0 = Some(parse_num(tokens[1], 1, "sigma0")?);
            }
            "station" => {
                if tokens.len() != 5 {
                    return Err(syntax(line_num, 1, "station takes: id u v w".into()));
                }
                let id = tokens[1].to_string();
                if stations.iter().any(|s| s.id == id) {
                    return Err(ParseError::Semantic(format!(
                        "duplicate station id '{id}' (line {line_num})"
                    )));
                }
                stations.push(Station::new(
                    id,
                    parse_num(tokens[2], 2, "u coordinate")?,
                    parse_num(tokens[3], 3, "v coordinate")?,
                    parse_num(tokens[4], 4, "w coordinate")?,
                ));
            }
            "obs" => {
                if tokens.len() < 4 {
                    return Err(syntax(
                        line_num,
                        1,
                        "obs takes: station-id, distance|distance-squared, value, \
                         then optional sigma/weight pairs"
                            .into(),
                    ));
                }
                let squared = match tokens[2] {
                    "distance" => false,
                    "distance-squared" => true,
                    other => {
                        return Err(syntax(
                            line_num,
                            token_column(raw_line, 2),
                            format!("unknown observation kind '{other}' \
                                     (distance or distance-squared)"),
                        ))
                    }
                };
                let value = parse_num(tokens[3], 3, "observation value")?;
                let mut sigma = None;
                let mut weight = 1.0;
                let mut i = 4;
                while i < tokens.len() {
                    match tokens[i] {
                        "sigma" if i + 1 < tokens.len() => {
                            sigma = Some(parse_num(tokens[i + 1], i + 1, "sigma")?);
                            i += 2;
                        }
                        "weight" if i + 1 < tokens.len() => {
                            weight = parse_num(tokens[i + 1], i + 1, "weight")?;
                            i += 2;
                        }
                        other => {
                            return Err(syntax(
                                line_num,
                                token_column(raw_line, i),
                                format!("unknown observation field '{other}'"),
                            ))
                        }
                    }
                }
                raw_obs.push(RawObs {
                    station: tokens[1].to_string(),
                    value,
                    squared,
                    sigma,
                    weight,
                    line: line_num,
                });
            }
            "solver" => {
                if tokens.len() != 3 {
                    return Err(syntax(line_num, 1, "solver takes: key value".into()));
                }
                let key = tokens[1];
                if !SOLVER_KEYS.contains(&key) {
                    return Err(syntax(
                        line_num,
                        token_column(raw_line, 1),
                        format!("unknown solver key '{key}' (one of {})", SOLVER_KEYS.join(", ")),
                    ));
                }
                overrides.push((key.to_string(), parse_num(tokens[2], 2, "solver value")?));
            }
            "weight-matrix" | "weights" => return Err(ParseError::WeightMatrix { line: line_num }),
            other => {
                return Err(syntax(line_num, 1, format!("unknown directive '{other}'")));
            }
        }
    }

    if !header_seen {
        return Err(ParseError::Semantic("empty input: missing format header".into()));
    }
    let mode = mode.ok_or_else(|| ParseError::Semantic("missing 'mode' directive".into()))?;

    // pair observations to stations, exactly one each, in station order
    let index: HashMap<&str, usize> =
        stations.iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).collect();
    let n = stations.len();
    let mut values = vec![f64::NAN; n];
    let mut weights = vec![1.0; n];
    let mut given_squared = vec![true; n];
    let mut sigmas = vec![None; n];
    let mut seen = vec![false; n];
    for obs in &raw_obs {
        let Some(&i) = index.get(obs.station.as_str()) else {
            return Err(ParseError::Semantic(format!(
                "observation references unknown station '{}' (line {})",
                obs.station, obs.line
            )));
        };
        if seen[i] {
            return Err(ParseError::Semantic(format!(
                "duplicate observation for station '{}' (line {})",
                obs.station, obs.line
            )));
        }
        seen[i] = true;
        values[i] = if obs.squared { obs.value } else { obs.value * obs.value };
        weights[i] = obs.weight;
        given_squared[i] = obs.squared;
        sigmas[i] = obs.sigma;
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(ParseError::Semantic(format!(
            "station '{}' has no observation",
            stations[i].id
        )));
    }

    let observations =
        ObservationSet { values, weights, sigma0: sigma0.unwrap_or(1.0) };
    let z0 = if mode.is_planar() { z0 } else { None };
    let spec = ProblemSpec::new(stations, observations, mode, z0)?;
    Ok(ProblemDocument { spec, given_squared, distance_sigmas: sigmas, solver_overrides: overrides })
}

/// Canonical serialization; `parse_problem` of the output reproduces the
/// document exactly.
pub fn serialize_problem(doc: &ProblemDocument) -> String {
    let mut out = String::new();
    out.push_str(FORMAT_HEADER);
    out.push('\n');
    out.push_str(&format!("mode {}\n", doc.spec.mode));
    if let Some(z0) = doc.spec.z0 {
        out.push_str(&format!("z0 {}\n", fmt_f64(z0)));
    }
    if doc.spec.observations.sigma0 != 1.0 {
        out.push_str(&format!("sigma0 {}\n", fmt_f64(doc.spec.observations.sigma0)));
    }
    for st in &doc.spec.stations {
        out.push_str(&format!(
            "station {} {} {} {}\n",
            st.id,
            fmt_f64(st.u),
            fmt_f64(st.v),
            fmt_f64(st.w)
        ));
    }
    for (i, st) in doc.spec.stations.iter().enumerate() {
        let squared = doc.given_squared[i];
        let value = if squared {
            doc.spec.observations.values[i]
        } else {
            doc.spec.observations.values[i].sqrt()
        };
        let kind = if squared { "distance-squared" } else { "distance" };
        out.push_str(&format!("obs {} {} {}", st.id, kind, fmt_f64(value)));
        if let Some(sigma) = doc.distance_sigmas[i] {
            out.push_str(&format!(" sigma {}", fmt_f64(sigma)));
        }
        if doc.spec.observations.weights[i] != 1.0 {
            out.push_str(&format!(" weight {}", fmt_f64(doc.spec.observations.weights[i])));
        }
        out.push('\n');
    }
    for (key, value) in &doc.solver_overrides {
        out.push_str(&format!("solver {key} {}\n", fmt_f64(*value)));
    }
    out
}
