//! `trilat` — spatial intersection (trilateration) solver.
//!
//! Subcommands: `solve` (and its cross-checking variant `verify`),
//! `simulate` for synthetic scenario generation, and `montecarlo` for
//! empirical covariance validation. Set `TRILAT_LOG=debug` for solver
//! diagnostics on stderr.
//!
//! Exit codes: 0 success, 2 parse/usage error, 3 degenerate geometry,
//! 4 no convergence, 5 algebraic/numeric cross-check failure.

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use trilat_core::covariance::distance_sigma_to_l_sigma;
use trilat_core::model::{Mode, ProblemSpec, Station};
use trilat_core::problem::{parse_problem, serialize_problem, ProblemDocument};
use trilat_core::report::{
    render_montecarlo_structured, render_montecarlo_text, render_solution_structured,
    render_solution_text, OutputFormat,
};
use trilat_core::simulate::{generate, monte_carlo, truth_sidecar, Scenario};
use trilat_core::solve::{solve_problem, SolveError, SolveOptions};

const EXIT_PARSE: u8 = 2;
const EXIT_DEGENERATE: u8 = 3;
const EXIT_NO_CONVERGENCE: u8 = 4;
const EXIT_CROSS_CHECK: u8 = 5;

#[derive(Parser)]
#[command(name = "trilat", version, about = "Spatial intersection by nonlinear least squares")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Planar2,
    Planar3,
    Spatial,
}

impl From<ModeArg> for Mode {
    fn from(arg: ModeArg) -> Mode {
        match arg {
            ModeArg::Planar2 => Mode::Planar2,
            ModeArg::Planar3 => Mode::Planar3,
            ModeArg::Spatial => Mode::Spatial,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Text,
    Structured,
}

impl From<FormatArg> for OutputFormat {
    fn from(arg: FormatArg) -> OutputFormat {
        match arg {
            FormatArg::Text => OutputFormat::Text,
            FormatArg::Structured => OutputFormat::Structured,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Problem file path ('-' for stdin).
    problem: String,
    /// Cross-check the primary path against the independent one.
    #[arg(long)]
    verify: bool,
    /// Attach covariance propagation (planar2; needs per-observation sigmas).
    #[arg(long)]
    covariance: bool,
    /// Override the problem file's mode.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Override or supply the fixed plane height (meters).
    #[arg(long)]
    z0: Option<f64>,
    /// Recorded in the report; solving itself is deterministic.
    #[arg(long)]
    seed: Option<u64>,
    /// Extra solver configuration file ("key value" per line).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "structured")]
    format: FormatArg,
}

#[derive(Args)]
struct SimulateArgs {
    /// Stations as "u,v,w;u,v,w;..." (meters).
    #[arg(long)]
    stations: String,
    /// True point as "x,y" or "x,y,z" (meters).
    #[arg(long, name = "true-point")]
    true_point: String,
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[arg(long)]
    z0: Option<f64>,
    /// Distance-noise standard deviation in meters.
    #[arg(long, name = "noise-sigma", default_value_t = 0.0)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Problem file destination; the truth sidecar goes to "<output>.truth".
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct MonteCarloArgs {
    /// Problem file path ('-' for stdin). Needs per-observation sigmas.
    problem: String,
    #[arg(long)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "structured")]
    format: FormatArg,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file and report all stationary points.
    Solve(SolveArgs),
    /// Solve with a mandatory algebraic/numeric cross-check.
    Verify(SolveArgs),
    /// Generate a synthetic problem file plus a truth sidecar.
    Simulate(SimulateArgs),
    /// Empirical covariance of the estimate under observation noise.
    Montecarlo(MonteCarloArgs),
}

fn fail(code: u8, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("trilat: {message}");
    ExitCode::from(code)
}

fn read_input(path: &str) -> std::io::Result<String> {
    if path == "-" {
        use std::io::Read;
        let mut buffer = String::new();
        std::io::stdin().read_to_string(&mut buffer)?;
        Ok(buffer)
    } else {
        std::fs::read_to_string(path)
    }
}

fn write_output(path: &Option<PathBuf>, content: &str) -> std::io::Result<()> {
    match path {
        Some(path) => std::fs::write(path, content),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn load_document(args: &SolveArgs) -> Result<ProblemDocument, ExitCode> {
    let text = read_input(&args.problem)
        .map_err(|e| fail(EXIT_PARSE, format!("cannot read '{}': {e}", args.problem)))?;
    let mut doc =
        parse_problem(&text).map_err(|e| fail(EXIT_PARSE, format!("parse error: {e}")))?;
    if args.mode.is_some() || args.z0.is_some() {
        let mode = args.mode.map(Mode::from).unwrap_or(doc.spec.mode);
        let z0 = if mode.is_planar() { args.z0.or(doc.spec.z0) } else { None };
        let respec = ProblemSpec::new(
            doc.spec.stations.clone(),
            doc.spec.observations.clone(),
            mode,
            z0,
        )
        .map_err(|e| fail(EXIT_PARSE, format!("mode/z0 override invalid: {e}")))?;
        doc.spec = respec;
    }
    Ok(doc)
}

fn apply_config_file(
    doc: &ProblemDocument,
    path: &Option<PathBuf>,
) -> Result<trilat_core::SolverConfig, ExitCode> {
    let mut config = doc.solver_config();
    let Some(path) = path else { return Ok(config) };
    let text = std::fs::read_to_string(path)
        .map_err(|e| fail(EXIT_PARSE, format!("cannot read config '{}': {e}", path.display())))?;
    for (lineno, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.first() == Some(&"solver") {
            tokens.remove(0);
        }
        let bad = |msg: String| fail(EXIT_PARSE, format!("config line {}: {msg}", lineno + 1));
        if tokens.len() != 2 {
            return Err(bad("expected 'key value'".into()));
        }
        let value: f64 =
            tokens[1].parse().map_err(|_| bad(format!("invalid value '{}'", tokens[1])))?;
        match tokens[0] {
            "max_iterations" => config.max_iterations = value as usize,
            "step_tolerance" => config.step_tolerance = value,
            "residual_tolerance" => config.residual_tolerance = value,
            "damping_initial" => config.damping_initial = value,
            "multistart_count" => config.multistart_count = value as usize,
            "grid_resolution" => config.grid_resolution = value as usize,
            "search_box" => config.search_box = value,
            other => return Err(bad(format!("unknown solver key '{other}'"))),
        }
    }
    config.validate().map_err(|e| fail(EXIT_PARSE, e))?;
    Ok(config)
}

fn sigma_l_from_doc(doc: &ProblemDocument) -> Result<nalgebra::Matrix2<f64>, String> {
    if doc.spec.mode != Mode::Planar2 {
        return Err("covariance propagation is planar2-only".into());
    }
    let sigmas: Vec<f64> = doc
        .distance_sigmas
        .iter()
        .map(|s| s.ok_or("covariance requested but an observation is missing its sigma"))
        .collect::<Result<_, _>>()?;
    let distances =
        [doc.spec.observations.values[0].sqrt(), doc.spec.observations.values[1].sqrt()];
    distance_sigma_to_l_sigma(distances, [sigmas[0], sigmas[1]]).map_err(|e| e.to_string())
}

fn run_solve(args: &SolveArgs, force_verify: bool) -> ExitCode {
    let doc = match load_document(args) {
        Ok(doc) => doc,
        Err(code) => return code,
    };
    let config = match apply_config_file(&doc, &args.config) {
        Ok(config) => config,
        Err(code) => return code,
    };
    let sigma_l = if args.covariance {
        match sigma_l_from_doc(&doc) {
            Ok(sigma) => Some(sigma),
            Err(message) => return fail(EXIT_PARSE, message),
        }
    } else {
        None
    };
    let options = SolveOptions { verify: args.verify || force_verify, sigma_l, config };
    let report = match solve_problem(&doc.spec, &options) {
        Ok(report) => report,
        Err(err @ SolveError::DegenerateGeometry(_)) => return fail(EXIT_DEGENERATE, err),
        Err(err @ SolveError::NoConvergence(_)) => return fail(EXIT_NO_CONVERGENCE, err),
    };
    let rendered = match args.format.into() {
        OutputFormat::Structured => render_solution_structured(&doc, &report, args.seed),
        OutputFormat::Text => render_solution_text(&doc, &report),
    };
    if let Err(e) = write_output(&args.output, &rendered) {
        return fail(EXIT_PARSE, format!("cannot write output: {e}"));
    }
    if let Some(check) = &report.cross_check {
        if !check.agreement {
            return fail(
                EXIT_CROSS_CHECK,
                format!(
                    "algebraic/numeric cross-check failed: max mismatch {:.3e} exceeds {:.3e}",
                    check.max_mismatch, check.tolerance
                ),
            );
        }
    }
    ExitCode::SUCCESS
}

fn parse_triples(text: &str, what: &str) -> Result<Vec<[f64; 3]>, String> {
    let mut out = Vec::new();
    for (i, chunk) in text.split(';').enumerate() {
        let parts: Vec<&str> = chunk.split(',').map(str::trim).collect();
        if !(parts.len() == 2 || parts.len() == 3) {
            return Err(format!("{what} entry {i} must be 'x,y' or 'x,y,z', got '{chunk}'"));
        }
        let mut triple = [0.0f64; 3];
        for (j, part) in parts.iter().enumerate() {
            triple[j] = part
                .parse()
                .map_err(|_| format!("{what} entry {i}: invalid number '{part}'"))?;
        }
        out.push(triple);
    }
    Ok(out)
}

fn run_simulate(args: &SimulateArgs) -> ExitCode {
    let stations = match parse_triples(&args.stations, "station") {
        Ok(list) => list
            .into_iter()
            .enumerate()
            .map(|(i, [u, v, w])| Station::new(format!("S{}", i + 1), u, v, w))
            .collect::<Vec<_>>(),
        Err(message) => return fail(EXIT_PARSE, message),
    };
    let true_point = match parse_triples(&args.true_point, "true point") {
        Ok(list) if list.len() == 1 => (list[0][0], list[0][1], list[0][2]),
        Ok(_) => return fail(EXIT_PARSE, "true point must be a single coordinate tuple"),
        Err(message) => return fail(EXIT_PARSE, message),
    };
    let scenario = Scenario {
        stations,
        mode: args.mode.into(),
        z0: args.z0,
        true_point,
        noise_sigma: args.noise_sigma,
        seed: args.seed,
    };
    let doc = match generate(&scenario) {
        Ok(doc) => doc,
        Err(err) => return fail(EXIT_PARSE, err),
    };
    if let Err(e) = std::fs::write(&args.output, serialize_problem(&doc)) {
        return fail(EXIT_PARSE, format!("cannot write '{}': {e}", args.output.display()));
    }
    let sidecar_path = sidecar_path(&args.output);
    if let Err(e) = std::fs::write(&sidecar_path, truth_sidecar(&scenario)) {
        return fail(EXIT_PARSE, format!("cannot write '{}': {e}", sidecar_path.display()));
    }
    ExitCode::SUCCESS
}

fn sidecar_path(problem: &Path) -> PathBuf {
    let mut name = problem.as_os_str().to_owned();
    name.push(".truth");
    PathBuf::from(name)
}

fn run_montecarlo(args: &MonteCarloArgs) -> ExitCode {
    let text = match read_input(&args.problem) {
        Ok(text) => text,
        Err(e) => return fail(EXIT_PARSE, format!("cannot read '{}': {e}", args.problem)),
    };
    let doc = match parse_problem(&text) {
        Ok(doc) => doc,
        Err(e) => return fail(EXIT_PARSE, format!("parse error: {e}")),
    };
    let config = match apply_config_file(&doc, &args.config) {
        Ok(config) => config,
        Err(code) => return code,
    };
    let stats = match monte_carlo(&doc, args.trials, args.seed, &config) {
        Ok(stats) => stats,
        Err(trilat_core::simulate::MonteCarloError::Solve(err)) => {
            return match err {
                SolveError::DegenerateGeometry(_) => fail(EXIT_DEGENERATE, err),
                SolveError::NoConvergence(_) => fail(EXIT_NO_CONVERGENCE, err),
            }
        }
        Err(err) => return fail(EXIT_PARSE, err),
    };
    let rendered = match args.format.into() {
        OutputFormat::Structured => render_montecarlo_structured(&stats),
        OutputFormat::Text => render_montecarlo_text(&stats),
    };
    if let Err(e) = write_output(&args.output, &rendered) {
        return fail(EXIT_PARSE, format!("cannot write output: {e}"));
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("TRILAT_LOG", "off"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Solve(args) => run_solve(args, false),
        Command::Verify(args) => run_solve(args, true),
        Command::Simulate(args) => run_simulate(args),
        Command::Montecarlo(args) => run_montecarlo(args),
    }
}
