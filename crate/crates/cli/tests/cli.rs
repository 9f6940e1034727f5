//! End-to-end tests of the `trilat` binary: exit codes, report
//! determinism, and the simulate -> solve -> montecarlo flow.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn trilat() -> Command {
    Command::new(env!("CARGO_BIN_EXE_trilat"))
}

fn run(args: &[&str]) -> Output {
    trilat().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path
}

const REFERENCE: &str = "\
format trilat-problem v1
mode planar2
z0 0
station S1 0 0 0
station S2 4 0 0
obs S1 distance-squared 5 sigma 0.001
obs S2 distance-squared 13 sigma 0.001
";

#[test]
fn solve_reference_reports_both_minima() {
    let dir = tempfile::tempdir().unwrap();
    let problem = write(dir.path(), "ref.trilat", REFERENCE);
    let out = run(&["solve", problem.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("format trilat-report v1"));
    assert!(text.contains("classification minimum"));
    assert!(text.contains("provenance algebraic"));
    // y values +-2 appear among candidates
    assert!(text.contains("y 2.000000000000") || text.contains("y 1.999999999999"));
    assert!(text.contains("y -2.000000000000") || text.contains("y -1.999999999999"));
}

#[test]
fn verify_sets_agreement_flag_and_mixed_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let problem = write(dir.path(), "ref.trilat", REFERENCE);
    let out = run(&["verify", problem.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("agreement true"));
    assert!(text.contains("provenance algebraic"));
    assert!(text.contains("provenance numeric"));
}

#[test]
fn parse_error_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let problem = write(dir.path(), "bad.trilat", "format trilat-problem v1\nmode planar9\n");
    let out = run(&["solve", problem.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("parse error"));
}

#[test]
fn missing_file_exits_2() {
    let out = run(&["solve", "/nonexistent/problem.trilat"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn collinear_spatial_exits_3_naming_the_condition() {
    let dir = tempfile::tempdir().unwrap();
    let problem = write(
        dir.path(),
        "collinear.trilat",
        "format trilat-problem v1\nmode spatial\n\
         station A 0 0 0\nstation B 10 0 0\nstation C 20 0 0\nstation D 30 0 0\n\
         obs A distance 10\nobs B distance 10\nobs C distance 10\nobs D distance 10\n",
    );
    let out = run(&["solve", problem.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("linearly dependent"), "{stderr}");
}

#[test]
fn symmetric_instance_reports_numeric_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let problem = write(
        dir.path(),
        "symmetric.trilat",
        "format trilat-problem v1\nmode planar2\nz0 0\n\
         station A -1 0 0\nstation B 1 0 0\n\
         obs A distance-squared 2\nobs B distance-squared 2\n",
    );
    let out = run(&["solve", problem.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("fallback true"));
    assert!(text.contains("provenance numeric"));
    // both symmetric minima at (0, +-1)
    assert!(text.contains("y 1.000000000000") || text.contains("y 9.99999999999"));
    assert!(text.contains("y -1.000000000000") || text.contains("y -9.99999999999"));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let problem = write(dir.path(), "ref.trilat", REFERENCE);
    let a = run(&["solve", problem.to_str().unwrap(), "--verify", "--seed", "42"]);
    let b = run(&["solve", problem.to_str().unwrap(), "--verify", "--seed", "42"]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);

    let mc1 = run(&["montecarlo", problem.to_str().unwrap(), "--trials", "200", "--seed", "7"]);
    let mc2 = run(&["montecarlo", problem.to_str().unwrap(), "--trials", "200", "--seed", "7"]);
    assert!(mc1.status.success(), "{}", String::from_utf8_lossy(&mc1.stderr));
    assert_eq!(mc1.stdout, mc2.stdout);
}

#[test]
fn simulate_noise_free_emits_exact_distances_and_truth() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("sim.trilat");
    let out = run(&[
        "simulate",
        "--stations",
        "0,0,0;4,0,0",
        "--true-point",
        "1,2",
        "--mode",
        "planar2",
        "--z0",
        "0",
        "--seed",
        "5",
        "--output",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let problem = std::fs::read_to_string(&out_path).unwrap();
    // observations are plain distances sqrt(5), sqrt(13)
    assert!(problem.contains("obs S1 distance 2.236067977"), "{problem}");
    assert!(problem.contains("obs S2 distance 3.605551275"), "{problem}");
    let truth = std::fs::read_to_string(dir.path().join("sim.trilat.truth")).unwrap();
    assert!(truth.contains("format trilat-truth v1"));
    assert!(truth.contains("x 1.0000000000000000e0"));
    assert!(truth.contains("y 2.0000000000000000e0"));

    // identical seeds give identical files
    let rerun_path = dir.path().join("sim2.trilat");
    let rerun = run(&[
        "simulate",
        "--stations",
        "0,0,0;4,0,0",
        "--true-point",
        "1,2",
        "--mode",
        "planar2",
        "--z0",
        "0",
        "--seed",
        "5",
        "--output",
        rerun_path.to_str().unwrap(),
    ]);
    assert!(rerun.status.success());
    assert_eq!(problem, std::fs::read_to_string(&rerun_path).unwrap());
}

#[test]
fn simulate_then_solve_recovers_truth() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("sim.trilat");
    let sim = run(&[
        "simulate",
        "--stations",
        "0,0,0;400,30,0;100,500,0",
        "--true-point",
        "120,180",
        "--mode",
        "planar3",
        "--z0",
        "0",
        "--output",
        out_path.to_str().unwrap(),
    ]);
    assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));
    let solve = run(&["solve", out_path.to_str().unwrap(), "--format", "text"]);
    assert!(solve.status.success());
    let text = String::from_utf8(solve.stdout).unwrap();
    assert!(text.contains("selected minimum: (120.0"), "{text}");
    assert!(text.contains(" 180.0"), "{text}");
}

#[test]
fn montecarlo_zero_trials_succeeds_empty() {
    let dir = tempfile::tempdir().unwrap();
    let problem = write(dir.path(), "ref.trilat", REFERENCE);
    let out = run(&["montecarlo", problem.to_str().unwrap(), "--trials", "0"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("trials 0"));
    assert!(text.contains("used 0"));
}

#[test]
fn montecarlo_without_sigmas_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let problem = write(
        dir.path(),
        "nosigma.trilat",
        "format trilat-problem v1\nmode planar2\nz0 0\n\
         station A 0 0 0\nstation B 4 0 0\n\
         obs A distance-squared 5\nobs B distance-squared 13\n",
    );
    let out = run(&["montecarlo", problem.to_str().unwrap(), "--trials", "10"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn covariance_flag_attaches_covariance() {
    let dir = tempfile::tempdir().unwrap();
    let problem = write(dir.path(), "ref.trilat", REFERENCE);
    let out = run(&["solve", problem.to_str().unwrap(), "--covariance"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("begin covariance"));
    assert!(text.contains("sigma-x"));
    assert!(text.contains("condition-number"));
}

#[test]
fn config_file_overrides_solver_settings() {
    let dir = tempfile::tempdir().unwrap();
    let problem = write(dir.path(), "ref.trilat", REFERENCE);
    let config = write(dir.path(), "solver.conf", "multistart_count 4\ngrid_resolution 21\n");
    let out = run(&[
        "solve",
        problem.to_str().unwrap(),
        "--verify",
        "--config",
        config.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let bad = write(dir.path(), "bad.conf", "grid_resolution 1\n");
    let out = run(&["solve", problem.to_str().unwrap(), "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_subcommand_exits_2() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stdin_input_works() {
    use std::io::Write as _;
    let mut child = trilat()
        .args(["solve", "-", "--format", "text"])
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.as_mut().unwrap().write_all(REFERENCE.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("selected minimum"));
}
