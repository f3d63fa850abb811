//! `morita-lab gen | verify | demo | report`.
//!
//! Exit codes: 0 all checks pass, 1 a check failed or a bundle did not
//! validate, 2 the input could not be used (bad flags, missing files,
//! malformed scenarios).

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fdca::relative_commutant;
use crate::generator::{generate, Bundle, MapKind, Scenario, PRESETS};
use crate::io::{load_bundle, load_report, load_scenario, write_bundle, LoadError, VALIDATION_FILE};
use crate::linalg::{inverse, ComplexMatrix, ALGEBRAIC_TOL};
use crate::modular::ModularAutomorphism;
use crate::report::{CheckEntry, Report};
use crate::verify::{parse_suites, run_suites, validation_entries, Suite, VerifyOptions};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "morita-lab", version, about = "Transfer of bimodule maps between Morita equivalent inclusions")]
pub struct Cli {
    /// Seed for instance generation and sampled checks.
    #[arg(long, global = true, env = "MORITA_LAB_SEED", default_value_t = 1)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate an instance bundle and its validation report.
    Gen(GenArgs),
    /// Run verification suites on a bundle.
    Verify(VerifyArgs),
    /// Weighted-trace walkthrough on ℂ ⊂ M₂.
    Demo(DemoArgs),
    /// Render a saved report (file or bundle directory).
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Args, Debug, Clone)]
pub struct Source {
    /// One of the shipped presets.
    #[arg(long, conflicts_with = "scenario")]
    pub preset: Option<String>,
    /// Scenario JSON file.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct Output {
    /// Override every tolerance equal to the default algebraic tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[command(flatten)]
    pub source: Source,
    /// Bundle directory; defaults to `instances/<name>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Bundle directory or `bundle.json`.
    #[arg(conflicts_with_all = ["preset", "scenario"])]
    pub bundle: Option<PathBuf>,
    #[command(flatten)]
    pub source: Source,
    /// Comma-separated suites, or `all`.
    #[arg(long, default_value = "all")]
    pub suite: String,
    /// Also write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct DemoArgs {
    /// Diagonal of h ∈ A′∩C = M₂, e.g. `0.9,0.1`.
    #[arg(long, value_delimiter = ',')]
    pub h: Option<Vec<f64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Report JSON, or a bundle directory (reads its validation report).
    pub path: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

/// Error plus the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: Error,
}

impl Failure {
    fn input(error: Error) -> Self {
        Failure { code: EXIT_INPUT, error }
    }
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        let code = match error {
            Error::InvalidScenario(_) | Error::InvalidInput(_) | Error::Io(_) | Error::Json(_) => EXIT_INPUT,
            _ => EXIT_FAIL,
        };
        Failure { code, error }
    }
}

/// Clap-parsed entry point; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(cli.seed, &a),
        Command::Verify(a) => cmd_verify(cli.seed, &a),
        Command::Demo(a) => cmd_demo(cli.seed, &a),
        Command::Report(a) => cmd_report(&a),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.error);
            f.code
        }
    }
}

fn checked_tol(tol: Option<f64>) -> std::result::Result<Option<f64>, Failure> {
    match tol {
        Some(t) if !(t.is_finite() && t >= f64::EPSILON) => Err(Failure::input(Error::InvalidInput(format!(
            "--tol {t} is below machine epsilon {:e}",
            f64::EPSILON
        )))),
        other => Ok(other),
    }
}

/// Replace the default algebraic tolerance by `tol` and re-evaluate.
pub fn apply_tolerance(entries: &mut [CheckEntry], tol: f64) {
    for c in entries.iter_mut().filter(|c| c.tolerance == ALGEBRAIC_TOL) {
        c.tolerance = tol;
        c.pass = c.residual <= tol;
    }
}

fn scenario_from(seed: u64, source: &Source) -> std::result::Result<Scenario, Failure> {
    match (&source.preset, &source.scenario) {
        (Some(name), _) => Scenario::preset(name, seed).map_err(Failure::input),
        (None, Some(path)) => load_scenario(path).map_err(Failure::input),
        (None, None) => Err(Failure::input(Error::InvalidInput(format!(
            "give --preset ({}) or --scenario <path>",
            PRESETS.join(", ")
        )))),
    }
}

fn generated(scenario: &Scenario) -> std::result::Result<Bundle, Failure> {
    scenario.check().map_err(Failure::input)?;
    Ok(generate(scenario)?)
}

fn emit(report: &Report, format: Format) -> Result<()> {
    match format {
        Format::Text => println!("{report}"),
        Format::Json => println!("{}", serde_json::to_string_pretty(report)?),
    }
    Ok(())
}

fn exit_for(report: &Report) -> i32 {
    if report.pass {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

fn write_report<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

pub fn cmd_gen(seed: u64, args: &GenArgs) -> std::result::Result<i32, Failure> {
    let tol = checked_tol(args.output.tol)?;
    let scenario = scenario_from(seed, &args.source)?;
    let bundle = generated(&scenario)?;
    let mut entries = validation_entries(&bundle);
    if let Some(t) = tol {
        apply_tolerance(&mut entries, t);
    }
    let report = Report::new(scenario.name.clone(), entries);
    let dir = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("instances").join(&scenario.name));
    let path = write_bundle(&dir, &bundle, &report)?;
    emit(&report, args.output.format)?;
    if args.output.format == Format::Text {
        println!("wrote {}", path.display());
    }
    Ok(exit_for(&report))
}

pub fn cmd_verify(seed: u64, args: &VerifyArgs) -> std::result::Result<i32, Failure> {
    let tol = checked_tol(args.output.tol)?;
    let suites: Vec<Suite> = parse_suites(&args.suite).map_err(Failure::input)?;
    let bundle = match &args.bundle {
        Some(path) => match load_bundle(path) {
            Ok(b) => b,
            Err(LoadError::Input(e)) => return Err(Failure::input(e)),
            Err(LoadError::Invalid(e)) => {
                let mut entry = CheckEntry::flag("bundle.load", false, "bundle parses and validates");
                entry.paper_ref = format!("bundle parses and validates: {e}");
                let report = Report::new(path.display().to_string(), vec![entry]);
                emit(&report, args.output.format)?;
                if let Some(out) = &args.out {
                    write_report(out, &report)?;
                }
                return Ok(EXIT_FAIL);
            }
        },
        None => generated(&scenario_from(seed, &args.source)?)?,
    };
    let opts = VerifyOptions {
        seed,
        ..VerifyOptions::default()
    };
    let mut entries = validation_entries(&bundle);
    entries.extend(run_suites(&bundle, &suites, &opts));
    if let Some(t) = tol {
        apply_tolerance(&mut entries, t);
    }
    let report = Report::new(bundle.scenario.name.clone(), entries);
    emit(&report, args.output.format)?;
    if let Some(out) = &args.out {
        write_report(out, &report)?;
    }
    Ok(exit_for(&report))
}

/// Demo output: the report plus the measured `θ(e₁₂)` factor.
#[derive(Clone, Debug, Serialize)]
pub struct DemoReport {
    #[serde(flatten)]
    pub report: Report,
    pub h: [f64; 2],
    pub theta_e12_factor: f64,
    pub theta_is_identity: bool,
}

pub const DEFAULT_H: [f64; 2] = [2.0 / 3.0, 1.0 / 3.0];

/// The weighted-trace walkthrough: φ = E(h·) on ℂ ⊂ M₂ with its corner
/// transfer, modular automorphism and the oracle θ(x) = h x h⁻¹.
pub fn demo_report(seed: u64, h: [f64; 2]) -> Result<DemoReport> {
    if !(h.iter().all(|w| w.is_finite() && *w > 0.0)) {
        return Err(Error::InvalidInput(format!("h = {h:?} must have positive finite entries")));
    }
    let mut scenario = Scenario::preset("weighted-m2", seed)?;
    scenario.name = "demo".into();
    scenario.map = MapKind::WeightedTrace { weights: h.to_vec() };
    let bundle = generate(&scenario)?;
    let mut entries = validation_entries(&bundle);
    entries.extend(run_suites(&bundle, &[Suite::Construction, Suite::Modular], &VerifyOptions {
        seed,
        ..VerifyOptions::default()
    }));

    let comm = relative_commutant(bundle.pair.left())?;
    let qb = bundle
        .quasi_basis
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("weighted-trace bundle has no quasi-basis".into()))?;
    let theta = crate::modular::theta_from_quasibasis(qb, &comm)?;
    let rot = &bundle.rotation;
    let hm = &(rot * &ComplexMatrix::real_diagonal(&h)) * &rot.adjoint();
    let h_inv = inverse(&hm)?;
    let oracle = ModularAutomorphism::from_fn(&comm, |x| &(&hm * x) * &h_inv)?;
    entries.push(CheckEntry::new(
        "demo.theta_oracle",
        theta.distance(&oracle),
        ALGEBRAIC_TOL,
        "θ^φ(x) = h x h⁻¹",
    ));
    let e12 = &(rot * &ComplexMatrix::matrix_unit(2, 0, 1)) * &rot.adjoint();
    let image = theta.apply(&e12);
    let factor = e12.hs_inner(&image) / e12.hs_inner(&e12);
    let expected = h[0] / h[1];
    entries.push(CheckEntry::new(
        "demo.theta_e12_factor",
        (factor.re - expected).abs().max(factor.im.abs()).max((&image - &e12.scale(factor)).frobenius_norm()),
        ALGEBRAIC_TOL * expected.max(1.0),
        "θ^φ(e₁₂) = (h₁/h₂)·e₁₂",
    ));
    let id = ModularAutomorphism::identity(&comm);
    let theta_is_identity = theta.distance(&id) <= ALGEBRAIC_TOL;
    Ok(DemoReport {
        report: Report::new("demo", entries),
        h,
        theta_e12_factor: factor.re,
        theta_is_identity,
    })
}

pub fn cmd_demo(seed: u64, args: &DemoArgs) -> std::result::Result<i32, Failure> {
    let tol = checked_tol(args.output.tol)?;
    let h = match &args.h {
        Some(v) if v.len() == 2 => [v[0], v[1]],
        Some(v) => return Err(Failure::input(Error::InvalidInput(format!("--h needs two entries, got {}", v.len())))),
        None => DEFAULT_H,
    };
    let mut demo = demo_report(seed, h).map_err(|e| match e {
        Error::InvalidInput(_) | Error::InvalidScenario(_) => Failure::input(e),
        other => Failure::from(other),
    })?;
    if let Some(t) = tol {
        let mut checks = std::mem::take(&mut demo.report.checks);
        apply_tolerance(&mut checks, t);
        demo.report = Report::new("demo", checks);
    }
    match args.output.format {
        Format::Text => {
            println!("{}", demo.report);
            println!("h = diag({}, {})", h[0], h[1]);
            println!("θ(e₁₂) = {:.6}·e₁₂  (h₁/h₂ = {:.6})", demo.theta_e12_factor, h[0] / h[1]);
            if demo.theta_is_identity {
                println!("θ = id (tracial weight)");
            }
        }
        Format::Json => println!("{}", serde_json::to_string_pretty(&demo).map_err(Error::from)?),
    }
    if let Some(out) = &args.out {
        write_report(out, &demo)?;
    }
    Ok(exit_for(&demo.report))
}

pub fn cmd_report(args: &ReportArgs) -> std::result::Result<i32, Failure> {
    let path = if args.path.is_dir() {
        args.path.join(VALIDATION_FILE)
    } else {
        args.path.clone()
    };
    let report = load_report(&path).map_err(Failure::input)?;
    emit(&report, args.format)?;
    Ok(exit_for(&report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_override_touches_only_default_entries() {
        let mut entries = vec![
            CheckEntry::new("a", 1e-10, ALGEBRAIC_TOL, ""),
            CheckEntry::new("b", 1e-10, 1e-8, ""),
        ];
        apply_tolerance(&mut entries, 1e-12);
        assert!(!entries[0].pass);
        assert!(entries[1].pass);
        assert_eq!(entries[1].tolerance, 1e-8);
    }

    #[test]
    fn tolerance_below_epsilon_is_an_input_error() {
        assert_eq!(checked_tol(Some(1e-20)).unwrap_err().code, EXIT_INPUT);
        assert_eq!(checked_tol(Some(f64::NAN)).unwrap_err().code, EXIT_INPUT);
        assert!(checked_tol(Some(1e-9)).unwrap().is_some());
    }

    #[test]
    fn demo_factors() {
        let d = demo_report(1, DEFAULT_H).unwrap();
        assert!(d.report.pass, "{}", d.report);
        assert!((d.theta_e12_factor - 2.0).abs() < 1e-9);
        let t = demo_report(1, [0.5, 0.5]).unwrap();
        assert!(t.theta_is_identity);
        let n = demo_report(1, [0.9, 0.1]).unwrap();
        assert!((n.theta_e12_factor - 9.0).abs() < 1e-8);
        assert!(n.report.pass);
    }

    #[test]
    fn cli_parses() {
        let cli = Cli::try_parse_from(["morita-lab", "verify", "--preset", "trivial", "--suite", "modular"]).unwrap();
        assert!(matches!(cli.command, Command::Verify(_)));
        assert!(Cli::try_parse_from(["morita-lab", "verify", "x", "--preset", "trivial"]).is_err());
        let cli = Cli::try_parse_from(["morita-lab", "demo", "--h", "0.9,0.1"]).unwrap();
        match cli.command {
            Command::Demo(d) => assert_eq!(d.h, Some(vec![0.9, 0.1])),
            _ => panic!("demo"),
        }
    }
}
