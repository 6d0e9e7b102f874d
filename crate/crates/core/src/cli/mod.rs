//! Command-line front end: reads a JSON config, dispatches to the solver
//! modules and writes CSV/JSON artifacts.

pub mod config;
mod output;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::approx::{convergence_study, ApproximationPlan};
use crate::bvpsolve::{characteristic_matrix_with, PreparedProblem, SolveOptions};
use crate::error::BvpError;
use crate::odecore::DEFAULT_TOL;
use crate::paramlab::{
    check_b_asymptotics, check_condition0, check_limit_condition_i, check_limit_condition_ii, solution_norm,
    two_sided_estimate, ProbeSet, DEFAULT_PROBE_DEGREE,
};

pub use config::{parse_config, Config, ConfigError};
use output::{write_csv, write_json};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SINGULAR: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Solve the problem and sample the solution.
    Solve,
    /// Report the characteristic matrix.
    Analyze,
    /// Two-sided discrepancy estimate over a parameter family.
    Sweep,
    /// Convergence study of polynomial multipoint approximants.
    Approximate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Analyze => "analyze",
            Command::Sweep => "sweep",
            Command::Approximate => "approximate",
        }
    }
}

#[derive(Debug, Clone, Parser)]
#[command(
    name = "genbvp",
    version,
    about = "Linear boundary-value problems with generic boundary operators"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub options: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON configuration file.
    #[arg(long, global = true, default_value = "config.json")]
    pub input: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Integration tolerance.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub tol: Option<f64>,
    /// Absolute singular-value cutoff for rank decisions.
    #[arg(long = "rank-tol", global = true, allow_negative_numbers = true)]
    pub rank_tol: Option<f64>,
    /// Seed for random probes.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for the numerical kernels.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Sample points in CSV output.
    #[arg(long, global = true, default_value_t = 1001)]
    pub grid: usize,
}

/// Everything one invocation needs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub input_path: PathBuf,
    pub output_dir: PathBuf,
    pub tol: Option<f64>,
    pub rank_tol: Option<f64>,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub grid_points: usize,
}

impl From<Cli> for RunConfig {
    fn from(cli: Cli) -> Self {
        let o = cli.options;
        Self {
            command: cli.command,
            input_path: o.input,
            output_dir: o.out,
            tol: o.tol,
            rank_tol: o.rank_tol,
            seed: o.seed,
            jobs: o.jobs,
            grid_points: o.grid,
        }
    }
}

/// Structured diagnostic written to stderr and `error.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostic {
    pub exit_code: i32,
    pub kind: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column: Option<usize>,
}

impl Diagnostic {
    fn from_config(e: ConfigError) -> Self {
        Self {
            exit_code: EXIT_PARSE,
            kind: "ConfigError".into(),
            message: e.message,
            path: (!e.path.is_empty()).then_some(e.path),
            line: e.line,
            column: e.column,
        }
    }

    fn from_bvp(e: &BvpError) -> Self {
        Self {
            exit_code: exit_code(e),
            kind: error_kind(e).into(),
            message: e.to_string(),
            path: None,
            line: None,
            column: None,
        }
    }

    fn usage(kind: &str, message: impl Into<String>) -> Self {
        Self {
            exit_code: EXIT_PARSE,
            kind: kind.into(),
            message: message.into(),
            path: None,
            line: None,
            column: None,
        }
    }
}

/// Exit status for a library error.
pub fn exit_code(e: &BvpError) -> i32 {
    match e {
        BvpError::SingularProblem { .. } | BvpError::NeverWellPosed => EXIT_SINGULAR,
        BvpError::IntegrationFailure { .. } => EXIT_NUMERICAL,
        _ => EXIT_PARSE,
    }
}

fn error_kind(e: &BvpError) -> &'static str {
    match e {
        BvpError::InvalidInterval { .. } => "InvalidInterval",
        BvpError::InvalidExponent(_) => "InvalidExponent",
        BvpError::UnsupportedExponent(_) => "UnsupportedExponent",
        BvpError::UnsupportedDerivative { .. } => "UnsupportedDerivative",
        BvpError::DimensionMismatch(_) => "DimensionMismatch",
        BvpError::PointOutOfInterval { .. } => "PointOutOfInterval",
        BvpError::OrderOutOfRange { .. } => "OrderOutOfRange",
        BvpError::InvalidPartition(_) => "InvalidPartition",
        BvpError::IntegrationFailure { .. } => "IntegrationFailure",
        BvpError::SingularProblem { .. } => "SingularProblem",
        BvpError::NeverWellPosed => "NeverWellPosed",
        BvpError::InvalidInput(_) => "InvalidInput",
    }
}

/// Reports a command-line usage error on stderr; returns the exit status.
pub fn usage_error(message: &str) -> i32 {
    let diag = Diagnostic::usage("UsageError", message.trim_end());
    eprintln!("{}", serde_json::to_string(&diag).unwrap_or_else(|_| diag.message.clone()));
    diag.exit_code
}

/// Runs one command; returns the exit status. Diagnostics go to stderr and
/// to `error.json` in the output directory when it can be created.
pub fn run(config: &RunConfig) -> i32 {
    match try_run(config) {
        Ok(()) => EXIT_OK,
        Err(diag) => {
            let text = serde_json::to_string(&diag).unwrap_or_else(|_| diag.message.clone());
            eprintln!("{text}");
            if std::fs::create_dir_all(&config.output_dir).is_ok() {
                let _ = write_json(&config.output_dir.join("error.json"), &diag);
            }
            diag.exit_code
        }
    }
}

fn try_run(config: &RunConfig) -> Result<(), Diagnostic> {
    for (name, v) in [("--tol", config.tol), ("--rank-tol", config.rank_tol)] {
        if let Some(v) = v {
            if !(v.is_finite() && v > 0.0) {
                return Err(Diagnostic::usage("InvalidArgument", format!("{name} must be positive, got {v}")));
            }
        }
    }
    if config.grid_points < 2 {
        return Err(Diagnostic::usage("InvalidArgument", "--grid needs at least 2 points"));
    }
    if config.jobs == Some(0) {
        return Err(Diagnostic::usage("InvalidArgument", "--jobs must be at least 1"));
    }
    let text = std::fs::read_to_string(&config.input_path).map_err(|e| {
        Diagnostic::usage("IoError", format!("cannot read {}: {e}", config.input_path.display()))
    })?;
    let cfg = parse_config(&text).map_err(Diagnostic::from_config)?;
    std::fs::create_dir_all(&config.output_dir).map_err(|e| {
        Diagnostic::usage("IoError", format!("cannot create {}: {e}", config.output_dir.display()))
    })?;
    let opts = SolveOptions {
        tol: config.tol.or(cfg.solver.tol).unwrap_or(DEFAULT_TOL),
        rank_tol: config.rank_tol.or(cfg.solver.rank_tol),
    };
    let work = || dispatch(config, &cfg, &opts);
    let result = match config.jobs {
        None => work(),
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| Diagnostic::usage("InvalidArgument", e.to_string()))?
            .install(work),
    };
    result.map_err(|e| match e {
        Failure::Bvp(e) => Diagnostic::from_bvp(&e),
        Failure::Io(msg) => Diagnostic {
            exit_code: EXIT_NUMERICAL,
            kind: "IoError".into(),
            message: msg,
            path: None,
            line: None,
            column: None,
        },
        Failure::Missing(section) => Diagnostic {
            path: Some(section.into()),
            ..Diagnostic::usage("ConfigError", format!("this command needs a `{section}` section"))
        },
    })
}

enum Failure {
    Bvp(BvpError),
    Io(String),
    Missing(&'static str),
}

impl From<BvpError> for Failure {
    fn from(e: BvpError) -> Self {
        Failure::Bvp(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn dispatch(config: &RunConfig, cfg: &Config, opts: &SolveOptions) -> Result<(), Failure> {
    let out = config.output_dir.as_path();
    match config.command {
        Command::Analyze => analyze(out, cfg, opts),
        Command::Solve => solve(out, cfg, opts, config.grid_points),
        Command::Sweep => sweep(out, cfg, opts),
        Command::Approximate => approximate(out, cfg, opts, config.seed),
    }
}

fn analyze(out: &Path, cfg: &Config, opts: &SolveOptions) -> Result<(), Failure> {
    let p = &cfg.problem;
    let m = characteristic_matrix_with(p.system(), p.boundary(), opts)?;
    let report = json!({
        "boundary_kind": p.boundary().kind_name(),
        "well_posed": m.is_well_posed(),
        "char_matrix": m,
    });
    write_json(&out.join("analysis.json"), &report)?;
    Ok(())
}

fn solve(out: &Path, cfg: &Config, opts: &SolveOptions, grid: usize) -> Result<(), Failure> {
    let p = &cfg.problem;
    let index = p.index();
    let prepared = PreparedProblem::new(p.system(), p.boundary(), opts)?;
    let sol = prepared.solve(p.rhs(), p.target())?;
    let norm = solution_norm(&sol, index.p)?;
    let report = json!({
        "interval": [p.system().interval().a(), p.system().interval().b()],
        "index": {"n": index.n, "r": index.r, "m": index.m, "p": output::finite_or_string(index.p)},
        "sobolev_norm": norm,
        "residual_ode": sol.residual_ode,
        "residual_boundary": sol.residual_boundary,
        "constants": sol.constants.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>(),
        "condition": prepared.char_matrix().condition,
        "y": sol.y,
    });
    write_json(&out.join("solution.json"), &report)?;
    let iv = p.system().interval();
    let ts: Vec<f64> = (0..grid)
        .map(|i| {
            if i + 1 == grid {
                iv.b()
            } else {
                iv.a() + iv.length() * i as f64 / (grid - 1) as f64
            }
        })
        .collect();
    let mut header = vec!["t".to_string()];
    for i in 0..index.m {
        for s in 0..sol.derivs.len() {
            header.push(format!("y{i}_d{s}_re"));
            header.push(format!("y{i}_d{s}_im"));
        }
    }
    let mut rows = Vec::with_capacity(grid);
    let mut buf = vec![crate::C64::new(0.0, 0.0); index.m];
    for &t in &ts {
        let mut row = vec![t];
        let vals: Vec<Vec<crate::C64>> = sol
            .derivs
            .iter()
            .map(|d| {
                d.eval_into(t, &mut buf);
                buf.clone()
            })
            .collect();
        for i in 0..index.m {
            for v in &vals {
                row.push(v[i].re);
                row.push(v[i].im);
            }
        }
        rows.push(row);
    }
    write_csv(&out.join("solution.csv"), &header, rows.iter().map(|r| r.iter().map(|&x| output::Cell::Float(x)).collect()))?;
    Ok(())
}

fn sweep(out: &Path, cfg: &Config, opts: &SolveOptions) -> Result<(), Failure> {
    let family = cfg.family.as_ref().ok_or(Failure::Missing("family"))?;
    let c0 = check_condition0(family, opts)?;
    let probes = ProbeSet::chebyshev(family.index(), family.interval(), DEFAULT_PROBE_DEGREE)?;
    let limit_i = check_limit_condition_i(family)?;
    let limit_ii = check_limit_condition_ii(family, &probes)?;
    let asym = match check_b_asymptotics(family) {
        Ok(a) => Some(a),
        Err(BvpError::UnsupportedExponent(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let flag = |f: fn(&crate::paramlab::AsymptoticsReport) -> bool| asym.as_ref().map(f);
    let verdict = json!({
        "condition0": c0.holds,
        "limitI": limit_i.converges,
        "limitII": limit_ii.converges,
        "a": flag(|a| a.a),
        "b": flag(|a| a.b),
        "c": flag(|a| a.c),
        "d": flag(|a| a.d),
        "strong": flag(|a| a.strong),
        "uniform": flag(|a| a.uniform),
    });
    write_json(&out.join("verdict.json"), &verdict)?;
    let report = two_sided_estimate(family, &probes, opts)?;
    let header: Vec<String> = ["label", "distance", "d_tilde", "solution_error", "ratio"].map(String::from).to_vec();
    let rows = report.rows.iter().map(|r| {
        vec![
            output::Cell::Text(r.label.clone()),
            output::Cell::Float(r.distance),
            output::Cell::Float(r.d_tilde),
            output::Cell::Float(r.solution_error),
            r.ratio.map_or(output::Cell::Empty, output::Cell::Float),
        ]
    });
    write_csv(&out.join("sweep.csv"), &header, rows)?;
    let full = json!({
        "verdict": verdict,
        "condition0": c0,
        "limit_i": limit_i,
        "limit_ii": limit_ii,
        "asymptotics": asym,
        "discrepancy": report,
        "band_width": report.band_width(),
    });
    write_json(&out.join("report.json"), &full)?;
    Ok(())
}

fn approximate(out: &Path, cfg: &Config, opts: &SolveOptions, seed: u64) -> Result<(), Failure> {
    let wanted = cfg.plan.as_ref().ok_or(Failure::Missing("plan"))?;
    let mut plan = ApproximationPlan::new(cfg.problem.clone(), wanted.degrees.clone(), &wanted.rule, wanted.probes, seed)?;
    plan.probe_degree = wanted.probe_degree;
    let study = convergence_study(&plan, opts)?;
    let header: Vec<String> = [
        "k",
        "cells",
        "coeff_error",
        "rhs_error",
        "boundary_gap",
        "solution_error",
        "inverse_gap",
        "kernel_gap",
        "well_posed",
    ]
    .map(String::from)
    .to_vec();
    let rows = study.rows.iter().map(|r| {
        use output::Cell::*;
        vec![
            Int(r.k as u64),
            Int(r.cells as u64),
            Float(r.coeff_error),
            Float(r.rhs_error),
            Float(r.boundary_gap),
            Float(r.solution_error),
            Float(r.inverse_gap),
            Float(r.kernel_gap),
            Text(r.well_posed.to_string()),
        ]
    });
    write_csv(&out.join("convergence.csv"), &header, rows)?;
    write_json(&out.join("summary.json"), &study.summary)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&BvpError::NeverWellPosed), EXIT_SINGULAR);
        assert_eq!(
            exit_code(&BvpError::SingularProblem { dim_ker: 1, dim_coker: 1, condition: f64::INFINITY }),
            EXIT_SINGULAR
        );
        assert_eq!(exit_code(&BvpError::IntegrationFailure { t: 0.5, reason: "x".into() }), EXIT_NUMERICAL);
        assert_eq!(exit_code(&BvpError::InvalidInput("x".into())), EXIT_PARSE);
    }

    #[test]
    fn parses_flags() {
        let cli = Cli::try_parse_from(["genbvp", "solve", "--input", "a.json", "--grid", "11", "--seed", "7"]).unwrap();
        let rc = RunConfig::from(cli);
        assert_eq!(rc.command, Command::Solve);
        assert_eq!(rc.grid_points, 11);
        assert_eq!(rc.seed, 7);
        assert!(Cli::try_parse_from(["genbvp", "frobnicate"]).is_err());
    }
}
