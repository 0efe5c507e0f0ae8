//! Subcommands `eig`, `solve`, `sweep` and `props`.
//!
//! Exit codes: 0 ok, 1 config error, 2 non-convergence, 3 infeasible λ,
//! 4 property failure. Warnings and errors go to the supplied stderr sink;
//! machine-readable results go to files under `--out`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExponentsConfig, LambdaConfig, RunConfig};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};
use crate::modular::DoublePhase;
use crate::nehari::{minimize_multistart, MinimizerResult, NehariOptions};
use crate::operator::Problem;
use crate::props::run_properties;
use crate::spectrum::{principal_eigenvalue, EigenOptions, EigenResult};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NONCONVERGENCE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_PROPERTY: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "dphase", version, about = "Double-phase Dirichlet eigenvalue solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the principal eigenvalue and eigenfunction
    Eig(CommonArgs),
    /// Minimize on the Nehari manifold at a single lambda
    Solve(CommonArgs),
    /// Sweep lambda and tabulate feasibility and energies as CSV
    Sweep(CommonArgs),
    /// Run the randomized property suite
    Props(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn main_with_args<I, T>(args: I, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = write!(stderr, "{e}");
            return code;
        }
    };
    run(&cli, stderr)
}

type Handler = fn(&RunConfig, &Path, &mut dyn Write) -> i32;

pub fn run(cli: &Cli, stderr: &mut dyn Write) -> i32 {
    let (args, cmd): (&CommonArgs, Handler) = match &cli.command {
        Command::Eig(a) => (a, cmd_eig),
        Command::Solve(a) => (a, cmd_solve),
        Command::Sweep(a) => (a, cmd_sweep),
        Command::Props(a) => (a, cmd_props),
    };
    match RunConfig::load(&args.config) {
        Ok(cfg) => cmd(&cfg, &args.out, stderr),
        Err(e) => fail(stderr, &e),
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NonConvergence { .. } | Error::ResidualAboveTolerance { .. } => EXIT_NONCONVERGENCE,
        Error::Infeasible { .. } => EXIT_INFEASIBLE,
        _ => EXIT_CONFIG,
    }
}

fn fail(stderr: &mut dyn Write, err: &Error) -> i32 {
    let _ = writeln!(stderr, "error: {err}");
    exit_code(err)
}

fn warn_all(stderr: &mut dyn Write, warnings: &[String]) {
    for w in warnings {
        let _ = writeln!(stderr, "warning: {w}");
    }
}

fn setup(cfg: &RunConfig, out: &Path, stderr: &mut dyn Write) -> Result<DoublePhase> {
    let (dp, warnings) = cfg.build()?;
    warn_all(stderr, &warnings);
    std::fs::create_dir_all(out)?;
    Ok(dp)
}

fn eig_options(cfg: &RunConfig, dp: &DoublePhase) -> EigenOptions {
    EigenOptions {
        tol: cfg.solver.eig_tol,
        max_iters: cfg.solver.max_iters,
        epsilon: Some(cfg.epsilon(dp)),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// One value per line in node order, shortest round-trip decimal form.
pub fn write_nodal(path: &Path, u: &ScalarField) -> Result<()> {
    let mut text = String::with_capacity(u.values().len() * 24);
    for v in u.values() {
        let _ = writeln!(text, "{v:e}");
    }
    std::fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct EigReport<'a> {
    lambda_hat1: f64,
    residual: f64,
    iterations: usize,
    grid: &'a GridSpec,
    exponents: &'a ExponentsConfig,
}

pub fn cmd_eig(cfg: &RunConfig, out: &Path, stderr: &mut dyn Write) -> i32 {
    let res = (|| -> Result<()> {
        let dp = setup(cfg, out, stderr)?;
        let eig = principal_eigenvalue(&dp, &eig_options(cfg, &dp))?;
        write_json(
            &out.join("eig_report.json"),
            &EigReport {
                lambda_hat1: eig.lambda_hat1,
                residual: eig.residual,
                iterations: eig.iterations,
                grid: &cfg.grid,
                exponents: &cfg.exponents,
            },
        )?;
        write_nodal(&out.join("eigenfunction.txt"), &eig.eigenfunction)
    })();
    match res {
        Ok(()) => EXIT_OK,
        Err(e) => fail(stderr, &e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveSummary {
    pub lambda: f64,
    pub lambda_hat1: f64,
    pub feasible: bool,
    pub m_lambda: Option<f64>,
    pub residual: Option<f64>,
    pub min_u: Option<f64>,
    pub max_u: Option<f64>,
    pub sup_u: Option<f64>,
    /// Iterations of the winning start; `None` if it failed to converge.
    #[serde(skip)]
    pub iterations: Option<usize>,
}

enum SolveOutcome {
    Converged(SolveSummary, MinimizerResult),
    Infeasible(SolveSummary),
    NotConverged(SolveSummary, Error),
}

fn solve_at(cfg: &RunConfig, dp: &DoublePhase, eig: &EigenResult, lambda: f64) -> Result<SolveOutcome> {
    let prob = Problem::new(dp.clone(), lambda, cfg.epsilon(dp))?;
    let mut summary = SolveSummary {
        lambda,
        lambda_hat1: eig.lambda_hat1,
        feasible: lambda > eig.lambda_hat1,
        m_lambda: None,
        residual: None,
        min_u: None,
        max_u: None,
        sup_u: None,
        iterations: None,
    };
    if !summary.feasible {
        return Ok(SolveOutcome::Infeasible(summary));
    }
    let opts = NehariOptions {
        tol: cfg.solver.tol,
        max_iters: cfg.solver.max_iters,
        lambda_hat1: Some(eig.lambda_hat1),
        eig: eig_options(cfg, dp),
    };
    match minimize_multistart(&prob, &opts, cfg.solver.multistarts, cfg.solver.seed) {
        Ok(ms) => {
            let best = ms.best;
            summary.m_lambda = Some(best.m_lambda);
            summary.residual = Some(best.residual);
            summary.min_u = Some(best.positivity.0);
            summary.max_u = Some(best.positivity.1);
            summary.sup_u = Some(best.u_hat.sup_norm());
            if best.converged {
                summary.iterations = Some(best.iterations);
                Ok(SolveOutcome::Converged(summary, best))
            } else {
                let err = Error::ResidualAboveTolerance {
                    residual: best.residual,
                    tol: cfg.solver.tol,
                };
                Ok(SolveOutcome::NotConverged(summary, err))
            }
        }
        Err(Error::Infeasible { .. }) => {
            summary.feasible = false;
            Ok(SolveOutcome::Infeasible(summary))
        }
        Err(e @ Error::NonConvergence { .. }) => Ok(SolveOutcome::NotConverged(summary, e)),
        Err(e) => Err(e),
    }
}

fn resolve_lambda(cfg: &RunConfig, lambda_hat1: f64) -> Result<f64> {
    match cfg.lambda {
        Some(LambdaConfig::Absolute(v)) => Ok(v),
        Some(LambdaConfig::Factor(f)) => Ok(f * lambda_hat1),
        None => Err(Error::Config("solve requires \"lambda\"".into())),
    }
}

pub fn cmd_solve(cfg: &RunConfig, out: &Path, stderr: &mut dyn Write) -> i32 {
    let res = (|| -> Result<i32> {
        if cfg.lambda.is_none() {
            return Err(Error::Config("solve requires \"lambda\"".into()));
        }
        let dp = setup(cfg, out, stderr)?;
        let eig = principal_eigenvalue(&dp, &eig_options(cfg, &dp))?;
        let lambda = resolve_lambda(cfg, eig.lambda_hat1)?;
        let report = out.join("solve_report.json");
        match solve_at(cfg, &dp, &eig, lambda)? {
            SolveOutcome::Converged(summary, best) => {
                warn_all(stderr, &best.warnings);
                write_json(&report, &summary)?;
                write_nodal(&out.join("solution.txt"), &best.u_hat)?;
                Ok(EXIT_OK)
            }
            SolveOutcome::Infeasible(summary) => {
                write_json(&report, &summary)?;
                let _ = writeln!(
                    stderr,
                    "infeasible: lambda = {lambda:e} does not exceed lambda_hat1 = {:e}",
                    eig.lambda_hat1
                );
                Ok(EXIT_INFEASIBLE)
            }
            SolveOutcome::NotConverged(summary, err) => {
                write_json(&report, &summary)?;
                Ok(fail(stderr, &err))
            }
        }
    })();
    match res {
        Ok(code) => code,
        Err(e) => fail(stderr, &e),
    }
}

pub const SWEEP_HEADER: &str = "lambda,feasible,m_lambda,residual,min_u,max_u,iters";

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

/// One CSV row; `iters` is -1 for a feasible λ where the solver failed.
pub fn sweep_row(s: &SolveSummary) -> String {
    let iters = match (s.feasible, s.iterations) {
        (false, _) => 0,
        (true, Some(n)) => n as i64,
        (true, None) => -1,
    };
    format!(
        "{:.16e},{},{},{},{},{},{}",
        s.lambda,
        s.feasible,
        opt_cell(s.m_lambda),
        opt_cell(s.residual),
        opt_cell(s.min_u),
        opt_cell(s.max_u),
        iters
    )
}

pub fn cmd_sweep(cfg: &RunConfig, out: &Path, stderr: &mut dyn Write) -> i32 {
    let res = (|| -> Result<i32> {
        let Some(sweep) = cfg.sweep else {
            return Err(Error::Config("sweep requires \"sweep\"".into()));
        };
        let dp = setup(cfg, out, stderr)?;
        let eig = principal_eigenvalue(&dp, &eig_options(cfg, &dp))?;
        let lambdas = sweep.values(eig.lambda_hat1);
        let rows: Vec<Result<SolveSummary>> = lambdas
            .par_iter()
            .map(|&l| {
                Ok(match solve_at(cfg, &dp, &eig, l)? {
                    SolveOutcome::Converged(s, _) | SolveOutcome::Infeasible(s) => s,
                    SolveOutcome::NotConverged(s, _) => s,
                })
            })
            .collect();
        let mut csv = String::from(SWEEP_HEADER);
        csv.push('\n');
        for r in rows {
            csv.push_str(&sweep_row(&r?));
            csv.push('\n');
        }
        std::fs::write(out.join("sweep.csv"), csv)?;
        Ok(EXIT_OK)
    })();
    match res {
        Ok(code) => code,
        Err(e) => fail(stderr, &e),
    }
}

pub fn cmd_props(cfg: &RunConfig, out: &Path, stderr: &mut dyn Write) -> i32 {
    let res = (|| -> Result<i32> {
        if cfg.props.trials == 0 {
            return Err(Error::Config("props.trials must be >= 1 (a vacuous run proves nothing)".into()));
        }
        let dp = setup(cfg, out, stderr)?;
        let lambda = match cfg.lambda {
            Some(LambdaConfig::Absolute(v)) => v,
            Some(LambdaConfig::Factor(f)) => f * principal_eigenvalue(&dp, &eig_options(cfg, &dp))?.lambda_hat1,
            None => 1.0,
        };
        let eps = cfg.epsilon(&dp);
        let prob = Problem::new(dp, lambda, eps)?;
        let report = run_properties(&prob, cfg.props.trials, cfg.props.seed)?;
        write_json(&out.join("props_report.json"), &report)?;
        match report.first_failure {
            None => Ok(EXIT_OK),
            Some(name) => {
                let _ = writeln!(stderr, "property failed: {name}");
                Ok(EXIT_PROPERTY)
            }
        }
    })();
    match res {
        Ok(code) => code,
        Err(e) => fail(stderr, &e),
    }
}
