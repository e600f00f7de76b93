//! Command-line interface.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use netequil_core::oracle::wardrop_report;
use netequil_core::solver::run_with;
use netequil_core::{selftest, SolverState, Termination, TraceRecord};

use crate::format::{
    parse_problem, parse_solution, serialize_solution, Overrides, ProblemFile, SchedulerChoice,
    SolutionFile,
};

pub const TRACE_HEADER: &str = "n,tau,pi,theta,lambda,active_arcs,active_nodes,residual,millis";

#[derive(Debug, Parser)]
#[command(
    name = "netequil",
    version,
    about = "Multicommodity network equilibrium solver"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a problem file.
    Solve(SolveArgs),
    /// Verify that a solution satisfies the equilibrium conditions.
    Check(CheckArgs),
    /// Run the built-in numerical property checks.
    Selftest {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub problem: PathBuf,
    /// Solution file; written to standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-iteration CSV trace.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<u64>,
    /// full, roundrobin:K or randomsweep:p
    #[arg(long)]
    pub scheduler: Option<SchedulerChoice>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, short)]
    pub quiet: bool,
    /// Worker threads for arc block evaluation.
    #[arg(long, env = "NETEQUIL_THREADS")]
    pub threads: Option<usize>,
    /// Record wall-clock milliseconds in the trace (makes it
    /// non-reproducible).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    pub problem: PathBuf,
    pub solution: PathBuf,
    /// Defaults to the problem file's tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
}

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Input = 1,
    NotConverged = 2,
    Numerical = 3,
}

impl From<Exit> for ExitCode {
    fn from(e: Exit) -> Self {
        ExitCode::from(e as u8)
    }
}

pub fn run(cli: Cli) -> Exit {
    match cli.command {
        Command::Solve(args) => solve(&args),
        Command::Check(args) => check(&args),
        Command::Selftest { seed } => run_selftest(seed),
    }
}

fn read(path: &Path) -> Result<String, Exit> {
    fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        Exit::Input
    })
}

fn load_problem(path: &Path, quiet: bool) -> Result<ProblemFile, Exit> {
    let text = read(path)?;
    match parse_problem(&text) {
        Ok(parsed) => {
            if !quiet {
                for w in &parsed.warnings {
                    eprintln!("{}: {w}", path.display());
                }
            }
            Ok(parsed.value)
        }
        Err(e) => {
            for d in &e.diagnostics {
                eprintln!("{}: {d}", path.display());
            }
            Err(Exit::Input)
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn trace_row(r: &TraceRecord, timing: bool) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}",
        r.n,
        r.tau,
        r.pi,
        r.theta,
        r.lambda,
        r.active_arcs,
        r.active_nodes,
        fmt_opt(r.residual),
        fmt_opt(timing.then_some(r.millis)),
    )
}

fn solve(args: &SolveArgs) -> Exit {
    match solve_inner(args) {
        Ok(e) | Err(e) => e,
    }
}

fn solve_inner(args: &SolveArgs) -> Result<Exit, Exit> {
    let file = load_problem(&args.problem, args.quiet)?;
    let overrides = Overrides {
        tol: args.tol,
        max_iter: args.max_iter,
        scheduler: args.scheduler,
        seed: args.seed,
        threads: args.threads,
    };
    let cfg = file.config(&overrides).map_err(|e| {
        eprintln!("error: {e}");
        Exit::Input
    })?;
    let problem = &file.problem;

    let mut trace = match &args.trace {
        Some(path) => {
            let f = fs::File::create(path).map_err(|e| {
                eprintln!("error: cannot create {}: {e}", path.display());
                Exit::Input
            })?;
            let mut w = BufWriter::new(f);
            writeln!(w, "{TRACE_HEADER}").map_err(|_| Exit::Input)?;
            Some(w)
        }
        None => None,
    };
    let mut trace_err: Option<io::Error> = None;
    let tol = cfg.tol;
    let outcome = run_with(
        problem,
        &cfg,
        SolverState::zeros(problem),
        |r| {
            if let (Some(w), None) = (trace.as_mut(), trace_err.as_ref()) {
                if let Err(e) = writeln!(w, "{}", trace_row(r, args.timing)) {
                    trace_err = Some(e);
                }
            }
        },
        |s| {
            wardrop_report(problem, &s.x, &s.v, tol)
                .map(|r| r.residual <= tol)
                .unwrap_or(false)
        },
    )
    .map_err(|e| {
        eprintln!("error: {e}");
        Exit::Input
    })?;
    if let Some(mut w) = trace {
        if let Some(e) = trace_err.or_else(|| w.flush().err()) {
            eprintln!("error: writing trace: {e}");
            return Err(Exit::Input);
        }
    }

    let sol = SolutionFile::from_outcome(&outcome);
    let text = serialize_solution(&problem.network, &sol);
    match &args.out {
        Some(path) => fs::write(path, text).map_err(|e| {
            eprintln!("error: cannot write {}: {e}", path.display());
            Exit::Input
        })?,
        None => print!("{text}"),
    }

    let exit = match &outcome.termination {
        Termination::Converged => Exit::Ok,
        Termination::IterLimit => Exit::NotConverged,
        Termination::NumericalFailure(e) => {
            eprintln!("error: {e}");
            Exit::Numerical
        }
    };
    if !args.quiet {
        eprintln!(
            "{:?} after {} iterations, residual {:e}",
            outcome.termination, outcome.iterations, outcome.residual
        );
    }
    Ok(exit)
}

fn check(args: &CheckArgs) -> Exit {
    let file = match load_problem(&args.problem, true) {
        Ok(f) => f,
        Err(e) => return e,
    };
    let text = match read(&args.solution) {
        Ok(t) => t,
        Err(e) => return e,
    };
    let sol = match parse_solution(&text, &file.problem.network) {
        Ok(s) => s,
        Err(e) => {
            for d in &e.diagnostics {
                eprintln!("{}: {d}", args.solution.display());
            }
            return Exit::Input;
        }
    };
    let tol = args
        .tol
        .or(file.solver.tol)
        .unwrap_or(netequil_core::SolverConfig::default().tol);
    let report = match wardrop_report(&file.problem, &sol.flow, &sol.potential, tol) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return Exit::Input;
        }
    };
    println!("wardrop residual {:e} (tol {:e})", report.residual, tol);
    if let Some(d) = &report.diagnostic {
        println!("{d}");
    }
    if report.residual <= tol {
        Exit::Ok
    } else {
        if let Some(w) = &report.worst {
            println!("largest violation at {w:?}");
        }
        Exit::NotConverged
    }
}

fn run_selftest(seed: u64) -> Exit {
    let results = selftest::run_all(seed);
    let mut ok = true;
    for r in &results {
        println!(
            "{} {}: {}",
            if r.passed { "pass" } else { "FAIL" },
            r.name,
            r.detail
        );
        ok &= r.passed;
    }
    if ok {
        Exit::Ok
    } else {
        Exit::NotConverged
    }
}
