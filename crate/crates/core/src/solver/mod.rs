//! Block-iterative primal-dual splitting for the network equilibrium
//! inclusion.
//!
//! The iteration keeps a flow `x`, an arc dual `x*` and a potential `v*`.
//! At iteration `n` only the arcs in `A_n` evaluate `J_{γQ_j}` and
//! `J_{μR_j}`, and only the nodes in `N_n` evaluate `J_{σS_i}`; every other
//! block reuses its cached output. The cached pieces define a half-space
//! containing the solution set, and the state moves by a relaxed
//! projection onto it.
//!
//! The arc dual moves as `x*_{n+1} = x*_n - θ_n u_n`.

mod config;
mod schedule;
mod step;

use std::time::Instant;

use crate::operators::Problem;
use crate::vector::{ArcDual, Flow, Potential};

pub use config::{ConfigError, Relaxation, SchedulerSpec, SolverConfig, StepParam};
pub use schedule::{sweep_violations, ActiveSet, BlockSelector};
pub use step::{residual, step, step_length, NumericalError, StepStats, Workspace};

/// Primal-dual iterate `(x, x*, v*)` plus the iteration counter.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: Flow,
    pub x_dual: ArcDual,
    pub v: Potential,
    pub iteration: u64,
}

impl SolverState {
    /// All-zero starting point.
    pub fn zeros(problem: &Problem) -> Self {
        let net = &problem.network;
        let c = net.num_commodities();
        Self {
            x: Flow::zeros(net.num_arcs(), c),
            x_dual: ArcDual::zeros(net.num_arcs(), c),
            v: Potential::zeros(net.num_nodes(), c),
            iteration: 0,
        }
    }

    pub fn matches(&self, problem: &Problem) -> bool {
        let net = &problem.network;
        let c = net.num_commodities();
        let ok = |b: &crate::vector::BlockVector, n: usize| b.blocks() == n && b.dim() == c;
        ok(&self.x, net.num_arcs())
            && ok(&self.x_dual, net.num_arcs())
            && ok(&self.v, net.num_nodes())
    }
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub n: u64,
    pub tau: f64,
    pub pi: f64,
    pub theta: f64,
    pub lambda: f64,
    pub active_arcs: usize,
    pub active_nodes: usize,
    /// Residual of the iterate produced by this step, when it was checked.
    pub residual: Option<f64>,
    pub millis: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Converged,
    IterLimit,
    NumericalFailure(NumericalError),
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub state: SolverState,
    pub trace: Vec<TraceRecord>,
    pub termination: Termination,
    /// Last computed residual.
    pub residual: f64,
    /// Steps taken in this run.
    pub iterations: u64,
}

/// Stateful driver: owns the block selector, the cached workspace and the
/// optional worker pool.
pub struct Solver<'a> {
    problem: &'a Problem,
    config: &'a SolverConfig,
    selector: BlockSelector,
    ws: Workspace,
    scratch: Workspace,
    pool: Option<rayon::ThreadPool>,
    n: u64,
}

impl<'a> Solver<'a> {
    pub fn new(problem: &'a Problem, config: &'a SolverConfig) -> Result<Self, ConfigError> {
        config.validate(&problem.network)?;
        let net = &problem.network;
        let selector = BlockSelector::new(
            config.scheduler.clone(),
            config.sweep_bound,
            net.num_arcs(),
            net.num_nodes(),
        )?;
        let pool = if config.threads > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(config.threads)
                    .build()
                    .map_err(|e| ConfigError::Pool(e.to_string()))?,
            )
        } else {
            None
        };
        Ok(Self {
            problem,
            config,
            selector,
            ws: Workspace::for_problem(problem),
            scratch: Workspace::for_problem(problem),
            pool,
            n: 0,
        })
    }

    pub fn workspace(&self) -> &Workspace {
        &self.ws
    }

    /// Iterations taken so far.
    pub fn iteration(&self) -> u64 {
        self.n
    }

    /// Selects the blocks for the next iteration and performs it.
    pub fn step(
        &mut self,
        state: &mut SolverState,
    ) -> Result<(StepStats, ActiveSet), NumericalError> {
        let active = self.selector.select(self.n);
        let lambda = self.config.relaxation.at(self.n);
        let stats = step::step_in(
            self.problem,
            self.config,
            state,
            &mut self.ws,
            &active,
            lambda,
            self.pool.as_ref(),
        )?;
        self.n += 1;
        Ok((stats, active))
    }

    pub fn residual(&mut self, state: &SolverState) -> f64 {
        step::residual_with(
            self.problem,
            self.config,
            state,
            &mut self.scratch,
            self.pool.as_ref(),
        )
    }
}

/// Iterates until the residual drops to `tol` or `max_iter` steps are taken.
pub fn run(
    problem: &Problem,
    config: &SolverConfig,
    initial: SolverState,
) -> Result<RunOutcome, ConfigError> {
    run_with(problem, config, initial, |_| {}, |_| true)
}

/// Like [`run`], calling `observer` after every step. Convergence is only
/// declared when `accept` also approves the iterate whose residual is below
/// tolerance.
pub fn run_with<O, A>(
    problem: &Problem,
    config: &SolverConfig,
    initial: SolverState,
    mut observer: O,
    accept: A,
) -> Result<RunOutcome, ConfigError>
where
    O: FnMut(&TraceRecord),
    A: Fn(&SolverState) -> bool,
{
    if !initial.matches(problem) {
        return Err(ConfigError::StateDimension);
    }
    let mut solver = Solver::new(problem, config)?;
    let mut state = initial;
    let mut trace = Vec::new();
    let start = Instant::now();

    let mut residual = solver.residual(&state);
    let finish = |state, trace, termination, residual, iterations| {
        Ok(RunOutcome {
            state,
            trace,
            termination,
            residual,
            iterations,
        })
    };
    if !residual.is_finite() {
        let err = NumericalError {
            iteration: state.iteration,
            quantity: "residual",
        };
        return finish(
            state,
            trace,
            Termination::NumericalFailure(err),
            residual,
            0,
        );
    }
    if residual <= config.tol && accept(&state) {
        return finish(state, trace, Termination::Converged, residual, 0);
    }

    let mut k = 0u64;
    loop {
        if k >= config.max_iter {
            return finish(state, trace, Termination::IterLimit, residual, k);
        }
        let (stats, active) = match solver.step(&mut state) {
            Ok(v) => v,
            Err(e) => return finish(state, trace, Termination::NumericalFailure(e), residual, k),
        };
        k += 1;
        let check =
            k.is_multiple_of(config.check_interval) || stats.tau == 0.0 || k == config.max_iter;
        let mut record = TraceRecord {
            n: k - 1,
            tau: stats.tau,
            pi: stats.pi,
            theta: stats.theta,
            lambda: stats.lambda,
            active_arcs: active.arcs.len(),
            active_nodes: active.nodes.len(),
            residual: None,
            millis: start.elapsed().as_secs_f64() * 1e3,
        };
        let mut converged = false;
        if check {
            residual = solver.residual(&state);
            record.residual = Some(residual);
            if !residual.is_finite() {
                observer(&record);
                trace.push(record);
                let err = NumericalError {
                    iteration: state.iteration,
                    quantity: "residual",
                };
                return finish(
                    state,
                    trace,
                    Termination::NumericalFailure(err),
                    residual,
                    k,
                );
            }
            converged = residual <= config.tol && accept(&state);
        }
        observer(&record);
        trace.push(record);
        if converged {
            return finish(state, trace, Termination::Converged, residual, k);
        }
    }
}
