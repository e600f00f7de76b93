//! Multicommodity network equilibrium solver.
//!
//! A problem is a directed network carrying a set of commodities. Every arc
//! carries a flow-tension relation made of two maximally monotone operators
//! (a capacity operator `Q_j` and a constraint cone `R_j`), and every node
//! carries a divergence-potential relation `S_i`. The solver only touches
//! these operators through their resolvents, and may activate a subset of
//! the arc and node blocks at each iteration.
//!
//! ```
//! use netequil_core::oracle::TwoArcInstance;
//! use netequil_core::{run, SolverConfig, SolverState, Termination};
//!
//! # fn main() -> Result<(), Box<dyn std::error::Error>> {
//! let problem = TwoArcInstance::new([1.0, 2.0], [1.0, 1.0], 3.0)?.problem()?;
//! let out = run(&problem, &SolverConfig::default(), SolverState::zeros(&problem))?;
//! assert_eq!(out.termination, Termination::Converged);
//! assert!((out.state.x.as_slice()[0] - 2.0).abs() < 1e-5);
//! # Ok(())
//! # }
//! ```

pub mod network;
pub mod operators;
pub mod oracle;
pub mod selftest;
pub mod solver;
pub mod vector;

pub use network::{Network, NetworkError};
pub use operators::{
    ArcOperator, BoxSet, NodeOperator, OperatorError, Problem, ProblemError, ScalarCapacity,
    ScalarFunction, SeparableLift,
};
pub use solver::{
    residual, run, BlockSelector, Relaxation, RunOutcome, SchedulerSpec, SolverConfig, SolverState,
    StepParam, Termination, TraceRecord,
};
pub use vector::{ArcDual, BlockVector, Flow, Potential};
