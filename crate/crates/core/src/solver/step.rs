//! One iteration of the block-iterative splitting scheme.

use rayon::prelude::*;
use thiserror::Error;

use super::config::SolverConfig;
use super::schedule::ActiveSet;
use super::SolverState;
use crate::operators::Problem;
#[cfg(test)]
use crate::vector::dot;
use crate::vector::{norm_sq, BlockVector};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("non-finite {quantity} at iteration {iteration}")]
pub struct NumericalError {
    pub iteration: u64,
    pub quantity: &'static str,
}

/// Cached block outputs and scratch space for [`step`].
///
/// Entries of inactive blocks keep the values of their last activation.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub q: BlockVector,
    pub q_dual: BlockVector,
    pub r: BlockVector,
    pub r_dual: BlockVector,
    pub s: BlockVector,
    pub s_dual: BlockVector,
    /// `t*_j`, per arc.
    pub arc_step: BlockVector,
    /// `u_j = r_j - q_j`, per arc.
    pub u: BlockVector,
    /// `t_i = s_i - div_i q`, per node.
    pub node_step: BlockVector,
    pub l_dual: BlockVector,
    pub l: BlockVector,
    pub tau: f64,
    pub pi: f64,
    pub theta: f64,
    div_q: BlockVector,
    tension_s: BlockVector,
    arc_mask: Vec<bool>,
    initialized: bool,
}

impl Workspace {
    pub fn new(num_arcs: usize, num_nodes: usize, dim: usize) -> Self {
        let arcs = || BlockVector::zeros(num_arcs, dim);
        let nodes = || BlockVector::zeros(num_nodes, dim);
        Self {
            q: arcs(),
            q_dual: arcs(),
            r: arcs(),
            r_dual: arcs(),
            s: nodes(),
            s_dual: nodes(),
            arc_step: arcs(),
            u: arcs(),
            node_step: nodes(),
            l_dual: arcs(),
            l: nodes(),
            tau: 0.0,
            pi: 0.0,
            theta: 0.0,
            div_q: nodes(),
            tension_s: arcs(),
            arc_mask: vec![false; num_arcs],
            initialized: false,
        }
    }

    pub fn for_problem(problem: &Problem) -> Self {
        let net = &problem.network;
        Self::new(net.num_arcs(), net.num_nodes(), net.num_commodities())
    }

    /// True once every block has been evaluated at least once.
    pub fn is_initialized(&self) -> bool {
        self.initialized
    }
}

/// Statistics of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub tau: f64,
    pub pi: f64,
    pub theta: f64,
    pub lambda: f64,
}

/// Relaxed projection coefficient: `λ max{π, 0}/τ` if `τ > 0`, else 0.
pub fn step_length(tau: f64, pi: f64, lambda: f64) -> f64 {
    if tau > 0.0 {
        lambda * pi.max(0.0) / tau
    } else {
        0.0
    }
}

#[allow(clippy::too_many_arguments)]
fn arc_block(
    problem: &Problem,
    cfg: &SolverConfig,
    state: &SolverState,
    j: usize,
    l_dual: &mut [f64],
    q: &mut [f64],
    q_dual: &mut [f64],
    r: &mut [f64],
    r_dual: &mut [f64],
) {
    let op = &problem.arcs[j];
    let gamma = cfg.gamma.get(j);
    let mu = cfg.mu.get(j);
    let x = state.x.block(j);
    let xd = state.x_dual.block(j);

    problem.network.tension_at_into(j, &state.v, l_dual);
    for (l, xs) in l_dual.iter_mut().zip(xd) {
        *l = xs - *l;
    }
    // q_dual doubles as scratch for the resolvent argument.
    for ((a, xi), l) in q_dual.iter_mut().zip(x).zip(l_dual.iter()) {
        *a = xi - gamma * l;
    }
    op.cost.resolvent_into(gamma, q_dual, q);
    for (((qd, xi), qi), l) in q_dual.iter_mut().zip(x).zip(q.iter()).zip(l_dual.iter()) {
        *qd = (xi - qi) / gamma - l;
    }

    for ((a, xi), xs) in r_dual.iter_mut().zip(x).zip(xd) {
        *a = xi + mu * xs;
    }
    op.constraint.project_into(r_dual, r);
    for (((rd, xi), ri), xs) in r_dual.iter_mut().zip(x).zip(r.iter()).zip(xd) {
        *rd = xs + (xi - ri) / mu;
    }
}

/// Evaluates the block quantities and `τ`, `π`, `θ` without moving the
/// state.
pub(crate) fn evaluate(
    problem: &Problem,
    cfg: &SolverConfig,
    state: &SolverState,
    ws: &mut Workspace,
    active: &ActiveSet,
    lambda: f64,
    pool: Option<&rayon::ThreadPool>,
) {
    let net = &problem.network;
    let dim = net.num_commodities();
    let full;
    let active = if ws.initialized {
        active
    } else {
        full = ActiveSet::full(net.num_arcs(), net.num_nodes());
        &full
    };

    match pool {
        Some(pool) if active.arcs.len() > 1 => {
            ws.arc_mask.fill(false);
            for &j in &active.arcs {
                ws.arc_mask[j] = true;
            }
            let mask = &ws.arc_mask;
            let (l_dual, q, q_dual, r, r_dual) = (
                ws.l_dual.as_mut_slice(),
                ws.q.as_mut_slice(),
                ws.q_dual.as_mut_slice(),
                ws.r.as_mut_slice(),
                ws.r_dual.as_mut_slice(),
            );
            pool.install(|| {
                l_dual
                    .par_chunks_mut(dim)
                    .zip(q.par_chunks_mut(dim))
                    .zip(q_dual.par_chunks_mut(dim))
                    .zip(r.par_chunks_mut(dim))
                    .zip(r_dual.par_chunks_mut(dim))
                    .enumerate()
                    .filter(|(j, _)| mask[*j])
                    .for_each(|(j, ((((ld, q), qd), r), rd))| {
                        arc_block(problem, cfg, state, j, ld, q, qd, r, rd)
                    });
            });
        }
        _ => {
            for &j in &active.arcs {
                let range = j * dim..(j + 1) * dim;
                arc_block(
                    problem,
                    cfg,
                    state,
                    j,
                    &mut ws.l_dual.as_mut_slice()[range.clone()],
                    &mut ws.q.as_mut_slice()[range.clone()],
                    &mut ws.q_dual.as_mut_slice()[range.clone()],
                    &mut ws.r.as_mut_slice()[range.clone()],
                    &mut ws.r_dual.as_mut_slice()[range],
                );
            }
        }
    }

    for &i in &active.nodes {
        let sigma = cfg.sigma.get(i);
        net.divergence_at_into(i, &state.x, ws.l.block_mut(i));
        let v = state.v.block(i);
        // s_dual holds the resolvent argument until s is known.
        for ((a, l), vi) in ws.s_dual.block_mut(i).iter_mut().zip(ws.l.block(i)).zip(v) {
            *a = l + sigma * vi;
        }
        problem.nodes[i].resolvent_into(sigma, ws.s_dual.block(i), ws.s.block_mut(i));
        let (l, s) = (ws.l.block(i), ws.s.block(i));
        for (((sd, vi), li), si) in ws.s_dual.block_mut(i).iter_mut().zip(v).zip(l).zip(s) {
            *sd = vi + (li - si) / sigma;
        }
    }
    ws.initialized = true;

    net.divergence_into(&ws.q, &mut ws.div_q);
    for i in 0..net.num_nodes() {
        for ((t, s), d) in ws
            .node_step
            .block_mut(i)
            .iter_mut()
            .zip(ws.s.block(i))
            .zip(ws.div_q.block(i))
        {
            *t = s - d;
        }
    }
    net.tension_into(&ws.s_dual, &mut ws.tension_s);
    for j in 0..net.num_arcs() {
        let (qd, rd, ts) = (
            ws.q_dual.block(j),
            ws.r_dual.block(j),
            ws.tension_s.block(j),
        );
        for (k, t) in ws.arc_step.block_mut(j).iter_mut().enumerate() {
            *t = qd[k] + rd[k] - ts[k];
        }
        let (q, r) = (ws.q.block(j), ws.r.block(j));
        for (k, u) in ws.u.block_mut(j).iter_mut().enumerate() {
            *u = r[k] - q[k];
        }
    }

    let mut tau = 0.0;
    for j in 0..net.num_arcs() {
        tau += norm_sq(ws.arc_step.block(j)) + norm_sq(ws.u.block(j));
    }
    for i in 0..net.num_nodes() {
        tau += norm_sq(ws.node_step.block(i));
    }

    let pi = if tau > 0.0 {
        coordination_sum(problem, state, ws)
    } else {
        0.0
    };
    ws.tau = tau;
    ws.pi = pi;
    ws.theta = step_length(tau, pi, lambda);
}

/// `π` rearranged through the divergence/tension adjointness into
/// `Σ_j ⟨x_j - q_j, q*_j + x*_j - Δ_j v*⟩ + ⟨x_j - r_j, r*_j - x*_j⟩
///  + Σ_i ⟨div_i x - s_i, s*_i - v*_i⟩`.
/// Equal to the plain inner-product form in exact arithmetic, but every
/// factor is a difference that vanishes at a solution, so the sum does not
/// cancel catastrophically when `τ` is tiny.
fn coordination_sum(problem: &Problem, state: &SolverState, ws: &mut Workspace) -> f64 {
    let net = &problem.network;
    let dim = net.num_commodities();
    // div_q and tension_s are free again; reuse them for div x and Δv.
    net.divergence_into(&state.x, &mut ws.div_q);
    net.tension_into(&state.v, &mut ws.tension_s);
    let mut pi = 0.0;
    for j in 0..net.num_arcs() {
        let (x, xd, tv) = (
            state.x.block(j),
            state.x_dual.block(j),
            ws.tension_s.block(j),
        );
        let (q, qd, r, rd) = (
            ws.q.block(j),
            ws.q_dual.block(j),
            ws.r.block(j),
            ws.r_dual.block(j),
        );
        for k in 0..dim {
            pi += (x[k] - q[k]) * (qd[k] + xd[k] - tv[k]) + (x[k] - r[k]) * (rd[k] - xd[k]);
        }
    }
    for i in 0..net.num_nodes() {
        let (d, v, s, sd) = (
            ws.div_q.block(i),
            state.v.block(i),
            ws.s.block(i),
            ws.s_dual.block(i),
        );
        for k in 0..dim {
            pi += (d[k] - s[k]) * (sd[k] - v[k]);
        }
    }
    pi
}

/// `π` exactly as the inner-product sum
/// `Σ_j (⟨x,t*⟩ - ⟨q,q*⟩ + ⟨u,x*⟩ - ⟨r,r*⟩) + Σ_i (⟨t,v*⟩ - ⟨s,s*⟩)`.
#[cfg(test)]
pub(crate) fn coordination_sum_direct(
    problem: &Problem,
    state: &SolverState,
    ws: &Workspace,
) -> f64 {
    let net = &problem.network;
    let mut pi = 0.0;
    for j in 0..net.num_arcs() {
        pi += dot(state.x.block(j), ws.arc_step.block(j)) - dot(ws.q.block(j), ws.q_dual.block(j))
            + dot(ws.u.block(j), state.x_dual.block(j))
            - dot(ws.r.block(j), ws.r_dual.block(j));
    }
    for i in 0..net.num_nodes() {
        pi += dot(ws.node_step.block(i), state.v.block(i)) - dot(ws.s.block(i), ws.s_dual.block(i));
    }
    pi
}

/// Runs one iteration: activates the blocks in `active`, refreshes the
/// coordination scalars and moves the state along the relaxed projection
/// direction. When `θ = 0` the state is left untouched.
pub fn step(
    problem: &Problem,
    cfg: &SolverConfig,
    state: &mut SolverState,
    ws: &mut Workspace,
    active: &ActiveSet,
    lambda: f64,
) -> Result<StepStats, NumericalError> {
    step_in(problem, cfg, state, ws, active, lambda, None)
}

pub(crate) fn step_in(
    problem: &Problem,
    cfg: &SolverConfig,
    state: &mut SolverState,
    ws: &mut Workspace,
    active: &ActiveSet,
    lambda: f64,
    pool: Option<&rayon::ThreadPool>,
) -> Result<StepStats, NumericalError> {
    evaluate(problem, cfg, state, ws, active, lambda, pool);
    let fail = |quantity| NumericalError {
        iteration: state.iteration,
        quantity,
    };
    if !ws.tau.is_finite() {
        return Err(fail("tau"));
    }
    if !ws.pi.is_finite() {
        return Err(fail("pi"));
    }
    let theta = ws.theta;
    if theta > 0.0 {
        axpy(state.x.as_mut_slice(), -theta, ws.arc_step.as_slice());
        axpy(state.x_dual.as_mut_slice(), -theta, ws.u.as_slice());
        axpy(state.v.as_mut_slice(), -theta, ws.node_step.as_slice());
        if !(state.x.is_finite() && state.x_dual.is_finite() && state.v.is_finite()) {
            return Err(fail("iterate"));
        }
    }
    state.iteration += 1;
    Ok(StepStats {
        tau: ws.tau,
        pi: ws.pi,
        theta,
        lambda,
    })
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Full-activation residual at `state`:
/// `sqrt(τ + Σ_j ‖q_j - x_j‖² + Σ_i ‖s_i - div_i x‖²)`. Zero exactly when
/// `(x, x*, v*)` solves the extended inclusion.
pub fn residual(problem: &Problem, cfg: &SolverConfig, state: &SolverState) -> f64 {
    let mut ws = Workspace::for_problem(problem);
    residual_with(problem, cfg, state, &mut ws, None)
}

pub(crate) fn residual_with(
    problem: &Problem,
    cfg: &SolverConfig,
    state: &SolverState,
    ws: &mut Workspace,
    pool: Option<&rayon::ThreadPool>,
) -> f64 {
    let net = &problem.network;
    let all = ActiveSet::full(net.num_arcs(), net.num_nodes());
    evaluate(problem, cfg, state, ws, &all, 1.0, pool);
    let mut total = ws.tau;
    total += ws.q.distance_sq(&state.x);
    // With every node active, l holds div x.
    total += ws.s.distance_sq(&ws.l);
    total.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::TwoArcInstance;
    use crate::solver::BlockSelector;
    use crate::solver::SchedulerSpec;

    #[test]
    fn rearranged_pi_matches_direct_sum() {
        let problem = TwoArcInstance::new([1.0, 2.0], [1.0, 1.0], 3.0)
            .unwrap()
            .problem()
            .unwrap();
        let cfg = SolverConfig::default();
        let mut state = SolverState::zeros(&problem);
        let mut ws = Workspace::for_problem(&problem);
        let spec = SchedulerSpec::round_robin(2, 2, 2);
        let mut sel = BlockSelector::new(spec, 1, 2, 2).unwrap();
        for n in 0..30 {
            let active = sel.select(n);
            let before = state.clone();
            step(&problem, &cfg, &mut state, &mut ws, &active, 1.0).unwrap();
            let direct = coordination_sum_direct(&problem, &before, &ws);
            let scale = 1.0 + direct.abs().max(ws.pi.abs());
            assert!(
                (direct - ws.pi).abs() <= 1e-12 * scale * 100.0,
                "n={n} {direct} {}",
                ws.pi
            );
        }
    }
}
