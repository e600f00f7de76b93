//! Reference solutions and equilibrium checks.
//!
//! Nothing here goes through the solver's resolvent path: the two-arc
//! closed form, Frank-Wolfe and the inclusion check evaluate costs
//! directly.

use std::collections::VecDeque;

use thiserror::Error;

use crate::network::Network;
use crate::operators::{ArcOperator, BoxSet, NodeOperator, Problem, ScalarCapacity};
use crate::vector::{BlockVector, Flow, Potential};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("supplies must have exactly one origin (positive supply), found {0}")]
    Origins(usize),
    #[error("supplies do not balance (sum = {0})")]
    Unbalanced(f64),
    #[error("destination `{0}` is unreachable from the origin")]
    Disconnected(String),
    #[error("expected {expected} entries, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Two parallel arcs `a → b` with affine costs `a_j + b_j ξ`, one commodity,
/// demand `d` from `a` to `b`, nonnegative flows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoArcInstance {
    pub intercept: [f64; 2],
    pub slope: [f64; 2],
    pub demand: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoArcSolution {
    pub flow: [f64; 2],
    /// Common cost of the used arcs.
    pub cost: f64,
    /// `v*_b - v*_a`; equals the cost since the cone term vanishes on used
    /// arcs.
    pub potential_gap: f64,
    /// True when one arc carries no flow.
    pub corner: bool,
}

impl TwoArcInstance {
    pub fn new(intercept: [f64; 2], slope: [f64; 2], demand: f64) -> Result<Self, OracleError> {
        if !(demand.is_finite() && demand > 0.0) {
            return Err(OracleError::InvalidInstance(format!(
                "demand {demand} must be > 0"
            )));
        }
        for j in 0..2 {
            if !(intercept[j].is_finite() && intercept[j] >= 0.0) {
                return Err(OracleError::InvalidInstance(format!(
                    "intercept {} must be >= 0",
                    intercept[j]
                )));
            }
            if !(slope[j].is_finite() && slope[j] > 0.0) {
                return Err(OracleError::InvalidInstance(format!(
                    "slope {} must be > 0",
                    slope[j]
                )));
            }
        }
        Ok(Self {
            intercept,
            slope,
            demand,
        })
    }

    /// The instance as a solver problem: BPR costs with `p = 1`
    /// (`θ = a_j`, `α = b_j/a_j`, `ϱ = 1`), orthant constraints and supplies
    /// `±d`. Needs strictly positive intercepts.
    pub fn problem(&self) -> Result<Problem, OracleError> {
        let net = Network::new(
            ["a", "b"],
            [
                ("1".to_string(), "a".to_string(), "b".to_string()),
                ("2".to_string(), "a".to_string(), "b".to_string()),
            ],
            ["k"],
        )
        .map_err(|e| OracleError::InvalidInstance(e.to_string()))?;
        let arcs = (0..2)
            .map(|j| {
                let theta = self.intercept[j];
                if theta <= 0.0 {
                    return Err(OracleError::InvalidInstance(
                        "a BPR realization needs positive intercepts".into(),
                    ));
                }
                ArcOperator::new(
                    ScalarCapacity::Bpr {
                        alpha: self.slope[j] / theta,
                        rho: 1.0,
                        theta,
                        p: 1.0,
                    },
                    BoxSet::orthant(1),
                )
                .map_err(|e| OracleError::InvalidInstance(e.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let nodes = vec![
            NodeOperator::FixedSupply(vec![self.demand]),
            NodeOperator::FixedSupply(vec![-self.demand]),
        ];
        Problem::new(net, arcs, nodes).map_err(|e| OracleError::InvalidInstance(e.to_string()))
    }
}

/// Closed-form equilibrium of a [`TwoArcInstance`].
pub fn analytic_two_arc(inst: &TwoArcInstance) -> TwoArcSolution {
    let [a1, a2] = inst.intercept;
    let [b1, b2] = inst.slope;
    let d = inst.demand;
    let x1 = (a2 - a1 + b2 * d) / (b1 + b2);
    if x1 <= 0.0 {
        // Arc 1 unused: its free-flow cost is at least arc 2's loaded cost.
        let cost = a2 + b2 * d;
        debug_assert!(a1 >= cost);
        TwoArcSolution {
            flow: [0.0, d],
            cost,
            potential_gap: cost,
            corner: true,
        }
    } else if x1 >= d {
        let cost = a1 + b1 * d;
        debug_assert!(a2 >= cost);
        TwoArcSolution {
            flow: [d, 0.0],
            cost,
            potential_gap: cost,
            corner: true,
        }
    } else {
        let cost = a1 + b1 * x1;
        TwoArcSolution {
            flow: [x1, d - x1],
            cost,
            potential_gap: cost,
            corner: false,
        }
    }
}

/// A single-commodity instance with its costs in Frank-Wolfe form and a
/// known equilibrium flow.
#[derive(Debug, Clone)]
pub struct ReferenceInstance {
    pub problem: Problem,
    pub costs: Vec<BprCost>,
    pub supplies: Vec<f64>,
    pub flow: Vec<f64>,
    pub cost: f64,
}

/// Braess-type network `s, a, b, t` with arcs `s→a` (1 + ξ), `s→b` (6 + ξ),
/// `a→t` (6 + ξ), `b→t` (1 + ξ) and the bridge `a→b` (1 + ξ), four units
/// from `s` to `t`. At equilibrium each of the three paths costs 11 and the
/// arc flows are `(3, 1, 1, 3, 2)`.
pub fn braess() -> ReferenceInstance {
    let arcs = [
        ("1", "s", "a", 1.0),
        ("2", "s", "b", 6.0),
        ("3", "a", "t", 6.0),
        ("4", "b", "t", 1.0),
        ("5", "a", "b", 1.0),
    ];
    let net = Network::new(
        ["s", "a", "b", "t"],
        arcs.iter()
            .map(|(id, t, h, _)| (id.to_string(), t.to_string(), h.to_string())),
        ["k"],
    )
    .expect("valid network");
    let costs: Vec<BprCost> = arcs
        .iter()
        .map(|&(_, _, _, a)| BprCost {
            alpha: 1.0 / a,
            rho: 1.0,
            theta: a,
            p: 1.0,
        })
        .collect();
    let ops = costs
        .iter()
        .map(|c| {
            ArcOperator::new(
                ScalarCapacity::Bpr {
                    alpha: c.alpha,
                    rho: c.rho,
                    theta: c.theta,
                    p: c.p,
                },
                BoxSet::orthant(1),
            )
            .expect("valid operator")
        })
        .collect();
    let supplies = vec![4.0, 0.0, 0.0, -4.0];
    let nodes = supplies
        .iter()
        .map(|&s| NodeOperator::FixedSupply(vec![s]))
        .collect();
    ReferenceInstance {
        problem: Problem::new(net, ops, nodes).expect("valid problem"),
        costs,
        supplies,
        flow: vec![3.0, 1.0, 1.0, 3.0, 2.0],
        cost: 11.0,
    }
}

/// BPR cost for the Frank-Wolfe reference, evaluated independently of the
/// operator toolbox.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BprCost {
    pub alpha: f64,
    pub rho: f64,
    pub theta: f64,
    pub p: f64,
}

impl BprCost {
    pub fn eval(&self, flow: f64) -> f64 {
        if flow >= 0.0 {
            self.theta * (1.0 + self.alpha * (flow / self.rho).powf(self.p))
        } else {
            self.theta
        }
    }
}

/// Approximate single-commodity Wardrop equilibrium by Frank-Wolfe with
/// the `2/(k+2)` step: repeated all-or-nothing assignment onto shortest
/// paths from the single origin under current costs.
pub fn frank_wolfe_reference(
    net: &Network,
    costs: &[BprCost],
    supplies: &[f64],
    iterations: usize,
) -> Result<Flow, OracleError> {
    if costs.len() != net.num_arcs() {
        return Err(OracleError::Dimension {
            expected: net.num_arcs(),
            got: costs.len(),
        });
    }
    if supplies.len() != net.num_nodes() {
        return Err(OracleError::Dimension {
            expected: net.num_nodes(),
            got: supplies.len(),
        });
    }
    let origins: Vec<usize> = (0..net.num_nodes())
        .filter(|&i| supplies[i] > 0.0)
        .collect();
    if origins.len() != 1 {
        return Err(OracleError::Origins(origins.len()));
    }
    let origin = origins[0];
    let total: f64 = supplies.iter().sum();
    let scale: f64 = supplies.iter().map(|s| s.abs()).sum();
    if total.abs() > 1e-12 * scale.max(1.0) {
        return Err(OracleError::Unbalanced(total));
    }

    let mut flow = vec![0.0; net.num_arcs()];
    let mut arc_cost = vec![0.0; net.num_arcs()];
    let mut target = vec![0.0; net.num_arcs()];
    for k in 0..iterations {
        for (c, (f, cost)) in arc_cost.iter_mut().zip(flow.iter().zip(costs)) {
            *c = cost.eval(*f);
        }
        all_or_nothing(net, &arc_cost, supplies, origin, &mut target)?;
        let step = 2.0 / (k as f64 + 2.0);
        for (f, t) in flow.iter_mut().zip(&target) {
            *f += step * (t - *f);
        }
    }
    Ok(Flow(BlockVector::from_flat(1, flow)))
}

fn all_or_nothing(
    net: &Network,
    arc_cost: &[f64],
    supplies: &[f64],
    origin: usize,
    out: &mut [f64],
) -> Result<(), OracleError> {
    let pred = shortest_path_tree(net, arc_cost, origin);
    out.fill(0.0);
    for (i, &s) in supplies.iter().enumerate() {
        if s >= 0.0 {
            continue;
        }
        let mut node = i;
        while node != origin {
            let j = pred[node].ok_or_else(|| OracleError::Disconnected(net.nodes()[i].clone()))?;
            out[j] -= s;
            node = net.tail(j);
        }
    }
    Ok(())
}

// Label-correcting (FIFO) search; returns the predecessor arc of each node.
fn shortest_path_tree(net: &Network, arc_cost: &[f64], origin: usize) -> Vec<Option<usize>> {
    let n = net.num_nodes();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![None; n];
    let mut queued = vec![false; n];
    let mut queue = VecDeque::new();
    dist[origin] = 0.0;
    queue.push_back(origin);
    queued[origin] = true;
    while let Some(i) = queue.pop_front() {
        queued[i] = false;
        for j in net.out_arcs(i) {
            let h = net.head(j);
            let cand = dist[i] + arc_cost[j];
            if cand < dist[h] {
                dist[h] = cand;
                pred[h] = Some(j);
                if !queued[h] {
                    queued[h] = true;
                    queue.push_back(h);
                }
            }
        }
    }
    pred
}

/// Where the largest inclusion violation was found.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Arc(String),
    Node(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WardropReport {
    pub residual: f64,
    pub worst: Option<Violation>,
    /// Set when the residual is infinite because a flow left its domain.
    pub diagnostic: Option<String>,
}

/// Largest violation of the equilibrium inclusions at `(x, v*)`: for arcs,
/// the distance from `Δ_j v* - Q_j x_j` to the normal cone `N_{C_j}(x_j)`;
/// for nodes, `‖div_i x - s_i‖`. Infinite when a flow lies outside the
/// domain of its operators.
pub fn wardrop_residual(problem: &Problem, x: &Flow, v: &Potential) -> Result<f64, OracleError> {
    wardrop_report(problem, x, v, 0.0).map(|r| r.residual)
}

/// [`wardrop_residual`] with an activity tolerance: a coordinate within
/// `active_tol` of a box bound is treated as lying on it.
pub fn wardrop_report(
    problem: &Problem,
    x: &Flow,
    v: &Potential,
    active_tol: f64,
) -> Result<WardropReport, OracleError> {
    let net = &problem.network;
    let tension = net.tension(v).map_err(dim_err)?;
    let div = net.divergence(x).map_err(dim_err)?;
    let mut report = WardropReport {
        residual: 0.0,
        worst: None,
        diagnostic: None,
    };
    for (j, op) in problem.arcs.iter().enumerate() {
        let id = &net.arcs()[j].id;
        let xj = x.block(j);
        let total: f64 = xj.iter().sum();
        let Some(set) = op.cost.scalar.subdifferential(total) else {
            return Ok(infinite(
                Violation::Arc(id.clone()),
                format!("arc `{id}`: total flux {total} is outside the capacity domain"),
            ));
        };
        match arc_gap(&op.constraint, xj, tension.block(j), set, active_tol) {
            Some(gap) => {
                if gap > report.residual {
                    report.residual = gap;
                    report.worst = Some(Violation::Arc(id.clone()));
                }
            }
            None => {
                return Ok(infinite(
                    Violation::Arc(id.clone()),
                    format!("arc `{id}`: flow lies outside its constraint box"),
                ))
            }
        }
    }
    for (i, op) in problem.nodes.iter().enumerate() {
        let gap: f64 = div
            .block(i)
            .iter()
            .zip(op.supply())
            .map(|(d, s)| (d - s) * (d - s))
            .sum::<f64>()
            .sqrt();
        if gap > report.residual {
            report.residual = gap;
            report.worst = Some(Violation::Node(net.nodes()[i].clone()));
        }
    }
    Ok(report)
}

fn dim_err(e: crate::network::NetworkError) -> OracleError {
    OracleError::InvalidInstance(e.to_string())
}

fn infinite(worst: Violation, diagnostic: String) -> WardropReport {
    WardropReport {
        residual: f64::INFINITY,
        worst: Some(worst),
        diagnostic: Some(diagnostic),
    }
}

// min over c in [lo, hi] of ‖(dist(g_k - c, N_k(x_k)))_k‖.
fn arc_gap(b: &BoxSet, x: &[f64], g: &[f64], (lo, hi): (f64, f64), active_tol: f64) -> Option<f64> {
    let eval = |c: f64| -> Option<f64> {
        let mut sum = 0.0;
        for k in 0..x.len() {
            let d = b.normal_cone_gap(k, x[k], g[k] - c, active_tol)?;
            sum += d * d;
        }
        Some(sum.sqrt())
    };
    if lo == hi {
        return eval(lo);
    }
    // The objective is convex, nonincreasing below min g and nondecreasing
    // above max g.
    let gmin = g.iter().copied().fold(f64::INFINITY, f64::min);
    let gmax = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let a = lo.max(gmin);
    let z = hi.min(gmax);
    if a > z {
        return eval(if hi < gmin { hi } else { lo });
    }
    let (mut a, mut z) = (a, z);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        if z - a <= 1e-15 * (1.0 + a.abs().max(z.abs())) {
            break;
        }
        let m1 = z - ratio * (z - a);
        let m2 = a + ratio * (z - a);
        if eval(m1)? <= eval(m2)? {
            z = m2;
        } else {
            a = m1;
        }
    }
    eval(0.5 * (a + z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::ScalarFunction;

    #[test]
    fn two_arc_interior() {
        let inst = TwoArcInstance::new([1.0, 2.0], [1.0, 1.0], 3.0).unwrap();
        let sol = analytic_two_arc(&inst);
        assert_eq!(sol.flow, [2.0, 1.0]);
        assert_eq!(sol.cost, 3.0);
        assert!(!sol.corner);
    }

    #[test]
    fn two_arc_symmetric() {
        let inst = TwoArcInstance::new([2.0, 2.0], [0.5, 0.5], 5.0).unwrap();
        assert_eq!(analytic_two_arc(&inst).flow, [2.5, 2.5]);
    }

    #[test]
    fn two_arc_corner() {
        let inst = TwoArcInstance::new([10.0, 0.0], [1.0, 1.0], 1.0).unwrap();
        let sol = analytic_two_arc(&inst);
        assert_eq!(sol.flow, [0.0, 1.0]);
        assert!(sol.corner);
        // Complementarity: unused arc is no cheaper than the used one.
        assert!(inst.intercept[0] >= sol.cost);
        assert!(inst.problem().is_err());
    }

    #[test]
    fn instance_validation() {
        assert!(TwoArcInstance::new([1.0, 1.0], [1.0, 1.0], 0.0).is_err());
        assert!(TwoArcInstance::new([1.0, 1.0], [0.0, 1.0], 1.0).is_err());
        assert!(TwoArcInstance::new([-1.0, 1.0], [1.0, 1.0], 1.0).is_err());
    }

    fn two_arc_problem() -> Problem {
        TwoArcInstance::new([1.0, 2.0], [1.0, 1.0], 3.0)
            .unwrap()
            .problem()
            .unwrap()
    }

    #[test]
    fn wardrop_residual_at_solution_and_perturbed() {
        let p = two_arc_problem();
        let v = Potential::from_blocks(1, &[[0.0], [3.0]]).unwrap();
        let x = Flow::from_blocks(1, &[[2.0], [1.0]]).unwrap();
        assert!(wardrop_residual(&p, &x, &v).unwrap() <= 1e-10);
        // Arc costs 3.1 and 2.9 against a tension of 3; divergence still
        // balances, so the violation is 0.1 on each arc.
        let x = Flow::from_blocks(1, &[[2.1], [0.9]]).unwrap();
        let r = wardrop_residual(&p, &x, &v).unwrap();
        assert!((r - 0.1).abs() < 1e-12, "{r}");
    }

    #[test]
    fn wardrop_residual_zero_demand() {
        let net = Network::new(
            ["a", "b"],
            [("1".to_string(), "a".to_string(), "b".to_string())],
            ["k"],
        )
        .unwrap();
        let arc = ArcOperator::new(
            ScalarCapacity::IntervalProx {
                phi: ScalarFunction::Zero,
                lo: 0.0,
                hi: f64::INFINITY,
            },
            BoxSet::orthant(1),
        )
        .unwrap();
        let p = Problem::new(
            net,
            vec![arc],
            vec![
                NodeOperator::FixedSupply(vec![0.0]),
                NodeOperator::FixedSupply(vec![0.0]),
            ],
        )
        .unwrap();
        let r = wardrop_residual(&p, &Flow::zeros(1, 1), &Potential::zeros(2, 1)).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn wardrop_residual_outside_domain_is_infinite() {
        let p = two_arc_problem();
        let v = Potential::zeros(2, 1);
        let x = Flow::from_blocks(1, &[[-1.0], [4.0]]).unwrap();
        let rep = wardrop_report(&p, &x, &v, 0.0).unwrap();
        assert_eq!(rep.residual, f64::INFINITY);
        assert!(rep.diagnostic.is_some());
    }

    #[test]
    fn frank_wolfe_single_arc() {
        let net = Network::new(
            ["o", "d"],
            [("1".to_string(), "o".to_string(), "d".to_string())],
            ["k"],
        )
        .unwrap();
        let cost = BprCost {
            alpha: 0.15,
            rho: 1.0,
            theta: 1.0,
            p: 4.0,
        };
        let x = frank_wolfe_reference(&net, &[cost], &[2.5, -2.5], 1).unwrap();
        assert_eq!(x.as_slice(), &[2.5]);
    }

    #[test]
    fn frank_wolfe_rejects_bad_supplies() {
        let net = Network::new(
            ["o", "d", "z"],
            [("1".to_string(), "o".to_string(), "d".to_string())],
            ["k"],
        )
        .unwrap();
        let cost = BprCost {
            alpha: 1.0,
            rho: 1.0,
            theta: 1.0,
            p: 1.0,
        };
        assert!(matches!(
            frank_wolfe_reference(&net, &[cost], &[1.0, 0.0, -1.0], 5),
            Err(OracleError::Disconnected(_))
        ));
        assert!(matches!(
            frank_wolfe_reference(&net, &[cost], &[1.0, -0.5, 0.0], 5),
            Err(OracleError::Unbalanced(_))
        ));
        assert!(matches!(
            frank_wolfe_reference(&net, &[cost], &[1.0, 1.0, -2.0], 5),
            Err(OracleError::Origins(2))
        ));
    }
}
