//! Resolvent toolbox for the arc and node operators.
//!
//! Every operator is reached only through its resolvent `J_{γA}`. Arc
//! capacity operators act on `H = R^C` by applying a scalar capacity to the
//! total flux over commodities; arc constraints are normal cones of boxes;
//! node operators fix the divergence to a supply vector.

mod lambert;
mod root;
mod scalar;

use thiserror::Error;

use crate::network::Network;

pub use lambert::{lambert_w, lambert_w_of_exp, BRANCH_POINT};
pub use scalar::{
    resolvent_bpr, resolvent_log, resolvent_powerexp, resolvent_trc, ScalarCapacity, ScalarFunction,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("Lambert W argument {0} is below the branch point -1/e")]
    LambertDomain(f64),
    #[error("{family}: parameter `{name}` = {value} must be {requirement}")]
    InvalidParameter {
        family: &'static str,
        name: &'static str,
        value: f64,
        requirement: &'static str,
    },
    #[error("power exponent {0} is not one of 1, 1.5, 2")]
    UnsupportedExponent(f64),
    #[error("interval [{lo}, {hi}] is empty or malformed")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("box bound for commodity {commodity}: [{lo}, {hi}] is empty or malformed")]
    InvalidBox { commodity: usize, lo: f64, hi: f64 },
    #[error("expected {expected} entries, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// `Q: x ↦ (c(Σ_k ξ_k))_k`, a scalar capacity lifted to `R^C` through the
/// total flux.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparableLift {
    pub scalar: ScalarCapacity,
}

impl SeparableLift {
    pub fn new(scalar: ScalarCapacity) -> Result<Self, OperatorError> {
        scalar.validate()?;
        Ok(Self { scalar })
    }

    /// `J_{γQ}(x)`: every coordinate is shifted by
    /// `η = (J_{Nγc}(Σx) - Σx)/N`.
    pub fn resolvent_into(&self, gamma: f64, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), out.len());
        if x.len() == 1 {
            out[0] = self.scalar.resolvent(gamma, x[0]);
            return;
        }
        let n = x.len() as f64;
        let total: f64 = x.iter().sum();
        let eta = (self.scalar.resolvent(n * gamma, total) - total) / n;
        for (o, xi) in out.iter_mut().zip(x) {
            *o = xi + eta;
        }
    }

    pub fn resolvent(&self, gamma: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.resolvent_into(gamma, x, &mut out);
        out
    }
}

/// Product of closed intervals `Π_k [lo_k, hi_k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSet {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxSet {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, OperatorError> {
        if lo.len() != hi.len() {
            return Err(OperatorError::Dimension {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        for (k, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if l.is_nan() || h.is_nan() || l > h || l == f64::INFINITY || h == f64::NEG_INFINITY {
                return Err(OperatorError::InvalidBox {
                    commodity: k,
                    lo: l,
                    hi: h,
                });
            }
        }
        Ok(Self { lo, hi })
    }

    /// `[0, +∞)^dim`.
    pub fn orthant(dim: usize) -> Self {
        Self {
            lo: vec![0.0; dim],
            hi: vec![f64::INFINITY; dim],
        }
    }

    pub fn is_orthant(&self) -> bool {
        self.lo.iter().all(|&l| l == 0.0) && self.hi.iter().all(|&h| h == f64::INFINITY)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lo
    }

    pub fn upper(&self) -> &[f64] {
        &self.hi
    }

    pub fn project_into(&self, x: &[f64], out: &mut [f64]) {
        for (k, (o, xi)) in out.iter_mut().zip(x).enumerate() {
            *o = xi.clamp(self.lo[k], self.hi[k]);
        }
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.project_into(x, &mut out);
        out
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .enumerate()
            .all(|(k, v)| *v >= self.lo[k] && *v <= self.hi[k])
    }

    /// Distance from `g_k` to the normal cone of interval `k` at `x_k`.
    /// A coordinate within `active_tol` of a bound is treated as lying on
    /// it. Returns `None` when `x_k` is outside the interval by more than
    /// `active_tol`.
    pub(crate) fn normal_cone_gap(&self, k: usize, x: f64, g: f64, active_tol: f64) -> Option<f64> {
        let (lo, hi) = (self.lo[k], self.hi[k]);
        if x < lo - active_tol || x > hi + active_tol {
            return None;
        }
        let at_lo = x <= lo + active_tol;
        let at_hi = x >= hi - active_tol;
        Some(match (at_lo, at_hi) {
            (true, true) => 0.0,
            (true, false) => g.max(0.0),
            (false, true) => (-g).max(0.0),
            (false, false) => g.abs(),
        })
    }
}

/// Arc operators: capacity `Q_j` and the constraint cone `R_j = N_{C_j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcOperator {
    pub cost: SeparableLift,
    pub constraint: BoxSet,
}

impl ArcOperator {
    pub fn new(cost: ScalarCapacity, constraint: BoxSet) -> Result<Self, OperatorError> {
        Ok(Self {
            cost: SeparableLift::new(cost)?,
            constraint,
        })
    }
}

/// Node operator `S_i` with `S_i^{-1} ≡ {s_i}`.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeOperator {
    FixedSupply(Vec<f64>),
}

impl NodeOperator {
    /// `J_{σS}(y)`: the supply vector, whatever `σ` and `y`.
    pub fn resolvent_into(&self, _sigma: f64, _y: &[f64], out: &mut [f64]) {
        match self {
            NodeOperator::FixedSupply(s) => out.copy_from_slice(s),
        }
    }

    pub fn supply(&self) -> &[f64] {
        match self {
            NodeOperator::FixedSupply(s) => s,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("expected {expected} arc operators, got {got}")]
    ArcCount { expected: usize, got: usize },
    #[error("expected {expected} node operators, got {got}")]
    NodeCount { expected: usize, got: usize },
    #[error("arc `{arc}`: {source}")]
    Arc {
        arc: String,
        #[source]
        source: OperatorError,
    },
    #[error("node `{node}`: {source}")]
    Node {
        node: String,
        #[source]
        source: OperatorError,
    },
}

/// A network together with one operator pair per arc and one operator per
/// node.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub network: Network,
    pub arcs: Vec<ArcOperator>,
    pub nodes: Vec<NodeOperator>,
}

impl Problem {
    pub fn new(
        network: Network,
        arcs: Vec<ArcOperator>,
        nodes: Vec<NodeOperator>,
    ) -> Result<Self, ProblemError> {
        if arcs.len() != network.num_arcs() {
            return Err(ProblemError::ArcCount {
                expected: network.num_arcs(),
                got: arcs.len(),
            });
        }
        if nodes.len() != network.num_nodes() {
            return Err(ProblemError::NodeCount {
                expected: network.num_nodes(),
                got: nodes.len(),
            });
        }
        let dim = network.num_commodities();
        for (op, arc) in arcs.iter().zip(network.arcs()) {
            let wrap = |source| ProblemError::Arc {
                arc: arc.id.clone(),
                source,
            };
            op.cost.scalar.validate().map_err(wrap)?;
            if op.constraint.dim() != dim {
                return Err(wrap(OperatorError::Dimension {
                    expected: dim,
                    got: op.constraint.dim(),
                }));
            }
        }
        for (op, id) in nodes.iter().zip(network.nodes()) {
            let s = op.supply();
            if s.len() != dim {
                return Err(ProblemError::Node {
                    node: id.clone(),
                    source: OperatorError::Dimension {
                        expected: dim,
                        got: s.len(),
                    },
                });
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(ProblemError::Node {
                    node: id.clone(),
                    source: OperatorError::InvalidParameter {
                        family: "fixed_supply",
                        name: "supply",
                        value: s
                            .iter()
                            .copied()
                            .find(|v| !v.is_finite())
                            .unwrap_or(f64::NAN),
                        requirement: "finite",
                    },
                });
            }
        }
        Ok(Self {
            network,
            arcs,
            nodes,
        })
    }
}
