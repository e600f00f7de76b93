//! Directed networks, incidence, divergence and tension.

use std::collections::HashMap;

use thiserror::Error;

use crate::vector::{BlockVector, Flow, Potential};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("network must have at least one node")]
    NoNodes,
    #[error("network must have at least one arc")]
    NoArcs,
    #[error("network must carry at least one commodity")]
    NoCommodities,
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("duplicate arc id `{0}`")]
    DuplicateArc(String),
    #[error("duplicate commodity id `{0}`")]
    DuplicateCommodity(String),
    #[error("arc `{arc}` references undeclared node `{node}`")]
    DanglingEndpoint { arc: String, node: String },
    #[error("arc `{0}` is a self-loop (tail equals head)")]
    SelfLoop(String),
    #[error("unknown node id `{0}`")]
    UnknownNode(String),
    #[error("unknown arc id `{0}`")]
    UnknownArc(String),
    #[error("dimension mismatch: expected {expected_blocks} blocks of size {expected_dim}, got {blocks} blocks of size {dim}")]
    Dimension {
        expected_blocks: usize,
        expected_dim: usize,
        blocks: usize,
        dim: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arc {
    pub id: String,
    pub tail: usize,
    pub head: usize,
}

/// A directed multigraph with a commodity set. Parallel arcs are allowed,
/// self-loops are not. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    nodes: Vec<String>,
    arcs: Vec<Arc>,
    commodities: Vec<String>,
    node_index: HashMap<String, usize>,
    arc_index: HashMap<String, usize>,
    // (arc, +1 | -1) for every arc touching the node, ascending arc index.
    incident: Vec<Vec<(usize, f64)>>,
}

impl Network {
    /// Builds a network from node ids, `(arc id, tail id, head id)` triples
    /// and commodity ids.
    pub fn new<N, A, C>(nodes: N, arcs: A, commodities: C) -> Result<Self, NetworkError>
    where
        N: IntoIterator,
        N::Item: Into<String>,
        A: IntoIterator<Item = (String, String, String)>,
        C: IntoIterator,
        C::Item: Into<String>,
    {
        let nodes: Vec<String> = nodes.into_iter().map(Into::into).collect();
        let commodities: Vec<String> = commodities.into_iter().map(Into::into).collect();
        if nodes.is_empty() {
            return Err(NetworkError::NoNodes);
        }
        if commodities.is_empty() {
            return Err(NetworkError::NoCommodities);
        }
        let mut node_index = HashMap::with_capacity(nodes.len());
        for (i, id) in nodes.iter().enumerate() {
            if node_index.insert(id.clone(), i).is_some() {
                return Err(NetworkError::DuplicateNode(id.clone()));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for c in &commodities {
            if !seen.insert(c.as_str()) {
                return Err(NetworkError::DuplicateCommodity(c.clone()));
            }
        }

        let mut arc_list = Vec::new();
        let mut arc_index = HashMap::new();
        for (id, tail, head) in arcs {
            let lookup = |n: &str| {
                node_index
                    .get(n)
                    .copied()
                    .ok_or_else(|| NetworkError::DanglingEndpoint {
                        arc: id.clone(),
                        node: n.to_string(),
                    })
            };
            let t = lookup(&tail)?;
            let h = lookup(&head)?;
            if t == h {
                return Err(NetworkError::SelfLoop(id));
            }
            if arc_index.insert(id.clone(), arc_list.len()).is_some() {
                return Err(NetworkError::DuplicateArc(id));
            }
            arc_list.push(Arc {
                id,
                tail: t,
                head: h,
            });
        }
        if arc_list.is_empty() {
            return Err(NetworkError::NoArcs);
        }

        let mut incident = vec![Vec::new(); nodes.len()];
        for (j, arc) in arc_list.iter().enumerate() {
            incident[arc.tail].push((j, 1.0));
            incident[arc.head].push((j, -1.0));
        }

        Ok(Self {
            nodes,
            arcs: arc_list,
            commodities,
            node_index,
            arc_index,
            incident,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.len()
    }

    pub fn num_commodities(&self) -> usize {
        self.commodities.len()
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn commodities(&self) -> &[String] {
        &self.commodities
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    pub fn arc_index(&self, id: &str) -> Option<usize> {
        self.arc_index.get(id).copied()
    }

    pub fn tail(&self, j: usize) -> usize {
        self.arcs[j].tail
    }

    pub fn head(&self, j: usize) -> usize {
        self.arcs[j].head
    }

    /// Arcs leaving node `i`.
    pub fn out_arcs(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.incident[i]
            .iter()
            .filter(|(_, e)| *e > 0.0)
            .map(|(j, _)| *j)
    }

    /// Arcs entering node `i`.
    pub fn in_arcs(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.incident[i]
            .iter()
            .filter(|(_, e)| *e < 0.0)
            .map(|(j, _)| *j)
    }

    /// Incidence coefficient by identifier: +1 if `node` is the tail of
    /// `arc`, -1 if it is the head, 0 otherwise.
    pub fn incidence(&self, node: &str, arc: &str) -> Result<i8, NetworkError> {
        let i = self
            .node_index(node)
            .ok_or_else(|| NetworkError::UnknownNode(node.to_string()))?;
        let j = self
            .arc_index(arc)
            .ok_or_else(|| NetworkError::UnknownArc(arc.to_string()))?;
        Ok(self.incidence_at(i, j))
    }

    /// Incidence coefficient by index. Panics on out-of-range indices.
    pub fn incidence_at(&self, i: usize, j: usize) -> i8 {
        let arc = &self.arcs[j];
        assert!(i < self.nodes.len(), "node index {i} out of range");
        if arc.tail == i {
            1
        } else if arc.head == i {
            -1
        } else {
            0
        }
    }

    fn check_dims(&self, v: &BlockVector, blocks: usize) -> Result<(), NetworkError> {
        let dim = self.num_commodities();
        if v.blocks() != blocks || v.dim() != dim {
            return Err(NetworkError::Dimension {
                expected_blocks: blocks,
                expected_dim: dim,
                blocks: v.blocks(),
                dim: v.dim(),
            });
        }
        Ok(())
    }

    /// Outflow minus inflow at every node.
    pub fn divergence(&self, x: &Flow) -> Result<BlockVector, NetworkError> {
        self.check_dims(x, self.num_arcs())?;
        let mut out = BlockVector::zeros(self.num_nodes(), self.num_commodities());
        self.divergence_into(x, &mut out);
        Ok(out)
    }

    /// Head-minus-tail potential difference across every arc.
    pub fn tension(&self, v: &Potential) -> Result<BlockVector, NetworkError> {
        self.check_dims(v, self.num_nodes())?;
        let mut out = BlockVector::zeros(self.num_arcs(), self.num_commodities());
        self.tension_into(v, &mut out);
        Ok(out)
    }

    /// Unchecked divergence of an arc-indexed block vector into `out`.
    pub(crate) fn divergence_into(&self, x: &BlockVector, out: &mut BlockVector) {
        for i in 0..self.num_nodes() {
            self.divergence_at_into(i, x, out.block_mut(i));
        }
    }

    /// Divergence at a single node, summed in ascending arc order.
    pub(crate) fn divergence_at_into(&self, i: usize, x: &BlockVector, out: &mut [f64]) {
        out.fill(0.0);
        for &(j, eps) in &self.incident[i] {
            for (o, xv) in out.iter_mut().zip(x.block(j)) {
                *o += eps * xv;
            }
        }
    }

    pub(crate) fn tension_into(&self, v: &BlockVector, out: &mut BlockVector) {
        for j in 0..self.num_arcs() {
            self.tension_at_into(j, v, out.block_mut(j));
        }
    }

    pub(crate) fn tension_at_into(&self, j: usize, v: &BlockVector, out: &mut [f64]) {
        let arc = &self.arcs[j];
        for ((o, h), t) in out.iter_mut().zip(v.block(arc.head)).zip(v.block(arc.tail)) {
            *o = h - t;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arc(id: &str, t: &str, h: &str) -> (String, String, String) {
        (id.into(), t.into(), h.into())
    }

    fn single_arc() -> Network {
        Network::new(["a", "b", "c"], [arc("j", "a", "b")], ["k"]).unwrap()
    }

    #[test]
    fn incidence_signs() {
        let net = single_arc();
        assert_eq!(net.incidence("a", "j").unwrap(), 1);
        assert_eq!(net.incidence("b", "j").unwrap(), -1);
        assert_eq!(net.incidence("c", "j").unwrap(), 0);
        assert_eq!(
            net.incidence("z", "j"),
            Err(NetworkError::UnknownNode("z".into()))
        );
        assert_eq!(
            net.incidence("a", "q"),
            Err(NetworkError::UnknownArc("q".into()))
        );
    }

    #[test]
    fn divergence_of_single_arc() {
        let net = single_arc();
        let x = Flow::from_blocks(1, &[[5.0]]).unwrap();
        let d = net.divergence(&x).unwrap();
        assert_eq!(d.as_slice(), &[5.0, -5.0, 0.0]);
    }

    #[test]
    fn tension_of_single_arc() {
        let net = single_arc();
        let v = Potential::from_blocks(1, &[[1.0], [4.0], [0.0]]).unwrap();
        assert_eq!(net.tension(&v).unwrap().as_slice(), &[3.0]);
        let c = Potential::from_blocks(1, &[[2.5], [2.5], [2.5]]).unwrap();
        assert_eq!(net.tension(&c).unwrap().as_slice(), &[0.0]);
    }

    #[test]
    fn zero_flow_has_zero_divergence() {
        let net = single_arc();
        let d = net.divergence(&Flow::zeros(1, 1)).unwrap();
        assert!(d.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_topology() {
        assert_eq!(
            Network::new(["a"], [arc("loop", "a", "a")], ["k"]),
            Err(NetworkError::SelfLoop("loop".into()))
        );
        assert_eq!(
            Network::new(["a", "a"], [arc("j", "a", "a")], ["k"]),
            Err(NetworkError::DuplicateNode("a".into()))
        );
        assert_eq!(
            Network::new(["a", "b"], [arc("j", "a", "b"), arc("j", "b", "a")], ["k"]),
            Err(NetworkError::DuplicateArc("j".into()))
        );
        assert!(matches!(
            Network::new(["a", "b"], [arc("j", "a", "x")], ["k"]),
            Err(NetworkError::DanglingEndpoint { .. })
        ));
        assert_eq!(
            Network::new(["a", "b"], Vec::new(), ["k"]),
            Err(NetworkError::NoArcs)
        );
    }

    #[test]
    fn parallel_arcs_allowed() {
        let net =
            Network::new(["a", "b"], [arc("1", "a", "b"), arc("2", "a", "b")], ["k"]).unwrap();
        assert_eq!(net.out_arcs(0).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(net.in_arcs(1).collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let net = single_arc();
        let x = Flow::zeros(2, 1);
        assert!(matches!(
            net.divergence(&x),
            Err(NetworkError::Dimension { .. })
        ));
        let v = Potential::zeros(3, 2);
        assert!(matches!(
            net.tension(&v),
            Err(NetworkError::Dimension { .. })
        ));
    }
}
