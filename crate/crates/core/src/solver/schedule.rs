//! Block selection under the sweeping condition.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ConfigError, SchedulerSpec};

/// Arcs and nodes activated at one iteration, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSet {
    pub arcs: Vec<usize>,
    pub nodes: Vec<usize>,
}

impl ActiveSet {
    pub fn full(num_arcs: usize, num_nodes: usize) -> Self {
        Self {
            arcs: (0..num_arcs).collect(),
            nodes: (0..num_nodes).collect(),
        }
    }
}

pub(crate) fn validate_scheduler(
    spec: &SchedulerSpec,
    sweep_bound: usize,
    num_arcs: usize,
    num_nodes: usize,
) -> Result<(), ConfigError> {
    match spec {
        SchedulerSpec::Full => Ok(()),
        SchedulerSpec::RoundRobin {
            arc_groups,
            node_groups,
        } => {
            check_groups("arc", arc_groups, num_arcs, sweep_bound)?;
            check_groups("node", node_groups, num_nodes, sweep_bound)
        }
        SchedulerSpec::RandomSweep {
            activation_prob, ..
        } => {
            if (0.0..=1.0).contains(activation_prob) {
                Ok(())
            } else {
                Err(ConfigError::Scheduler(format!(
                    "activation probability {activation_prob} is outside [0, 1]"
                )))
            }
        }
    }
}

fn check_groups(
    kind: &str,
    groups: &[Vec<usize>],
    count: usize,
    sweep_bound: usize,
) -> Result<(), ConfigError> {
    if groups.is_empty() {
        return Err(ConfigError::Scheduler(format!("no {kind} groups")));
    }
    if groups.len() > sweep_bound + 1 {
        return Err(ConfigError::Scheduler(format!(
            "{} {kind} groups cannot be swept within T + 1 = {} iterations",
            groups.len(),
            sweep_bound + 1
        )));
    }
    let mut covered = vec![false; count];
    for (g, group) in groups.iter().enumerate() {
        if group.is_empty() {
            return Err(ConfigError::Scheduler(format!("{kind} group {g} is empty")));
        }
        for &b in group {
            if b >= count {
                return Err(ConfigError::Scheduler(format!(
                    "{kind} group {g} references {kind} {b}, only {count} exist"
                )));
            }
            covered[b] = true;
        }
    }
    if let Some(missing) = covered.iter().position(|c| !c) {
        return Err(ConfigError::Scheduler(format!(
            "{kind} {missing} belongs to no group and would never be activated"
        )));
    }
    Ok(())
}

/// Produces `(A_n, N_n)` for `n = 0, 1, 2, ...`. Iteration 0 activates
/// every block.
#[derive(Debug, Clone)]
pub struct BlockSelector {
    spec: SchedulerSpec,
    sweep_bound: u64,
    num_arcs: usize,
    num_nodes: usize,
    rng: ChaCha8Rng,
    last_arc: Vec<u64>,
    last_node: Vec<u64>,
    next: u64,
}

impl BlockSelector {
    pub fn new(
        spec: SchedulerSpec,
        sweep_bound: usize,
        num_arcs: usize,
        num_nodes: usize,
    ) -> Result<Self, ConfigError> {
        validate_scheduler(&spec, sweep_bound, num_arcs, num_nodes)?;
        let seed = match spec {
            SchedulerSpec::RandomSweep { seed, .. } => seed,
            _ => 0,
        };
        Ok(Self {
            spec,
            sweep_bound: sweep_bound as u64,
            num_arcs,
            num_nodes,
            rng: ChaCha8Rng::seed_from_u64(seed),
            last_arc: vec![0; num_arcs],
            last_node: vec![0; num_nodes],
            next: 0,
        })
    }

    /// Activation sets for iteration `n`. The random scheduler is
    /// history-dependent; asking for an earlier iteration replays the
    /// sequence from its seed.
    pub fn select(&mut self, n: u64) -> ActiveSet {
        if n == 0 {
            self.reset();
            self.next = 1;
            return ActiveSet::full(self.num_arcs, self.num_nodes);
        }
        match &self.spec {
            SchedulerSpec::Full => ActiveSet::full(self.num_arcs, self.num_nodes),
            SchedulerSpec::RoundRobin {
                arc_groups,
                node_groups,
            } => ActiveSet {
                arcs: sorted(&arc_groups[(n % arc_groups.len() as u64) as usize]),
                nodes: sorted(&node_groups[(n % node_groups.len() as u64) as usize]),
            },
            SchedulerSpec::RandomSweep {
                activation_prob, ..
            } => {
                let p = *activation_prob;
                if self.next == 0 || n < self.next {
                    self.reset();
                    self.next = 1;
                }
                let mut out = None;
                while self.next <= n {
                    let k = self.next;
                    let arcs = draw(&mut self.rng, &mut self.last_arc, k, self.sweep_bound, p);
                    let nodes = draw(&mut self.rng, &mut self.last_node, k, self.sweep_bound, p);
                    out = Some(ActiveSet { arcs, nodes });
                    self.next += 1;
                }
                out.expect("loop runs at least once")
            }
        }
    }

    fn reset(&mut self) {
        if let SchedulerSpec::RandomSweep { seed, .. } = self.spec {
            self.rng = ChaCha8Rng::seed_from_u64(seed);
        }
        self.last_arc.fill(0);
        self.last_node.fill(0);
    }
}

fn sorted(group: &[usize]) -> Vec<usize> {
    let mut g = group.to_vec();
    g.sort_unstable();
    g.dedup();
    g
}

fn draw(rng: &mut ChaCha8Rng, last: &mut [u64], n: u64, sweep_bound: u64, p: f64) -> Vec<usize> {
    let mut active = Vec::new();
    for (b, l) in last.iter().enumerate() {
        // Always consume one draw per block so the stream does not depend on
        // which blocks were forced.
        let coin = rng.gen::<f64>() < p;
        if coin || n - l > sweep_bound {
            active.push(b);
        }
    }
    if active.is_empty() && !last.is_empty() {
        let stalest = (0..last.len()).min_by_key(|&b| last[b]).unwrap();
        active.push(stalest);
    }
    for &b in &active {
        last[b] = n;
    }
    active
}

/// Counts windows `[n, n + T]` of `history` (which must start at iteration
/// 0) whose arc or node union misses a block, plus one if iteration 0 is not
/// a full activation. Only complete windows are examined.
pub fn sweep_violations(
    history: &[ActiveSet],
    sweep_bound: usize,
    num_arcs: usize,
    num_nodes: usize,
) -> usize {
    let mut violations = 0;
    if let Some(first) = history.first() {
        if *first != ActiveSet::full(num_arcs, num_nodes) {
            violations += 1;
        }
    }
    let width = sweep_bound + 1;
    if history.len() < width {
        return violations;
    }
    for window in history.windows(width) {
        let mut arcs = vec![false; num_arcs];
        let mut nodes = vec![false; num_nodes];
        for set in window {
            set.arcs.iter().for_each(|&j| arcs[j] = true);
            set.nodes.iter().for_each(|&i| nodes[i] = true);
        }
        if arcs.contains(&false) || nodes.contains(&false) {
            violations += 1;
        }
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;

    fn history(sel: &mut BlockSelector, len: u64) -> Vec<ActiveSet> {
        (0..len).map(|n| sel.select(n)).collect()
    }

    #[test]
    fn full_scheduler_activates_everything() {
        let mut sel = BlockSelector::new(SchedulerSpec::Full, 0, 3, 2).unwrap();
        for n in 0..5 {
            assert_eq!(sel.select(n), ActiveSet::full(3, 2));
        }
    }

    #[test]
    fn round_robin_alternates() {
        let spec = SchedulerSpec::round_robin(4, 2, 2);
        let mut sel = BlockSelector::new(spec, 1, 4, 2).unwrap();
        let h = history(&mut sel, 11);
        assert_eq!(h[0], ActiveSet::full(4, 2));
        for (n, set) in h.iter().enumerate().skip(1) {
            let expect = if n % 2 == 0 { vec![0, 2] } else { vec![1, 3] };
            assert_eq!(set.arcs, expect);
        }
        assert_eq!(sweep_violations(&h, 1, 4, 2), 0);
    }

    #[test]
    fn round_robin_too_many_groups_rejected() {
        let spec = SchedulerSpec::round_robin(4, 4, 3);
        assert!(matches!(
            BlockSelector::new(spec, 1, 4, 4),
            Err(ConfigError::Scheduler(_))
        ));
    }

    #[test]
    fn round_robin_missing_block_rejected() {
        let spec = SchedulerSpec::RoundRobin {
            arc_groups: vec![vec![0], vec![1]],
            node_groups: vec![vec![0, 1]],
        };
        assert!(BlockSelector::new(spec, 1, 3, 2).is_err());
    }

    #[test]
    fn random_sweep_with_zero_probability_is_forced() {
        let spec = SchedulerSpec::RandomSweep {
            seed: 7,
            activation_prob: 0.0,
        };
        let mut sel = BlockSelector::new(spec, 3, 5, 4).unwrap();
        let h = history(&mut sel, 100);
        assert_eq!(sweep_violations(&h, 3, 5, 4), 0);
        for set in &h {
            assert!(!set.arcs.is_empty() && !set.nodes.is_empty());
        }
    }

    #[test]
    fn random_sweep_replays_deterministically() {
        let spec = SchedulerSpec::RandomSweep {
            seed: 42,
            activation_prob: 0.3,
        };
        let mut a = BlockSelector::new(spec.clone(), 2, 6, 3).unwrap();
        let h = history(&mut a, 50);
        let mut b = BlockSelector::new(spec, 2, 6, 3).unwrap();
        assert_eq!(b.select(20), h[20]);
        assert_eq!(b.select(5), h[5]);
        assert_eq!(sweep_violations(&h, 2, 6, 3), 0);
    }

    #[test]
    fn violation_counter_detects_gaps() {
        let h = vec![
            ActiveSet::full(2, 1),
            ActiveSet {
                arcs: vec![0],
                nodes: vec![0],
            },
            ActiveSet {
                arcs: vec![0],
                nodes: vec![0],
            },
        ];
        assert_eq!(sweep_violations(&h, 1, 2, 1), 1);
    }
}
