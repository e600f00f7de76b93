use thiserror::Error;

use crate::network::Network;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("step parameter `{name}`[{index}] = {value} must be a positive finite number")]
    NonPositiveStep {
        name: &'static str,
        index: usize,
        value: f64,
    },
    #[error("step parameter `{name}` has {got} entries, expected {expected}")]
    StepLength {
        name: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("relaxation parameter {0} is outside ]0, 2[")]
    Relaxation(f64),
    #[error("relaxation schedule is empty")]
    EmptyRelaxation,
    #[error("tolerance {0} must be a nonnegative finite number")]
    Tolerance(f64),
    #[error("check interval must be at least 1")]
    CheckInterval,
    #[error("thread count must be at least 1")]
    Threads,
    #[error("scheduler: {0}")]
    Scheduler(String),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("initial state does not match the network dimensions")]
    StateDimension,
}

/// Per-block step parameter: one value for every block, or one per block.
#[derive(Debug, Clone, PartialEq)]
pub enum StepParam {
    Uniform(f64),
    PerBlock(Vec<f64>),
}

impl StepParam {
    pub fn get(&self, i: usize) -> f64 {
        match self {
            StepParam::Uniform(v) => *v,
            StepParam::PerBlock(vs) => vs[i],
        }
    }

    fn validate(&self, name: &'static str, count: usize) -> Result<(), ConfigError> {
        let check = |index: usize, value: f64| {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::NonPositiveStep { name, index, value })
            }
        };
        match self {
            StepParam::Uniform(v) => check(0, *v),
            StepParam::PerBlock(vs) => {
                if vs.len() != count {
                    return Err(ConfigError::StepLength {
                        name,
                        expected: count,
                        got: vs.len(),
                    });
                }
                vs.iter().enumerate().try_for_each(|(i, v)| check(i, *v))
            }
        }
    }
}

/// Relaxation sequence `λ_n`.
#[derive(Debug, Clone, PartialEq)]
pub enum Relaxation {
    Constant(f64),
    /// `λ_n = values[n]`, holding the last value once the list runs out.
    Schedule(Vec<f64>),
}

impl Relaxation {
    pub fn at(&self, n: u64) -> f64 {
        match self {
            Relaxation::Constant(l) => *l,
            Relaxation::Schedule(vs) => {
                let idx = usize::try_from(n).unwrap_or(usize::MAX).min(vs.len() - 1);
                vs[idx]
            }
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let check = |l: f64| {
            if l > 0.0 && l < 2.0 {
                Ok(())
            } else {
                Err(ConfigError::Relaxation(l))
            }
        };
        match self {
            Relaxation::Constant(l) => check(*l),
            Relaxation::Schedule(vs) => {
                if vs.is_empty() {
                    return Err(ConfigError::EmptyRelaxation);
                }
                vs.iter().try_for_each(|l| check(*l))
            }
        }
    }
}

/// Block activation policy.
#[derive(Debug, Clone, PartialEq)]
pub enum SchedulerSpec {
    /// Every block at every iteration.
    Full,
    /// Cycle through arc groups and node groups independently.
    RoundRobin {
        arc_groups: Vec<Vec<usize>>,
        node_groups: Vec<Vec<usize>>,
    },
    /// Activate each block with probability `activation_prob`, forcing any
    /// block idle for the whole sweep window.
    RandomSweep { seed: u64, activation_prob: f64 },
}

impl SchedulerSpec {
    /// Round robin over `k` groups, block `b` going to group `b mod k`.
    /// Blocks are split into at most as many groups as there are blocks.
    pub fn round_robin(num_arcs: usize, num_nodes: usize, k: usize) -> Self {
        let split = |count: usize| {
            let groups = k.clamp(1, count.max(1));
            (0..groups)
                .map(|g| (g..count).step_by(groups).collect())
                .collect()
        };
        SchedulerSpec::RoundRobin {
            arc_groups: split(num_arcs),
            node_groups: split(num_nodes),
        }
    }
}

/// Solver parameters. Defaults: unit steps, `λ ≡ 1.8`, full activation,
/// `tol = 1e-6`, residual checked every 10 iterations, `10^6` iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub gamma: StepParam,
    pub mu: StepParam,
    pub sigma: StepParam,
    pub relaxation: Relaxation,
    /// `T` in the sweeping condition: every block is active at least once
    /// in any `T + 1` consecutive iterations.
    pub sweep_bound: usize,
    pub scheduler: SchedulerSpec,
    pub tol: f64,
    pub max_iter: u64,
    pub check_interval: u64,
    pub threads: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gamma: StepParam::Uniform(1.0),
            mu: StepParam::Uniform(1.0),
            sigma: StepParam::Uniform(1.0),
            relaxation: Relaxation::Constant(1.8),
            sweep_bound: 0,
            scheduler: SchedulerSpec::Full,
            tol: 1e-6,
            max_iter: 1_000_000,
            check_interval: 10,
            threads: 1,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, net: &Network) -> Result<(), ConfigError> {
        self.gamma.validate("gamma", net.num_arcs())?;
        self.mu.validate("mu", net.num_arcs())?;
        self.sigma.validate("sigma", net.num_nodes())?;
        self.relaxation.validate()?;
        if !(self.tol.is_finite() && self.tol >= 0.0) {
            return Err(ConfigError::Tolerance(self.tol));
        }
        if self.check_interval == 0 {
            return Err(ConfigError::CheckInterval);
        }
        if self.threads == 0 {
            return Err(ConfigError::Threads);
        }
        super::schedule::validate_scheduler(
            &self.scheduler,
            self.sweep_bound,
            net.num_arcs(),
            net.num_nodes(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_robin_groups_stride() {
        let spec = SchedulerSpec::round_robin(5, 2, 3);
        assert_eq!(
            spec,
            SchedulerSpec::RoundRobin {
                arc_groups: vec![vec![0, 3], vec![1, 4], vec![2]],
                node_groups: vec![vec![0], vec![1]],
            }
        );
    }

    #[test]
    fn relaxation_schedule_holds_last_value() {
        let r = Relaxation::Schedule(vec![1.0, 1.5]);
        assert_eq!(r.at(0), 1.0);
        assert_eq!(r.at(1), 1.5);
        assert_eq!(r.at(100), 1.5);
        assert!(Relaxation::Schedule(vec![1.0, 2.0]).validate().is_err());
        assert!(Relaxation::Constant(0.0).validate().is_err());
    }

    #[test]
    fn step_param_validation() {
        assert!(StepParam::Uniform(-1.0).validate("gamma", 3).is_err());
        assert!(matches!(
            StepParam::PerBlock(vec![1.0, 1.0]).validate("mu", 3),
            Err(ConfigError::StepLength { .. })
        ));
        assert!(StepParam::PerBlock(vec![1.0, 2.0, 0.5])
            .validate("mu", 3)
            .is_ok());
    }
}
