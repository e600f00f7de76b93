//! Built-in property checks run by `netequil selftest`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::network::Network;
use crate::operators::{lambert_w, ScalarCapacity, SeparableLift, BRANCH_POINT};
use crate::oracle::{analytic_two_arc, TwoArcInstance};
use crate::solver::{run, SolverConfig, SolverState, Termination};
use crate::vector::{BlockVector, Flow, Potential};

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

const SAMPLES: usize = 500;

pub fn run_all(seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    vec![
        resolvent_identities(&mut rng),
        lambert_identity(),
        lift_structure(&mut rng),
        adjointness(&mut rng),
        two_arc_solve(),
    ]
}

fn random_capacity(rng: &mut ChaCha8Rng, family: usize) -> ScalarCapacity {
    match family {
        0 => ScalarCapacity::Bpr {
            alpha: rng.gen_range(0.01..5.0),
            rho: rng.gen_range(0.1..10.0),
            theta: rng.gen_range(0.01..5.0),
            p: rng.gen_range(0.5..6.0),
        },
        1 => ScalarCapacity::Logarithmic {
            omega: rng.gen_range(0.1..10.0),
            theta: rng.gen_range(0.0..5.0),
        },
        2 => ScalarCapacity::Trc {
            alpha: rng.gen_range(0.01..5.0),
            beta: rng.gen_range(0.01..5.0),
            delta: rng.gen_range(0.01..5.0),
            omega: rng.gen_range(0.1..10.0),
        },
        _ => ScalarCapacity::PowerExp {
            alpha: rng.gen_range(1.01..4.0),
            theta: rng.gen_range(0.01..5.0),
            p: rng.gen_range(0.1..3.0),
        },
    }
}

fn resolvent_identities(rng: &mut ChaCha8Rng) -> CheckResult {
    let mut worst = 0.0f64;
    let mut failures = 0;
    for family in 0..4 {
        for _ in 0..SAMPLES {
            let c = random_capacity(rng, family);
            let gamma = rng.gen_range(0.05..5.0);
            let xi = match c {
                // keep ω - J representable
                ScalarCapacity::Logarithmic { omega, theta } => {
                    omega + gamma * theta + gamma * rng.gen_range(-30.0..20.0)
                }
                _ => rng.gen_range(-50.0..50.0),
            };
            let s = c.resolvent(gamma, xi);
            let err = match c.value(s) {
                Some(v) => (s + gamma * v - xi).abs() / xi.abs().max(1.0),
                None => f64::INFINITY,
            };
            worst = worst.max(err);
            if err > 1e-8 {
                failures += 1;
            }
        }
    }
    CheckResult {
        name: "resolvent identity",
        passed: failures == 0,
        detail: format!("{failures} failures, worst scaled error {worst:.3e}"),
    }
}

fn lambert_identity() -> CheckResult {
    let lo = BRANCH_POINT + 1e-9;
    let mut worst = 0.0f64;
    for k in 0..=400 {
        let t = k as f64 / 400.0;
        // log-spaced offset from the branch point up to 1e6
        let x = lo + (1e-9f64).powf(1.0 - t) * (1e6f64 - lo).powf(t) - 1e-9;
        let x = x.max(lo);
        let w = match lambert_w(x) {
            Ok(w) => w,
            Err(_) => return fail("lambert W", format!("rejected {x}")),
        };
        worst = worst.max((w * w.exp() - x).abs() / x.abs().max(1.0));
    }
    CheckResult {
        name: "lambert W",
        passed: worst <= 1e-12,
        detail: format!("worst scaled error {worst:.3e}"),
    }
}

fn lift_structure(rng: &mut ChaCha8Rng) -> CheckResult {
    let mut worst = 0.0f64;
    for _ in 0..SAMPLES {
        let family = rng.gen_range(0..4);
        let c = random_capacity(rng, family);
        let lift = SeparableLift { scalar: c };
        let n = rng.gen_range(1..6);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let gamma = rng.gen_range(0.1..3.0);
        let out = lift.resolvent(gamma, &x);
        let sum_in: f64 = x.iter().sum();
        let sum_out: f64 = out.iter().sum();
        let expect = c.resolvent(n as f64 * gamma, sum_in);
        worst = worst.max((sum_out - expect).abs() / expect.abs().max(1.0));
    }
    CheckResult {
        name: "separable lift",
        passed: worst <= 1e-10,
        detail: format!("worst sum mismatch {worst:.3e}"),
    }
}

fn adjointness(rng: &mut ChaCha8Rng) -> CheckResult {
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let nodes = rng.gen_range(2..20usize);
        let arcs = rng.gen_range(1..60usize);
        let dim = rng.gen_range(1..5usize);
        let arc_list: Vec<_> = (0..arcs)
            .map(|j| {
                let t = rng.gen_range(0..nodes);
                let h = (t + rng.gen_range(1..nodes)) % nodes;
                (format!("e{j}"), format!("n{t}"), format!("n{h}"))
            })
            .collect();
        let node_ids: Vec<String> = (0..nodes).map(|i| format!("n{i}")).collect();
        let comm: Vec<String> = (0..dim).map(|k| format!("c{k}")).collect();
        let net = Network::new(node_ids, arc_list, comm).expect("valid random network");
        let x = Flow(BlockVector::from_flat(
            dim,
            (0..arcs * dim)
                .map(|_| rng.gen_range(-10.0..10.0))
                .collect(),
        ));
        let v = Potential(BlockVector::from_flat(
            dim,
            (0..nodes * dim)
                .map(|_| rng.gen_range(-10.0..10.0))
                .collect(),
        ));
        let div = net.divergence(&x).expect("dims");
        let ten = net.tension(&v).expect("dims");
        let lhs = div.dot(&v);
        let rhs = x.dot(&ten);
        let scale = lhs.abs().max(rhs.abs()).max(1.0);
        worst = worst.max((lhs + rhs).abs() / scale);
    }
    CheckResult {
        name: "adjointness",
        passed: worst <= 1e-12,
        detail: format!("worst relative mismatch {worst:.3e}"),
    }
}

fn two_arc_solve() -> CheckResult {
    let inst = TwoArcInstance::new([1.0, 2.0], [1.0, 1.0], 3.0).expect("valid instance");
    let exact = analytic_two_arc(&inst);
    let problem = inst.problem().expect("valid problem");
    let cfg = SolverConfig {
        max_iter: 100_000,
        ..SolverConfig::default()
    };
    let out = match run(&problem, &cfg, SolverState::zeros(&problem)) {
        Ok(o) => o,
        Err(e) => return fail("two-arc solve", e.to_string()),
    };
    let x = out.state.x.as_slice();
    let err = (x[0] - exact.flow[0])
        .abs()
        .max((x[1] - exact.flow[1]).abs());
    CheckResult {
        name: "two-arc solve",
        passed: out.termination == Termination::Converged && err <= 1e-5,
        detail: format!(
            "{:?} after {} iterations, flow error {err:.3e}",
            out.termination, out.iterations
        ),
    }
}

fn fail(name: &'static str, detail: String) -> CheckResult {
    CheckResult {
        name,
        passed: false,
        detail,
    }
}

#[cfg(test)]
mod tests {
    #[test]
    fn selftest_passes() {
        for r in super::run_all(1) {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }
}
