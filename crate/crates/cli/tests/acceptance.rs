//! Acceptance suite: one pass/fail line per criterion.

use std::path::{Path, PathBuf};
use std::process::Command;

use netequil_cli::format::{parse_problem, serialize_problem};
use netequil_core::operators::lambert_w;
use netequil_core::oracle::{
    analytic_two_arc, braess, frank_wolfe_reference, wardrop_residual, TwoArcInstance,
};
use netequil_core::solver::{step, sweep_violations, ActiveSet, BlockSelector, Workspace};
use netequil_core::{
    residual, run, ArcDual, BlockVector, Flow, Network, Potential, ScalarCapacity, SchedulerSpec,
    SeparableLift, SolverConfig, SolverState, Termination,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

fn main() {
    let criteria: [(&str, Check); 10] = [
        ("resolvent identity", resolvent_identity),
        ("lambert W", lambert),
        ("separable lift", separable_lift),
        ("adjointness", adjointness),
        ("two-arc equilibrium", two_arc),
        ("braess vs frank-wolfe", braess_vs_frank_wolfe),
        ("fejer monotonicity", fejer),
        ("sweeping enforcement", sweeping),
        ("degenerate branches", degenerate),
        ("cli", cli),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {detail}", k + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Cost values computed from the formulas, without the toolbox.
fn cost(c: &ScalarCapacity, s: f64) -> f64 {
    match *c {
        ScalarCapacity::Bpr {
            alpha,
            rho,
            theta,
            p,
        } => {
            if s >= 0.0 {
                theta * (1.0 + alpha * (s / rho).powf(p))
            } else {
                theta
            }
        }
        ScalarCapacity::Logarithmic { omega, theta } => {
            if s < omega {
                theta + omega.ln() - (omega - s).ln()
            } else {
                f64::INFINITY
            }
        }
        ScalarCapacity::Trc {
            alpha,
            beta,
            delta,
            omega,
        } => delta + alpha * (s - omega) + (alpha * alpha * (s - omega).powi(2) + beta).sqrt(),
        ScalarCapacity::PowerExp { alpha, theta, p } => theta * alpha.powf(p * s),
        ScalarCapacity::IntervalProx { .. } => unreachable!("set-valued"),
    }
}

fn draw_capacity(rng: &mut ChaCha8Rng, family: usize) -> ScalarCapacity {
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

/// Root of the increasing map `s ↦ s + γc(s) - ξ` by bisection.
fn invert(c: &ScalarCapacity, gamma: f64, xi: f64) -> f64 {
    let f = |s: f64| s + gamma * cost(c, s) - xi;
    let hi = xi;
    let mut width = 1.0;
    while f(hi - width) > 0.0 {
        width *= 2.0;
    }
    let (mut lo, mut hi) = (hi - width, hi);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn resolvent_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let names = ["bpr", "logarithmic", "trc", "powerexp"];
    let mut worst = [0.0f64; 4];
    let mut trc_worst = 0.0f64;
    for (family, w) in worst.iter_mut().enumerate() {
        for _ in 0..1000 {
            let c = draw_capacity(&mut rng, family);
            let gamma = rng.gen_range(0.05..5.0);
            let xi = match c {
                // Keeps ω - J above the spacing of floats near ω.
                ScalarCapacity::Logarithmic { omega, theta } => {
                    omega + gamma * theta + gamma * rng.gen_range(-30.0..20.0)
                }
                _ => rng.gen_range(-50.0..50.0),
            };
            let j = c.resolvent(gamma, xi);
            let scale = xi.abs().max(1.0);
            *w = w.max((j + gamma * cost(&c, j) - xi).abs() / scale);
            if family == 2 {
                trc_worst = trc_worst.max((j - invert(&c, gamma, xi)).abs() / scale);
            }
        }
    }
    let detail = names
        .iter()
        .zip(worst)
        .map(|(n, w)| format!("{n} {w:.2e}"))
        .collect::<Vec<_>>()
        .join(", ");
    ensure(
        worst.iter().all(|&w| w <= 1e-8) && trc_worst <= 1e-10,
        format!("worst scaled |J + γc(J) - ξ|: {detail}; trc vs bisection {trc_worst:.2e}"),
    )
}

fn lambert() -> Outcome {
    let lo = -(-1.0f64).exp() + 1e-9;
    let mut worst = 0.0f64;
    let points = 2000;
    for k in 0..=points {
        let t = k as f64 / points as f64;
        // log-spaced distance from the branch point
        let x = (lo + (1e-9f64).powf(1.0 - t) * (1e6f64 + 1e-9 - lo).powf(t) - 1e-9).max(lo);
        let w = lambert_w(x).map_err(|e| e.to_string())?;
        worst = worst.max((w * w.exp() - x).abs() / x.abs().max(1.0));
    }
    let w0 = lambert_w(0.0).map_err(|e| e.to_string())?;
    let we = lambert_w(std::f64::consts::E).map_err(|e| e.to_string())?;
    ensure(
        worst <= 1e-12 && w0.abs() <= 1e-15 && (we - 1.0).abs() <= 1e-15,
        format!(
            "worst scaled error {worst:.2e}, W(0) = {w0}, W(e) - 1 = {:.1e}",
            we - 1.0
        ),
    )
}

fn separable_lift() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut sum_worst, mut diff_worst) = (0.0f64, 0.0f64);
    for _ in 0..2000 {
        let family = rng.gen_range(0..4);
        let lift =
            SeparableLift::new(draw_capacity(&mut rng, family)).map_err(|e| e.to_string())?;
        let n = rng.gen_range(1..8);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let gamma = rng.gen_range(0.1..3.0);
        let out = lift.resolvent(gamma, &x);
        let expect = lift.scalar.resolvent(n as f64 * gamma, x.iter().sum());
        let total: f64 = out.iter().sum();
        sum_worst = sum_worst.max((total - expect).abs() / expect.abs().max(1.0));
        // out_k = x_k + η, so differences agree up to the rounding of that sum.
        let shift = out[0] - x[0];
        let ulp = f64::EPSILON * (x.iter().fold(0.0f64, |m, v| m.max(v.abs())) + shift.abs());
        for k in 0..n {
            for l in 0..k {
                let err = ((out[k] - out[l]) - (x[k] - x[l])).abs();
                diff_worst = diff_worst.max(err / ulp.max(f64::MIN_POSITIVE));
            }
        }
    }
    ensure(
        sum_worst <= 1e-10 && diff_worst <= 4.0,
        format!("sum mismatch {sum_worst:.2e}, difference error {diff_worst:.1} ulp"),
    )
}

fn adjointness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let nodes = rng.gen_range(2..=20usize);
        let arcs = rng.gen_range(1..=60usize);
        let dim = rng.gen_range(1..=4usize);
        let arc_list: Vec<_> = (0..arcs)
            .map(|j| {
                let t = rng.gen_range(0..nodes);
                let h = (t + rng.gen_range(1..nodes)) % nodes;
                (format!("e{j}"), format!("n{t}"), format!("n{h}"))
            })
            .collect();
        let net = Network::new(
            (0..nodes).map(|i| format!("n{i}")),
            arc_list,
            (0..dim).map(|k| format!("c{k}")),
        )
        .map_err(|e| e.to_string())?;
        let mut field = |n: usize| {
            BlockVector::from_flat(
                dim,
                (0..n * dim).map(|_| rng.gen_range(-10.0..10.0)).collect(),
            )
        };
        let x = Flow(field(arcs));
        let v = Potential(field(nodes));
        let lhs = net.divergence(&x).map_err(|e| e.to_string())?.dot(&v);
        let rhs = x.dot(&net.tension(&v).map_err(|e| e.to_string())?);
        worst = worst.max((lhs + rhs).abs() / lhs.abs().max(rhs.abs()).max(1.0));
    }
    ensure(
        worst <= 1e-12,
        format!("worst relative mismatch {worst:.2e} over 100 networks"),
    )
}

fn two_arc_schedulers() -> Vec<(&'static str, SchedulerSpec, usize)> {
    vec![
        ("full", SchedulerSpec::Full, 0),
        ("roundrobin", SchedulerSpec::round_robin(2, 2, 2), 1),
        (
            "randomsweep",
            SchedulerSpec::RandomSweep {
                seed: 5,
                activation_prob: 0.5,
            },
            3,
        ),
    ]
}

fn two_arc() -> Outcome {
    let inst = TwoArcInstance::new([1.0, 2.0], [1.0, 1.0], 3.0).map_err(|e| e.to_string())?;
    let exact = analytic_two_arc(&inst);
    let problem = inst.problem().map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, spec, t) in two_arc_schedulers() {
        let cfg = SolverConfig {
            scheduler: spec,
            sweep_bound: t,
            max_iter: 100_000,
            tol: 1e-6,
            ..SolverConfig::default()
        };
        let out = run(&problem, &cfg, SolverState::zeros(&problem)).map_err(|e| e.to_string())?;
        let x = out.state.x.as_slice();
        let v = out.state.v.as_slice();
        let flow_err = (x[0] - exact.flow[0])
            .abs()
            .max((x[1] - exact.flow[1]).abs());
        let tension_err = (v[1] - v[0] - 3.0).abs();
        ok &= out.termination == Termination::Converged
            && out.residual <= 1e-6
            && flow_err <= 1e-5
            && tension_err <= 1e-5;
        parts.push(format!(
            "{name}: {} it, res {:.1e}, flow err {flow_err:.1e}, tension err {tension_err:.1e}",
            out.iterations, out.residual
        ));
    }
    ensure(ok, parts.join("; "))
}

fn braess_vs_frank_wolfe() -> Outcome {
    let inst = braess();
    let fw = frank_wolfe_reference(&inst.problem.network, &inst.costs, &inst.supplies, 100_000)
        .map_err(|e| e.to_string())?;
    let out = run(
        &inst.problem,
        &SolverConfig::default(),
        SolverState::zeros(&inst.problem),
    )
    .map_err(|e| e.to_string())?;
    let gap = out
        .state
        .x
        .as_slice()
        .iter()
        .zip(fw.as_slice())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let w =
        wardrop_residual(&inst.problem, &out.state.x, &out.state.v).map_err(|e| e.to_string())?;
    ensure(
        out.termination == Termination::Converged && gap <= 1e-3 && w <= 1e-5,
        format!("max |x - x_fw| = {gap:.2e}, wardrop residual {w:.2e}"),
    )
}

fn fejer() -> Outcome {
    let inst = TwoArcInstance::new([1.0, 2.0], [1.0, 1.0], 3.0).map_err(|e| e.to_string())?;
    let problem = inst.problem().map_err(|e| e.to_string())?;
    let cfg = SolverConfig::default();
    let target = SolverState {
        x: Flow(BlockVector::from_flat(1, vec![2.0, 1.0])),
        x_dual: ArcDual(BlockVector::from_flat(1, vec![0.0, 0.0])),
        v: Potential(BlockVector::from_flat(1, vec![-1.5, 1.5])),
        iteration: 0,
    };
    let verified = residual(&problem, &cfg, &target);
    if verified > 1e-12 {
        return Err(format!("reference point has residual {verified:.2e}"));
    }
    let dist = |s: &SolverState| {
        (s.x.distance_sq(&target.x)
            + s.x_dual.distance_sq(&target.x_dual)
            + s.v.distance_sq(&target.v))
        .sqrt()
    };
    let mut state = SolverState::zeros(&problem);
    let mut ws = Workspace::for_problem(&problem);
    let all = ActiveSet::full(2, 2);
    let mut worst_increase = f64::NEG_INFINITY;
    let steps = 500;
    for _ in 0..steps {
        let before = dist(&state);
        step(&problem, &cfg, &mut state, &mut ws, &all, 1.8).map_err(|e| e.to_string())?;
        worst_increase = worst_increase.max(dist(&state) - before);
    }
    ensure(
        worst_increase <= 1e-10,
        format!("{steps} steps, largest distance change {worst_increase:.2e}"),
    )
}

fn sweeping() -> Outcome {
    let (arcs, nodes) = (7, 5);
    let specs = [
        ("full", SchedulerSpec::Full, 0),
        (
            "roundrobin:2",
            SchedulerSpec::round_robin(arcs, nodes, 2),
            1,
        ),
        (
            "roundrobin:4",
            SchedulerSpec::round_robin(arcs, nodes, 4),
            3,
        ),
        (
            "randomsweep:0.5",
            SchedulerSpec::RandomSweep {
                seed: 8,
                activation_prob: 0.5,
            },
            3,
        ),
        (
            "randomsweep:0.01",
            SchedulerSpec::RandomSweep {
                seed: 8,
                activation_prob: 0.01,
            },
            2,
        ),
    ];
    let mut total = 0;
    for (_, spec, t) in &specs {
        let mut sel =
            BlockSelector::new(spec.clone(), *t, arcs, nodes).map_err(|e| e.to_string())?;
        let history: Vec<ActiveSet> = (0..1000).map(|n| sel.select(n)).collect();
        total += sweep_violations(&history, *t, arcs, nodes);
    }
    let too_slow = BlockSelector::new(SchedulerSpec::round_robin(arcs, nodes, 3), 1, arcs, nodes);
    let skips = BlockSelector::new(
        SchedulerSpec::RoundRobin {
            arc_groups: vec![vec![0, 1, 2], vec![3, 4, 5]],
            node_groups: vec![(0..nodes).collect()],
        },
        1,
        arcs,
        nodes,
    );
    let mut bad_cfg = SolverConfig {
        scheduler: SchedulerSpec::round_robin(5, 4, 3),
        sweep_bound: 1,
        ..SolverConfig::default()
    };
    let inst = braess();
    let rejected_run = run(&inst.problem, &bad_cfg, SolverState::zeros(&inst.problem)).is_err();
    bad_cfg.sweep_bound = 2;
    let accepted_run = run(&inst.problem, &bad_cfg, SolverState::zeros(&inst.problem)).is_ok();
    ensure(
        total == 0 && too_slow.is_err() && skips.is_err() && rejected_run && accepted_run,
        format!(
            "{total} violations over {} schedulers x 1000 iterations; broken schedulers rejected: {}",
            specs.len(),
            too_slow.is_err() && skips.is_err() && rejected_run
        ),
    )
}

fn degenerate() -> Outcome {
    let inst = TwoArcInstance::new([1.0, 2.0], [1.0, 1.0], 3.0).map_err(|e| e.to_string())?;
    let problem = inst.problem().map_err(|e| e.to_string())?;
    let cfg = SolverConfig::default();
    let all = ActiveSet::full(2, 2);

    // τ = 0 at a solution.
    let mut s = SolverState {
        x: Flow(BlockVector::from_flat(1, vec![2.0, 1.0])),
        x_dual: ArcDual(BlockVector::from_flat(1, vec![0.0, 0.0])),
        v: Potential(BlockVector::from_flat(1, vec![-1.5, 1.5])),
        iteration: 0,
    };
    let before = s.clone();
    let mut ws = Workspace::for_problem(&problem);
    let a = step(&problem, &cfg, &mut s, &mut ws, &all, 1.8).map_err(|e| e.to_string())?;
    let tau_ok = a.tau == 0.0 && a.theta == 0.0 && bitwise_equal(&s, &before);

    // π <= 0: a stale cache on an inactive arc places the state inside the
    // half-space.
    let mut s = SolverState {
        x: Flow(BlockVector::from_flat(1, vec![1.0, 0.5])),
        x_dual: ArcDual(BlockVector::from_flat(1, vec![0.2, -0.1])),
        v: Potential(BlockVector::from_flat(1, vec![0.3, 0.7])),
        iteration: 0,
    };
    let mut ws = Workspace::for_problem(&problem);
    step(&problem, &cfg, &mut s, &mut ws, &all, 1.0).map_err(|e| e.to_string())?;
    ws.r.block_mut(1)[0] = s.x.block(1)[0] + 100.0;
    ws.r_dual.block_mut(1)[0] = s.x_dual.block(1)[0] + 100.0;
    let before = s.clone();
    let partial = ActiveSet {
        arcs: vec![0],
        nodes: vec![0, 1],
    };
    let b = step(&problem, &cfg, &mut s, &mut ws, &partial, 1.0).map_err(|e| e.to_string())?;
    let pi_ok = b.tau > 0.0 && b.pi <= 0.0 && b.theta == 0.0 && bitwise_equal(&s, &before);

    ensure(
        tau_ok && pi_ok,
        format!(
            "tau = 0 branch unchanged: {tau_ok}; pi = {:.3e} branch unchanged: {pi_ok}",
            b.pi
        ),
    )
}

fn bitwise_equal(a: &SolverState, b: &SolverState) -> bool {
    let bits = |s: &SolverState| -> Vec<u64> {
        s.x.as_slice()
            .iter()
            .chain(s.x_dual.as_slice())
            .chain(s.v.as_slice())
            .map(|v| v.to_bits())
            .collect()
    };
    bits(a) == bits(b)
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn cli() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_netequil");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fixtures = ["two_arc.prob", "braess.prob", "minimal.prob", "multi.prob"];
    for name in fixtures {
        let text = std::fs::read_to_string(fixture(name)).map_err(|e| e.to_string())?;
        let first = parse_problem(&text)
            .map_err(|e| format!("{name}: {e}"))?
            .value;
        let second = parse_problem(&serialize_problem(&first))
            .map_err(|e| format!("{name}: {e}"))?
            .value;
        if first != second {
            return Err(format!("{name} does not round-trip"));
        }
        let sol = dir.path().join(format!("{name}.sol"));
        let status = Command::new(bin)
            .args(["solve", "-q"])
            .arg(fixture(name))
            .arg("--out")
            .arg(&sol)
            .env_remove("NETEQUIL_THREADS")
            .status()
            .map_err(|e| e.to_string())?;
        if status.code() != Some(0) {
            return Err(format!("solve {name} exited with {status}"));
        }
        let status = Command::new(bin)
            .arg("check")
            .arg(fixture(name))
            .arg(&sol)
            .output()
            .map_err(|e| e.to_string())?;
        if status.status.code() != Some(0) {
            return Err(format!("check {name} exited with {}", status.status));
        }
    }
    let mut traces = Vec::new();
    for run in 0..2 {
        let path = dir.path().join(format!("trace{run}.csv"));
        Command::new(bin)
            .args([
                "solve",
                "-q",
                "--scheduler",
                "randomsweep:0.4",
                "--seed",
                "17",
            ])
            .arg(fixture("braess.prob"))
            .arg("--trace")
            .arg(&path)
            .stdout(std::process::Stdio::null())
            .status()
            .map_err(|e| e.to_string())?;
        traces.push(std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    ensure(
        traces[0] == traces[1] && !traces[0].is_empty(),
        format!(
            "{} fixtures round-trip, solve and check exit 0; trace of {} bytes identical across runs",
            fixtures.len(),
            traces[0].len()
        ),
    )
}
