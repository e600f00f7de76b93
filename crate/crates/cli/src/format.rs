//! Problem and solution files.
//!
//! Both are TOML documents whose first key, `format`, names the schema and
//! its version. Numbers are written in the shortest form that reads back to
//! the same `f64`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use netequil_core::solver::ConfigError;
use netequil_core::{
    ArcDual, ArcOperator, BlockVector, BoxSet, Flow, Network, NetworkError, NodeOperator,
    Potential, Problem, Relaxation, RunOutcome, ScalarCapacity, ScalarFunction, SchedulerSpec,
    SolverConfig, StepParam, Termination,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::{Table, Value};

pub const PROBLEM_FORMAT: &str = "netequil-problem/1";
pub const SOLUTION_FORMAT: &str = "netequil-solution/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Code {
    Syntax,
    Header,
    UnknownFamily,
    ParameterRange,
    DanglingReference,
    MissingEntry,
    Structure,
    SolverOption,
    Mismatch,
    DefaultConstraint,
    Unbalanced,
}

impl Code {
    pub fn as_str(self) -> &'static str {
        match self {
            Code::Syntax => "E001",
            Code::Header => "E002",
            Code::UnknownFamily => "E003",
            Code::ParameterRange => "E004",
            Code::DanglingReference => "E005",
            Code::MissingEntry => "E006",
            Code::Structure => "E007",
            Code::SolverOption => "E008",
            Code::Mismatch => "E009",
            Code::DefaultConstraint => "W001",
            Code::Unbalanced => "W002",
        }
    }

    pub fn is_warning(self) -> bool {
        matches!(self, Code::DefaultConstraint | Code::Unbalanced)
    }
}

/// One finding, located by section and (when applicable) entity id.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub code: Code,
    pub section: String,
    pub entity: Option<String>,
    pub message: String,
}

impl Diagnostic {
    fn new(code: Code, section: &str, entity: Option<&str>, message: impl Into<String>) -> Self {
        Self {
            code,
            section: section.to_string(),
            entity: entity.map(str::to_string),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = if self.code.is_warning() {
            "warning"
        } else {
            "error"
        };
        write!(f, "{level}[{}] {}", self.code.as_str(), self.section)?;
        if let Some(e) = &self.entity {
            write!(f, " `{e}`")?;
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}", .diagnostics.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"))]
pub struct FormatError {
    pub diagnostics: Vec<Diagnostic>,
}

impl FormatError {
    fn one(d: Diagnostic) -> Self {
        Self {
            diagnostics: vec![d],
        }
    }

    pub fn has(&self, code: Code) -> bool {
        self.diagnostics.iter().any(|d| d.code == code)
    }
}

/// Scheduler selector as written on the command line and in files:
/// `full`, `roundrobin:K` or `randomsweep:p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SchedulerChoice {
    Full,
    RoundRobin(usize),
    RandomSweep(f64),
}

impl SchedulerChoice {
    /// `T` used when none is given.
    pub fn default_sweep_bound(self) -> usize {
        match self {
            SchedulerChoice::Full => 0,
            SchedulerChoice::RoundRobin(k) => k.saturating_sub(1),
            SchedulerChoice::RandomSweep(_) => 3,
        }
    }
}

impl FromStr for SchedulerChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        match (kind, arg) {
            ("full", None) => Ok(SchedulerChoice::Full),
            ("roundrobin", Some(a)) => match a.parse::<usize>() {
                Ok(k) if k >= 1 => Ok(SchedulerChoice::RoundRobin(k)),
                _ => Err(format!("roundrobin needs a group count >= 1, got `{a}`")),
            },
            ("randomsweep", Some(a)) => match a.parse::<f64>() {
                Ok(p) if (0.0..=1.0).contains(&p) => Ok(SchedulerChoice::RandomSweep(p)),
                _ => Err(format!(
                    "randomsweep needs a probability in [0, 1], got `{a}`"
                )),
            },
            _ => Err(format!(
                "unknown scheduler `{s}` (expected full, roundrobin:K or randomsweep:p)"
            )),
        }
    }
}

impl TryFrom<String> for SchedulerChoice {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl fmt::Display for SchedulerChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchedulerChoice::Full => write!(f, "full"),
            SchedulerChoice::RoundRobin(k) => write!(f, "roundrobin:{k}"),
            SchedulerChoice::RandomSweep(p) => write!(f, "randomsweep:{p}"),
        }
    }
}

impl From<SchedulerChoice> for String {
    fn from(c: SchedulerChoice) -> String {
        c.to_string()
    }
}

/// A single value for every block or one value per block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Steps {
    Scalar(f64),
    List(Vec<f64>),
}

/// Optional `[solver]` section.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Steps>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Steps>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Steps>,
    /// Constant relaxation or a per-iteration schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Steps>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub sweep_bound: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheduler: Option<SchedulerChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check_interval: Option<u64>,
}

impl SolverOptions {
    fn is_empty(&self) -> bool {
        *self == SolverOptions::default()
    }
}

/// Command-line values that take precedence over the `[solver]` section.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub tol: Option<f64>,
    pub max_iter: Option<u64>,
    pub scheduler: Option<SchedulerChoice>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

/// A parsed problem file.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemFile {
    pub problem: Problem,
    pub solver: SolverOptions,
}

/// Result of [`parse_problem`]: the problem plus any warnings.
#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub value: T,
    pub warnings: Vec<Diagnostic>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    format: String,
    nodes: Vec<String>,
    commodities: Vec<String>,
    #[serde(default)]
    node_operators: BTreeMap<String, Vec<f64>>,
    arcs: Vec<RawArc>,
    #[serde(default, skip_serializing_if = "SolverOptions::is_empty")]
    solver: SolverOptions,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArc {
    id: String,
    tail: String,
    head: String,
    cost: Table,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    constraint: Option<Value>,
}

fn syntax(section: &str, err: impl fmt::Display) -> FormatError {
    FormatError::one(Diagnostic::new(
        Code::Syntax,
        section,
        None,
        err.to_string().trim_end().to_string(),
    ))
}

fn check_header(text: &str, expected: &str) -> Result<(), FormatError> {
    let table: Table = text.parse().map_err(|e| syntax("document", e))?;
    match table.get("format") {
        Some(Value::String(f)) if f == expected => Ok(()),
        Some(Value::String(f)) => Err(FormatError::one(Diagnostic::new(
            Code::Header,
            "format",
            None,
            format!("unsupported format `{f}`, expected `{expected}`"),
        ))),
        _ => Err(FormatError::one(Diagnostic::new(
            Code::Header,
            "format",
            None,
            format!("missing `format = \"{expected}\"` header"),
        ))),
    }
}

fn number(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

/// Reads the named numeric keys of `table`, rejecting missing, extra and
/// non-numeric entries.
fn params<const N: usize>(
    table: &Table,
    names: [&str; N],
    skip: &[&str],
    section: &str,
    entity: &str,
) -> Result<[f64; N], Diagnostic> {
    for key in table.keys() {
        if !names.contains(&key.as_str()) && !skip.contains(&key.as_str()) {
            return Err(Diagnostic::new(
                Code::Syntax,
                section,
                Some(entity),
                format!("unexpected key `{key}` (expected {})", names.join(", ")),
            ));
        }
    }
    let mut out = [0.0; N];
    for (slot, name) in out.iter_mut().zip(names) {
        let v = table.get(name).ok_or_else(|| {
            Diagnostic::new(
                Code::Syntax,
                section,
                Some(entity),
                format!("missing `{name}`"),
            )
        })?;
        *slot = number(v).ok_or_else(|| {
            Diagnostic::new(
                Code::Syntax,
                section,
                Some(entity),
                format!("`{name}` must be a number"),
            )
        })?;
    }
    Ok(out)
}

fn string_key<'a>(table: &'a Table, key: &str, entity: &str) -> Result<&'a str, Diagnostic> {
    match table.get(key) {
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(Diagnostic::new(
            Code::Syntax,
            "arcs",
            Some(entity),
            format!("`{key}` must be a string"),
        )),
        None => Err(Diagnostic::new(
            Code::Syntax,
            "arcs",
            Some(entity),
            format!("missing `{key}`"),
        )),
    }
}

fn parse_phi(value: &Value, arc: &str) -> Result<ScalarFunction, Diagnostic> {
    let table = value
        .as_table()
        .ok_or_else(|| Diagnostic::new(Code::Syntax, "arcs", Some(arc), "`phi` must be a table"))?;
    let kind = string_key(table, "kind", arc)?;
    let skip = ["kind"];
    match kind {
        "zero" => params(table, [], &skip, "arcs", arc).map(|[]| ScalarFunction::Zero),
        "affine" => params(table, ["slope", "offset"], &skip, "arcs", arc)
            .map(|[slope, offset]| ScalarFunction::Affine { slope, offset }),
        "quadratic" => params(table, ["curvature"], &skip, "arcs", arc)
            .map(|[curvature]| ScalarFunction::Quadratic { curvature }),
        "power" => params(table, ["weight", "exponent"], &skip, "arcs", arc)
            .map(|[weight, exponent]| ScalarFunction::Power { weight, exponent }),
        other => Err(Diagnostic::new(
            Code::UnknownFamily,
            "arcs",
            Some(arc),
            format!("unknown function kind `{other}` (expected zero, affine, quadratic, power)"),
        )),
    }
}

fn parse_cost(table: &Table, arc: &str) -> Result<ScalarCapacity, Diagnostic> {
    let family = string_key(table, "family", arc)?;
    let skip = ["family"];
    let cap = match family {
        "bpr" => params(table, ["alpha", "rho", "theta", "p"], &skip, "arcs", arc).map(
            |[alpha, rho, theta, p]| ScalarCapacity::Bpr {
                alpha,
                rho,
                theta,
                p,
            },
        )?,
        "logarithmic" => params(table, ["omega", "theta"], &skip, "arcs", arc)
            .map(|[omega, theta]| ScalarCapacity::Logarithmic { omega, theta })?,
        "trc" => params(
            table,
            ["alpha", "beta", "delta", "omega"],
            &skip,
            "arcs",
            arc,
        )
        .map(|[alpha, beta, delta, omega]| ScalarCapacity::Trc {
            alpha,
            beta,
            delta,
            omega,
        })?,
        "powerexp" => params(table, ["alpha", "theta", "p"], &skip, "arcs", arc)
            .map(|[alpha, theta, p]| ScalarCapacity::PowerExp { alpha, theta, p })?,
        "interval_prox" => {
            let [lo, hi] = params(table, ["lo", "hi"], &["family", "phi"], "arcs", arc)?;
            let phi = match table.get("phi") {
                Some(v) => parse_phi(v, arc)?,
                None => ScalarFunction::Zero,
            };
            ScalarCapacity::IntervalProx { phi, lo, hi }
        }
        other => {
            return Err(Diagnostic::new(
                Code::UnknownFamily,
                "arcs",
                Some(arc),
                format!(
                    "unknown cost family `{other}` \
                     (expected bpr, logarithmic, trc, powerexp, interval_prox)"
                ),
            ))
        }
    };
    cap.validate()
        .map_err(|e| Diagnostic::new(Code::ParameterRange, "arcs", Some(arc), e.to_string()))?;
    Ok(cap)
}

fn float_list(value: Option<&Value>, key: &str, arc: &str) -> Result<Vec<f64>, Diagnostic> {
    let bad = || {
        Diagnostic::new(
            Code::Syntax,
            "arcs",
            Some(arc),
            format!("`constraint.{key}` must be an array of numbers"),
        )
    };
    value
        .and_then(Value::as_array)
        .ok_or_else(bad)?
        .iter()
        .map(|v| number(v).ok_or_else(bad))
        .collect()
}

fn parse_constraint(
    value: Option<&Value>,
    arc: &str,
    dim: usize,
    warnings: &mut Vec<Diagnostic>,
) -> Result<BoxSet, Diagnostic> {
    match value {
        None => {
            warnings.push(Diagnostic::new(
                Code::DefaultConstraint,
                "arcs",
                Some(arc),
                "no constraint given; using the nonnegative orthant",
            ));
            Ok(BoxSet::orthant(dim))
        }
        Some(Value::String(s)) if s == "orthant" => Ok(BoxSet::orthant(dim)),
        Some(Value::Table(t)) => {
            if let Some(key) = t.keys().find(|k| *k != "lo" && *k != "hi") {
                return Err(Diagnostic::new(
                    Code::Syntax,
                    "arcs",
                    Some(arc),
                    format!("unexpected key `constraint.{key}` (expected lo, hi)"),
                ));
            }
            let lo = float_list(t.get("lo"), "lo", arc)?;
            let hi = float_list(t.get("hi"), "hi", arc)?;
            if lo.len() != dim || hi.len() != dim {
                return Err(Diagnostic::new(
                    Code::MissingEntry,
                    "arcs",
                    Some(arc),
                    format!(
                        "box bounds need one entry per commodity ({dim}), got {} and {}",
                        lo.len(),
                        hi.len()
                    ),
                ));
            }
            BoxSet::new(lo, hi).map_err(|e| {
                Diagnostic::new(Code::ParameterRange, "arcs", Some(arc), e.to_string())
            })
        }
        Some(_) => Err(Diagnostic::new(
            Code::Syntax,
            "arcs",
            Some(arc),
            "`constraint` must be \"orthant\" or a table with `lo` and `hi`",
        )),
    }
}

fn network_diagnostic(e: NetworkError) -> Diagnostic {
    let (section, entity) = match &e {
        NetworkError::NoNodes | NetworkError::DuplicateNode(_) => ("nodes", None),
        NetworkError::NoCommodities | NetworkError::DuplicateCommodity(_) => ("commodities", None),
        NetworkError::DuplicateArc(a) | NetworkError::SelfLoop(a) => ("arcs", Some(a.clone())),
        NetworkError::DanglingEndpoint { arc, .. } => ("arcs", Some(arc.clone())),
        _ => ("arcs", None),
    };
    let code = match e {
        NetworkError::DanglingEndpoint { .. } => Code::DanglingReference,
        _ => Code::Structure,
    };
    Diagnostic::new(code, section, entity.as_deref(), e.to_string())
}

/// Parses and fully validates a problem document. Every error found is
/// reported; warnings are returned alongside the result.
pub fn parse_problem(text: &str) -> Result<Parsed<ProblemFile>, FormatError> {
    check_header(text, PROBLEM_FORMAT)?;
    let raw: RawProblem = toml::from_str(text).map_err(|e| syntax("document", e))?;

    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    let dim = raw.commodities.len();

    let known: std::collections::HashSet<&str> = raw.nodes.iter().map(String::as_str).collect();
    let mut ops = Vec::with_capacity(raw.arcs.len());
    for arc in &raw.arcs {
        for (end, node) in [("tail", &arc.tail), ("head", &arc.head)] {
            if !known.contains(node.as_str()) {
                errors.push(Diagnostic::new(
                    Code::DanglingReference,
                    "arcs",
                    Some(&arc.id),
                    format!("{end} `{node}` is not a declared node"),
                ));
            }
        }
        let cost = parse_cost(&arc.cost, &arc.id);
        let constraint = parse_constraint(arc.constraint.as_ref(), &arc.id, dim, &mut warnings);
        match (cost, constraint) {
            (Ok(c), Ok(b)) => match ArcOperator::new(c, b) {
                Ok(op) => ops.push(op),
                Err(e) => errors.push(Diagnostic::new(
                    Code::ParameterRange,
                    "arcs",
                    Some(&arc.id),
                    e.to_string(),
                )),
            },
            (c, b) => errors.extend(c.err().into_iter().chain(b.err())),
        }
    }

    for (node, supply) in &raw.node_operators {
        if !known.contains(node.as_str()) {
            errors.push(Diagnostic::new(
                Code::DanglingReference,
                "node_operators",
                Some(node),
                "supply given for an undeclared node",
            ));
        } else if supply.len() != dim {
            errors.push(Diagnostic::new(
                Code::MissingEntry,
                "node_operators",
                Some(node),
                format!(
                    "supply has {} entries, expected one per commodity ({dim})",
                    supply.len()
                ),
            ));
        } else if let Some(k) = supply.iter().position(|s| !s.is_finite()) {
            errors.push(Diagnostic::new(
                Code::ParameterRange,
                "node_operators",
                Some(node),
                format!("supply entry {k} is not finite"),
            ));
        }
    }

    if !errors.is_empty() {
        return Err(FormatError {
            diagnostics: errors,
        });
    }

    let network = Network::new(
        raw.nodes.clone(),
        raw.arcs
            .iter()
            .map(|a| (a.id.clone(), a.tail.clone(), a.head.clone())),
        raw.commodities.clone(),
    )
    .map_err(|e| FormatError::one(network_diagnostic(e)))?;

    let nodes: Vec<NodeOperator> = raw
        .nodes
        .iter()
        .map(|n| {
            NodeOperator::FixedSupply(
                raw.node_operators
                    .get(n)
                    .cloned()
                    .unwrap_or_else(|| vec![0.0; dim]),
            )
        })
        .collect();
    for (k, c) in raw.commodities.iter().enumerate() {
        let total: f64 = nodes.iter().map(|n| n.supply()[k]).sum();
        let scale: f64 = nodes.iter().map(|n| n.supply()[k].abs()).sum();
        if total.abs() > 1e-12 * scale.max(1.0) {
            warnings.push(Diagnostic::new(
                Code::Unbalanced,
                "node_operators",
                Some(c),
                format!("supplies sum to {total}; no equilibrium exists"),
            ));
        }
    }

    let problem = Problem::new(network, ops, nodes).map_err(|e| {
        FormatError::one(Diagnostic::new(
            Code::Structure,
            "document",
            None,
            e.to_string(),
        ))
    })?;
    let file = ProblemFile {
        problem,
        solver: raw.solver,
    };
    file.config(&Overrides::default()).map_err(|e| {
        FormatError::one(Diagnostic::new(
            Code::SolverOption,
            "solver",
            None,
            e.to_string(),
        ))
    })?;
    Ok(Parsed {
        value: file,
        warnings,
    })
}

fn phi_table(phi: ScalarFunction) -> Table {
    let mut t = Table::new();
    let mut put = |k: &str, v: Value| {
        t.insert(k.to_string(), v);
    };
    match phi {
        ScalarFunction::Zero => put("kind", "zero".into()),
        ScalarFunction::Affine { slope, offset } => {
            put("kind", "affine".into());
            put("slope", slope.into());
            put("offset", offset.into());
        }
        ScalarFunction::Quadratic { curvature } => {
            put("kind", "quadratic".into());
            put("curvature", curvature.into());
        }
        ScalarFunction::Power { weight, exponent } => {
            put("kind", "power".into());
            put("weight", weight.into());
            put("exponent", exponent.into());
        }
    }
    t
}

fn cost_table(cap: &ScalarCapacity) -> Table {
    let mut t = Table::new();
    t.insert("family".into(), cap.family().into());
    let entries: Vec<(&str, Value)> = match *cap {
        ScalarCapacity::Bpr {
            alpha,
            rho,
            theta,
            p,
        } => vec![
            ("alpha", alpha.into()),
            ("rho", rho.into()),
            ("theta", theta.into()),
            ("p", p.into()),
        ],
        ScalarCapacity::Logarithmic { omega, theta } => {
            vec![("omega", omega.into()), ("theta", theta.into())]
        }
        ScalarCapacity::Trc {
            alpha,
            beta,
            delta,
            omega,
        } => vec![
            ("alpha", alpha.into()),
            ("beta", beta.into()),
            ("delta", delta.into()),
            ("omega", omega.into()),
        ],
        ScalarCapacity::PowerExp { alpha, theta, p } => vec![
            ("alpha", alpha.into()),
            ("theta", theta.into()),
            ("p", p.into()),
        ],
        ScalarCapacity::IntervalProx { phi, lo, hi } => vec![
            ("lo", lo.into()),
            ("hi", hi.into()),
            ("phi", Value::Table(phi_table(phi))),
        ],
    };
    for (k, v) in entries {
        t.insert(k.into(), v);
    }
    t
}

fn floats(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| Value::Float(x)).collect())
}

/// Writes `file` back as a problem document. Constraints are always
/// spelled out, so the output parses without warnings.
pub fn serialize_problem(file: &ProblemFile) -> String {
    let net = &file.problem.network;
    let arcs = net
        .arcs()
        .iter()
        .zip(&file.problem.arcs)
        .map(|(arc, op)| {
            let constraint = if op.constraint.is_orthant() {
                Value::String("orthant".into())
            } else {
                let mut t = Table::new();
                t.insert("lo".into(), floats(op.constraint.lower()));
                t.insert("hi".into(), floats(op.constraint.upper()));
                Value::Table(t)
            };
            RawArc {
                id: arc.id.clone(),
                tail: net.nodes()[arc.tail].clone(),
                head: net.nodes()[arc.head].clone(),
                cost: cost_table(&op.cost.scalar),
                constraint: Some(constraint),
            }
        })
        .collect();
    let node_operators = net
        .nodes()
        .iter()
        .zip(&file.problem.nodes)
        .map(|(n, op)| (n.clone(), op.supply().to_vec()))
        .collect();
    let raw = RawProblem {
        format: PROBLEM_FORMAT.into(),
        nodes: net.nodes().to_vec(),
        commodities: net.commodities().to_vec(),
        node_operators,
        arcs,
        solver: file.solver.clone(),
    };
    toml::to_string(&raw).expect("problem documents always serialize")
}

fn step_param(s: &Option<Steps>) -> StepParam {
    match s {
        None => StepParam::Uniform(1.0),
        Some(Steps::Scalar(v)) => StepParam::Uniform(*v),
        Some(Steps::List(v)) => StepParam::PerBlock(v.clone()),
    }
}

impl ProblemFile {
    /// Solver configuration from the `[solver]` section, with `o` taking
    /// precedence. Unset values fall back to [`SolverConfig::default`].
    pub fn config(&self, o: &Overrides) -> Result<SolverConfig, ConfigError> {
        let s = &self.solver;
        let net = &self.problem.network;
        let base = SolverConfig::default();
        let choice = o.scheduler.or(s.scheduler).unwrap_or(SchedulerChoice::Full);
        let seed = o.seed.or(s.seed).unwrap_or(0);
        let scheduler = match choice {
            SchedulerChoice::Full => SchedulerSpec::Full,
            SchedulerChoice::RoundRobin(k) => {
                SchedulerSpec::round_robin(net.num_arcs(), net.num_nodes(), k)
            }
            SchedulerChoice::RandomSweep(p) => SchedulerSpec::RandomSweep {
                seed,
                activation_prob: p,
            },
        };
        let sweep_bound = match (o.scheduler, s.sweep_bound) {
            (None, Some(t)) => t,
            _ => choice.default_sweep_bound(),
        };
        let cfg = SolverConfig {
            gamma: step_param(&s.gamma),
            mu: step_param(&s.mu),
            sigma: step_param(&s.sigma),
            relaxation: match &s.lambda {
                None => base.relaxation.clone(),
                Some(Steps::Scalar(l)) => Relaxation::Constant(*l),
                Some(Steps::List(l)) => Relaxation::Schedule(l.clone()),
            },
            sweep_bound,
            scheduler,
            tol: o.tol.or(s.tol).unwrap_or(base.tol),
            max_iter: o.max_iter.or(s.max_iter).unwrap_or(base.max_iter),
            check_interval: s.check_interval.unwrap_or(base.check_interval),
            threads: o.threads.unwrap_or(base.threads),
        };
        cfg.validate(net)?;
        netequil_core::BlockSelector::new(
            cfg.scheduler.clone(),
            cfg.sweep_bound,
            net.num_arcs(),
            net.num_nodes(),
        )?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationKind {
    Converged,
    IterLimit,
    NumericalFailure,
}

impl From<&Termination> for TerminationKind {
    fn from(t: &Termination) -> Self {
        match t {
            Termination::Converged => TerminationKind::Converged,
            Termination::IterLimit => TerminationKind::IterLimit,
            Termination::NumericalFailure(_) => TerminationKind::NumericalFailure,
        }
    }
}

/// Final iterate of a run, keyed by arc and node ids.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionFile {
    pub flow: Flow,
    pub dual: ArcDual,
    pub potential: Potential,
    pub residual: f64,
    pub iterations: u64,
    pub termination: TerminationKind,
}

impl SolutionFile {
    pub fn from_outcome(out: &RunOutcome) -> Self {
        Self {
            flow: out.state.x.clone(),
            dual: out.state.x_dual.clone(),
            potential: out.state.v.clone(),
            residual: out.residual,
            iterations: out.iterations,
            termination: (&out.termination).into(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolution {
    format: String,
    termination: TerminationKind,
    iterations: u64,
    residual: f64,
    arcs: Vec<RawArcSolution>,
    nodes: Vec<RawNodeSolution>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArcSolution {
    id: String,
    flow: Vec<f64>,
    dual: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNodeSolution {
    id: String,
    potential: Vec<f64>,
}

pub fn serialize_solution(net: &Network, sol: &SolutionFile) -> String {
    let raw = RawSolution {
        format: SOLUTION_FORMAT.into(),
        termination: sol.termination,
        iterations: sol.iterations,
        residual: sol.residual,
        arcs: net
            .arcs()
            .iter()
            .enumerate()
            .map(|(j, a)| RawArcSolution {
                id: a.id.clone(),
                flow: sol.flow.block(j).to_vec(),
                dual: sol.dual.block(j).to_vec(),
            })
            .collect(),
        nodes: net
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, n)| RawNodeSolution {
                id: n.clone(),
                potential: sol.potential.block(i).to_vec(),
            })
            .collect(),
    };
    toml::to_string(&raw).expect("solution documents always serialize")
}

/// Places `entries` (id, vectors) into block order of `ids`, checking that
/// every id appears exactly once with `dim`-long vectors.
fn collect_blocks<const K: usize>(
    section: &str,
    ids: &[String],
    index: impl Fn(&str) -> Option<usize>,
    entries: Vec<(String, [Vec<f64>; K])>,
    dim: usize,
    errors: &mut Vec<Diagnostic>,
) -> [Vec<f64>; K] {
    let mut out: [Vec<f64>; K] = std::array::from_fn(|_| vec![0.0; ids.len() * dim]);
    let mut seen = vec![false; ids.len()];
    for (id, vectors) in entries {
        let Some(b) = index(&id) else {
            errors.push(Diagnostic::new(
                Code::DanglingReference,
                section,
                Some(&id),
                "id does not exist in the problem",
            ));
            continue;
        };
        if std::mem::replace(&mut seen[b], true) {
            errors.push(Diagnostic::new(
                Code::Structure,
                section,
                Some(&id),
                "listed twice",
            ));
            continue;
        }
        for (dst, src) in out.iter_mut().zip(vectors) {
            if src.len() != dim {
                errors.push(Diagnostic::new(
                    Code::Mismatch,
                    section,
                    Some(&id),
                    format!("vector has {} entries, expected {dim}", src.len()),
                ));
            } else {
                dst[b * dim..(b + 1) * dim].copy_from_slice(&src);
            }
        }
    }
    for (b, s) in seen.iter().enumerate() {
        if !s {
            errors.push(Diagnostic::new(
                Code::MissingEntry,
                section,
                Some(&ids[b]),
                "missing from the solution",
            ));
        }
    }
    out
}

/// Parses a solution document against the network it claims to solve.
pub fn parse_solution(text: &str, net: &Network) -> Result<SolutionFile, FormatError> {
    check_header(text, SOLUTION_FORMAT)?;
    let raw: RawSolution = toml::from_str(text).map_err(|e| syntax("document", e))?;
    let dim = net.num_commodities();
    let arc_ids: Vec<String> = net.arcs().iter().map(|a| a.id.clone()).collect();
    let mut errors = Vec::new();
    let [flow, dual] = collect_blocks(
        "arcs",
        &arc_ids,
        |id| net.arc_index(id),
        raw.arcs
            .into_iter()
            .map(|a| (a.id, [a.flow, a.dual]))
            .collect(),
        dim,
        &mut errors,
    );
    let [potential] = collect_blocks(
        "nodes",
        net.nodes(),
        |id| net.node_index(id),
        raw.nodes
            .into_iter()
            .map(|n| (n.id, [n.potential]))
            .collect(),
        dim,
        &mut errors,
    );
    if !errors.is_empty() {
        return Err(FormatError {
            diagnostics: errors,
        });
    }
    Ok(SolutionFile {
        flow: Flow(BlockVector::from_flat(dim, flow)),
        dual: ArcDual(BlockVector::from_flat(dim, dual)),
        potential: Potential(BlockVector::from_flat(dim, potential)),
        residual: raw.residual,
        iterations: raw.iterations,
        termination: raw.termination,
    })
}
