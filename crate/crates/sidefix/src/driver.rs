//! One-stop orchestration of a single analysis run: parse, generate
//! constraints, solve under a configuration, verify, and judge asserts.
//! The command-line front end and the test suites share these paths.

use std::str::FromStr;

use thiserror::Error;

use crate::constraints::{register_synthetic_system, SyntheticSystem, UnknownSpec};
use crate::frontend::{check_asserts, parse, AssertVerdict, AssertSite, ContextMode, FrontendError, ProgramSystem};
use crate::lattice::{CounterValue, Lattice, Thresholds, Value};
use crate::rules::{check_rule_soundness, make_rule, Gas, Ops, RuleKind, RuleVerdict};
use crate::solver::{
    solve_topdown, solve_worklist, verify_post_solution, PostVerdict, SolveResult, SolverConfig,
    SolverKind,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ThresholdChoice {
    None,
    Auto,
    List(Vec<i64>),
}

impl FromStr for ThresholdChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(ThresholdChoice::None),
            "auto" => Ok(ThresholdChoice::Auto),
            list => {
                // Comma-separated on the command line; semicolons inside
                // compact config specs (whose fields are comma-separated).
                let vals: Result<Vec<i64>, _> = list
                    .split([',', ';'])
                    .map(|v| v.trim().parse())
                    .collect();
                vals.map(ThresholdChoice::List)
                    .map_err(|_| format!("invalid threshold list `{list}`"))
            }
        }
    }
}

impl ThresholdChoice {
    pub fn render(&self) -> String {
        match self {
            ThresholdChoice::None => "none".to_string(),
            ThresholdChoice::Auto => "auto".to_string(),
            ThresholdChoice::List(vs) => {
                vs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
            }
        }
    }
}

/// The full configuration of one analysis run.
#[derive(Clone, Debug)]
pub struct Settings {
    pub rule: RuleKind,
    pub gas: Gas,
    pub gc: bool,
    pub solver: SolverKind,
    pub context: ContextMode,
    pub thresholds: ThresholdChoice,
    pub max_updates: Option<usize>,
    pub requery: bool,
    /// Record the update trace and run the dynamic rule checker and the
    /// post-solution verification.
    pub check: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            rule: RuleKind::Reluctant,
            gas: Gas::Finite(3),
            gc: false,
            solver: SolverKind::Topdown,
            context: ContextMode::Unit,
            thresholds: ThresholdChoice::None,
            max_updates: Some(10_000),
            requery: true,
            check: false,
        }
    }
}

impl Settings {
    pub fn label(&self) -> String {
        let mut parts = vec![self.rule.as_str().to_string()];
        if self.gc {
            parts.push("gc".to_string());
        }
        parts.push(format!("gas={}", self.gas));
        parts.push(self.solver.as_str().to_string());
        parts.push(format!("ctx={}", self.context.as_str()));
        parts.join("+")
    }

    /// Parses a compact `key=value,...` configuration string, as used by
    /// `compare` and `corpus`.
    pub fn parse_spec(spec: &str) -> Result<Settings, String> {
        let mut s = Settings::default();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = match part.split_once('=') {
                Some((k, v)) => (k.trim(), Some(v.trim())),
                None => (part, None),
            };
            match (key, value) {
                ("rule", Some(v)) => s.rule = v.parse()?,
                ("gas", Some(v)) => s.gas = v.parse()?,
                ("gc", None) => s.gc = true,
                ("gc", Some(v)) => s.gc = v.parse::<bool>().map_err(|e| e.to_string())?,
                ("solver", Some(v)) => s.solver = v.parse()?,
                ("context", Some(v)) => {
                    s.context = match v {
                        "none" => ContextMode::Unit,
                        "full" => ContextMode::Full,
                        other => return Err(format!("unknown context mode `{other}`")),
                    }
                }
                ("thresholds", Some(v)) => s.thresholds = v.parse()?,
                ("max-updates", Some("inf")) => s.max_updates = None,
                ("max-updates", Some(v)) => {
                    s.max_updates = Some(v.parse().map_err(|_| format!("bad max-updates `{v}`"))?)
                }
                ("no-requery", None) => s.requery = false,
                ("requery", Some(v)) => s.requery = v.parse::<bool>().map_err(|e| e.to_string())?,
                _ => return Err(format!("unknown config key `{part}`")),
            }
        }
        Ok(s)
    }
}

#[derive(Debug, Error)]
pub enum DriverError {
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    UnknownSpec(#[from] UnknownSpec),
    #[error("{0}")]
    Io(String),
}

/// A completed program analysis with its verification verdicts.
pub struct Analysis {
    pub system: ProgramSystem,
    pub result: SolveResult<Value>,
    pub asserts: Vec<(AssertSite, AssertVerdict)>,
    pub post: Option<PostVerdict>,
    pub rule_check: Option<RuleVerdict>,
}

fn ops_for(settings: &Settings, system: &ProgramSystem) -> Ops<Value> {
    let thresholds: Option<Thresholds> = match &settings.thresholds {
        ThresholdChoice::None => None,
        ThresholdChoice::Auto => Some(system.auto_thresholds()),
        ThresholdChoice::List(vs) => Some(Thresholds::new(vs.iter().copied())),
    };
    match thresholds {
        None => Ops::default(),
        Some(t) => Ops {
            widen: std::rc::Rc::new(move |a: &Value, b: &Value| a.widen_with(b, Some(&t))),
            narrow: std::rc::Rc::new(|a: &Value, b: &Value| a.narrow(b)),
        },
    }
}

fn solver_config<D: Lattice>(settings: &Settings, ops: Ops<D>) -> SolverConfig<D> {
    SolverConfig {
        local_gas: settings.gas,
        max_updates_per_global: settings.max_updates,
        max_rhs_evaluations: Some(1_000_000),
        requery: settings.requery,
        record_trace: settings.check,
        ops,
    }
}

fn solve<D: Lattice + 'static>(
    system: &dyn crate::constraints::System<D>,
    settings: &Settings,
    ops: Ops<D>,
) -> SolveResult<D> {
    let rule = make_rule(settings.rule, settings.gas, settings.gc, ops.clone());
    let config = solver_config(settings, ops);
    match settings.solver {
        SolverKind::Topdown => solve_topdown(system, rule, &config),
        SolverKind::Worklist => solve_worklist(system, rule, &config),
    }
}

/// Parses and analyzes a program under the given settings.
pub fn analyze_source(source: &str, settings: &Settings) -> Result<Analysis, DriverError> {
    let program = parse(source)?;
    let system = ProgramSystem::new(program, settings.context);
    let ops = ops_for(settings, &system);
    let result = solve(&system, settings, ops);
    // A divergent partial assignment is not a solution; judging asserts
    // against it would overclaim.
    let asserts = if result.verdict.converged() {
        check_asserts(&system, &result)
    } else {
        Vec::new()
    };
    let (post, rule_check) = if settings.check && result.verdict.converged() {
        let post = verify_post_solution(&system, &result);
        let rc = result.trace.as_ref().map(|t| check_rule_soundness(t));
        (Some(post), rc)
    } else {
        (None, None)
    };
    Ok(Analysis { system, result, asserts, post, rule_check })
}

/// A completed synthetic-system run over the counter domain.
pub struct SynthAnalysis {
    pub system: SyntheticSystem,
    pub result: SolveResult<CounterValue>,
    pub rule_check: Option<RuleVerdict>,
}

/// Reads the synthetic-system name from `.synth` file contents (first
/// non-comment, non-empty line).
pub fn synth_name(contents: &str) -> String {
    contents
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with("//"))
        .unwrap_or("")
        .to_string()
}

pub fn analyze_synth(name: &str, settings: &Settings) -> Result<SynthAnalysis, DriverError> {
    let system = register_synthetic_system(name)?;
    let result = solve(&system, settings, Ops::default());
    let rule_check = if settings.check {
        result.trace.as_ref().map(|t| check_rule_soundness(t))
    } else {
        None
    };
    Ok(SynthAnalysis { system, result, rule_check })
}
