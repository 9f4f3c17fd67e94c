//! Concrete collecting semantics: a breadth-first exploration of all thread
//! interleavings at one CFG edge per scheduling step, memoizing visited
//! states. The observed value sets are the ground truth the abstract
//! results are audited against.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use crate::constraints::{NodeId, Unknown};
use crate::frontend::ast::{BinOp, CmpOp, Cond, Expr};
use crate::frontend::cfg::{Label, Node};
use crate::frontend::{AssertVerdict, Program};
use crate::lattice::{AbsEnv, Lattice, Loc, Value};
use crate::solver::SolveResult;

#[derive(Clone, Copy, Debug)]
pub struct OracleBudget {
    pub max_states: usize,
    pub max_depth: usize,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget { max_states: 2_000_000, max_depth: 10_000 }
    }
}

/// A concrete global value: an integer or a memory location.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CVal {
    Int(i64),
    Loc(Loc),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Frame {
    proc: String,
    node: Node,
    locals: BTreeMap<String, i64>,
    ret_to: Option<Node>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct State {
    globals: BTreeMap<String, CVal>,
    /// Cells of locals whose address is ever taken, keyed by (proc, var).
    escaped: BTreeMap<(String, String), i64>,
    threads: Vec<Vec<Frame>>,
}

#[derive(Debug, Default)]
pub struct ReachSets {
    pub exhausted: bool,
    pub states_explored: usize,
    pub globals: BTreeMap<String, BTreeSet<CVal>>,
    pub escaped: BTreeMap<(String, String), BTreeSet<i64>>,
    /// Observed local values per (proc, node, var).
    pub locals: BTreeMap<(String, Node), BTreeMap<String, BTreeSet<i64>>>,
    pub reached_nodes: BTreeSet<(String, Node)>,
    /// Assert sites (proc, node, line) observed to fail concretely.
    pub assert_violations: BTreeSet<(String, Node, u32)>,
}

fn sat_binop(op: BinOp, a: i64, b: i64) -> i64 {
    match op {
        BinOp::Add => a.saturating_add(b),
        BinOp::Sub => a.saturating_sub(b),
        BinOp::Mul => a.saturating_mul(b),
    }
}

struct Interp<'a> {
    program: &'a Program,
}

impl<'a> Interp<'a> {
    fn eval(&self, e: &Expr, frame: &Frame, state: &State) -> i64 {
        match e {
            Expr::Lit(n) => *n,
            Expr::Var(x) => {
                if let Some(v) = frame.locals.get(x) {
                    *v
                } else {
                    match state.globals.get(x) {
                        Some(CVal::Int(n)) => *n,
                        _ => panic!("oracle: read of unassigned variable `{x}`"),
                    }
                }
            }
            Expr::Deref(p) => match state.globals.get(p) {
                Some(CVal::Loc(Loc::Named(g))) => match state.globals.get(g) {
                    Some(CVal::Int(n)) => *n,
                    _ => panic!("oracle: bad pointee `{g}`"),
                },
                Some(CVal::Loc(Loc::Escaped(pr, v))) => {
                    *state.escaped.get(&(pr.clone(), v.clone())).expect("escaped cell exists")
                }
                _ => panic!("oracle: dereference of non-pointer `{p}`"),
            },
            Expr::Bin(l, op, r) => {
                sat_binop(*op, self.eval(l, frame, state), self.eval(r, frame, state))
            }
        }
    }

    fn eval_cond(&self, c: &Cond, frame: &Frame, state: &State) -> bool {
        let l = self.eval(&c.lhs, frame, state);
        let r = self.eval(&c.rhs, frame, state);
        match c.op {
            CmpOp::Lt => l < r,
            CmpOp::Gt => l > r,
            CmpOp::Le => l <= r,
            CmpOp::Ge => l >= r,
            CmpOp::Eq => l == r,
            CmpOp::Ne => l != r,
        }
    }

    fn write_local(&self, state: &mut State, frame: &mut Frame, x: &str, v: i64) {
        frame.locals.insert(x.to_string(), v);
        let proc = self.program.proc(&frame.proc).unwrap();
        if proc.escaped.contains(x) {
            state.escaped.insert((frame.proc.clone(), x.to_string()), v);
        }
    }

    /// All successor states of one scheduling step of thread `t`.
    fn step(&self, state: &State, t: usize, reach: &mut ReachSets) -> Vec<State> {
        let mut out = Vec::new();
        let stack = &state.threads[t];
        let Some(frame) = stack.last() else {
            return out;
        };
        let proc = self.program.proc(&frame.proc).unwrap();
        if frame.node == proc.cfg.ret && frame.node != 0 {
            // Return: pop the frame and resume the caller.
            let mut next = state.clone();
            let popped = next.threads[t].pop().unwrap();
            if let (Some(rt), Some(caller)) = (popped.ret_to, next.threads[t].last_mut()) {
                caller.node = rt;
            }
            out.push(next);
            return out;
        }
        for edge in proc.cfg.edges.iter().filter(|e| e.from == frame.node) {
            match &edge.label {
                Label::Skip => {
                    let mut next = state.clone();
                    next.threads[t].last_mut().unwrap().node = edge.to;
                    out.push(next);
                }
                Label::Assert(c) => {
                    if !self.eval_cond(c, frame, state) {
                        let line = proc
                            .cfg
                            .asserts
                            .iter()
                            .find(|a| a.node == edge.from)
                            .map(|a| a.line)
                            .unwrap_or(0);
                        reach.assert_violations.insert((frame.proc.clone(), edge.from, line));
                    }
                    let mut next = state.clone();
                    next.threads[t].last_mut().unwrap().node = edge.to;
                    out.push(next);
                }
                Label::Guard(c, pol) => {
                    if self.eval_cond(c, frame, state) == *pol {
                        let mut next = state.clone();
                        next.threads[t].last_mut().unwrap().node = edge.to;
                        out.push(next);
                    }
                }
                Label::Assign(x, e) => {
                    let v = self.eval(e, frame, state);
                    let mut next = state.clone();
                    {
                        let mut fr = next.threads[t].pop().unwrap();
                        if fr.locals.contains_key(x) || proc.locals.contains(x) {
                            self.write_local(&mut next, &mut fr, x, v);
                        } else {
                            next.globals.insert(x.clone(), CVal::Int(v));
                        }
                        fr.node = edge.to;
                        next.threads[t].push(fr);
                    }
                    out.push(next);
                }
                Label::AssignAddr(p, x) => {
                    let mut next = state.clone();
                    let loc = if proc.locals.contains(x) {
                        let cur = *frame.locals.get(x).expect("escaping local assigned");
                        next.escaped.insert((frame.proc.clone(), x.clone()), cur);
                        Loc::Escaped(frame.proc.clone(), x.clone())
                    } else {
                        Loc::Named(x.clone())
                    };
                    next.globals.insert(p.clone(), CVal::Loc(loc));
                    next.threads[t].last_mut().unwrap().node = edge.to;
                    out.push(next);
                }
                Label::Call(callee, args) => {
                    let vals: Vec<i64> = args.iter().map(|a| self.eval(a, frame, state)).collect();
                    let cp = self.program.proc(callee).unwrap();
                    let mut locals = BTreeMap::new();
                    for (param, v) in cp.params.iter().zip(vals) {
                        locals.insert(param.clone(), v);
                    }
                    let mut next = state.clone();
                    for (param, v) in &locals {
                        if cp.escaped.contains(param) {
                            next.escaped.insert((callee.clone(), param.clone()), *v);
                        }
                    }
                    next.threads[t].push(Frame {
                        proc: callee.clone(),
                        node: 0,
                        locals,
                        ret_to: Some(edge.to),
                    });
                    out.push(next);
                }
            }
        }
        out
    }
}

fn record(state: &State, reach: &mut ReachSets) {
    for (g, v) in &state.globals {
        reach.globals.entry(g.clone()).or_default().insert(v.clone());
    }
    for (k, v) in &state.escaped {
        reach.escaped.entry(k.clone()).or_default().insert(*v);
    }
    for stack in &state.threads {
        if let Some(frame) = stack.last() {
            reach.reached_nodes.insert((frame.proc.clone(), frame.node));
            let slot = reach.locals.entry((frame.proc.clone(), frame.node)).or_default();
            for (x, v) in &frame.locals {
                slot.entry(x.clone()).or_default().insert(*v);
            }
        }
    }
}

/// Explores all interleavings of the program's thread entries within the
/// budget, returning per-global and per-point observation sets.
pub fn concrete_collect(program: &Program, budget: OracleBudget) -> ReachSets {
    let interp = Interp { program };
    let mut reach = ReachSets::default();
    let mut init = State {
        globals: BTreeMap::new(),
        escaped: BTreeMap::new(),
        threads: Vec::new(),
    };
    for g in &program.globals {
        let v = match &g.init {
            crate::frontend::ast::GlobalInit::Int(n) => CVal::Int(*n),
            crate::frontend::ast::GlobalInit::Addr(t) => CVal::Loc(Loc::Named(t.clone())),
        };
        init.globals.insert(g.name.clone(), v);
    }
    for entry in &program.thread_entries {
        init.threads.push(vec![Frame {
            proc: entry.clone(),
            node: 0,
            locals: BTreeMap::new(),
            ret_to: None,
        }]);
    }

    let mut seen: HashSet<State> = HashSet::new();
    let mut frontier: VecDeque<(State, usize)> = VecDeque::new();
    seen.insert(init.clone());
    record(&init, &mut reach);
    frontier.push_back((init, 0));
    while let Some((state, depth)) = frontier.pop_front() {
        reach.states_explored += 1;
        if depth >= budget.max_depth {
            reach.exhausted = true;
            continue;
        }
        for t in 0..state.threads.len() {
            for next in interp.step(&state, t, &mut reach) {
                if seen.len() >= budget.max_states {
                    reach.exhausted = true;
                    return reach;
                }
                if seen.insert(next.clone()) {
                    record(&next, &mut reach);
                    frontier.push_back((next, depth + 1));
                }
            }
        }
    }
    reach
}

// ---------------------------------------------------------------------------
// Soundness audit
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OracleVerdict {
    Pass,
    Violation(String),
}

impl OracleVerdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, OracleVerdict::Pass)
    }
}

fn check_cval(abs: &Value, v: &CVal, what: &str) -> Result<(), String> {
    match v {
        CVal::Int(n) => {
            let iv = abs.as_interval();
            if !iv.contains(*n) {
                return Err(format!("{what}: observed {n} outside {}", iv.render()));
            }
        }
        CVal::Loc(l) => {
            let pts = abs.as_ptset();
            let ok = match pts.locs() {
                None => true,
                Some(locs) => locs.contains(l),
            };
            if !ok {
                return Err(format!("{what}: observed &{l} outside {}", pts.render()));
            }
        }
    }
    Ok(())
}

/// Audits an abstract result against the observation sets: every observed
/// concrete value must lie in the concretization of the abstract one, and
/// no assert judged proven (or unreachable) may be refuted by an observed
/// state.
pub fn soundness_check(
    program: &Program,
    reach: &ReachSets,
    result: &SolveResult<Value>,
    asserts: &[(crate::frontend::AssertSite, AssertVerdict)],
) -> OracleVerdict {
    assert!(!reach.exhausted, "soundness_check requires a complete exploration");
    for (g, vals) in &reach.globals {
        let abs = result.value(&Unknown::GlobalShared(g.clone()));
        for v in vals {
            if let Err(msg) = check_cval(&abs, v, &format!("global {g}")) {
                return OracleVerdict::Violation(msg);
            }
        }
    }
    for ((p, x), vals) in &reach.escaped {
        let abs = result.value(&Unknown::GlobalEscaped(p.clone(), x.clone()));
        let iv = abs.as_interval();
        for n in vals {
            if !iv.contains(*n) {
                return OracleVerdict::Violation(format!(
                    "escaped {p}.{x}: observed {n} outside {}",
                    iv.render()
                ));
            }
        }
    }
    for ((proc, node), vars) in &reach.locals {
        // Join the abstract states of this point over all contexts.
        let mut joined = AbsEnv::Bot;
        for u in &result.reached {
            let here = match u {
                Unknown::LocalPoint(n, _) => n.proc == *proc && n.index == *node,
                Unknown::GlobalProcEntry(p, _) => *node == 0 && p == proc,
                _ => false,
            };
            if here {
                joined = joined.join(&result.assignment.get(u).as_env());
            }
        }
        if joined.is_bottom() {
            return OracleVerdict::Violation(format!(
                "point {proc}:{node} reached concretely but bottom in every context"
            ));
        }
        for (x, vals) in vars {
            let iv = joined.get_int(x);
            for n in vals {
                if !iv.contains(*n) {
                    return OracleVerdict::Violation(format!(
                        "local {x} at {proc}:{node}: observed {n} outside {}",
                        iv.render()
                    ));
                }
            }
        }
    }
    let _ = program;
    for (site, verdict) in asserts {
        match verdict {
            AssertVerdict::Proven => {
                if reach
                    .assert_violations
                    .iter()
                    .any(|(p, n, _)| *p == site.proc && *n == site.node)
                {
                    return OracleVerdict::Violation(format!(
                        "assert at {}:{} judged proven but violated concretely",
                        site.proc, site.line
                    ));
                }
            }
            AssertVerdict::Unreachable => {
                if reach.reached_nodes.contains(&(site.proc.clone(), site.node)) {
                    return OracleVerdict::Violation(format!(
                        "assert at {}:{} judged unreachable but its node is reached",
                        site.proc, site.line
                    ));
                }
            }
            AssertVerdict::Unproven => {}
        }
    }
    OracleVerdict::Pass
}

/// Renders observation sets for the `oracle` subcommand.
pub fn render_reach(reach: &ReachSets) -> serde_json::Value {
    use serde_json::json;
    let cap = 200usize;
    let globals: BTreeMap<String, serde_json::Value> = reach
        .globals
        .iter()
        .map(|(g, vals)| {
            let rendered: Vec<String> = vals
                .iter()
                .take(cap)
                .map(|v| match v {
                    CVal::Int(n) => n.to_string(),
                    CVal::Loc(l) => format!("&{l}"),
                })
                .collect();
            (g.clone(), json!({ "count": vals.len(), "values": rendered }))
        })
        .collect();
    let locals: BTreeMap<String, serde_json::Value> = reach
        .locals
        .iter()
        .map(|((p, n), vars)| {
            let vars: BTreeMap<String, serde_json::Value> = vars
                .iter()
                .map(|(x, vals)| {
                    let shown: Vec<i64> = vals.iter().take(cap).copied().collect();
                    (x.clone(), json!({ "count": vals.len(), "values": shown }))
                })
                .collect();
            (NodeId::new(p, *n).to_string(), json!(vars))
        })
        .collect();
    json!({
        "exhausted": reach.exhausted,
        "states_explored": reach.states_explored,
        "globals": globals,
        "locals": locals,
        "assert_violations": reach.assert_violations.iter()
            .map(|(p, n, l)| format!("{p}:{n} line {l}")).collect::<Vec<_>>(),
    })
}
