//! Interprocedural constraint generation: one right-hand side per program
//! point and context, joining the transfer functions of all incoming edges.
//! The dedicated `_main` local seeds the global initializers and contributes
//! the initial entry state to every thread entry.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::constraints::{
    Context, Contributions, EvalError, NodeId, System, Unknown, View,
};
use crate::lattice::{AbsEnv, Lattice, Thresholds, Value};
use crate::solver::SolveResult;

use super::ast::{Expr, GlobalInit};
use super::cfg::{dump_cfg, AssertSite, Label};
use super::parser::Program;
use super::transfer::{ContextMode, TransferCtx};

pub struct ProgramSystem {
    pub program: Program,
    pub mode: ContextMode,
}

impl ProgramSystem {
    pub fn new(program: Program, mode: ContextMode) -> Self {
        ProgramSystem { program, mode }
    }

    pub fn initial_context(&self) -> Context {
        match self.mode {
            ContextMode::Unit => Context::Unit,
            ContextMode::Full => Context::Full(AbsEnv::empty()),
        }
    }

    fn eval_main(
        &self,
        view: &mut dyn View<Value>,
    ) -> (Value, Contributions<Value>) {
        let mut contribs = Contributions::new();
        let c0 = self.initial_context();
        for entry in &self.program.thread_entries {
            contribs.add(
                Unknown::GlobalProcEntry(entry.clone(), c0.clone()),
                Value::from_env(AbsEnv::empty()),
            );
        }
        for g in &self.program.globals {
            let v = match &g.init {
                GlobalInit::Int(n) => Value::from_interval(crate::lattice::Interval::singleton(*n)),
                GlobalInit::Addr(t) => Value::from_ptset(crate::lattice::PtSet::named(t)),
            };
            contribs.add(Unknown::GlobalShared(g.name.clone()), v);
        }
        let mut value = Value::Bot;
        for entry in &self.program.thread_entries {
            let proc = self.program.proc(entry).expect("thread entry exists");
            let ret = Unknown::LocalPoint(NodeId::new(entry, proc.cfg.ret), c0.clone());
            value = value.join(&view.get(&ret));
        }
        (value, contribs)
    }

    fn eval_point(
        &self,
        node: &NodeId,
        ctx: &Context,
        view: &mut dyn View<Value>,
    ) -> Result<(Value, Contributions<Value>), EvalError> {
        let Some(proc) = self.program.proc(&node.proc) else {
            return Err(EvalError::UnknownLocal(node.to_string()));
        };
        if node.index == 0 || node.index >= proc.cfg.node_count {
            return Err(EvalError::UnknownLocal(node.to_string()));
        }
        let tctx = TransferCtx { program: &self.program, proc, mode: self.mode };
        let mut contribs = Contributions::new();
        let mut value = AbsEnv::Bot;
        for edge in proc.cfg.incoming(node.index) {
            let pred = if edge.from == 0 {
                view.get(&Unknown::GlobalProcEntry(proc.name.clone(), ctx.clone()))
            } else {
                view.get(&Unknown::LocalPoint(NodeId::new(&proc.name, edge.from), ctx.clone()))
            };
            let pred_env = pred.as_env();
            if pred_env.is_bottom() {
                continue; // strict in the control-flow predecessor
            }
            let out = tctx.transfer(&edge.label, &pred_env, view, &mut contribs);
            value = value.join(&out);
        }
        Ok((Value::from_env(value), contribs))
    }

    /// The set of integer literals in comparison guards, closed under
    /// {-inf, 0, +inf}: the default threshold set.
    pub fn auto_thresholds(&self) -> Thresholds {
        fn literals(e: &Expr, out: &mut BTreeSet<i64>) {
            match e {
                Expr::Lit(n) => {
                    out.insert(*n);
                }
                Expr::Bin(l, _, r) => {
                    literals(l, out);
                    literals(r, out);
                }
                _ => {}
            }
        }
        let mut lits = BTreeSet::new();
        lits.insert(0);
        for p in &self.program.procs {
            for e in &p.cfg.edges {
                if let Label::Guard(c, _) | Label::Assert(c) = &e.label {
                    literals(&c.lhs, &mut lits);
                    literals(&c.rhs, &mut lits);
                }
            }
        }
        Thresholds::new(lits)
    }

    /// A stable structural dump of the generated system: per-procedure
    /// CFGs, widening points, thread entries, globals, and escaping locals.
    pub fn dump_structure(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "context mode: {}", self.mode.as_str());
        let _ = writeln!(out, "thread entries: {:?}", self.program.thread_entries);
        for g in &self.program.globals {
            let init = match &g.init {
                GlobalInit::Int(n) => n.to_string(),
                GlobalInit::Addr(t) => format!("&{t}"),
            };
            let kind = match g.kind {
                super::ast::GlobalKind::Int => "int",
                super::ast::GlobalKind::Ptr => "int*",
            };
            let _ = writeln!(out, "global {} {} = {}", kind, g.name, init);
        }
        for p in &self.program.procs {
            out.push_str(&dump_cfg(&p.cfg));
            if !p.escaped.is_empty() {
                let _ = writeln!(out, "  escaping locals: {:?}", p.escaped);
            }
        }
        out
    }
}

impl System<Value> for ProgramSystem {
    fn eval(
        &self,
        x: &Unknown,
        view: &mut dyn View<Value>,
    ) -> Result<(Value, Contributions<Value>), EvalError> {
        match x {
            Unknown::MainSentinel => Ok(self.eval_main(view)),
            Unknown::LocalPoint(node, ctx) => self.eval_point(node, ctx, view),
            other => Err(EvalError::UnknownLocal(other.render())),
        }
    }

    fn interests(&self) -> Vec<Unknown> {
        vec![Unknown::MainSentinel]
    }

    fn locals_for_entry(&self, entry: &Unknown) -> Vec<Unknown> {
        let Unknown::GlobalProcEntry(p, ctx) = entry else {
            return Vec::new();
        };
        let Some(proc) = self.program.proc(p) else {
            return Vec::new();
        };
        proc.cfg
            .points()
            .map(|i| Unknown::LocalPoint(NodeId::new(p, i), ctx.clone()))
            .collect()
    }

    fn is_widening_point(&self, x: &Unknown) -> bool {
        let Unknown::LocalPoint(node, _) = x else {
            return false;
        };
        self.program
            .proc(&node.proc)
            .is_some_and(|p| p.cfg.widening_points.contains(&node.index))
    }

    fn return_point_of(&self, entry: &Unknown) -> Option<Unknown> {
        let Unknown::GlobalProcEntry(p, ctx) = entry else {
            return None;
        };
        let proc = self.program.proc(p)?;
        Some(Unknown::LocalPoint(NodeId::new(p, proc.cfg.ret), ctx.clone()))
    }
}

// ---------------------------------------------------------------------------
// Assertion checking
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AssertVerdict {
    Proven,
    Unproven,
    Unreachable,
}

impl AssertVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            AssertVerdict::Proven => "proven",
            AssertVerdict::Unproven => "unproven",
            AssertVerdict::Unreachable => "unreachable",
        }
    }
}

/// Judges every assert site against the final assignment: proven when every
/// concrete valuation of the abstract state at the site satisfies the
/// condition, unreachable when the site's state is bottom in every context.
pub fn check_asserts(
    system: &ProgramSystem,
    result: &SolveResult<Value>,
) -> Vec<(AssertSite, AssertVerdict)> {
    let mut out = Vec::new();
    for proc in &system.program.procs {
        let tctx = TransferCtx { program: &system.program, proc, mode: system.mode };
        for site in &proc.cfg.asserts {
            let mut states: Vec<AbsEnv> = Vec::new();
            for u in &result.reached {
                let matches_site = match u {
                    Unknown::LocalPoint(n, _) => n.proc == site.proc && n.index == site.node,
                    Unknown::GlobalProcEntry(p, _) => site.node == 0 && *p == site.proc,
                    _ => false,
                };
                if matches_site {
                    states.push(result.assignment.get(u).as_env());
                }
            }
            let mut any_live = false;
            let mut all_hold = true;
            for env in states.iter().filter(|e| !e.is_bottom()) {
                any_live = true;
                let mut view = crate::constraints::PlainView::new(&result.assignment);
                if !tctx.certainly_holds(&site.cond, env, &mut view) {
                    all_hold = false;
                }
            }
            let verdict = if !any_live {
                AssertVerdict::Unreachable
            } else if all_hold {
                AssertVerdict::Proven
            } else {
                AssertVerdict::Unproven
            };
            out.push((site.clone(), verdict));
        }
    }
    out
}
