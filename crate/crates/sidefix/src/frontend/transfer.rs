//! Abstract transfer functions for edge labels: expression evaluation over
//! intervals, guard refinement, pointer reads/writes, escaping locals, and
//! procedure calls.

use crate::constraints::{Context, Contributions, NodeId, Unknown, View};
use crate::lattice::{AbsEnv, ExtInt, Interval, Lattice, Loc, PtSet, Value, VarValue};

use super::ast::{CmpOp, Cond, Expr};
use super::cfg::Label;
use super::parser::{Procedure, Program};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContextMode {
    Unit,
    Full,
}

impl ContextMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ContextMode::Unit => "none",
            ContextMode::Full => "full",
        }
    }
}

pub struct TransferCtx<'a> {
    pub program: &'a Program,
    pub proc: &'a Procedure,
    pub mode: ContextMode,
}

impl<'a> TransferCtx<'a> {
    fn is_local(&self, x: &str) -> bool {
        self.proc.locals.contains(x)
    }

    pub fn eval_int(&self, e: &Expr, env: &AbsEnv, view: &mut dyn View<Value>) -> Interval {
        if env.is_bottom() {
            return Interval::Bot;
        }
        match e {
            Expr::Lit(n) => Interval::singleton(*n),
            Expr::Var(x) => {
                if self.is_local(x) {
                    env.get_int(x)
                } else {
                    view.get(&Unknown::GlobalShared(x.clone())).as_interval()
                }
            }
            Expr::Deref(p) => {
                let pts = view.get(&Unknown::GlobalShared(p.clone())).as_ptset();
                match pts.locs() {
                    None => Interval::top(),
                    Some(locs) => {
                        let mut acc = Interval::Bot;
                        for loc in locs {
                            let v = match loc {
                                Loc::Named(g) => view.get(&Unknown::GlobalShared(g.clone())),
                                Loc::Escaped(pr, v) => {
                                    view.get(&Unknown::GlobalEscaped(pr.clone(), v.clone()))
                                }
                            };
                            acc = acc.join(&v.as_interval());
                        }
                        acc
                    }
                }
            }
            Expr::Bin(l, op, r) => {
                let lv = self.eval_int(l, env, view);
                let rv = self.eval_int(r, env, view);
                match op {
                    super::ast::BinOp::Add => lv.add(&rv),
                    super::ast::BinOp::Sub => lv.sub(&rv),
                    super::ast::BinOp::Mul => lv.mul(&rv),
                }
            }
        }
    }

    /// The abstract effect of one edge label: the successor environment and
    /// any contributions to globals. The caller has already handled a
    /// bottom predecessor (strictness).
    pub fn transfer(
        &self,
        label: &Label,
        env: &AbsEnv,
        view: &mut dyn View<Value>,
        contribs: &mut Contributions<Value>,
    ) -> AbsEnv {
        match label {
            Label::Skip | Label::Assert(_) => env.clone(),
            Label::Assign(x, e) => {
                let v = self.eval_int(e, env, view);
                if self.is_local(x) {
                    let env2 = env.set(x, VarValue::Int(v));
                    if self.proc.escaped.contains(x) {
                        contribs.add(
                            Unknown::GlobalEscaped(self.proc.name.clone(), x.clone()),
                            Value::from_interval(v),
                        );
                    }
                    env2
                } else {
                    contribs.add(Unknown::GlobalShared(x.clone()), Value::from_interval(v));
                    env.clone()
                }
            }
            Label::AssignAddr(p, x) => {
                let loc = if self.is_local(x) {
                    contribs.add(
                        Unknown::GlobalEscaped(self.proc.name.clone(), x.clone()),
                        Value::from_interval(env.get_int(x)),
                    );
                    Loc::Escaped(self.proc.name.clone(), x.clone())
                } else {
                    Loc::Named(x.clone())
                };
                contribs.add(Unknown::GlobalShared(p.clone()), Value::from_ptset(PtSet::of([loc])));
                env.clone()
            }
            Label::Guard(cond, polarity) => self.refine(cond, *polarity, env, view),
            Label::Call(p, args) => {
                let callee = self.program.proc(p).expect("checked call target");
                let mut entry = AbsEnv::empty();
                for (param, arg) in callee.params.iter().zip(args) {
                    let v = self.eval_int(arg, env, view);
                    entry = entry.set(param, VarValue::Int(v));
                    if entry.is_bottom() {
                        break;
                    }
                }
                if entry.is_bottom() {
                    // No abstract value reaches the call: the edge is dead.
                    return AbsEnv::Bot;
                }
                let ctx = match self.mode {
                    ContextMode::Unit => Context::Unit,
                    ContextMode::Full => Context::Full(entry.clone()),
                };
                contribs.add(
                    Unknown::GlobalProcEntry(p.clone(), ctx.clone()),
                    Value::from_env(entry),
                );
                let ret = view.get(&Unknown::LocalPoint(
                    NodeId::new(p, callee.cfg.ret),
                    ctx,
                ));
                if ret.is_bottom() {
                    AbsEnv::Bot
                } else {
                    env.clone()
                }
            }
        }
    }

    /// Refines `env` with the guard, meeting variable bounds derived from
    /// the comparison. Unsatisfiable guards yield bottom.
    pub fn refine(
        &self,
        cond: &Cond,
        polarity: bool,
        env: &AbsEnv,
        view: &mut dyn View<Value>,
    ) -> AbsEnv {
        if env.is_bottom() {
            return AbsEnv::Bot;
        }
        let op = if polarity { cond.op } else { cond.op.negate() };
        let lv = self.eval_int(&cond.lhs, env, view);
        let rv = self.eval_int(&cond.rhs, env, view);
        if lv.is_bottom() || rv.is_bottom() || !satisfiable(&lv, op, &rv) {
            return AbsEnv::Bot;
        }
        let mut out = env.clone();
        if let Expr::Var(x) = &cond.lhs {
            if self.is_local(x) {
                out = out.set(x, VarValue::Int(constrain(&lv, op, &rv)));
            }
        }
        if let Expr::Var(y) = &cond.rhs {
            if self.is_local(y) && !out.is_bottom() {
                out = out.set(y, VarValue::Int(constrain(&rv, op.flip(), &lv)));
            }
        }
        out
    }

    /// Whether the condition holds for every concrete valuation of the
    /// abstract state.
    pub fn certainly_holds(&self, cond: &Cond, env: &AbsEnv, view: &mut dyn View<Value>) -> bool {
        let lv = self.eval_int(&cond.lhs, env, view);
        let rv = self.eval_int(&cond.rhs, env, view);
        let (Some((ll, lu)), Some((rl, ru))) = (lv.bounds(), rv.bounds()) else {
            // An empty operand has no valuations; the condition holds
            // vacuously.
            return true;
        };
        match cond.op {
            CmpOp::Lt => lu < rl,
            CmpOp::Le => lu <= rl,
            CmpOp::Gt => ll > ru,
            CmpOp::Ge => ll >= ru,
            CmpOp::Eq => ll == lu && rl == ru && ll == rl && ll.is_finite(),
            CmpOp::Ne => lv.meet(&rv).is_bottom(),
        }
    }
}

/// Whether some pair of concrete values drawn from the operand intervals
/// satisfies the comparison.
fn satisfiable(l: &Interval, op: CmpOp, r: &Interval) -> bool {
    let (Some((ll, lu)), Some((rl, ru))) = (l.bounds(), r.bounds()) else {
        return false;
    };
    match op {
        CmpOp::Lt => ll < ru,
        CmpOp::Le => ll <= ru,
        CmpOp::Gt => lu > rl,
        CmpOp::Ge => lu >= rl,
        CmpOp::Eq => !l.meet(r).is_bottom(),
        CmpOp::Ne => !(ll == lu && rl == ru && ll == rl),
    }
}

/// The refined interval for the left operand of `l op r`.
fn constrain(l: &Interval, op: CmpOp, r: &Interval) -> Interval {
    let Some((rl, ru)) = r.bounds() else {
        return Interval::Bot;
    };
    match op {
        CmpOp::Lt => l.meet(&Interval::range(ExtInt::NegInf, ru - ExtInt::Fin(1))),
        CmpOp::Le => l.meet(&Interval::range(ExtInt::NegInf, ru)),
        CmpOp::Gt => l.meet(&Interval::range(rl + ExtInt::Fin(1), ExtInt::PosInf)),
        CmpOp::Ge => l.meet(&Interval::range(rl, ExtInt::PosInf)),
        CmpOp::Eq => l.meet(r),
        CmpOp::Ne => {
            if rl == ru {
                trim_endpoint(l, rl)
            } else {
                *l
            }
        }
    }
}

fn trim_endpoint(l: &Interval, n: ExtInt) -> Interval {
    let Some((ll, lu)) = l.bounds() else {
        return Interval::Bot;
    };
    if ll == n && lu == n {
        Interval::Bot
    } else if ll == n {
        Interval::range(n + ExtInt::Fin(1), lu)
    } else if lu == n {
        Interval::range(ll, n - ExtInt::Fin(1))
    } else {
        *l
    }
}
