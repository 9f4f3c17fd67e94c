//! Control-flow graph construction.
//!
//! Node 0 is the procedure start point; it is not a program point of the
//! constraint system (the procedure-entry global stands in for it). The
//! return point is the highest-numbered node. Guards produce one edge per
//! polarity; `for` desugars into its `while` form. Widening points are loop
//! heads (back-edge targets) and the nodes after call edges.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use super::ast::{Cond, Expr, Stmt};

pub type Node = u32;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Label {
    Assign(String, Expr),
    AssignAddr(String, String),
    Guard(Cond, bool),
    Call(String, Vec<Expr>),
    Assert(Cond),
    Skip,
}

impl Label {
    pub fn render(&self) -> String {
        match self {
            Label::Assign(x, e) => format!("{x} = {e}"),
            Label::AssignAddr(p, x) => format!("{p} = &{x}"),
            Label::Guard(c, true) => format!("guard({c})"),
            Label::Guard(c, false) => format!("guard(!({c}))"),
            Label::Call(p, args) => {
                let args: Vec<String> = args.iter().map(|a| a.to_string()).collect();
                format!("call {p}({})", args.join(", "))
            }
            Label::Assert(c) => format!("assert({c})"),
            Label::Skip => "skip".to_string(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Edge {
    pub from: Node,
    pub label: Label,
    pub to: Node,
}

#[derive(Clone, Debug)]
pub struct AssertSite {
    pub proc: String,
    /// Node whose abstract state the condition is checked against (the
    /// source of the assert edge).
    pub node: Node,
    pub line: u32,
    pub cond: Cond,
}

#[derive(Clone, Debug)]
pub struct Cfg {
    pub proc: String,
    pub node_count: u32,
    pub edges: Vec<Edge>,
    pub ret: Node,
    pub widening_points: BTreeSet<Node>,
    pub asserts: Vec<AssertSite>,
    incoming: HashMap<Node, Vec<usize>>,
}

impl Cfg {
    pub fn incoming(&self, node: Node) -> impl Iterator<Item = &Edge> {
        self.incoming.get(&node).into_iter().flatten().map(|i| &self.edges[*i])
    }

    /// Program points (everything except the start node), in numeric order.
    pub fn points(&self) -> impl Iterator<Item = Node> {
        1..self.node_count
    }
}

struct Builder {
    proc: String,
    next: Node,
    edges: Vec<Edge>,
    widening_points: BTreeSet<Node>,
    asserts: Vec<AssertSite>,
}

impl Builder {
    fn fresh(&mut self) -> Node {
        let n = self.next;
        self.next += 1;
        n
    }

    fn edge(&mut self, from: Node, label: Label, to: Node) {
        self.edges.push(Edge { from, label, to });
    }

    fn stmts(&mut self, mut cur: Node, body: &[Stmt]) -> Node {
        for s in body {
            cur = self.stmt(cur, s);
        }
        cur
    }

    fn stmt(&mut self, cur: Node, s: &Stmt) -> Node {
        match s {
            Stmt::Decl(x, e, _) | Stmt::Assign(x, e, _) => {
                let n = self.fresh();
                self.edge(cur, Label::Assign(x.clone(), e.clone()), n);
                n
            }
            Stmt::AssignAddr(p, x, _) => {
                let n = self.fresh();
                self.edge(cur, Label::AssignAddr(p.clone(), x.clone()), n);
                n
            }
            Stmt::While(cond, body, _) => {
                let head = self.fresh();
                self.widening_points.insert(head);
                self.edge(cur, Label::Skip, head);
                let body_start = self.fresh();
                self.edge(head, Label::Guard(cond.clone(), true), body_start);
                let body_end = self.stmts(body_start, body);
                self.edge(body_end, Label::Skip, head);
                let exit = self.fresh();
                self.edge(head, Label::Guard(cond.clone(), false), exit);
                exit
            }
            Stmt::For(decls, cond, step, body, line) => {
                let mut cur = cur;
                for (x, e) in decls {
                    cur = self.stmt(cur, &Stmt::Decl(x.clone(), e.clone(), *line));
                }
                let head = self.fresh();
                self.widening_points.insert(head);
                self.edge(cur, Label::Skip, head);
                let body_start = self.fresh();
                self.edge(head, Label::Guard(cond.clone(), true), body_start);
                let body_end = self.stmts(body_start, body);
                let after_step = self.stmt(body_end, step);
                self.edge(after_step, Label::Skip, head);
                let exit = self.fresh();
                self.edge(head, Label::Guard(cond.clone(), false), exit);
                exit
            }
            Stmt::If(cond, then, els, _) => {
                let t0 = self.fresh();
                self.edge(cur, Label::Guard(cond.clone(), true), t0);
                let t_end = self.stmts(t0, then);
                let e0 = self.fresh();
                self.edge(cur, Label::Guard(cond.clone(), false), e0);
                let e_end = self.stmts(e0, els);
                let join = self.fresh();
                self.edge(t_end, Label::Skip, join);
                self.edge(e_end, Label::Skip, join);
                join
            }
            Stmt::Call(p, args, _) => {
                let n = self.fresh();
                self.widening_points.insert(n);
                self.edge(cur, Label::Call(p.clone(), args.clone()), n);
                n
            }
            Stmt::Assert(cond, line) => {
                self.asserts.push(AssertSite {
                    proc: self.proc.clone(),
                    node: cur,
                    line: *line,
                    cond: cond.clone(),
                });
                let n = self.fresh();
                self.edge(cur, Label::Assert(cond.clone()), n);
                n
            }
        }
    }
}

pub fn build_cfg(proc: &str, body: &[Stmt]) -> Cfg {
    let mut b = Builder {
        proc: proc.to_string(),
        next: 1, // 0 is the start point
        edges: Vec::new(),
        widening_points: BTreeSet::new(),
        asserts: Vec::new(),
    };
    let mut ret = b.stmts(0, body);
    if ret == 0 {
        // Empty body: give the procedure a distinct return point.
        ret = b.fresh();
        b.edge(0, Label::Skip, ret);
    }
    let mut incoming: HashMap<Node, Vec<usize>> = HashMap::new();
    for (i, e) in b.edges.iter().enumerate() {
        incoming.entry(e.to).or_default().push(i);
    }
    Cfg {
        proc: proc.to_string(),
        node_count: b.next,
        edges: b.edges,
        ret,
        widening_points: b.widening_points,
        asserts: b.asserts,
        incoming,
    }
}

/// A stable textual dump of a procedure's CFG, for golden tests and the
/// `--dump-cfg` flag.
pub fn dump_cfg(cfg: &Cfg) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "proc {} (start 0, ret {}, widening points {:?})",
        cfg.proc,
        cfg.ret,
        cfg.widening_points.iter().collect::<Vec<_>>()
    );
    let mut edges: Vec<&Edge> = cfg.edges.iter().collect();
    edges.sort_by_key(|e| (e.from, e.to));
    for e in edges {
        let _ = writeln!(out, "  {} -[{}]-> {}", e.from, e.label.render(), e.to);
    }
    for a in &cfg.asserts {
        let _ = writeln!(out, "  assert at node {} (line {}): {}", a.node, a.line, a.cond);
    }
    out
}
