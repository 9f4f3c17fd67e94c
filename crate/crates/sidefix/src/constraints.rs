//! Side-effecting constraint systems: unknowns, right-hand sides with
//! tracked dependencies, and the assignments sigma/rho.
//!
//! Unknowns split into disjoint locals and globals. A right-hand side reads
//! a combined view of both assignments, returns a value for its local, and
//! may push contributions to globals as a side effect.

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::lattice::{AbsEnv, CounterValue, Lattice};

/// A program point inside a procedure. Start points are not program points;
/// they are represented by the procedure-entry global instead.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId {
    pub proc: String,
    pub index: u32,
}

impl NodeId {
    pub fn new(proc: &str, index: u32) -> NodeId {
        NodeId { proc: proc.to_string(), index }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.proc, self.index)
    }
}

/// An abstract calling context: the trivial context, or the abstract entry
/// environment of the procedure.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Context {
    Unit,
    Full(AbsEnv),
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Context::Unit => write!(f, "•"),
            Context::Full(env) => write!(f, "{}", env.render()),
        }
    }
}

/// A constraint-system variable. `LocalPoint` and `MainSentinel` form the
/// flow-sensitive locals; the three global variants are accumulated
/// flow-insensitively.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Unknown {
    LocalPoint(NodeId, Context),
    MainSentinel,
    GlobalShared(String),
    GlobalProcEntry(String, Context),
    GlobalEscaped(String, String),
}

impl Unknown {
    pub fn is_global(&self) -> bool {
        matches!(
            self,
            Unknown::GlobalShared(_) | Unknown::GlobalProcEntry(_, _) | Unknown::GlobalEscaped(_, _)
        )
    }

    pub fn is_local(&self) -> bool {
        !self.is_global()
    }

    pub fn render(&self) -> String {
        match self {
            Unknown::LocalPoint(n, c) => format!("{n}@{c}"),
            Unknown::MainSentinel => "_main".to_string(),
            Unknown::GlobalShared(g) => g.clone(),
            Unknown::GlobalProcEntry(p, c) => format!("st_{p}@{c}"),
            Unknown::GlobalEscaped(p, v) => format!("esc:{p}.{v}"),
        }
    }
}

/// Side-effect contributions of one right-hand-side evaluation. Each global
/// appears at most once: repeated contributions to the same global are
/// pre-joined here.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Contributions<D: Lattice> {
    entries: Vec<(Unknown, D)>,
}

impl<D: Lattice> Default for Contributions<D> {
    fn default() -> Self {
        Contributions { entries: Vec::new() }
    }
}

impl<D: Lattice> Contributions<D> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a contribution produced by a right-hand side. Bottom values are
    /// dropped: right-hand sides trigger non-bottom contributions only.
    pub fn add(&mut self, g: Unknown, d: D) {
        if d.is_bottom() {
            return;
        }
        self.add_raw(g, d);
    }

    /// Adds a contribution even when it is bottom. Only the withdrawal
    /// wrapper makes explicit bottom contributions.
    pub(crate) fn add_raw(&mut self, g: Unknown, d: D) {
        debug_assert!(g.is_global(), "contribution to a local {g:?}");
        if let Some((_, old)) = self.entries.iter_mut().find(|(u, _)| *u == g) {
            *old = old.join(&d);
        } else {
            self.entries.push((g, d));
        }
    }

    pub fn entries(&self) -> &[(Unknown, D)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, g: &Unknown) -> Option<&D> {
        self.entries.iter().find(|(u, _)| u == g).map(|(_, d)| d)
    }
}

impl<D: Lattice> FromIterator<(Unknown, D)> for Contributions<D> {
    fn from_iter<T: IntoIterator<Item = (Unknown, D)>>(iter: T) -> Self {
        let mut c = Contributions::new();
        for (g, d) in iter {
            c.add(g, d);
        }
        c
    }
}

/// Finite assignments sigma (locals) and rho (globals); unbound unknowns
/// read as bottom.
#[derive(Clone, Debug, Default)]
pub struct Assignment<D: Lattice> {
    pub sigma: HashMap<Unknown, D>,
    pub rho: HashMap<Unknown, D>,
}

impl<D: Lattice> Assignment<D> {
    pub fn new() -> Self {
        Assignment { sigma: HashMap::new(), rho: HashMap::new() }
    }

    pub fn get(&self, u: &Unknown) -> D {
        let map = if u.is_global() { &self.rho } else { &self.sigma };
        map.get(u).cloned().unwrap_or_else(D::bottom)
    }

    pub fn set(&mut self, u: Unknown, d: D) {
        let map = if u.is_global() { &mut self.rho } else { &mut self.sigma };
        if d.is_bottom() {
            map.remove(&u);
        } else {
            map.insert(u, d);
        }
    }
}

/// Read access to the combined assignment during an evaluation. Every read
/// is recorded as a dependency, in first-read order, including reads of
/// still-unbound unknowns.
pub trait View<D: Lattice> {
    fn get(&mut self, u: &Unknown) -> D;
}

/// A recording view over a plain assignment.
pub struct RecordingView<'a, D: Lattice> {
    assignment: &'a Assignment<D>,
    deps: Vec<Unknown>,
    seen: HashSet<Unknown>,
}

impl<'a, D: Lattice> RecordingView<'a, D> {
    pub fn new(assignment: &'a Assignment<D>) -> Self {
        RecordingView { assignment, deps: Vec::new(), seen: HashSet::new() }
    }

    pub fn deps(self) -> Vec<Unknown> {
        self.deps
    }
}

impl<'a, D: Lattice> View<D> for RecordingView<'a, D> {
    fn get(&mut self, u: &Unknown) -> D {
        if self.seen.insert(u.clone()) {
            self.deps.push(u.clone());
        }
        self.assignment.get(u)
    }
}

/// A non-recording view over a plain assignment.
pub struct PlainView<'a, D: Lattice>(&'a Assignment<D>);

impl<'a, D: Lattice> PlainView<'a, D> {
    pub fn new(assignment: &'a Assignment<D>) -> Self {
        PlainView(assignment)
    }
}

impl<D: Lattice> View<D> for PlainView<'_, D> {
    fn get(&mut self, u: &Unknown) -> D {
        self.0.get(u)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("unknown local {0}: no right-hand side registered")]
    UnknownLocal(String),
}

/// A side-effecting constraint system: one right-hand side per local.
///
/// Right-hand sides are deterministic functions of the values they read.
/// For interprocedural systems the set of locals is open-ended (contexts
/// are discovered during solving), so right-hand sides are produced on
/// demand rather than stored per unknown.
pub trait System<D: Lattice> {
    /// Evaluates the right-hand side of local `x` against `view`.
    fn eval(&self, x: &Unknown, view: &mut dyn View<D>) -> Result<(D, Contributions<D>), EvalError>;

    /// The unknowns a solver must stabilize, in order. The first is the
    /// unknown of interest.
    fn interests(&self) -> Vec<Unknown>;

    /// Locals to instantiate when the given procedure-entry global first
    /// receives a value (used by forward-propagating solvers). Empty for
    /// systems without procedure structure.
    fn locals_for_entry(&self, _entry: &Unknown) -> Vec<Unknown> {
        Vec::new()
    }

    /// Whether widening/narrowing is applied when combining values of this
    /// local (loop heads and after-call points).
    fn is_widening_point(&self, _x: &Unknown) -> bool {
        false
    }

    /// The return-point local of a procedure-entry global, if the system
    /// has procedure structure. Used for eager re-evaluation of withdrawn
    /// contexts in the top-down solver.
    fn return_point_of(&self, _entry: &Unknown) -> Option<Unknown> {
        None
    }
}

/// Evaluates `x` against a plain assignment, returning the value, the
/// contributions, and the dependencies in read order.
pub fn evaluate<D: Lattice>(
    system: &dyn System<D>,
    x: &Unknown,
    assignment: &Assignment<D>,
) -> Result<(D, Contributions<D>, Vec<Unknown>), EvalError> {
    let mut view = RecordingView::new(assignment);
    let (value, contribs) = system.eval(x, &mut view)?;
    Ok((value, contribs, view.deps()))
}

// ---------------------------------------------------------------------------
// Synthetic systems
// ---------------------------------------------------------------------------

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown synthetic system `{0}`")]
pub struct UnknownSpec(pub String);

/// The built-in synthetic constraint systems over the counter domain.
///
/// `ex43` is the mutual-increment pair whose localized warrowing produces an
/// infinite update sequence; `appendixB` is the monotone variant that defeats
/// joined-contribution warrowing by switching its contribution term whenever
/// the global hits infinity.
pub struct SyntheticSystem {
    pub name: &'static str,
    locals: Vec<Unknown>,
}

pub fn synth_local(name: &str) -> Unknown {
    Unknown::LocalPoint(NodeId::new(name, 0), Context::Unit)
}

pub fn synth_global(name: &str) -> Unknown {
    Unknown::GlobalShared(name.to_string())
}

pub fn register_synthetic_system(spec: &str) -> Result<SyntheticSystem, UnknownSpec> {
    match spec {
        "ex43" => Ok(SyntheticSystem { name: "ex43", locals: vec![synth_local("x"), synth_local("y")] }),
        "appendixB" => Ok(SyntheticSystem {
            name: "appendixB",
            locals: vec![synth_local("x"), synth_local("y")],
        }),
        other => Err(UnknownSpec(other.to_string())),
    }
}

impl System<CounterValue> for SyntheticSystem {
    fn eval(
        &self,
        x: &Unknown,
        view: &mut dyn View<CounterValue>,
    ) -> Result<(CounterValue, Contributions<CounterValue>), EvalError> {
        let (own, other) = if *x == synth_local("x") {
            (synth_global("a"), synth_global("b"))
        } else if *x == synth_local("y") {
            (synth_global("b"), synth_global("a"))
        } else {
            return Err(EvalError::UnknownLocal(x.render()));
        };
        let value = view.get(&own);
        let contrib = match self.name {
            // (sigma x, rho) ⊒ (rho a, { a ↦ (rho b) + 1 })
            "ex43" => view.get(&other).succ(),
            // Contribution switches to (rho b) + 2 once the own global is
            // infinite, so the recorded contribution keeps changing.
            "appendixB" => {
                if value == CounterValue::Inf {
                    view.get(&other).plus(2)
                } else {
                    view.get(&other).succ()
                }
            }
            _ => unreachable!(),
        };
        let mut contribs = Contributions::new();
        contribs.add(own, contrib);
        Ok((value, contribs))
    }

    fn interests(&self) -> Vec<Unknown> {
        self.locals.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_ex43_shape() {
        let sys = register_synthetic_system("ex43").unwrap();
        assert_eq!(sys.interests(), vec![synth_local("x"), synth_local("y")]);
        assert!(register_synthetic_system("bogus").is_err());
    }

    #[test]
    fn synthetic_ex43_eval() {
        let sys = register_synthetic_system("ex43").unwrap();
        let assignment = Assignment::<CounterValue>::new();
        let (v, contribs, deps) = evaluate(&sys, &synth_local("x"), &assignment).unwrap();
        // rho a = 0, rho b = 0: value 0, contribution a ↦ 1, deps {a, b}.
        assert_eq!(v, CounterValue::Fin(0));
        assert_eq!(contribs.entries(), &[(synth_global("a"), CounterValue::Fin(1))]);
        assert_eq!(deps, vec![synth_global("a"), synth_global("b")]);
    }

    #[test]
    fn synthetic_appendix_b_switches_contribution() {
        let sys = register_synthetic_system("appendixB").unwrap();
        let mut assignment = Assignment::<CounterValue>::new();
        assignment.set(synth_global("a"), CounterValue::Inf);
        assignment.set(synth_global("b"), CounterValue::Fin(2));
        let (_, contribs, _) = evaluate(&sys, &synth_local("x"), &assignment).unwrap();
        assert_eq!(contribs.get(&synth_global("a")), Some(&CounterValue::Fin(4)));
        assignment.set(synth_global("a"), CounterValue::Fin(1));
        let (_, contribs, _) = evaluate(&sys, &synth_local("x"), &assignment).unwrap();
        assert_eq!(contribs.get(&synth_global("a")), Some(&CounterValue::Fin(3)));
    }

    #[test]
    fn contributions_prejoin_same_global() {
        let mut c = Contributions::new();
        c.add(synth_global("g"), CounterValue::Fin(1));
        c.add(synth_global("g"), CounterValue::Fin(3));
        assert_eq!(c.entries().len(), 1);
        assert_eq!(c.get(&synth_global("g")), Some(&CounterValue::Fin(3)));
    }

    #[test]
    fn evaluation_is_deterministic() {
        let sys = register_synthetic_system("ex43").unwrap();
        let mut assignment = Assignment::<CounterValue>::new();
        assignment.set(synth_global("b"), CounterValue::Fin(7));
        let r1 = evaluate(&sys, &synth_local("x"), &assignment).unwrap();
        let r2 = evaluate(&sys, &synth_local("x"), &assignment).unwrap();
        assert_eq!(r1, r2);
    }
}
