//! Hosting solvers.
//!
//! Both solvers delegate every global update to the configured update rule
//! and apply the returned updates verbatim; they differ in how work is
//! scheduled. `worklist` propagates forward eagerly; `topdown` evaluates on
//! demand and only marks affected unknowns unstable.

mod topdown;
mod worklist;

pub use topdown::solve_topdown;
pub use worklist::solve_worklist;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::str::FromStr;

use indexmap::IndexSet;

use crate::constraints::{evaluate, Assignment, Contributions, System, Unknown};
use crate::lattice::{lat_eq, Lattice};
use crate::rules::{Gas, Ops, Phase, TraceCall, UpdateRule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, clap::ValueEnum)]
pub enum SolverKind {
    Worklist,
    Topdown,
}

impl SolverKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverKind::Worklist => "worklist",
            SolverKind::Topdown => "topdown",
        }
    }
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "worklist" => Ok(SolverKind::Worklist),
            "topdown" => Ok(SolverKind::Topdown),
            other => Err(format!("unknown solver `{other}`")),
        }
    }
}

/// Safety valves and local-combination parameters. Tripping a cap aborts
/// the run with a divergence verdict, never a wrong answer.
pub struct SolverConfig<D> {
    pub local_gas: Gas,
    pub max_updates_per_global: Option<usize>,
    pub max_rhs_evaluations: Option<usize>,
    /// Re-query return points of withdrawn procedure entries (top-down only).
    pub requery: bool,
    /// Record every `update_globals` call for the dynamic soundness checker.
    pub record_trace: bool,
    pub ops: Ops<D>,
}

impl<D: Lattice> Default for SolverConfig<D> {
    fn default() -> Self {
        SolverConfig {
            local_gas: Gas::Finite(3),
            max_updates_per_global: Some(10_000),
            max_rhs_evaluations: Some(1_000_000),
            requery: true,
            record_trace: false,
            ops: Ops::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Cap {
    UpdatesPerGlobal(Unknown),
    RhsEvaluations,
}

impl Cap {
    pub fn render(&self) -> String {
        match self {
            Cap::UpdatesPerGlobal(g) => format!("update cap at {}", g.render()),
            Cap::RhsEvaluations => "right-hand-side evaluation cap".to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveVerdict {
    Converged,
    Divergence(Cap),
}

impl SolveVerdict {
    pub fn converged(&self) -> bool {
        matches!(self, SolveVerdict::Converged)
    }
}

#[derive(Clone, Debug, Default)]
pub struct SolverStats {
    pub rhs_evaluations: usize,
    pub total_updates: usize,
    pub updates_per_global: BTreeMap<Unknown, usize>,
    pub wn_switches: BTreeMap<(Unknown, Unknown), u32>,
    /// Procedure entries that were non-bottom at some point but are bottom
    /// in the final assignment.
    pub trash: Vec<Unknown>,
    /// Procedure entries withdrawn at some point but live in the end.
    pub intermittent_trash: Vec<Unknown>,
    /// Procedure entries that ever held a non-bottom value.
    pub proc_entries_seen: usize,
}

impl SolverStats {
    pub fn trash_entries(&self) -> usize {
        self.trash.len()
    }

    pub fn trash_fraction(&self) -> f64 {
        if self.proc_entries_seen == 0 {
            0.0
        } else {
            self.trash.len() as f64 / self.proc_entries_seen as f64
        }
    }
}

pub struct SolveResult<D: Lattice> {
    pub assignment: Assignment<D>,
    pub reached: IndexSet<Unknown>,
    pub verdict: SolveVerdict,
    pub stats: SolverStats,
    /// Per global: bottom, then rho after every `update_globals` call whose
    /// contributions mention the global.
    pub value_trace: BTreeMap<Unknown, Vec<D>>,
    /// Recorded update-rule calls, present when tracing was enabled.
    pub trace: Option<Vec<TraceCall<D>>>,
    /// Final join of live recorded contributions per global, for rules that
    /// keep per-origin state.
    pub recorded_joins: BTreeMap<Unknown, D>,
}

impl<D: Lattice> SolveResult<D> {
    pub fn value(&self, u: &Unknown) -> D {
        self.assignment.get(u)
    }
}

// ---------------------------------------------------------------------------
// Shared global-update machinery
// ---------------------------------------------------------------------------

/// Owns the update rule and enforces the hosting-solver contract: rho
/// evolves exactly by applying the updates returned from `update_globals`.
/// Also keeps the update counts, value traces, withdrawal bookkeeping, and
/// the optional call trace.
pub(crate) struct GlobalEngine<D: Lattice> {
    rule: Box<dyn UpdateRule<D>>,
    max_updates_per_global: Option<usize>,
    record_trace: bool,
    updates_per_global: HashMap<Unknown, usize>,
    total_updates: usize,
    value_trace: BTreeMap<Unknown, Vec<D>>,
    trace: Vec<TraceCall<D>>,
    entries_seen_nonbot: IndexSet<Unknown>,
    entries_withdrawn: HashSet<Unknown>,
}

pub(crate) struct CommitOutcome {
    /// Globals whose value actually changed, in update order.
    pub changed: Vec<Unknown>,
    /// Procedure entries that just transitioned from non-bottom to bottom.
    pub withdrawn_entries: Vec<Unknown>,
}

impl<D: Lattice> GlobalEngine<D> {
    pub fn new(rule: Box<dyn UpdateRule<D>>, config: &SolverConfig<D>) -> Self {
        GlobalEngine {
            rule,
            max_updates_per_global: config.max_updates_per_global,
            record_trace: config.record_trace,
            updates_per_global: HashMap::new(),
            total_updates: 0,
            value_trace: BTreeMap::new(),
            trace: Vec::new(),
            entries_seen_nonbot: IndexSet::new(),
            entries_withdrawn: HashSet::new(),
        }
    }

    /// Runs one `update_globals` call and applies the returned updates to
    /// `asg.rho`.
    pub fn commit(
        &mut self,
        asg: &mut Assignment<D>,
        orig: &Unknown,
        contribs: &Contributions<D>,
    ) -> Result<CommitOutcome, Cap> {
        let updates = self.rule.update_globals(orig, contribs, &asg.rho);
        if self.record_trace {
            let mut touched: IndexSet<Unknown> =
                contribs.entries().iter().map(|(g, _)| g.clone()).collect();
            touched.extend(updates.iter().map(|(g, _)| g.clone()));
            self.trace.push(TraceCall {
                orig: orig.clone(),
                contribs: contribs.entries().to_vec(),
                rho_before: touched.iter().map(|g| (g.clone(), asg.get(g))).collect(),
                updates: updates.clone(),
            });
        }
        let mut outcome = CommitOutcome { changed: Vec::new(), withdrawn_entries: Vec::new() };
        for (g, d) in updates {
            let old = asg.get(&g);
            let changed = !lat_eq(&old, &d);
            if changed {
                self.total_updates += 1;
                let count = self.updates_per_global.entry(g.clone()).or_insert(0);
                *count += 1;
                if let Some(cap) = self.max_updates_per_global {
                    if *count > cap {
                        asg.set(g.clone(), d);
                        return Err(Cap::UpdatesPerGlobal(g));
                    }
                }
                if matches!(g, Unknown::GlobalProcEntry(_, _)) {
                    if d.is_bottom() {
                        if !old.is_bottom() {
                            self.entries_withdrawn.insert(g.clone());
                            outcome.withdrawn_entries.push(g.clone());
                        }
                    } else {
                        self.entries_seen_nonbot.insert(g.clone());
                    }
                }
                outcome.changed.push(g.clone());
            }
            asg.set(g, d);
        }
        for (g, _) in contribs.entries() {
            self.value_trace
                .entry(g.clone())
                .or_insert_with(|| vec![D::bottom()])
                .push(asg.get(g));
        }
        Ok(outcome)
    }

    /// Assembles the final result pieces owned by the engine.
    pub fn finish(self, asg: &Assignment<D>) -> EngineOutput<D> {
        let mut trash = Vec::new();
        let mut intermittent = Vec::new();
        for g in &self.entries_seen_nonbot {
            if asg.get(g).is_bottom() {
                trash.push(g.clone());
            } else if self.entries_withdrawn.contains(g) {
                intermittent.push(g.clone());
            }
        }
        trash.sort();
        intermittent.sort();
        let mut recorded = BTreeMap::new();
        for g in self.updates_per_global.keys() {
            if let Some(j) = self.rule.recorded_join(g) {
                recorded.insert(g.clone(), j);
            }
        }
        let stats = SolverStats {
            rhs_evaluations: 0, // filled in by the solver
            total_updates: self.total_updates,
            updates_per_global: self.updates_per_global.into_iter().collect(),
            wn_switches: self.rule.wn_switches(),
            trash,
            intermittent_trash: intermittent,
            proc_entries_seen: self.entries_seen_nonbot.len(),
        };
        let trace = if self.record_trace { Some(self.trace) } else { None };
        EngineOutput { stats, value_trace: self.value_trace, trace, recorded_joins: recorded }
    }
}

/// Everything the engine hands back when a solve finishes.
pub(crate) struct EngineOutput<D: Lattice> {
    pub stats: SolverStats,
    pub value_trace: BTreeMap<Unknown, Vec<D>>,
    pub trace: Option<Vec<TraceCall<D>>>,
    pub recorded_joins: BTreeMap<Unknown, D>,
}

// ---------------------------------------------------------------------------
// Gas-bounded local combination (warrowing) at widening points
// ---------------------------------------------------------------------------

/// Per-widening-point combinator state.
#[derive(Clone, Copy, Debug)]
pub(crate) struct WarrowState {
    phase: Phase,
    gas_used: u32,
}

impl Default for WarrowState {
    fn default() -> Self {
        WarrowState { phase: Phase::Widen, gas_used: 0 }
    }
}

/// Combines the stored value of a widening point with a freshly evaluated
/// one: widen on growth, narrow on shrink, with narrowing phases bounded by
/// the gas budget.
pub(crate) fn warrow_combine<D: Lattice>(
    state: &mut WarrowState,
    old: &D,
    new: &D,
    gas: Gas,
    ops: &Ops<D>,
) -> D {
    if lat_eq(old, new) {
        return old.clone();
    }
    if !new.leq(old) {
        state.phase = Phase::Widen;
        if old.is_bottom() {
            new.clone()
        } else {
            (ops.widen)(old, new)
        }
    } else if state.phase == Phase::Narrow {
        (ops.narrow)(old, new)
    } else if gas.exhausted(state.gas_used) {
        old.clone()
    } else {
        state.phase = Phase::Narrow;
        state.gas_used += 1;
        (ops.narrow)(old, new)
    }
}

// ---------------------------------------------------------------------------
// Post-solution verification
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PostVerdict {
    Pass,
    Violation { unknown: Unknown, reason: String },
}

impl PostVerdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, PostVerdict::Pass)
    }
}

/// Re-evaluates every reached local against the final assignment and checks
/// that its value and all its contributions are subsumed. This is the
/// convergence certificate: a solution in the constraint-system sense,
/// restricted to the reached unknowns.
pub fn verify_post_solution<D: Lattice>(
    system: &dyn System<D>,
    result: &SolveResult<D>,
) -> PostVerdict {
    for x in &result.reached {
        if !x.is_local() {
            continue;
        }
        let (value, contribs, _deps) = match evaluate(system, x, &result.assignment) {
            Ok(r) => r,
            Err(e) => {
                return PostVerdict::Violation { unknown: x.clone(), reason: e.to_string() }
            }
        };
        let sigma_x = result.assignment.get(x);
        if !value.leq(&sigma_x) {
            return PostVerdict::Violation {
                unknown: x.clone(),
                reason: format!(
                    "re-evaluation yields {} which is not below sigma = {}",
                    value.render(),
                    sigma_x.render()
                ),
            };
        }
        for (g, d) in contribs.entries() {
            let rho_g = result.assignment.get(g);
            if !d.leq(&rho_g) {
                return PostVerdict::Violation {
                    unknown: x.clone(),
                    reason: format!(
                        "contribution {} to {} is not below rho = {}",
                        d.render(),
                        g.render(),
                        rho_g.render()
                    ),
                };
            }
        }
    }
    PostVerdict::Pass
}
