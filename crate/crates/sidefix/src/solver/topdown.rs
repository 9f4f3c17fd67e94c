//! Demand-driven top-down solver.
//!
//! Querying an unknown evaluates its right-hand side, recursively querying
//! dependencies first and iterating until the unknown is stable. When a
//! value changes, the readers recorded for it are only marked unstable;
//! they are re-evaluated when queried again. Cyclic queries read the
//! current value of the unknown on the evaluation stack.
//!
//! One exception to the laziness: when a procedure-entry global is
//! withdrawn (its value returns to bottom), the return point of that
//! procedure and context is queried eagerly, so strictness propagates the
//! bottom through the dead context and its contributions are withdrawn.

use std::collections::{HashMap, HashSet};

use indexmap::IndexSet;

use crate::constraints::{Assignment, System, Unknown, View};
use crate::lattice::{lat_eq, Lattice};
use crate::rules::UpdateRule;

use super::{
    warrow_combine, Cap, GlobalEngine, SolveResult, SolveVerdict, SolverConfig, WarrowState,
};

struct Topdown<'s, D: Lattice> {
    system: &'s dyn System<D>,
    config: &'s SolverConfig<D>,
    engine: GlobalEngine<D>,
    asg: Assignment<D>,
    infl: HashMap<Unknown, IndexSet<Unknown>>,
    stable: HashSet<Unknown>,
    called: HashSet<Unknown>,
    reached: IndexSet<Unknown>,
    warrow: HashMap<Unknown, WarrowState>,
    rhs_evaluations: usize,
    pending_abort: Option<Cap>,
}

struct TdView<'a, 's, D: Lattice> {
    solver: &'a mut Topdown<'s, D>,
    reader: Unknown,
}

impl<D: Lattice> View<D> for TdView<'_, '_, D> {
    fn get(&mut self, u: &Unknown) -> D {
        if self.solver.pending_abort.is_some() {
            return D::bottom();
        }
        if u.is_local() {
            if let Err(cap) = self.solver.solve(u) {
                self.solver.pending_abort = Some(cap);
                return D::bottom();
            }
        }
        self.solver.reached.insert(u.clone());
        self.solver.infl.entry(u.clone()).or_default().insert(self.reader.clone());
        self.solver.asg.get(u)
    }
}

impl<'s, D: Lattice> Topdown<'s, D> {
    fn solve(&mut self, x: &Unknown) -> Result<(), Cap> {
        if self.called.contains(x) || self.stable.contains(x) {
            return Ok(());
        }
        self.reached.insert(x.clone());
        self.called.insert(x.clone());
        let res = self.iterate(x);
        self.called.remove(x);
        res
    }

    fn iterate(&mut self, x: &Unknown) -> Result<(), Cap> {
        loop {
            self.stable.insert(x.clone());
            if let Some(cap) = self.config.max_rhs_evaluations {
                if self.rhs_evaluations >= cap {
                    return Err(Cap::RhsEvaluations);
                }
            }
            self.rhs_evaluations += 1;
            let system = self.system;
            let evaled = {
                let mut view = TdView { solver: self, reader: x.clone() };
                system.eval(x, &mut view)
            };
            if let Some(cap) = self.pending_abort.take() {
                return Err(cap);
            }
            let Ok((value, contribs)) = evaled else {
                return Ok(()); // no right-hand side registered
            };

            let old = self.asg.get(x);
            let new = if system.is_widening_point(x) {
                let state = self.warrow.entry(x.clone()).or_default();
                warrow_combine(state, &old, &value, self.config.local_gas, &self.config.ops)
            } else {
                value
            };
            if !lat_eq(&old, &new) {
                self.asg.set(x.clone(), new);
                self.destabilize(x);
            }

            let outcome = self.engine.commit(&mut self.asg, x, &contribs)?;
            let mut requery = Vec::new();
            for g in &outcome.changed {
                self.reached.insert(g.clone());
                self.destabilize(g);
            }
            if self.config.requery {
                for entry in &outcome.withdrawn_entries {
                    if let Some(ret) = system.return_point_of(entry) {
                        requery.push(ret);
                    }
                }
            }
            for r in requery {
                self.solve(&r)?;
            }
            if self.stable.contains(x) {
                return Ok(());
            }
        }
    }

    /// Removes the stable mark from everything transitively influenced by
    /// `u`, consuming the influence edges (they are re-recorded on
    /// re-evaluation).
    fn destabilize(&mut self, u: &Unknown) {
        if let Some(readers) = self.infl.remove(u) {
            for r in readers {
                self.stable.remove(&r);
                self.destabilize(&r);
            }
        }
    }
}

pub fn solve_topdown<D: Lattice>(
    system: &dyn System<D>,
    rule: Box<dyn UpdateRule<D>>,
    config: &SolverConfig<D>,
) -> SolveResult<D> {
    let mut solver = Topdown {
        system,
        config,
        engine: GlobalEngine::new(rule, config),
        asg: Assignment::new(),
        infl: HashMap::new(),
        stable: HashSet::new(),
        called: HashSet::new(),
        reached: IndexSet::new(),
        warrow: HashMap::new(),
        rhs_evaluations: 0,
        pending_abort: None,
    };
    let interests = system.interests();
    let mut abort = None;
    'driver: loop {
        for x in &interests {
            if let Err(cap) = solver.solve(x) {
                abort = Some(cap);
                break 'driver;
            }
        }
        if interests.iter().all(|x| solver.stable.contains(x)) {
            break;
        }
    }
    let verdict = match abort {
        Some(cap) => SolveVerdict::Divergence(cap),
        None => SolveVerdict::Converged,
    };
    let mut out = solver.engine.finish(&solver.asg);
    out.stats.rhs_evaluations = solver.rhs_evaluations;
    SolveResult {
        assignment: solver.asg,
        reached: solver.reached,
        verdict,
        stats: out.stats,
        value_trace: out.value_trace,
        trace: out.trace,
        recorded_joins: out.recorded_joins,
    }
}
