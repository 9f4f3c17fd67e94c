//! Forward-propagating worklist solver.
//!
//! Unknowns are processed from a deduplicated FIFO queue; re-queued
//! unknowns keep their earliest position. After each evaluation the current
//! unknown is re-evaluated immediately until its own inputs are stable, so
//! a widen/narrow sequence on one unknown runs to completion before other
//! affected unknowns are picked up. An ascending phase (locals combine by
//! join, widening points by the gas-bounded combinator) is followed by a
//! descending phase in which locals are recomputed outright so values may
//! shrink.

use std::collections::{HashMap, HashSet, VecDeque};

use indexmap::IndexSet;

use crate::constraints::{Assignment, RecordingView, System, Unknown};
use crate::lattice::{lat_eq, Lattice};
use crate::rules::UpdateRule;

use super::{
    warrow_combine, Cap, GlobalEngine, SolveResult, SolveVerdict, SolverConfig, WarrowState,
};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    Ascend,
    Descend,
}

struct Worklist {
    queue: VecDeque<Unknown>,
    queued: HashSet<Unknown>,
}

impl Worklist {
    fn new() -> Self {
        Worklist { queue: VecDeque::new(), queued: HashSet::new() }
    }

    fn push(&mut self, u: Unknown) {
        if self.queued.insert(u.clone()) {
            self.queue.push_back(u);
        }
    }

    fn pop(&mut self) -> Option<Unknown> {
        let u = self.queue.pop_front()?;
        self.queued.remove(&u);
        Some(u)
    }
}

pub fn solve_worklist<D: Lattice>(
    system: &dyn System<D>,
    rule: Box<dyn UpdateRule<D>>,
    config: &SolverConfig<D>,
) -> SolveResult<D> {
    let mut engine = GlobalEngine::new(rule, config);
    let mut asg: Assignment<D> = Assignment::new();
    let mut infl: HashMap<Unknown, IndexSet<Unknown>> = HashMap::new();
    let mut reached: IndexSet<Unknown> = IndexSet::new();
    let mut warrow: HashMap<Unknown, WarrowState> = HashMap::new();
    let mut instantiated: HashSet<Unknown> = HashSet::new();
    let mut wl = Worklist::new();
    let mut rhs_evaluations = 0usize;
    let mut phase = Phase::Ascend;

    for x in system.interests() {
        reached.insert(x.clone());
        wl.push(x);
    }

    let mut abort: Option<Cap> = None;
    'outer: loop {
        while let Some(x) = wl.pop() {
            // Stabilize the current unknown before picking up others.
            loop {
                if let Some(cap) = config.max_rhs_evaluations {
                    if rhs_evaluations >= cap {
                        abort = Some(Cap::RhsEvaluations);
                        break 'outer;
                    }
                }
                rhs_evaluations += 1;
                let mut view = RecordingView::new(&asg);
                let Ok((value, contribs)) = system.eval(&x, &mut view) else {
                    break; // no right-hand side: nothing to do
                };
                let deps = view.deps();
                for d in &deps {
                    reached.insert(d.clone());
                    infl.entry(d.clone()).or_default().insert(x.clone());
                }

                let old = asg.get(&x);
                let new = if system.is_widening_point(&x) {
                    let state = warrow.entry(x.clone()).or_default();
                    warrow_combine(state, &old, &value, config.local_gas, &config.ops)
                } else {
                    match phase {
                        Phase::Ascend => old.join(&value),
                        Phase::Descend => value,
                    }
                };
                let sigma_changed = !lat_eq(&old, &new);
                if sigma_changed {
                    asg.set(x.clone(), new);
                }

                let outcome = match engine.commit(&mut asg, &x, &contribs) {
                    Ok(o) => o,
                    Err(cap) => {
                        abort = Some(cap);
                        break 'outer;
                    }
                };

                let mut self_affected = false;
                for g in &outcome.changed {
                    reached.insert(g.clone());
                    // First non-bottom value of a procedure entry brings its
                    // program points into the system.
                    if matches!(g, Unknown::GlobalProcEntry(_, _))
                        && !asg.get(g).is_bottom()
                        && instantiated.insert(g.clone())
                    {
                        for l in system.locals_for_entry(g) {
                            reached.insert(l.clone());
                            wl.push(l);
                        }
                    }
                    if let Some(readers) = infl.get(g) {
                        for r in readers {
                            if *r == x {
                                self_affected = true;
                            } else {
                                wl.push(r.clone());
                            }
                        }
                    }
                }
                if sigma_changed {
                    if let Some(readers) = infl.get(&x) {
                        for r in readers {
                            if *r == x {
                                self_affected = true;
                            } else {
                                wl.push(r.clone());
                            }
                        }
                    }
                }
                if !self_affected {
                    break;
                }
            }
        }
        match phase {
            Phase::Ascend => {
                // Descending pass: recompute every reached local so that
                // precision recovered at widening points and in rho can
                // propagate through plain nodes.
                phase = Phase::Descend;
                for u in reached.clone() {
                    if u.is_local() {
                        wl.push(u);
                    }
                }
            }
            Phase::Descend => break,
        }
    }

    let verdict = match abort {
        Some(cap) => SolveVerdict::Divergence(cap),
        None => SolveVerdict::Converged,
    };
    let mut out = engine.finish(&asg);
    out.stats.rhs_evaluations = rhs_evaluations;
    SolveResult {
        assignment: asg,
        reached,
        verdict,
        stats: out.stats,
        value_trace: out.value_trace,
        trace: out.trace,
        recorded_joins: out.recorded_joins,
    }
}
