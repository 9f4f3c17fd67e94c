//! Randomized hosting-loop tests for the update rules: the dynamic
//! soundness conditions hold on arbitrary contribution sequences, the
//! accumulate-only rules never shrink a global, and per-origin rules never
//! publish less than the join of their recorded live contributions.

use std::collections::HashMap;

use proptest::prelude::*;

use sidefix::constraints::{synth_global, synth_local, Contributions, Unknown};
use sidefix::lattice::{Interval, Lattice};
use sidefix::rules::{
    check_rule_soundness, make_rule, Gas, Ops, RuleKind, TraceCall, UpdateRule,
};

fn interval() -> impl Strategy<Value = Interval> {
    (-20i64..20, 0i64..15).prop_map(|(lo, w)| Interval::of(lo, lo + w))
}

/// One scripted call: (origin index, per-global contribution choices).
type Script = Vec<(usize, Vec<Option<Interval>>)>;

fn script() -> impl Strategy<Value = Script> {
    proptest::collection::vec(
        (0usize..3, proptest::collection::vec(proptest::option::of(interval()), 2)),
        1..25,
    )
}

struct ScriptRun {
    trace: Vec<TraceCall<Interval>>,
    rho: HashMap<Unknown, Interval>,
    rule: Box<dyn UpdateRule<Interval>>,
}

fn run_script(kind: RuleKind, gas: Gas, gc: bool, script: &Script) -> ScriptRun {
    let origins = [synth_local("x"), synth_local("y"), synth_local("z")];
    let globals = [synth_global("g0"), synth_global("g1")];
    let mut rule = make_rule(kind, gas, gc, Ops::default());
    let mut rho: HashMap<Unknown, Interval> = HashMap::new();
    let mut trace = Vec::new();
    for (who, contribs) in script {
        let mut c = Contributions::new();
        for (gi, entry) in contribs.iter().enumerate() {
            if let Some(iv) = entry {
                c.add(globals[gi].clone(), *iv);
            }
        }
        let orig = &origins[*who];
        let updates = rule.update_globals(orig, &c, &rho);
        let mut touched: Vec<Unknown> = c.entries().iter().map(|(g, _)| g.clone()).collect();
        for (g, _) in &updates {
            if !touched.contains(g) {
                touched.push(g.clone());
            }
        }
        trace.push(TraceCall {
            orig: orig.clone(),
            contribs: c.entries().to_vec(),
            rho_before: touched
                .iter()
                .map(|g| (g.clone(), rho.get(g).copied().unwrap_or(Interval::Bot)))
                .collect(),
            updates: updates.clone(),
        });
        for (g, d) in updates {
            rho.insert(g, d);
        }
    }
    ScriptRun { trace, rho, rule }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 400, ..ProptestConfig::default() })]

    /// Every rule, with and without the withdrawal wrapper, satisfies the
    /// recorded-trace soundness conditions on arbitrary sequences.
    #[test]
    fn every_rule_passes_the_dynamic_checker(s in script(), gc in any::<bool>()) {
        for kind in RuleKind::all() {
            let run = run_script(kind, Gas::Finite(2), gc, &s);
            let verdict = check_rule_soundness(&run.trace);
            prop_assert!(verdict.is_pass(), "{kind}: {verdict:?}");
        }
    }

    /// Baseline, join, and widen-join only ever grow a global.
    #[test]
    fn accumulating_rules_never_shrink(s in script()) {
        for kind in [RuleKind::Baseline, RuleKind::Join, RuleKind::WidenJoin] {
            let run = run_script(kind, Gas::Finite(2), false, &s);
            let mut shadow: HashMap<Unknown, Interval> = HashMap::new();
            for (i, call) in run.trace.iter().enumerate() {
                for (g, d) in &call.updates {
                    let old = shadow.get(g).copied().unwrap_or(Interval::Bot);
                    prop_assert!(old.leq(d), "{kind} shrank {} at call {i}", g.render());
                    shadow.insert(g.clone(), *d);
                }
            }
        }
    }

    /// Rules with per-origin state always publish at least the join of
    /// their live recorded contributions.
    #[test]
    fn updates_subsume_recorded_join(s in script(), gc in any::<bool>()) {
        for kind in [RuleKind::Separate, RuleKind::Apinis, RuleKind::Localized, RuleKind::Reluctant] {
            let run = run_script(kind, Gas::Finite(2), gc, &s);
            for g in [synth_global("g0"), synth_global("g1")] {
                if let Some(join) = run.rule.recorded_join(&g) {
                    let cur = run.rho.get(&g).copied().unwrap_or(Interval::Bot);
                    prop_assert!(join.leq(&cur), "{kind}: rho {} below recorded join {}", cur.render(), join.render());
                }
            }
        }
    }

    /// Gas counters never exceed the configured bound.
    #[test]
    fn gas_is_bounded(s in script(), n in 0u32..4) {
        for kind in [RuleKind::Apinis, RuleKind::Localized, RuleKind::Reluctant] {
            let run = run_script(kind, Gas::Finite(n), false, &s);
            for ((g, o), switches) in run.rule.wn_switches() {
                prop_assert!(
                    switches <= n,
                    "{kind}: {} switches for ({}, {}) with gas {n}",
                    switches, g.render(), o.render()
                );
            }
        }
    }
}
