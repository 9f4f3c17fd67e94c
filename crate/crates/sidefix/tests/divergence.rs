//! Termination witnesses: the synthetic systems that defeat unbounded
//! narrowing, the scripted ascent that defeats reluctant widening over a
//! non-strong operator, and the gas-bounded configurations that tame all of
//! them.

use sidefix::constraints::{register_synthetic_system, synth_global, Unknown};
use sidefix::lattice::{CounterValue, Interval, LexGasValue};
use sidefix::rules::{
    check_rule_soundness, drive_two_origin_ascent, make_rule, DriveOutcome, Gas, LocalizedRule,
    Ops, RuleKind, UpdateRule,
};
use sidefix::solver::{solve_topdown, solve_worklist, Cap, SolveResult, SolveVerdict, SolverConfig, SolverKind};

fn solve_synth(
    name: &str,
    rule: RuleKind,
    gas: Gas,
    cap: usize,
    solver: SolverKind,
) -> SolveResult<CounterValue> {
    let sys = register_synthetic_system(name).unwrap();
    let config = SolverConfig {
        max_updates_per_global: Some(cap),
        record_trace: true,
        ..SolverConfig::default()
    };
    let r = make_rule(rule, gas, false, Ops::default());
    match solver {
        SolverKind::Topdown => solve_topdown(&sys, r, &config),
        SolverKind::Worklist => solve_worklist(&sys, r, &config),
    }
}

fn prefix(result: &SolveResult<CounterValue>, g: &Unknown, len: usize) -> Vec<CounterValue> {
    result.value_trace.get(g).map(|t| t.iter().take(len).copied().collect()).unwrap_or_default()
}

fn c(n: u64) -> CounterValue {
    CounterValue::Fin(n)
}

const INF: CounterValue = CounterValue::Inf;

#[test]
fn localized_with_unbounded_narrowing_diverges_on_the_counter_pair() {
    for solver in [SolverKind::Worklist, SolverKind::Topdown] {
        let res = solve_synth("ex43", RuleKind::Localized, Gas::Inf, 200, solver);
        assert!(
            matches!(&res.verdict, SolveVerdict::Divergence(Cap::UpdatesPerGlobal(_))),
            "{solver:?}: {:?}",
            res.verdict
        );
        // The recorded per-global sequences follow the alternating
        // widen/narrow pattern exactly.
        let a = synth_global("a");
        let b = synth_global("b");
        assert_eq!(
            prefix(&res, &a, 12),
            vec![c(0), c(1), c(1), INF, c(3), c(3), INF, c(5), c(5), INF, c(7), c(7)],
        );
        assert_eq!(
            prefix(&res, &b, 12),
            vec![c(0), c(2), c(2), INF, c(4), c(4), INF, c(6), c(6), INF, c(8), c(8)],
        );
        assert!(check_rule_soundness(res.trace.as_ref().unwrap()).is_pass());
    }
}

#[test]
fn gas_bound_restores_termination_on_the_counter_pair() {
    for solver in [SolverKind::Worklist, SolverKind::Topdown] {
        let res = solve_synth("ex43", RuleKind::Localized, Gas::Finite(3), 10_000, solver);
        assert_eq!(res.verdict, SolveVerdict::Converged, "{solver:?}");
        assert!(
            res.stats.total_updates <= 50,
            "{solver:?}: {} updates",
            res.stats.total_updates
        );
        assert!(check_rule_soundness(res.trace.as_ref().unwrap()).is_pass());
    }
}

#[test]
fn apinis_diverges_on_the_modified_monotone_system() {
    // The contribution term switches once the global reaches infinity, so
    // the equal-contribution skip no longer protects the rule from
    // unbounded widen/narrow alternation.
    for solver in [SolverKind::Worklist, SolverKind::Topdown] {
        let res = solve_synth("appendixB", RuleKind::Apinis, Gas::Inf, 200, solver);
        assert!(
            matches!(&res.verdict, SolveVerdict::Divergence(Cap::UpdatesPerGlobal(_))),
            "{solver:?}: {:?}",
            res.verdict
        );
        let a = synth_global("a");
        assert_eq!(prefix(&res, &a, 7), vec![c(0), c(1), c(1), INF, c(4), c(4), INF]);
        assert!(check_rule_soundness(res.trace.as_ref().unwrap()).is_pass());
    }
}

#[test]
fn gas_bound_restores_termination_on_the_modified_system() {
    for solver in [SolverKind::Worklist, SolverKind::Topdown] {
        let res = solve_synth("appendixB", RuleKind::Apinis, Gas::Finite(3), 10_000, solver);
        assert_eq!(res.verdict, SolveVerdict::Converged, "{solver:?}");
        assert!(res.stats.total_updates <= 50);
    }
}

#[test]
fn unmodified_system_keeps_apinis_stable() {
    // On the original counter pair the re-sent contribution is identical,
    // so the skip fires and apinis converges even with unbounded gas.
    let res = solve_synth("ex43", RuleKind::Apinis, Gas::Inf, 200, SolverKind::Topdown);
    assert_eq!(res.verdict, SolveVerdict::Converged);
}

#[test]
fn reluctant_over_a_non_strong_widening_keeps_updating() {
    let mut rule: LocalizedRule<LexGasValue> =
        LocalizedRule::new(Gas::Finite(3), true, Ops::default());
    let outcome = drive_two_origin_ascent(
        &mut rule as &mut dyn UpdateRule<LexGasValue>,
        |k| LexGasValue::new(k, 0),
        200,
    );
    assert!(
        matches!(outcome, DriveOutcome::CapTripped { updates, .. } if updates > 200),
        "expected the 200-update cap to trip"
    );
}

#[test]
fn reluctant_over_the_strong_interval_widening_converges() {
    // The identical driver over intervals: once the widening tops out the
    // upper bound, every later contribution is subsumed and joined.
    let mut rule: LocalizedRule<Interval> =
        LocalizedRule::new(Gas::Finite(3), true, Ops::default());
    let outcome = drive_two_origin_ascent(
        &mut rule as &mut dyn UpdateRule<Interval>,
        |k| Interval::of(0, k as i64),
        200,
    );
    match outcome {
        DriveOutcome::Converged { updates, value } => {
            assert!(updates <= 10, "{updates} updates");
            assert_eq!(value, Interval::range(sidefix::lattice::ExtInt::Fin(0), sidefix::lattice::ExtInt::PosInf));
        }
        other => panic!("expected convergence, got {other:?}"),
    }
}

#[test]
fn evaluation_cap_trips_as_a_last_resort() {
    let sys = register_synthetic_system("ex43").unwrap();
    let config = SolverConfig {
        max_updates_per_global: None,
        max_rhs_evaluations: Some(300),
        ..SolverConfig::default()
    };
    let r = make_rule(RuleKind::Localized, Gas::Inf, false, Ops::default());
    let res = solve_worklist(&sys, r, &config);
    assert_eq!(res.verdict, SolveVerdict::Divergence(Cap::RhsEvaluations));
}
