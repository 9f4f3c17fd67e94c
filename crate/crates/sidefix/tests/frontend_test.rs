//! Frontend coverage: grammar and kind errors, program shape, transfer
//! probes, guard-refinement soundness against brute-force enumeration, and
//! strictness of every generated constraint across the corpus.

use proptest::prelude::*;

use sidefix::constraints::{evaluate, Assignment, NodeId, PlainView, Unknown};
use sidefix::frontend::ast::{CmpOp, Cond, Expr};
use sidefix::frontend::parser::Procedure;
use sidefix::frontend::transfer::TransferCtx;
use sidefix::frontend::{parse, ContextMode, FrontendError, ProgramSystem};
use sidefix::lattice::{AbsEnv, Interval, Lattice, Value, VarValue};

fn corpus(file: &str) -> String {
    std::fs::read_to_string(format!("{}/../../corpus/{file}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

#[test]
fn parses_the_single_write_program() {
    let p = parse(&corpus("assign_assert.mc")).unwrap();
    assert_eq!(p.globals.len(), 1);
    assert_eq!(p.globals[0].name, "a");
    assert_eq!(p.procs.len(), 1);
    assert_eq!(p.thread_entries, vec!["main".to_string()]);
}

#[test]
fn parses_the_two_thread_program() {
    let p = parse(&corpus("incdec.mc")).unwrap();
    assert_eq!(p.thread_entries, vec!["thread1".to_string(), "thread2".to_string()]);
}

#[test]
fn malformed_declaration_is_a_parse_error() {
    let err = parse("int x = ;").unwrap_err();
    assert!(matches!(err, FrontendError::Parse { .. }), "{err}");
}

#[test]
fn kind_errors_are_reported() {
    let ptr_as_int = "int z = 0; int *p = &z; void main() { int x = p; }";
    assert!(matches!(parse(ptr_as_int), Err(FrontendError::Type { .. })));
    let deref_int = "int z = 0; void main() { int x = *z; }";
    assert!(matches!(parse(deref_int), Err(FrontendError::Type { .. })));
    let shadowing = "int g = 0; void main() { int g = 1; }";
    assert!(matches!(parse(shadowing), Err(FrontendError::Type { .. })));
    let redecl = "void main() { int x = 1; int x = 2; }";
    assert!(matches!(parse(redecl), Err(FrontendError::Type { .. })));
    let bad_call = "void f(int a) { } void main() { f(1, 2); }";
    assert!(matches!(parse(bad_call), Err(FrontendError::Type { .. })));
    let undeclared = "void main() { x = 1; }";
    assert!(matches!(parse(undeclared), Err(FrontendError::Type { .. })));
    let entry_params = "void thread1(int x) { }";
    assert!(matches!(parse(entry_params), Err(FrontendError::Type { .. })));
}

fn probe_ctx(program: &sidefix::frontend::Program) -> (&Procedure, TransferCtx<'_>) {
    let proc = &program.procs[0];
    (proc, TransferCtx { program, proc, mode: ContextMode::Unit })
}

#[test]
fn guard_refinement_probe() {
    // guard(i < 10) on {i -> [0, inf]} refines to {i -> [0, 9]}.
    let program = parse("void main() { int i = 0; if (i < 10) { i = 1; } }").unwrap();
    let (_, tctx) = probe_ctx(&program);
    let env = AbsEnv::empty().set(
        "i",
        VarValue::Int(Interval::range(sidefix::lattice::ExtInt::Fin(0), sidefix::lattice::ExtInt::PosInf)),
    );
    let asg = Assignment::<Value>::new();
    let mut view = PlainView::new(&asg);
    let cond = Cond { lhs: Expr::Var("i".into()), op: CmpOp::Lt, rhs: Expr::Lit(10) };
    let refined = tctx.refine(&cond, true, &env, &mut view);
    assert_eq!(refined.get_int("i"), Interval::of(0, 9));
    let negated = tctx.refine(&cond, false, &env, &mut view);
    assert_eq!(
        negated.get_int("i"),
        Interval::range(sidefix::lattice::ExtInt::Fin(10), sidefix::lattice::ExtInt::PosInf)
    );
}

#[test]
fn assignment_transfer_probes() {
    let program = parse("int a = 0; void main() { int i = 0; a = i + 1; i = 17; }").unwrap();
    let (_, tctx) = probe_ctx(&program);
    let asg = Assignment::<Value>::new();

    // A write to the shared global contributes the right-hand value and
    // leaves the environment unchanged.
    let env = AbsEnv::empty().set("i", VarValue::Int(Interval::singleton(0)));
    let mut contribs = sidefix::constraints::Contributions::new();
    let mut view = PlainView::new(&asg);
    let out = tctx.transfer(
        &sidefix::frontend::cfg::Label::Assign(
            "a".into(),
            Expr::Bin(Box::new(Expr::Var("i".into())), sidefix::frontend::ast::BinOp::Add, Box::new(Expr::Lit(1))),
        ),
        &env,
        &mut view,
        &mut contribs,
    );
    assert_eq!(out, env);
    assert_eq!(
        contribs.entries(),
        &[(Unknown::GlobalShared("a".into()), Value::from_interval(Interval::singleton(1)))]
    );

    // A constant write to a local updates the environment.
    let mut contribs = sidefix::constraints::Contributions::new();
    let mut view = PlainView::new(&asg);
    let out = tctx.transfer(
        &sidefix::frontend::cfg::Label::Assign("i".into(), Expr::Lit(17)),
        &env,
        &mut view,
        &mut contribs,
    );
    assert_eq!(out.get_int("i"), Interval::singleton(17));
    assert!(contribs.is_empty());
}

#[test]
fn escaping_write_contributes_location_and_value() {
    let program = parse(&corpus("escape_direct.mc")).unwrap();
    let system = ProgramSystem::new(program, ContextMode::Unit);
    // Find the point after `a = &i` and force its predecessor state.
    let proc = system.program.proc("thread1").unwrap();
    let edge = proc
        .cfg
        .edges
        .iter()
        .find(|e| matches!(&e.label, sidefix::frontend::cfg::Label::AssignAddr(_, _)))
        .unwrap();
    let mut asg = Assignment::<Value>::new();
    asg.set(
        Unknown::LocalPoint(NodeId::new("thread1", edge.from), sidefix::constraints::Context::Unit),
        Value::from_env(AbsEnv::empty().set("i", VarValue::Int(Interval::singleton(1)))),
    );
    let x = Unknown::LocalPoint(NodeId::new("thread1", edge.to), sidefix::constraints::Context::Unit);
    let (_, contribs, _) = evaluate(&system, &x, &asg).unwrap();
    assert_eq!(
        contribs.get(&Unknown::GlobalEscaped("thread1".into(), "i".into())),
        Some(&Value::from_interval(Interval::singleton(1)))
    );
    let pts = contribs.get(&Unknown::GlobalShared("a".into())).unwrap().as_ptset();
    assert_eq!(pts.render(), "{thread1.i}");
}

#[test]
fn strictness_holds_for_every_corpus_constraint() {
    // With an empty assignment, every program point of every corpus program
    // evaluates to bottom without contributions.
    for file in std::fs::read_dir(format!("{}/../../corpus", env!("CARGO_MANIFEST_DIR"))).unwrap() {
        let path = file.unwrap().path();
        if path.extension().is_none_or(|e| e != "mc") {
            continue;
        }
        let program = parse(&std::fs::read_to_string(&path).unwrap()).unwrap();
        for mode in [ContextMode::Unit, ContextMode::Full] {
            let system = ProgramSystem::new(program.clone(), mode);
            let ctx = system.initial_context();
            let asg = Assignment::<Value>::new();
            for proc in &system.program.procs {
                for point in proc.cfg.points() {
                    let x = Unknown::LocalPoint(NodeId::new(&proc.name, point), ctx.clone());
                    let (value, contribs, _) = evaluate(&system, &x, &asg).unwrap();
                    assert!(value.is_bottom(), "{}: {} not strict", path.display(), x.render());
                    assert!(contribs.is_empty());
                }
            }
        }
    }
}

#[test]
fn full_contexts_are_keyed_by_the_entry_environment() {
    // Two call sites passing the same constant reach the same context; a
    // third with a different constant creates a second one.
    let src = "int g = 0;
void set(int v) { g = v; }
void main() { set(3); set(3); set(4); }";
    let program = parse(src).unwrap();
    let system = ProgramSystem::new(program, ContextMode::Full);
    let rule = sidefix::rules::make_rule(
        sidefix::rules::RuleKind::Localized,
        sidefix::rules::Gas::Finite(3),
        false,
        sidefix::rules::Ops::default(),
    );
    let result = sidefix::solver::solve_topdown(&system, rule, &sidefix::solver::SolverConfig::default());
    let contexts: Vec<String> = result
        .reached
        .iter()
        .filter(|u| matches!(u, Unknown::GlobalProcEntry(p, _) if p == "set"))
        .map(|u| u.render())
        .collect();
    assert_eq!(contexts.len(), 2, "{contexts:?}");
}

// ---------------------------------------------------------------------------
// Guard-refinement soundness against brute force
// ---------------------------------------------------------------------------

fn small_interval() -> impl Strategy<Value = Interval> {
    prop_oneof![
        6 => (-6i64..6, 0i64..5).prop_map(|(lo, w)| Interval::of(lo, lo + w)),
        1 => Just(Interval::top()),
        1 => (-6i64..6).prop_map(|hi| Interval::range(sidefix::lattice::ExtInt::NegInf, sidefix::lattice::ExtInt::Fin(hi))),
    ]
}

fn cmp_op() -> impl Strategy<Value = CmpOp> {
    prop_oneof![
        Just(CmpOp::Lt),
        Just(CmpOp::Gt),
        Just(CmpOp::Le),
        Just(CmpOp::Ge),
        Just(CmpOp::Eq),
        Just(CmpOp::Ne),
    ]
}

fn holds(op: CmpOp, a: i64, b: i64) -> bool {
    match op {
        CmpOp::Lt => a < b,
        CmpOp::Gt => a > b,
        CmpOp::Le => a <= b,
        CmpOp::Ge => a >= b,
        CmpOp::Eq => a == b,
        CmpOp::Ne => a != b,
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 2000, ..ProptestConfig::default() })]

    /// Every concrete valuation that satisfies the guard stays inside the
    /// refined environment (checked by enumerating a window of values).
    #[test]
    fn guard_refinement_is_sound(ia in small_interval(), ib in small_interval(), op in cmp_op(), lit in prop::bool::ANY, polarity in prop::bool::ANY) {
        let program = parse("void main() { int x = 0; int y = 0; if (x < y) { x = 1; } }").unwrap();
        let proc = &program.procs[0];
        let tctx = TransferCtx { program: &program, proc, mode: ContextMode::Unit };
        let env = AbsEnv::of([
            ("x".to_string(), VarValue::Int(ia)),
            ("y".to_string(), VarValue::Int(ib)),
        ]);
        prop_assume!(!env.is_bottom());
        let rhs = if lit { Expr::Lit(2) } else { Expr::Var("y".into()) };
        let cond = Cond { lhs: Expr::Var("x".into()), op, rhs };
        let asg = Assignment::<Value>::new();
        let mut view = PlainView::new(&asg);
        let refined = tctx.refine(&cond, polarity, &env, &mut view);
        let effective = if polarity { op } else { op.negate() };
        for x in -8i64..=8 {
            if !ia.contains(x) { continue; }
            for y in -8i64..=8 {
                if !ib.contains(y) { continue; }
                let b = if lit { 2 } else { y };
                if holds(effective, x, b) {
                    prop_assert!(!refined.is_bottom(), "satisfying state refined away: x={x} y={y}");
                    prop_assert!(refined.get_int("x").contains(x), "x={x} lost by {}", refined.render());
                    prop_assert!(refined.get_int("y").contains(y), "y={y} lost by {}", refined.render());
                }
            }
        }
    }
}
