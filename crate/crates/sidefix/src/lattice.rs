//! Bounded-lattice value domains with widening and narrowing operators.
//!
//! The analyzer tracks intervals for integer data, may-points-to sets for
//! pointers, and per-point abstract environments. Two further domains
//! (`CounterValue`, `LexGasValue`) exist to exercise the fixpoint engine on
//! lattices with pathological widening behavior.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// A bounded lattice with widening and narrowing.
///
/// `leq` is the abstract order; `join`/`meet` are least upper and greatest
/// lower bounds. `widen` must cover the join and stabilize ascending chains;
/// `narrow` must satisfy `meet(a,b) ⊑ narrow(a,b) ⊑ a`.
pub trait Lattice: Clone + Eq + Ord + std::hash::Hash + fmt::Debug {
    fn bottom() -> Self;
    fn is_bottom(&self) -> bool {
        *self == Self::bottom()
    }
    fn leq(&self, other: &Self) -> bool;
    fn join(&self, other: &Self) -> Self;
    fn meet(&self, other: &Self) -> Self;
    fn widen(&self, other: &Self) -> Self;
    fn narrow(&self, other: &Self) -> Self;
    fn render(&self) -> String;
}

/// Equality in terms of the lattice order (`a ⊑ b ∧ b ⊑ a`).
pub fn lat_eq<D: Lattice>(a: &D, b: &D) -> bool {
    a.leq(b) && b.leq(a)
}

// ---------------------------------------------------------------------------
// Extended integers
// ---------------------------------------------------------------------------

/// A 64-bit signed integer extended with infinities. Arithmetic saturates:
/// overflow of a finite operation yields the corresponding infinity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExtInt {
    NegInf,
    Fin(i64),
    PosInf,
}

use ExtInt::*;

impl ExtInt {
    pub fn is_finite(&self) -> bool {
        matches!(self, Fin(_))
    }

    /// Bound product with the convention `0 * ±inf = 0`.
    pub fn bound_mul(self, other: ExtInt) -> ExtInt {
        match (self, other) {
            (Fin(0), _) | (_, Fin(0)) => Fin(0),
            (Fin(a), Fin(b)) => match a.checked_mul(b) {
                Some(c) => Fin(c),
                None => {
                    if (a < 0) ^ (b < 0) {
                        NegInf
                    } else {
                        PosInf
                    }
                }
            },
            (a, b) => {
                let neg = match a {
                    NegInf => true,
                    PosInf => false,
                    Fin(v) => v < 0,
                } ^ match b {
                    NegInf => true,
                    PosInf => false,
                    Fin(v) => v < 0,
                };
                if neg {
                    NegInf
                } else {
                    PosInf
                }
            }
        }
    }
}

impl std::ops::Add for ExtInt {
    type Output = ExtInt;

    fn add(self, other: ExtInt) -> ExtInt {
        match (self, other) {
            (PosInf, NegInf) | (NegInf, PosInf) => {
                panic!("ExtInt: adding opposite infinities")
            }
            (PosInf, _) | (_, PosInf) => PosInf,
            (NegInf, _) | (_, NegInf) => NegInf,
            (Fin(a), Fin(b)) => match a.checked_add(b) {
                Some(c) => Fin(c),
                None => {
                    if b > 0 {
                        PosInf
                    } else {
                        NegInf
                    }
                }
            },
        }
    }
}

impl std::ops::Neg for ExtInt {
    type Output = ExtInt;

    fn neg(self) -> ExtInt {
        match self {
            PosInf => NegInf,
            NegInf => PosInf,
            Fin(a) => match a.checked_neg() {
                Some(c) => Fin(c),
                None => PosInf,
            },
        }
    }
}

impl std::ops::Sub for ExtInt {
    type Output = ExtInt;

    fn sub(self, other: ExtInt) -> ExtInt {
        self + (-other)
    }
}

impl fmt::Display for ExtInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NegInf => write!(f, "-inf"),
            PosInf => write!(f, "inf"),
            Fin(n) => write!(f, "{n}"),
        }
    }
}

// ---------------------------------------------------------------------------
// Intervals
// ---------------------------------------------------------------------------

/// The interval domain: `Bot`, or a pair of extended bounds `lo ≤ hi`.
/// `[-inf, inf]` is the top element.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Interval {
    Bot,
    Range(ExtInt, ExtInt),
}

impl Interval {
    pub fn range(lo: ExtInt, hi: ExtInt) -> Interval {
        if lo > hi {
            Interval::Bot
        } else {
            Interval::Range(lo, hi)
        }
    }

    pub fn of(lo: i64, hi: i64) -> Interval {
        Interval::range(Fin(lo), Fin(hi))
    }

    pub fn singleton(n: i64) -> Interval {
        Interval::of(n, n)
    }

    pub fn top() -> Interval {
        Interval::Range(NegInf, PosInf)
    }

    pub fn bounds(&self) -> Option<(ExtInt, ExtInt)> {
        match self {
            Interval::Bot => None,
            Interval::Range(l, u) => Some((*l, *u)),
        }
    }

    pub fn contains(&self, n: i64) -> bool {
        match self {
            Interval::Bot => false,
            Interval::Range(l, u) => *l <= Fin(n) && Fin(n) <= *u,
        }
    }

    pub fn add(&self, other: &Interval) -> Interval {
        match (self.bounds(), other.bounds()) {
            (Some((l1, u1)), Some((l2, u2))) => Interval::range(l1 + l2, u1 + u2),
            _ => Interval::Bot,
        }
    }

    pub fn sub(&self, other: &Interval) -> Interval {
        match (self.bounds(), other.bounds()) {
            (Some((l1, u1)), Some((l2, u2))) => Interval::range(l1 - u2, u1 - l2),
            _ => Interval::Bot,
        }
    }

    /// Min/max over the four bound products, saturating.
    pub fn mul(&self, other: &Interval) -> Interval {
        match (self.bounds(), other.bounds()) {
            (Some((l1, u1)), Some((l2, u2))) => {
                let ps = [l1.bound_mul(l2), l1.bound_mul(u2), u1.bound_mul(l2), u1.bound_mul(u2)];
                Interval::range(*ps.iter().min().unwrap(), *ps.iter().max().unwrap())
            }
            _ => Interval::Bot,
        }
    }
}

impl Lattice for Interval {
    fn bottom() -> Self {
        Interval::Bot
    }

    fn leq(&self, other: &Self) -> bool {
        match (self, other) {
            (Interval::Bot, _) => true,
            (_, Interval::Bot) => false,
            (Interval::Range(l1, u1), Interval::Range(l2, u2)) => l2 <= l1 && u1 <= u2,
        }
    }

    fn join(&self, other: &Self) -> Self {
        match (self.bounds(), other.bounds()) {
            (None, _) => *other,
            (_, None) => *self,
            (Some((l1, u1)), Some((l2, u2))) => Interval::Range(l1.min(l2), u1.max(u2)),
        }
    }

    fn meet(&self, other: &Self) -> Self {
        match (self.bounds(), other.bounds()) {
            (Some((l1, u1)), Some((l2, u2))) => Interval::range(l1.max(l2), u1.min(u2)),
            _ => Interval::Bot,
        }
    }

    /// The classic interval widening: a changed lower bound drops to `-inf`
    /// and a changed upper bound rises to `inf`. This widening is strong:
    /// `b ⊑ a` implies `a ▽ b = a`.
    fn widen(&self, other: &Self) -> Self {
        match (self.bounds(), other.bounds()) {
            (None, _) => *other,
            (_, None) => *self,
            (Some((l1, u1)), Some((l2, u2))) => Interval::Range(
                if l1 <= l2 { l1 } else { NegInf },
                if u1 >= u2 { u1 } else { PosInf },
            ),
        }
    }

    /// The classic interval narrowing: only infinite bounds are improved.
    fn narrow(&self, other: &Self) -> Self {
        match (self.bounds(), other.bounds()) {
            (None, _) | (_, None) => Interval::Bot,
            (Some((l1, u1)), Some((l2, u2))) => Interval::range(
                if l1 != NegInf { l1 } else { l2 },
                if u1 != PosInf { u1 } else { u2 },
            ),
        }
    }

    fn render(&self) -> String {
        match self {
            Interval::Bot => "⊥".to_string(),
            Interval::Range(l, u) => format!("[{l},{u}]"),
        }
    }
}

// ---------------------------------------------------------------------------
// Threshold widening
// ---------------------------------------------------------------------------

/// A finite, sorted threshold set always containing both infinities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Thresholds(BTreeSet<ExtInt>);

impl Thresholds {
    pub fn new(values: impl IntoIterator<Item = i64>) -> Thresholds {
        let mut set: BTreeSet<ExtInt> = values.into_iter().map(Fin).collect();
        set.insert(NegInf);
        set.insert(PosInf);
        Thresholds(set)
    }

    pub fn values(&self) -> impl Iterator<Item = &ExtInt> {
        self.0.iter()
    }

    fn next_below(&self, v: ExtInt) -> ExtInt {
        *self.0.range(..=v).next_back().unwrap_or(&NegInf)
    }

    fn next_above(&self, v: ExtInt) -> ExtInt {
        *self.0.range(v..).next().unwrap_or(&PosInf)
    }
}

/// Widening where an unstable bound jumps to the nearest threshold enclosing
/// the join rather than to infinity. With a finite threshold set this is a
/// strong widening.
pub fn threshold_widen(a: &Interval, b: &Interval, t: &Thresholds) -> Interval {
    match (a.bounds(), b.bounds()) {
        (None, _) => *b,
        (_, None) => *a,
        (Some((l1, u1)), Some((l2, u2))) => {
            let j = a.join(b);
            let (jl, ju) = j.bounds().unwrap();
            Interval::Range(
                if l1 <= l2 { l1 } else { t.next_below(jl) },
                if u1 >= u2 { u1 } else { t.next_above(ju) },
            )
        }
    }
}

// ---------------------------------------------------------------------------
// Points-to sets
// ---------------------------------------------------------------------------

/// An abstract memory location: a named global variable or a local that
/// escaped from a procedure.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Loc {
    Named(String),
    Escaped(String, String),
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Loc::Named(g) => write!(f, "{g}"),
            Loc::Escaped(p, v) => write!(f, "{p}.{v}"),
        }
    }
}

/// A may-points-to set ordered by inclusion, with a distinguished `Top`.
/// The empty set is bottom; join is union.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PtSet {
    Set(BTreeSet<Loc>),
    Top,
}

impl PtSet {
    pub fn of(locs: impl IntoIterator<Item = Loc>) -> PtSet {
        PtSet::Set(locs.into_iter().collect())
    }

    pub fn named(name: &str) -> PtSet {
        PtSet::of([Loc::Named(name.to_string())])
    }

    pub fn locs(&self) -> Option<&BTreeSet<Loc>> {
        match self {
            PtSet::Set(s) => Some(s),
            PtSet::Top => None,
        }
    }
}

impl Lattice for PtSet {
    fn bottom() -> Self {
        PtSet::Set(BTreeSet::new())
    }

    fn leq(&self, other: &Self) -> bool {
        match (self, other) {
            (_, PtSet::Top) => true,
            (PtSet::Top, _) => false,
            (PtSet::Set(a), PtSet::Set(b)) => a.is_subset(b),
        }
    }

    fn join(&self, other: &Self) -> Self {
        match (self, other) {
            (PtSet::Top, _) | (_, PtSet::Top) => PtSet::Top,
            (PtSet::Set(a), PtSet::Set(b)) => PtSet::Set(a.union(b).cloned().collect()),
        }
    }

    fn meet(&self, other: &Self) -> Self {
        match (self, other) {
            (PtSet::Top, x) | (x, PtSet::Top) => x.clone(),
            (PtSet::Set(a), PtSet::Set(b)) => PtSet::Set(a.intersection(b).cloned().collect()),
        }
    }

    /// Finite per program, so join is already a strong widening.
    fn widen(&self, other: &Self) -> Self {
        self.join(other)
    }

    /// `narrow(a,b) = b` when `b ⊑ a`, else `a`; trivially terminating on
    /// this finite lattice.
    fn narrow(&self, other: &Self) -> Self {
        if other.leq(self) {
            other.clone()
        } else {
            self.clone()
        }
    }

    fn render(&self) -> String {
        match self {
            PtSet::Top => "top".to_string(),
            PtSet::Set(s) if s.is_empty() => "⊥".to_string(),
            PtSet::Set(s) => {
                let mut names: Vec<String> = s.iter().map(|l| l.to_string()).collect();
                names.sort();
                format!("{{{}}}", names.join(", "))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Per-variable values and abstract environments
// ---------------------------------------------------------------------------

/// Value of a single variable binding: an interval or a points-to set.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarValue {
    Int(Interval),
    Pt(PtSet),
}

impl VarValue {
    fn is_top(&self) -> bool {
        match self {
            VarValue::Int(i) => *i == Interval::top(),
            VarValue::Pt(p) => *p == PtSet::Top,
        }
    }
}

macro_rules! varvalue_pointwise {
    ($name:ident) => {
        fn $name(&self, other: &Self) -> Self {
            match (self, other) {
                (VarValue::Int(a), VarValue::Int(b)) => VarValue::Int(a.$name(b)),
                (VarValue::Pt(a), VarValue::Pt(b)) => VarValue::Pt(a.$name(b)),
                _ => panic!("VarValue: kind mismatch in {}", stringify!($name)),
            }
        }
    };
}

impl Lattice for VarValue {
    fn bottom() -> Self {
        VarValue::Int(Interval::Bot)
    }

    fn is_bottom(&self) -> bool {
        match self {
            VarValue::Int(i) => i.is_bottom(),
            VarValue::Pt(p) => p.is_bottom(),
        }
    }

    fn leq(&self, other: &Self) -> bool {
        match (self, other) {
            (VarValue::Int(a), VarValue::Int(b)) => a.leq(b),
            (VarValue::Pt(a), VarValue::Pt(b)) => a.leq(b),
            (a, b) => {
                if a.is_bottom() {
                    true
                } else if b.is_bottom() {
                    false
                } else {
                    panic!("VarValue: kind mismatch in leq")
                }
            }
        }
    }

    varvalue_pointwise!(join);
    varvalue_pointwise!(meet);
    varvalue_pointwise!(widen);
    varvalue_pointwise!(narrow);

    fn render(&self) -> String {
        match self {
            VarValue::Int(i) => i.render(),
            VarValue::Pt(p) => p.render(),
        }
    }
}

/// An abstract environment: a finite map from local variable names to values,
/// or `Bot`. Unmapped variables read as top of their declared kind, so the
/// canonical form drops top bindings; any bottom binding collapses the whole
/// environment to `Bot`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AbsEnv {
    Bot,
    Env(BTreeMap<String, VarValue>),
}

impl AbsEnv {
    pub fn empty() -> AbsEnv {
        AbsEnv::Env(BTreeMap::new())
    }

    pub fn of(bindings: impl IntoIterator<Item = (String, VarValue)>) -> AbsEnv {
        let mut map = BTreeMap::new();
        for (k, v) in bindings {
            if v.is_bottom() {
                return AbsEnv::Bot;
            }
            if !v.is_top() {
                map.insert(k, v);
            }
        }
        AbsEnv::Env(map)
    }

    pub fn get_int(&self, name: &str) -> Interval {
        match self {
            AbsEnv::Bot => Interval::Bot,
            AbsEnv::Env(m) => match m.get(name) {
                Some(VarValue::Int(i)) => *i,
                Some(VarValue::Pt(_)) => panic!("AbsEnv: {name} bound to a pointer"),
                None => Interval::top(),
            },
        }
    }

    pub fn set(&self, name: &str, v: VarValue) -> AbsEnv {
        match self {
            AbsEnv::Bot => AbsEnv::Bot,
            AbsEnv::Env(m) => {
                if v.is_bottom() {
                    return AbsEnv::Bot;
                }
                let mut m = m.clone();
                if v.is_top() {
                    m.remove(name);
                } else {
                    m.insert(name.to_string(), v);
                }
                AbsEnv::Env(m)
            }
        }
    }

    pub fn bindings(&self) -> Option<&BTreeMap<String, VarValue>> {
        match self {
            AbsEnv::Bot => None,
            AbsEnv::Env(m) => Some(m),
        }
    }

    fn pointwise(&self, other: &Self, f: impl Fn(&VarValue, &VarValue) -> VarValue, top_absent: bool) -> AbsEnv {
        match (self, other) {
            (AbsEnv::Bot, _) | (_, AbsEnv::Bot) => unreachable!("bot handled by callers"),
            (AbsEnv::Env(a), AbsEnv::Env(b)) => {
                let keys: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
                let mut out = BTreeMap::new();
                for k in keys {
                    let va = a.get(k);
                    let vb = b.get(k);
                    let r = match (va, vb) {
                        (Some(x), Some(y)) => f(x, y),
                        // One side is implicitly top of the same kind.
                        (Some(x), None) => {
                            if top_absent {
                                continue;
                            } else {
                                f(x, &top_of(x))
                            }
                        }
                        (None, Some(y)) => {
                            if top_absent {
                                continue;
                            } else {
                                f(&top_of(y), y)
                            }
                        }
                        (None, None) => unreachable!(),
                    };
                    if r.is_bottom() {
                        return AbsEnv::Bot;
                    }
                    if !r.is_top() {
                        out.insert(k.clone(), r);
                    }
                }
                AbsEnv::Env(out)
            }
        }
    }
}

fn top_of(v: &VarValue) -> VarValue {
    match v {
        VarValue::Int(_) => VarValue::Int(Interval::top()),
        VarValue::Pt(_) => VarValue::Pt(PtSet::Top),
    }
}

impl Lattice for AbsEnv {
    fn bottom() -> Self {
        AbsEnv::Bot
    }

    fn leq(&self, other: &Self) -> bool {
        match (self, other) {
            (AbsEnv::Bot, _) => true,
            (_, AbsEnv::Bot) => false,
            (AbsEnv::Env(a), AbsEnv::Env(b)) => {
                // Pointwise: every binding of `b` must subsume `a`'s view.
                b.iter().all(|(k, vb)| match a.get(k) {
                    Some(va) => va.leq(vb),
                    None => top_of(vb).leq(vb),
                })
            }
        }
    }

    fn join(&self, other: &Self) -> Self {
        match (self, other) {
            (AbsEnv::Bot, x) | (x, AbsEnv::Bot) => x.clone(),
            _ => self.pointwise(other, |a, b| a.join(b), true),
        }
    }

    fn meet(&self, other: &Self) -> Self {
        match (self, other) {
            (AbsEnv::Bot, _) | (_, AbsEnv::Bot) => AbsEnv::Bot,
            _ => self.pointwise(other, |a, b| a.meet(b), false),
        }
    }

    fn widen(&self, other: &Self) -> Self {
        match (self, other) {
            (AbsEnv::Bot, x) => x.clone(),
            (x, AbsEnv::Bot) => x.clone(),
            _ => self.pointwise(other, |a, b| a.widen(b), true),
        }
    }

    fn narrow(&self, other: &Self) -> Self {
        match (self, other) {
            (AbsEnv::Bot, _) | (_, AbsEnv::Bot) => AbsEnv::Bot,
            _ => self.pointwise(other, |a, b| a.narrow(b), false),
        }
    }

    fn render(&self) -> String {
        match self {
            AbsEnv::Bot => "⊥".to_string(),
            AbsEnv::Env(m) => {
                let parts: Vec<String> =
                    m.iter().map(|(k, v)| format!("{k}: {}", v.render())).collect();
                format!("{{{}}}", parts.join(", "))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Counter domain (naturals with infinity)
// ---------------------------------------------------------------------------

/// `ℕ₀ ∪ {∞}` ordered by `≤`. Widening jumps straight to `∞` on any growth
/// past bottom; narrowing only improves `∞`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CounterValue {
    Fin(u64),
    Inf,
}

impl CounterValue {
    pub fn succ(self) -> CounterValue {
        match self {
            CounterValue::Fin(n) => CounterValue::Fin(n + 1),
            CounterValue::Inf => CounterValue::Inf,
        }
    }

    pub fn plus(self, k: u64) -> CounterValue {
        match self {
            CounterValue::Fin(n) => CounterValue::Fin(n + k),
            CounterValue::Inf => CounterValue::Inf,
        }
    }
}

impl Lattice for CounterValue {
    fn bottom() -> Self {
        CounterValue::Fin(0)
    }

    fn leq(&self, other: &Self) -> bool {
        self <= other
    }

    fn join(&self, other: &Self) -> Self {
        *self.max(other)
    }

    fn meet(&self, other: &Self) -> Self {
        *self.min(other)
    }

    fn widen(&self, other: &Self) -> Self {
        if self.is_bottom() {
            *other
        } else if other.leq(self) {
            *self
        } else {
            CounterValue::Inf
        }
    }

    fn narrow(&self, other: &Self) -> Self {
        if *self == CounterValue::Inf {
            *other
        } else {
            *self
        }
    }

    fn render(&self) -> String {
        match self {
            CounterValue::Fin(n) => n.to_string(),
            CounterValue::Inf => "inf".to_string(),
        }
    }
}

// ---------------------------------------------------------------------------
// Lexicographic gas domain
// ---------------------------------------------------------------------------

/// `(ℕ ∪ {∞}) × {0,1,2}` ordered lexicographically. Its widening bumps the
/// tag and tops out only at tag 2, which makes it a widening that is not
/// strong: joins interspersed between widenings can reset the tag and keep
/// the first component growing forever.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LexGasValue {
    pub n: CounterValue,
    pub tag: u8,
}

impl LexGasValue {
    pub fn new(n: u64, tag: u8) -> LexGasValue {
        assert!(tag <= 2);
        LexGasValue { n: CounterValue::Fin(n), tag }
    }

    pub fn inf(tag: u8) -> LexGasValue {
        LexGasValue { n: CounterValue::Inf, tag }
    }
}

impl Lattice for LexGasValue {
    fn bottom() -> Self {
        LexGasValue::new(0, 0)
    }

    fn leq(&self, other: &Self) -> bool {
        (self.n, self.tag) <= (other.n, other.tag)
    }

    fn join(&self, other: &Self) -> Self {
        *self.max(other)
    }

    fn meet(&self, other: &Self) -> Self {
        *self.min(other)
    }

    fn widen(&self, other: &Self) -> Self {
        if self.tag.max(other.tag) == 2 {
            LexGasValue::inf(2)
        } else {
            LexGasValue {
                n: self.n.max(other.n),
                tag: self.tag.max(other.tag) + 1,
            }
        }
    }

    fn narrow(&self, other: &Self) -> Self {
        if other.leq(self) {
            *other
        } else {
            *self
        }
    }

    fn render(&self) -> String {
        format!("({},{})", self.n.render(), self.tag)
    }
}

// ---------------------------------------------------------------------------
// The sum domain used by the program analysis
// ---------------------------------------------------------------------------

/// A constraint-system value: an interval (integer data), a points-to set
/// (pointer data), or an abstract environment (program-point state and
/// procedure-entry state). `Bot` is the shared bottom; each unknown only ever
/// carries one kind.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Bot,
    Int(Interval),
    Pt(PtSet),
    Env(AbsEnv),
}

impl Value {
    pub fn from_interval(i: Interval) -> Value {
        if i.is_bottom() {
            Value::Bot
        } else {
            Value::Int(i)
        }
    }

    pub fn from_ptset(p: PtSet) -> Value {
        if p.is_bottom() {
            Value::Bot
        } else {
            Value::Pt(p)
        }
    }

    pub fn from_env(e: AbsEnv) -> Value {
        if e.is_bottom() {
            Value::Bot
        } else {
            Value::Env(e)
        }
    }

    pub fn as_interval(&self) -> Interval {
        match self {
            Value::Bot => Interval::Bot,
            Value::Int(i) => *i,
            _ => panic!("Value: expected interval, got {}", self.render()),
        }
    }

    pub fn as_ptset(&self) -> PtSet {
        match self {
            Value::Bot => PtSet::bottom(),
            Value::Pt(p) => p.clone(),
            _ => panic!("Value: expected points-to set, got {}", self.render()),
        }
    }

    pub fn as_env(&self) -> AbsEnv {
        match self {
            Value::Bot => AbsEnv::Bot,
            Value::Env(e) => e.clone(),
            _ => panic!("Value: expected environment, got {}", self.render()),
        }
    }

    fn binop(&self, other: &Self, name: &str, fi: impl Fn(&Interval, &Interval) -> Interval, fp: impl Fn(&PtSet, &PtSet) -> PtSet, fe: impl Fn(&AbsEnv, &AbsEnv) -> AbsEnv) -> Value {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => Value::from_interval(fi(a, b)),
            (Value::Pt(a), Value::Pt(b)) => Value::from_ptset(fp(a, b)),
            (Value::Env(a), Value::Env(b)) => Value::from_env(fe(a, b)),
            (Value::Int(a), Value::Bot) => Value::from_interval(fi(a, &Interval::Bot)),
            (Value::Bot, Value::Int(b)) => Value::from_interval(fi(&Interval::Bot, b)),
            (Value::Pt(a), Value::Bot) => Value::from_ptset(fp(a, &PtSet::bottom())),
            (Value::Bot, Value::Pt(b)) => Value::from_ptset(fp(&PtSet::bottom(), b)),
            (Value::Env(a), Value::Bot) => Value::from_env(fe(a, &AbsEnv::Bot)),
            (Value::Bot, Value::Env(b)) => Value::from_env(fe(&AbsEnv::Bot, b)),
            (Value::Bot, Value::Bot) => Value::Bot,
            _ => panic!("Value: kind mismatch in {name}"),
        }
    }

    /// Widen with an optional threshold set applied to all interval parts.
    pub fn widen_with(&self, other: &Self, thresholds: Option<&Thresholds>) -> Value {
        match thresholds {
            None => self.widen(other),
            Some(t) => self.binop(
                other,
                "widen",
                |a, b| threshold_widen(a, b, t),
                |a, b| a.widen(b),
                |a, b| match (a, b) {
                    (AbsEnv::Bot, x) | (x, AbsEnv::Bot) => x.clone(),
                    _ => a.pointwise(
                        b,
                        |x, y| match (x, y) {
                            (VarValue::Int(ia), VarValue::Int(ib)) => {
                                VarValue::Int(threshold_widen(ia, ib, t))
                            }
                            _ => x.widen(y),
                        },
                        true,
                    ),
                },
            ),
        }
    }
}

impl Lattice for Value {
    fn bottom() -> Self {
        Value::Bot
    }

    fn leq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Bot, _) => true,
            (_, Value::Bot) => false,
            (Value::Int(a), Value::Int(b)) => a.leq(b),
            (Value::Pt(a), Value::Pt(b)) => a.leq(b),
            (Value::Env(a), Value::Env(b)) => a.leq(b),
            _ => panic!("Value: kind mismatch in leq"),
        }
    }

    fn join(&self, other: &Self) -> Self {
        self.binop(other, "join", |a, b| a.join(b), |a, b| a.join(b), |a, b| a.join(b))
    }

    fn meet(&self, other: &Self) -> Self {
        self.binop(other, "meet", |a, b| a.meet(b), |a, b| a.meet(b), |a, b| a.meet(b))
    }

    fn widen(&self, other: &Self) -> Self {
        self.binop(other, "widen", |a, b| a.widen(b), |a, b| a.widen(b), |a, b| a.widen(b))
    }

    fn narrow(&self, other: &Self) -> Self {
        self.binop(other, "narrow", |a, b| a.narrow(b), |a, b| a.narrow(b), |a, b| a.narrow(b))
    }

    fn render(&self) -> String {
        match self {
            Value::Bot => "⊥".to_string(),
            Value::Int(i) => i.render(),
            Value::Pt(p) => p.render(),
            Value::Env(e) => e.render(),
        }
    }
}
