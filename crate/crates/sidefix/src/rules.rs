//! Global-update rules.
//!
//! A hosting solver never writes to the global assignment rho directly.
//! After each right-hand-side evaluation it hands the origin, the produced
//! contributions, and a read view of rho to an update rule, and applies the
//! returned updates. All rule-internal state (the per-global, per-origin
//! contribution map, phases, gas counters, withdrawal history) lives behind
//! this interface.

use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;
use std::str::FromStr;

use crate::constraints::{Contributions, Unknown};
use crate::lattice::{lat_eq, Lattice};

/// Bound on widen-to-narrow phase switches per (global, origin).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gas {
    Finite(u32),
    Inf,
}

impl Gas {
    pub fn exhausted(&self, used: u32) -> bool {
        match self {
            Gas::Finite(n) => used >= *n,
            Gas::Inf => false,
        }
    }
}

impl FromStr for Gas {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "inf" {
            Ok(Gas::Inf)
        } else {
            s.parse::<u32>().map(Gas::Finite).map_err(|_| format!("invalid gas `{s}` (integer or `inf`)"))
        }
    }
}

impl std::fmt::Display for Gas {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Gas::Finite(n) => write!(f, "{n}"),
            Gas::Inf => write!(f, "inf"),
        }
    }
}

/// A shared binary operator over a domain.
pub type BinOp<D> = Rc<dyn Fn(&D, &D) -> D>;

/// The widening/narrowing operator pair a rule (and the local combinator)
/// uses. Threshold widening and the pathological test operators plug in
/// here.
pub struct Ops<D> {
    pub widen: BinOp<D>,
    pub narrow: BinOp<D>,
}

impl<D> Clone for Ops<D> {
    fn clone(&self) -> Self {
        Ops { widen: self.widen.clone(), narrow: self.narrow.clone() }
    }
}

impl<D: Lattice> Default for Ops<D> {
    fn default() -> Self {
        Ops {
            widen: Rc::new(|a: &D, b: &D| a.widen(b)),
            narrow: Rc::new(|a: &D, b: &D| a.narrow(b)),
        }
    }
}

/// Read view of the current global assignment passed into `update_globals`.
pub trait RhoView<D: Lattice> {
    fn get(&self, g: &Unknown) -> D;
}

impl<D: Lattice> RhoView<D> for HashMap<Unknown, D> {
    fn get(&self, g: &Unknown) -> D {
        HashMap::get(self, g).cloned().unwrap_or_else(D::bottom)
    }
}

/// A pluggable update rule. One instance per solver run; state survives
/// across invocations but is observable only through `update_globals`.
pub trait UpdateRule<D: Lattice> {
    fn name(&self) -> &'static str;

    /// Turns the contributions of one right-hand-side evaluation into
    /// updates of the global assignment.
    fn update_globals(
        &mut self,
        orig: &Unknown,
        contribs: &Contributions<D>,
        rho: &dyn RhoView<D>,
    ) -> Vec<(Unknown, D)>;

    /// Widen-to-narrow phase switches consumed so far, per (global, origin).
    fn wn_switches(&self) -> BTreeMap<(Unknown, Unknown), u32> {
        BTreeMap::new()
    }

    /// Join of the live recorded contributions for `g`, for rules that keep
    /// per-origin state. Used by tests to check that no withdrawn
    /// contribution survives in rho.
    fn recorded_join(&self, _g: &Unknown) -> Option<D> {
        None
    }
}

// ---------------------------------------------------------------------------
// Rule selection
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, clap::ValueEnum)]
pub enum RuleKind {
    Baseline,
    Join,
    #[value(name = "widen-join")]
    WidenJoin,
    Separate,
    Apinis,
    Localized,
    Reluctant,
}

impl RuleKind {
    pub fn all() -> [RuleKind; 7] {
        [
            RuleKind::Baseline,
            RuleKind::Join,
            RuleKind::WidenJoin,
            RuleKind::Separate,
            RuleKind::Apinis,
            RuleKind::Localized,
            RuleKind::Reluctant,
        ]
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            RuleKind::Baseline => "baseline",
            RuleKind::Join => "join",
            RuleKind::WidenJoin => "widen-join",
            RuleKind::Separate => "separate",
            RuleKind::Apinis => "apinis",
            RuleKind::Localized => "localized",
            RuleKind::Reluctant => "reluctant",
        }
    }
}

impl FromStr for RuleKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(RuleKind::Baseline),
            "join" => Ok(RuleKind::Join),
            "widen-join" => Ok(RuleKind::WidenJoin),
            "separate" => Ok(RuleKind::Separate),
            "apinis" => Ok(RuleKind::Apinis),
            "localized" => Ok(RuleKind::Localized),
            "reluctant" => Ok(RuleKind::Reluctant),
            other => Err(format!("unknown rule `{other}`")),
        }
    }
}

impl std::fmt::Display for RuleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Builds a rule instance; `gc` wraps it for withdrawal of outdated
/// contributions.
pub fn make_rule<D: Lattice + 'static>(
    kind: RuleKind,
    gas: Gas,
    gc: bool,
    ops: Ops<D>,
) -> Box<dyn UpdateRule<D>> {
    let inner: Box<dyn UpdateRule<D>> = match kind {
        RuleKind::Baseline => Box::new(BaselineRule::new(ops)),
        RuleKind::Join => Box::new(JoinRule::new(false, ops)),
        RuleKind::WidenJoin => Box::new(JoinRule::new(true, ops)),
        RuleKind::Separate => Box::new(SeparateRule::new()),
        RuleKind::Apinis => Box::new(ApinisRule::new(gas, ops)),
        RuleKind::Localized => Box::new(LocalizedRule::new(gas, false, ops)),
        RuleKind::Reluctant => Box::new(LocalizedRule::new(gas, true, ops)),
    };
    if gc {
        Box::new(BottomWrapper::new(inner))
    } else {
        inner
    }
}

// ---------------------------------------------------------------------------
// Baseline: init, then join once, then widen
// ---------------------------------------------------------------------------

/// Initializes a global with its first non-subsumed contribution, joins the
/// second, and widens with every further one. Never shrinks a global.
pub struct BaselineRule<D> {
    increases: HashMap<Unknown, u32>,
    ops: Ops<D>,
}

impl<D: Lattice> BaselineRule<D> {
    pub fn new(ops: Ops<D>) -> Self {
        BaselineRule { increases: HashMap::new(), ops }
    }
}

impl<D: Lattice> UpdateRule<D> for BaselineRule<D> {
    fn name(&self) -> &'static str {
        "baseline"
    }

    fn update_globals(
        &mut self,
        _orig: &Unknown,
        contribs: &Contributions<D>,
        rho: &dyn RhoView<D>,
    ) -> Vec<(Unknown, D)> {
        let mut updates = Vec::new();
        for (g, b) in contribs.entries() {
            let cur = rho.get(g);
            if b.leq(&cur) {
                continue;
            }
            let count = self.increases.entry(g.clone()).or_insert(0);
            let d = match *count {
                0 => b.clone(),
                1 => cur.join(b),
                _ => (self.ops.widen)(&cur, b),
            };
            *count += 1;
            updates.push((g.clone(), d));
        }
        updates
    }
}

// ---------------------------------------------------------------------------
// Always-join (and widen-join)
// ---------------------------------------------------------------------------

/// Joins every non-subsumed contribution into the global; the `widen`
/// variant replaces the join with a widening to force stabilization.
pub struct JoinRule<D> {
    widen: bool,
    ops: Ops<D>,
}

impl<D: Lattice> JoinRule<D> {
    pub fn new(widen: bool, ops: Ops<D>) -> Self {
        JoinRule { widen, ops }
    }
}

impl<D: Lattice> UpdateRule<D> for JoinRule<D> {
    fn name(&self) -> &'static str {
        if self.widen {
            "widen-join"
        } else {
            "join"
        }
    }

    fn update_globals(
        &mut self,
        _orig: &Unknown,
        contribs: &Contributions<D>,
        rho: &dyn RhoView<D>,
    ) -> Vec<(Unknown, D)> {
        let mut updates = Vec::new();
        for (g, b) in contribs.entries() {
            let cur = rho.get(g);
            if b.leq(&cur) {
                continue; // Nothing to do
            }
            let d = if self.widen { (self.ops.widen)(&cur, b) } else { cur.join(b) };
            updates.push((g.clone(), d));
        }
        updates
    }
}

// ---------------------------------------------------------------------------
// Separate: keep contributions apart, no widening
// ---------------------------------------------------------------------------

/// Records the latest contribution per (global, origin) and publishes the
/// join over all origins. Shrinking contributions shrink the global.
pub struct SeparateRule<D> {
    cmap: HashMap<Unknown, BTreeMap<Unknown, D>>,
}

impl<D: Lattice> SeparateRule<D> {
    pub fn new() -> Self {
        SeparateRule { cmap: HashMap::new() }
    }
}

impl<D: Lattice> Default for SeparateRule<D> {
    fn default() -> Self {
        Self::new()
    }
}

fn live_join<D: Lattice, V, F: Fn(&V) -> &D>(entries: &BTreeMap<Unknown, V>, first: F) -> D {
    entries.values().fold(D::bottom(), |acc, v| acc.join(first(v)))
}

impl<D: Lattice> UpdateRule<D> for SeparateRule<D> {
    fn name(&self) -> &'static str {
        "separate"
    }

    fn update_globals(
        &mut self,
        orig: &Unknown,
        contribs: &Contributions<D>,
        rho: &dyn RhoView<D>,
    ) -> Vec<(Unknown, D)> {
        let mut updates = Vec::new();
        for (g, b) in contribs.entries() {
            let entries = self.cmap.entry(g.clone()).or_default();
            if b.is_bottom() {
                entries.remove(orig);
            } else {
                entries.insert(orig.clone(), b.clone());
            }
            let d = live_join(entries, |v| v);
            if !lat_eq(&d, &rho.get(g)) {
                updates.push((g.clone(), d));
            }
        }
        updates
    }

    fn recorded_join(&self, g: &Unknown) -> Option<D> {
        self.cmap.get(g).map(|e| live_join(e, |v| v))
    }
}

// ---------------------------------------------------------------------------
// Apinis: widening/narrowing on the join of all contributions
// ---------------------------------------------------------------------------

/// Keeps raw contributions per origin; combines the global's old value with
/// the join over all origins, widening on growth and narrowing on shrink.
/// A re-sent identical contribution is skipped, so constant contributions
/// are never reconsidered for narrowing. The phase/gas bookkeeping bounds
/// narrowing per global; the unbounded variant uses `Gas::Inf`.
pub struct ApinisRule<D> {
    cmap: HashMap<Unknown, BTreeMap<Unknown, D>>,
    phase: HashMap<Unknown, (Phase, u32)>,
    gas: Gas,
    ops: Ops<D>,
    switches: BTreeMap<(Unknown, Unknown), u32>,
}

impl<D: Lattice> ApinisRule<D> {
    pub fn new(gas: Gas, ops: Ops<D>) -> Self {
        ApinisRule {
            cmap: HashMap::new(),
            phase: HashMap::new(),
            gas,
            ops,
            switches: BTreeMap::new(),
        }
    }
}

impl<D: Lattice> UpdateRule<D> for ApinisRule<D> {
    fn name(&self) -> &'static str {
        "apinis"
    }

    fn update_globals(
        &mut self,
        orig: &Unknown,
        contribs: &Contributions<D>,
        rho: &dyn RhoView<D>,
    ) -> Vec<(Unknown, D)> {
        let mut updates = Vec::new();
        for (g, b) in contribs.entries() {
            let entries = self.cmap.entry(g.clone()).or_default();
            let recorded = entries.get(orig).cloned().unwrap_or_else(D::bottom);
            if lat_eq(&recorded, b) {
                continue;
            }
            if b.is_bottom() {
                entries.remove(orig);
            } else {
                entries.insert(orig.clone(), b.clone());
            }
            let a = rho.get(g);
            let b_join = live_join(entries, |v| v);
            let d = if b_join.leq(&a) {
                let (phase, used) = self.phase.entry(g.clone()).or_insert((Phase::Widen, 0));
                match phase {
                    Phase::Narrow => (self.ops.narrow)(&a, &b_join),
                    Phase::Widen if self.gas.exhausted(*used) => a.clone(),
                    Phase::Widen => {
                        *phase = Phase::Narrow;
                        *used += 1;
                        *self.switches.entry((g.clone(), orig.clone())).or_insert(0) += 1;
                        (self.ops.narrow)(&a, &b_join)
                    }
                }
            } else {
                let kept_gas = self.phase.get(g).map_or(0, |p| p.1);
                self.phase.insert(g.clone(), (Phase::Widen, kept_gas));
                (self.ops.widen)(&a, &b_join)
            };
            if !lat_eq(&d, &a) {
                updates.push((g.clone(), d));
            }
        }
        updates
    }

    fn wn_switches(&self) -> BTreeMap<(Unknown, Unknown), u32> {
        self.switches.clone()
    }

    fn recorded_join(&self, g: &Unknown) -> Option<D> {
        self.cmap.get(g).map(|e| live_join(e, |v| v))
    }
}

// ---------------------------------------------------------------------------
// Localized (and reluctant) widening/narrowing per origin
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Widen,
    Narrow,
}

/// A contribution-map entry: the combined value, the last combine operator
/// applied, and the widen-to-narrow switches consumed so far.
#[derive(Clone, Debug)]
pub struct CmapEntry<D> {
    pub value: D,
    pub phase: Phase,
    pub gas_used: u32,
}

/// Widening and narrowing applied to each origin's contribution separately.
/// Narrowing is bounded by the gas counter. With `reluctant`, a
/// non-subsumed contribution that is already below the global's current
/// value is joined instead of widened.
pub struct LocalizedRule<D> {
    cmap: HashMap<Unknown, BTreeMap<Unknown, CmapEntry<D>>>,
    gas: Gas,
    reluctant: bool,
    ops: Ops<D>,
    switches: BTreeMap<(Unknown, Unknown), u32>,
}

impl<D: Lattice> LocalizedRule<D> {
    pub fn new(gas: Gas, reluctant: bool, ops: Ops<D>) -> Self {
        LocalizedRule {
            cmap: HashMap::new(),
            gas,
            reluctant,
            ops,
            switches: BTreeMap::new(),
        }
    }

    /// The recorded entry for (g, orig), for tests replaying worked
    /// contribution sequences.
    pub fn entry(&self, g: &Unknown, orig: &Unknown) -> Option<&CmapEntry<D>> {
        self.cmap.get(g).and_then(|e| e.get(orig))
    }
}

impl<D: Lattice> UpdateRule<D> for LocalizedRule<D> {
    fn name(&self) -> &'static str {
        if self.reluctant {
            "reluctant"
        } else {
            "localized"
        }
    }

    fn update_globals(
        &mut self,
        orig: &Unknown,
        contribs: &Contributions<D>,
        rho: &dyn RhoView<D>,
    ) -> Vec<(Unknown, D)> {
        let mut updates = Vec::new();
        for (g, b) in contribs.entries() {
            let entries = self.cmap.entry(g.clone()).or_default();
            let entry = entries.get(orig).cloned().unwrap_or(CmapEntry {
                value: D::bottom(),
                phase: Phase::Widen,
                gas_used: 0,
            });
            if lat_eq(&entry.value, b) {
                continue; // Value unmodified
            }
            let new_entry = if !b.leq(&entry.value) {
                // Not accounted for -> widening; reluctantly join instead
                // when the global already subsumes the contribution.
                let value = if self.reluctant && b.leq(&rho.get(g)) {
                    entry.value.join(b)
                } else {
                    (self.ops.widen)(&entry.value, b)
                };
                CmapEntry { value, phase: Phase::Widen, gas_used: entry.gas_used }
            } else if entry.phase == Phase::Narrow {
                CmapEntry { value: (self.ops.narrow)(&entry.value, b), ..entry }
            } else if self.gas.exhausted(entry.gas_used) {
                continue; // Gas exhausted -> do not narrow
            } else {
                *self.switches.entry((g.clone(), orig.clone())).or_insert(0) += 1;
                CmapEntry {
                    value: (self.ops.narrow)(&entry.value, b),
                    phase: Phase::Narrow,
                    gas_used: entry.gas_used + 1,
                }
            };
            if new_entry.value.is_bottom() {
                entries.remove(orig);
            } else {
                entries.insert(orig.clone(), new_entry);
            }
            let d = live_join(entries, |e| &e.value);
            if !lat_eq(&d, &rho.get(g)) {
                updates.push((g.clone(), d));
            }
        }
        updates
    }

    fn wn_switches(&self) -> BTreeMap<(Unknown, Unknown), u32> {
        self.switches.clone()
    }

    fn recorded_join(&self, g: &Unknown) -> Option<D> {
        self.cmap.get(g).map(|e| live_join(e, |v| &v.value))
    }
}

// ---------------------------------------------------------------------------
// Bottom wrapper: withdrawal of outdated contributions
// ---------------------------------------------------------------------------

/// Wraps any update rule and makes withdrawn contributions explicit: every
/// global the origin contributed to last time but not this time receives an
/// explicit bottom contribution before delegation.
pub struct BottomWrapper<D: Lattice> {
    inner: Box<dyn UpdateRule<D>>,
    old_contribs: HashMap<Unknown, Vec<Unknown>>,
}

impl<D: Lattice> BottomWrapper<D> {
    pub fn new(inner: Box<dyn UpdateRule<D>>) -> Self {
        BottomWrapper { inner, old_contribs: HashMap::new() }
    }
}

impl<D: Lattice> UpdateRule<D> for BottomWrapper<D> {
    fn name(&self) -> &'static str {
        self.inner.name()
    }

    fn update_globals(
        &mut self,
        orig: &Unknown,
        contribs: &Contributions<D>,
        rho: &dyn RhoView<D>,
    ) -> Vec<(Unknown, D)> {
        let prev = self.old_contribs.insert(
            orig.clone(),
            contribs.entries().iter().map(|(g, _)| g.clone()).collect(),
        );
        let mut merged = contribs.clone();
        for g in prev.unwrap_or_default() {
            if merged.get(&g).is_none() {
                merged.add_raw(g, D::bottom());
            }
        }
        self.inner.update_globals(orig, &merged, rho)
    }

    fn wn_switches(&self) -> BTreeMap<(Unknown, Unknown), u32> {
        self.inner.wn_switches()
    }

    fn recorded_join(&self, g: &Unknown) -> Option<D> {
        self.inner.recorded_join(g)
    }
}

// ---------------------------------------------------------------------------
// Dynamic soundness checker
// ---------------------------------------------------------------------------

/// One recorded `update_globals` call: the origin, the contributions as
/// passed by the solver, the prior rho values of every touched global, and
/// the returned updates.
#[derive(Clone, Debug)]
pub struct TraceCall<D> {
    pub orig: Unknown,
    pub contribs: Vec<(Unknown, D)>,
    pub rho_before: Vec<(Unknown, D)>,
    pub updates: Vec<(Unknown, D)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RuleVerdict {
    Pass,
    Violation { index: usize, reason: String },
}

impl RuleVerdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, RuleVerdict::Pass)
    }
}

/// Replays a recorded call sequence and checks the update-rule soundness
/// conditions: every non-subsumed contribution produces an update for its
/// global, and every produced update subsumes the latest contribution of
/// every origin. Also cross-checks that the observed rho values evolve
/// exactly by applying the returned updates.
pub fn check_rule_soundness<D: Lattice>(trace: &[TraceCall<D>]) -> RuleVerdict {
    let mut shadow: HashMap<Unknown, D> = HashMap::new();
    // Per origin, the contribution map of its most recent call.
    let mut latest: HashMap<Unknown, HashMap<Unknown, D>> = HashMap::new();
    for (index, call) in trace.iter().enumerate() {
        for (g, d) in &call.rho_before {
            let have = shadow.get(g).cloned().unwrap_or_else(D::bottom);
            if !lat_eq(&have, d) {
                return RuleVerdict::Violation {
                    index,
                    reason: format!(
                        "rho for {} is {} but applying prior updates gives {}",
                        g.render(),
                        d.render(),
                        have.render()
                    ),
                };
            }
        }
        let rho_of = |g: &Unknown| -> Option<&D> {
            call.rho_before.iter().find(|(u, _)| u == g).map(|(_, d)| d)
        };
        for (g, b) in &call.contribs {
            let cur = match rho_of(g) {
                Some(d) => d.clone(),
                None => D::bottom(),
            };
            if !b.leq(&cur) && !call.updates.iter().any(|(u, _)| u == g) {
                return RuleVerdict::Violation {
                    index,
                    reason: format!(
                        "R1: contribution {} to {} not subsumed by rho and no update produced",
                        b.render(),
                        g.render()
                    ),
                };
            }
        }
        // The latest contribution set of the calling origin is the one of
        // this very call.
        latest.insert(call.orig.clone(), call.contribs.iter().cloned().collect());
        for (g, d) in &call.updates {
            for (o, cmap) in &latest {
                if let Some(di) = cmap.get(g) {
                    if !di.leq(d) {
                        return RuleVerdict::Violation {
                            index,
                            reason: format!(
                                "R2: update {} for {} drops the latest contribution {} of {}",
                                d.render(),
                                g.render(),
                                di.render(),
                                o.render()
                            ),
                        };
                    }
                }
            }
            shadow.insert(g.clone(), d.clone());
        }
    }
    RuleVerdict::Pass
}

// ---------------------------------------------------------------------------
// Scripted two-origin driver
// ---------------------------------------------------------------------------

/// Outcome of driving a rule with the scripted two-origin ascent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DriveOutcome<D> {
    Converged { updates: usize, value: D },
    CapTripped { updates: usize, round_values: Vec<D> },
}

/// Feeds a rule the alternating catch-up/push pattern of two origins
/// contributing an ascending chain to one global: after seeding both
/// origins, each round has one origin first re-send the current level (a
/// subsumed contribution) and then push one level higher. Over a domain
/// with a strong widening this converges; over the lexicographic gas domain
/// the joins keep resetting the encoded gas and the global grows forever.
pub fn drive_two_origin_ascent<D: Lattice>(
    rule: &mut dyn UpdateRule<D>,
    value_of: impl Fn(u64) -> D,
    max_updates: usize,
) -> DriveOutcome<D> {
    let g = Unknown::GlobalShared("g".to_string());
    let x = crate::constraints::synth_local("x");
    let y = crate::constraints::synth_local("y");
    let mut rho: HashMap<Unknown, D> = HashMap::new();
    let mut updates = 0usize;
    let mut round_values: Vec<D> = Vec::new();

    let send = |rho: &mut HashMap<Unknown, D>,
                    rule: &mut dyn UpdateRule<D>,
                    updates: &mut usize,
                    orig: &Unknown,
                    v: D|
     -> bool {
        let contribs: Contributions<D> = [(g.clone(), v)].into_iter().collect();
        let out = rule.update_globals(orig, &contribs, rho);
        let changed = !out.is_empty();
        for (u, d) in out {
            rho.insert(u, d);
            *updates += 1;
        }
        changed
    };

    send(&mut rho, rule, &mut updates, &x, value_of(1));
    send(&mut rho, rule, &mut updates, &y, value_of(2));
    let mut level = 2u64;
    loop {
        if updates > max_updates {
            return DriveOutcome::CapTripped { updates, round_values };
        }
        let mut changed = false;
        for orig in [&x, &y] {
            changed |= send(&mut rho, rule, &mut updates, orig, value_of(level));
            changed |= send(&mut rho, rule, &mut updates, orig, value_of(level + 1));
            level += 1;
        }
        round_values.push(RhoView::get(&rho, &g));
        if !changed {
            return DriveOutcome::Converged { updates, value: RhoView::get(&rho, &g) };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{synth_global, synth_local};
    use crate::lattice::Interval;

    fn iv(lo: i64, hi: i64) -> Interval {
        Interval::of(lo, hi)
    }

    fn send<D: Lattice>(
        rule: &mut dyn UpdateRule<D>,
        rho: &mut HashMap<Unknown, D>,
        orig: &Unknown,
        entries: Vec<(Unknown, D)>,
    ) -> Vec<(Unknown, D)> {
        let mut contribs = Contributions::new();
        for (g, d) in entries {
            contribs.add_raw(g, d);
        }
        let out = rule.update_globals(orig, &contribs, rho);
        for (g, d) in &out {
            rho.insert(g.clone(), d.clone());
        }
        out
    }

    #[test]
    fn baseline_init_join_widen() {
        let mut rule = BaselineRule::new(Ops::default());
        let mut rho = HashMap::new();
        let g = synth_global("g");
        let o = synth_local("x");
        let u1 = send(&mut rule, &mut rho, &o, vec![(g.clone(), iv(0, 0))]);
        assert_eq!(u1, vec![(g.clone(), iv(0, 0))]);
        let u2 = send(&mut rule, &mut rho, &o, vec![(g.clone(), iv(1, 1))]);
        assert_eq!(u2, vec![(g.clone(), iv(0, 1))]);
        let u3 = send(&mut rule, &mut rho, &o, vec![(g.clone(), iv(0, 2))]);
        assert_eq!(u3, vec![(g.clone(), Interval::range(crate::lattice::ExtInt::Fin(0), crate::lattice::ExtInt::PosInf))]);
        // Subsumed contributions never update, and the rule never shrinks.
        let u4 = send(&mut rule, &mut rho, &o, vec![(g.clone(), iv(0, 1))]);
        assert!(u4.is_empty());
    }

    #[test]
    fn join_vs_widen_join() {
        let g = synth_global("g");
        let o = synth_local("x");
        let mut rho = HashMap::new();
        rho.insert(g.clone(), iv(0, 0));
        let mut join = JoinRule::new(false, Ops::default());
        assert_eq!(
            send(&mut join, &mut rho.clone(), &o, vec![(g.clone(), iv(1, 1))]),
            vec![(g.clone(), iv(0, 1))]
        );
        let mut wjoin = JoinRule::new(true, Ops::default());
        assert_eq!(
            send(&mut wjoin, &mut rho.clone(), &o, vec![(g.clone(), iv(1, 1))]),
            vec![(g.clone(), Interval::range(crate::lattice::ExtInt::Fin(0), crate::lattice::ExtInt::PosInf))]
        );
        // Subsumed: nothing to do.
        assert!(send(&mut join, &mut rho.clone(), &o, vec![(g.clone(), iv(0, 0))]).is_empty());
    }

    #[test]
    fn separate_allows_shrinking() {
        let mut rule = SeparateRule::new();
        let mut rho = HashMap::new();
        let g = synth_global("g");
        let x = synth_local("x");
        let y = synth_local("y");
        send(&mut rule, &mut rho, &x, vec![(g.clone(), iv(0, 5))]);
        let u = send(&mut rule, &mut rho, &x, vec![(g.clone(), iv(0, 2))]);
        assert_eq!(u, vec![(g.clone(), iv(0, 2))]);
        let u = send(&mut rule, &mut rho, &y, vec![(g.clone(), iv(3, 4))]);
        assert_eq!(u, vec![(g.clone(), iv(0, 4))]);
        // Recomputed join equals rho: no update.
        assert!(send(&mut rule, &mut rho, &y, vec![(g.clone(), iv(3, 4))]).is_empty());
    }

    #[test]
    fn apinis_widens_distinct_constants() {
        // Two origins with constant contributions: the join grows, widening
        // fires, and the equal-contribution skip prevents any narrowing.
        let mut rule = ApinisRule::new(Gas::Inf, Ops::default());
        let mut rho = HashMap::new();
        let g = synth_global("a");
        let o1 = synth_local("x");
        let o2 = synth_local("y");
        let u = send(&mut rule, &mut rho, &o1, vec![(g.clone(), iv(0, 0))]);
        assert_eq!(u, vec![(g.clone(), iv(0, 0))]);
        let u = send(&mut rule, &mut rho, &o2, vec![(g.clone(), iv(1, 1))]);
        assert_eq!(
            u,
            vec![(g.clone(), Interval::range(crate::lattice::ExtInt::Fin(0), crate::lattice::ExtInt::PosInf))]
        );
        // Re-sent identical contribution: line-5 skip.
        assert!(send(&mut rule, &mut rho, &o2, vec![(g.clone(), iv(1, 1))]).is_empty());
    }

    #[test]
    fn apinis_narrow_keeps_finite_bounds() {
        let mut rule = ApinisRule::new(Gas::Inf, Ops::default());
        let mut rho = HashMap::new();
        let g = synth_global("g");
        let o = synth_local("x");
        send(&mut rule, &mut rho, &o, vec![(g.clone(), iv(0, 10))]);
        // [2,8] ⊑ [0,10] triggers narrowing, which keeps finite bounds.
        assert!(send(&mut rule, &mut rho, &o, vec![(g.clone(), iv(2, 8))]).is_empty());
        assert_eq!(RhoView::get(&rho, &g), iv(0, 10));
        // An incomparable shrink takes the widening branch instead.
        let u = send(&mut rule, &mut rho, &o, vec![(g.clone(), iv(-1, 8))]);
        assert_eq!(u, vec![(g.clone(), Interval::range(crate::lattice::ExtInt::NegInf, crate::lattice::ExtInt::Fin(10)))]);
    }

    #[test]
    fn localized_keeps_distinct_origins_apart() {
        let mut rule = LocalizedRule::new(Gas::Inf, false, Ops::default());
        let mut rho = HashMap::new();
        let g = synth_global("a");
        let o1 = synth_local("x");
        let o2 = synth_local("y");
        send(&mut rule, &mut rho, &o1, vec![(g.clone(), iv(0, 0))]);
        send(&mut rule, &mut rho, &o2, vec![(g.clone(), iv(1, 1))]);
        assert_eq!(RhoView::get(&rho, &g), iv(0, 1));
        assert!(rule.wn_switches().is_empty());
    }

    #[test]
    fn localized_widen_then_narrow_per_origin() {
        // The recursive-call-site sequence: [16,16], then [15,16] widens the
        // entry, then [0,16] narrows it back.
        let mut rule = LocalizedRule::new(Gas::Inf, false, Ops::default());
        let mut rho = HashMap::new();
        let g = synth_global("st_fac");
        let o = synth_local("x");
        send(&mut rule, &mut rho, &o, vec![(g.clone(), iv(16, 16))]);
        send(&mut rule, &mut rho, &o, vec![(g.clone(), iv(15, 16))]);
        assert_eq!(
            rule.entry(&g, &o).unwrap().value,
            Interval::range(crate::lattice::ExtInt::NegInf, crate::lattice::ExtInt::Fin(16))
        );
        send(&mut rule, &mut rho, &o, vec![(g.clone(), iv(0, 16))]);
        assert_eq!(rule.entry(&g, &o).unwrap().value, iv(0, 16));
        assert_eq!(rule.wn_switches().values().sum::<u32>(), 1);
    }

    #[test]
    fn reluctant_joins_subsumed_contribution() {
        let g = synth_global("a");
        let o = synth_local("x");
        // cmap holds [1,10], the global holds [-10,10], and the new
        // contribution [-9,10] is already subsumed by the global.
        let setup = |reluctant: bool| {
            let mut rule = LocalizedRule::new(Gas::Finite(3), reluctant, Ops::default());
            let mut rho = HashMap::new();
            send(&mut rule, &mut rho, &o, vec![(g.clone(), iv(1, 10))]);
            rho.insert(g.clone(), iv(-10, 10));
            send(&mut rule, &mut rho, &o, vec![(g.clone(), iv(-9, 10))]);
            rule.entry(&g, &o).unwrap().value
        };
        assert_eq!(setup(true), iv(-9, 10));
        assert_eq!(
            setup(false),
            Interval::range(crate::lattice::ExtInt::NegInf, crate::lattice::ExtInt::Fin(10))
        );
    }

    #[test]
    fn gas_exhaustion_stops_narrowing() {
        let mut rule = LocalizedRule::new(Gas::Finite(0), false, Ops::default());
        let mut rho = HashMap::new();
        let g = synth_global("g");
        let o = synth_local("x");
        send(&mut rule, &mut rho, &o, vec![(g.clone(), iv(0, 5))]);
        // Strictly smaller contribution in widen phase with zero gas: skip.
        assert!(send(&mut rule, &mut rho, &o, vec![(g.clone(), iv(0, 3))]).is_empty());
        assert_eq!(rule.entry(&g, &o).unwrap().value, iv(0, 5));
        assert!(rule.wn_switches().is_empty());
    }

    #[test]
    fn bottom_wrapper_withdraws() {
        let inner = Box::new(LocalizedRule::new(Gas::Finite(3), false, Ops::<Interval>::default()));
        let mut rule = BottomWrapper::new(inner);
        let mut rho = HashMap::new();
        let g1 = synth_global("g1");
        let g2 = synth_global("g2");
        let o = synth_local("x");
        send(&mut rule, &mut rho, &o, vec![(g1.clone(), iv(0, 1)), (g2.clone(), iv(5, 5))]);
        assert_eq!(RhoView::get(&rho, &g2), iv(5, 5));
        // Next evaluation only mentions g1: g2 receives an explicit bottom.
        let u = send(&mut rule, &mut rho, &o, vec![(g1.clone(), iv(0, 1))]);
        assert_eq!(u, vec![(g2.clone(), Interval::Bot)]);
        assert_eq!(rule.recorded_join(&g2), Some(Interval::Bot));
    }

    #[test]
    fn bottom_wrapper_no_history_is_identity() {
        let inner = Box::new(LocalizedRule::new(Gas::Finite(3), false, Ops::<Interval>::default()));
        let mut rule = BottomWrapper::new(inner);
        let mut rho = HashMap::new();
        let g = synth_global("g");
        let o = synth_local("x");
        let u = send(&mut rule, &mut rho, &o, vec![(g.clone(), iv(1, 1))]);
        assert_eq!(u, vec![(g.clone(), iv(1, 1))]);
    }

    #[test]
    fn checker_passes_on_clean_trace() {
        assert_eq!(check_rule_soundness::<Interval>(&[]), RuleVerdict::Pass);
        let g = synth_global("g");
        let o = synth_local("x");
        let trace = vec![
            TraceCall {
                orig: o.clone(),
                contribs: vec![(g.clone(), iv(0, 1))],
                rho_before: vec![(g.clone(), Interval::Bot)],
                updates: vec![(g.clone(), iv(0, 1))],
            },
            TraceCall {
                orig: o.clone(),
                contribs: vec![(g.clone(), iv(0, 1))],
                rho_before: vec![(g.clone(), iv(0, 1))],
                updates: vec![],
            },
        ];
        assert!(check_rule_soundness(&trace).is_pass());
    }

    #[test]
    fn checker_flags_r1_and_r2() {
        let g = synth_global("g");
        let x = synth_local("x");
        let y = synth_local("y");
        // R1: non-subsumed contribution without an update.
        let r1 = vec![TraceCall {
            orig: x.clone(),
            contribs: vec![(g.clone(), iv(0, 1))],
            rho_before: vec![(g.clone(), Interval::Bot)],
            updates: vec![],
        }];
        assert!(matches!(check_rule_soundness(&r1), RuleVerdict::Violation { index: 0, .. }));
        // R2: an update that drops a live origin's latest contribution.
        let r2 = vec![
            TraceCall {
                orig: x.clone(),
                contribs: vec![(g.clone(), iv(5, 5))],
                rho_before: vec![(g.clone(), Interval::Bot)],
                updates: vec![(g.clone(), iv(5, 5))],
            },
            TraceCall {
                orig: y.clone(),
                contribs: vec![(g.clone(), iv(0, 0))],
                rho_before: vec![(g.clone(), iv(5, 5))],
                updates: vec![(g.clone(), iv(0, 0))],
            },
        ];
        assert!(matches!(check_rule_soundness(&r2), RuleVerdict::Violation { index: 1, .. }));
    }

    #[test]
    fn gas_parses() {
        assert_eq!("3".parse::<Gas>(), Ok(Gas::Finite(3)));
        assert_eq!("inf".parse::<Gas>(), Ok(Gas::Inf));
        assert!("x".parse::<Gas>().is_err());
    }
}
