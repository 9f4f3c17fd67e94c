//! Machine-readable reports. A report is byte-for-byte deterministic for a
//! fixed program and configuration; the wall-time field is the only part
//! excluded from determinism checks.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::compare::{CompareScope, PrecisionComparison};
use crate::driver::{Analysis, Settings, SynthAnalysis};
use crate::lattice::Lattice;
use crate::solver::{SolveResult, SolveVerdict};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize)]
pub struct ConfigEcho {
    pub rule: String,
    pub gas: String,
    pub gc: bool,
    pub solver: String,
    pub context: String,
    pub thresholds: String,
    pub max_updates: String,
    pub requery: bool,
}

impl ConfigEcho {
    pub fn of(settings: &Settings) -> ConfigEcho {
        ConfigEcho {
            rule: settings.rule.as_str().to_string(),
            gas: settings.gas.to_string(),
            gc: settings.gc,
            solver: settings.solver.as_str().to_string(),
            context: settings.context.as_str().to_string(),
            thresholds: settings.thresholds.render(),
            max_updates: settings.max_updates.map_or("inf".to_string(), |v| v.to_string()),
            requery: settings.requery,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AssertReport {
    pub proc: String,
    pub line: u32,
    pub cond: String,
    pub verdict: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct StatsReport {
    pub rhs_evaluations: usize,
    pub total_updates: usize,
    pub updates_per_global: BTreeMap<String, usize>,
    pub wn_switches_total: u32,
    pub proc_entries_seen: usize,
    pub trash_entries: usize,
    pub intermittent_trash: usize,
    pub trash_fraction: f64,
    pub trash: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalysisReport {
    pub schema: u32,
    pub file: String,
    pub config: ConfigEcho,
    pub verdict: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergence: Option<String>,
    pub values: BTreeMap<String, String>,
    pub asserts: Vec<AssertReport>,
    pub stats: StatsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub post_solution: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule_check: Option<String>,
    pub wall_time_ms: f64,
}

fn stats_report<D: Lattice>(result: &SolveResult<D>) -> StatsReport {
    let s = &result.stats;
    StatsReport {
        rhs_evaluations: s.rhs_evaluations,
        total_updates: s.total_updates,
        updates_per_global: s
            .updates_per_global
            .iter()
            .map(|(g, c)| (g.render(), *c))
            .collect(),
        wn_switches_total: s.wn_switches.values().sum(),
        proc_entries_seen: s.proc_entries_seen,
        trash_entries: s.trash_entries(),
        intermittent_trash: s.intermittent_trash.len(),
        trash_fraction: s.trash_fraction(),
        trash: s.trash.iter().map(|u| u.render()).collect(),
    }
}

fn verdict_strings<D: Lattice>(result: &SolveResult<D>) -> (String, Option<String>) {
    match &result.verdict {
        SolveVerdict::Converged => ("converged".to_string(), None),
        SolveVerdict::Divergence(cap) => ("divergence".to_string(), Some(cap.render())),
    }
}

fn rendered_values<D: Lattice>(result: &SolveResult<D>) -> BTreeMap<String, String> {
    let mut values = BTreeMap::new();
    for u in &result.reached {
        values.insert(u.render(), result.assignment.get(u).render());
    }
    values
}

pub fn analysis_report(
    file: &str,
    settings: &Settings,
    analysis: &Analysis,
    wall_time_ms: f64,
) -> AnalysisReport {
    let (verdict, divergence) = verdict_strings(&analysis.result);
    AnalysisReport {
        schema: SCHEMA_VERSION,
        file: file.to_string(),
        config: ConfigEcho::of(settings),
        verdict,
        divergence,
        values: rendered_values(&analysis.result),
        asserts: analysis
            .asserts
            .iter()
            .map(|(site, v)| AssertReport {
                proc: site.proc.clone(),
                line: site.line,
                cond: site.cond.to_string(),
                verdict: v.as_str().to_string(),
            })
            .collect(),
        stats: stats_report(&analysis.result),
        post_solution: analysis.post.as_ref().map(|p| match p {
            crate::solver::PostVerdict::Pass => "pass".to_string(),
            crate::solver::PostVerdict::Violation { unknown, reason } => {
                format!("violation at {}: {}", unknown.render(), reason)
            }
        }),
        rule_check: analysis.rule_check.as_ref().map(|r| match r {
            crate::rules::RuleVerdict::Pass => "pass".to_string(),
            crate::rules::RuleVerdict::Violation { index, reason } => {
                format!("violation at call {index}: {reason}")
            }
        }),
        wall_time_ms,
    }
}

pub fn synth_report(
    file: &str,
    settings: &Settings,
    analysis: &SynthAnalysis,
    wall_time_ms: f64,
) -> AnalysisReport {
    let (verdict, divergence) = verdict_strings(&analysis.result);
    AnalysisReport {
        schema: SCHEMA_VERSION,
        file: file.to_string(),
        config: ConfigEcho::of(settings),
        verdict,
        divergence,
        values: rendered_values(&analysis.result),
        asserts: Vec::new(),
        stats: stats_report(&analysis.result),
        post_solution: None,
        rule_check: analysis.rule_check.as_ref().map(|r| match r {
            crate::rules::RuleVerdict::Pass => "pass".to_string(),
            crate::rules::RuleVerdict::Violation { index, reason } => {
                format!("violation at call {index}: {reason}")
            }
        }),
        wall_time_ms,
    }
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// JSON with the wall-time field zeroed, for byte-level determinism
    /// comparisons.
    pub fn to_json_deterministic(&self) -> String {
        let mut copy = self.clone();
        copy.wall_time_ms = 0.0;
        copy.to_json()
    }

    pub fn to_text(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let c = &self.config;
        let _ = writeln!(
            out,
            "{}: rule {}{} gas {} solver {} context {} -> {}",
            self.file,
            c.rule,
            if c.gc { "+gc" } else { "" },
            c.gas,
            c.solver,
            c.context,
            self.verdict
        );
        if let Some(d) = &self.divergence {
            let _ = writeln!(out, "  diverged: {d}");
        }
        for a in &self.asserts {
            let _ = writeln!(out, "  assert {} (line {}): {}", a.cond, a.line, a.verdict);
        }
        let _ = writeln!(out, "  globals:");
        for (u, v) in &self.values {
            // Only globals in the text rendering; the JSON report has all.
            let is_global = u.starts_with("st_")
                || u.starts_with("esc:")
                || (!u.contains('@') && !u.contains(':') && u != "_main");
            if is_global {
                let _ = writeln!(out, "    {u} = {v}");
            }
        }
        let s = &self.stats;
        let _ = writeln!(
            out,
            "  stats: {} evaluations, {} updates, {} W/N switches, trash {}/{} (intermittent {})",
            s.rhs_evaluations,
            s.total_updates,
            s.wn_switches_total,
            s.trash_entries,
            s.proc_entries_seen,
            s.intermittent_trash
        );
        if let Some(p) = &self.post_solution {
            let _ = writeln!(out, "  post-solution: {p}");
        }
        if let Some(r) = &self.rule_check {
            let _ = writeln!(out, "  rule-check: {r}");
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Comparison report
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct CompareReport {
    pub schema: u32,
    pub file: String,
    pub config_a: ConfigEcho,
    pub config_b: ConfigEcho,
    pub scope: String,
    pub n_more_precise: usize,
    pub m_less_precise: usize,
    pub k_incomparable: usize,
    pub equal: usize,
    pub net: f64,
    pub substantial: bool,
    pub per_unknown: BTreeMap<String, String>,
}

pub fn compare_report(
    file: &str,
    a: &Settings,
    b: &Settings,
    scope: CompareScope,
    cmp: &PrecisionComparison,
) -> CompareReport {
    CompareReport {
        schema: SCHEMA_VERSION,
        file: file.to_string(),
        config_a: ConfigEcho::of(a),
        config_b: ConfigEcho::of(b),
        scope: match scope {
            CompareScope::All => "all".to_string(),
            CompareScope::SharedGlobals => "shared-globals".to_string(),
        },
        n_more_precise: cmp.n,
        m_less_precise: cmp.m,
        k_incomparable: cmp.k,
        equal: cmp.equal,
        net: cmp.net,
        substantial: cmp.substantial,
        per_unknown: cmp
            .per_unknown
            .iter()
            .map(|(u, c)| (u.render(), c.as_str().to_string()))
            .collect(),
    }
}

impl CompareReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{}: A = {} vs B = {} (scope {})",
            self.file, self.config_a.rule, self.config_b.rule, self.scope
        );
        let _ = writeln!(
            out,
            "  n = {} more precise, m = {} less precise, k = {} incomparable, {} equal",
            self.n_more_precise, self.m_less_precise, self.k_incomparable, self.equal
        );
        let _ = writeln!(out, "  net = {:.4}, substantial = {}", self.net, self.substantial);
        for (u, c) in &self.per_unknown {
            if c != "equal" {
                let _ = writeln!(out, "    {u}: {c}");
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Corpus summary
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct CorpusCell {
    pub file: String,
    pub config: String,
    pub verdict: String,
    pub asserts_proven: usize,
    pub asserts_total: usize,
    pub trash_fraction: f64,
    pub net_vs_baseline: Option<f64>,
    pub substantial: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CorpusReport {
    pub schema: u32,
    pub baseline: String,
    pub cells: Vec<CorpusCell>,
}

impl CorpusReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "file,config,verdict,asserts_proven,asserts_total,trash_fraction,net_vs_baseline,substantial\n",
        );
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{:.4},{},{}\n",
                c.file,
                c.config,
                c.verdict,
                c.asserts_proven,
                c.asserts_total,
                c.trash_fraction,
                c.net_vs_baseline.map_or(String::new(), |v| format!("{v:.4}")),
                c.substantial.map_or(String::new(), |v| v.to_string()),
            ));
        }
        out
    }

    pub fn to_text(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<22} {:<28} {:<11} {:>7} {:>7} {:>7}",
            "file", "config", "verdict", "proven", "trash", "net"
        );
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{:<22} {:<28} {:<11} {:>3}/{:<3} {:>7.2} {:>7}",
                c.file,
                c.config,
                c.verdict,
                c.asserts_proven,
                c.asserts_total,
                c.trash_fraction,
                c.net_vs_baseline.map_or(String::new(), |v| format!("{v:+.3}")),
            );
        }
        out
    }
}
