//! Per-unknown precision comparison between two analysis results.
//!
//! Unknowns reached by only one run are read as bottom in the other. The
//! net improvement over a comparison with `n` more precise, `m` less
//! precise, and `k` incomparable unknowns is `(n - m) / (n + m + k)`; a
//! change is substantial when at least 5% of the compared unknowns improve
//! (or deteriorate).

use std::collections::BTreeSet;
use std::str::FromStr;

use crate::constraints::Unknown;
use crate::lattice::{lat_eq, Lattice};
use crate::solver::SolveResult;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrecClass {
    MorePrecise,
    LessPrecise,
    Equal,
    Incomparable,
}

impl PrecClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            PrecClass::MorePrecise => "more-precise",
            PrecClass::LessPrecise => "less-precise",
            PrecClass::Equal => "equal",
            PrecClass::Incomparable => "incomparable",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum CompareScope {
    All,
    #[value(name = "shared-globals")]
    SharedGlobals,
}

impl FromStr for CompareScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" => Ok(CompareScope::All),
            "shared-globals" => Ok(CompareScope::SharedGlobals),
            other => Err(format!("unknown compare scope `{other}`")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PrecisionComparison {
    /// Classification of run A relative to run B, per unknown.
    pub per_unknown: Vec<(Unknown, PrecClass)>,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub equal: usize,
    pub net: f64,
    pub substantial: bool,
}

fn in_scope(u: &Unknown, scope: CompareScope) -> bool {
    match scope {
        CompareScope::All => true,
        CompareScope::SharedGlobals => matches!(u, Unknown::GlobalShared(_)),
    }
}

pub fn compare_results<D: Lattice>(
    a: &SolveResult<D>,
    b: &SolveResult<D>,
    scope: CompareScope,
) -> PrecisionComparison {
    let universe: BTreeSet<Unknown> = a
        .reached
        .iter()
        .chain(b.reached.iter())
        .filter(|u| in_scope(u, scope))
        .cloned()
        .collect();
    let mut per_unknown = Vec::new();
    let (mut n, mut m, mut k, mut equal) = (0usize, 0usize, 0usize, 0usize);
    for u in universe {
        let va = a.assignment.get(&u);
        let vb = b.assignment.get(&u);
        let class = if lat_eq(&va, &vb) {
            equal += 1;
            PrecClass::Equal
        } else if va.leq(&vb) {
            n += 1;
            PrecClass::MorePrecise
        } else if vb.leq(&va) {
            m += 1;
            PrecClass::LessPrecise
        } else {
            k += 1;
            PrecClass::Incomparable
        };
        per_unknown.push((u, class));
    }
    PrecisionComparison { per_unknown, n, m, k, equal, net: net_improvement(n, m, k), substantial: is_substantial(n, m, n + m + k + equal) }
}

/// `(n - m) / (n + m + k)`, zero when nothing differs.
pub fn net_improvement(n: usize, m: usize, k: usize) -> f64 {
    let denom = n + m + k;
    if denom == 0 {
        0.0
    } else {
        (n as f64 - m as f64) / denom as f64
    }
}

/// At least 5% of the compared unknowns improved or deteriorated.
pub fn is_substantial(n: usize, m: usize, compared: usize) -> bool {
    if compared == 0 {
        return false;
    }
    let threshold = 0.05 * compared as f64;
    n as f64 >= threshold || m as f64 >= threshold
}
