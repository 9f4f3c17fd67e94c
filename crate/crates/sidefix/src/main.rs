use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sidefix::compare::{compare_results, CompareScope};
use sidefix::driver::{analyze_source, analyze_synth, synth_name, Settings, ThresholdChoice};
use sidefix::frontend::ContextMode;
use sidefix::oracle::{concrete_collect, render_reach, OracleBudget};
use sidefix::report::{
    analysis_report, compare_report, synth_report, CorpusCell, CorpusReport, SCHEMA_VERSION,
};
use sidefix::rules::{Gas, RuleKind};
use sidefix::solver::SolverKind;

/// Mixed flow-sensitive analyzer for a mini C-like language, built on a
/// side-effecting constraint-system fixpoint engine with pluggable
/// global-update rules.
#[derive(Parser)]
#[command(name = "sidefix", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Args)]
struct OutputArgs {
    /// Output format.
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Write the report to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConfigArgs {
    /// Global-update rule.
    #[arg(long, value_enum, default_value = "reluctant")]
    rule: RuleKind,
    /// Wrap the rule for withdrawal of outdated contributions.
    #[arg(long)]
    gc: bool,
    /// Widen-to-narrow gas bound (integer or `inf`).
    #[arg(long, default_value = "3")]
    gas: Gas,
    /// Hosting solver.
    #[arg(long, value_enum, default_value = "topdown")]
    solver: SolverKind,
    /// Calling-context discrimination.
    #[arg(long, value_parser = parse_context, default_value = "none")]
    context: ContextMode,
    /// Interval widening thresholds: `auto`, `none`, or a comma list.
    #[arg(long, default_value = "none")]
    thresholds: ThresholdChoice,
    /// Per-global update cap (integer or `inf`).
    #[arg(long, default_value = "10000", value_parser = parse_cap)]
    max_updates: OptCap,
    /// Disable eager re-querying of withdrawn procedure contexts in the
    /// top-down solver.
    #[arg(long)]
    no_requery: bool,
    /// Record the update trace and run the post-solution verification and
    /// the dynamic update-rule soundness checker.
    #[arg(long)]
    check: bool,
}

#[derive(Clone, Copy, Debug)]
struct OptCap(Option<usize>);

fn parse_cap(s: &str) -> Result<OptCap, String> {
    if s == "inf" {
        Ok(OptCap(None))
    } else {
        s.parse::<usize>().map(|v| OptCap(Some(v))).map_err(|e| e.to_string())
    }
}

fn parse_context(s: &str) -> Result<ContextMode, String> {
    match s {
        "none" => Ok(ContextMode::Unit),
        "full" => Ok(ContextMode::Full),
        other => Err(format!("unknown context mode `{other}` (use none|full)")),
    }
}

impl ConfigArgs {
    fn settings(&self) -> Settings {
        Settings {
            rule: self.rule,
            gas: self.gas,
            gc: self.gc,
            solver: self.solver,
            context: self.context,
            thresholds: self.thresholds.clone(),
            max_updates: self.max_updates.0,
            requery: !self.no_requery,
            check: self.check,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Analyze one program (`.mc`) or synthetic system (`.synth`).
    Analyze {
        file: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Exit with code 1 when an assert stays unproven.
        #[arg(long)]
        fail_on_unproven: bool,
    },
    /// Compare the precision of two configurations on one file.
    Compare {
        file: PathBuf,
        /// Configuration A, e.g. `rule=localized,gas=3,gc`.
        #[arg(long)]
        a: String,
        /// Configuration B.
        #[arg(long)]
        b: String,
        /// Which unknowns to compare.
        #[arg(long, value_enum)]
        compare_scope: Option<CompareScope>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run every `.mc`/`.synth` file in a directory under several
    /// configurations and summarize.
    Corpus {
        dir: PathBuf,
        /// Configuration spec, repeatable: `[label:]key=value,...`.
        #[arg(long = "config")]
        configs: Vec<String>,
        /// Label of the configuration used as the comparison base.
        #[arg(long)]
        baseline: Option<String>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Explore the concrete collecting semantics of a program.
    Oracle {
        file: PathBuf,
        #[arg(long, default_value_t = 2_000_000)]
        max_states: usize,
        #[arg(long, default_value_t = 10_000)]
        max_depth: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
}

const EXIT_UNPROVEN: u8 = 1;
const EXIT_FRONTEND: u8 = 2;
const EXIT_DIVERGENCE: u8 = 3;
const EXIT_VERIFICATION: u8 = 4;

fn emit(output: &OutputArgs, text: String) -> Result<(), String> {
    match &output.out {
        Some(path) => std::fs::write(path, text).map_err(|e| e.to_string()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn is_synth(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "synth")
}

fn run_analyze(
    file: &Path,
    settings: &Settings,
    output: &OutputArgs,
    fail_on_unproven: bool,
) -> Result<u8, String> {
    let source = read(file)?;
    let name = file.file_name().unwrap().to_string_lossy().to_string();
    let start = Instant::now();
    let report = if is_synth(file) {
        let analysis = analyze_synth(&synth_name(&source), settings).map_err(|e| e.to_string())?;
        synth_report(&name, settings, &analysis, start.elapsed().as_secs_f64() * 1e3)
    } else {
        let analysis = analyze_source(&source, settings).map_err(|e| e.to_string())?;
        analysis_report(&name, settings, &analysis, start.elapsed().as_secs_f64() * 1e3)
    };
    let text = match output.format {
        Format::Text => report.to_text(),
        Format::Json => report.to_json(),
        Format::Csv => {
            let mut out = String::from("unknown,value\n");
            for (u, v) in &report.values {
                out.push_str(&format!("\"{u}\",\"{v}\"\n"));
            }
            out
        }
    };
    emit(output, text)?;
    if report.verdict == "divergence" {
        return Ok(EXIT_DIVERGENCE);
    }
    if report.post_solution.as_deref().is_some_and(|p| p != "pass")
        || report.rule_check.as_deref().is_some_and(|p| p != "pass")
    {
        return Ok(EXIT_VERIFICATION);
    }
    if fail_on_unproven && report.asserts.iter().any(|a| a.verdict == "unproven") {
        return Ok(EXIT_UNPROVEN);
    }
    Ok(0)
}

fn run_compare(
    file: &Path,
    spec_a: &str,
    spec_b: &str,
    scope: Option<CompareScope>,
    output: &OutputArgs,
) -> Result<u8, String> {
    if is_synth(file) {
        return Err("compare expects a program file".to_string());
    }
    let source = read(file)?;
    let a = Settings::parse_spec(spec_a)?;
    let b = Settings::parse_spec(spec_b)?;
    // Cross-context-mode comparisons default to the shared-globals scope:
    // the two runs discover different procedure-entry unknowns.
    let scope = scope.unwrap_or(if a.context == b.context {
        CompareScope::All
    } else {
        CompareScope::SharedGlobals
    });
    let ra = analyze_source(&source, &a).map_err(|e| e.to_string())?;
    let rb = analyze_source(&source, &b).map_err(|e| e.to_string())?;
    if !ra.result.verdict.converged() || !rb.result.verdict.converged() {
        return Ok(EXIT_DIVERGENCE);
    }
    let cmp = compare_results(&ra.result, &rb.result, scope);
    let name = file.file_name().unwrap().to_string_lossy().to_string();
    let report = compare_report(&name, &a, &b, scope, &cmp);
    let text = match output.format {
        Format::Text => report.to_text(),
        Format::Json => report.to_json(),
        Format::Csv => {
            let mut out = String::from("unknown,class\n");
            for (u, c) in &report.per_unknown {
                out.push_str(&format!("\"{u}\",{c}\n"));
            }
            out
        }
    };
    emit(output, text)?;
    Ok(0)
}

fn default_corpus_configs() -> Vec<(String, Settings)> {
    [
        ("baseline", "rule=baseline"),
        ("localized", "rule=localized,gas=3"),
        ("reluctant", "rule=reluctant,gas=3"),
        ("reluctant-gc", "rule=reluctant,gas=3,gc"),
    ]
    .into_iter()
    .map(|(label, spec)| (label.to_string(), Settings::parse_spec(spec).unwrap()))
    .collect()
}

fn parse_labeled_config(spec: &str) -> Result<(String, Settings), String> {
    if let Some((label, rest)) = spec.split_once(':') {
        Ok((label.trim().to_string(), Settings::parse_spec(rest)?))
    } else {
        let s = Settings::parse_spec(spec)?;
        Ok((s.label(), s))
    }
}

enum Run {
    Prog(Box<sidefix::driver::Analysis>),
    Synth(Box<sidefix::driver::SynthAnalysis>),
    Failed(String),
}

fn corpus_cell(name: &str, label: &str, run: &Run, base: Option<&Run>) -> CorpusCell {
    let mut cell = CorpusCell {
        file: name.to_string(),
        config: label.to_string(),
        verdict: String::new(),
        asserts_proven: 0,
        asserts_total: 0,
        trash_fraction: 0.0,
        net_vs_baseline: None,
        substantial: None,
    };
    match run {
        Run::Failed(e) => cell.verdict = format!("error: {e}"),
        Run::Prog(a) => {
            cell.verdict = if a.result.verdict.converged() {
                "converged".to_string()
            } else {
                "divergence".to_string()
            };
            cell.asserts_total = a.asserts.len();
            cell.asserts_proven = a
                .asserts
                .iter()
                .filter(|(_, v)| *v == sidefix::frontend::AssertVerdict::Proven)
                .count();
            cell.trash_fraction = a.result.stats.trash_fraction();
            if let Some(Run::Prog(b)) = base {
                if a.result.verdict.converged() && b.result.verdict.converged() {
                    let cmp =
                        compare_results(&a.result, &b.result, CompareScope::SharedGlobals);
                    cell.net_vs_baseline = Some(cmp.net);
                    cell.substantial = Some(cmp.substantial);
                }
            }
        }
        Run::Synth(a) => {
            cell.verdict = if a.result.verdict.converged() {
                "converged".to_string()
            } else {
                "divergence".to_string()
            };
            if let Some(Run::Synth(b)) = base {
                if a.result.verdict.converged() && b.result.verdict.converged() {
                    let cmp =
                        compare_results(&a.result, &b.result, CompareScope::SharedGlobals);
                    cell.net_vs_baseline = Some(cmp.net);
                    cell.substantial = Some(cmp.substantial);
                }
            }
        }
    }
    cell
}

fn run_corpus(
    dir: &Path,
    config_specs: &[String],
    baseline: Option<&str>,
    output: &OutputArgs,
) -> Result<u8, String> {
    let configs: Vec<(String, Settings)> = if config_specs.is_empty() {
        default_corpus_configs()
    } else {
        config_specs.iter().map(|s| parse_labeled_config(s)).collect::<Result<_, _>>()?
    };
    let baseline_label = baseline.unwrap_or(&configs[0].0).to_string();
    if !configs.iter().any(|(l, _)| *l == baseline_label) {
        return Err(format!("baseline `{baseline_label}` is not among the configs"));
    }

    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| format!("{}: {e}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "mc") || is_synth(p))
        .collect();
    files.sort();

    let mut cells = Vec::new();
    for file in &files {
        let source = read(file)?;
        let name = file.file_name().unwrap().to_string_lossy().to_string();
        let mut runs: Vec<(String, Run)> = Vec::new();
        for (label, settings) in &configs {
            let run = if is_synth(file) {
                match analyze_synth(&synth_name(&source), settings) {
                    Ok(a) => Run::Synth(Box::new(a)),
                    Err(e) => Run::Failed(e.to_string()),
                }
            } else {
                match analyze_source(&source, settings) {
                    Ok(a) => Run::Prog(Box::new(a)),
                    Err(e) => Run::Failed(e.to_string()),
                }
            };
            runs.push((label.clone(), run));
        }
        let base_idx = runs.iter().position(|(l, _)| *l == baseline_label).unwrap();
        for i in 0..runs.len() {
            let base = if i == base_idx { None } else { Some(&runs[base_idx].1) };
            cells.push(corpus_cell(&name, &runs[i].0, &runs[i].1, base));
        }
    }
    let report = CorpusReport { schema: SCHEMA_VERSION, baseline: baseline_label, cells };
    let text = match output.format {
        Format::Text => report.to_text(),
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv(),
    };
    emit(output, text)?;
    Ok(0)
}

fn run_oracle(
    file: &Path,
    max_states: usize,
    max_depth: usize,
    output: &OutputArgs,
) -> Result<u8, String> {
    let source = read(file)?;
    let program = sidefix::frontend::parse(&source).map_err(|e| e.to_string())?;
    let reach = concrete_collect(&program, OracleBudget { max_states, max_depth });
    let json = render_reach(&reach);
    let text = match output.format {
        Format::Json => serde_json::to_string_pretty(&json).unwrap(),
        _ => {
            let mut out = format!(
                "explored {} states{}\n",
                reach.states_explored,
                if reach.exhausted { " (budget exhausted)" } else { "" }
            );
            for (g, vals) in &reach.globals {
                let shown: Vec<String> = vals
                    .iter()
                    .take(30)
                    .map(|v| match v {
                        sidefix::oracle::CVal::Int(n) => n.to_string(),
                        sidefix::oracle::CVal::Loc(l) => format!("&{l}"),
                    })
                    .collect();
                out.push_str(&format!("{g}: {{{}}} ({} values)\n", shown.join(", "), vals.len()));
            }
            for (p, n, l) in &reach.assert_violations {
                out.push_str(&format!("assert violated at {p}:{n} (line {l})\n"));
            }
            out
        }
    };
    emit(output, text)?;
    Ok(0)
}

fn dispatch(cli: Cli) -> Result<u8, String> {
    match cli.command {
        Command::Analyze { file, config, output, fail_on_unproven } => {
            run_analyze(&file, &config.settings(), &output, fail_on_unproven)
        }
        Command::Compare { file, a, b, compare_scope, output } => {
            run_compare(&file, &a, &b, compare_scope, &output)
        }
        Command::Corpus { dir, configs, baseline, output } => {
            run_corpus(&dir, &configs, baseline.as_deref(), &output)
        }
        Command::Oracle { file, max_states, max_depth, output } => {
            run_oracle(&file, max_states, max_depth, &output)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("sidefix: {msg}");
            ExitCode::from(EXIT_FRONTEND)
        }
    }
}
