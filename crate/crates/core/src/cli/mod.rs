//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage/config/validation, 3 I/O, 4 backend,
//! 5 model answer could not be parsed.

mod args;
mod backend;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde_json::json;
use thiserror::Error;

pub use args::{BackendArgs, Cli, Command, CompareArgs, EvaluateArgs, PrioritizeArgs};
pub use backend::{resolve_config, ENDPOINT_ENV, MODEL_ENV};

use crate::baselines::BaselineError;
use crate::evaluation::{apfd, compare, run_trials, EvalError, TrialSet, DEFAULT_REPETITIONS};
use crate::gateway::ChatBackend;
use crate::parser::render_tree;
use crate::pipeline::{run_strategy, PipelineError, StrategyContext};
use crate::report_store::{load_corpus, load_ground_truth, Corpus, StoreError};
use crate::sequence::{load_sequence, permutation_diff, SequenceError, StrategyKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_BACKEND: i32 = 4;
pub const EXIT_PARSE: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Backend(String),
    #[error("{0}")]
    Parse(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io(_) => EXIT_IO,
            CliError::Backend(_) => EXIT_BACKEND,
            CliError::Parse(_) => EXIT_PARSE,
        }
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<SequenceError> for CliError {
    fn from(e: SequenceError) -> Self {
        match e {
            SequenceError::Store(s) => s.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let msg = e.to_string();
        match e {
            PipelineError::Store(s) => s.into(),
            PipelineError::Gateway(_) => CliError::Backend(msg),
            PipelineError::Parse(_) | PipelineError::Tree(_) => CliError::Parse(msg),
            PipelineError::Baseline(BaselineError::NoSequence) => CliError::Parse(msg),
            PipelineError::Config(_) | PipelineError::Prompt(_) | PipelineError::Baseline(_) => CliError::Config(msg),
        }
    }
}

/// Owns an output directory; every artifact of a run is written through it.
struct RunDir {
    root: PathBuf,
}

impl RunDir {
    fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::Io(format!("{}: {e}", root.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.root.join(name);
        fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }
}

pub const PROMPT_FILE: &str = "prompt.txt";
pub const RESPONSE_FILE: &str = "response.txt";
pub const TREE_FILE: &str = "tree.txt";
pub const SEQUENCE_FILE: &str = "sequence.jsonl";
pub const CONFIG_FILE: &str = "config.json";
pub const TRIALS_FILE: &str = "trials.jsonl";
pub const SUMMARY_TEXT_FILE: &str = "summary.txt";
pub const SUMMARY_FILE: &str = "summary.jsonl";

fn env_var(key: &str) -> Option<String> {
    std::env::var(key).ok()
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

pub fn cmd_prioritize(args: &PrioritizeArgs) -> Result<(), CliError> {
    let corpus = load_corpus(&args.reports)?;
    let truth = args.truth.as_ref().map(|p| load_ground_truth(p, &corpus)).transpose()?;
    let cfg = resolve_config(&args.backend, &env_var)?;
    let scripts = backend::mock_scripts(&args.backend)?;
    let templates = backend::templates(&args.backend)?;
    let model: Option<Box<dyn ChatBackend>> = if args.strategy.needs_backend() {
        Some(backend::backend_for(args.strategy, &args.backend, &scripts)?)
    } else {
        None
    };

    let mut ctx = StrategyContext::new(&corpus);
    ctx.truth = truth.as_ref();
    ctx.backend = model.as_deref();
    ctx.config = cfg.clone();
    ctx.templates = templates;
    ctx.check(args.strategy, args.seed)?;

    let dir = RunDir::create(&args.out)?;
    let snapshot = json!({
        "command": "prioritize",
        "reports": path_str(&args.reports),
        "truth": args.truth.as_deref().map(path_str),
        "strategy": args.strategy,
        "seed": args.seed,
        "mock_scripts": args.backend.mock_scripts,
        "mock_cycle": args.backend.mock_cycle,
        "templates": args.backend.templates,
        "backend": if args.strategy.needs_backend() { serde_json::to_value(&cfg).ok() } else { None },
    });
    dir.write(
        CONFIG_FILE,
        &(serde_json::to_string_pretty(&snapshot).expect("json") + "\n"),
    )?;

    let run = match run_strategy(&ctx, args.strategy, args.seed) {
        Ok(run) => run,
        Err(failure) => {
            if let Some(p) = &failure.prompt {
                dir.write(PROMPT_FILE, &p.text)?;
            }
            if let Some(ex) = &failure.exchange {
                dir.write(RESPONSE_FILE, &ex.response_text)?;
            }
            return Err(failure.error.into());
        }
    };
    if let Some(p) = &run.prompt {
        dir.write(PROMPT_FILE, &p.text)?;
    }
    if let Some(ex) = run.exchange() {
        dir.write(RESPONSE_FILE, &ex.response_text)?;
    }
    if let Some(tree) = &run.tree {
        dir.write(TREE_FILE, &render_tree(tree))?;
    }
    if !run.missing.is_empty() {
        eprintln!(
            "warning: {} report(s) missing from the model answer were appended as Uncategorized",
            run.missing.len()
        );
    } else if run.sequence.incomplete {
        eprintln!("warning: incomplete model answer; unranked reports were appended in corpus order");
    }
    dir.write(SEQUENCE_FILE, &run.sequence.to_jsonl())?;

    let ids: Vec<String> = run.sequence.order.iter().map(u64::to_string).collect();
    println!("{}", ids.join(" "));
    if let Some(t) = &truth {
        if let Ok(score) = apfd(&run.sequence.order, t) {
            println!("apfd: {:.4}", score.value);
        }
    }
    Ok(())
}

fn truth_only(path: &Path) -> Result<(Corpus, crate::report_store::GroundTruth), CliError> {
    // Without a corpus file, the labelled reports define the report set.
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut reports = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Value = serde_json::from_str(line)
            .map_err(|e| CliError::Config(format!("line {}: malformed record: {e}", i + 1)))?;
        let id = v["report_id"]
            .as_u64()
            .ok_or_else(|| CliError::Config(format!("line {}: missing report_id", i + 1)))?;
        reports.push(crate::report_store::Report::new(id, "(unlabelled text)"));
    }
    reports.dedup_by_key(|r| r.id);
    let mut seen = std::collections::HashSet::new();
    reports.retain(|r| seen.insert(r.id));
    let corpus = Corpus::new("truth", reports)?;
    let truth = crate::report_store::parse_ground_truth(&text, &corpus)?;
    Ok((corpus, truth))
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let truth = match &args.reports {
        Some(r) => {
            let corpus = load_corpus(r)?;
            load_ground_truth(&args.truth, &corpus)?
        }
        None => truth_only(&args.truth)?.1,
    };
    let seq = load_sequence(&args.sequence)?;
    let diff = permutation_diff(&seq.order, &truth.report_ids());
    if !diff.is_empty() {
        return Err(CliError::Config(format!(
            "sequence is not a permutation of the labelled reports: {diff}"
        )));
    }
    let r = apfd(&seq.order, &truth).map_err(|e| CliError::Config(e.to_string()))?;
    println!("strategy: {}", seq.header.strategy);
    println!("n: {}", r.n);
    println!("m: {}", r.m);
    let hits: Vec<String> = r.first_hit_indices.iter().map(usize::to_string).collect();
    println!("first_hit_indices: {}", hits.join(" "));
    println!("apfd: {:.4}", r.value);
    if let (Some(p), Some(rt)) = (seq.header.prompt_tokens, seq.header.response_tokens) {
        let t = crate::evaluation::tpr_from_counts(p, rt, r.n).map_err(|e| CliError::Config(e.to_string()))?;
        println!("tpr: {:.2}", t.value);
    }
    Ok(())
}

/// Parses `N`, `A..B`, `A..=B` or `A-B` into (first seed, count if a range).
pub fn parse_seed_spec(spec: &str) -> Result<(u64, Option<usize>), CliError> {
    let bad = || CliError::Config(format!("invalid seed '{spec}'"));
    let spec = spec.trim();
    let range = spec
        .split_once("..=")
        .or_else(|| spec.split_once(".."))
        .or_else(|| spec.split_once('-'));
    match range {
        Some((a, b)) => {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let b: u64 = b.trim().parse().map_err(|_| bad())?;
            if b < a {
                return Err(bad());
            }
            Ok((a, Some((b - a + 1) as usize)))
        }
        None => Ok((spec.parse().map_err(|_| bad())?, None)),
    }
}

pub fn cmd_compare(args: &CompareArgs) -> Result<(), CliError> {
    let mut strategies = Vec::new();
    for s in &args.strategies {
        if !strategies.contains(s) {
            strategies.push(*s);
        }
    }
    if strategies.len() < 2 {
        return Err(CliError::Config(
            "compare needs at least two distinct strategies".into(),
        ));
    }
    let (first_seed, range_len) = match &args.seed {
        Some(s) => parse_seed_spec(s)?,
        None => (1, None),
    };
    let repetitions = match (args.repetitions, range_len) {
        (Some(r), Some(n)) if r != n => {
            return Err(CliError::Config(format!(
                "--repetitions {r} disagrees with a seed range of {n} seeds"
            )))
        }
        (Some(r), _) => r,
        (None, Some(n)) => n,
        (None, None) => DEFAULT_REPETITIONS,
    };
    if repetitions == 0 {
        return Err(CliError::Config("--repetitions must be at least 1".into()));
    }

    let corpus = load_corpus(&args.reports)?;
    let truth = load_ground_truth(&args.truth, &corpus)?;
    let cfg = resolve_config(&args.backend, &env_var)?;
    let scripts = backend::mock_scripts(&args.backend)?;
    let templates = backend::templates(&args.backend)?;

    let mut backends: Vec<(StrategyKind, Box<dyn ChatBackend>)> = Vec::new();
    for s in strategies.iter().filter(|s| s.needs_backend()) {
        backends.push((*s, backend::backend_for(*s, &args.backend, &scripts)?));
    }

    let dir = RunDir::create(&args.out)?;
    let snapshot = json!({
        "command": "compare",
        "reports": path_str(&args.reports),
        "truth": path_str(&args.truth),
        "strategies": strategies,
        "first_seed": first_seed,
        "repetitions": repetitions,
        "mock_scripts": args.backend.mock_scripts,
        "mock_cycle": args.backend.mock_cycle,
        "templates": args.backend.templates,
        "backend": if backends.is_empty() { None } else { serde_json::to_value(&cfg).ok() },
    });
    dir.write(
        CONFIG_FILE,
        &(serde_json::to_string_pretty(&snapshot).expect("json") + "\n"),
    )?;

    let mut sets: Vec<TrialSet> = Vec::new();
    for s in &strategies {
        let mut ctx = StrategyContext::new(&corpus).with_truth(&truth);
        ctx.config = cfg.clone();
        ctx.templates = templates.clone();
        ctx.backend = backends.iter().find(|(k, _)| k == s).map(|(_, b)| b.as_ref());
        ctx.check(*s, Some(first_seed))?;
        match run_trials(&ctx, *s, repetitions, first_seed) {
            Ok(set) => sets.push(set),
            Err(EvalError::NoSuccessfulTrials(first)) => {
                return Err(classify_trial_failure(*s, &first));
            }
            Err(e) => return Err(CliError::Config(e.to_string())),
        }
    }

    let trials: String = sets.iter().map(TrialSet::to_jsonl).collect();
    dir.write(TRIALS_FILE, &trials)?;
    let summary = compare(&sets);
    let table = summary.render_table();
    dir.write(SUMMARY_TEXT_FILE, &table)?;
    dir.write(SUMMARY_FILE, &summary.to_jsonl())?;
    print!("{table}");
    Ok(())
}

fn classify_trial_failure(strategy: StrategyKind, first: &str) -> CliError {
    let msg = format!("every {strategy} trial failed: {first}");
    let backend_words = [
        "network failure",
        "authentication",
        "backend error",
        "malformed backend reply",
        "mock script",
    ];
    if backend_words.iter().any(|w| first.contains(w)) {
        CliError::Backend(msg)
    } else {
        CliError::Parse(msg)
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Prioritize(a) => cmd_prioritize(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Compare(a) => cmd_compare(&a),
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_specs() {
        assert_eq!(parse_seed_spec("7").unwrap(), (7, None));
        assert_eq!(parse_seed_spec("1..50").unwrap(), (1, Some(50)));
        assert_eq!(parse_seed_spec("1..=50").unwrap(), (1, Some(50)));
        assert_eq!(parse_seed_spec("3-5").unwrap(), (3, Some(3)));
        assert!(parse_seed_spec("5..3").is_err());
        assert!(parse_seed_spec("x").is_err());
    }

    #[test]
    fn exit_codes_are_distinct() {
        let codes = [
            CliError::Config(String::new()).exit_code(),
            CliError::Io(String::new()).exit_code(),
            CliError::Backend(String::new()).exit_code(),
            CliError::Parse(String::new()).exit_code(),
        ];
        assert_eq!(codes, [2, 3, 4, 5]);
    }
}
