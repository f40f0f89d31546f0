use serde::{Deserialize, Serialize};

use super::metrics::apfd;
use super::stats::{cohens_d, wilcoxon_signed_rank};
use super::EvalError;
use crate::pipeline::{run_strategy, StrategyContext};
use crate::report_store::ReportId;
use crate::sequence::StrategyKind;

pub const DEFAULT_REPETITIONS: usize = 50;

/// One line of the trial output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub strategy: StrategyKind,
    pub apfd: Option<f64>,
    pub prompt_tokens: Option<u64>,
    pub response_tokens: Option<u64>,
    pub incomplete: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub order: Option<Vec<ReportId>>,
}

impl TrialRecord {
    pub fn succeeded(&self) -> bool {
        self.apfd.is_some()
    }

    pub fn tpr(&self, n: usize) -> Option<f64> {
        match (self.prompt_tokens, self.response_tokens) {
            (Some(p), Some(r)) => super::metrics::tpr_from_counts(p, r, n).ok().map(|t| t.value),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSet {
    pub strategy: StrategyKind,
    pub repetitions: usize,
    pub report_count: usize,
    pub trials: Vec<TrialRecord>,
}

impl TrialSet {
    pub fn apfd_values(&self) -> Vec<f64> {
        self.trials.iter().filter_map(|t| t.apfd).collect()
    }

    pub fn to_jsonl(&self) -> String {
        self.trials
            .iter()
            .map(|t| serde_json::to_string(t).expect("trial serializes") + "\n")
            .collect()
    }
}

/// Runs `strategy` `repetitions` times. Random uses seed `first_seed + i`
/// for trial `i` (0-based); model strategies make a fresh backend call per
/// trial. Failed trials are recorded, not fatal.
pub fn run_trials(
    ctx: &StrategyContext<'_>,
    strategy: StrategyKind,
    repetitions: usize,
    first_seed: u64,
) -> Result<TrialSet, EvalError> {
    if repetitions == 0 {
        return Err(EvalError::NoRepetitions);
    }
    let truth = ctx.truth.ok_or(EvalError::NoTruth)?;
    let n = ctx.corpus.len();
    let mut trials = Vec::with_capacity(repetitions);
    for i in 0..repetitions {
        let seed = strategy.needs_seed().then(|| first_seed + i as u64);
        let record = match run_strategy(ctx, strategy, seed) {
            Ok(run) => {
                let seq = &run.sequence;
                let score = apfd(&seq.order, truth);
                TrialRecord {
                    trial: i + 1,
                    strategy,
                    apfd: score.as_ref().ok().map(|r| r.value),
                    prompt_tokens: seq.exchange.as_ref().map(|e| e.prompt_tokens),
                    response_tokens: seq.exchange.as_ref().map(|e| e.response_tokens),
                    incomplete: seq.incomplete,
                    seed,
                    error: score.err().map(|e| e.to_string()),
                    order: Some(seq.order.clone()),
                }
            }
            Err(failure) => {
                log::warn!("{strategy} trial {} failed: {}", i + 1, failure.error);
                TrialRecord {
                    trial: i + 1,
                    strategy,
                    apfd: None,
                    prompt_tokens: failure.exchange.as_ref().map(|e| e.prompt_tokens),
                    response_tokens: failure.exchange.as_ref().map(|e| e.response_tokens),
                    incomplete: false,
                    seed,
                    error: Some(failure.error.to_string()),
                    order: None,
                }
            }
        };
        trials.push(record);
    }
    if trials.iter().all(|t| !t.succeeded()) {
        let first = trials.iter().find_map(|t| t.error.clone()).unwrap_or_default();
        return Err(EvalError::NoSuccessfulTrials(first));
    }
    Ok(TrialSet {
        strategy,
        repetitions,
        report_count: n,
        trials,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
    pub count: usize,
}

impl MeanSd {
    pub fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Self {
            mean,
            sd,
            count: xs.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: StrategyKind,
    pub trials: usize,
    pub succeeded: usize,
    pub incomplete: usize,
    /// Over all scored trials, incomplete ones included.
    pub apfd: Option<MeanSd>,
    /// Over scored trials whose sequence was complete.
    pub apfd_complete_only: Option<MeanSd>,
    pub tpr: Option<MeanSd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub a: StrategyKind,
    pub b: StrategyKind,
    /// Trials where both sides were scored, paired by trial index.
    pub pairs: usize,
    pub wilcoxon_p: Option<f64>,
    pub cohens_d: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub strategies: Vec<StrategySummary>,
    pub pairs: Vec<PairComparison>,
}

pub fn summarize(set: &TrialSet) -> StrategySummary {
    let scored: Vec<&TrialRecord> = set.trials.iter().filter(|t| t.succeeded()).collect();
    let all: Vec<f64> = scored.iter().filter_map(|t| t.apfd).collect();
    let complete: Vec<f64> = scored.iter().filter(|t| !t.incomplete).filter_map(|t| t.apfd).collect();
    let tprs: Vec<f64> = set.trials.iter().filter_map(|t| t.tpr(set.report_count)).collect();
    StrategySummary {
        strategy: set.strategy,
        trials: set.trials.len(),
        succeeded: scored.len(),
        incomplete: scored.iter().filter(|t| t.incomplete).count(),
        apfd: MeanSd::of(&all),
        apfd_complete_only: MeanSd::of(&complete),
        tpr: MeanSd::of(&tprs),
    }
}

pub fn compare_pair(a: &TrialSet, b: &TrialSet) -> PairComparison {
    let pairs: Vec<(f64, f64)> = a
        .trials
        .iter()
        .zip(&b.trials)
        .filter_map(|(x, y)| Some((x.apfd?, y.apfd?)))
        .collect();
    let mut notes = Vec::new();
    let wilcoxon_p = match wilcoxon_signed_rank(&pairs) {
        Ok(r) => Some(r.p_value),
        Err(e) => {
            notes.push(format!("wilcoxon: {e}"));
            None
        }
    };
    let (xs, ys): (Vec<f64>, Vec<f64>) = (a.apfd_values(), b.apfd_values());
    let d = match cohens_d(&xs, &ys) {
        Ok(d) => Some(d),
        Err(e) => {
            notes.push(format!("cohen's d: {e}"));
            None
        }
    };
    PairComparison {
        a: a.strategy,
        b: b.strategy,
        pairs: pairs.len(),
        wilcoxon_p,
        cohens_d: d,
        notes,
    }
}

pub fn compare(sets: &[TrialSet]) -> ComparisonSummary {
    let strategies = sets.iter().map(summarize).collect();
    let mut pairs = Vec::new();
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            pairs.push(compare_pair(&sets[i], &sets[j]));
        }
    }
    ComparisonSummary { strategies, pairs }
}

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.prec$}"))
}

fn fmt_p(v: Option<f64>) -> String {
    v.map_or_else(
        || "-".to_string(),
        |p| {
            if p < 1e-3 {
                format!("{p:.2e}")
            } else {
                format!("{p:.4}")
            }
        },
    )
}

fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
            + "\n"
    };
    let mut out = line(header.to_vec());
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    out.push_str(&line(rule.iter().map(String::as_str).collect()));
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out
}

impl ComparisonSummary {
    /// Aligned plain-text rendering: one row per strategy, then one row per pair.
    pub fn render_table(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .strategies
            .iter()
            .map(|s| {
                vec![
                    s.strategy.to_string(),
                    format!("{}/{}", s.succeeded, s.trials),
                    s.incomplete.to_string(),
                    fmt_opt(s.apfd.map(|m| m.mean), 4),
                    fmt_opt(s.apfd.map(|m| m.sd), 4),
                    fmt_opt(s.apfd_complete_only.map(|m| m.mean), 4),
                    fmt_opt(s.tpr.map(|m| m.mean), 2),
                    fmt_opt(s.tpr.map(|m| m.sd), 2),
                ]
            })
            .collect();
        let mut out = table(
            &[
                "strategy",
                "ok",
                "incomplete",
                "apfd_mean",
                "apfd_sd",
                "apfd_mean_complete",
                "tpr_mean",
                "tpr_sd",
            ],
            &rows,
        );
        if !self.pairs.is_empty() {
            out.push('\n');
            let rows: Vec<Vec<String>> = self
                .pairs
                .iter()
                .map(|p| {
                    vec![
                        format!("{} vs {}", p.a, p.b),
                        p.pairs.to_string(),
                        fmt_p(p.wilcoxon_p),
                        fmt_opt(p.cohens_d, 4),
                    ]
                })
                .collect();
            out.push_str(&table(&["comparison", "pairs", "wilcoxon_p", "cohens_d"], &rows));
        }
        out
    }

    /// One JSON record per strategy, then one per pair.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.strategies {
            let mut v = serde_json::to_value(s).expect("summary serializes");
            v["kind"] = "strategy".into();
            out.push_str(&v.to_string());
            out.push('\n');
        }
        for p in &self.pairs {
            let mut v = serde_json::to_value(p).expect("pair serializes");
            v["kind"] = "pair".into();
            out.push_str(&v.to_string());
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{BackendConfig, MockBackend, MockEntry};
    use crate::report_store::{Corpus, GroundTruth, Report};

    fn fixture() -> (Corpus, GroundTruth) {
        let c = Corpus::new("t", (1..=6).map(|i| Report::new(i, format!("r{i}"))).collect()).unwrap();
        let bugs = ["X", "Z", "Y", "X", "X", "Y"];
        let t = GroundTruth::new(&c, c.ids().zip(bugs.iter().map(|b| b.to_string()))).unwrap();
        (c, t)
    }

    #[test]
    fn ideal_is_constant() {
        let (c, t) = fixture();
        let ctx = StrategyContext::new(&c).with_truth(&t);
        let set = run_trials(&ctx, StrategyKind::Ideal, 50, 1).unwrap();
        let v = set.apfd_values();
        assert_eq!(v.len(), 50);
        assert!(v.iter().all(|x| *x == v[0]));
    }

    #[test]
    fn random_seeds_are_recorded() {
        let (c, t) = fixture();
        let ctx = StrategyContext::new(&c).with_truth(&t);
        let set = run_trials(&ctx, StrategyKind::Random, 3, 10).unwrap();
        let seeds: Vec<_> = set.trials.iter().map(|t| t.seed).collect();
        assert_eq!(seeds, vec![Some(10), Some(11), Some(12)]);
    }

    #[test]
    fn failures_recorded_not_fatal() {
        let (c, t) = fixture();
        let mock = MockBackend::new(vec![
            MockEntry::new("LEVEL 1: A -> Report: 1, 2, 3, 4, 5, 6"),
            MockEntry::new("garbage"),
        ])
        .unwrap();
        let ctx = StrategyContext::new(&c)
            .with_truth(&t)
            .with_backend(&mock, BackendConfig::default());
        let set = run_trials(&ctx, StrategyKind::LlmPrior, 3, 1).unwrap();
        assert!(set.trials[0].succeeded());
        assert!(set.trials[1].error.as_deref().unwrap().contains("no category lines"));
        assert_eq!(set.trials[1].response_tokens, Some(1));
        assert_eq!(set.trials[2].error.as_deref(), Some("mock script exhausted"));
        let s = summarize(&set);
        assert_eq!((s.trials, s.succeeded), (3, 1));
        assert_eq!(s.tpr.unwrap().count, 2);
    }

    #[test]
    fn all_failed_is_an_error() {
        let (c, t) = fixture();
        let mock = MockBackend::new(vec![MockEntry::new("nothing")]).unwrap();
        let ctx = StrategyContext::new(&c)
            .with_truth(&t)
            .with_backend(&mock, BackendConfig::default());
        assert!(matches!(
            run_trials(&ctx, StrategyKind::SimpleLlm, 2, 1),
            Err(EvalError::NoSuccessfulTrials(_))
        ));
    }

    #[test]
    fn summary_table_has_rows_and_pairs() {
        let (c, t) = fixture();
        let ctx = StrategyContext::new(&c).with_truth(&t);
        let sets = vec![
            run_trials(&ctx, StrategyKind::Ideal, 20, 1).unwrap(),
            run_trials(&ctx, StrategyKind::Random, 20, 1).unwrap(),
        ];
        let summary = compare(&sets);
        assert!(summary.strategies[0].apfd.unwrap().mean >= summary.strategies[1].apfd.unwrap().mean);
        assert_eq!(summary.pairs.len(), 1);
        let text = summary.render_table();
        assert!(text.contains("ideal vs random"));
        assert_eq!(summary.to_jsonl().lines().count(), 3);
    }

    #[test]
    fn mean_sd() {
        let m = MeanSd::of(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((m.mean, m.sd, m.count), (2.0, 1.0, 3));
        assert!(MeanSd::of(&[]).is_none());
    }
}
