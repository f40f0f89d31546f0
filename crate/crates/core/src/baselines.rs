//! Comparison strategies: Ideal, Random and the two direct-prompt variants.

use std::collections::HashSet;
use std::sync::OnceLock;

use log::warn;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use regex::Regex;
use thiserror::Error;

use crate::gateway::{BackendConfig, ChatBackend, GatewayError};
use crate::prompt::{build_prompt, PromptError, PromptVariant};
use crate::report_store::{Corpus, GroundTruth, ReportId};
use crate::sequence::{PrioritizedSequence, StrategyKind};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("no sequence found in model response")]
    NoSequence,
    #[error("variant {0} does not produce a direct sequence")]
    WrongVariant(PromptVariant),
}

/// One representative per bug first (earliest report in corpus order, bugs
/// ordered by first appearance), then the remaining reports in corpus order.
pub fn ideal_sequence(corpus: &Corpus, truth: &GroundTruth) -> PrioritizedSequence {
    let mut seen_bugs = HashSet::new();
    let (mut head, mut tail) = (Vec::new(), Vec::new());
    for id in corpus.ids() {
        let bug = truth.bug_of(id).expect("ground truth covers the corpus");
        if seen_bugs.insert(bug) {
            head.push(id);
        } else {
            tail.push(id);
        }
    }
    head.extend(tail);
    PrioritizedSequence::new(head, StrategyKind::Ideal)
}

/// Uniform integer in `0..bound` by rejection sampling on 64-bit draws.
fn uniform_below(rng: &mut ChaCha8Rng, bound: u64) -> u64 {
    debug_assert!(bound > 0);
    let limit = u64::MAX - (u64::MAX % bound);
    loop {
        let v = rng.next_u64();
        if v < limit {
            return v % bound;
        }
    }
}

/// Seeded uniform permutation of `ids`.
///
/// Generator: ChaCha8 seeded with `ChaCha8Rng::seed_from_u64(seed)`.
/// Shuffle: Fisher-Yates from the last index down, `j = uniform_below(i + 1)`
/// where `uniform_below(b)` draws `next_u64()` until the value falls below
/// `u64::MAX - u64::MAX % b` and returns it modulo `b`.
pub fn seeded_permutation(ids: &[ReportId], seed: u64) -> Vec<ReportId> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = ids.to_vec();
    for i in (1..out.len()).rev() {
        let j = uniform_below(&mut rng, i as u64 + 1) as usize;
        out.swap(i, j);
    }
    out
}

pub fn random_sequence(corpus: &Corpus, seed: u64) -> PrioritizedSequence {
    let ids: Vec<ReportId> = corpus.ids().collect();
    PrioritizedSequence::new(seeded_permutation(&ids, seed), StrategyKind::Random).with_seed(seed)
}

fn report_mention() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\breport\s*#?\s*(\d+)").expect("valid regex"))
}

/// Text after the last line announcing a sequence ("Prioritization
/// Sequence:", "Prioritized sequence of reports:" ...), or the whole text.
pub fn sequence_section(text: &str) -> &str {
    let mut start = 0;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let t = line.trim().trim_matches(|c| c == '*' || c == '#').trim().to_lowercase();
        if t.contains("sequence") && t.ends_with(':') {
            start = offset + line.len();
        }
        offset += line.len();
    }
    &text[start..]
}

/// Ordered `Report <n>` mentions in the sequence section.
pub fn extract_mentions(text: &str) -> Vec<ReportId> {
    report_mention()
        .captures_iter(sequence_section(text))
        .filter_map(|c| c[1].parse().ok())
        .collect()
}

/// Turns a direct-prioritization answer into a full sequence. Unknown ids
/// are dropped, repeats keep their first position, and unmentioned reports
/// are appended in corpus order with `incomplete` set.
pub fn sequence_from_answer(
    corpus: &Corpus,
    answer: &str,
    strategy: StrategyKind,
) -> Result<PrioritizedSequence, BaselineError> {
    let mentions = extract_mentions(answer);
    if mentions.is_empty() {
        return Err(BaselineError::NoSequence);
    }
    let mut seen = HashSet::new();
    let mut order = Vec::with_capacity(corpus.len());
    for id in mentions {
        if !corpus.contains(id) {
            warn!("model answer mentions unknown report {id}; ignored");
            continue;
        }
        if seen.insert(id) {
            order.push(id);
        }
    }
    let before = order.len();
    order.extend(corpus.ids().filter(|id| !seen.contains(id)));
    let mut seq = PrioritizedSequence::new(order, strategy);
    seq.incomplete = seq.order.len() > before;
    Ok(seq)
}

pub fn variant_strategy(variant: PromptVariant) -> Result<StrategyKind, BaselineError> {
    match variant {
        PromptVariant::Direct => Ok(StrategyKind::DirectLlm),
        PromptVariant::Simple => Ok(StrategyKind::SimpleLlm),
        PromptVariant::Cluster => Err(BaselineError::WrongVariant(variant)),
    }
}

/// Builds the variant prompt, asks the backend, and extracts the sequence.
pub fn llm_direct_sequence(
    corpus: &Corpus,
    backend: &dyn ChatBackend,
    config: &BackendConfig,
    variant: PromptVariant,
) -> Result<PrioritizedSequence, BaselineError> {
    let strategy = variant_strategy(variant)?;
    let prompt = build_prompt(corpus, variant)?;
    let exchange = backend.complete(&prompt, config)?;
    Ok(sequence_from_answer(corpus, &exchange.response_text, strategy)?.with_exchange(exchange))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{MockBackend, MockEntry};
    use crate::report_store::Report;

    fn corpus(n: u64) -> Corpus {
        Corpus::new("t", (1..=n).map(|i| Report::new(i, format!("r{i}"))).collect()).unwrap()
    }

    fn truth(c: &Corpus, bugs: &[&str]) -> GroundTruth {
        GroundTruth::new(c, c.ids().zip(bugs.iter().map(|b| b.to_string()))).unwrap()
    }

    #[test]
    fn ideal_examples() {
        let c = corpus(3);
        assert_eq!(ideal_sequence(&c, &truth(&c, &["A", "A", "B"])).order, vec![1, 3, 2]);
        assert_eq!(ideal_sequence(&c, &truth(&c, &["A", "B", "C"])).order, vec![1, 2, 3]);
        let c = corpus(4);
        assert_eq!(
            ideal_sequence(&c, &truth(&c, &["X", "X", "X", "Y"])).order,
            vec![1, 4, 2, 3]
        );
    }

    #[test]
    fn random_is_seeded() {
        let c = corpus(20);
        let a = random_sequence(&c, 7);
        assert_eq!(a, random_sequence(&c, 7));
        assert_ne!(a.order, random_sequence(&c, 8).order);
        assert_eq!(a.seed, Some(7));
        let mut sorted = a.order.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (1..=20).collect::<Vec<_>>());
        assert_eq!(random_sequence(&corpus(1), 3).order, vec![1]);
    }

    #[test]
    fn random_permutations_are_uniform() {
        let ids = [1, 2, 3];
        let mut counts = std::collections::HashMap::new();
        let trials = 10_000u64;
        for seed in 0..trials {
            *counts.entry(seeded_permutation(&ids, seed)).or_insert(0u32) += 1;
        }
        assert_eq!(counts.len(), 6);
        for (perm, n) in counts {
            let freq = f64::from(n) / trials as f64;
            assert!((freq - 1.0 / 6.0).abs() < 0.02, "{perm:?} {freq}");
        }
    }

    fn run(answer: &str, truncated: bool, n: u64) -> Result<PrioritizedSequence, BaselineError> {
        let mock = MockBackend::new(vec![MockEntry {
            truncated,
            ..MockEntry::new(answer)
        }])
        .unwrap();
        llm_direct_sequence(&corpus(n), &mock, &BackendConfig::default(), PromptVariant::Direct)
    }

    #[test]
    fn direct_extraction() {
        let s = run("1. Report 2\n2. Report 1\n3. Report 3", false, 3).unwrap();
        assert_eq!(s.order, vec![2, 1, 3]);
        assert!(!s.incomplete);
        assert_eq!(s.strategy, StrategyKind::DirectLlm);
        assert!(s.exchange.is_some());

        let s = run("1. Report 2\n2. Report 1", false, 3).unwrap();
        assert_eq!(s.order, vec![2, 1, 3]);
        assert!(s.incomplete);

        let err = run("I could not decide.", false, 3).unwrap_err();
        assert_eq!(err.to_string(), "no sequence found in model response");
    }

    #[test]
    fn truncated_answer_tail_is_appended() {
        let answer = "Analysis: Report 3 and Report 1 look alike.\nPrioritization Sequence:\n1. Report 4 - (Crash)\n2. Report 2 (Display)\n3.Report";
        let s = run(answer, true, 4).unwrap();
        assert_eq!(s.order, vec![4, 2, 1, 3]);
        assert!(s.incomplete);
        assert!(s.exchange.unwrap().truncated);
    }

    #[test]
    fn unknown_and_repeated_mentions() {
        let c = corpus(3);
        let s = sequence_from_answer(
            &c,
            "Report 3, Report 9, Report 3, Report 1, Report 2",
            StrategyKind::SimpleLlm,
        )
        .unwrap();
        assert_eq!(s.order, vec![3, 1, 2]);
        assert!(!s.incomplete);
    }

    #[test]
    fn cluster_variant_is_not_direct() {
        let mock = MockBackend::new(vec![MockEntry::new("Report 1")]).unwrap();
        assert!(matches!(
            llm_direct_sequence(&corpus(1), &mock, &BackendConfig::default(), PromptVariant::Cluster),
            Err(BaselineError::WrongVariant(_))
        ));
    }
}
