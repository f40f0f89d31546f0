//! Prioritized sequences and their on-disk form.
//!
//! A sequence file is line-delimited JSON. The first record is a header:
//!
//! ```text
//! {"strategy":"llmprior","seed":null,"prompt_tokens":800,"response_tokens":135,"incomplete":false}
//! {"rank":1,"report_id":1}
//! {"rank":2,"report_id":3}
//! ```
//!
//! Token fields are `null` for strategies that make no model call.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::ChatExchange;
use crate::report_store::{write_file, ReportId, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StrategyKind {
    #[serde(rename = "llmprior")]
    LlmPrior,
    #[serde(rename = "ideal")]
    Ideal,
    #[serde(rename = "random")]
    Random,
    #[serde(rename = "direct")]
    DirectLlm,
    #[serde(rename = "simple")]
    SimpleLlm,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::LlmPrior,
        StrategyKind::Ideal,
        StrategyKind::Random,
        StrategyKind::DirectLlm,
        StrategyKind::SimpleLlm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::LlmPrior => "llmprior",
            StrategyKind::Ideal => "ideal",
            StrategyKind::Random => "random",
            StrategyKind::DirectLlm => "direct",
            StrategyKind::SimpleLlm => "simple",
        }
    }

    pub fn needs_backend(self) -> bool {
        matches!(
            self,
            StrategyKind::LlmPrior | StrategyKind::DirectLlm | StrategyKind::SimpleLlm
        )
    }

    pub fn needs_truth(self) -> bool {
        self == StrategyKind::Ideal
    }

    pub fn needs_seed(self) -> bool {
        self == StrategyKind::Random
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "llmprior" | "llm-prior" | "cluster" => Ok(StrategyKind::LlmPrior),
            "ideal" => Ok(StrategyKind::Ideal),
            "random" => Ok(StrategyKind::Random),
            "direct" | "directllm" | "direct-llm" => Ok(StrategyKind::DirectLlm),
            "simple" | "simplellm" | "simple-llm" => Ok(StrategyKind::SimpleLlm),
            _ => Err(format!(
                "unknown strategy '{s}' (expected one of llmprior, ideal, random, direct, simple)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrioritizedSequence {
    pub order: Vec<ReportId>,
    pub strategy: StrategyKind,
    pub seed: Option<u64>,
    pub exchange: Option<ChatExchange>,
    /// Reports were missing from a model answer and appended at the tail.
    pub incomplete: bool,
}

impl PrioritizedSequence {
    pub fn new(order: Vec<ReportId>, strategy: StrategyKind) -> Self {
        Self {
            order,
            strategy,
            seed: None,
            exchange: None,
            incomplete: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_exchange(mut self, exchange: ChatExchange) -> Self {
        self.exchange = Some(exchange);
        self
    }

    pub fn to_jsonl(&self) -> String {
        let header = SequenceHeader {
            strategy: self.strategy,
            seed: self.seed,
            prompt_tokens: self.exchange.as_ref().map(|e| e.prompt_tokens),
            response_tokens: self.exchange.as_ref().map(|e| e.response_tokens),
            incomplete: self.incomplete,
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for (i, id) in self.order.iter().enumerate() {
            let line = RankRecord {
                rank: i + 1,
                report_id: *id,
            };
            out.push_str(&serde_json::to_string(&line).expect("rank serializes"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), StoreError> {
        write_file(path, self.to_jsonl().as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceHeader {
    pub strategy: StrategyKind,
    pub seed: Option<u64>,
    pub prompt_tokens: Option<u64>,
    pub response_tokens: Option<u64>,
    pub incomplete: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RankRecord {
    rank: usize,
    report_id: ReportId,
}

/// Contents of a sequence file. Report ids are kept as written, so a file
/// with repeats or gaps can still be loaded and diagnosed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceFile {
    pub header: SequenceHeader,
    pub order: Vec<ReportId>,
}

#[derive(Debug, Error)]
pub enum SequenceError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("sequence file has no header record")]
    MissingHeader,
}

pub fn parse_sequence(text: &str) -> Result<SequenceFile, SequenceError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, hraw) = lines.next().ok_or(SequenceError::MissingHeader)?;
    let header: SequenceHeader = serde_json::from_str(hraw).map_err(|e| SequenceError::Malformed {
        line: hline,
        message: format!("bad header: {e}"),
    })?;
    let mut order = Vec::new();
    for (line, raw) in lines {
        let rec: RankRecord = serde_json::from_str(raw).map_err(|e| SequenceError::Malformed {
            line,
            message: e.to_string(),
        })?;
        if rec.rank != order.len() + 1 {
            return Err(SequenceError::Malformed {
                line,
                message: format!("expected rank {}, found {}", order.len() + 1, rec.rank),
            });
        }
        order.push(rec.report_id);
    }
    Ok(SequenceFile { header, order })
}

pub fn load_sequence(path: &Path) -> Result<SequenceFile, SequenceError> {
    let text = std::fs::read_to_string(path).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_sequence(&text)
}

/// Differences between a sequence and the report set it should permute.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PermutationDiff {
    pub missing: Vec<ReportId>,
    pub duplicated: Vec<ReportId>,
    pub unknown: Vec<ReportId>,
}

impl PermutationDiff {
    pub fn is_empty(&self) -> bool {
        self.missing.is_empty() && self.duplicated.is_empty() && self.unknown.is_empty()
    }
}

impl fmt::Display for PermutationDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        let list = |ids: &[ReportId]| ids.iter().map(ReportId::to_string).collect::<Vec<_>>().join(", ");
        if !self.missing.is_empty() {
            parts.push(format!("missing report(s) {}", list(&self.missing)));
        }
        if !self.duplicated.is_empty() {
            parts.push(format!("duplicate report(s) {}", list(&self.duplicated)));
        }
        if !self.unknown.is_empty() {
            parts.push(format!("unknown report(s) {}", list(&self.unknown)));
        }
        f.write_str(&parts.join("; "))
    }
}

pub fn permutation_diff(order: &[ReportId], expected: &BTreeSet<ReportId>) -> PermutationDiff {
    let mut seen = HashSet::new();
    let mut diff = PermutationDiff::default();
    for id in order {
        if !expected.contains(id) {
            if !diff.unknown.contains(id) {
                diff.unknown.push(*id);
            }
        } else if !seen.insert(*id) && !diff.duplicated.contains(id) {
            diff.duplicated.push(*id);
        }
    }
    diff.missing = expected.iter().copied().filter(|id| !seen.contains(id)).collect();
    diff
}
