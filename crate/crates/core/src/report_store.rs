//! Report corpora and ground-truth bug labels.
//!
//! Both files are line-delimited JSON records. A corpus line looks like
//! `{"id":1,"description":"Click the novel list. Nothing is shown."}` and a
//! ground-truth line like `{"report_id":1,"bug_id":"B1"}`. Blank lines are
//! ignored. Any invalid record rejects the whole file.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type ReportId = u64;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate report id {id}")]
    DuplicateId { line: usize, id: ReportId },
    #[error("line {line}: report {id} has an empty description")]
    EmptyDescription { line: usize, id: ReportId },
    #[error("line {line}: report id must be positive")]
    ZeroId { line: usize },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("line {line}: ground truth refers to unknown report {id}")]
    UnknownReport { line: usize, id: ReportId },
    #[error("line {line}: duplicate ground-truth entry for report {id}")]
    DuplicateLabel { line: usize, id: ReportId },
    #[error("report {0} unlabeled")]
    Unlabeled(ReportId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub id: ReportId,
    pub description: String,
}

impl Report {
    pub fn new(id: ReportId, description: impl Into<String>) -> Self {
        Self {
            id,
            description: description.into(),
        }
    }
}

/// An ordered, validated set of reports for one application.
///
/// Order is significant: it fixes the enumeration order inside prompts and
/// the tie-break order used by the baselines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub app_name: String,
    reports: Vec<Report>,
}

impl Corpus {
    /// Builds a corpus from in-memory reports, applying the same checks as
    /// [`load_corpus`]. Line numbers in errors are 1-based positions.
    pub fn new(app_name: impl Into<String>, reports: Vec<Report>) -> Result<Self, StoreError> {
        if reports.is_empty() {
            return Err(StoreError::EmptyCorpus);
        }
        let mut seen = HashSet::new();
        for (idx, report) in reports.iter().enumerate() {
            validate_report(report, idx + 1, &mut seen)?;
        }
        Ok(Self {
            app_name: app_name.into(),
            reports,
        })
    }

    pub fn reports(&self) -> &[Report] {
        &self.reports
    }

    pub fn len(&self) -> usize {
        self.reports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reports.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ReportId> + '_ {
        self.reports.iter().map(|r| r.id)
    }

    pub fn id_set(&self) -> BTreeSet<ReportId> {
        self.ids().collect()
    }

    pub fn contains(&self, id: ReportId) -> bool {
        self.reports.iter().any(|r| r.id == id)
    }

    pub fn get(&self, id: ReportId) -> Option<&Report> {
        self.reports.iter().find(|r| r.id == id)
    }

    /// Serializes the corpus in the line-delimited format read by [`load_corpus`].
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for report in &self.reports {
            out.push_str(&serde_json::to_string(report).expect("report serializes"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), StoreError> {
        write_file(path, self.to_jsonl().as_bytes())
    }
}

fn validate_report(report: &Report, line: usize, seen: &mut HashSet<ReportId>) -> Result<(), StoreError> {
    if report.id == 0 {
        return Err(StoreError::ZeroId { line });
    }
    if report.description.trim().is_empty() {
        return Err(StoreError::EmptyDescription { line, id: report.id });
    }
    if !seen.insert(report.id) {
        return Err(StoreError::DuplicateId { line, id: report.id });
    }
    Ok(())
}

/// Report-to-bug mapping used only for evaluation. Each report reveals
/// exactly one bug.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    entries: HashMap<ReportId, String>,
}

impl GroundTruth {
    /// Builds and validates a mapping against `corpus`.
    pub fn new(corpus: &Corpus, labels: impl IntoIterator<Item = (ReportId, String)>) -> Result<Self, StoreError> {
        let mut entries = HashMap::new();
        for (idx, (id, bug)) in labels.into_iter().enumerate() {
            insert_label(corpus, &mut entries, idx + 1, id, bug)?;
        }
        finish_truth(corpus, entries)
    }

    pub fn bug_of(&self, id: ReportId) -> Option<&str> {
        self.entries.get(&id).map(String::as_str)
    }

    /// Number of distinct bugs (M).
    pub fn bug_count(&self) -> usize {
        self.entries.values().collect::<HashSet<_>>().len()
    }

    /// Number of labelled reports (n).
    pub fn report_count(&self) -> usize {
        self.entries.len()
    }

    pub fn report_ids(&self) -> BTreeSet<ReportId> {
        self.entries.keys().copied().collect()
    }
}

fn insert_label(
    corpus: &Corpus,
    entries: &mut HashMap<ReportId, String>,
    line: usize,
    id: ReportId,
    bug: String,
) -> Result<(), StoreError> {
    if !corpus.contains(id) {
        return Err(StoreError::UnknownReport { line, id });
    }
    if entries.insert(id, bug).is_some() {
        return Err(StoreError::DuplicateLabel { line, id });
    }
    Ok(())
}

fn finish_truth(corpus: &Corpus, entries: HashMap<ReportId, String>) -> Result<GroundTruth, StoreError> {
    if let Some(missing) = corpus.ids().find(|id| !entries.contains_key(id)) {
        return Err(StoreError::Unlabeled(missing));
    }
    Ok(GroundTruth { entries })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TruthRecord {
    report_id: ReportId,
    bug_id: String,
}

fn read_file(path: &Path) -> Result<String, StoreError> {
    fs::read_to_string(path).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    fs::File::create(path)
        .and_then(|mut f| f.write_all(bytes))
        .map_err(|source| StoreError::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Iterates non-blank lines with their 1-based line numbers.
fn records(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

pub fn parse_corpus(app_name: &str, text: &str) -> Result<Corpus, StoreError> {
    let mut reports = Vec::new();
    let mut seen = HashSet::new();
    for (line, raw) in records(text) {
        let report: Report = serde_json::from_str(raw).map_err(|e| StoreError::Malformed {
            line,
            message: e.to_string(),
        })?;
        validate_report(&report, line, &mut seen)?;
        reports.push(report);
    }
    if reports.is_empty() {
        return Err(StoreError::EmptyCorpus);
    }
    Ok(Corpus {
        app_name: app_name.to_string(),
        reports,
    })
}

/// Loads a corpus file. The application name is taken from the file stem.
pub fn load_corpus(path: &Path) -> Result<Corpus, StoreError> {
    let text = read_file(path)?;
    let app_name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_corpus(&app_name, &text)
}

pub fn parse_ground_truth(text: &str, corpus: &Corpus) -> Result<GroundTruth, StoreError> {
    let mut entries = HashMap::new();
    for (line, raw) in records(text) {
        let rec: TruthRecord = serde_json::from_str(raw).map_err(|e| StoreError::Malformed {
            line,
            message: e.to_string(),
        })?;
        insert_label(corpus, &mut entries, line, rec.report_id, rec.bug_id)?;
    }
    finish_truth(corpus, entries)
}

pub fn load_ground_truth(path: &Path, corpus: &Corpus) -> Result<GroundTruth, StoreError> {
    parse_ground_truth(&read_file(path)?, corpus)
}
