//! Parser for LEVEL-formatted clustering answers.
//!
//! Grammar (one category per line, everything else is skipped):
//!
//! ```text
//! line      = ws* deco* "LEVEL" ws* level sep? ws* label [arrow ws* marker ws* ids] ws*
//! deco      = "-" | "*" | "#" | "+" | "•" | ws | enum  (bold "**" / "__" and "`" are removed first)
//! enum      = digit+ ("." | ")") ws+
//! level     = digit+                                 (>= 1)
//! sep       = ":" | "：" | "." | "-"                  ("-" only when not the start of an arrow)
//! arrow     = "->" | "→"
//! marker    = ("Report" | "Reports") ws* (":" | "：")?   (case-insensitive)
//! ids       = id (("," | "，" | ";") ws* id)* "."?
//! id        = "#"? digit+
//! ```
//!
//! Nesting follows LEVEL numbers only: a LEVEL-k line is attached to the
//! most recent open LEVEL-(k-1) category. Indentation is ignored.

use std::sync::OnceLock;

use log::{debug, warn};
use regex::Regex;
use thiserror::Error;

use crate::report_store::{Corpus, ReportId};
use crate::tree::{ClusterNode, ClusterTree, UNCATEGORIZED_LABEL};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("no category lines found in response")]
    NoCategories,
    #[error("line {line}: LEVEL {level} has no enclosing LEVEL {parent} category", parent = .level - 1)]
    Orphan { line: usize, level: u32 },
    #[error("line {line}: invalid level number")]
    InvalidLevel { line: usize },
    #[error("unknown report {id} (line {line})")]
    UnknownReport { line: usize, id: ReportId },
    #[error("line {line}: cannot parse report list '{text}'")]
    BadReportList { line: usize, text: String },
}

/// One category line as lexed from the response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawClusterLine {
    pub level: u32,
    pub label: String,
    pub report_ids: Vec<ReportId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedResponse {
    pub tree: ClusterTree,
    /// Corpus reports the answer never mentioned, now under "Uncategorized".
    pub missing: Vec<ReportId>,
    pub skipped_lines: usize,
}

fn report_marker() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)(?:->|→)\s*reports?\s*[:：]?\s*(.*)$").expect("valid regex"))
}

fn list_enumerator() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\d+[.)]\s+").expect("valid regex"))
}

fn trim_bullets(s: &str) -> &str {
    s.trim_start_matches(|c: char| c.is_whitespace() || matches!(c, '-' | '*' | '#' | '+' | '•'))
}

fn strip_decoration(line: &str) -> String {
    let cleaned = line.replace("**", "").replace("__", "").replace('`', "");
    let mut text = trim_bullets(&cleaned);
    if let Some(m) = list_enumerator().find(text) {
        text = trim_bullets(&text[m.end()..]);
    }
    text.trim_end().to_string()
}

fn parse_ids(text: &str, line: usize) -> Result<Vec<ReportId>, ParseError> {
    let bad = || ParseError::BadReportList {
        line,
        text: text.to_string(),
    };
    let body = text.trim().trim_end_matches('.').trim_end();
    if body.is_empty() {
        return Err(bad());
    }
    body.split([',', '，', ';'])
        .map(|item| {
            let item = item.trim();
            let item = item.strip_prefix('#').unwrap_or(item);
            if item.is_empty() || !item.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            item.parse::<ReportId>().map_err(|_| bad())
        })
        .collect()
}

/// Lexes one line. `Ok(None)` means the line is not a category line.
pub fn lex_line(line: &str, line_no: usize) -> Result<Option<RawClusterLine>, ParseError> {
    let text = strip_decoration(line);
    let Some(rest) = text.strip_prefix("LEVEL") else {
        return Ok(None);
    };
    let rest = rest.trim_start();
    let digits_end = rest
        .char_indices()
        .find(|(_, c)| !c.is_ascii_digit())
        .map_or(rest.len(), |(i, _)| i);
    if digits_end == 0 {
        return Ok(None);
    }
    let level: u32 = rest[..digits_end]
        .parse()
        .map_err(|_| ParseError::InvalidLevel { line: line_no })?;
    if level == 0 {
        return Err(ParseError::InvalidLevel { line: line_no });
    }
    let mut rest = rest[digits_end..].trim_start();
    if let Some(r) = rest
        .strip_prefix(':')
        .or_else(|| rest.strip_prefix('：'))
        .or_else(|| rest.strip_prefix('.'))
    {
        rest = r;
    } else if rest.starts_with('-') && !rest.starts_with("->") {
        rest = &rest[1..];
    }

    let (label, report_ids) = match report_marker().captures(rest) {
        Some(caps) => {
            let whole = caps.get(0).expect("match");
            let ids = parse_ids(caps.get(1).map_or("", |m| m.as_str()), line_no)?;
            (&rest[..whole.start()], ids)
        }
        None => (rest, Vec::new()),
    };
    let label = label.trim().trim_end_matches([':', '：']).trim_end();
    Ok(Some(RawClusterLine {
        level,
        label: label.to_string(),
        report_ids,
    }))
}

struct Draft {
    label: String,
    ids: Vec<ReportId>,
    children: Vec<usize>,
}

fn assemble(idx: usize, drafts: &[Draft]) -> ClusterNode {
    let d = &drafts[idx];
    let mut children: Vec<ClusterNode> = d.ids.iter().copied().map(ClusterNode::leaf).collect();
    children.extend(d.children.iter().map(|&c| assemble(c, drafts)));
    ClusterNode::category(d.label.clone(), children)
}

/// Builds a cluster tree from a model answer, validating report ids
/// against `corpus`. Reports the answer leaves out are collected under a
/// trailing "Uncategorized" category.
pub fn parse_response(text: &str, corpus: &Corpus) -> Result<ParsedResponse, ParseError> {
    let mut drafts: Vec<Draft> = Vec::new();
    let mut top: Vec<usize> = Vec::new();
    let mut open: Vec<usize> = Vec::new();
    let mut skipped = 0;

    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let Some(raw) = lex_line(line, line_no)? else {
            if !line.trim().is_empty() {
                debug!("skipping non-category line {line_no}");
                skipped += 1;
            }
            continue;
        };
        if let Some(&id) = raw.report_ids.iter().find(|id| !corpus.contains(**id)) {
            return Err(ParseError::UnknownReport { line: line_no, id });
        }
        let depth = raw.level as usize;
        if open.len() < depth - 1 {
            return Err(ParseError::Orphan {
                line: line_no,
                level: raw.level,
            });
        }
        open.truncate(depth - 1);
        let idx = drafts.len();
        drafts.push(Draft {
            label: raw.label,
            ids: raw.report_ids,
            children: Vec::new(),
        });
        match open.last() {
            Some(&parent) => drafts[parent].children.push(idx),
            None => top.push(idx),
        }
        open.push(idx);
    }

    if drafts.is_empty() {
        return Err(ParseError::NoCategories);
    }
    let mut categories: Vec<ClusterNode> = top.iter().map(|&i| assemble(i, &drafts)).collect();

    let mentioned: std::collections::HashSet<ReportId> = drafts.iter().flat_map(|d| d.ids.iter().copied()).collect();
    let missing: Vec<ReportId> = corpus.ids().filter(|id| !mentioned.contains(id)).collect();
    if !missing.is_empty() {
        warn!(
            "{} report(s) absent from the clustering answer, placed under '{UNCATEGORIZED_LABEL}': {:?}",
            missing.len(),
            missing
        );
        categories.push(ClusterNode::cluster(UNCATEGORIZED_LABEL, missing.iter().copied()));
    }

    Ok(ParsedResponse {
        tree: ClusterTree::new(categories),
        missing,
        skipped_lines: skipped,
    })
}

/// Canonical LEVEL rendering: two spaces of indent per level below 1,
/// `", "` between report ids, one line per category, trailing newline.
///
/// Leaf children are listed on their category's line, so any leaves that
/// follow a sub-category in child order move ahead of it. Leaves hanging
/// directly off the root are emitted under an "Uncategorized" line.
pub fn render_tree(tree: &ClusterTree) -> String {
    let mut out = String::new();
    for child in tree.root.categories() {
        render_node(child, 1, &mut out);
    }
    let loose: Vec<ReportId> = tree.root.direct_reports().collect();
    if !loose.is_empty() {
        render_line(UNCATEGORIZED_LABEL, &loose, 1, &mut out);
    }
    out
}

fn render_node(node: &ClusterNode, level: u32, out: &mut String) {
    let ids: Vec<ReportId> = node.direct_reports().collect();
    render_line(&node.label, &ids, level, out);
    for child in node.categories() {
        render_node(child, level + 1, out);
    }
}

fn render_line(label: &str, ids: &[ReportId], level: u32, out: &mut String) {
    out.push_str(&"  ".repeat(level as usize - 1));
    out.push_str(&format!("LEVEL {level}:"));
    if !label.is_empty() {
        out.push(' ');
        out.push_str(label);
    }
    if !ids.is_empty() {
        let list = ids.iter().map(ReportId::to_string).collect::<Vec<_>>().join(", ");
        out.push_str(" -> Report: ");
        out.push_str(&list);
    }
    out.push('\n');
}
