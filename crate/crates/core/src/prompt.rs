//! Prompt assembly for the clustering request and the two direct
//! prioritization variants.
//!
//! Templates are plain text with a single `{{reports}}` placeholder that is
//! replaced by one `Report <id>: <description>` line per report, in corpus
//! order. The shipped defaults live in `templates/` and can be overridden
//! at runtime with [`Template::from_file`].

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::report_store::Corpus;

pub const REPORTS_PLACEHOLDER: &str = "{{reports}}";

const CLUSTER_TEMPLATE: &str = include_str!("../templates/cluster.txt");
const DIRECT_TEMPLATE: &str = include_str!("../templates/direct.txt");
const SIMPLE_TEMPLATE: &str = include_str!("../templates/simple.txt");

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("cannot build a prompt for an empty corpus")]
    EmptyCorpus,
    #[error("template must contain the {REPORTS_PLACEHOLDER} placeholder exactly once (found {0})")]
    Placeholder(usize),
    #[error("cannot read template {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptVariant {
    /// Hierarchical clustering request in the LEVEL tree format.
    Cluster,
    /// Same framing as `Cluster`, but asks for a numbered sequence.
    Direct,
    /// Report text plus a bare prioritization request.
    Simple,
}

impl PromptVariant {
    pub fn default_template(self) -> Template {
        let text = match self {
            PromptVariant::Cluster => CLUSTER_TEMPLATE,
            PromptVariant::Direct => DIRECT_TEMPLATE,
            PromptVariant::Simple => SIMPLE_TEMPLATE,
        };
        Template { text: text.to_string() }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PromptVariant::Cluster => "cluster",
            PromptVariant::Direct => "direct",
            PromptVariant::Simple => "simple",
        }
    }
}

impl fmt::Display for PromptVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cluster" => Ok(PromptVariant::Cluster),
            "direct" => Ok(PromptVariant::Direct),
            "simple" => Ok(PromptVariant::Simple),
            other => Err(format!("unknown prompt variant '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    text: String,
}

impl Template {
    pub fn new(text: impl Into<String>) -> Result<Self, PromptError> {
        let text = text.into();
        let count = text.matches(REPORTS_PLACEHOLDER).count();
        if count != 1 {
            return Err(PromptError::Placeholder(count));
        }
        Ok(Self { text })
    }

    pub fn from_file(path: &Path) -> Result<Self, PromptError> {
        let text = std::fs::read_to_string(path).map_err(|source| PromptError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::new(text)
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn render(&self, corpus: &Corpus) -> Result<String, PromptError> {
        if corpus.is_empty() {
            return Err(PromptError::EmptyCorpus);
        }
        Ok(self.text.replacen(REPORTS_PLACEHOLDER, &report_block(corpus), 1))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptText {
    pub text: String,
    pub report_count: usize,
    pub variant: PromptVariant,
}

/// One `Report <id>: <description>` line per report, without a trailing newline.
pub fn report_block(corpus: &Corpus) -> String {
    corpus
        .reports()
        .iter()
        .map(|r| format!("Report {}: {}", r.id, r.description))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn build_prompt(corpus: &Corpus, variant: PromptVariant) -> Result<PromptText, PromptError> {
    build_prompt_with(corpus, variant, &variant.default_template())
}

pub fn build_prompt_with(
    corpus: &Corpus,
    variant: PromptVariant,
    template: &Template,
) -> Result<PromptText, PromptError> {
    Ok(PromptText {
        text: template.render(corpus)?,
        report_count: corpus.len(),
        variant,
    })
}
