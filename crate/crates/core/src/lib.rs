//! Cluster-based prioritization of crowdsourced test reports.
//!
//! A chat-completion model groups the reports into a LEVEL-formatted
//! category tree ([`prompt`], [`gateway`], [`parser`]); a least-visited
//! recurrent selection over that tree ([`prioritizer`]) interleaves the
//! clusters into a review order. [`baselines`] and [`evaluation`] provide
//! the comparison strategies, APFD/TPR scoring and significance tests.

pub mod baselines;
pub mod cli;
pub mod evaluation;
pub mod gateway;
pub mod parser;
pub mod pipeline;
pub mod prioritizer;
pub mod prompt;
pub mod report_store;
pub mod sequence;
pub mod tree;

pub use baselines::{ideal_sequence, llm_direct_sequence, random_sequence};
pub use evaluation::{apfd, cohens_d, run_trials, tpr, wilcoxon_signed_rank};
pub use gateway::{BackendConfig, ChatBackend, ChatExchange, HttpBackend, MockBackend, MockEntry};
pub use parser::{parse_response, render_tree};
pub use prioritizer::{deduplicate, generate_sequence, select_report, update_status};
pub use prompt::{build_prompt, PromptText, PromptVariant};
pub use report_store::{load_corpus, load_ground_truth, Corpus, GroundTruth, Report, ReportId};
pub use sequence::{PrioritizedSequence, StrategyKind};
pub use tree::{ClusterNode, ClusterTree};
