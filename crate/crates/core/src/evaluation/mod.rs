//! APFD/TPR scoring, repeated trials and significance tests.

mod metrics;
mod stats;
mod trials;

use thiserror::Error;

use crate::sequence::PermutationDiff;

pub use metrics::{apfd, tpr, tpr_from_counts, ApfdResult, TprResult};
pub use stats::{cohens_d, wilcoxon_signed_rank, WilcoxonMethod, WilcoxonResult, EXACT_MAX_PAIRS, MIN_PAIRS};
pub use trials::{
    compare, compare_pair, run_trials, summarize, ComparisonSummary, MeanSd, PairComparison, StrategySummary,
    TrialRecord, TrialSet, DEFAULT_REPETITIONS,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("sequence is not a permutation of the labelled reports: {0}")]
    NotPermutation(PermutationDiff),
    #[error("report count must be positive")]
    NoReports,
    #[error("no non-zero differences")]
    NoNonZeroDifferences,
    #[error("need at least {needed} non-zero differences, found {found}")]
    TooFewPairs { found: usize, needed: usize },
    #[error("need at least two samples per group")]
    TooFewSamples,
    #[error("zero variance")]
    ZeroVariance,
    #[error("non-finite input")]
    NonFinite,
    #[error("repetitions must be at least 1")]
    NoRepetitions,
    #[error("trials require ground truth")]
    NoTruth,
    #[error("no successful trials (first error: {0})")]
    NoSuccessfulTrials(String),
}
