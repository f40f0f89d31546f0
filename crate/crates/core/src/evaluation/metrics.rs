use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::gateway::ChatExchange;
use crate::report_store::{GroundTruth, ReportId};
use crate::sequence::permutation_diff;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApfdResult {
    pub value: f64,
    pub n: usize,
    pub m: usize,
    /// 1-based rank of the first report of each bug, in discovery order.
    pub first_hit_indices: Vec<usize>,
}

impl ApfdResult {
    pub fn from_hits(n: usize, first_hit_indices: Vec<usize>) -> Self {
        let m = first_hit_indices.len();
        let sum: u128 = first_hit_indices.iter().map(|&t| t as u128).sum();
        // Over the common denominator 2nm, so the only rounding is one division.
        let (n128, m128) = (n as u128, m as u128);
        let num = 2 * n128 * m128 + m128 - 2 * sum;
        let value = num as f64 / (2 * n128 * m128) as f64;
        Self {
            value,
            n,
            m,
            first_hit_indices,
        }
    }

    /// Recomputes the score from the stored fields.
    pub fn recompute(&self) -> f64 {
        Self::from_hits(self.n, self.first_hit_indices.clone()).value
    }
}

/// APFD of `order`, which must be a permutation of the labelled reports.
pub fn apfd(order: &[ReportId], truth: &GroundTruth) -> Result<ApfdResult, EvalError> {
    let diff = permutation_diff(order, &truth.report_ids());
    if !diff.is_empty() {
        return Err(EvalError::NotPermutation(diff));
    }
    let mut revealed = HashSet::new();
    let hits = order
        .iter()
        .enumerate()
        .filter(|(_, id)| revealed.insert(truth.bug_of(**id).expect("checked above")))
        .map(|(i, _)| i + 1)
        .collect();
    Ok(ApfdResult::from_hits(order.len(), hits))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TprResult {
    pub value: f64,
    pub prompt_tokens: u64,
    pub response_tokens: u64,
    pub n: usize,
}

/// Tokens per report: `(prompt + response) / n`.
pub fn tpr(exchange: &ChatExchange, n: usize) -> Result<TprResult, EvalError> {
    tpr_from_counts(exchange.prompt_tokens, exchange.response_tokens, n)
}

pub fn tpr_from_counts(prompt_tokens: u64, response_tokens: u64, n: usize) -> Result<TprResult, EvalError> {
    if n == 0 {
        return Err(EvalError::NoReports);
    }
    Ok(TprResult {
        value: (prompt_tokens + response_tokens) as f64 / n as f64,
        prompt_tokens,
        response_tokens,
        n,
    })
}
