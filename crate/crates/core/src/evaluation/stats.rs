//! Wilcoxon signed-rank test and Cohen's d.
//!
//! Wilcoxon conventions:
//! - zero differences are dropped before ranking;
//! - tied absolute differences share the average of their ranks;
//! - the statistic is W+, the rank sum of positive differences;
//! - with at most 25 non-zero pairs the p-value is exact, from the full null
//!   distribution of W+ over all sign assignments of the (tied) ranks;
//! - above 25 pairs the normal approximation is used, with tie-corrected
//!   variance and a 0.5 continuity correction;
//! - p-values are two-sided: `min(1, 2 * min(P(W+ <= w), P(W+ >= w)))`.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::EvalError;

pub const EXACT_MAX_PAIRS: usize = 25;
pub const MIN_PAIRS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WilcoxonMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    pub p_value: f64,
    /// W+ (may be a half-integer under ties).
    pub statistic: f64,
    /// Pairs left after dropping zero differences.
    pub n: usize,
    pub method: WilcoxonMethod,
}

/// Ranks of `|d|`, doubled so tied averages stay integral.
pub(crate) fn doubled_ranks(abs_diffs: &[f64]) -> Vec<u64> {
    let mut idx: Vec<usize> = (0..abs_diffs.len()).collect();
    idx.sort_by(|&a, &b| abs_diffs[a].total_cmp(&abs_diffs[b]));
    let mut ranks = vec![0u64; abs_diffs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && abs_diffs[idx[j + 1]] == abs_diffs[idx[i]] {
            j += 1;
        }
        // positions i..=j hold 1-based ranks i+1..=j+1; doubled average is i+j+2
        for &k in &idx[i..=j] {
            ranks[k] = (i + j + 2) as u64;
        }
        i = j + 1;
    }
    ranks
}

/// Number of sign assignments reaching each doubled rank sum.
fn null_counts(ranks: &[u64]) -> Vec<u64> {
    let total: u64 = ranks.iter().sum();
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

pub fn wilcoxon_signed_rank(pairs: &[(f64, f64)]) -> Result<WilcoxonResult, EvalError> {
    let diffs: Vec<f64> = pairs.iter().map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(EvalError::NonFinite);
    }
    if diffs.is_empty() {
        return Err(EvalError::NoNonZeroDifferences);
    }
    if diffs.len() < MIN_PAIRS {
        return Err(EvalError::TooFewPairs {
            found: diffs.len(),
            needed: MIN_PAIRS,
        });
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = doubled_ranks(&abs);
    let w2: u64 = ranks
        .iter()
        .zip(&diffs)
        .filter(|(_, d)| **d > 0.0)
        .map(|(r, _)| *r)
        .sum();
    let n = diffs.len();

    if n <= EXACT_MAX_PAIRS {
        let counts = null_counts(&ranks);
        let all = (1u64 << n) as f64;
        let lower: u64 = counts[..=w2 as usize].iter().sum();
        let upper: u64 = counts[w2 as usize..].iter().sum();
        let p = (2.0 * lower.min(upper) as f64 / all).min(1.0);
        return Ok(WilcoxonResult {
            p_value: p,
            statistic: w2 as f64 / 2.0,
            n,
            method: WilcoxonMethod::Exact,
        });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = tie_sizes(&abs).map(|t| t * t * t - t).sum::<f64>() / 48.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
    let w = w2 as f64 / 2.0;
    let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
    Ok(WilcoxonResult {
        p_value: erfc(z / std::f64::consts::SQRT_2).min(1.0),
        statistic: w,
        n,
        method: WilcoxonMethod::Normal,
    })
}

fn tie_sizes(abs: &[f64]) -> impl Iterator<Item = f64> {
    let mut sorted = abs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut sizes = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        sizes.push((j - i + 1) as f64);
        i = j + 1;
    }
    sizes.into_iter()
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// `(mean(a) - mean(b)) / s_pooled` with
/// `s_pooled = sqrt(((na-1) var(a) + (nb-1) var(b)) / (na + nb - 2))`
/// and sample variances (n-1 denominators).
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(EvalError::TooFewSamples);
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = (((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0)).sqrt();
    if pooled == 0.0 {
        return Err(EvalError::ZeroVariance);
    }
    if !pooled.is_finite() {
        return Err(EvalError::NonFinite);
    }
    Ok((ma - mb) / pooled)
}
