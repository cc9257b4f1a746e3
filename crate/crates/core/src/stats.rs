//! Statistical kernels: Jensen-Shannon divergence, ROC AUC, Pearson
//! correlation and nucleus (top-p) extraction.
//!
//! All reductions run in `f64`, whatever the storage precision of the inputs.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Distribution, TokenId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("ROC AUC needs both classes (positives: {positives}, negatives: {negatives})")]
    DegenerateLabels { positives: usize, negatives: usize },
    #[error("zero variance")]
    DegenerateVariance,
    #[error("need at least {needed} paired values, got {got}")]
    TooFewValues { needed: usize, got: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("nucleus threshold must lie in (0, 1], got {0}")]
    BadThreshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredSample {
    pub score: f64,
    pub label: Label,
}

impl ScoredSample {
    pub fn new(score: f64, positive: bool) -> Self {
        let label = if positive {
            Label::Positive
        } else {
            Label::Negative
        };
        Self { score, label }
    }

    pub fn is_positive(&self) -> bool {
        self.label == Label::Positive
    }
}

fn kl_term(p: f64, m: f64) -> f64 {
    if p > 0.0 {
        p * (p / m).log2()
    } else {
        0.0
    }
}

/// Base-2 Jensen-Shannon divergence between two probability vectors, in `[0, 1]`.
pub fn jsd(p: &[f64], q: &[f64]) -> Result<f64, StatsError> {
    if p.len() != q.len() {
        return Err(StatsError::DimensionMismatch(p.len(), q.len()));
    }
    let mut kl_p = 0.0;
    let mut kl_q = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let m = 0.5 * (a + b);
        kl_p += kl_term(a, m);
        kl_q += kl_term(b, m);
    }
    Ok((0.5 * kl_p + 0.5 * kl_q).clamp(0.0, 1.0))
}

pub fn jsd_distributions(p: &Distribution, q: &Distribution) -> Result<f64, StatsError> {
    jsd(&p.probs(), &q.probs())
}

/// Mann-Whitney AUC: the fraction of (positive, negative) pairs ranked
/// correctly, ties counting one half.
///
/// Pair counts are accumulated exactly in half-units, so the result equals
/// brute-force pair enumeration bit for bit.
pub fn roc_auc(samples: &[ScoredSample]) -> Result<f64, StatsError> {
    if let Some(i) = samples.iter().position(|s| !s.score.is_finite()) {
        return Err(StatsError::NonFinite(i));
    }
    let positives = samples.iter().filter(|s| s.is_positive()).count();
    let negatives = samples.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(StatsError::DegenerateLabels {
            positives,
            negatives,
        });
    }

    let mut sorted: Vec<&ScoredSample> = samples.iter().collect();
    sorted.sort_by(|a, b| a.score.total_cmp(&b.score));

    let mut half_pairs: u128 = 0;
    let mut negatives_below: u128 = 0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0u128, 0u128);
        while j < sorted.len() && sorted[j].score == sorted[i].score {
            if sorted[j].is_positive() {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        half_pairs += 2 * pos * negatives_below + pos * neg;
        negatives_below += neg;
        i = j;
    }
    Ok(half_pairs as f64 / (2 * positives as u128 * negatives as u128) as f64)
}

/// Sample Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::DimensionMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(StatsError::TooFewValues {
            needed: 3,
            got: x.len(),
        });
    }
    if let Some(i) = x.iter().chain(y).position(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite(i % x.len()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::DegenerateVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Sample standard deviation (n - 1 denominator).
pub fn sample_sd(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values)?;
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    Some((ss / (values.len() - 1) as f64).sqrt())
}

/// Minimal set of highest-probability tokens reaching mass `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nucleus {
    pub entries: Vec<(TokenId, f64)>,
    pub mass: f64,
    pub q: f64,
}

impl Nucleus {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Smallest descending-probability prefix whose mass reaches `q`.
///
/// Ties are broken by ascending token id. If rounding keeps the total mass
/// below `q`, the whole support is returned.
pub fn nucleus(probs: &[f64], q: f64) -> Result<Nucleus, StatsError> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(StatsError::BadThreshold(q));
    }
    let mut order: Vec<usize> = (0..probs.len()).filter(|&i| probs[i] > 0.0).collect();
    order.sort_by(|&a, &b| match probs[b].total_cmp(&probs[a]) {
        Ordering::Equal => a.cmp(&b),
        o => o,
    });
    let mut entries = Vec::new();
    let mut mass = 0.0;
    for idx in order {
        entries.push((idx as TokenId, probs[idx]));
        mass += probs[idx];
        if mass >= q {
            break;
        }
    }
    Ok(Nucleus { entries, mass, q })
}

pub fn nucleus_of(d: &Distribution, q: f64) -> Result<Nucleus, StatsError> {
    nucleus(&d.probs(), q)
}

/// Number of top-ranked words needed to reach mass `q`.
pub fn words_to_percentile(probs: &[f64], q: f64) -> Result<usize, StatsError> {
    Ok(nucleus(probs, q)?.len())
}
