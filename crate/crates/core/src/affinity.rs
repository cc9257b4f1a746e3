//! Global and local affinity.
//!
//! Global affinity of word `i` is the probability the model gives the
//! original token at `i` when only `i` is masked. Local affinity `a(i, j)` is
//! the base-2 Jensen-Shannon divergence between the distribution at `i` with
//! `{i}` masked and the distribution at `i` with `{i, j}` masked. It is not
//! symmetric in `i` and `j`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{DistributionRequest, DistributionResponse, Gateway, GatewayError};
use crate::model::{
    maskable, AffinityKind, AffinityRecord, AnalyzedSentence, Distribution, DistributionError,
    SkipReason, TokenId,
};
use crate::stats::{self, StatsError};

#[derive(Debug, Error)]
pub enum AffinityError {
    #[error("word {word} skipped: {reason}")]
    Skipped { word: usize, reason: SkipReason },
    #[error("local affinity needs two distinct words, got i = j = {0}")]
    SamePosition(usize),
    #[error("word index {0} out of range")]
    NoSuchWord(usize),
    #[error(transparent)]
    Gateway(GatewayError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

impl AffinityError {
    pub fn skip_reason(&self) -> Option<SkipReason> {
        match self {
            AffinityError::Skipped { reason, .. } => Some(*reason),
            _ => None,
        }
    }
}

fn gateway_error(word: usize, e: GatewayError) -> AffinityError {
    match e {
        GatewayError::Length { .. } => AffinityError::Skipped {
            word,
            reason: SkipReason::TooLong,
        },
        other => AffinityError::Gateway(other),
    }
}

/// Tokenizes `text` through the gateway and aligns words to tokens.
///
/// An alignment failure is reported as a [`SkipReason::OffsetMismatch`] skip.
pub fn analyze<G: Gateway + ?Sized>(
    gw: &G,
    id: &str,
    text: &str,
) -> Result<AnalyzedSentence, AffinityError> {
    let tokens = gw.tokenize(text).map_err(AffinityError::Gateway)?;
    AnalyzedSentence::new(id, text, &tokens).map_err(|_| AffinityError::Skipped {
        word: 0,
        reason: SkipReason::OffsetMismatch,
    })
}

/// Token position and original id of a maskable word.
pub fn target_token(s: &AnalyzedSentence, i: usize) -> Result<(usize, TokenId), AffinityError> {
    let w = s.word(i).ok_or(AffinityError::NoSuchWord(i))?;
    if !maskable(w) {
        return Err(AffinityError::Skipped {
            word: i,
            reason: SkipReason::MultiToken,
        });
    }
    Ok((w.token_start, s.token_ids[w.token_start]))
}

fn request_for(s: &AnalyzedSentence, token_positions: Vec<usize>) -> DistributionRequest {
    let tag = token_positions
        .iter()
        .map(|p| p.to_string())
        .collect::<Vec<_>>()
        .join(",");
    DistributionRequest::new(
        format!("{}@{tag}", s.id),
        s.token_ids.clone(),
        token_positions,
    )
}

fn take_distribution(
    resp: DistributionResponse,
    position: usize,
    word: usize,
) -> Result<Distribution, AffinityError> {
    let context = resp.request_id;
    let mut per_position = resp.per_position;
    let values = per_position.remove(&position).ok_or_else(|| {
        AffinityError::Gateway(GatewayError::Transport(format!(
            "missing position {position} in response"
        )))
    })?;
    let _ = word;
    Ok(Distribution::new(values, position, context)?)
}

fn probability_of(d: &Distribution, token: TokenId, word: usize) -> Result<f64, AffinityError> {
    d.prob(token).ok_or(AffinityError::Skipped {
        word,
        reason: SkipReason::OutOfVocabulary,
    })
}

/// Distribution at word `at` with the words in `masked` (which must include
/// `at`) masked simultaneously.
pub fn word_distribution<G: Gateway + ?Sized>(
    gw: &G,
    s: &AnalyzedSentence,
    masked: &[usize],
    at: usize,
) -> Result<Distribution, AffinityError> {
    let mut positions = Vec::with_capacity(masked.len());
    for &w in masked {
        positions.push(target_token(s, w)?.0);
    }
    let (at_pos, _) = target_token(s, at)?;
    let resp = gw
        .distributions(&request_for(s, positions))
        .map_err(|e| gateway_error(at, e))?;
    take_distribution(resp, at_pos, at)
}

pub fn global_affinity<G: Gateway + ?Sized>(
    gw: &G,
    s: &AnalyzedSentence,
    i: usize,
) -> Result<f64, AffinityError> {
    let (pos, token) = target_token(s, i)?;
    let resp = gw
        .distributions(&request_for(s, vec![pos]))
        .map_err(|e| gateway_error(i, e))?;
    let d = take_distribution(resp, pos, i)?;
    probability_of(&d, token, i)
}

/// Global affinity for many `(sentence, word)` targets in one gateway batch.
pub fn global_affinities<G: Gateway + ?Sized>(
    gw: &G,
    targets: &[(&AnalyzedSentence, usize)],
) -> Vec<Result<f64, AffinityError>> {
    let mut out: Vec<Option<Result<f64, AffinityError>>> = Vec::with_capacity(targets.len());
    let mut reqs = Vec::new();
    let mut pending = Vec::new();
    for (k, &(s, i)) in targets.iter().enumerate() {
        match target_token(s, i) {
            Ok((pos, token)) => {
                reqs.push(request_for(s, vec![pos]));
                pending.push((k, i, pos, token));
                out.push(None);
            }
            Err(e) => out.push(Some(Err(e))),
        }
    }
    for ((k, i, pos, token), resp) in pending.into_iter().zip(gw.distributions_batch(&reqs)) {
        out[k] = Some(
            resp.map_err(|e| gateway_error(i, e))
                .and_then(|r| take_distribution(r, pos, i))
                .and_then(|d| probability_of(&d, token, i)),
        );
    }
    out.into_iter().map(|r| r.expect("filled")).collect()
}

pub fn local_affinity<G: Gateway + ?Sized>(
    gw: &G,
    s: &AnalyzedSentence,
    i: usize,
    j: usize,
) -> Result<f64, AffinityError> {
    if i == j {
        return Err(AffinityError::SamePosition(i));
    }
    let (pi, _) = target_token(s, i)?;
    let (pj, _) = target_token(s, j)?;
    let reqs = [request_for(s, vec![pi]), request_for(s, vec![pi, pj])];
    let mut resps = gw.distributions_batch(&reqs).into_iter();
    let base = take_distribution(
        resps
            .next()
            .expect("two responses")
            .map_err(|e| gateway_error(i, e))?,
        pi,
        i,
    )?;
    let joint = take_distribution(
        resps
            .next()
            .expect("two responses")
            .map_err(|e| gateway_error(i, e))?,
        pi,
        i,
    )?;
    Ok(stats::jsd_distributions(&base, &joint)?)
}

pub fn global_record<G: Gateway + ?Sized>(
    gw: &G,
    s: &AnalyzedSentence,
    i: usize,
) -> Result<AffinityRecord, AffinityError> {
    record(s, AffinityKind::Global, i, None, global_affinity(gw, s, i))
}

pub fn local_record<G: Gateway + ?Sized>(
    gw: &G,
    s: &AnalyzedSentence,
    i: usize,
    j: usize,
) -> Result<AffinityRecord, AffinityError> {
    record(
        s,
        AffinityKind::Local,
        i,
        Some(j),
        local_affinity(gw, s, i, j),
    )
}

fn record(
    s: &AnalyzedSentence,
    kind: AffinityKind,
    i: usize,
    j: Option<usize>,
    result: Result<f64, AffinityError>,
) -> Result<AffinityRecord, AffinityError> {
    let (value, skipped) = match result {
        Ok(v) => (Some(v), None),
        Err(AffinityError::Skipped { reason, .. }) => (None, Some(reason)),
        Err(e) => return Err(e),
    };
    Ok(AffinityRecord {
        sentence_id: s.id.clone(),
        kind,
        i,
        j,
        value,
        skipped,
    })
}

/// All local affinities of a sentence; entry `[i][j]` is `a(i, j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseAffinityMatrix {
    pub sentence_id: String,
    pub values: Vec<Vec<Option<f64>>>,
    /// Per word: why its row and column are empty, if they are.
    pub skipped: Vec<Option<SkipReason>>,
}

impl PairwiseAffinityMatrix {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values.get(i)?.get(j).copied().flatten()
    }

    pub fn populated(&self) -> usize {
        self.values.iter().flatten().filter(|v| v.is_some()).count()
    }
}

/// Computes `a(i, j)` for every ordered pair of distinct maskable words.
///
/// Each single-mask distribution is fetched once, and one `{i, j}` request
/// serves both `a(i, j)` and `a(j, i)`: at most `L` single-mask and
/// `L(L-1)/2` double-mask requests.
pub fn pairwise_matrix<G: Gateway + ?Sized>(
    gw: &G,
    s: &AnalyzedSentence,
) -> Result<PairwiseAffinityMatrix, AffinityError> {
    let n = s.len();
    let mut skipped: Vec<Option<SkipReason>> = vec![None; n];
    let mut positions = vec![0usize; n];
    for i in 0..n {
        match target_token(s, i) {
            Ok((p, _)) => positions[i] = p,
            Err(e) => skipped[i] = e.skip_reason(),
        }
    }
    let live: Vec<usize> = (0..n).filter(|&i| skipped[i].is_none()).collect();

    let singles: Vec<DistributionRequest> = live
        .iter()
        .map(|&i| request_for(s, vec![positions[i]]))
        .collect();
    let mut base: Vec<Option<Distribution>> = vec![None; n];
    for (&i, resp) in live.iter().zip(gw.distributions_batch(&singles)) {
        match resp {
            Ok(r) => base[i] = Some(take_distribution(r, positions[i], i)?),
            Err(e) => match gateway_error(i, e) {
                AffinityError::Skipped { reason, .. } => skipped[i] = Some(reason),
                other => return Err(other),
            },
        }
    }

    let live: Vec<usize> = live.into_iter().filter(|&i| skipped[i].is_none()).collect();
    let mut pairs = Vec::new();
    let mut doubles = Vec::new();
    for (a, &i) in live.iter().enumerate() {
        for &j in &live[a + 1..] {
            pairs.push((i, j));
            doubles.push(request_for(s, vec![positions[i], positions[j]]));
        }
    }
    let mut values = vec![vec![None; n]; n];
    for ((i, j), resp) in pairs.into_iter().zip(gw.distributions_batch(&doubles)) {
        let resp = resp.map_err(|e| gateway_error(i, e))?;
        let at_j = take_distribution(resp.clone(), positions[j], j)?;
        let at_i = take_distribution(resp, positions[i], i)?;
        let base_i = base[i].as_ref().expect("live word has a base distribution");
        let base_j = base[j].as_ref().expect("live word has a base distribution");
        values[i][j] = Some(stats::jsd_distributions(base_i, &at_i)?);
        values[j][i] = Some(stats::jsd_distributions(base_j, &at_j)?);
    }
    Ok(PairwiseAffinityMatrix {
        sentence_id: s.id.clone(),
        values,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{CachedGateway, MockGateway};

    fn sentence(gw: &MockGateway, text: &str) -> AnalyzedSentence {
        analyze(gw, "s", text).unwrap()
    }

    #[test]
    fn global_affinity_in_unit_interval() {
        let gw = MockGateway::new(5);
        let s = sentence(&gw, "none of these is strong let alone certain");
        for i in 0..s.len() {
            let v = global_affinity(&gw, &s, i).unwrap();
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn same_position_is_rejected() {
        let gw = MockGateway::new(5);
        let s = sentence(&gw, "day by day");
        assert!(matches!(
            local_affinity(&gw, &s, 1, 1),
            Err(AffinityError::SamePosition(1))
        ));
    }

    #[test]
    fn multi_token_word_is_skipped() {
        let gw = MockGateway::new(5);
        let s = sentence(&gw, "an extraordinary day");
        let err = global_affinity(&gw, &s, 1).unwrap_err();
        assert_eq!(err.skip_reason(), Some(SkipReason::MultiToken));
        let rec = global_record(&gw, &s, 1).unwrap();
        assert_eq!(rec.skipped, Some(SkipReason::MultiToken));
        assert!(rec.value.is_none());
    }

    #[test]
    fn too_long_sentence_is_skipped() {
        let gw = MockGateway::new(5).with_max_positions(2);
        let s = sentence(&gw, "day by day");
        assert_eq!(
            global_affinity(&gw, &s, 0).unwrap_err().skip_reason(),
            Some(SkipReason::TooLong)
        );
    }

    #[test]
    fn three_word_matrix_has_six_entries() {
        let gw = MockGateway::new(2);
        let s = sentence(&gw, "day by day");
        let m = pairwise_matrix(&gw, &s).unwrap();
        assert_eq!(m.populated(), 6);
        for i in 0..3 {
            assert!(m.get(i, i).is_none());
            for j in 0..3 {
                if i != j {
                    assert_eq!(m.get(i, j).unwrap(), local_affinity(&gw, &s, i, j).unwrap());
                }
            }
        }
    }

    #[test]
    fn matrix_skips_multi_token_row_and_column() {
        let gw = MockGateway::new(2);
        let s = sentence(&gw, "day extraordinary by day");
        let m = pairwise_matrix(&gw, &s).unwrap();
        assert_eq!(m.skipped[1], Some(SkipReason::MultiToken));
        assert!((0..4).all(|k| m.get(1, k).is_none() && m.get(k, 1).is_none()));
        assert_eq!(m.populated(), 6);
    }

    #[test]
    fn matrix_query_economy() {
        let gw = CachedGateway::new(MockGateway::new(2)).unwrap();
        let s = analyze(&gw, "s", "we made our way home").unwrap();
        pairwise_matrix(&gw, &s).unwrap();
        // 5 single-mask + 10 double-mask requests
        assert_eq!(gw.inner_distribution_calls(), 15);
    }

    #[test]
    fn batch_matches_single_queries() {
        let gw = MockGateway::new(8);
        let a = sentence(&gw, "he kicked at the ball");
        let b = sentence(&gw, "she loaded the truck with books");
        let targets = [(&a, 2), (&b, 4), (&a, 0)];
        let batch = global_affinities(&gw, &targets);
        for ((s, i), r) in targets.iter().zip(batch) {
            assert_eq!(r.unwrap(), global_affinity(&gw, s, *i).unwrap());
        }
    }
}
