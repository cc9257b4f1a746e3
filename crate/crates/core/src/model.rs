//! Domain types shared by every probing step: analyzed sentences, word/token
//! alignment, per-position distributions and affinity records.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type TokenId = u32;

/// Maximum deviation of `sum(exp(log_probs))` from 1 accepted for a [`Distribution`].
pub const NORMALIZATION_TOLERANCE: f64 = 1e-4;

/// One token as reported by a tokenizer: vocabulary id and byte offsets into the text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenOffset {
    pub id: TokenId,
    pub start: usize,
    pub end: usize,
}

impl TokenOffset {
    pub fn new(id: TokenId, start: usize, end: usize) -> Self {
        Self { id, start, end }
    }
}

/// A whitespace-delimited word and the tokens covering it.
///
/// `char_start..char_end` is the full whitespace chunk (edge punctuation
/// included); `token_start..token_end` is the minimal token range covering the
/// word's core, i.e. the chunk with edge punctuation stripped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordSpan {
    pub word_index: usize,
    pub char_start: usize,
    pub char_end: usize,
    pub core_start: usize,
    pub core_end: usize,
    pub token_start: usize,
    pub token_end: usize,
    pub is_single_token: bool,
}

impl WordSpan {
    pub fn token_len(&self) -> usize {
        self.token_end - self.token_start
    }

    pub fn text<'a>(&self, text: &'a str) -> &'a str {
        &text[self.char_start..self.char_end]
    }

    /// The word with edge punctuation stripped.
    pub fn core<'a>(&self, text: &'a str) -> &'a str {
        &text[self.core_start..self.core_end]
    }

    pub fn contains(&self, start: usize, end: usize) -> bool {
        self.char_start <= start && end <= self.char_end
    }
}

/// Why a word or record could not be scored. Skips are always counted, never dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    MultiToken,
    OutOfVocabulary,
    TooLong,
    OffsetMismatch,
    TargetNotFound,
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SkipReason::MultiToken => "multi_token",
            SkipReason::OutOfVocabulary => "out_of_vocabulary",
            SkipReason::TooLong => "too_long",
            SkipReason::OffsetMismatch => "offset_mismatch",
            SkipReason::TargetNotFound => "target_not_found",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlignError {
    #[error("word {word_index} ({start}..{end}) is not fully covered by tokens")]
    OffsetMismatch {
        word_index: usize,
        start: usize,
        end: usize,
    },
    #[error("token {index} has invalid offsets {start}..{end} for text of length {len}")]
    BadTokenOffsets {
        index: usize,
        start: usize,
        end: usize,
        len: usize,
    },
}

/// Splits `text` into whitespace chunks and returns `(chunk_start, chunk_end, core_start, core_end)`.
///
/// The core strips leading and trailing non-alphanumeric characters. A chunk made
/// only of punctuation keeps itself as core.
pub fn segment_words(text: &str) -> Vec<(usize, usize, usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (idx, ch) in text.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(chunk_with_core(text, s, idx));
            }
        } else if start.is_none() {
            start = Some(idx);
        }
    }
    if let Some(s) = start {
        out.push(chunk_with_core(text, s, text.len()));
    }
    out
}

fn chunk_with_core(text: &str, start: usize, end: usize) -> (usize, usize, usize, usize) {
    let (cs, ce) = core_range(&text[start..end]);
    if cs == ce {
        (start, end, start, end)
    } else {
        (start, end, start + cs, start + ce)
    }
}

/// Byte range of `word` with edge punctuation removed (may be empty).
pub fn core_range(word: &str) -> (usize, usize) {
    let trimmed_start = word.trim_start_matches(|c: char| !c.is_alphanumeric());
    let cs = word.len() - trimmed_start.len();
    let trimmed = trimmed_start.trim_end_matches(|c: char| !c.is_alphanumeric());
    (cs, cs + trimmed.len())
}

/// Normalized word identity: edge punctuation stripped, lowercased.
pub fn normalize_word(word: &str) -> String {
    let (s, e) = core_range(word);
    word[s..e].to_lowercase()
}

/// Maps each whitespace word of `text` onto the minimal token range covering its core.
///
/// Zero-width tokens (special tokens) never cover anything. Fails with
/// [`AlignError::OffsetMismatch`] when some character of a word core is not
/// inside any token.
pub fn align_words(text: &str, tokens: &[TokenOffset]) -> Result<Vec<WordSpan>, AlignError> {
    for (index, t) in tokens.iter().enumerate() {
        if t.start > t.end
            || t.end > text.len()
            || !text.is_char_boundary(t.start)
            || !text.is_char_boundary(t.end)
        {
            return Err(AlignError::BadTokenOffsets {
                index,
                start: t.start,
                end: t.end,
                len: text.len(),
            });
        }
    }

    let mut spans = Vec::new();
    for (word_index, (char_start, char_end, core_start, core_end)) in
        segment_words(text).into_iter().enumerate()
    {
        let mismatch = AlignError::OffsetMismatch {
            word_index,
            start: core_start,
            end: core_end,
        };
        let mut first = None;
        let mut last = None;
        for (ti, t) in tokens.iter().enumerate() {
            if t.start < t.end && t.start < core_end && core_start < t.end {
                first.get_or_insert(ti);
                last = Some(ti);
            }
        }
        let (Some(first), Some(last)) = (first, last) else {
            return Err(mismatch);
        };
        // every character of the core must fall inside a token of the covering range
        let covered = text[core_start..core_end].char_indices().all(|(off, _)| {
            let pos = core_start + off;
            tokens[first..=last]
                .iter()
                .any(|t| t.start <= pos && pos < t.end)
        });
        if !covered {
            return Err(mismatch);
        }
        let token_end = last + 1;
        spans.push(WordSpan {
            word_index,
            char_start,
            char_end,
            core_start,
            core_end,
            token_start: first,
            token_end,
            is_single_token: token_end - first == 1,
        });
    }
    Ok(spans)
}

/// A word can be masked iff it is exactly one token.
pub fn maskable(span: &WordSpan) -> bool {
    span.is_single_token
}

/// Tokenized sentence with word alignment; the unit every affinity query runs on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzedSentence {
    pub id: String,
    pub text: String,
    pub token_ids: Vec<TokenId>,
    pub words: Vec<WordSpan>,
}

impl AnalyzedSentence {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        tokens: &[TokenOffset],
    ) -> Result<Self, AlignError> {
        let text = text.into();
        let words = align_words(&text, tokens)?;
        Ok(Self {
            id: id.into(),
            token_ids: tokens.iter().map(|t| t.id).collect(),
            text,
            words,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word(&self, i: usize) -> Option<&WordSpan> {
        self.words.get(i)
    }

    pub fn core(&self, i: usize) -> &str {
        self.words[i].core(&self.text)
    }

    /// Word index whose chunk contains the byte range `start..end`.
    pub fn word_containing(&self, start: usize, end: usize) -> Option<usize> {
        self.words
            .iter()
            .find(|w| w.contains(start, end))
            .map(|w| w.word_index)
    }

    /// Token id of a single-token word.
    pub fn token_of(&self, i: usize) -> Option<TokenId> {
        let w = self.words.get(i)?;
        maskable(w).then(|| self.token_ids[w.token_start])
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistributionError {
    #[error("log-prob at index {0} is not finite")]
    NonFinite(usize),
    #[error("probabilities sum to {0}, expected 1 within {NORMALIZATION_TOLERANCE}")]
    NotNormalized(f64),
    #[error("empty distribution")]
    Empty,
}

/// A full-vocabulary output distribution at one position of a masked string.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    log_probs: Vec<f32>,
    pub position: usize,
    pub context_id: String,
}

impl Distribution {
    pub fn new(
        log_probs: Vec<f32>,
        position: usize,
        context_id: impl Into<String>,
    ) -> Result<Self, DistributionError> {
        if log_probs.is_empty() {
            return Err(DistributionError::Empty);
        }
        if let Some(i) = log_probs.iter().position(|lp| !lp.is_finite()) {
            return Err(DistributionError::NonFinite(i));
        }
        let total: f64 = log_probs.iter().map(|&lp| (lp as f64).exp()).sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(DistributionError::NotNormalized(total));
        }
        Ok(Self {
            log_probs,
            position,
            context_id: context_id.into(),
        })
    }

    pub fn log_probs(&self) -> &[f32] {
        &self.log_probs
    }

    pub fn len(&self) -> usize {
        self.log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_probs.is_empty()
    }

    pub fn prob(&self, token: TokenId) -> Option<f64> {
        self.log_probs
            .get(token as usize)
            .map(|&lp| (lp as f64).exp())
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_probs.iter().map(|&lp| (lp as f64).exp()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AffinityKind {
    Global,
    Local,
}

/// Result of one global or local affinity query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinityRecord {
    pub sentence_id: String,
    pub kind: AffinityKind,
    pub i: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<SkipReason>,
}
