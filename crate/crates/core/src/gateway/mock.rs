//! Deterministic in-process gateway used by tests and offline runs.
//!
//! Vocabulary: the 64 entries of [`MOCK_VOCAB`]; id 0 is the mask token.
//! Tokenization splits on whitespace; a chunk longer than
//! [`MOCK_SPLIT_LEN`] bytes becomes two tokens, cut at the middle character.
//! A token's id is the index of its lowercased, punctuation-stripped form in
//! the vocabulary, or `1 + fnv1a64(form) % 63` for unknown forms.
//!
//! Distribution formula ([`MockMode::Hashed`]): let `t` be the request's token
//! ids with every masked position replaced by 0 and `m` the masked positions
//! sorted ascending. For position `p` and vocabulary item `v`, feed FNV-1a 64
//! with, in order, `seed` (u64 LE), `len(t)` (u64 LE), each `t[k]` (u32 LE),
//! `len(m)` (u64 LE), each `m[k]` (u64 LE), `p` (u64 LE), `v` (u32 LE); apply
//! the splitmix64 finalizer to get `h`. Then
//!
//! ```text
//! logit[v]    = 8 * (h >> 11) / 2^53
//! lse         = max(logit) + ln( sum_{v ascending} exp(logit[v] - max(logit)) )
//! log_prob[v] = f32(logit[v] - lse)
//! ```
//!
//! all in `f64` until the final cast.

use std::collections::BTreeMap;

use super::{
    DistributionRequest, DistributionResponse, Gateway, GatewayError, ModelInfo, Result, TaggedWord,
};
use crate::model::{normalize_word, TokenId, TokenOffset};
use crate::tagger::RuleTagger;

pub const MOCK_VOCAB: [&str; 64] = [
    "<mask>", "the", "so", "that", "let", "alone", "much", "less", "at", "way", "with", "day",
    "by", "after", "upon", "to", "i", "was", "happy", "it", "big", "bigger", "better", "more",
    "worse", "merrier", "and", "a", "of", "he", "she", "we", "made", "our", "home", "kicked",
    "ball", "loaded", "truck", "books", "none", "not", "is", "strong", "cried", "hot", "road",
    "melted", "face", "year", "week", "nuts", "bolts", "talk", "in", "were", "faster", "cold",
    "night", "certain", "saw", "you", "him", "fell",
];

pub const MOCK_SPLIT_LEN: usize = 10;
pub const MOCK_MAX_POSITIONS: usize = 128;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MockMode {
    /// Hash-derived pseudo-distributions (see module docs).
    Hashed,
    /// Uniform distribution at every position.
    Uniform,
    /// Mass `p` on the original token of the masked position, the rest spread evenly.
    Peaked(f64),
}

#[derive(Debug, Clone)]
pub struct MockGateway {
    seed: u64,
    mode: MockMode,
    info: ModelInfo,
    tagger: Option<RuleTagger>,
}

impl MockGateway {
    pub fn new(seed: u64) -> Self {
        Self::with_mode(seed, MockMode::Hashed)
    }

    pub fn with_mode(seed: u64, mode: MockMode) -> Self {
        Self {
            seed,
            mode,
            info: ModelInfo {
                model_name: mock_name(seed, mode),
                vocab_size: MOCK_VOCAB.len(),
                mask_token_id: 0,
                max_positions: MOCK_MAX_POSITIONS,
            },
            tagger: Some(RuleTagger::default()),
        }
    }

    pub fn uniform() -> Self {
        Self::with_mode(0, MockMode::Uniform)
    }

    pub fn peaked(mass: f64) -> Self {
        Self::with_mode(0, MockMode::Peaked(mass))
    }

    /// A mock whose `pos_tag` reports the tagger as unavailable.
    pub fn without_tagger(mut self) -> Self {
        self.tagger = None;
        self
    }

    pub fn with_max_positions(mut self, max_positions: usize) -> Self {
        self.info.max_positions = max_positions;
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mode(&self) -> MockMode {
        self.mode
    }

    pub fn token_id(form: &str) -> TokenId {
        let w = normalize_word(form);
        match MOCK_VOCAB.iter().position(|v| *v == w) {
            Some(i) if i > 0 => i as TokenId,
            _ => 1 + (fnv1a(FNV_OFFSET, w.as_bytes()) % 63) as TokenId,
        }
    }

    fn hashed_log_probs(&self, masked_tokens: &[TokenId], masked: &[usize], p: usize) -> Vec<f32> {
        let mut prefix = fnv1a(FNV_OFFSET, &self.seed.to_le_bytes());
        prefix = fnv1a(prefix, &(masked_tokens.len() as u64).to_le_bytes());
        for t in masked_tokens {
            prefix = fnv1a(prefix, &t.to_le_bytes());
        }
        prefix = fnv1a(prefix, &(masked.len() as u64).to_le_bytes());
        for m in masked {
            prefix = fnv1a(prefix, &(*m as u64).to_le_bytes());
        }
        prefix = fnv1a(prefix, &(p as u64).to_le_bytes());
        let logits: Vec<f64> = (0..self.info.vocab_size as u32)
            .map(|v| {
                let h = splitmix64(fnv1a(prefix, &v.to_le_bytes()));
                8.0 * (h >> 11) as f64 / (1u64 << 53) as f64
            })
            .collect();
        log_softmax(&logits)
    }

    fn log_probs_at(
        &self,
        req: &DistributionRequest,
        masked_tokens: &[TokenId],
        masked: &[usize],
        p: usize,
    ) -> Vec<f32> {
        let v = self.info.vocab_size;
        match self.mode {
            MockMode::Hashed => self.hashed_log_probs(masked_tokens, masked, p),
            MockMode::Uniform => vec![-(v as f64).ln() as f32; v],
            MockMode::Peaked(mass) => {
                let rest = ((1.0 - mass) / (v - 1) as f64).max(1e-30);
                let mut out = vec![rest.ln() as f32; v];
                out[req.token_ids[p] as usize % v] = mass.max(1e-30).ln() as f32;
                out
            }
        }
    }
}

/// Distinct per seed and mode, so caches keyed by model name never mix them.
fn mock_name(seed: u64, mode: MockMode) -> String {
    match mode {
        MockMode::Hashed => format!("mock-s{seed}"),
        MockMode::Uniform => "mock-uniform".into(),
        MockMode::Peaked(p) => format!("mock-peaked-{p}"),
    }
}

fn fnv1a(mut state: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        state ^= b as u64;
        state = state.wrapping_mul(FNV_PRIME);
    }
    state
}

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn log_softmax(logits: &[f64]) -> Vec<f32> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|l| (l - max).exp()).sum();
    let lse = max + sum.ln();
    logits.iter().map(|l| (l - lse) as f32).collect()
}

impl Gateway for MockGateway {
    fn handshake(&self) -> Result<ModelInfo> {
        Ok(self.info.clone())
    }

    fn tokenize(&self, text: &str) -> Result<Vec<TokenOffset>> {
        if text.trim().is_empty() {
            return Err(GatewayError::Encoding("empty text".into()));
        }
        let mut out = Vec::new();
        for (start, end, _, _) in crate::model::segment_words(text) {
            let chunk = &text[start..end];
            if chunk.len() > MOCK_SPLIT_LEN && chunk.chars().count() > 1 {
                let half = chunk.chars().count() / 2;
                let cut = start + chunk.char_indices().nth(half).map(|(i, _)| i).unwrap_or(0);
                out.push(TokenOffset::new(
                    Self::token_id(&text[start..cut]),
                    start,
                    cut,
                ));
                out.push(TokenOffset::new(Self::token_id(&text[cut..end]), cut, end));
            } else {
                out.push(TokenOffset::new(Self::token_id(chunk), start, end));
            }
        }
        Ok(out)
    }

    fn distributions(&self, req: &DistributionRequest) -> Result<DistributionResponse> {
        req.validate()?;
        req.check_length(&self.info)?;
        let mut masked = req.masked_positions.clone();
        masked.sort_unstable();
        let mut masked_tokens = req.token_ids.clone();
        for &p in &masked {
            masked_tokens[p] = self.info.mask_token_id;
        }
        let per_position: BTreeMap<usize, Vec<f32>> = masked
            .iter()
            .map(|&p| (p, self.log_probs_at(req, &masked_tokens, &masked, p)))
            .collect();
        Ok(DistributionResponse {
            request_id: req.request_id.clone(),
            per_position,
        })
    }

    fn decode(&self, token_ids: &[TokenId]) -> Result<Vec<String>> {
        token_ids
            .iter()
            .map(|&id| {
                MOCK_VOCAB
                    .get(id as usize)
                    .map(|w| w.to_string())
                    .ok_or_else(|| GatewayError::BadRequest(format!("token id {id} out of range")))
            })
            .collect()
    }

    fn pos_tag(&self, text: &str) -> Result<Vec<TaggedWord>> {
        if text.trim().is_empty() {
            return Err(GatewayError::Encoding("empty text".into()));
        }
        match &self.tagger {
            Some(t) => Ok(t.tag(text)),
            None => Err(GatewayError::TaggerUnavailable),
        }
    }
}
