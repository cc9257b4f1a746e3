//! Model-agnostic inference boundary.
//!
//! A [`Gateway`] tokenizes text, returns full-vocabulary log-prob vectors at
//! masked positions, decodes single token ids and POS-tags text. Three
//! implementations ship here: [`MockGateway`] (deterministic, in-process),
//! [`GatewayClient`] (speaks the wire protocol to an adapter process or TCP
//! server) and [`CachedGateway`] (transparent memo + on-disk store around
//! either).

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{TokenId, TokenOffset};

mod cache;
mod client;
mod mock;
pub mod protocol;

pub use cache::CachedGateway;
pub use client::GatewayClient;
pub use mock::{MockGateway, MockMode, MOCK_VOCAB};

/// Penn Treebank tag for comparative adjectives.
pub const TAG_COMPARATIVE_ADJ: &str = "JJR";
/// Penn Treebank tag for comparative adverbs.
pub const TAG_COMPARATIVE_ADV: &str = "RBR";

pub fn is_comparative_tag(tag: &str) -> bool {
    tag == TAG_COMPARATIVE_ADJ || tag == TAG_COMPARATIVE_ADV
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub model_name: String,
    pub vocab_size: usize,
    pub mask_token_id: TokenId,
    pub max_positions: usize,
}

impl ModelInfo {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.vocab_size == 0 || self.mask_token_id as usize >= self.vocab_size {
            return Err(GatewayError::Transport(format!(
                "invalid model info: vocab_size={} mask_token_id={}",
                self.vocab_size, self.mask_token_id
            )));
        }
        Ok(())
    }
}

/// A token sequence with some positions to be replaced by the mask token
/// simultaneously.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DistributionRequest {
    pub request_id: String,
    pub token_ids: Vec<TokenId>,
    pub masked_positions: Vec<usize>,
}

impl DistributionRequest {
    pub fn new(
        request_id: impl Into<String>,
        token_ids: Vec<TokenId>,
        masked_positions: Vec<usize>,
    ) -> Self {
        Self {
            request_id: request_id.into(),
            token_ids,
            masked_positions,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.masked_positions.is_empty() {
            return Err(GatewayError::BadRequest("no masked positions".into()));
        }
        let mut seen = self.masked_positions.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.masked_positions.len() {
            return Err(GatewayError::BadRequest(
                "duplicate masked positions".into(),
            ));
        }
        if let Some(&p) = seen.last() {
            if p >= self.token_ids.len() {
                return Err(GatewayError::BadRequest(format!(
                    "masked position {p} out of bounds for {} tokens",
                    self.token_ids.len()
                )));
            }
        }
        Ok(())
    }

    pub fn check_length(&self, info: &ModelInfo) -> Result<(), GatewayError> {
        if self.token_ids.len() > info.max_positions {
            return Err(GatewayError::Length {
                len: self.token_ids.len(),
                max: info.max_positions,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionResponse {
    pub request_id: String,
    pub per_position: BTreeMap<usize, Vec<f32>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedWord {
    pub word: String,
    pub tag: String,
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("protocol version mismatch: expected {expected}, got {got}")]
    VersionMismatch { expected: u32, got: u32 },
    #[error("cannot encode text: {0}")]
    Encoding(String),
    #[error("sequence of {len} tokens exceeds max_positions {max}")]
    Length { len: usize, max: usize },
    #[error("POS tagger unavailable")]
    TaggerUnavailable,
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("adapter error {code}: {message}")]
    Remote { code: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl GatewayError {
    /// True for errors that mean the connection itself is unusable.
    pub fn is_transport(&self) -> bool {
        matches!(
            self,
            GatewayError::Transport(_)
                | GatewayError::VersionMismatch { .. }
                | GatewayError::Io(_)
                | GatewayError::Remote { .. }
        )
    }
}

pub type Result<T, E = GatewayError> = std::result::Result<T, E>;

pub trait Gateway: Send + Sync {
    fn handshake(&self) -> Result<ModelInfo>;

    fn tokenize(&self, text: &str) -> Result<Vec<TokenOffset>>;

    fn distributions(&self, req: &DistributionRequest) -> Result<DistributionResponse>;

    /// Answers several requests; results come back in request order. The
    /// grouping never affects the values.
    fn distributions_batch(
        &self,
        reqs: &[DistributionRequest],
    ) -> Vec<Result<DistributionResponse>> {
        reqs.iter().map(|r| self.distributions(r)).collect()
    }

    /// Surface form of single vocabulary items, used to substitute candidate
    /// fills back into a sentence.
    fn decode(&self, token_ids: &[TokenId]) -> Result<Vec<String>>;

    /// One tag per whitespace word of `text`.
    fn pos_tag(&self, text: &str) -> Result<Vec<TaggedWord>>;
}

macro_rules! forward_gateway {
    ($ty:ty) => {
        impl<G: Gateway + ?Sized> Gateway for $ty {
            fn handshake(&self) -> Result<ModelInfo> {
                (**self).handshake()
            }
            fn tokenize(&self, text: &str) -> Result<Vec<TokenOffset>> {
                (**self).tokenize(text)
            }
            fn distributions(&self, req: &DistributionRequest) -> Result<DistributionResponse> {
                (**self).distributions(req)
            }
            fn distributions_batch(
                &self,
                reqs: &[DistributionRequest],
            ) -> Vec<Result<DistributionResponse>> {
                (**self).distributions_batch(reqs)
            }
            fn decode(&self, token_ids: &[TokenId]) -> Result<Vec<String>> {
                (**self).decode(token_ids)
            }
            fn pos_tag(&self, text: &str) -> Result<Vec<TaggedWord>> {
                (**self).pos_tag(text)
            }
        }
    };
}

forward_gateway!(&G);
forward_gateway!(Box<G>);
forward_gateway!(Arc<G>);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_validation() {
        let ok = DistributionRequest::new("r", vec![1, 2, 3], vec![0, 2]);
        assert!(ok.validate().is_ok());
        let dup = DistributionRequest::new("r", vec![1, 2, 3], vec![1, 1]);
        assert!(matches!(dup.validate(), Err(GatewayError::BadRequest(_))));
        let oob = DistributionRequest::new("r", vec![1, 2, 3], vec![3]);
        assert!(matches!(oob.validate(), Err(GatewayError::BadRequest(_))));
        let none = DistributionRequest::new("r", vec![1], vec![]);
        assert!(none.validate().is_err());
    }

    #[test]
    fn model_info_validation() {
        let mut info = ModelInfo {
            model_name: "m".into(),
            vocab_size: 4,
            mask_token_id: 3,
            max_positions: 8,
        };
        assert!(info.validate().is_ok());
        info.mask_token_id = 4;
        assert!(info.validate().is_err());
    }
}
