//! Probing how grammatical constructions constrain a masked language
//! model's output distribution.
//!
//! The crate is organized around a model-agnostic [`gateway`]: everything
//! above it ([`affinity`], [`evals`], [`corpus`]) only sees tokenizations and
//! full-vocabulary log-prob vectors at masked positions.

pub mod affinity;
pub mod corpus;
pub mod datasets;
pub mod evals;
pub mod gateway;
pub mod model;
pub mod report;
pub mod stats;
pub mod tagger;

pub use affinity::{AffinityError, PairwiseAffinityMatrix};
pub use gateway::{
    CachedGateway, DistributionRequest, DistributionResponse, Gateway, GatewayClient, GatewayError,
    MockGateway, MockMode, ModelInfo,
};
pub use model::{
    align_words, maskable, AffinityKind, AffinityRecord, AnalyzedSentence, Distribution,
    SkipReason, TokenOffset, WordSpan,
};
