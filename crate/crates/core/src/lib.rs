//! Guarded beam-search decoding.
//!
//! The engine decodes from an n-gram language model with beam search while an
//! external validator rejects candidates that are too similar to a store of
//! demonstration examples (texts that violate some constraint). Validation
//! runs on a configurable schedule, and a rollback mechanism restores the
//! beam to the last validated state when every candidate at a step fails.
//!
//! Modules:
//! - [`token`]: whitespace tokenization and the dense [`token::Vocabulary`].
//! - [`ngram`]: add-k smoothed n-gram model, next-token distributions,
//!   perplexity.
//! - [`embed`]: deterministic signed feature-hashed TF-IDF embedder and
//!   cosine similarity.
//! - [`meanshift`]: flat-kernel mean shift used to cluster the store.
//! - [`store`]: demonstration-example store, clustering, ratio-R
//!   representative sampling, similarity scans.
//! - [`validator`]: threshold validation of candidate batches.
//! - [`scheduler`]: validation-timing policies (context-wise, fixed stride,
//!   exponential).
//! - [`search`]: the guarded beam search itself, plus the unguarded
//!   reference search.
//! - [`metrics`]: longest-common-subsequence metrics and violation scores.
//! - [`report`]: serializable per-run reports.
//!
//! All probability and similarity math is generic over the scalar type via
//! [`scalar::Real`] (`f32` or `f64`); the aliases below fix `f64` for
//! ordinary use.

pub mod embed;
pub mod error;
pub mod meanshift;
pub mod metrics;
pub mod ngram;
pub mod report;
pub mod scalar;
pub mod scheduler;
pub mod search;
pub mod store;
pub mod token;
pub mod validator;

pub use error::{Error, Result};
pub use scalar::Real;

/// Default embedding dimension.
pub const DEFAULT_EMBED_DIM: usize = 256;
/// Default validation threshold `ThrV`.
pub const DEFAULT_THRV: f64 = 0.3;
/// Default rollback threshold `ThrRB` (1.0: roll back only when every
/// candidate at a step is invalid).
pub const DEFAULT_THR_RB: f64 = 1.0;
/// Default intensity of the context-wise schedule.
pub const DEFAULT_LAMBDA: f64 = 200.0;
/// Default proportion of each cluster retained for validation.
pub const DEFAULT_RATIO: f64 = 1.0;

/// `f64` n-gram model.
pub type NgramModel64 = ngram::NgramModel<f64>;
/// `f64` embedder.
pub type Embedder64 = embed::Embedder<f64>;
/// `f64` embedding vector.
pub type EmbeddingVector64 = embed::EmbeddingVector<f64>;
/// `f64` demonstration-example store.
pub type DemoStore64 = store::DemoStore<f64>;
/// `f64` guard configuration.
pub type GuardConfig64 = search::GuardConfig<f64>;
/// `f64` schedule policy.
pub type SchedulePolicy64 = scheduler::SchedulePolicy<f64>;
