//! Add-k smoothed n-gram language model.
//!
//! The model is the next-token-distribution provider for the search engine:
//! it is trained from a plain token stream, answers dense probability
//! vectors over the vocabulary, and scores perplexity. Probabilities are
//! composed in log space by the callers; the model itself returns proper
//! distributions.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::token::{TokenId, Vocabulary};

/// On-disk schema version for serialized models.
pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Default)]
struct ContextCounts {
    total: u64,
    counts: HashMap<TokenId, u64>,
}

/// N-gram model with add-k smoothing.
///
/// Conditional probabilities are `(count(context, token) + k) /
/// (count(context) + k * |V|)` over contexts of exactly `order - 1` tokens.
/// A context that was never observed (including any context shorter than
/// `order - 1`) falls back to the uniform distribution, also when `k = 0`,
/// so decoding never stalls on unseen history.
#[derive(Debug, Clone)]
pub struct NgramModel<T: Real> {
    order: usize,
    smoothing_k: T,
    vocabulary: Vocabulary,
    contexts: HashMap<Box<[TokenId]>, ContextCounts>,
}

impl<T: Real> NgramModel<T> {
    /// Train from a token stream, building the vocabulary from the stream
    /// plus the reserved end-of-sequence token.
    pub fn train<S: AsRef<str>>(stream: &[S], order: usize, smoothing_k: T) -> Result<Self> {
        let vocabulary = Vocabulary::from_tokens(stream.iter().map(|s| s.as_ref()));
        let ids = vocabulary.ids(stream)?;
        Self::train_with_vocabulary(vocabulary, &ids, order, smoothing_k)
    }

    /// Train against an explicit vocabulary. An empty stream is allowed only
    /// with `k > 0`, where every query smooths to the uniform distribution.
    pub fn train_with_vocabulary(
        vocabulary: Vocabulary,
        stream: &[TokenId],
        order: usize,
        smoothing_k: T,
    ) -> Result<Self> {
        if order < 1 {
            return Err(Error::InvalidConfig("n-gram order must be >= 1".into()));
        }
        if smoothing_k < T::zero() {
            return Err(Error::InvalidConfig("smoothing k must be >= 0".into()));
        }
        if stream.len() < order && smoothing_k == T::zero() {
            return Err(Error::EmptyCorpus);
        }
        for &id in stream {
            if !vocabulary.contains(id) {
                return Err(Error::UnknownToken(format!("id {}", id.0)));
            }
        }

        let mut contexts: HashMap<Box<[TokenId]>, ContextCounts> = HashMap::new();
        for window in stream.windows(order) {
            let (ctx, target) = window.split_at(order - 1);
            let entry = contexts.entry(ctx.into()).or_default();
            entry.total += 1;
            *entry.counts.entry(target[0]).or_insert(0) += 1;
        }

        Ok(Self {
            order,
            smoothing_k,
            vocabulary,
            contexts,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing_k(&self) -> T {
        self.smoothing_k
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    /// The model's Markov context: the last `order - 1` tokens.
    fn truncate<'a>(&self, context: &'a [TokenId]) -> &'a [TokenId] {
        let keep = self.order - 1;
        if context.len() > keep {
            &context[context.len() - keep..]
        } else {
            context
        }
    }

    /// Dense next-token distribution given a context. The result has one
    /// entry per vocabulary token, entries are non-negative, and they sum
    /// to 1 (within float tolerance).
    pub fn next_distribution(&self, context: &[TokenId]) -> Vec<T> {
        let v = self.vocabulary.len();
        let uniform = T::one() / T::from_usize(v).unwrap();
        let ctx = self.truncate(context);
        let Some(entry) = self.contexts.get(ctx) else {
            return vec![uniform; v];
        };
        let denom =
            T::from_u64(entry.total).unwrap() + self.smoothing_k * T::from_usize(v).unwrap();
        (0..v)
            .map(|i| {
                let count = entry.counts.get(&TokenId(i as u32)).copied().unwrap_or(0);
                (T::from_u64(count).unwrap() + self.smoothing_k) / denom
            })
            .collect()
    }

    /// Probability of one token after a context; same code path as
    /// [`Self::next_distribution`] so likelihoods recompute bit-identically.
    pub fn prob(&self, context: &[TokenId], token: TokenId) -> T {
        self.next_distribution(context)[token.index()]
    }

    /// Perplexity of a token sequence: `exp(-(1/M) * sum_j ln p(t_j | t_<j))`
    /// where the first token serves as context only and the remaining `M`
    /// tokens are scored. A sequence with nothing to score has perplexity 1.
    /// A zero-probability step is reported as an error rather than a number.
    pub fn perplexity(&self, text: &[TokenId]) -> Result<T> {
        if text.is_empty() {
            return Err(Error::InvalidConfig(
                "cannot score an empty sequence".into(),
            ));
        }
        self.conditional_perplexity(&text[..1], &text[1..])
    }

    /// Perplexity of `continuation` given a fixed preceding `context`; every
    /// continuation token is scored.
    pub fn conditional_perplexity(
        &self,
        context: &[TokenId],
        continuation: &[TokenId],
    ) -> Result<T> {
        if continuation.is_empty() {
            return Ok(T::one());
        }
        let mut history: Vec<TokenId> = context.to_vec();
        let mut sum_log = T::zero();
        for (j, &token) in continuation.iter().enumerate() {
            let p = self.prob(&history, token);
            if p <= T::zero() {
                return Err(Error::InfinitePerplexity {
                    token: self.vocabulary.token(token).to_owned(),
                    position: context.len() + j,
                });
            }
            sum_log = sum_log + p.ln();
            history.push(token);
        }
        let m = T::from_usize(continuation.len()).unwrap();
        Ok((-(sum_log / m)).exp())
    }

    /// Serialize to a versioned JSON file.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = ModelFile::from_model(self);
        fs::write(path, serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }

    /// Load a model previously written by [`Self::save`].
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(&fs::read_to_string(path)?)?;
        file.into_model()
    }
}

/// Serialized model layout (`schema` = [`MODEL_SCHEMA_VERSION`]). Context
/// entries and their counts are sorted so the file is deterministic.
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    schema: u32,
    order: usize,
    smoothing_k: f64,
    vocabulary: Vec<String>,
    contexts: Vec<ContextEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ContextEntry {
    context: Vec<u32>,
    counts: Vec<(u32, u64)>,
}

impl ModelFile {
    fn from_model<T: Real>(model: &NgramModel<T>) -> Self {
        let mut contexts: Vec<ContextEntry> = model
            .contexts
            .iter()
            .map(|(ctx, entry)| {
                let mut counts: Vec<(u32, u64)> =
                    entry.counts.iter().map(|(id, &c)| (id.0, c)).collect();
                counts.sort_unstable();
                ContextEntry {
                    context: ctx.iter().map(|id| id.0).collect(),
                    counts,
                }
            })
            .collect();
        contexts.sort_by(|a, b| a.context.cmp(&b.context));
        Self {
            schema: MODEL_SCHEMA_VERSION,
            order: model.order,
            smoothing_k: model.smoothing_k.as_f64(),
            vocabulary: model.vocabulary.tokens().to_vec(),
            contexts,
        }
    }

    fn into_model<T: Real>(self) -> Result<NgramModel<T>> {
        if self.schema != MODEL_SCHEMA_VERSION {
            return Err(Error::Parse(format!(
                "unsupported model schema {}, expected {}",
                self.schema, MODEL_SCHEMA_VERSION
            )));
        }
        if self.vocabulary.first().map(String::as_str) != Some(crate::token::EOS_TOKEN) {
            return Err(Error::Parse(
                "vocabulary must start with the eos token".into(),
            ));
        }
        let vocabulary = Vocabulary::from_tokens(self.vocabulary.iter().skip(1));
        if vocabulary.len() != self.vocabulary.len() {
            return Err(Error::Parse("vocabulary contains duplicate tokens".into()));
        }
        let mut contexts = HashMap::new();
        for entry in self.contexts {
            let ctx: Box<[TokenId]> = entry.context.iter().map(|&id| TokenId(id)).collect();
            let mut counts = HashMap::new();
            let mut total = 0;
            for (id, c) in entry.counts {
                total += c;
                counts.insert(TokenId(id), c);
            }
            contexts.insert(ctx, ContextCounts { total, counts });
        }
        Ok(NgramModel {
            order: self.order,
            smoothing_k: T::of(self.smoothing_k),
            vocabulary,
            contexts,
        })
    }
}
