//! Demonstration-example store.
//!
//! Holds the texts that violate the constraint being enforced, each with its
//! embedding. The store can be clustered with mean shift and thinned to a
//! ratio-R representative subset (at least one example per cluster), and it
//! answers exact max-similarity scans for the validator.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::embed::{cosine, Embedder, EmbeddingVector};
use crate::error::{Error, Result};
use crate::meanshift::{Bandwidth, Clustering, MeanShift};
use crate::scalar::Real;
use crate::token::tokenize;

/// One banned/reference text with its embedding and (after clustering) its
/// cluster label.
#[derive(Debug, Clone)]
pub struct DemonstrationExample<T> {
    pub id: String,
    pub tokens: Vec<String>,
    pub vector: EmbeddingVector<T>,
    pub cluster: Option<usize>,
}

/// Clustering and sampling configuration for the store.
#[derive(Debug, Clone)]
pub struct StoreConfig<T> {
    /// Proportion of each cluster retained for validation, in `(0, 1]`.
    pub ratio: T,
    /// Cluster before sampling. Without clustering the whole store is
    /// treated as a single cluster.
    pub do_clustering: bool,
    pub bandwidth: Bandwidth<T>,
    pub max_iterations: usize,
    pub shift_tolerance: T,
}

impl<T: Real> Default for StoreConfig<T> {
    fn default() -> Self {
        Self {
            ratio: T::one(),
            do_clustering: false,
            bandwidth: Bandwidth::Auto,
            max_iterations: 300,
            shift_tolerance: T::of(1e-5),
        }
    }
}

/// Raw record as read from the examples file.
#[derive(Debug, Clone, Deserialize)]
pub struct RawExample {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub embedding: Option<Vec<f64>>,
}

/// Read a JSON Lines examples file: one `{"id", "text"}` object per line,
/// with an optional `"embedding"` overriding the built-in embedder.
pub fn read_examples_jsonl(path: impl AsRef<Path>) -> Result<Vec<RawExample>> {
    let body = fs::read_to_string(path)?;
    let mut records = Vec::new();
    for (lineno, line) in body.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: RawExample = serde_json::from_str(line)
            .map_err(|e| Error::Parse(format!("examples line {}: {e}", lineno + 1)))?;
        records.push(record);
    }
    Ok(records)
}

/// Immutable collection of demonstration examples.
#[derive(Debug, Clone)]
pub struct DemoStore<T> {
    examples: Vec<DemonstrationExample<T>>,
}

/// Indices of the retained examples, in store order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoreSubset {
    pub indices: Vec<usize>,
}

impl StoreSubset {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Per-candidate similarity against a retained subset: the extremes over all
/// (candidate, example) pairs plus the closest example's id. An empty subset
/// scores zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilaritySummary<T> {
    pub max: T,
    pub min: T,
    pub nearest: Option<String>,
}

impl<T: Real> SimilaritySummary<T> {
    pub fn empty() -> Self {
        Self {
            max: T::zero(),
            min: T::zero(),
            nearest: None,
        }
    }
}

impl<T: Real> DemoStore<T> {
    /// Build a store from raw records, embedding each text with the given
    /// (already fitted) embedder unless the record carries an explicit
    /// embedding, which must match the embedder's dimension and is
    /// unit-normalized on load. Ids must be unique.
    pub fn build(records: &[RawExample], embedder: &Embedder<T>) -> Result<Self> {
        let mut examples: Vec<DemonstrationExample<T>> = Vec::with_capacity(records.len());
        for record in records {
            if examples.iter().any(|e| e.id == record.id) {
                return Err(Error::DuplicateExampleId(record.id.clone()));
            }
            let tokens = tokenize(&record.text);
            let vector = match &record.embedding {
                Some(values) => {
                    if values.len() != embedder.dimension() {
                        return Err(Error::DimensionMismatch {
                            expected: embedder.dimension(),
                            got: values.len(),
                        });
                    }
                    EmbeddingVector::new(values.iter().map(|&x| T::of(x)).collect()).normalized()
                }
                None => embedder.embed(&tokens),
            };
            examples.push(DemonstrationExample {
                id: record.id.clone(),
                tokens,
                vector,
                cluster: None,
            });
        }
        Ok(Self { examples })
    }

    pub fn from_examples(examples: Vec<DemonstrationExample<T>>) -> Result<Self> {
        for (i, e) in examples.iter().enumerate() {
            if examples[..i].iter().any(|other| other.id == e.id) {
                return Err(Error::DuplicateExampleId(e.id.clone()));
            }
        }
        Ok(Self { examples })
    }

    pub fn empty() -> Self {
        Self {
            examples: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn examples(&self) -> &[DemonstrationExample<T>] {
        &self.examples
    }

    /// Mean-shift cluster the example vectors (on the unit sphere) and store
    /// the labels. Every example receives a label.
    pub fn cluster(&mut self, config: &StoreConfig<T>, seed: u64) -> Result<Clustering<T>> {
        if self.examples.is_empty() {
            return Err(Error::InvalidConfig("cannot cluster an empty store".into()));
        }
        let points: Vec<Vec<T>> = self
            .examples
            .iter()
            .map(|e| e.vector.values().to_vec())
            .collect();
        let ms = MeanShift {
            bandwidth: config.bandwidth,
            max_iterations: config.max_iterations,
            shift_tolerance: config.shift_tolerance,
            on_sphere: true,
        };
        let clustering = ms.cluster(&points, seed)?;
        for (example, &label) in self.examples.iter_mut().zip(&clustering.labels) {
            example.cluster = Some(label);
        }
        Ok(clustering)
    }

    /// Current labels; examples never clustered all fall in cluster 0.
    fn labels(&self) -> Vec<usize> {
        self.examples
            .iter()
            .map(|e| e.cluster.unwrap_or(0))
            .collect()
    }

    /// The full store as a subset.
    pub fn subset_full(&self) -> StoreSubset {
        StoreSubset {
            indices: (0..self.examples.len()).collect(),
        }
    }

    /// From each cluster of size `s`, retain exactly `ceil(ratio * s)`
    /// examples chosen uniformly at random under `seed`. Every cluster keeps
    /// at least one example. The result is in store order.
    pub fn sample_representatives(&self, ratio: T, seed: u64) -> Result<StoreSubset> {
        self.sample_with_labels(&self.labels(), ratio, seed)
    }

    /// Same as [`Self::sample_representatives`] with explicit labels.
    pub fn sample_with_labels(&self, labels: &[usize], ratio: T, seed: u64) -> Result<StoreSubset> {
        if !(ratio > T::zero() && ratio <= T::one()) {
            return Err(Error::InvalidConfig("ratio must lie in (0, 1]".into()));
        }
        if labels.len() != self.examples.len() {
            return Err(Error::InvalidConfig("labels must cover the store".into()));
        }
        if ratio == T::one() {
            return Ok(self.subset_full());
        }
        let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (index, &label) in labels.iter().enumerate() {
            clusters.entry(label).or_default().push(index);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut retained = Vec::new();
        for members in clusters.values() {
            let take = Self::sample_size(ratio, members.len());
            let mut chosen: Vec<usize> = members.choose_multiple(&mut rng, take).copied().collect();
            chosen.sort_unstable();
            retained.extend(chosen);
        }
        retained.sort_unstable();
        Ok(StoreSubset { indices: retained })
    }

    /// `ceil(ratio * size)` clamped to `[1, size]`.
    pub fn sample_size(ratio: T, size: usize) -> usize {
        let raw = (ratio * T::from_usize(size).unwrap()).ceil();
        let take = raw.to_usize().unwrap_or(1);
        take.clamp(1, size)
    }

    /// Exact similarity scan of a candidate vector against a subset. The
    /// maximum drives validation verdicts; ties on the maximum resolve to
    /// the lexicographically smallest example id.
    pub fn similarity_profile(
        &self,
        subset: &StoreSubset,
        candidate: &EmbeddingVector<T>,
    ) -> Result<SimilaritySummary<T>> {
        let mut summary = SimilaritySummary::empty();
        let mut first = true;
        for &index in &subset.indices {
            let example = &self.examples[index];
            let score = cosine(candidate, &example.vector)?;
            if first {
                summary.max = score;
                summary.min = score;
                summary.nearest = Some(example.id.clone());
                first = false;
                continue;
            }
            if score > summary.max
                || (score == summary.max
                    && summary
                        .nearest
                        .as_deref()
                        .is_none_or(|nearest| example.id.as_str() < nearest))
            {
                summary.max = score;
                summary.nearest = Some(example.id.clone());
            }
            if score < summary.min {
                summary.min = score;
            }
        }
        Ok(summary)
    }

    /// Max-similarity scan: the score and the nearest example id.
    pub fn max_similarity(
        &self,
        subset: &StoreSubset,
        candidate: &EmbeddingVector<T>,
    ) -> Result<(T, Option<String>)> {
        let summary = self.similarity_profile(subset, candidate)?;
        Ok((summary.max, summary.nearest))
    }
}
