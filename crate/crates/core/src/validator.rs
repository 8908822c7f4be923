//! Similarity-threshold validation of candidate batches.
//!
//! A candidate is valid iff its maximum similarity to the retained
//! demonstration examples is strictly below `ThrV`; a candidate sitting
//! exactly on the threshold fails. Scores and nearest-example ids are kept
//! in the outcome so the scheduler and reports need not rescan.

use crate::embed::EmbeddingVector;
use crate::error::Result;
use crate::scalar::Real;
use crate::store::{DemoStore, SimilaritySummary, StoreSubset};

/// Verdicts for one validated batch, in input order.
#[derive(Debug, Clone)]
pub struct ValidationOutcome<T> {
    /// `true` at index `i` iff candidate `i` is valid.
    pub verdicts: Vec<bool>,
    /// Per-candidate similarity extremes and nearest example.
    pub summaries: Vec<SimilaritySummary<T>>,
}

impl<T: Real> ValidationOutcome<T> {
    pub fn valid_indices(&self) -> Vec<usize> {
        self.verdicts
            .iter()
            .enumerate()
            .filter_map(|(i, &v)| v.then_some(i))
            .collect()
    }

    pub fn invalid_indices(&self) -> Vec<usize> {
        self.verdicts
            .iter()
            .enumerate()
            .filter_map(|(i, &v)| (!v).then_some(i))
            .collect()
    }

    pub fn valid_count(&self) -> usize {
        self.verdicts.iter().filter(|&&v| v).count()
    }

    pub fn invalid_count(&self) -> usize {
        self.verdicts.len() - self.valid_count()
    }
}

/// Validate a batch of candidate embeddings against the retained subset.
/// An empty subset leaves every candidate valid with score 0.
pub fn validate<T: Real>(
    candidates: &[EmbeddingVector<T>],
    thrv: T,
    store: &DemoStore<T>,
    subset: &StoreSubset,
) -> Result<ValidationOutcome<T>> {
    debug_assert!(thrv > T::zero() && thrv <= T::one());
    let mut verdicts = Vec::with_capacity(candidates.len());
    let mut summaries = Vec::with_capacity(candidates.len());
    for candidate in candidates {
        let summary = store.similarity_profile(subset, candidate)?;
        verdicts.push(summary.max < thrv);
        summaries.push(summary);
    }
    Ok(ValidationOutcome {
        verdicts,
        summaries,
    })
}

/// Cumulative invalid-candidate bookkeeping for one time step. The counts
/// accumulate across refill rounds within a step and reset when the search
/// moves to the next step.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepValidationStats {
    pub examined: usize,
    pub invalid: usize,
}

impl StepValidationStats {
    pub fn record<T: Real>(&mut self, outcome: &ValidationOutcome<T>) {
        self.examined += outcome.verdicts.len();
        self.invalid += outcome.invalid_count();
    }

    /// Proportion of invalid candidates among those examined this step.
    /// Requires at least one validation this step.
    pub fn invalid_proportion<T: Real>(&self) -> T {
        debug_assert!(self.examined > 0, "no validation performed this step");
        T::from_usize(self.invalid).unwrap() / T::from_usize(self.examined).unwrap()
    }
}
