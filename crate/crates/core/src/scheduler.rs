//! Validation-timing policies.
//!
//! The context-wise rule widens the gap to the next validation when the
//! current candidates sit far below the validation threshold and shrinks it
//! to one step when they approach it:
//!
//! ```text
//! next = cur + ceil(2^(lambda * (thrv - s)))
//! ```
//!
//! where `s` aggregates the candidate-to-example similarities of the current
//! validation step. Fixed baselines (every step, every k steps, powers of a
//! base) are provided for comparison.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::store::SimilaritySummary;

/// Cap on `lambda * (thrv - s)` before exponentiation. `2^62` steps already
/// exceed any realistic token budget, so the cap never changes observable
/// schedules once the result is clamped to the final step.
const MAX_EXPONENT: f64 = 62.0;

/// How the per-candidate similarity summaries collapse to the scalar `s` of
/// the context-wise rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimilarityAggregation {
    /// Minimum over all (candidate, example) pairs: the literal reading of
    /// the timing rule. A single near-miss candidate cannot shorten the gap
    /// under this mode.
    MinPairs,
    /// Maximum over candidates of each candidate's own maximum: validation
    /// tightens as soon as any candidate drifts toward the examples.
    MaxOfMax,
}

/// Which schedule drives validation timing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    ContextWise,
    Step1,
    StepK(usize),
    ExponentialBase(usize),
}

/// A schedule with its parameters. `thrv` is shared with the validator.
#[derive(Debug, Clone)]
pub struct SchedulePolicy<T> {
    pub kind: ScheduleKind,
    pub lambda: T,
    pub thrv: T,
    pub aggregation: SimilarityAggregation,
}

impl<T: Real> SchedulePolicy<T> {
    pub fn new(
        kind: ScheduleKind,
        lambda: T,
        thrv: T,
        aggregation: SimilarityAggregation,
    ) -> Result<Self> {
        match kind {
            ScheduleKind::StepK(k) if k < 1 => {
                return Err(Error::InvalidConfig("step stride must be >= 1".into()));
            }
            ScheduleKind::ExponentialBase(b) if b < 2 => {
                return Err(Error::InvalidConfig("exponential base must be >= 2".into()));
            }
            ScheduleKind::ContextWise if lambda <= T::zero() => {
                return Err(Error::InvalidConfig("lambda must be positive".into()));
            }
            _ => {}
        }
        Ok(Self {
            kind,
            lambda,
            thrv,
            aggregation,
        })
    }

    pub fn context_wise(lambda: T, thrv: T, aggregation: SimilarityAggregation) -> Result<Self> {
        Self::new(ScheduleKind::ContextWise, lambda, thrv, aggregation)
    }
}

/// The next step at which validation should run.
///
/// Always strictly greater than `cur_step`, clamped to `max_token - 1`
/// whenever steps remain. `similarity_stats` are the summaries of the
/// candidates accepted at the current validation step; they are required
/// for the context-wise rule and ignored by the fixed baselines.
pub fn next_validation_step<T: Real>(
    policy: &SchedulePolicy<T>,
    cur_step: usize,
    similarity_stats: &[SimilaritySummary<T>],
    max_token: usize,
) -> Result<usize> {
    let next = match policy.kind {
        ScheduleKind::Step1 => cur_step + 1,
        ScheduleKind::StepK(k) => cur_step + k,
        ScheduleKind::ExponentialBase(b) => {
            let mut power: usize = 1;
            while power <= cur_step {
                power = power.saturating_mul(b);
            }
            power
        }
        ScheduleKind::ContextWise => {
            if similarity_stats.is_empty() {
                return Err(Error::MissingSimilarityStats);
            }
            let s = aggregate(policy.aggregation, similarity_stats);
            let exponent = (policy.lambda * (policy.thrv - s))
                .min(T::of(MAX_EXPONENT))
                .as_f64();
            // The true gap ceil(2^x) is always >= 1; guard against the
            // floating-point underflow of 2^x to 0 for very negative x.
            let gap = (exponent.exp2().ceil() as u64).max(1) as usize;
            cur_step.saturating_add(gap)
        }
    };
    // The last generation step is forced to validate by the engine, so a
    // schedule pointing past it is pulled back onto it.
    let clamped = next.min(max_token.saturating_sub(1));
    Ok(if clamped <= cur_step {
        cur_step + 1
    } else {
        clamped
    })
}

fn aggregate<T: Real>(mode: SimilarityAggregation, stats: &[SimilaritySummary<T>]) -> T {
    match mode {
        SimilarityAggregation::MinPairs => stats.iter().map(|s| s.min).fold(T::infinity(), T::min),
        SimilarityAggregation::MaxOfMax => {
            stats.iter().map(|s| s.max).fold(T::neg_infinity(), T::max)
        }
    }
}
