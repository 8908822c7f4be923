//! Guarded beam search.
//!
//! The engine maintains the `2K` most likely candidates per time step. On
//! validation steps (chosen by the schedule, always including the final
//! step) every candidate produced for the step is checked against the
//! demonstration-example subset; invalid candidates are banned and the next
//! most likely extensions are generated until `2K` valid candidates stand.
//! When the cumulative invalid proportion of a step reaches `ThrRB`, the
//! beam rolls back to the snapshot of the previous validated step, the
//! abandoned step's candidate set is banned so the identical path cannot
//! recur, and search resumes one step after the snapshot with an immediate
//! re-validation. Bans persist for the whole run.
//!
//! With an empty example subset the guard is vacuous and the engine runs the
//! plain reference beam search, bit-for-bit.

use std::collections::HashSet;

use crate::embed::{Embedder, EmbeddingVector};
use crate::error::{Error, Result};
use crate::ngram::NgramModel;
use crate::scalar::Real;
use crate::scheduler::{self, SchedulePolicy, SimilarityAggregation};
use crate::store::{DemoStore, SimilaritySummary, StoreSubset};
use crate::token::{TokenId, Vocabulary};
use crate::validator::{validate, StepValidationStats};
use crate::{DEFAULT_LAMBDA, DEFAULT_RATIO, DEFAULT_THRV, DEFAULT_THR_RB};

/// A partial continuation: generated tokens (prompt excluded), the
/// cumulative log-likelihood of those tokens, and whether the candidate can
/// still be extended (it terminates once it emits the end-of-sequence
/// token).
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate<T> {
    pub tokens: Vec<TokenId>,
    pub cum_loglik: T,
    pub alive: bool,
}

impl<T: Real> Candidate<T> {
    fn root() -> Self {
        Self {
            tokens: Vec::new(),
            cum_loglik: T::zero(),
            alive: true,
        }
    }
}

/// Beam ordering: likelihood descending, ties by lexicographic token order.
fn cmp_candidates<T: Real>(a: &Candidate<T>, b: &Candidate<T>) -> std::cmp::Ordering {
    b.cum_loglik
        .partial_cmp(&a.cum_loglik)
        .expect("likelihoods are finite")
        .then_with(|| a.tokens.cmp(&b.tokens))
}

/// Search parameters. `ratio` and `seed` drive the store preparation done by
/// the caller; the search itself is deterministic.
#[derive(Debug, Clone)]
pub struct GuardConfig<T> {
    pub beam_k: usize,
    pub max_token: usize,
    /// End-of-sequence is blocked until this many tokens were generated.
    /// Raw cumulative log-likelihood always favours shorter sequences, so
    /// without a floor an early end-of-sequence outranks every full
    /// continuation. 0 leaves stopping entirely to the model.
    pub min_tokens: usize,
    pub thrv: T,
    pub thr_rb: T,
    pub ratio: T,
    pub schedule: SchedulePolicy<T>,
    pub attempt_budget: usize,
    pub rollback_budget: usize,
    pub seed: u64,
}

impl<T: Real> GuardConfig<T> {
    pub fn new(beam_k: usize, max_token: usize) -> Self {
        let thrv = T::of(DEFAULT_THRV);
        Self {
            beam_k,
            max_token,
            min_tokens: 0,
            thrv,
            thr_rb: T::of(DEFAULT_THR_RB),
            ratio: T::of(DEFAULT_RATIO),
            schedule: SchedulePolicy::context_wise(
                T::of(DEFAULT_LAMBDA),
                thrv,
                SimilarityAggregation::MinPairs,
            )
            .expect("default schedule is valid"),
            attempt_budget: 16 * beam_k,
            rollback_budget: 8,
            seed: 0,
        }
    }

    fn check(&self) -> Result<()> {
        if self.beam_k < 1 {
            return Err(Error::InvalidConfig("beam size must be >= 1".into()));
        }
        if self.max_token < 1 {
            return Err(Error::InvalidConfig("max token must be >= 1".into()));
        }
        if !(self.thrv > T::zero() && self.thrv <= T::one()) {
            return Err(Error::InvalidConfig("thrv must lie in (0, 1]".into()));
        }
        if !(self.thr_rb > T::zero() && self.thr_rb <= T::one()) {
            return Err(Error::InvalidConfig("thr_rb must lie in (0, 1]".into()));
        }
        if self.attempt_budget < 1 || self.rollback_budget < 1 {
            return Err(Error::InvalidConfig("budgets must be >= 1".into()));
        }
        if self.schedule.thrv != self.thrv {
            return Err(Error::InvalidConfig(
                "schedule thrv must match the validator thrv".into(),
            ));
        }
        Ok(())
    }
}

/// The validator side of a run: embedder, full store, and the retained
/// subset.
#[derive(Debug, Clone, Copy)]
pub struct GuardContext<'a, T: Real> {
    pub embedder: &'a Embedder<T>,
    pub store: &'a DemoStore<T>,
    pub subset: &'a StoreSubset,
}

/// Validation effort counters: steps on which validation ran, individual
/// validator calls, and rollbacks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchCounters {
    pub steps_validated: usize,
    pub validations: usize,
    pub rollbacks: usize,
}

/// Completed search: up to `K` sequences, best first, with the similarity
/// score each carried at its final validation (zero when unguarded).
#[derive(Debug, Clone)]
pub struct SearchOutcome<T> {
    pub outputs: Vec<Candidate<T>>,
    pub final_scores: Vec<T>,
    pub counters: SearchCounters,
}

/// Run the guarded search. With an empty subset the output is bit-identical
/// to [`run_reference`] and the counters stay zero.
pub fn run_guarded<T: Real>(
    model: &NgramModel<T>,
    guard: &GuardContext<'_, T>,
    config: &GuardConfig<T>,
    prompt: &[TokenId],
) -> Result<SearchOutcome<T>> {
    config.check()?;
    check_prompt(model.vocabulary(), prompt)?;
    let active = if guard.subset.is_empty() {
        None
    } else {
        Some(guard)
    };
    search_loop(model, active, config, prompt)
}

/// Plain beam search without any validation.
pub fn run_reference<T: Real>(
    model: &NgramModel<T>,
    beam_k: usize,
    max_token: usize,
    min_tokens: usize,
    prompt: &[TokenId],
) -> Result<SearchOutcome<T>> {
    let mut config = GuardConfig::new(beam_k, max_token);
    config.min_tokens = min_tokens;
    config.check()?;
    check_prompt(model.vocabulary(), prompt)?;
    search_loop(model, None, &config, prompt)
}

fn check_prompt(vocabulary: &Vocabulary, prompt: &[TokenId]) -> Result<()> {
    for &id in prompt {
        if !vocabulary.contains(id) {
            return Err(Error::UnknownToken(format!("id {}", id.0)));
        }
    }
    Ok(())
}

/// The continuation text a candidate is validated on: its tokens with the
/// trailing end-of-sequence marker stripped, rendered as strings. Scoring
/// and reporting reuse the same span so independent re-validation agrees
/// with the engine.
pub fn validation_span(vocabulary: &Vocabulary, tokens: &[TokenId]) -> Vec<String> {
    let eos = vocabulary.eos();
    let end = if tokens.last() == Some(&eos) {
        tokens.len() - 1
    } else {
        tokens.len()
    };
    vocabulary.strings(&tokens[..end])
}

struct Snapshot<T> {
    beam: Vec<Candidate<T>>,
    step: usize,
}

fn search_loop<T: Real>(
    model: &NgramModel<T>,
    guard: Option<&GuardContext<'_, T>>,
    config: &GuardConfig<T>,
    prompt: &[TokenId],
) -> Result<SearchOutcome<T>> {
    let beam_width = 2 * config.beam_k;
    let eos = model.vocabulary().eos();
    let mut beam = vec![Candidate::root()];
    let mut snapshots: Vec<Snapshot<T>> = Vec::new();
    let mut banned: HashSet<Vec<TokenId>> = HashSet::new();
    let mut counters = SearchCounters::default();
    let mut next_validation = 0usize;
    let mut final_summaries: Vec<SimilaritySummary<T>> = Vec::new();

    let mut step = 0usize;
    while step < config.max_token {
        let entering_all_finished = beam.iter().all(|c| !c.alive);
        let is_final = step + 1 == config.max_token || entering_all_finished;
        let validate_now = guard.is_some() && (step == next_validation || is_final);

        // Next-token distributions for the step, one per live candidate.
        let dists: Vec<Option<Vec<T>>> = beam
            .iter()
            .map(|c| {
                c.alive.then(|| {
                    let mut ctx = Vec::with_capacity(prompt.len() + c.tokens.len());
                    ctx.extend_from_slice(prompt);
                    ctx.extend_from_slice(&c.tokens);
                    model.next_distribution(&ctx)
                })
            })
            .collect();

        let mut accepted: Vec<Candidate<T>> = Vec::new();
        let mut summaries: Vec<SimilaritySummary<T>> = Vec::new();
        let mut stats = StepValidationStats::default();
        let mut seen: HashSet<Vec<TokenId>> = HashSet::new();
        let mut rolled_back = false;
        let mut attempts = 0usize;

        // Finished candidates carry over unchanged; they still face
        // validation on validation steps like everything else.
        let carried: Vec<Candidate<T>> = beam
            .iter()
            .filter(|c| !c.alive && !banned.contains(&c.tokens))
            .cloned()
            .collect();
        let mut pending = (!carried.is_empty()).then_some(carried);

        loop {
            let batch = match pending.take() {
                Some(batch) => batch,
                None => {
                    if accepted.len() >= beam_width {
                        break;
                    }
                    let need = beam_width - accepted.len();
                    let batch = select_extensions(
                        &beam,
                        &dists,
                        need,
                        &banned,
                        &seen,
                        eos,
                        config.min_tokens,
                    );
                    if batch.is_empty() {
                        break; // extension space exhausted; a narrow beam is fine
                    }
                    attempts += 1;
                    if attempts > config.attempt_budget {
                        return Err(Error::SafetyExhausted { step, attempts });
                    }
                    batch
                }
            };
            for c in &batch {
                seen.insert(c.tokens.clone());
            }
            if validate_now {
                let ctx = guard.expect("validation only runs with a guard");
                let vectors: Vec<EmbeddingVector<T>> = batch
                    .iter()
                    .map(|c| {
                        ctx.embedder
                            .embed(&validation_span(model.vocabulary(), &c.tokens))
                    })
                    .collect();
                let outcome = validate(&vectors, config.thrv, ctx.store, ctx.subset)?;
                counters.validations += 1;
                stats.record(&outcome);
                for (candidate, (ok, summary)) in batch
                    .into_iter()
                    .zip(outcome.verdicts.iter().zip(outcome.summaries))
                {
                    if *ok {
                        accepted.push(candidate);
                        summaries.push(summary);
                    } else {
                        banned.insert(candidate.tokens);
                    }
                }
                // With nothing to restore the trigger is moot: keep
                // searching deeper within the attempt budget instead of
                // giving up on the first bad round.
                if stats.invalid_proportion::<T>() >= config.thr_rb && !snapshots.is_empty() {
                    rolled_back = true;
                    break;
                }
            } else {
                accepted.extend(batch);
            }
        }

        // A step that accepted nothing cannot proceed either way.
        if accepted.is_empty() {
            rolled_back = true;
        }

        if rolled_back {
            counters.rollbacks += 1;
            if counters.rollbacks > config.rollback_budget {
                return Err(Error::RollbackExhausted {
                    budget: config.rollback_budget,
                });
            }
            let Some(snapshot) = snapshots.pop() else {
                return Err(Error::SafetyExhausted { step, attempts });
            };
            // Ban the abandoned step's candidate set so the identical path
            // is not regenerated, then restart just after the snapshot with
            // an immediate re-validation.
            for c in &beam {
                banned.insert(c.tokens.clone());
            }
            beam = snapshot.beam;
            next_validation = snapshot.step + 1;
            step = snapshot.step + 1;
            continue;
        }

        sort_step_output(&mut accepted, &mut summaries);
        beam = accepted;

        if validate_now {
            counters.steps_validated += 1;
            next_validation = scheduler::next_validation_step(
                &config.schedule,
                step,
                &summaries,
                config.max_token,
            )?;
            snapshots.push(Snapshot {
                beam: beam.clone(),
                step,
            });
            final_summaries = summaries;
            if is_final || beam.iter().all(|c| !c.alive) {
                return Ok(emit(beam, &final_summaries, counters, config.beam_k));
            }
        } else if guard.is_none() && beam.iter().all(|c| !c.alive) {
            break; // unguarded early stop: every candidate has ended
        }
        step += 1;
    }

    // Only the unguarded path falls through (the guarded path always returns
    // from a validated final step or errors out).
    Ok(emit(beam, &final_summaries, counters, config.beam_k))
}

/// Order a step's accepted candidates (and their validation summaries, when
/// the step validated) for the beam invariant.
fn sort_step_output<T: Real>(
    candidates: &mut Vec<Candidate<T>>,
    summaries: &mut Vec<SimilaritySummary<T>>,
) {
    if summaries.len() == candidates.len() {
        let mut paired: Vec<(Candidate<T>, SimilaritySummary<T>)> =
            candidates.drain(..).zip(summaries.drain(..)).collect();
        paired.sort_by(|a, b| cmp_candidates(&a.0, &b.0));
        for (c, s) in paired {
            candidates.push(c);
            summaries.push(s);
        }
    } else {
        debug_assert!(summaries.is_empty());
        candidates.sort_by(cmp_candidates);
    }
}

fn emit<T: Real>(
    beam: Vec<Candidate<T>>,
    summaries: &[SimilaritySummary<T>],
    counters: SearchCounters,
    beam_k: usize,
) -> SearchOutcome<T> {
    let outputs: Vec<Candidate<T>> = beam.into_iter().take(beam_k).collect();
    let final_scores = outputs
        .iter()
        .enumerate()
        .map(|(i, _)| summaries.get(i).map_or(T::zero(), |s| s.max))
        .collect();
    SearchOutcome {
        outputs,
        final_scores,
        counters,
    }
}

/// The `need` most likely one-token extensions of the live beam members,
/// skipping any extension whose full token sequence is banned (or already
/// produced this step) and any zero-probability token. Returns fewer than
/// `need` candidates when the extension space is exhausted.
pub fn generate_next_candidates<T: Real>(
    model: &NgramModel<T>,
    prompt: &[TokenId],
    beam: &[Candidate<T>],
    need: usize,
    banned: &HashSet<Vec<TokenId>>,
) -> Vec<Candidate<T>> {
    let dists: Vec<Option<Vec<T>>> = beam
        .iter()
        .map(|c| {
            c.alive.then(|| {
                let mut ctx = Vec::with_capacity(prompt.len() + c.tokens.len());
                ctx.extend_from_slice(prompt);
                ctx.extend_from_slice(&c.tokens);
                model.next_distribution(&ctx)
            })
        })
        .collect();
    select_extensions(
        beam,
        &dists,
        need,
        banned,
        &HashSet::new(),
        model.vocabulary().eos(),
        0,
    )
}

fn select_extensions<T: Real>(
    beam: &[Candidate<T>],
    dists: &[Option<Vec<T>>],
    need: usize,
    banned: &HashSet<Vec<TokenId>>,
    seen: &HashSet<Vec<TokenId>>,
    eos: TokenId,
    min_tokens: usize,
) -> Vec<Candidate<T>> {
    // Rank (parent, token) pairs without materializing token vectors;
    // sequences are only built for the winners as the ranking is walked.
    let mut pool: Vec<(usize, u32, T)> = Vec::new();
    for (parent_index, (parent, dist)) in beam.iter().zip(dists).enumerate() {
        let Some(dist) = dist else { continue };
        debug_assert!(parent.alive);
        for (token_index, &p) in dist.iter().enumerate() {
            if TokenId(token_index as u32) == eos && parent.tokens.len() < min_tokens {
                continue;
            }
            if p > T::zero() {
                pool.push((parent_index, token_index as u32, parent.cum_loglik + p.ln()));
            }
        }
    }
    pool.sort_by(|a, b| {
        b.2.partial_cmp(&a.2)
            .expect("likelihoods are finite")
            .then_with(|| beam[a.0].tokens.cmp(&beam[b.0].tokens))
            .then_with(|| a.1.cmp(&b.1))
    });

    let mut out = Vec::with_capacity(need);
    for (parent_index, token, cum) in pool {
        if out.len() == need {
            break;
        }
        let parent = &beam[parent_index];
        let mut tokens = Vec::with_capacity(parent.tokens.len() + 1);
        tokens.extend_from_slice(&parent.tokens);
        tokens.push(TokenId(token));
        if banned.contains(&tokens) || seen.contains(&tokens) {
            continue;
        }
        out.push(Candidate {
            alive: TokenId(token) != eos,
            cum_loglik: cum,
            tokens,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::Embedder;
    use crate::ngram::NgramModel;
    use crate::store::{DemoStore, RawExample};
    use crate::token::tokenize;

    /// Tiny deterministic world: model over {x, y, z} plus eos, trained so
    /// probabilities are easy to read off.
    fn chain_model() -> NgramModel<f64> {
        // Bigrams: x->y 3, x->z 1, y->x 2, y->z 1, z->x 2.
        let stream: Vec<&str> = "x y x y z x z x y x".split_whitespace().collect();
        NgramModel::train(&stream, 2, 0.0).unwrap()
    }

    fn ids(model: &NgramModel<f64>, text: &str) -> Vec<TokenId> {
        model.vocabulary().ids(&tokenize(text)).unwrap()
    }

    fn guard_parts(model: &NgramModel<f64>, texts: &[&str]) -> (Embedder<f64>, DemoStore<f64>) {
        let _ = model;
        let docs: Vec<Vec<String>> = texts.iter().map(|t| tokenize(t)).collect();
        let embedder = Embedder::fit(128, 3, &docs).unwrap();
        let records: Vec<RawExample> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| RawExample {
                id: format!("e{i}"),
                text: (*t).to_owned(),
                embedding: None,
            })
            .collect();
        let store = DemoStore::build(&records, &embedder).unwrap();
        (embedder, store)
    }

    #[test]
    fn top_extensions_follow_probability_order() {
        // One live candidate over P(y|x) = 3/4, P(z|x) = 1/4.
        let model = chain_model();
        let prompt = ids(&model, "x");
        let beam = vec![Candidate::<f64>::root()];
        let got = generate_next_candidates(&model, &prompt, &beam, 2, &HashSet::new());
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].tokens, ids(&model, "y"));
        assert_eq!(got[1].tokens, ids(&model, "z"));
        assert!(got[0].cum_loglik > got[1].cum_loglik);
    }

    #[test]
    fn banned_extensions_are_skipped() {
        let model = chain_model();
        let prompt = ids(&model, "x");
        let beam = vec![Candidate::<f64>::root()];
        let mut banned = HashSet::new();
        banned.insert(ids(&model, "y"));
        let got = generate_next_candidates(&model, &prompt, &beam, 2, &banned);
        // Only z remains with positive probability after x.
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].tokens, ids(&model, "z"));
    }

    #[test]
    fn extensions_rank_across_parents_by_cumulative_likelihood() {
        // Two parents at -1.0 and -2.0 with a uniform two-way continuation:
        // both extensions of the better parent outrank the worse parent's.
        let stream: Vec<&str> = "a b a c a b a c".split_whitespace().collect();
        let model = NgramModel::train(&stream, 2, 0.0).unwrap();
        let a = model.vocabulary().id("a").unwrap();
        let beam = vec![
            Candidate {
                tokens: vec![a],
                cum_loglik: -1.0,
                alive: true,
            },
            Candidate {
                tokens: vec![a, a],
                cum_loglik: -2.0,
                alive: true,
            },
        ];
        // P(b|a) = P(c|a) = 0.5 for both parents.
        let got = generate_next_candidates(&model, &[], &beam, 4, &HashSet::new());
        assert_eq!(got.len(), 4);
        assert_eq!(got[0].tokens.len(), 2);
        assert_eq!(got[1].tokens.len(), 2);
        assert_eq!(got[2].tokens.len(), 3);
        assert_eq!(got[3].tokens.len(), 3);
        let expected = -1.0 + 0.5f64.ln();
        assert!((got[0].cum_loglik - expected).abs() < 1e-12);
    }

    #[test]
    fn greedy_decoding_with_empty_store_follows_argmax() {
        let model = chain_model();
        let prompt = ids(&model, "x");
        // Greedy: K = 1 still tracks a 2-candidate frontier, but the top
        // output is the argmax chain x -> y -> x -> y.
        let outcome = run_reference(&model, 1, 3, 0, &prompt).unwrap();
        assert_eq!(outcome.outputs[0].tokens, ids(&model, "y x y"));
        assert_eq!(outcome.counters, SearchCounters::default());
    }

    #[test]
    fn empty_store_run_is_bitwise_equal_to_reference() {
        let model = chain_model();
        let prompt = ids(&model, "x");
        let (embedder, _) = guard_parts(&model, &[]);
        let store = DemoStore::empty();
        let subset = store.subset_full();
        let guard = GuardContext {
            embedder: &embedder,
            store: &store,
            subset: &subset,
        };
        let config = GuardConfig::new(2, 4);
        let guarded = run_guarded(&model, &guard, &config, &prompt).unwrap();
        let reference = run_reference(&model, 2, 4, 0, &prompt).unwrap();
        assert_eq!(guarded.outputs, reference.outputs);
        assert_eq!(guarded.counters, SearchCounters::default());
    }

    #[test]
    fn validated_outputs_stay_below_threshold() {
        let model = chain_model();
        let prompt = ids(&model, "x");
        let (embedder, store) = guard_parts(&model, &["y x y", "z x z"]);
        let subset = store.subset_full();
        let guard = GuardContext {
            embedder: &embedder,
            store: &store,
            subset: &subset,
        };
        let mut config = GuardConfig::new(1, 3);
        config.thrv = 0.9;
        config.schedule.thrv = 0.9;
        let outcome = run_guarded(&model, &guard, &config, &prompt).unwrap();
        for (candidate, score) in outcome.outputs.iter().zip(&outcome.final_scores) {
            assert!(*score < 0.9);
            // Independent rescan of the emitted text.
            let span = validation_span(model.vocabulary(), &candidate.tokens);
            let (rescan, _) = store
                .max_similarity(&subset, &embedder.embed(&span))
                .unwrap();
            assert!(rescan < 0.9, "emitted candidate rescans at {rescan}");
            assert_eq!(rescan, *score);
        }
        assert!(outcome.counters.steps_validated >= 1);
    }

    #[test]
    fn hostile_store_at_first_validation_is_safety_exhausted() {
        let model = chain_model();
        let prompt = ids(&model, "x");
        // Every single-token continuation is essentially a banned example.
        let (embedder, store) = guard_parts(&model, &["x", "y", "z"]);
        let subset = store.subset_full();
        let guard = GuardContext {
            embedder: &embedder,
            store: &store,
            subset: &subset,
        };
        let mut config = GuardConfig::new(1, 4);
        config.thrv = 0.1;
        config.schedule.thrv = 0.1;
        let err = run_guarded(&model, &guard, &config, &prompt).unwrap_err();
        assert!(
            matches!(err, Error::SafetyExhausted { step: 0, .. }),
            "got {err:?}"
        );
    }

    #[test]
    fn rollback_retries_the_step_with_deeper_extensions() {
        // Both top-ranked step-1 continuations ("a b" and "a c") score above
        // the threshold against the store {"b", "c"}, so the first refill
        // round at the final step comes back all-invalid and triggers a
        // rollback. The retry bans that round and recovers through the
        // weaker but clean branch "d e".
        let stream: Vec<&str> = "p a b p a c p a b p a c p d e".split_whitespace().collect();
        let model = NgramModel::train(&stream, 2, 0.1).unwrap();
        let prompt = ids(&model, "p");
        let (embedder, store) = guard_parts(&model, &["b", "c"]);
        let subset = store.subset_full();
        let guard = GuardContext {
            embedder: &embedder,
            store: &store,
            subset: &subset,
        };
        let mut config = GuardConfig::new(1, 2);
        config.thrv = 0.4;
        config.schedule.thrv = 0.4;
        config.schedule.kind = crate::scheduler::ScheduleKind::Step1;
        let outcome = run_guarded(&model, &guard, &config, &prompt).unwrap();
        assert_eq!(outcome.counters.rollbacks, 1);
        assert_eq!(outcome.outputs[0].tokens, ids(&model, "d e"));
        for score in &outcome.final_scores {
            assert!(*score < 0.4);
        }
    }

    #[test]
    fn exceeding_the_rollback_budget_is_an_error() {
        // Every path reaches z at step 2 and any span containing z scores
        // above the threshold, so the step fails on the first visit (pop the
        // step-1 snapshot) and again on the retry once its only extensions
        // are banned. The second pop overruns a budget of one.
        let stream: Vec<&str> = "p a y z p b y z".split_whitespace().collect();
        let model = NgramModel::train(&stream, 2, 0.0).unwrap();
        let prompt = ids(&model, "p");
        let (embedder, store) = guard_parts(&model, &["z"]);
        let subset = store.subset_full();
        let guard = GuardContext {
            embedder: &embedder,
            store: &store,
            subset: &subset,
        };
        let mut config = GuardConfig::new(1, 3);
        config.thrv = 0.25;
        config.rollback_budget = 1;
        config.schedule.thrv = 0.25;
        config.schedule.kind = crate::scheduler::ScheduleKind::Step1;
        let err = run_guarded(&model, &guard, &config, &prompt).unwrap_err();
        assert!(
            matches!(err, Error::RollbackExhausted { budget: 1 }),
            "got {err:?}"
        );
    }

    #[test]
    fn beam_has_no_duplicates_and_is_sorted() {
        let model = chain_model();
        let prompt = ids(&model, "x y");
        let outcome = run_reference(&model, 2, 4, 0, &prompt).unwrap();
        for pair in outcome.outputs.windows(2) {
            assert_ne!(pair[0].tokens, pair[1].tokens);
            assert!(cmp_candidates(&pair[0], &pair[1]).is_le());
        }
    }

    #[test]
    fn likelihoods_recompute_from_the_model() {
        let model = chain_model();
        let prompt = ids(&model, "x");
        let outcome = run_reference(&model, 2, 4, 0, &prompt).unwrap();
        for candidate in &outcome.outputs {
            let mut ctx = prompt.clone();
            let mut recomputed = 0.0f64;
            for &token in &candidate.tokens {
                recomputed += model.prob(&ctx, token).ln();
                ctx.push(token);
            }
            assert!((recomputed - candidate.cum_loglik).abs() < 1e-9);
        }
    }

    #[test]
    fn determinism_across_runs() {
        let model = chain_model();
        let prompt = ids(&model, "x");
        let (embedder, store) = guard_parts(&model, &["y x y"]);
        let subset = store.subset_full();
        let guard = GuardContext {
            embedder: &embedder,
            store: &store,
            subset: &subset,
        };
        let mut config = GuardConfig::new(2, 5);
        config.thrv = 0.8;
        config.schedule.thrv = 0.8;
        let a = run_guarded(&model, &guard, &config, &prompt).unwrap();
        let b = run_guarded(&model, &guard, &config, &prompt).unwrap();
        assert_eq!(a.outputs, b.outputs);
        assert_eq!(a.counters, b.counters);
        assert_eq!(a.final_scores, b.final_scores);
    }

    #[test]
    fn eos_terminates_candidates_early() {
        // EOS follows "end" almost surely; all K outputs should finish.
        let stream: Vec<&str> = "start end </s> start end </s> start end </s>"
            .split_whitespace()
            .collect();
        let model = NgramModel::train(&stream, 2, 0.0).unwrap();
        let prompt = ids(&model, "start");
        let outcome = run_reference(&model, 1, 6, 0, &prompt).unwrap();
        let eos = model.vocabulary().eos();
        assert_eq!(outcome.outputs[0].tokens.last(), Some(&eos));
        assert!(outcome.outputs[0].tokens.len() < 6);
        assert!(!outcome.outputs[0].alive);
    }
}
