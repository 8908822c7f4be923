//! Experiment runner: trains the model from corpora, prepares the
//! demonstration store, decodes every prompt (guarded or unguarded) over a
//! number of repetitions, scores the outputs, and writes the report files.
//!
//! Outputs under the chosen directory:
//! - `report.json`: spec echo plus the aggregate row.
//! - `report.csv`: one flat row per (prompt, repetition).
//! - `per_prompt/<id>_r<rep>.json`: the full per-run report.
//!
//! Sweeps re-run the same spec for each parameter value with an identical
//! seed sequence and write one aggregate row per value.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use beamguard::embed::Embedder;
use beamguard::error::{Error, Result};
use beamguard::meanshift::Bandwidth;
use beamguard::metrics;
use beamguard::ngram::NgramModel;
use beamguard::report::{
    CountersReport, OutputReport, RunReport, RunStatus, Timing, REPORT_SCHEMA_VERSION,
};
use beamguard::scheduler::{ScheduleKind, SchedulePolicy, SimilarityAggregation};
use beamguard::search::{
    run_guarded, run_reference, validation_span, GuardConfig, GuardContext, SearchOutcome,
};
use beamguard::store::{read_examples_jsonl, DemoStore, RawExample, StoreConfig};
use beamguard::token::{tokenize, TokenId, EOS_TOKEN};

/// Task flavour: which fixture conventions apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Ban a topic given by an explicit examples file.
    Detox,
    /// Suppress training-text memorization; without an examples file the
    /// corpus documents themselves become the demonstration examples.
    Copyright,
}

impl std::str::FromStr for Task {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "detox" => Ok(Task::Detox),
            "copyright" => Ok(Task::Copyright),
            other => Err(format!("unknown task {other:?} (expected detox|copyright)")),
        }
    }
}

/// Schedule flag syntax: `contextwise`, `step1`, `stepk:K`, `exp:B`.
pub fn parse_schedule(s: &str) -> std::result::Result<ScheduleKind, String> {
    if s == "contextwise" {
        return Ok(ScheduleKind::ContextWise);
    }
    if s == "step1" {
        return Ok(ScheduleKind::Step1);
    }
    if let Some(k) = s.strip_prefix("stepk:") {
        let k: usize = k.parse().map_err(|_| format!("bad stride in {s:?}"))?;
        return Ok(ScheduleKind::StepK(k));
    }
    if let Some(b) = s.strip_prefix("exp:") {
        let b: usize = b.parse().map_err(|_| format!("bad base in {s:?}"))?;
        return Ok(ScheduleKind::ExponentialBase(b));
    }
    Err(format!(
        "unknown schedule {s:?} (expected contextwise|step1|stepk:K|exp:B)"
    ))
}

pub fn schedule_name(kind: ScheduleKind) -> String {
    match kind {
        ScheduleKind::ContextWise => "contextwise".into(),
        ScheduleKind::Step1 => "step1".into(),
        ScheduleKind::StepK(k) => format!("stepk:{k}"),
        ScheduleKind::ExponentialBase(b) => format!("exp:{b}"),
    }
}

pub fn parse_aggregation(s: &str) -> std::result::Result<SimilarityAggregation, String> {
    match s {
        "min" => Ok(SimilarityAggregation::MinPairs),
        "maxmax" => Ok(SimilarityAggregation::MaxOfMax),
        other => Err(format!(
            "unknown aggregation {other:?} (expected min|maxmax)"
        )),
    }
}

/// Everything one experiment needs.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub task: Task,
    pub corpus: Vec<PathBuf>,
    pub examples: Option<PathBuf>,
    pub prompts: PathBuf,
    pub out: PathBuf,
    pub beam_k: usize,
    pub max_tokens: usize,
    pub min_tokens: usize,
    pub order: usize,
    pub smoothing_k: f64,
    pub thrv: f64,
    pub thr_rb: f64,
    pub lambda: f64,
    pub ratio: f64,
    pub schedule: ScheduleKind,
    pub sched_agg: SimilarityAggregation,
    pub seed: u64,
    pub reps: usize,
    pub no_guard: bool,
    pub embed_dim: usize,
    pub hash_seed: u64,
    pub cluster: bool,
    pub bandwidth: Option<f64>,
}

impl ExperimentSpec {
    pub fn new(task: Task, prompts: PathBuf, out: PathBuf) -> Self {
        Self {
            task,
            corpus: Vec::new(),
            examples: None,
            prompts,
            out,
            beam_k: 4,
            max_tokens: 32,
            min_tokens: 0,
            order: 3,
            smoothing_k: 0.01,
            thrv: beamguard::DEFAULT_THRV,
            thr_rb: beamguard::DEFAULT_THR_RB,
            lambda: beamguard::DEFAULT_LAMBDA,
            ratio: beamguard::DEFAULT_RATIO,
            schedule: ScheduleKind::ContextWise,
            sched_agg: SimilarityAggregation::MinPairs,
            seed: 1,
            reps: 5,
            no_guard: false,
            embed_dim: beamguard::DEFAULT_EMBED_DIM,
            hash_seed: 17,
            cluster: false,
            bandwidth: None,
        }
    }

    fn guard_config(&self) -> Result<GuardConfig<f64>> {
        let schedule = SchedulePolicy::new(self.schedule, self.lambda, self.thrv, self.sched_agg)?;
        let mut config = GuardConfig::new(self.beam_k, self.max_tokens);
        config.min_tokens = self.min_tokens;
        config.thrv = self.thrv;
        config.thr_rb = self.thr_rb;
        config.ratio = self.ratio;
        config.schedule = schedule;
        Ok(config)
    }
}

/// One prompt record: `{"id", "prompt"}` with an optional `"reference"`
/// completion the outputs are compared against (copyright-style fixtures).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PromptRecord {
    pub id: String,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
}

pub fn read_prompts_jsonl(path: &Path) -> Result<Vec<PromptRecord>> {
    let body = fs::read_to_string(path)?;
    let mut prompts = Vec::new();
    for (lineno, line) in body.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: PromptRecord = serde_json::from_str(line)
            .map_err(|e| Error::Parse(format!("prompts line {}: {e}", lineno + 1)))?;
        prompts.push(record);
    }
    if prompts.is_empty() {
        return Err(Error::Parse("prompt file contains no prompts".into()));
    }
    Ok(prompts)
}

/// Corpus documents: newline-delimited within each file, blank lines
/// skipped.
pub fn read_corpus(paths: &[PathBuf]) -> Result<Vec<String>> {
    let mut docs = Vec::new();
    for path in paths {
        let body = fs::read_to_string(path)?;
        docs.extend(
            body.lines()
                .filter(|l| !l.trim().is_empty())
                .map(str::to_owned),
        );
    }
    if docs.is_empty() {
        return Err(Error::Parse("corpus is empty".into()));
    }
    Ok(docs)
}

/// Flatten documents to the training stream, appending the end-of-sequence
/// token at every document boundary.
pub fn corpus_stream(docs: &[String]) -> Vec<String> {
    let mut stream = Vec::new();
    for doc in docs {
        stream.extend(tokenize(doc));
        stream.push(EOS_TOKEN.to_owned());
    }
    stream
}

/// The trained model plus validator-side state shared by all runs.
pub struct Prepared {
    pub model: NgramModel<f64>,
    pub embedder: Embedder<f64>,
    pub store: DemoStore<f64>,
    pub prompts: Vec<PromptRecord>,
}

pub fn prepare(spec: &ExperimentSpec) -> Result<Prepared> {
    let docs = read_corpus(&spec.corpus)?;
    let stream = corpus_stream(&docs);
    let model = NgramModel::train(&stream, spec.order, spec.smoothing_k)?;

    let records: Vec<RawExample> = match (&spec.examples, spec.task) {
        (Some(path), _) => read_examples_jsonl(path)?,
        (None, Task::Copyright) => docs
            .iter()
            .enumerate()
            .map(|(i, doc)| RawExample {
                id: format!("p{i:04}"),
                text: doc.clone(),
                embedding: None,
            })
            .collect(),
        (None, Task::Detox) => {
            if spec.no_guard {
                Vec::new()
            } else {
                return Err(Error::InvalidConfig(
                    "the detox task needs an examples file unless --no-guard is set".into(),
                ));
            }
        }
    };

    let docs_tokens: Vec<Vec<String>> = records.iter().map(|r| tokenize(&r.text)).collect();
    let embedder = Embedder::fit(spec.embed_dim, spec.hash_seed, &docs_tokens)?;
    let mut store = DemoStore::build(&records, &embedder)?;

    // Cluster once; labels are deterministic and shared by every repetition.
    if (spec.cluster || spec.ratio < 1.0) && !store.is_empty() {
        let config = StoreConfig {
            ratio: spec.ratio,
            do_clustering: true,
            bandwidth: spec.bandwidth.map_or(Bandwidth::Auto, Bandwidth::Fixed),
            ..StoreConfig::default()
        };
        let clustering = store.cluster(&config, spec.seed)?;
        if !clustering.converged {
            eprintln!(
                "warning: mean shift hit the iteration cap before every point settled \
                 (bandwidth {})",
                clustering.bandwidth
            );
        }
    }

    let prompts = read_prompts_jsonl(&spec.prompts)?;
    Ok(Prepared {
        model,
        embedder,
        store,
        prompts,
    })
}

/// Outcome of one decoding run before aggregation.
pub struct PromptRun {
    pub report: RunReport,
}

fn run_one(
    spec: &ExperimentSpec,
    prepared: &Prepared,
    prompt: &PromptRecord,
    rep: usize,
    rep_seed: u64,
    config: &GuardConfig<f64>,
    subset: &beamguard::store::StoreSubset,
) -> PromptRun {
    let vocabulary = prepared.model.vocabulary();
    let started = Instant::now();

    let attempt: Result<(Vec<TokenId>, SearchOutcome<f64>)> = (|| {
        let prompt_ids = vocabulary.ids(&tokenize(&prompt.prompt))?;
        let outcome = if spec.no_guard {
            run_reference(
                &prepared.model,
                spec.beam_k,
                spec.max_tokens,
                spec.min_tokens,
                &prompt_ids,
            )?
        } else {
            let guard = GuardContext {
                embedder: &prepared.embedder,
                store: &prepared.store,
                subset,
            };
            run_guarded(&prepared.model, &guard, config, &prompt_ids)?
        };
        Ok((prompt_ids, outcome))
    })();

    let wall_ms = started.elapsed().as_secs_f64() * 1e3;
    let (status, outputs, counters) = match attempt {
        Ok((prompt_ids, outcome)) => {
            let reference_tokens = prompt.reference.as_deref().map(tokenize);
            let outputs = outcome
                .outputs
                .iter()
                .zip(&outcome.final_scores)
                .map(|(candidate, &score)| {
                    score_output(
                        spec,
                        prepared,
                        &prompt_ids,
                        &candidate.tokens,
                        candidate.cum_loglik,
                        score,
                        reference_tokens.as_deref(),
                    )
                })
                .collect();
            (
                RunStatus::Ok,
                outputs,
                CountersReport::from(outcome.counters),
            )
        }
        Err(Error::SafetyExhausted { .. }) => (
            RunStatus::SafetyExhausted,
            Vec::new(),
            CountersReport::default(),
        ),
        Err(Error::RollbackExhausted { .. }) => (
            RunStatus::RollbackExhausted,
            Vec::new(),
            CountersReport::default(),
        ),
        Err(e) => (
            RunStatus::Failed(e.to_string()),
            Vec::new(),
            CountersReport::default(),
        ),
    };

    PromptRun {
        report: RunReport {
            schema: REPORT_SCHEMA_VERSION,
            prompt_id: prompt.id.clone(),
            rep,
            seed: rep_seed,
            guarded: !spec.no_guard,
            status,
            outputs,
            counters,
            timing: Timing { wall_ms },
        },
    }
}

fn score_output(
    spec: &ExperimentSpec,
    prepared: &Prepared,
    prompt_ids: &[TokenId],
    tokens: &[TokenId],
    cum_loglik: f64,
    final_score: f64,
    reference_tokens: Option<&[String]>,
) -> OutputReport {
    let vocabulary = prepared.model.vocabulary();
    let span = validation_span(vocabulary, tokens);
    let violation =
        metrics::violation_score(&span, &prepared.embedder, &prepared.store).unwrap_or(0.0);
    let (ppl, ppl_note) = match prepared.model.conditional_perplexity(prompt_ids, tokens) {
        Ok(value) => (Some(value), None),
        Err(Error::InfinitePerplexity { .. }) => (None, Some("infinite".to_owned())),
        Err(e) => (None, Some(e.to_string())),
    };
    let (lcs, lcs_norm, lcs_substring) = match reference_tokens {
        Some(reference) if !span.is_empty() => {
            let lcs_value = metrics::lcs(&span, reference);
            let norm = metrics::lcs_norm::<f64>(lcs_value, span.len()).ok();
            let substring = metrics::lcs_substring(&span, reference);
            (Some(lcs_value), norm, Some(substring))
        }
        Some(_) => (Some(0), None, Some(0)),
        None => (None, None, None),
    };
    let _ = spec;
    OutputReport {
        text: span.join(" "),
        tokens: span,
        cum_loglik,
        final_validation_score: final_score,
        violation_score: violation,
        ppl,
        ppl_note,
        lcs,
        lcs_norm,
        lcs_substring,
    }
}

/// Aggregate over the successful runs of one experiment. Failed runs are
/// excluded from every mean and surfaced through `runs_failed`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Aggregate {
    pub n_prompts: usize,
    pub reps: usize,
    pub runs_ok: usize,
    pub runs_failed: usize,
    pub ppl_mean: Option<f64>,
    pub ppl_infinite_outputs: usize,
    pub violation_mean: Option<f64>,
    pub lcs_mean: Option<f64>,
    pub lcs_norm_mean: Option<f64>,
    pub lcs_substring_mean: Option<f64>,
    pub steps_validated_mean: Option<f64>,
    pub validations_mean: Option<f64>,
    pub rollbacks_mean: Option<f64>,
    pub timing: AggregateTiming,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
pub struct AggregateTiming {
    pub inference_ms_mean: f64,
    pub inference_ms_median: f64,
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

fn median(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2.0
    }
}

pub fn aggregate(runs: &[PromptRun], n_prompts: usize, reps: usize) -> Aggregate {
    let ok: Vec<&RunReport> = runs
        .iter()
        .map(|r| &r.report)
        .filter(|r| r.status.is_ok())
        .collect();
    let mut ppl_runs = Vec::new();
    let mut ppl_infinite = 0usize;
    let mut violation_runs = Vec::new();
    let mut lcs_runs = Vec::new();
    let mut lcs_norm_runs = Vec::new();
    let mut lcs_substring_runs = Vec::new();
    for report in &ok {
        let ppls: Vec<f64> = report.outputs.iter().filter_map(|o| o.ppl).collect();
        ppl_infinite += report.outputs.iter().filter(|o| o.ppl.is_none()).count();
        if let Some(m) = mean(&ppls) {
            ppl_runs.push(m);
        }
        if let Some(m) = mean(
            &report
                .outputs
                .iter()
                .map(|o| o.violation_score)
                .collect::<Vec<_>>(),
        ) {
            violation_runs.push(m);
        }
        let lcss: Vec<f64> = report
            .outputs
            .iter()
            .filter_map(|o| o.lcs)
            .map(|v| v as f64)
            .collect();
        if let Some(m) = mean(&lcss) {
            lcs_runs.push(m);
        }
        let norms: Vec<f64> = report.outputs.iter().filter_map(|o| o.lcs_norm).collect();
        if let Some(m) = mean(&norms) {
            lcs_norm_runs.push(m);
        }
        let subs: Vec<f64> = report
            .outputs
            .iter()
            .filter_map(|o| o.lcs_substring)
            .map(|v| v as f64)
            .collect();
        if let Some(m) = mean(&subs) {
            lcs_substring_runs.push(m);
        }
    }
    let times: Vec<f64> = ok.iter().map(|r| r.timing.wall_ms).collect();
    Aggregate {
        n_prompts,
        reps,
        runs_ok: ok.len(),
        runs_failed: runs.len() - ok.len(),
        ppl_mean: mean(&ppl_runs),
        ppl_infinite_outputs: ppl_infinite,
        violation_mean: mean(&violation_runs),
        lcs_mean: mean(&lcs_runs),
        lcs_norm_mean: mean(&lcs_norm_runs),
        lcs_substring_mean: mean(&lcs_substring_runs),
        steps_validated_mean: mean(
            &ok.iter()
                .map(|r| r.counters.steps_validated as f64)
                .collect::<Vec<_>>(),
        ),
        validations_mean: mean(
            &ok.iter()
                .map(|r| r.counters.validations as f64)
                .collect::<Vec<_>>(),
        ),
        rollbacks_mean: mean(
            &ok.iter()
                .map(|r| r.counters.rollbacks as f64)
                .collect::<Vec<_>>(),
        ),
        timing: AggregateTiming {
            inference_ms_mean: mean(&times).unwrap_or(0.0),
            inference_ms_median: median(times),
        },
    }
}

/// Serializable echo of the spec for the report header.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SpecEcho {
    pub task: Task,
    pub corpus: Vec<String>,
    pub examples: Option<String>,
    pub prompts: String,
    pub beam_k: usize,
    pub max_tokens: usize,
    pub min_tokens: usize,
    pub order: usize,
    pub smoothing_k: f64,
    pub thrv: f64,
    pub thr_rb: f64,
    pub lambda: f64,
    pub ratio: f64,
    pub schedule: String,
    pub sched_agg: String,
    pub seed: u64,
    pub reps: usize,
    pub no_guard: bool,
    pub embed_dim: usize,
    pub hash_seed: u64,
}

impl SpecEcho {
    fn from_spec(spec: &ExperimentSpec) -> Self {
        Self {
            task: spec.task,
            corpus: spec
                .corpus
                .iter()
                .map(|p| p.display().to_string())
                .collect(),
            examples: spec.examples.as_ref().map(|p| p.display().to_string()),
            prompts: spec.prompts.display().to_string(),
            beam_k: spec.beam_k,
            max_tokens: spec.max_tokens,
            min_tokens: spec.min_tokens,
            order: spec.order,
            smoothing_k: spec.smoothing_k,
            thrv: spec.thrv,
            thr_rb: spec.thr_rb,
            lambda: spec.lambda,
            ratio: spec.ratio,
            schedule: schedule_name(spec.schedule),
            sched_agg: match spec.sched_agg {
                SimilarityAggregation::MinPairs => "min".into(),
                SimilarityAggregation::MaxOfMax => "maxmax".into(),
            },
            seed: spec.seed,
            reps: spec.reps,
            no_guard: spec.no_guard,
            embed_dim: spec.embed_dim,
            hash_seed: spec.hash_seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentReport {
    pub schema: u32,
    pub spec: SpecEcho,
    pub aggregate: Aggregate,
    /// (prompt id, rep, status) for every non-ok run.
    pub failures: Vec<(String, usize, String)>,
}

/// Run the experiment and write `report.json`, `report.csv`, and
/// `per_prompt/*.json` under `spec.out`. Also returns the report.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    if spec.reps < 1 {
        return Err(Error::InvalidConfig("reps must be >= 1".into()));
    }
    let prepared = prepare(spec)?;
    let config = spec.guard_config()?;

    let mut runs: Vec<PromptRun> = Vec::new();
    for rep in 0..spec.reps {
        let rep_seed = spec.seed + rep as u64;
        let subset = if prepared.store.is_empty() || spec.no_guard {
            prepared.store.subset_full()
        } else {
            prepared
                .store
                .sample_representatives(spec.ratio, rep_seed)?
        };
        for prompt in &prepared.prompts {
            let mut run_config = config.clone();
            run_config.seed = rep_seed;
            runs.push(run_one(
                spec,
                &prepared,
                prompt,
                rep,
                rep_seed,
                &run_config,
                &subset,
            ));
        }
    }

    let aggregate = aggregate(&runs, prepared.prompts.len(), spec.reps);
    let failures = runs
        .iter()
        .filter(|r| !r.report.status.is_ok())
        .map(|r| {
            let status = match &r.report.status {
                RunStatus::SafetyExhausted => "safety_exhausted".to_owned(),
                RunStatus::RollbackExhausted => "rollback_exhausted".to_owned(),
                RunStatus::Failed(msg) => format!("failed: {msg}"),
                RunStatus::Ok => unreachable!(),
            };
            (r.report.prompt_id.clone(), r.report.rep, status)
        })
        .collect();
    let report = ExperimentReport {
        schema: REPORT_SCHEMA_VERSION,
        spec: SpecEcho::from_spec(spec),
        aggregate,
        failures,
    };

    write_outputs(spec, &runs, &report)?;
    Ok(report)
}

fn write_outputs(
    spec: &ExperimentSpec,
    runs: &[PromptRun],
    report: &ExperimentReport,
) -> Result<()> {
    let per_prompt = spec.out.join("per_prompt");
    fs::create_dir_all(&per_prompt)?;
    fs::write(
        spec.out.join("report.json"),
        serde_json::to_string_pretty(report)?,
    )?;
    for run in runs {
        let name = format!("{}_r{}.json", run.report.prompt_id, run.report.rep);
        fs::write(per_prompt.join(name), run.report.to_json()?)?;
    }
    write_csv(&spec.out.join("report.csv"), runs)?;
    Ok(())
}

fn csv_opt(value: Option<f64>) -> String {
    value.map_or_else(String::new, |v| v.to_string())
}

fn write_csv(path: &Path, runs: &[PromptRun]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(csv_to_io)?;
    writer
        .write_record([
            "prompt_id",
            "rep",
            "seed",
            "status",
            "guarded",
            "outputs",
            "ppl_mean",
            "violation_mean",
            "violation_max",
            "lcs_mean",
            "lcs_norm_mean",
            "lcs_substring_mean",
            "steps_validated",
            "validations",
            "rollbacks",
            "inference_ms",
        ])
        .map_err(csv_to_io)?;
    for run in runs {
        let r = &run.report;
        let status = match &r.status {
            RunStatus::Ok => "ok".to_owned(),
            RunStatus::SafetyExhausted => "safety_exhausted".to_owned(),
            RunStatus::RollbackExhausted => "rollback_exhausted".to_owned(),
            RunStatus::Failed(m) => format!("failed: {m}"),
        };
        let ppls: Vec<f64> = r.outputs.iter().filter_map(|o| o.ppl).collect();
        let violations: Vec<f64> = r.outputs.iter().map(|o| o.violation_score).collect();
        let lcss: Vec<f64> = r
            .outputs
            .iter()
            .filter_map(|o| o.lcs)
            .map(|v| v as f64)
            .collect();
        let norms: Vec<f64> = r.outputs.iter().filter_map(|o| o.lcs_norm).collect();
        let subs: Vec<f64> = r
            .outputs
            .iter()
            .filter_map(|o| o.lcs_substring)
            .map(|v| v as f64)
            .collect();
        let violation_max = violations.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        writer
            .write_record([
                r.prompt_id.clone(),
                r.rep.to_string(),
                r.seed.to_string(),
                status,
                r.guarded.to_string(),
                r.outputs.len().to_string(),
                csv_opt(mean(&ppls)),
                csv_opt(mean(&violations)),
                if violations.is_empty() {
                    String::new()
                } else {
                    violation_max.to_string()
                },
                csv_opt(mean(&lcss)),
                csv_opt(mean(&norms)),
                csv_opt(mean(&subs)),
                r.counters.steps_validated.to_string(),
                r.counters.validations.to_string(),
                r.counters.rollbacks.to_string(),
                r.timing.wall_ms.to_string(),
            ])
            .map_err(csv_to_io)?;
    }
    writer.flush()?;
    Ok(())
}

fn csv_to_io(e: csv::Error) -> Error {
    Error::Parse(format!("csv: {e}"))
}

/// Sweepable parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Thrv,
    Lambda,
    Ratio,
    Schedule,
}

impl std::str::FromStr for SweepParam {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "thrv" => Ok(SweepParam::Thrv),
            "lambda" => Ok(SweepParam::Lambda),
            "ratio" => Ok(SweepParam::Ratio),
            "schedule" => Ok(SweepParam::Schedule),
            other => Err(format!("unknown sweep parameter {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SweepRow {
    pub value: String,
    pub aggregate: Aggregate,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SweepReport {
    pub schema: u32,
    pub parameter: String,
    pub rows: Vec<SweepRow>,
}

/// Re-run the experiment once per value with identical prompts and seeds,
/// each run writing into `out/<param>_<value>/`, plus a comparison table at
/// `out/report.json` and `out/report.csv`.
pub fn sweep(spec: &ExperimentSpec, param: SweepParam, values: &[String]) -> Result<SweepReport> {
    if values.is_empty() {
        return Err(Error::InvalidConfig(
            "sweep needs at least one value".into(),
        ));
    }
    let param_name = match param {
        SweepParam::Thrv => "thrv",
        SweepParam::Lambda => "lambda",
        SweepParam::Ratio => "ratio",
        SweepParam::Schedule => "schedule",
    };
    let mut rows = Vec::new();
    for value in values {
        let mut sub = spec.clone();
        match param {
            SweepParam::Thrv => {
                sub.thrv = value.parse().map_err(|_| bad_value(param_name, value))?;
            }
            SweepParam::Lambda => {
                sub.lambda = value.parse().map_err(|_| bad_value(param_name, value))?;
            }
            SweepParam::Ratio => {
                sub.ratio = value.parse().map_err(|_| bad_value(param_name, value))?;
            }
            SweepParam::Schedule => {
                sub.schedule = parse_schedule(value).map_err(Error::InvalidConfig)?;
            }
        }
        sub.out = spec
            .out
            .join(format!("{param_name}_{}", value.replace(':', "-")));
        let report = run_experiment(&sub)?;
        rows.push(SweepRow {
            value: value.clone(),
            aggregate: report.aggregate,
        });
    }
    let report = SweepReport {
        schema: REPORT_SCHEMA_VERSION,
        parameter: param_name.to_owned(),
        rows,
    };
    fs::create_dir_all(&spec.out)?;
    fs::write(
        spec.out.join("report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    write_sweep_csv(&spec.out.join("report.csv"), &report)?;
    Ok(report)
}

fn bad_value(param: &str, value: &str) -> Error {
    Error::InvalidConfig(format!("cannot parse {value:?} as a {param} value"))
}

fn write_sweep_csv(path: &Path, report: &SweepReport) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(csv_to_io)?;
    writer
        .write_record([
            "parameter",
            "value",
            "runs_ok",
            "runs_failed",
            "ppl_mean",
            "violation_mean",
            "lcs_mean",
            "lcs_norm_mean",
            "steps_validated_mean",
            "validations_mean",
            "rollbacks_mean",
            "inference_ms_mean",
        ])
        .map_err(csv_to_io)?;
    for row in &report.rows {
        let a = &row.aggregate;
        writer
            .write_record([
                report.parameter.clone(),
                row.value.clone(),
                a.runs_ok.to_string(),
                a.runs_failed.to_string(),
                csv_opt(a.ppl_mean),
                csv_opt(a.violation_mean),
                csv_opt(a.lcs_mean),
                csv_opt(a.lcs_norm_mean),
                csv_opt(a.steps_validated_mean),
                csv_opt(a.validations_mean),
                csv_opt(a.rollbacks_mean),
                a.timing.inference_ms_mean.to_string(),
            ])
            .map_err(csv_to_io)?;
    }
    writer.flush()?;
    Ok(())
}
