//! Command-line experiment harness for guarded beam-search decoding.

use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use beamguard_cli::experiment::{
    parse_aggregation, parse_schedule, run_experiment, sweep, ExperimentSpec, SweepParam, Task,
};

#[derive(Parser)]
#[command(
    name = "beamguard",
    about = "Guarded beam-search decoding over an n-gram model, with similarity validation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment over a prompt set and write reports.
    Run(RunArgs),
    /// Re-run the experiment across values of one parameter (paired seeds).
    Sweep(SweepArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Task flavour: detox | copyright.
    #[arg(long)]
    task: Task,
    /// Training corpus file(s); newline-delimited documents.
    #[arg(long, required = true, num_args = 1..)]
    corpus: Vec<PathBuf>,
    /// Demonstration examples (JSON Lines: {"id", "text"}). Optional for the
    /// copyright task, where corpus documents are used when omitted.
    #[arg(long)]
    examples: Option<PathBuf>,
    /// Prompt set (JSON Lines: {"id", "prompt"[, "reference"]}).
    #[arg(long)]
    prompts: PathBuf,
    /// Beam size K; the search maintains 2K live candidates.
    #[arg(long, default_value_t = 4)]
    beam_size: usize,
    /// Maximum generated tokens per completion.
    #[arg(long, default_value_t = 32)]
    max_tokens: usize,
    /// Block end-of-sequence until this many tokens were generated.
    #[arg(long, default_value_t = 0)]
    min_tokens: usize,
    /// N-gram model order.
    #[arg(long, default_value_t = 3)]
    order: usize,
    /// Add-k smoothing constant.
    #[arg(long, default_value_t = 0.01)]
    smoothing_k: f64,
    /// Validation threshold ThrV: candidates scoring at or above it fail.
    #[arg(long, default_value_t = beamguard::DEFAULT_THRV)]
    thrv: f64,
    /// Rollback threshold ThrRB on the invalid-candidate proportion.
    #[arg(long, default_value_t = beamguard::DEFAULT_THR_RB)]
    thr_rb: f64,
    /// Intensity of the context-wise schedule.
    #[arg(long, default_value_t = beamguard::DEFAULT_LAMBDA)]
    lambda: f64,
    /// Proportion of each cluster retained for validation.
    #[arg(long, default_value_t = beamguard::DEFAULT_RATIO)]
    ratio: f64,
    /// Validation schedule: contextwise | step1 | stepk:K | exp:B.
    #[arg(long, default_value = "contextwise", value_parser = parse_schedule)]
    schedule: beamguard::scheduler::ScheduleKind,
    /// Similarity aggregation for the context-wise rule: min | maxmax.
    #[arg(long, default_value = "min", value_parser = parse_aggregation)]
    sched_agg: beamguard::scheduler::SimilarityAggregation,
    /// Base seed; repetition r uses seed + r.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Repetitions per prompt.
    #[arg(long, default_value_t = 5)]
    reps: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Disable the validator entirely (baseline decoding).
    #[arg(long, default_value_t = false)]
    no_guard: bool,
    /// Embedding dimension.
    #[arg(long, default_value_t = beamguard::DEFAULT_EMBED_DIM)]
    embed_dim: usize,
    /// Feature-hashing seed.
    #[arg(long, default_value_t = 17)]
    hash_seed: u64,
    /// Force mean-shift clustering even at ratio 1.
    #[arg(long, default_value_t = false)]
    cluster: bool,
    /// Fixed mean-shift bandwidth (median heuristic when omitted).
    #[arg(long)]
    bandwidth: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Parameter to sweep: thrv | lambda | ratio | schedule.
    #[arg(long)]
    param: SweepParam,
    /// Comma-separated values, e.g. 0.3,0.4,0.5 or step1,stepk:5,exp:2.
    #[arg(long, value_delimiter = ',')]
    values: Vec<String>,
}

fn to_spec(common: &CommonArgs) -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(common.task, common.prompts.clone(), common.out.clone());
    spec.corpus = common.corpus.clone();
    spec.examples = common.examples.clone();
    spec.beam_k = common.beam_size;
    spec.max_tokens = common.max_tokens;
    spec.min_tokens = common.min_tokens;
    spec.order = common.order;
    spec.smoothing_k = common.smoothing_k;
    spec.thrv = common.thrv;
    spec.thr_rb = common.thr_rb;
    spec.lambda = common.lambda;
    spec.ratio = common.ratio;
    spec.schedule = common.schedule;
    spec.sched_agg = common.sched_agg;
    spec.seed = common.seed;
    spec.reps = common.reps;
    spec.no_guard = common.no_guard;
    spec.embed_dim = common.embed_dim;
    spec.hash_seed = common.hash_seed;
    spec.cluster = common.cluster;
    spec.bandwidth = common.bandwidth;
    spec
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let spec = to_spec(&args.common);
            let report = run_experiment(&spec).context("experiment failed")?;
            println!(
                "{} prompts x {} reps: {} ok, {} failed",
                report.aggregate.n_prompts,
                report.aggregate.reps,
                report.aggregate.runs_ok,
                report.aggregate.runs_failed
            );
            if let Some(v) = report.aggregate.violation_mean {
                println!("violation mean: {v:.4}");
            }
            if let Some(v) = report.aggregate.ppl_mean {
                println!("ppl mean: {v:.3}");
            }
            if let Some(v) = report.aggregate.lcs_mean {
                println!("lcs mean: {v:.2}");
            }
            println!("reports written to {}", spec.out.display());
        }
        Command::Sweep(args) => {
            let spec = to_spec(&args.common);
            let report = sweep(&spec, args.param, &args.values).context("sweep failed")?;
            for row in &report.rows {
                println!(
                    "{}={}: ok {}, failed {}, violation {}, #V {}",
                    report.parameter,
                    row.value,
                    row.aggregate.runs_ok,
                    row.aggregate.runs_failed,
                    row.aggregate
                        .violation_mean
                        .map_or("-".into(), |v| format!("{v:.4}")),
                    row.aggregate
                        .validations_mean
                        .map_or("-".into(), |v| format!("{v:.1}")),
                );
            }
            println!("reports written to {}", spec.out.display());
        }
    }
    Ok(())
}
