//! Command-line front end: `generate` judged pairs, `score` essays from
//! them, or `sweep` methods across pair budgets.
//!
//! Flags set values first; a `--config` TOML file is applied last and
//! overrides any flag it names. Every random choice derives from `--seed`,
//! so rerunning a command with the same inputs reproduces its artifacts
//! byte for byte.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use prefscore::embeddings::{RemoteEmbedConfig, SyntheticSpec};
use prefscore::judge::RemoteJudgeConfig;
use prefscore::metrics::EvalReport;
use prefscore::pipeline::{
    cmd_generate, cmd_score, cmd_sweep, EmbeddingSourceConfig, GenerateOutcome, JudgeKind, Method,
    RunConfig, RunConfigPatch, ScoreOutcome, SimPatch, SweepOutcome, TrainPatch,
};
use prefscore::{Error, Result};

#[derive(Parser)]
#[command(
    name = "prefscore",
    about = "Pairwise-preference scoring for essay sets",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample essay pairs and collect both-order judgments.
    Generate(GenerateArgs),
    /// Fit latent scores from saved comparisons and convert them to the rubric.
    Score(ScoreArgs),
    /// Compare methods across pair budgets with repeated derived seeds.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Essay file (CSV or JSONL, by extension).
    #[arg(long)]
    essays: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed for all derived randomness.
    #[arg(long)]
    seed: Option<u64>,
    /// TOML config applied after flags (its values win).
    #[arg(long)]
    config: Option<PathBuf>,
    /// File whose contents become the set's prompt text.
    #[arg(long)]
    prompt_file: Option<PathBuf>,
    /// File whose contents become the rubric text shown to judges.
    #[arg(long)]
    rubric_file: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of pairs to sample.
    #[arg(long)]
    pairs: Option<usize>,
    /// Judge backend: sim or remote.
    #[arg(long)]
    judge: Option<String>,
    /// Simulator: gold gap at or below which the verdict is a tie.
    #[arg(long)]
    tie_margin: Option<f64>,
    /// Simulator: probability of flipping a decisive verdict.
    #[arg(long)]
    flip_prob: Option<f64>,
    /// Simulator: probability of answering "essay 1" regardless of content.
    #[arg(long)]
    position_bias: Option<f64>,
    /// Remote judge endpoint root, e.g. https://api.example.com/v1.
    #[arg(long)]
    judge_url: Option<String>,
    /// Remote judge model name.
    #[arg(long)]
    judge_model: Option<String>,
    /// Built-in prompt template name (asap or toefl11).
    #[arg(long)]
    template: Option<String>,
    /// Custom system-prompt template file (pair with --template-user).
    #[arg(long)]
    template_system: Option<PathBuf>,
    /// Custom user-prompt template file (pair with --template-system).
    #[arg(long)]
    template_user: Option<PathBuf>,
    /// Abort when more than this fraction of pairs is skipped.
    #[arg(long)]
    max_skip_fraction: Option<f64>,
    /// Worker threads for judging.
    #[arg(long)]
    concurrency: Option<usize>,
}

#[derive(Args)]
struct ScoreArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comparisons file (defaults to <out>/comparisons.jsonl).
    #[arg(long)]
    comparisons: Option<PathBuf>,
    /// Scoring method: ranknet, bt, or elo.
    #[arg(long)]
    method: Option<String>,
    /// Training epochs (ranknet).
    #[arg(long)]
    epochs: Option<usize>,
    /// Learning rate (ranknet).
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Pairs per training batch (ranknet).
    #[arg(long)]
    batch_size: Option<usize>,
    /// Hidden layer width (ranknet).
    #[arg(long)]
    hidden_units: Option<usize>,
    /// Dropout rate between the hidden and output layers (ranknet).
    #[arg(long)]
    dropout: Option<f64>,
    /// L2 penalty on the weight matrices (ranknet).
    #[arg(long)]
    weight_decay: Option<f64>,
    /// Hold this fraction of essays out of training (ranknet).
    #[arg(long)]
    inductive_split: Option<f64>,
    /// Embedding source: file, synthetic, or remote.
    #[arg(long)]
    embed_source: Option<String>,
    /// Synthetic embeddings: dimensionality.
    #[arg(long)]
    embed_dim: Option<usize>,
    /// Synthetic embeddings: gold-signal strength.
    #[arg(long)]
    embed_signal: Option<f64>,
    /// Synthetic embeddings: noise standard deviation.
    #[arg(long)]
    embed_noise_std: Option<f64>,
    /// Remote embeddings endpoint root.
    #[arg(long)]
    embed_url: Option<String>,
    /// Remote embeddings model name.
    #[arg(long)]
    embed_model: Option<String>,
    /// Remote embeddings cache directory.
    #[arg(long)]
    embed_cache_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated ascending pair budgets, e.g. 50,500,5000.
    #[arg(long)]
    sweep: Option<String>,
    /// Comma-separated methods, e.g. ranknet,bt,elo.
    #[arg(long)]
    methods: Option<String>,
    /// Repeats per (budget, method) cell.
    #[arg(long)]
    repeats: Option<usize>,
    /// Training epochs (ranknet cells).
    #[arg(long)]
    epochs: Option<usize>,
    /// Simulator: probability of flipping a decisive verdict.
    #[arg(long)]
    flip_prob: Option<f64>,
    /// Simulator: probability of answering "essay 1" regardless of content.
    #[arg(long)]
    position_bias: Option<f64>,
    /// Worker threads for judging.
    #[arg(long)]
    concurrency: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => run_generate(args),
        Command::Score(args) => run_score(args),
        Command::Sweep(args) => run_sweep(args),
    };
    match result {
        Ok(code) => code,
        Err(error) => {
            eprintln!("error: {error}");
            // Skip-budget overruns get their own code so wrappers can retry.
            match error {
                Error::TooManySkips { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

/// Builds the effective config: defaults, then flags, then the config file.
fn resolve(common: &CommonArgs, flags: RunConfigPatch) -> Result<RunConfig> {
    let mut config = RunConfig::default();
    let common_patch = RunConfigPatch {
        essays: common.essays.clone(),
        out: common.out.clone(),
        seed: common.seed,
        prompt_file: common.prompt_file.clone(),
        rubric_file: common.rubric_file.clone(),
        ..RunConfigPatch::default()
    };
    common_patch.apply(&mut config);
    flags.apply(&mut config);
    if let Some(path) = &common.config {
        RunConfigPatch::from_toml_path(path)?.apply(&mut config);
    }
    Ok(config)
}

fn run_generate(args: GenerateArgs) -> Result<ExitCode> {
    let judge = args.judge.as_deref().map(JudgeKind::from_str).transpose()?;
    let remote_judge = match (&args.judge_url, &args.judge_model) {
        (Some(url), Some(model)) => Some(RemoteJudgeConfig::new(url.clone(), model.clone())),
        (None, None) => None,
        _ => {
            return Err(Error::config(
                "--judge-url and --judge-model must be given together".to_string(),
            ))
        }
    };
    let flags = RunConfigPatch {
        pairs: args.pairs,
        judge,
        remote_judge,
        sim: Some(SimPatch {
            tie_margin: args.tie_margin,
            flip_prob: args.flip_prob,
            position_bias: args.position_bias,
        }),
        template: args.template,
        template_system_file: args.template_system,
        template_user_file: args.template_user,
        max_skip_fraction: args.max_skip_fraction,
        judge_concurrency: args.concurrency,
        ..RunConfigPatch::default()
    };
    let config = resolve(&args.common, flags)?;

    let outcome = cmd_generate(&config)?;
    print_generate(&outcome, &config);
    Ok(ExitCode::SUCCESS)
}

fn print_generate(outcome: &GenerateOutcome, config: &RunConfig) {
    let m = &outcome.manifest;
    println!(
        "judged {} of {} pairs ({} skipped)",
        m.completed, m.requested, m.skipped
    );
    println!("{:<24} {}", "judge", m.judge_id);
    println!("{:<24} {}", "seed", m.seed);
    print_metric_line("inconsistency rate", m.inconsistency_rate);
    println!("wrote {}", config.out.join("comparisons.jsonl").display());
}

fn run_score(args: ScoreArgs) -> Result<ExitCode> {
    let method = args.method.as_deref().map(Method::from_str).transpose()?;
    let flags = RunConfigPatch {
        comparisons: args.comparisons.clone(),
        method,
        train: Some(TrainPatch {
            epochs: args.epochs,
            learning_rate: args.learning_rate,
            batch_size: args.batch_size,
            hidden_units: args.hidden_units,
            dropout_rate: args.dropout,
            weight_decay: args.weight_decay,
        }),
        inductive_split: args.inductive_split,
        embeddings: embeddings_from_flags(&args)?,
        ..RunConfigPatch::default()
    };
    let config = resolve(&args.common, flags)?;

    let outcome = cmd_score(&config)?;
    print_score(&outcome, &config);
    Ok(ExitCode::SUCCESS)
}

fn embeddings_from_flags(args: &ScoreArgs) -> Result<Option<EmbeddingSourceConfig>> {
    let synthetic_knobs =
        args.embed_dim.is_some() || args.embed_signal.is_some() || args.embed_noise_std.is_some();
    let synthetic = |args: &ScoreArgs| {
        let mut spec = SyntheticSpec::default();
        if let Some(dim) = args.embed_dim {
            spec.dim = dim;
        }
        if let Some(signal) = args.embed_signal {
            spec.signal_strength = signal;
        }
        if let Some(noise) = args.embed_noise_std {
            spec.noise_std = noise;
        }
        EmbeddingSourceConfig::Synthetic(spec)
    };
    match args.embed_source.as_deref() {
        None if synthetic_knobs => Ok(Some(synthetic(args))),
        None => Ok(None),
        Some("file") => Ok(Some(EmbeddingSourceConfig::File)),
        Some("synthetic") => Ok(Some(synthetic(args))),
        Some("remote") => match (&args.embed_url, &args.embed_model, &args.embed_cache_dir) {
            (Some(url), Some(model), Some(cache)) => Ok(Some(EmbeddingSourceConfig::Remote(
                RemoteEmbedConfig::new(url.clone(), model.clone(), cache.clone()),
            ))),
            _ => Err(Error::config(
                "--embed-source remote needs --embed-url, --embed-model, and \
                 --embed-cache-dir (or a [embeddings] config section)"
                    .to_string(),
            )),
        },
        Some(other) => Err(Error::config(format!(
            "unknown embedding source {other:?}; expected file, synthetic, or remote"
        ))),
    }
}

fn print_score(outcome: &ScoreOutcome, config: &RunConfig) {
    println!(
        "scored {} essays from {} comparisons with {}",
        outcome.manifest.essay_count, outcome.manifest.record_count, outcome.manifest.method
    );
    match &outcome.eval {
        Some(report) => {
            println!();
            print_eval("evaluation against gold scores", report);
        }
        None => println!("no gold scores; skipping evaluation"),
    }
    if let Some(report) = &outcome.heldout_eval {
        println!();
        print_eval("held-out essays (not seen in training)", report);
    }
    println!();
    println!("wrote {}", config.out.join("scores.csv").display());
}

fn print_eval(title: &str, report: &EvalReport) {
    println!("{title} (n = {}):", report.n);
    print_metric_line("qwk", report.qwk);
    print_metric_line("spearman", report.spearman);
    print_metric_line("inconsistency rate", report.inconsistency_rate);
    print_metric_line("agreement (debiased)", report.agreement_all);
    print_metric_line("agreement excl. ties", report.agreement_excl_ties);
    print_metric_line("agreement (raw)", report.agreement_raw_all);
}

fn print_metric_line(name: &str, value: Option<f64>) {
    match value {
        Some(v) => println!("{name:<24} {v:>10.6}"),
        None => println!("{name:<24} {:>10}", "undefined"),
    }
}

fn run_sweep(args: SweepArgs) -> Result<ExitCode> {
    let sweep_pairs = args
        .sweep
        .as_deref()
        .map(parse_usize_list)
        .transpose()?
        .filter(|v| !v.is_empty());
    let sweep_methods = args
        .methods
        .as_deref()
        .map(|s| {
            s.split(',')
                .map(|m| Method::from_str(m.trim()))
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;
    let flags = RunConfigPatch {
        sweep_pairs,
        sweep_methods,
        repeats: args.repeats,
        train: Some(TrainPatch {
            epochs: args.epochs,
            ..TrainPatch::default()
        }),
        sim: Some(SimPatch {
            flip_prob: args.flip_prob,
            position_bias: args.position_bias,
            ..SimPatch::default()
        }),
        judge_concurrency: args.concurrency,
        ..RunConfigPatch::default()
    };
    let config = resolve(&args.common, flags)?;

    let outcome = cmd_sweep(&config)?;
    print_sweep(&outcome, &config);
    Ok(ExitCode::SUCCESS)
}

fn parse_usize_list(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|_| Error::config(format!("bad pair budget {part:?}")))
        })
        .collect()
}

fn print_sweep(outcome: &SweepOutcome, config: &RunConfig) {
    println!(
        "swept {} budgets x {} methods x {} repeats ({} rows)",
        outcome.manifest.pair_budgets.len(),
        outcome.manifest.methods.len(),
        outcome.manifest.repeats,
        outcome.rows.len()
    );
    println!();
    println!(
        "{:>8}  {:<8} {:>12} {:>12}",
        "M", "method", "mean qwk", "mean rho"
    );
    for &budget in &outcome.manifest.pair_budgets {
        for &method in &outcome.manifest.methods {
            let cell: Vec<_> = outcome
                .rows
                .iter()
                .filter(|r| r.pair_budget == budget && r.method == method)
                .collect();
            let mean = |values: Vec<f64>| -> Option<f64> {
                (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
            };
            let qwk = mean(cell.iter().filter_map(|r| r.qwk).collect());
            let rho = mean(cell.iter().filter_map(|r| r.spearman).collect());
            let fmt = |v: Option<f64>| match v {
                Some(v) => format!("{v:.4}"),
                None => "undefined".to_string(),
            };
            println!(
                "{budget:>8}  {:<8} {:>12} {:>12}",
                method.name(),
                fmt(qwk),
                fmt(rho)
            );
        }
    }
    println!();
    println!("wrote {}", config.out.join("sweep.csv").display());
}
