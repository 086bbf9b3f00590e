//! End-to-end run orchestration.
//!
//! One [`RunConfig`] drives the three commands:
//!
//! * [`cmd_generate`] — sample a pair plan, collect both-order judgments
//!   (concurrently), debias them, and write `pairs.jsonl`,
//!   `comparisons.jsonl`, and `manifest.json`;
//! * [`cmd_score`] — check provenance, fit latent scores with the configured
//!   method, convert them to the rubric scale, evaluate against golds when
//!   present, and write `scores.csv`, `eval.json`, and friends;
//! * [`cmd_sweep`] — repeat generate + score over a grid of pair budgets and
//!   methods, sharing each generated comparison set across the methods, and
//!   write `sweep.csv`.
//!
//! Every random choice is derived from the single `seed` in the config via
//! labeled sub-seeds ([`crate::seeding::derive_seed`]), so a rerun with the
//! same config and inputs reproduces every artifact byte for byte. Component
//! seeds inside nested sections (`sim.seed`, `train.seed`, ...) are ignored
//! here and overwritten with derived values; they only matter when the
//! components are used directly as a library.
//!
//! Artifacts are written atomically and each manifest records the config
//! hash and the essay-file hash, so downstream steps can refuse inputs that
//! were produced from different data.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{bt_fit, elo_run, BTConfig, EloConfig};
use crate::convert::{convert, format_float, to_category, ConvertedScores};
use crate::data::{EssaySet, PairwiseRecord, RubricSpec, ScoreTable};
use crate::embeddings::{embed_remote, embed_synthetic, RemoteEmbedConfig, SyntheticSpec};
use crate::error::{Error, Result};
use crate::io::{
    atomic_write, detect_essay_format, load_comparisons, load_essays, save_comparisons,
};
use crate::judge::{
    compare_pair, Judge, PromptTemplate, RemoteJudge, RemoteJudgeConfig, SimJudge, SimJudgeConfig,
};
use crate::metrics::{
    agreement_rate, agreement_rate_raw, inconsistency_rate, qwk, spearman, EvalReport,
};
use crate::pairing::{sample_pairs, PairPlan};
use crate::ranknet::{train, TrainConfig};
use crate::seeding::derive_seed;

/// Latent-score estimation method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ranknet,
    Bt,
    Elo,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Ranknet => "ranknet",
            Method::Bt => "bt",
            Method::Elo => "elo",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ranknet" => Ok(Method::Ranknet),
            "bt" => Ok(Method::Bt),
            "elo" => Ok(Method::Elo),
            other => Err(Error::config(format!(
                "unknown method {other:?}; expected ranknet, bt, or elo"
            ))),
        }
    }
}

/// Which judge answers pairwise queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeKind {
    /// Deterministic simulator driven by gold scores (plus configured noise).
    Sim,
    /// HTTP chat-completions endpoint.
    Remote,
}

impl FromStr for JudgeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sim" => Ok(JudgeKind::Sim),
            "remote" => Ok(JudgeKind::Remote),
            other => Err(Error::config(format!(
                "unknown judge {other:?}; expected sim or remote"
            ))),
        }
    }
}

/// Where essay embeddings come from when the method needs them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum EmbeddingSourceConfig {
    /// The essay file already carries an `embedding` column/field.
    File,
    /// Gold-aligned synthetic embeddings for experiments.
    Synthetic(SyntheticSpec),
    /// Remote embeddings endpoint with an on-disk cache.
    Remote(RemoteEmbedConfig),
}

impl Default for EmbeddingSourceConfig {
    fn default() -> Self {
        EmbeddingSourceConfig::Synthetic(SyntheticSpec::default())
    }
}

/// Full configuration for a run. One `seed` feeds every random choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Essay file (CSV or JSONL, by extension).
    pub essays: PathBuf,
    /// Output directory for all artifacts.
    pub out: PathBuf,
    /// Master seed; all sub-seeds are derived from it with stable labels.
    pub seed: u64,
    /// Number of pairs to sample for `generate`.
    pub pairs: usize,
    pub method: Method,
    pub judge: JudgeKind,
    pub sim: SimJudgeConfig,
    /// Required when `judge = "remote"`.
    pub remote_judge: Option<RemoteJudgeConfig>,
    /// Built-in prompt template name (used when no template files are given).
    pub template: String,
    /// Custom system-prompt template file (must be paired with the user one).
    pub template_system_file: Option<PathBuf>,
    /// Custom user-prompt template file (must be paired with the system one).
    pub template_user_file: Option<PathBuf>,
    /// File whose contents become the set's prompt text.
    pub prompt_file: Option<PathBuf>,
    /// File whose contents become the set's rubric text (shown to judges).
    pub rubric_file: Option<PathBuf>,
    /// Target scale for converted scores.
    pub rubric: RubricSpec,
    pub train: TrainConfig,
    pub bt: BTConfig,
    pub elo: EloConfig,
    pub embeddings: EmbeddingSourceConfig,
    /// Fraction of essays to hold out of training (method must be ranknet).
    pub inductive_split: Option<f64>,
    /// Pair budgets for `sweep`, ascending.
    pub sweep_pairs: Vec<usize>,
    /// Methods compared in `sweep`.
    pub sweep_methods: Vec<Method>,
    /// Repeats per sweep cell (different derived seeds).
    pub repeats: usize,
    /// Abort when more than this fraction of pairs is skipped.
    pub max_skip_fraction: f64,
    /// Worker threads for judging.
    pub judge_concurrency: usize,
    /// Comparisons file for `score`; defaults to `<out>/comparisons.jsonl`.
    pub comparisons: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            essays: PathBuf::new(),
            out: PathBuf::from("out"),
            seed: 0,
            pairs: 5000,
            method: Method::Ranknet,
            judge: JudgeKind::Sim,
            sim: SimJudgeConfig::default(),
            remote_judge: None,
            template: "asap".to_string(),
            template_system_file: None,
            template_user_file: None,
            prompt_file: None,
            rubric_file: None,
            rubric: default_rubric(),
            train: TrainConfig::default(),
            bt: BTConfig::default(),
            elo: EloConfig::default(),
            embeddings: EmbeddingSourceConfig::default(),
            inductive_split: None,
            sweep_pairs: vec![50, 500, 5000],
            sweep_methods: vec![Method::Ranknet, Method::Bt, Method::Elo],
            repeats: 5,
            max_skip_fraction: 0.1,
            judge_concurrency: 4,
            comparisons: None,
        }
    }
}

/// 1–5 integer scale: the common holistic essay rubric.
fn default_rubric() -> RubricSpec {
    RubricSpec::new(1.0, 5.0)
        .and_then(|r| r.with_levels(vec![1.0, 2.0, 3.0, 4.0, 5.0]))
        .expect("default rubric is valid")
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.essays.as_os_str().is_empty() {
            return Err(Error::config("no essay file configured".to_string()));
        }
        if self.pairs == 0 {
            return Err(Error::config("pairs must be at least 1".to_string()));
        }
        if !(0.0..=1.0).contains(&self.max_skip_fraction) {
            return Err(Error::config(format!(
                "max_skip_fraction must lie in [0, 1], got {}",
                self.max_skip_fraction
            )));
        }
        if self.judge_concurrency == 0 {
            return Err(Error::config(
                "judge_concurrency must be at least 1".to_string(),
            ));
        }
        self.rubric.validate()?;
        self.sim.validate()?;
        self.train.validate()?;
        self.bt.validate()?;
        self.elo.validate()?;
        if let EmbeddingSourceConfig::Synthetic(spec) = &self.embeddings {
            spec.validate()?;
        }
        if self.judge == JudgeKind::Remote && self.remote_judge.is_none() {
            return Err(Error::config(
                "judge = \"remote\" requires a [remote_judge] section".to_string(),
            ));
        }
        if self.template_system_file.is_some() != self.template_user_file.is_some() {
            return Err(Error::config(
                "custom templates need both the system and the user file".to_string(),
            ));
        }
        if let Some(fraction) = self.inductive_split {
            if !(fraction > 0.0 && fraction < 1.0) {
                return Err(Error::config(format!(
                    "inductive_split must lie in (0, 1), got {fraction}"
                )));
            }
            if self.method != Method::Ranknet {
                return Err(Error::config(
                    "inductive_split requires method = \"ranknet\"; \
                     bt and elo cannot score essays absent from the comparisons"
                        .to_string(),
                ));
            }
        }
        if self.sweep_pairs.is_empty() {
            return Err(Error::config("sweep_pairs must not be empty".to_string()));
        }
        if !self.sweep_pairs.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::config(
                "sweep_pairs must be strictly ascending".to_string(),
            ));
        }
        if self.sweep_methods.is_empty() {
            return Err(Error::config("sweep_methods must not be empty".to_string()));
        }
        if self.repeats < 2 {
            return Err(Error::config(
                "repeats must be at least 2 so sweep cells carry spread".to_string(),
            ));
        }
        Ok(())
    }

    /// Path of the comparisons file `score` reads.
    pub fn comparisons_path(&self) -> PathBuf {
        self.comparisons
            .clone()
            .unwrap_or_else(|| self.out.join("comparisons.jsonl"))
    }
}

/// Partial config used to overlay a TOML file (or CLI flags) onto defaults.
/// Unknown keys are rejected so typos surface instead of silently applying
/// defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfigPatch {
    pub essays: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub pairs: Option<usize>,
    pub method: Option<Method>,
    pub judge: Option<JudgeKind>,
    pub sim: Option<SimPatch>,
    pub remote_judge: Option<RemoteJudgeConfig>,
    pub template: Option<String>,
    pub template_system_file: Option<PathBuf>,
    pub template_user_file: Option<PathBuf>,
    pub prompt_file: Option<PathBuf>,
    pub rubric_file: Option<PathBuf>,
    pub rubric: Option<RubricSpec>,
    pub train: Option<TrainPatch>,
    pub bt: Option<BTConfig>,
    pub elo: Option<EloConfig>,
    pub embeddings: Option<EmbeddingSourceConfig>,
    pub inductive_split: Option<f64>,
    pub sweep_pairs: Option<Vec<usize>>,
    pub sweep_methods: Option<Vec<Method>>,
    pub repeats: Option<usize>,
    pub max_skip_fraction: Option<f64>,
    pub judge_concurrency: Option<usize>,
    pub comparisons: Option<PathBuf>,
}

/// Partial simulator settings (the seed is always derived from the run seed).
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimPatch {
    pub tie_margin: Option<f64>,
    pub flip_prob: Option<f64>,
    pub position_bias: Option<f64>,
}

/// Partial training settings (the seed is always derived from the run seed).
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainPatch {
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub hidden_units: Option<usize>,
    pub dropout_rate: Option<f64>,
    pub weight_decay: Option<f64>,
}

macro_rules! overlay {
    ($target:expr, $patch:expr, $($field:ident),+ $(,)?) => {
        $(if let Some(value) = $patch.$field { $target.$field = value; })+
    };
}

impl RunConfigPatch {
    /// Parses a patch from a TOML file.
    pub fn from_toml_path(path: &Path) -> Result<RunConfigPatch> {
        let display = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(display.clone(), e))?;
        toml::from_str(&text).map_err(|e| Error::Config {
            message: format!("bad config file {display}: {e}"),
        })
    }

    /// Applies every present field onto `config`.
    pub fn apply(self, config: &mut RunConfig) {
        overlay!(
            config,
            self,
            essays,
            out,
            seed,
            pairs,
            method,
            judge,
            template,
            rubric,
            bt,
            elo,
            embeddings,
            sweep_pairs,
            sweep_methods,
            repeats,
            max_skip_fraction,
            judge_concurrency,
        );
        if let Some(sim) = self.sim {
            overlay!(config.sim, sim, tie_margin, flip_prob, position_bias);
        }
        if let Some(train) = self.train {
            overlay!(
                config.train,
                train,
                epochs,
                learning_rate,
                batch_size,
                hidden_units,
                dropout_rate,
                weight_decay,
            );
        }
        if let Some(remote) = self.remote_judge {
            config.remote_judge = Some(remote);
        }
        if let Some(path) = self.template_system_file {
            config.template_system_file = Some(path);
        }
        if let Some(path) = self.template_user_file {
            config.template_user_file = Some(path);
        }
        if let Some(path) = self.prompt_file {
            config.prompt_file = Some(path);
        }
        if let Some(path) = self.rubric_file {
            config.rubric_file = Some(path);
        }
        if let Some(fraction) = self.inductive_split {
            config.inductive_split = Some(fraction);
        }
        if let Some(path) = self.comparisons {
            config.comparisons = Some(path);
        }
    }
}

/// SHA-256 of the JSON form of the config; stamped into every manifest.
pub fn config_hash(config: &RunConfig) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    hex_digest(&bytes)
}

/// SHA-256 of a file's bytes.
pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(hex_digest(&bytes))
}

fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("manifest serializes");
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Loads the configured essay file and attaches prompt/rubric context and the
/// target rubric.
pub fn load_configured_essays(config: &RunConfig) -> Result<EssaySet> {
    let mut set = load_essays(&config.essays, detect_essay_format(&config.essays))?;
    if config.prompt_file.is_some() || config.rubric_file.is_some() {
        let prompt = match &config.prompt_file {
            Some(path) => read_to_string(path)?,
            None => set.prompt_text.clone(),
        };
        let rubric_text = match &config.rubric_file {
            Some(path) => read_to_string(path)?,
            None => set.rubric_text.clone(),
        };
        set = set.with_context(prompt, rubric_text);
    }
    Ok(set.with_rubric(config.rubric.clone()))
}

fn build_template(config: &RunConfig) -> Result<PromptTemplate> {
    match (&config.template_system_file, &config.template_user_file) {
        (Some(system), Some(user)) => PromptTemplate::from_files(system, user),
        (None, None) => PromptTemplate::builtin(&config.template),
        _ => Err(Error::config(
            "custom templates need both the system and the user file".to_string(),
        )),
    }
}

/// Builds the configured judge; `seed` is the seed the simulator's randomness
/// is derived from (the run seed, or a sweep cell's seed).
fn build_judge(config: &RunConfig, seed: u64) -> Result<Box<dyn Judge>> {
    match config.judge {
        JudgeKind::Sim => {
            let sim = SimJudgeConfig {
                seed: derive_seed(seed, &["sim-judge"]),
                ..config.sim
            };
            Ok(Box::new(SimJudge::new(sim)?))
        }
        JudgeKind::Remote => {
            let remote = config.remote_judge.clone().ok_or_else(|| {
                Error::config("judge = \"remote\" requires a [remote_judge] section".to_string())
            })?;
            Ok(Box::new(RemoteJudge::new(remote, build_template(config)?)?))
        }
    }
}

/// Judges every pair in the plan, spreading queries over worker threads.
///
/// Results come back in plan order regardless of scheduling. A pair whose
/// query keeps failing after its retry budget is skipped; any other error is
/// fatal, stops the remaining workers, and is returned (first in plan order
/// wins). Returns the completed records and the skip count.
fn run_judgments(
    set: &EssaySet,
    judge: &dyn Judge,
    plan: &PairPlan,
    concurrency: usize,
) -> Result<(Vec<PairwiseRecord>, usize)> {
    let pairs = plan.pairs();
    let slots: Vec<Mutex<Option<Result<PairwiseRecord>>>> =
        (0..pairs.len()).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let workers = concurrency.max(1).min(pairs.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if abort.load(Ordering::Relaxed) {
                    break;
                }
                let index = next.fetch_add(1, Ordering::Relaxed);
                if index >= pairs.len() {
                    break;
                }
                let (i, j) = &pairs[index];
                let result = compare_pair(judge, set, i, j);
                if matches!(&result, Err(e) if !matches!(e, Error::JudgeExhausted { .. })) {
                    abort.store(true, Ordering::Relaxed);
                }
                *slots[index].lock().expect("slot lock") = Some(result);
            });
        }
    });

    let mut records = Vec::with_capacity(pairs.len());
    let mut skipped = 0;
    for slot in slots {
        match slot.into_inner().expect("slot lock") {
            Some(Ok(record)) => records.push(record),
            Some(Err(Error::JudgeExhausted { .. })) => skipped += 1,
            Some(Err(fatal)) => return Err(fatal),
            // Unfilled slots only exist when a fatal error aborted the run,
            // and that error is returned by an earlier (or later) slot scan.
            None => continue,
        }
    }
    Ok((records, skipped))
}

/// What `generate` writes into `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateManifest {
    pub config_hash: String,
    /// SHA-256 of the essay file the comparisons were generated from.
    pub essays_sha256: String,
    pub seed: u64,
    pub judge_id: String,
    /// Pairs in the plan.
    pub requested: usize,
    /// Pairs that produced a record.
    pub completed: usize,
    pub skipped: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inconsistency_rate: Option<f64>,
}

/// In-memory result of `generate`.
#[derive(Debug)]
pub struct GenerateOutcome {
    pub plan: PairPlan,
    pub records: Vec<PairwiseRecord>,
    pub manifest: GenerateManifest,
}

/// Samples pairs, judges them, and writes `pairs.jsonl`, `comparisons.jsonl`,
/// and `manifest.json` under `config.out`.
///
/// When more than `max_skip_fraction` of the pairs skip, the artifacts are
/// still written (so the failure can be inspected) and the error is returned.
pub fn cmd_generate(config: &RunConfig) -> Result<GenerateOutcome> {
    config.validate()?;
    let set = load_configured_essays(config)?;
    let judge = build_judge(config, config.seed)?;
    generate_with_judge(config, &set, judge.as_ref())
}

/// [`cmd_generate`] with the judge supplied by the caller (for tests and
/// embedders that bring their own judge).
pub fn generate_with_judge(
    config: &RunConfig,
    set: &EssaySet,
    judge: &dyn Judge,
) -> Result<GenerateOutcome> {
    let plan = sample_pairs(set, config.pairs, derive_seed(config.seed, &["pairing"]))?;
    let (records, skipped) = run_judgments(set, judge, &plan, config.judge_concurrency)?;

    let manifest = GenerateManifest {
        config_hash: config_hash(config),
        essays_sha256: file_sha256(&config.essays)?,
        seed: config.seed,
        judge_id: judge.id(),
        requested: plan.pairs().len(),
        completed: records.len(),
        skipped,
        inconsistency_rate: if records.is_empty() {
            None
        } else {
            Some(inconsistency_rate(&records)?)
        },
    };

    std::fs::create_dir_all(&config.out)
        .map_err(|e| Error::io(config.out.display().to_string(), e))?;
    plan.save_jsonl(&config.out.join("pairs.jsonl"))?;
    save_comparisons(&records, &config.out.join("comparisons.jsonl"))?;
    write_json(&config.out.join("manifest.json"), &manifest)?;

    let fraction = skipped as f64 / plan.pairs().len() as f64;
    if fraction > config.max_skip_fraction {
        return Err(Error::TooManySkips {
            skipped,
            requested: plan.pairs().len(),
            percent: fraction * 100.0,
        });
    }
    Ok(GenerateOutcome {
        plan,
        records,
        manifest,
    })
}

/// What `score` writes into `score_manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreManifest {
    pub config_hash: String,
    /// Config hash recorded by the `generate` step that produced the
    /// comparisons.
    pub upstream_config_hash: String,
    pub essays_sha256: String,
    pub seed: u64,
    pub method: Method,
    pub essay_count: usize,
    pub record_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heldout_ids: Option<Vec<String>>,
}

/// In-memory result of `score`.
#[derive(Debug)]
pub struct ScoreOutcome {
    pub table: ScoreTable,
    pub converted: ConvertedScores,
    /// Metrics over all essays; `None` when the set carries no gold scores.
    pub eval: Option<EvalReport>,
    /// Metrics over the held-out essays when an inductive split was run.
    pub heldout_eval: Option<EvalReport>,
    pub manifest: ScoreManifest,
}

/// Training curve written alongside the model (the model file itself carries
/// the weights).
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TrainCurve {
    epoch_losses: Vec<f64>,
    pair_count: usize,
}

/// Fits latent scores from saved comparisons, converts them to the rubric
/// scale, and evaluates against golds when every essay has one.
///
/// Refuses to run when the essay file no longer matches the one the
/// comparisons were generated from (hash check against `manifest.json`).
pub fn cmd_score(config: &RunConfig) -> Result<ScoreOutcome> {
    config.validate()?;
    let set = load_configured_essays(config)?;

    let comparisons_path = config.comparisons_path();
    let manifest_path = comparisons_path
        .parent()
        .map(|dir| dir.join("manifest.json"))
        .unwrap_or_else(|| PathBuf::from("manifest.json"));
    let upstream = read_generate_manifest(&manifest_path)?;
    let essays_sha256 = file_sha256(&config.essays)?;
    if upstream.essays_sha256 != essays_sha256 {
        return Err(Error::Provenance {
            message: format!(
                "essay file {} (sha256 {}) is not the file the comparisons were \
                 generated from (sha256 {})",
                config.essays.display(),
                essays_sha256,
                upstream.essays_sha256
            ),
        });
    }
    let records = load_comparisons(&comparisons_path)?;
    if records.is_empty() {
        return Err(Error::Empty {
            context: format!("comparisons file {}", comparisons_path.display()),
        });
    }

    std::fs::create_dir_all(&config.out)
        .map_err(|e| Error::io(config.out.display().to_string(), e))?;

    let mut heldout_ids: Option<Vec<String>> = None;
    let table = match config.method {
        Method::Ranknet => {
            let set = attach_embeddings(&set, &config.embeddings, config.seed)?;
            let train_cfg = TrainConfig {
                seed: derive_seed(config.seed, &["train"]),
                ..config.train.clone()
            };
            let (train_set, train_records) = match config.inductive_split {
                Some(fraction) => {
                    let (train_set, ids) =
                        split_essays(&set, fraction, derive_seed(config.seed, &["split"]))?;
                    let held: HashSet<&str> = ids.iter().map(String::as_str).collect();
                    let kept: Vec<PairwiseRecord> = records
                        .iter()
                        .filter(|r| !held.contains(r.i.as_str()) && !held.contains(r.j.as_str()))
                        .cloned()
                        .collect();
                    if kept.is_empty() {
                        return Err(Error::Empty {
                            context: "training pairs after the inductive split".to_string(),
                        });
                    }
                    heldout_ids = Some(ids);
                    (train_set, kept)
                }
                None => (set.clone(), records.clone()),
            };
            let report = train(&train_set, &train_records, &train_cfg)?;
            report.model.save(&config.out.join("model.json"))?;
            write_json(
                &config.out.join("train_curve.json"),
                &TrainCurve {
                    epoch_losses: report.epoch_losses,
                    pair_count: report.pair_count,
                },
            )?;
            // Score the full set (held-out essays included): the network maps
            // embeddings to scores, so it can score essays it never trained on.
            report.model.score_all(&set)?
        }
        Method::Bt => bt_fit(&set, &records, &config.bt)?,
        Method::Elo => elo_run(
            &set,
            &records,
            &EloConfig {
                seed: derive_seed(config.seed, &["elo"]),
                ..config.elo
            },
        )?,
    };

    let converted = convert(&table, &set.rubric)?;
    converted.save_csv(&config.out.join("scores.csv"))?;

    let eval = evaluate_scores(&set, &table, &converted, Some(&records), None)?;
    if let Some(report) = &eval {
        write_json(&config.out.join("eval.json"), report)?;
    }
    let heldout_eval = match &heldout_ids {
        Some(ids) => {
            let filter: HashSet<String> = ids.iter().cloned().collect();
            let report = evaluate_scores(&set, &table, &converted, None, Some(&filter))?;
            if let Some(report) = &report {
                write_json(&config.out.join("heldout_eval.json"), report)?;
            }
            report
        }
        None => None,
    };

    let manifest = ScoreManifest {
        config_hash: config_hash(config),
        upstream_config_hash: upstream.config_hash,
        essays_sha256,
        seed: config.seed,
        method: config.method,
        essay_count: set.len(),
        record_count: records.len(),
        heldout_ids,
    };
    write_json(&config.out.join("score_manifest.json"), &manifest)?;

    Ok(ScoreOutcome {
        table,
        converted,
        eval,
        heldout_eval,
        manifest,
    })
}

fn read_generate_manifest(path: &Path) -> Result<GenerateManifest> {
    let display = path.display().to_string();
    let text = match std::fs::read_to_string(path) {
        Ok(text) => text,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::Provenance {
                message: format!(
                    "no manifest at {display}; comparisons without a manifest \
                     cannot be tied back to their essay file"
                ),
            });
        }
        Err(e) => return Err(Error::io(display, e)),
    };
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: display,
        line: 1,
        message: e.to_string(),
    })
}

/// Attaches embeddings from the configured source. The synthetic source's
/// seed is derived from `seed` so different runs (and sweep cells) draw
/// different noise.
fn attach_embeddings(
    set: &EssaySet,
    source: &EmbeddingSourceConfig,
    seed: u64,
) -> Result<EssaySet> {
    match source {
        EmbeddingSourceConfig::File => {
            set.require_embeddings()?;
            Ok(set.clone())
        }
        EmbeddingSourceConfig::Synthetic(spec) => {
            let spec = SyntheticSpec {
                seed: derive_seed(seed, &["embeddings"]),
                ..spec.clone()
            };
            embed_synthetic(set, &spec)
        }
        EmbeddingSourceConfig::Remote(cfg) => embed_remote(set, cfg),
    }
}

/// Splits a set into a training subset and held-out essay ids.
///
/// The held-out group is a seeded sample of `round(fraction * n)` essays
/// (clamped so both sides keep at least two); the training subset preserves
/// the original essay order. Returned ids are sorted ascending.
pub fn split_essays(set: &EssaySet, fraction: f64, seed: u64) -> Result<(EssaySet, Vec<String>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::config(format!(
            "holdout fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let n = set.len();
    if n < 4 {
        return Err(Error::config(format!(
            "need at least 4 essays to split off a holdout, got {n}"
        )));
    }
    let holdout = ((fraction * n as f64).round() as usize).clamp(2, n - 2);

    let mut ids: Vec<&str> = set.essays().iter().map(|e| e.id.as_str()).collect();
    let mut rng = crate::seeding::rng_for_context(seed, &["inductive-split"]);
    ids.shuffle(&mut rng);
    let mut heldout: Vec<String> = ids[..holdout].iter().map(|s| s.to_string()).collect();
    heldout.sort();

    let held: HashSet<&str> = heldout.iter().map(String::as_str).collect();
    let train_essays: Vec<_> = set
        .essays()
        .iter()
        .filter(|e| !held.contains(e.id.as_str()))
        .cloned()
        .collect();
    let train_set = EssaySet::new(train_essays)?
        .with_context(set.prompt_text.clone(), set.rubric_text.clone())
        .with_rubric(set.rubric.clone());
    Ok((train_set, heldout))
}

/// Maps a defined metric to `Some`, an undefined one to `None`, and lets
/// real errors (bad level sets, non-finite inputs) propagate.
fn metric_or_none(result: Result<f64>) -> Result<Option<f64>> {
    match result {
        Ok(value) => Ok(Some(value)),
        Err(Error::UndefinedMetric { .. }) => Ok(None),
        Err(error) => Err(error),
    }
}

/// Builds an [`EvalReport`] for the scored essays, or `None` when any essay
/// lacks a gold score.
///
/// QWK uses the rubric's levels when declared, else its category indices,
/// else it is left undefined. Record-level metrics (inconsistency,
/// agreement) are included only when `records` is given; `filter` restricts
/// the essay-level metrics to a subset (used for held-out evaluation).
fn evaluate_scores(
    set: &EssaySet,
    table: &ScoreTable,
    converted: &ConvertedScores,
    records: Option<&[PairwiseRecord]>,
    filter: Option<&HashSet<String>>,
) -> Result<Option<EvalReport>> {
    let keep = |id: &str| filter.is_none_or(|f| f.contains(id));

    let mut latents = Vec::new();
    let mut golds = Vec::new();
    for (id, latent) in table.entries() {
        if !keep(id) {
            continue;
        }
        match set.get(id)?.gold_score {
            Some(gold) => {
                latents.push(*latent);
                golds.push(gold);
            }
            None => return Ok(None),
        }
    }

    let spearman_value = metric_or_none(spearman(&latents, &golds))?;

    let rubric = &set.rubric;
    let qwk_value = if let Some(levels) = &rubric.levels {
        // Continuous golds off the level set make QWK inapplicable for this
        // data, not an error; the strict membership check stays in `qwk`.
        if golds.iter().any(|g| !levels.contains(g)) {
            None
        } else {
            let preds: Vec<f64> = converted
                .rows
                .iter()
                .filter(|row| keep(&row.id))
                .map(|row| row.level.expect("levels declared, so rows carry levels"))
                .collect();
            metric_or_none(qwk(&preds, &golds, levels))?
        }
    } else if let Some(categories) = &rubric.categories {
        let index_of = |name: &str| -> f64 {
            categories
                .names
                .iter()
                .position(|n| n == name)
                .expect("category name comes from this spec") as f64
        };
        let pred_idx: Vec<f64> = converted
            .rows
            .iter()
            .filter(|row| keep(&row.id))
            .map(|row| index_of(row.category.as_ref().expect("categories declared")))
            .collect();
        let gold_idx: Vec<f64> = golds
            .iter()
            .map(|&g| to_category(g, categories).map(|name| index_of(&name)))
            .collect::<Result<_>>()?;
        let index_levels: Vec<f64> = (0..categories.names.len()).map(|k| k as f64).collect();
        metric_or_none(qwk(&pred_idx, &gold_idx, &index_levels))?
    } else {
        None
    };

    let mut report = EvalReport {
        qwk: qwk_value,
        spearman: spearman_value,
        n: latents.len(),
        inconsistency_rate: None,
        agreement_all: None,
        agreement_excl_ties: None,
        agreement_raw_all: None,
    };
    if let Some(records) = records {
        if !records.is_empty() {
            report.inconsistency_rate = Some(inconsistency_rate(records)?);
            let debiased = agreement_rate(records, set)?;
            let raw = agreement_rate_raw(records, set)?;
            report.agreement_all = Some(debiased.all);
            report.agreement_excl_ties = debiased.excl_ties;
            report.agreement_raw_all = Some(raw.all);
        }
    }
    Ok(Some(report))
}

/// One sweep measurement: a (pair budget, method, repeat) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Pair budget (the `M` column).
    pub pair_budget: usize,
    pub method: Method,
    /// The cell's derived seed (shared by the methods within the cell).
    pub seed: u64,
    pub qwk: Option<f64>,
    pub spearman: Option<f64>,
}

/// What `sweep` writes into `sweep_manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepManifest {
    pub config_hash: String,
    pub essays_sha256: String,
    pub seed: u64,
    pub pair_budgets: Vec<usize>,
    pub methods: Vec<Method>,
    pub repeats: usize,
    pub rows: usize,
}

/// In-memory result of `sweep`.
#[derive(Debug)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub manifest: SweepManifest,
}

/// Measures every configured method across pair budgets and repeats.
///
/// Each (budget, repeat) cell generates ONE comparison set from its derived
/// seed and fits all methods on it, so method differences within a cell are
/// differences in estimation, not in data. Rows are ordered budget-major,
/// then repeat, then method. Writes `sweep.csv` and `sweep_manifest.json`.
pub fn cmd_sweep(config: &RunConfig) -> Result<SweepOutcome> {
    config.validate()?;
    let base_set = load_configured_essays(config)?;

    let capacity = base_set.len() * (base_set.len() - 1) / 2;
    if let Some(&largest) = config.sweep_pairs.last() {
        if largest > capacity {
            return Err(Error::config(format!(
                "budget {largest} exceeds the {capacity} distinct pairs of {} essays",
                base_set.len()
            )));
        }
    }

    // Static embedding sources attach once; synthetic ones are drawn per cell
    // below so repeats see different noise.
    let static_set = match &config.embeddings {
        EmbeddingSourceConfig::Synthetic(_) => None,
        source if config.sweep_methods.contains(&Method::Ranknet) => {
            Some(attach_embeddings(&base_set, source, config.seed)?)
        }
        _ => None,
    };

    let mut rows = Vec::new();
    for &budget in &config.sweep_pairs {
        for repeat in 0..config.repeats {
            let cell_seed = derive_seed(
                config.seed,
                &["sweep", &budget.to_string(), &repeat.to_string()],
            );
            let judge = build_judge(config, cell_seed)?;
            let plan = sample_pairs(&base_set, budget, derive_seed(cell_seed, &["pairing"]))?;
            let (records, skipped) =
                run_judgments(&base_set, judge.as_ref(), &plan, config.judge_concurrency)?;
            let fraction = skipped as f64 / plan.pairs().len() as f64;
            if fraction > config.max_skip_fraction {
                return Err(Error::TooManySkips {
                    skipped,
                    requested: plan.pairs().len(),
                    percent: fraction * 100.0,
                });
            }

            let embedded_set = if config.sweep_methods.contains(&Method::Ranknet) {
                match &static_set {
                    Some(set) => set.clone(),
                    None => attach_embeddings(&base_set, &config.embeddings, cell_seed)?,
                }
            } else {
                base_set.clone()
            };

            for &method in &config.sweep_methods {
                let table = match method {
                    Method::Ranknet => {
                        let train_cfg = TrainConfig {
                            seed: derive_seed(cell_seed, &["train"]),
                            ..config.train.clone()
                        };
                        train(&embedded_set, &records, &train_cfg)?
                            .model
                            .score_all(&embedded_set)?
                    }
                    Method::Bt => bt_fit(&base_set, &records, &config.bt)?,
                    Method::Elo => elo_run(
                        &base_set,
                        &records,
                        &EloConfig {
                            seed: derive_seed(cell_seed, &["elo"]),
                            ..config.elo
                        },
                    )?,
                };
                let converted = convert(&table, &base_set.rubric)?;
                let eval = evaluate_scores(&base_set, &table, &converted, None, None)?;
                let (qwk_value, spearman_value) = match eval {
                    Some(report) => (report.qwk, report.spearman),
                    None => (None, None),
                };
                rows.push(SweepRow {
                    pair_budget: budget,
                    method,
                    seed: cell_seed,
                    qwk: qwk_value,
                    spearman: spearman_value,
                });
            }
        }
    }

    std::fs::create_dir_all(&config.out)
        .map_err(|e| Error::io(config.out.display().to_string(), e))?;
    let mut csv = String::from("M,method,seed,qwk,spearman\n");
    for row in &rows {
        let qwk_cell = row.qwk.map(format_float).unwrap_or_default();
        let spearman_cell = row.spearman.map(format_float).unwrap_or_default();
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            row.pair_budget, row.method, row.seed, qwk_cell, spearman_cell
        ));
    }
    atomic_write(&config.out.join("sweep.csv"), csv.as_bytes())?;

    let manifest = SweepManifest {
        config_hash: config_hash(config),
        essays_sha256: file_sha256(&config.essays)?,
        seed: config.seed,
        pair_budgets: config.sweep_pairs.clone(),
        methods: config.sweep_methods.clone(),
        repeats: config.repeats,
        rows: rows.len(),
    };
    write_json(&config.out.join("sweep_manifest.json"), &manifest)?;

    Ok(SweepOutcome { rows, manifest })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Essay;
    use crate::judge::Verdict;

    fn write_essay_csv(dir: &Path, n: usize) -> PathBuf {
        let mut csv = String::from("id,prompt_id,text,gold_score\n");
        for k in 0..n {
            // Golds cycle over 1..=5 so every rubric level appears.
            let gold = (k % 5 + 1) as f64;
            csv.push_str(&format!("e{k:03},p1,essay text number {k},{gold}\n"));
        }
        let path = dir.join("essays.csv");
        std::fs::write(&path, csv).unwrap();
        path
    }

    fn small_config(dir: &Path, n: usize, pairs: usize) -> RunConfig {
        RunConfig {
            essays: write_essay_csv(dir, n),
            out: dir.join("out"),
            seed: 7,
            pairs,
            train: TrainConfig {
                epochs: 40,
                hidden_units: 8,
                batch_size: 64,
                dropout_rate: 0.0,
                ..TrainConfig::default()
            },
            embeddings: EmbeddingSourceConfig::Synthetic(SyntheticSpec {
                dim: 8,
                noise_std: 0.05,
                ..SyntheticSpec::default()
            }),
            ..RunConfig::default()
        }
    }

    #[test]
    fn generate_then_score_produces_all_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let config = small_config(dir.path(), 30, 200);

        let generated = cmd_generate(&config).unwrap();
        assert_eq!(generated.records.len(), 200);
        assert_eq!(generated.manifest.skipped, 0);
        // A noiseless simulator never contradicts itself across orders.
        assert_eq!(generated.manifest.inconsistency_rate, Some(0.0));
        for name in ["pairs.jsonl", "comparisons.jsonl", "manifest.json"] {
            assert!(config.out.join(name).exists(), "missing {name}");
        }

        let scored = cmd_score(&config).unwrap();
        assert_eq!(scored.table.len(), 30);
        let eval = scored.eval.expect("golds present, so eval must exist");
        assert_eq!(eval.n, 30);
        assert!(eval.spearman.unwrap() > 0.8, "spearman {:?}", eval.spearman);
        assert!(eval.qwk.is_some());
        assert_eq!(eval.inconsistency_rate, Some(0.0));
        assert_eq!(eval.agreement_all, Some(1.0));
        for name in [
            "scores.csv",
            "eval.json",
            "model.json",
            "train_curve.json",
            "score_manifest.json",
        ] {
            assert!(config.out.join(name).exists(), "missing {name}");
        }
    }

    #[test]
    fn bt_and_elo_methods_score_without_embeddings() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(dir.path(), 20, 150);
        config.embeddings = EmbeddingSourceConfig::File; // would fail if touched
        cmd_generate(&config).unwrap();

        for method in [Method::Bt, Method::Elo] {
            config.method = method;
            let scored = cmd_score(&config).unwrap();
            assert_eq!(scored.table.len(), 20);
            assert!(scored.eval.unwrap().spearman.unwrap() > 0.8);
        }
    }

    #[test]
    fn rerun_with_same_config_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let config = small_config(dir.path(), 15, 60);

        cmd_generate(&config).unwrap();
        cmd_score(&config).unwrap();
        let read = |name: &str| std::fs::read(config.out.join(name)).unwrap();
        let first: Vec<Vec<u8>> = [
            "comparisons.jsonl",
            "manifest.json",
            "scores.csv",
            "model.json",
        ]
        .iter()
        .map(|n| read(n))
        .collect();

        cmd_generate(&config).unwrap();
        cmd_score(&config).unwrap();
        let second: Vec<Vec<u8>> = [
            "comparisons.jsonl",
            "manifest.json",
            "scores.csv",
            "model.json",
        ]
        .iter()
        .map(|n| read(n))
        .collect();
        assert_eq!(first, second);
    }

    #[test]
    fn concurrency_does_not_change_the_records() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(dir.path(), 20, 100);
        config.judge_concurrency = 1;
        let serial = cmd_generate(&config).unwrap();
        config.judge_concurrency = 8;
        let parallel = cmd_generate(&config).unwrap();
        assert_eq!(serial.records, parallel.records);
    }

    #[test]
    fn score_rejects_comparisons_from_a_different_essay_file() {
        let dir = tempfile::tempdir().unwrap();
        let config = small_config(dir.path(), 12, 40);
        cmd_generate(&config).unwrap();

        // Append one more essay: same records, different provenance.
        let mut text = std::fs::read_to_string(&config.essays).unwrap();
        text.push_str("e999,p1,a late arrival,3\n");
        std::fs::write(&config.essays, text).unwrap();

        match cmd_score(&config) {
            Err(Error::Provenance { .. }) => {}
            other => panic!("expected a provenance rejection, got {other:?}"),
        }
    }

    #[test]
    fn score_without_a_manifest_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let config = small_config(dir.path(), 12, 40);
        cmd_generate(&config).unwrap();
        std::fs::remove_file(config.out.join("manifest.json")).unwrap();
        match cmd_score(&config) {
            Err(Error::Provenance { .. }) => {}
            other => panic!("expected a provenance rejection, got {other:?}"),
        }
    }

    /// A judge whose queries always fail with a retryable error, so every
    /// pair exhausts its attempts and is skipped.
    struct HopelessJudge;

    impl Judge for HopelessJudge {
        fn id(&self) -> String {
            "hopeless".to_string()
        }

        fn max_attempts(&self) -> usize {
            2
        }

        fn judge_once(&self, _set: &EssaySet, _first: &Essay, _second: &Essay) -> Result<Verdict> {
            Err(Error::Remote {
                endpoint: "nowhere".to_string(),
                message: "always down".to_string(),
            })
        }
    }

    #[test]
    fn all_skips_still_writes_artifacts_then_errors() {
        let dir = tempfile::tempdir().unwrap();
        let config = small_config(dir.path(), 10, 20);
        let set = load_configured_essays(&config).unwrap();

        match generate_with_judge(&config, &set, &HopelessJudge) {
            Err(Error::TooManySkips {
                skipped, requested, ..
            }) => {
                assert_eq!((skipped, requested), (20, 20));
            }
            other => panic!("expected TooManySkips, got {other:?}"),
        }
        // The artifacts exist so the failed run can be inspected.
        assert!(config.out.join("manifest.json").exists());
        let manifest = read_generate_manifest(&config.out.join("manifest.json")).unwrap();
        assert_eq!(manifest.completed, 0);
        assert_eq!(manifest.skipped, 20);
        assert_eq!(manifest.inconsistency_rate, None);
    }

    #[test]
    fn inductive_split_holds_out_essays_and_reports_them() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(dir.path(), 30, 300);
        config.inductive_split = Some(0.2);
        cmd_generate(&config).unwrap();
        let scored = cmd_score(&config).unwrap();

        let ids = scored.manifest.heldout_ids.clone().unwrap();
        assert_eq!(ids.len(), 6);
        // Every essay is scored, held-out ones included.
        assert_eq!(scored.table.len(), 30);
        let heldout = scored
            .heldout_eval
            .expect("split ran, so heldout eval exists");
        assert_eq!(heldout.n, 6);
        assert!(heldout.spearman.is_some());
        // Record-level metrics are undefined for the held-out slice.
        assert_eq!(heldout.inconsistency_rate, None);
        assert!(config.out.join("heldout_eval.json").exists());
    }

    #[test]
    fn split_is_deterministic_and_order_preserving() {
        let dir = tempfile::tempdir().unwrap();
        let config = small_config(dir.path(), 20, 10);
        let set = load_configured_essays(&config).unwrap();

        let (train_a, held_a) = split_essays(&set, 0.25, 42).unwrap();
        let (train_b, held_b) = split_essays(&set, 0.25, 42).unwrap();
        assert_eq!(held_a, held_b);
        assert_eq!(train_a, train_b);
        assert_eq!(held_a.len(), 5);
        assert_eq!(train_a.len(), 15);

        // Training subset preserves the input order of the survivors.
        let original: Vec<&str> = set.essays().iter().map(|e| e.id.as_str()).collect();
        let survivors: Vec<&str> = train_a.essays().iter().map(|e| e.id.as_str()).collect();
        let expected: Vec<&str> = original
            .iter()
            .copied()
            .filter(|id| !held_a.iter().any(|h| h == id))
            .collect();
        assert_eq!(survivors, expected);

        let (_, held_other) = split_essays(&set, 0.25, 43).unwrap();
        assert_ne!(held_a, held_other, "different seeds should differ");
    }

    #[test]
    fn sweep_emits_one_row_per_cell_and_method() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(dir.path(), 14, 40);
        config.sweep_pairs = vec![20, 60];
        config.repeats = 2;
        config.train.epochs = 20;

        let outcome = cmd_sweep(&config).unwrap();
        assert_eq!(outcome.rows.len(), 2 * 2 * 3);
        assert_eq!(outcome.manifest.rows, 12);

        // Budget-major, then repeat, then method; one shared seed per cell.
        let first_cell: Vec<_> = outcome.rows[..3].iter().collect();
        assert!(first_cell.iter().all(|r| r.pair_budget == 20));
        assert_eq!(first_cell[0].seed, first_cell[2].seed);
        assert_ne!(outcome.rows[0].seed, outcome.rows[3].seed);

        let csv = std::fs::read_to_string(config.out.join("sweep.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("M,method,seed,qwk,spearman"));
        assert_eq!(lines.count(), 12);
        assert!(config.out.join("sweep_manifest.json").exists());

        // Metrics are populated (golds exist and spread over levels).
        assert!(outcome
            .rows
            .iter()
            .all(|r| r.qwk.is_some() && r.spearman.is_some()));
    }

    #[test]
    fn sweep_rejects_budgets_beyond_the_pair_capacity() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(dir.path(), 6, 10);
        config.sweep_pairs = vec![10, 1000]; // 6 essays have only 15 pairs
        config.repeats = 2;
        match cmd_sweep(&config) {
            Err(Error::Config { message }) => assert!(message.contains("exceeds")),
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn config_file_overrides_flag_values() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(dir.path(), 10, 50);
        config.seed = 1; // pretend this came from a flag

        let toml_path = dir.path().join("run.toml");
        std::fs::write(
            &toml_path,
            "seed = 99\npairs = 123\n\n[train]\nepochs = 7\n\n[sim]\nflip_prob = 0.25\n",
        )
        .unwrap();
        let patch = RunConfigPatch::from_toml_path(&toml_path).unwrap();
        patch.apply(&mut config);

        assert_eq!(config.seed, 99);
        assert_eq!(config.pairs, 123);
        assert_eq!(config.train.epochs, 7);
        assert_eq!(config.sim.flip_prob, 0.25);
        // Untouched fields keep their previous values.
        assert_eq!(config.train.hidden_units, 8);
    }

    #[test]
    fn config_file_with_unknown_keys_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let toml_path = dir.path().join("run.toml");
        std::fs::write(&toml_path, "sed = 99\n").unwrap();
        match RunConfigPatch::from_toml_path(&toml_path) {
            Err(Error::Config { message }) => assert!(message.contains("sed")),
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn embedding_source_round_trips_through_toml() {
        let toml_text = "[embeddings]\nsource = \"synthetic\"\ndim = 4\nnoise_std = 0.5\n";
        let patch: RunConfigPatch = toml::from_str(toml_text).unwrap();
        match patch.embeddings.unwrap() {
            EmbeddingSourceConfig::Synthetic(spec) => {
                assert_eq!(spec.dim, 4);
                assert_eq!(spec.noise_std, 0.5);
                assert_eq!(spec.signal_strength, 1.0, "unset fields keep defaults");
            }
            other => panic!("wrong source: {other:?}"),
        }
    }

    #[test]
    fn config_hash_tracks_content_not_identity() {
        let dir = tempfile::tempdir().unwrap();
        let config = small_config(dir.path(), 10, 50);
        let twin = config.clone();
        assert_eq!(config_hash(&config), config_hash(&twin));

        let mut changed = config.clone();
        changed.seed += 1;
        assert_ne!(config_hash(&config), config_hash(&changed));
    }

    #[test]
    fn validate_rejects_inductive_split_for_baselines() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(dir.path(), 10, 50);
        config.inductive_split = Some(0.2);
        config.method = Method::Bt;
        assert!(matches!(config.validate(), Err(Error::Config { .. })));
        config.method = Method::Ranknet;
        assert!(config.validate().is_ok());
    }
}
