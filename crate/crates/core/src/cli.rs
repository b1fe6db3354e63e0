//! Command-line pipeline. `run` is literally `extract`, `train`, `predict`
//! and `eval` in sequence, so the staged commands reproduce it byte for byte.
//!
//! Output layout under the configured directory:
//!
//! ```text
//! manifest.json  report.csv  report.md
//! runs/<cell>/r<repeat>/predictions.csv
//! runs/<cell>/r<repeat>/trial_<t>/{rules.json | failure.json, model.json, fill.json}
//! ```
//!
//! where `<cell>` is `k<shots>-<ablation>`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::ensemble::{
    argmax, extract_all, plan_trial, train_all, Ablations, EnsembleConfig, EnsembleModel,
    ExtractedTrial, TrialFailure, TrialRecord,
};
use crate::eval::{
    auc_multiclass, prepare_repeat, solution_mix_oracle_client, DatasetRef, ExperimentConfig,
    LoadedData, Report, ReportRow,
};
use crate::llm::{
    ClientKind, HttpClient, HttpConfig, LlmClient, LlmError, ReplayClient, ScriptedClient, API_KEY_ENV,
};
use crate::model::{TrainConfig, TrialModel};
use crate::prompt::{build_rule_prompt, TEMPLATE_VERSION};
use crate::ruledsl::{MissingStrategy, RuleSet};
use crate::schema::{load_dataset, LabeledSet};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_PIPELINE: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Pipeline(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Pipeline(_) => EXIT_PIPELINE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Pipeline(m) => write!(f, "pipeline failure: {m}"),
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn pipeline_err(e: impl std::fmt::Display) -> CliError {
    CliError::Pipeline(e.to_string())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmSettings {
    pub kind: ClientKind,
    pub model_name: String,
    pub base_url: Option<String>,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    /// Transcript directory: served from when replaying, written to when
    /// `record` is set.
    pub transcripts: Option<PathBuf>,
    pub record: bool,
    /// Scripted answers: `solution_mix_oracle`, or a text file returned for
    /// every prompt.
    pub script: Option<String>,
    pub max_concurrent: usize,
}

impl Default for LlmSettings {
    fn default() -> Self {
        Self {
            kind: ClientKind::HttpOpenaiCompatible,
            model_name: "gpt-3.5-turbo-0613".into(),
            base_url: None,
            temperature: 0.5,
            top_p: 1.0,
            max_tokens: 2000,
            transcripts: None,
            record: false,
            script: None,
            max_concurrent: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleSettings {
    pub trials: usize,
    pub rules: usize,
    pub budget_tokens: usize,
    pub max_bagged_examples: usize,
    pub retry_per_trial: usize,
    pub seed: u64,
    pub workers: usize,
}

impl Default for EnsembleSettings {
    fn default() -> Self {
        Self {
            trials: 20,
            rules: 10,
            budget_tokens: 3000,
            max_bagged_examples: 16,
            retry_per_trial: 1,
            seed: 0,
            workers: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSettings {
    pub learning_rate: f64,
    pub epochs: usize,
    pub folds: Option<usize>,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 200,
            folds: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSettings {
    pub shots: Vec<usize>,
    pub repeats: usize,
    pub ablations: Vec<String>,
    pub missing: MissingStrategy,
    pub test_fraction: f64,
    pub timing: bool,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            shots: vec![4],
            repeats: 3,
            ablations: vec!["none".into()],
            missing: MissingStrategy::Zero,
            test_fraction: 0.2,
            timing: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: DatasetRef,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub llm: LlmSettings,
    #[serde(default)]
    pub ensemble: EnsembleSettings,
    #[serde(default)]
    pub train: TrainSettings,
    #[serde(default)]
    pub eval: EvalSettings,
    #[serde(default = "default_output", skip_serializing)]
    pub output_dir: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("featling-out")
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.output_dir = resolve(base, &cfg.output_dir);
        Ok(cfg)
    }

    fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(s) = &o.shots {
            self.eval.shots = s.clone();
        }
        if let Some(t) = o.trials {
            self.ensemble.trials = t;
        }
        if let Some(s) = o.seed {
            self.ensemble.seed = s;
        }
        if let Some(a) = &o.ablation {
            self.eval.ablations = vec![a.clone()];
        }
        if let Some(m) = o.missing {
            self.eval.missing = m.into();
        }
        if let Some(l) = &o.llm {
            self.llm.kind = parse_client_kind(l).ok_or_else(|| config_err(format!("unknown --llm `{l}`")))?;
        }
        if let Some(out) = &o.output {
            self.output_dir = out.clone();
        }
        Ok(())
    }

    pub fn ablations(&self) -> Result<Vec<Ablations>, CliError> {
        self.eval
            .ablations
            .iter()
            .map(|a| Ablations::parse(a).ok_or_else(|| config_err(format!("unknown ablation `{a}`"))))
            .collect()
    }

    pub fn experiment(&self) -> Result<ExperimentConfig, CliError> {
        if self.eval.shots.is_empty() || self.eval.repeats == 0 || self.ensemble.trials == 0 {
            return Err(config_err("shots, repeats and trials must be non-empty and positive"));
        }
        Ok(ExperimentConfig {
            dataset: self.dataset.clone(),
            name: self.name.clone(),
            shots: self.eval.shots.clone(),
            repeats: self.eval.repeats,
            seed: self.ensemble.seed,
            test_fraction: self.eval.test_fraction,
            ablations: self.ablations()?,
            ensemble: EnsembleConfig {
                num_trials: self.ensemble.trials,
                num_rules: self.ensemble.rules,
                temperature: self.llm.temperature,
                top_p: self.llm.top_p,
                max_tokens: self.llm.max_tokens,
                model_name: self.llm.model_name.clone(),
                prompt_budget_tokens: self.ensemble.budget_tokens,
                max_bagged_examples: self.ensemble.max_bagged_examples,
                retry_per_trial: self.ensemble.retry_per_trial,
                seed: self.ensemble.seed,
                workers: self.ensemble.workers,
                missing: self.eval.missing,
                train: TrainConfig {
                    learning_rate: self.train.learning_rate,
                    max_epochs: self.train.epochs,
                    folds: self.train.folds,
                    ..TrainConfig::default()
                },
                ablations: Ablations::default(),
            },
            timing: self.eval.timing,
        })
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn parse_client_kind(s: &str) -> Option<ClientKind> {
    match s.replace('-', "_").as_str() {
        "http" | "http_openai_compatible" | "openai" => Some(ClientKind::HttpOpenaiCompatible),
        "replay" => Some(ClientKind::Replay),
        "scripted" => Some(ClientKind::Scripted),
        _ => None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MissingArg {
    Zero,
    Half,
    Impute,
}

impl From<MissingArg> for MissingStrategy {
    fn from(m: MissingArg) -> Self {
        match m {
            MissingArg::Zero => MissingStrategy::Zero,
            MissingArg::Half => MissingStrategy::Half,
            MissingArg::Impute => MissingStrategy::Impute,
        }
    }
}

#[derive(Clone, Debug, Args)]
pub struct Overrides {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Shots per run, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub shots: Option<Vec<usize>>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `none`, `no-tuning`, `no-ensemble`, `no-description`, `no-reasoning`,
    /// or a `+` separated combination.
    #[arg(long)]
    pub ablation: Option<String>,
    #[arg(long, value_enum)]
    pub missing: Option<MissingArg>,
    /// `http`, `replay` or `scripted`.
    #[arg(long)]
    pub llm: Option<String>,
    /// Output directory (overrides the config).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Subject {
    Prompt,
    Rules,
    Weights,
}

#[derive(Clone, Debug, Subcommand)]
pub enum Command {
    /// Extract, train, predict and evaluate.
    Run(Overrides),
    /// Query the model and write rule caches.
    Extract(Overrides),
    /// Fit trial models from rule caches.
    Train(Overrides),
    /// Write test-set class probabilities from trained models.
    Predict(Overrides),
    /// Score predictions and write the report and manifest.
    Eval(Overrides),
    /// Print a prompt, a rule cache or learned weights.
    Inspect {
        #[arg(value_enum)]
        subject: Subject,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        #[arg(long, default_value_t = 0)]
        repeat: usize,
        /// Grid cell such as `k4-none`; defaults to the first one.
        #[arg(long)]
        cell: Option<String>,
        /// Minimum weight shown by `inspect weights`.
        #[arg(long, default_value_t = 0.1)]
        threshold: f64,
        /// Use these labelled rows as the shots for `inspect prompt`.
        #[arg(long)]
        shots_file: Option<PathBuf>,
        /// Keep the shots in file order for `inspect prompt`.
        #[arg(long)]
        unshuffled: bool,
    },
}

#[derive(Clone, Debug, Parser)]
#[command(name = "featling", version, about = "Rule-feature few-shot tabular classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Builds the completion client for `extract`. Tests swap in their own.
pub type ClientProvider<'a> = dyn Fn(&LlmSettings) -> Result<Arc<dyn LlmClient>, CliError> + 'a;

pub fn default_client(settings: &LlmSettings) -> Result<Arc<dyn LlmClient>, CliError> {
    let http = || -> Result<Arc<dyn LlmClient>, CliError> {
        let mut cfg = HttpConfig::from_env(settings.base_url.as_deref()).map_err(|e| match e {
            LlmError::MissingApiKey => config_err(format!(
                "the http client needs an API key in the {API_KEY_ENV} environment variable"
            )),
            other => config_err(other),
        })?;
        cfg.max_concurrent = settings.max_concurrent;
        Ok(Arc::new(HttpClient::new(cfg)))
    };
    let base: Arc<dyn LlmClient> = match settings.kind {
        ClientKind::HttpOpenaiCompatible => http()?,
        ClientKind::Scripted => match settings.script.as_deref() {
            Some("solution_mix_oracle") => Arc::new(solution_mix_oracle_client()),
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| config_err(format!("script {path}: {e}")))?;
                Arc::new(ScriptedClient::constant(text))
            }
            None => return Err(config_err("the scripted client needs `llm.script`")),
        },
        ClientKind::Replay => {
            let dir = settings
                .transcripts
                .clone()
                .ok_or_else(|| config_err("the replay client needs `llm.transcripts`"))?;
            return Ok(if settings.record {
                Arc::new(ReplayClient::recording(dir, http()?))
            } else {
                Arc::new(ReplayClient::strict(dir))
            });
        }
    };
    Ok(match (&settings.transcripts, settings.record) {
        (Some(dir), true) => Arc::new(ReplayClient::recording(dir.clone(), base)),
        _ => base,
    })
}

struct Cell {
    shots: usize,
    ablations: Ablations,
}

impl Cell {
    fn name(&self) -> String {
        format!("k{}-{}", self.shots, self.ablations.label())
    }
}

struct Session {
    cfg: RunConfig,
    /// The configuration as written plus overrides, before path resolution.
    written: RunConfig,
    exp: ExperimentConfig,
    loaded: LoadedData,
    out: PathBuf,
}

impl Session {
    fn open(o: &Overrides) -> Result<Self, CliError> {
        let mut cfg = RunConfig::load(&o.config)?;
        cfg.apply(o)?;
        let written = cfg.clone();
        let base = o.config.parent().unwrap_or(Path::new(".")).to_path_buf();
        if let DatasetRef::Files { data, metadata, .. } = &mut cfg.dataset {
            *data = resolve(&base, data);
            *metadata = resolve(&base, metadata);
        }
        if let Some(t) = &cfg.llm.transcripts {
            cfg.llm.transcripts = Some(resolve(&base, t));
        }
        if let Some(s) = &cfg.llm.script {
            if s != "solution_mix_oracle" {
                cfg.llm.script = Some(resolve(&base, Path::new(s)).to_string_lossy().into_owned());
            }
        }
        let exp = cfg.experiment()?;
        let loaded = exp.dataset.load().map_err(config_err)?;
        let out = cfg.output_dir.clone();
        Ok(Self {
            cfg,
            written,
            exp,
            loaded,
            out,
        })
    }

    fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &shots in &self.exp.shots {
            for &ablations in &self.exp.ablations {
                out.push(Cell { shots, ablations });
            }
        }
        out
    }

    fn repeat_dir(&self, cell: &Cell, repeat: usize) -> PathBuf {
        self.out.join("runs").join(cell.name()).join(format!("r{repeat}"))
    }

    fn trial_dir(&self, cell: &Cell, repeat: usize, trial: usize) -> PathBuf {
        self.repeat_dir(cell, repeat).join(format!("trial_{trial}"))
    }

    fn data(&self, cell: &Cell, repeat: usize) -> Result<(LabeledSet, LabeledSet), CliError> {
        let d = prepare_repeat(&self.exp, &self.loaded, cell.shots, repeat).map_err(config_err)?;
        Ok((d.shots, d.test))
    }

    fn ensemble_cfg(&self, cell: &Cell, repeat: usize) -> EnsembleConfig {
        self.exp.cell_config(cell.ablations, repeat)
    }

    fn record_time(&self, cell: &Cell, stage: &str, start: Instant) -> Result<(), CliError> {
        if !self.exp.timing {
            return Ok(());
        }
        let path = self.out.join("runs").join(cell.name()).join("timing.json");
        let mut times: BTreeMap<String, f64> = match fs::read_to_string(&path) {
            Ok(t) => serde_json::from_str(&t).map_err(pipeline_err)?,
            Err(_) => BTreeMap::new(),
        };
        times.insert(stage.to_owned(), start.elapsed().as_secs_f64());
        write_json(&path, &times)
    }

    fn wall_seconds(&self, cell: &Cell) -> Option<f64> {
        if !self.exp.timing {
            return None;
        }
        let path = self.out.join("runs").join(cell.name()).join("timing.json");
        let times: BTreeMap<String, f64> = serde_json::from_str(&fs::read_to_string(path).ok()?).ok()?;
        Some(times.values().sum())
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| pipeline_err(format!("{}: {e}", dir.display())))?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(pipeline_err)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| pipeline_err(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| pipeline_err(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| pipeline_err(format!("{}: {e}", path.display())))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, stage: &str) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|_| config_err(format!("{} is missing; run `{stage}` first", path.display())))?;
    serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

/// Extraction results of one repeat, as stored on disk.
fn load_extracted(s: &Session, cell: &Cell, repeat: usize) -> Result<Vec<Result<ExtractedTrial, TrialFailure>>, CliError> {
    let trials = s.ensemble_cfg(cell, repeat).effective_trials();
    (0..trials)
        .map(|t| {
            let dir = s.trial_dir(cell, repeat, t);
            let failure = dir.join("failure.json");
            if failure.exists() {
                Ok(Err(read_json(&failure, "extract")?))
            } else {
                Ok(Ok(read_json(&dir.join("rules.json"), "extract")?))
            }
        })
        .collect()
}

fn load_ensemble(s: &Session, cell: &Cell, repeat: usize) -> Result<EnsembleModel, CliError> {
    let cfg = s.ensemble_cfg(cell, repeat);
    let mut trials = Vec::new();
    let mut failures = Vec::new();
    for e in load_extracted(s, cell, repeat)? {
        match e {
            Err(f) => failures.push(f),
            Ok(extracted) => {
                let dir = s.trial_dir(cell, repeat, extracted.trial);
                let model: TrialModel = read_json(&dir.join("model.json"), "train")?;
                let fill: Vec<Vec<f64>> = read_json(&dir.join("fill.json"), "train")?;
                let rulesets = extracted
                    .rules
                    .iter()
                    .map(|f| RuleSet::from_file(f, &s.loaded.schema))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(config_err)?;
                trials.push(TrialRecord {
                    extracted,
                    rulesets,
                    model,
                    fill,
                });
            }
        }
    }
    if trials.is_empty() {
        return Err(pipeline_err(format!("{}: every trial failed", s.repeat_dir(cell, repeat).display())));
    }
    Ok(EnsembleModel {
        config: cfg,
        classes: s.loaded.task.classes.clone(),
        trials,
        failures,
    })
}

fn cmd_extract(s: &Session, provider: &ClientProvider) -> Result<(), CliError> {
    let client = provider(&s.cfg.llm)?;
    let mut empty = Vec::new();
    for cell in s.cells() {
        let start = Instant::now();
        for repeat in 0..s.exp.repeats {
            let (shots, _) = s.data(&cell, repeat)?;
            let cfg = s.ensemble_cfg(&cell, repeat);
            let results = extract_all(client.as_ref(), &s.loaded.schema, &s.loaded.task, &shots, &cfg)
                .map_err(pipeline_err)?;
            let dir = s.repeat_dir(&cell, repeat);
            if dir.exists() {
                fs::remove_dir_all(&dir).map_err(|e| pipeline_err(format!("{}: {e}", dir.display())))?;
            }
            let mut ok = 0;
            for (t, r) in results.iter().enumerate() {
                let tdir = s.trial_dir(&cell, repeat, t);
                match r {
                    Ok(x) => {
                        ok += 1;
                        write_json(&tdir.join("rules.json"), x)?
                    }
                    Err(f) => write_json(&tdir.join("failure.json"), f)?,
                }
            }
            log::info!("{} r{repeat}: {ok}/{} trials extracted", cell.name(), results.len());
            if ok == 0 {
                empty.push(format!("{} r{repeat}", cell.name()));
            }
        }
        s.record_time(&cell, "extract", start)?;
    }
    if empty.is_empty() {
        Ok(())
    } else {
        Err(pipeline_err(format!("no successful trial in {}", empty.join(", "))))
    }
}

fn cmd_train(s: &Session) -> Result<(), CliError> {
    for cell in s.cells() {
        let start = Instant::now();
        for repeat in 0..s.exp.repeats {
            let (shots, _) = s.data(&cell, repeat)?;
            let cfg = s.ensemble_cfg(&cell, repeat);
            let extracted = load_extracted(s, &cell, repeat)?;
            let model = train_all(extracted, &s.loaded.schema, &s.loaded.task, &shots, &cfg).map_err(pipeline_err)?;
            for t in &model.trials {
                let dir = s.trial_dir(&cell, repeat, t.extracted.trial);
                write_json(&dir.join("model.json"), &t.model)?;
                write_json(&dir.join("fill.json"), &t.fill)?;
            }
        }
        s.record_time(&cell, "train", start)?;
    }
    Ok(())
}

fn predictions_csv(classes: &[String], probs: &[Vec<f64>], labels: &[usize]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["row".to_owned(), "label".to_owned()];
    header.extend(classes.iter().map(|c| format!("p_{c}")));
    header.push("predicted".into());
    w.write_record(&header).map_err(pipeline_err)?;
    for (i, (p, &y)) in probs.iter().zip(labels).enumerate() {
        let mut rec = vec![i.to_string(), classes[y].clone()];
        rec.extend(p.iter().map(|v| v.to_string()));
        rec.push(classes[argmax(p)].clone());
        w.write_record(&rec).map_err(pipeline_err)?;
    }
    String::from_utf8(w.into_inner().map_err(pipeline_err)?).map_err(pipeline_err)
}

fn read_predictions(path: &Path, classes: &[String]) -> Result<(Vec<Vec<f64>>, Vec<usize>), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|_| config_err(format!("{} is missing; run `predict` first", path.display())))?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut probs = Vec::new();
    let mut labels = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(config_err)?;
        let label = rec.get(1).unwrap_or_default();
        labels.push(
            classes
                .iter()
                .position(|c| c == label)
                .ok_or_else(|| config_err(format!("{}: unknown label `{label}`", path.display())))?,
        );
        let p = (0..classes.len())
            .map(|k| rec.get(2 + k).unwrap_or_default().parse::<f64>().map_err(config_err))
            .collect::<Result<Vec<_>, _>>()?;
        probs.push(p);
    }
    Ok((probs, labels))
}

fn cmd_predict(s: &Session) -> Result<(), CliError> {
    for cell in s.cells() {
        let start = Instant::now();
        for repeat in 0..s.exp.repeats {
            let (_, test) = s.data(&cell, repeat)?;
            let model = load_ensemble(s, &cell, repeat)?;
            let p = crate::ensemble::predict(&model, &s.loaded.schema, &test.rows).map_err(pipeline_err)?;
            let csv = predictions_csv(&model.classes, &p.probabilities, &test.labels)?;
            write_text(&s.repeat_dir(&cell, repeat).join("predictions.csv"), &csv)?;
        }
        s.record_time(&cell, "predict", start)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ManifestTrial<'a> {
    trial: usize,
    status: &'static str,
    seed: Option<u64>,
    example_order: Option<&'a [usize]>,
    feature_subset: Option<&'a [String]>,
    sample_subset: Option<&'a [usize]>,
    prompt_hash: Option<&'a str>,
    parse_stats: Option<&'a crate::ensemble::ParseStats>,
    failure_reason: Option<crate::ensemble::FailureReason>,
    attempts: &'a [crate::ensemble::AttemptRecord],
}

#[derive(Serialize)]
struct ManifestRepeat<'a> {
    repeat: usize,
    seed: u64,
    trials: usize,
    auc: f64,
    trial_records: Vec<ManifestTrial<'a>>,
}

#[derive(Serialize)]
struct ManifestCell<'a> {
    name: String,
    shots: usize,
    ablation: String,
    repeats: Vec<ManifestRepeat<'a>>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    featling_version: &'static str,
    template_version: u32,
    dataset: String,
    classes: &'a [String],
    config: &'a RunConfig,
    cells: Vec<ManifestCell<'a>>,
}

fn manifest_trial(e: &Result<ExtractedTrial, TrialFailure>) -> ManifestTrial<'_> {
    match e {
        Ok(x) => ManifestTrial {
            trial: x.trial,
            status: "ok",
            seed: Some(x.context.seed),
            example_order: Some(&x.context.example_order),
            feature_subset: Some(&x.context.feature_subset),
            sample_subset: Some(&x.context.sample_subset),
            prompt_hash: Some(&x.prompt_hash),
            parse_stats: Some(&x.parse_stats),
            failure_reason: None,
            attempts: &x.attempts,
        },
        Err(f) => ManifestTrial {
            trial: f.trial,
            status: "failed",
            seed: f.attempts.last().map(|a| a.seed),
            example_order: None,
            feature_subset: None,
            sample_subset: None,
            prompt_hash: f.attempts.last().map(|a| a.prompt_hash.as_str()),
            parse_stats: None,
            failure_reason: Some(f.reason),
            attempts: &f.attempts,
        },
    }
}

fn cmd_eval(s: &Session) -> Result<Report, CliError> {
    let name = s.exp.dataset_name();
    let cells = s.cells();
    let mut report = Report::default();
    let mut stored = Vec::new();
    for cell in &cells {
        let mut aucs = Vec::new();
        let mut counts = Vec::new();
        let mut per_repeat = Vec::new();
        for repeat in 0..s.exp.repeats {
            let (probs, labels) = read_predictions(
                &s.repeat_dir(cell, repeat).join("predictions.csv"),
                &s.loaded.task.classes,
            )?;
            let auc = auc_multiclass(&probs, &labels, s.loaded.task.num_classes()).map_err(pipeline_err)?;
            let extracted = load_extracted(s, cell, repeat)?;
            let (mut ok, mut failed, mut skipped, mut lines) = (0, 0, 0, 0);
            for e in &extracted {
                let attempts = match e {
                    Ok(x) => {
                        ok += 1;
                        &x.attempts
                    }
                    Err(f) => {
                        failed += 1;
                        &f.attempts
                    }
                };
                for a in attempts {
                    skipped += a.skipped;
                    lines += a.rule_lines;
                }
            }
            aucs.push(auc);
            counts.push((ok, failed, skipped, lines));
            per_repeat.push((repeat, auc, extracted));
        }
        report.rows.push(ReportRow::new(
            &name,
            cell.shots,
            &cell.ablations.label(),
            aucs,
            &counts,
            s.wall_seconds(cell),
        ));
        stored.push(per_repeat);
    }

    let manifest = Manifest {
        featling_version: env!("CARGO_PKG_VERSION"),
        template_version: TEMPLATE_VERSION,
        dataset: name,
        classes: &s.loaded.task.classes,
        config: &s.written,
        cells: cells
            .iter()
            .zip(&stored)
            .map(|(cell, repeats)| ManifestCell {
                name: cell.name(),
                shots: cell.shots,
                ablation: cell.ablations.label(),
                repeats: repeats
                    .iter()
                    .map(|(repeat, auc, extracted)| ManifestRepeat {
                        repeat: *repeat,
                        seed: s.exp.repeat_seed(*repeat),
                        trials: extracted.len(),
                        auc: *auc,
                        trial_records: extracted.iter().map(manifest_trial).collect(),
                    })
                    .collect(),
            })
            .collect(),
    };
    write_json(&s.out.join("manifest.json"), &manifest)?;
    write_text(&s.out.join("report.csv"), &report.to_csv().map_err(pipeline_err)?)?;
    write_text(&s.out.join("report.md"), &report.to_markdown())?;
    Ok(report)
}

fn pick_cell(s: &Session, name: Option<&str>) -> Result<Cell, CliError> {
    let cells = s.cells();
    match name {
        None => cells.into_iter().next().ok_or_else(|| config_err("no cells configured")),
        Some(n) => cells
            .into_iter()
            .find(|c| c.name() == n)
            .ok_or_else(|| config_err(format!("no cell named `{n}`"))),
    }
}

/// The text `inspect` prints.
#[allow(clippy::too_many_arguments)]
pub fn inspect_text(
    s_overrides: &Overrides,
    subject: Subject,
    trial: usize,
    repeat: usize,
    cell: Option<&str>,
    threshold: f64,
    shots_file: Option<&Path>,
    unshuffled: bool,
) -> Result<String, CliError> {
    let s = Session::open(s_overrides)?;
    let cell = pick_cell(&s, cell)?;
    match subject {
        Subject::Prompt => {
            let cfg = s.ensemble_cfg(&cell, repeat);
            let shots = match shots_file {
                Some(path) => {
                    let DatasetRef::Files { metadata, .. } = &s.exp.dataset else {
                        return Err(config_err("--shots-file needs a dataset with a metadata file"));
                    };
                    load_dataset(path, metadata).map_err(config_err)?.data
                }
                None => s.data(&cell, repeat)?.0,
            };
            let mut ctx = plan_trial(trial, 0, &s.loaded.schema, &s.loaded.task, &shots, &cfg).map_err(config_err)?;
            if unshuffled {
                ctx.example_order.sort_unstable();
            }
            build_rule_prompt(&s.loaded.task, &s.loaded.schema, &shots, &ctx, &cfg.prompt_config()).map_err(config_err)
        }
        Subject::Rules => {
            let x: ExtractedTrial = read_json(&s.trial_dir(&cell, repeat, trial).join("rules.json"), "extract")?;
            let mut out = String::new();
            for rs in &x.rules {
                out.push_str(&format!("class {} ({} rules, {} skipped):\n", rs.class, rs.rules.len(), rs.skipped));
                for r in &rs.rules {
                    out.push_str(&format!("- {r}\n"));
                }
            }
            Ok(out)
        }
        Subject::Weights => {
            let dir = s.trial_dir(&cell, repeat, trial);
            let x: ExtractedTrial = read_json(&dir.join("rules.json"), "extract")?;
            let model: TrialModel = read_json(&dir.join("model.json"), "train")?;
            let mut out = String::new();
            for (rs, w) in x.rules.iter().zip(&model.weights) {
                out.push_str(&format!("class {}:\n", rs.class));
                for (j, weight) in ranked_weights(w, threshold) {
                    out.push_str(&format!("  {weight:.4}  [{j}] {}\n", rs.rules[j]));
                }
            }
            Ok(out)
        }
    }
}

/// Rule indices with weight at least `threshold`, heaviest first, ties by
/// index.
pub fn ranked_weights(weights: &[f64], threshold: f64) -> Vec<(usize, f64)> {
    let mut ranked: Vec<(usize, f64)> = weights
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, w)| w >= threshold)
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked
}

/// Runs one command; returns the process exit code.
pub fn execute(cli: &Cli, provider: &ClientProvider) -> i32 {
    match dispatch(cli, provider) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("featling: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli, provider: &ClientProvider) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(o) => {
            let s = Session::open(o)?;
            cmd_extract(&s, provider)?;
            cmd_train(&s)?;
            cmd_predict(&s)?;
            let report = cmd_eval(&s)?;
            print!("{}", report.to_markdown());
            Ok(())
        }
        Command::Extract(o) => cmd_extract(&Session::open(o)?, provider),
        Command::Train(o) => cmd_train(&Session::open(o)?),
        Command::Predict(o) => cmd_predict(&Session::open(o)?),
        Command::Eval(o) => {
            let report = cmd_eval(&Session::open(o)?)?;
            print!("{}", report.to_markdown());
            Ok(())
        }
        Command::Inspect {
            subject,
            overrides,
            trial,
            repeat,
            cell,
            threshold,
            shots_file,
            unshuffled,
        } => {
            let text = inspect_text(
                overrides,
                *subject,
                *trial,
                *repeat,
                cell.as_deref(),
                *threshold,
                shots_file.as_deref(),
                *unshuffled,
            )?;
            print!("{text}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_rank_descending_then_index() {
        let w = [0.3, 0.05, 0.7, 0.3, -1.0, 0.1];
        assert_eq!(ranked_weights(&w, 0.1), vec![(2, 0.7), (0, 0.3), (3, 0.3), (5, 0.1)]);
    }

    #[test]
    fn defaults_follow_the_published_setup() {
        let cfg: RunConfig = serde_json::from_str(r#"{"dataset": {"synthetic": "solution_mix"}}"#).unwrap();
        assert_eq!(cfg.llm.temperature, 0.5);
        assert_eq!(cfg.llm.top_p, 1.0);
        assert_eq!(cfg.ensemble.trials, 20);
        assert_eq!(cfg.ensemble.rules, 10);
        assert_eq!(cfg.train.learning_rate, 0.01);
        assert_eq!(cfg.train.epochs, 200);
        assert_eq!(cfg.eval.repeats, 3);
    }

    #[test]
    fn client_kind_aliases() {
        assert_eq!(parse_client_kind("http"), Some(ClientKind::HttpOpenaiCompatible));
        assert_eq!(parse_client_kind("replay"), Some(ClientKind::Replay));
        assert_eq!(parse_client_kind("nope"), None);
    }
}
