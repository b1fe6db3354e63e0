//! Trial orchestration: plan, prompt, extract rules, train, and average the
//! trials' class probabilities.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::llm::{CompletionRequest, LlmClient};
use crate::model::{train_trial, ModelError, TrainConfig, TrialModel};
use crate::prompt::{build_rule_prompt, estimate_tokens, PromptConfig, PromptError, TrialContext};
use crate::rng::{derive_seed, rng_for, TAG_TRIAL};
use crate::ruledsl::{
    build_feature_matrix, extract_class_blocks, impute_missing, parse_ruleset, FeatureMatrix,
    MissingStrategy, ParseError, ParseErrorKind, RuleSet, RuleSetFile,
};
use crate::schema::{k_shot_quotas, FeatureSchema, LabeledSet, Row, TaskSpec};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablations {
    pub no_tuning: bool,
    pub no_ensemble: bool,
    pub no_description: bool,
    pub no_reasoning: bool,
}

impl Ablations {
    pub fn label(&self) -> String {
        let names: Vec<&str> = [
            (self.no_tuning, "no_tuning"),
            (self.no_ensemble, "no_ensemble"),
            (self.no_description, "no_description"),
            (self.no_reasoning, "no_reasoning"),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .map(|(_, n)| *n)
        .collect();
        if names.is_empty() {
            "none".into()
        } else {
            names.join("+")
        }
    }

    /// Accepts `no-tuning`, `no_tuning`, `none`, and `+`/`,` separated sets.
    pub fn parse(text: &str) -> Option<Self> {
        let mut out = Self::default();
        for part in text.split(['+', ',']).map(|p| p.trim().replace('-', "_")) {
            match part.as_str() {
                "none" | "" => {}
                "no_tuning" => out.no_tuning = true,
                "no_ensemble" => out.no_ensemble = true,
                "no_description" => out.no_description = true,
                "no_reasoning" => out.no_reasoning = true,
                _ => return None,
            }
        }
        Some(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleConfig {
    pub num_trials: usize,
    pub num_rules: usize,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub model_name: String,
    pub prompt_budget_tokens: usize,
    pub max_bagged_examples: usize,
    pub retry_per_trial: usize,
    pub seed: u64,
    pub workers: usize,
    pub missing: MissingStrategy,
    pub train: TrainConfig,
    pub ablations: Ablations,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            num_trials: 20,
            num_rules: 10,
            temperature: 0.5,
            top_p: 1.0,
            max_tokens: 2000,
            model_name: "gpt-3.5-turbo-0613".into(),
            prompt_budget_tokens: 3000,
            max_bagged_examples: 16,
            retry_per_trial: 1,
            seed: 0,
            workers: 4,
            missing: MissingStrategy::Zero,
            train: TrainConfig::default(),
            ablations: Ablations::default(),
        }
    }
}

impl EnsembleConfig {
    pub fn effective_trials(&self) -> usize {
        if self.ablations.no_ensemble {
            1
        } else {
            self.num_trials
        }
    }

    pub fn prompt_config(&self) -> PromptConfig {
        PromptConfig {
            num_rules_per_class: self.num_rules,
            include_descriptions: !self.ablations.no_description,
            include_reasoning_step1: !self.ablations.no_reasoning,
        }
    }

    pub fn trial_seed(&self, trial: usize, attempt: usize) -> u64 {
        derive_seed(self.seed, &[TAG_TRIAL, trial as u64, attempt as u64])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    LlmError,
    NoRulesForClass,
    AllRulesUnparseable,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub reason: FailureReason,
    pub message: String,
    pub attempts: Vec<AttemptRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub seed: u64,
    pub prompt_hash: String,
    pub prompt_tokens_estimate: usize,
    pub rule_lines: usize,
    pub skipped: usize,
    pub failure: Option<FailureReason>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseStats {
    pub lines: usize,
    pub parsed: usize,
    pub skipped: usize,
    pub per_class: Vec<usize>,
    pub errors_by_kind: Vec<(ParseErrorKind, usize)>,
}

/// The output of the extraction stage for one trial: the plan that produced
/// the prompt and the rules recovered from the answer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractedTrial {
    pub trial: usize,
    pub context: TrialContext,
    pub prompt_hash: String,
    pub rules: Vec<RuleSetFile>,
    pub parse_stats: ParseStats,
    pub attempts: Vec<AttemptRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub extracted: ExtractedTrial,
    #[serde(skip)]
    pub rulesets: Vec<RuleSet>,
    pub model: TrialModel,
    /// Per-class fill values for missing-affected cells; empty unless imputing.
    pub fill: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleModel {
    pub config: EnsembleConfig,
    pub classes: Vec<String>,
    pub trials: Vec<TrialRecord>,
    pub failures: Vec<TrialFailure>,
}

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("every trial failed ({0} failures)")]
    NoSuccessfulTrials(usize),
    #[error("prompt: {0}")]
    Prompt(#[from] PromptError),
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("cached rule does not parse: {0}")]
    Cache(#[from] ParseError),
    #[error("trial {trial} covers {got} classes, expected {expected}")]
    ClassMismatch {
        trial: usize,
        expected: usize,
        got: usize,
    },
    #[error("worker pool: {0}")]
    Pool(String),
}

pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// Up to `cap` indices with per-class quotas as balanced as availability
/// allows, ascending.
fn stratified_subset(shots: &LabeledSet, cap: usize, rng: &mut impl rand::Rng) -> Vec<usize> {
    let by_class = shots.indices_by_class();
    let mut quotas = k_shot_quotas(cap, by_class.len());
    // move quota from classes that lack members to those that have spare
    loop {
        let excess: usize = quotas
            .iter()
            .zip(&by_class)
            .map(|(&q, m)| q.saturating_sub(m.len()))
            .sum();
        if excess == 0 {
            break;
        }
        for (q, m) in quotas.iter_mut().zip(&by_class) {
            *q = (*q).min(m.len());
        }
        let mut left = excess;
        for (q, m) in quotas.iter_mut().zip(&by_class) {
            if left == 0 {
                break;
            }
            if *q < m.len() {
                *q += 1;
                left -= 1;
            }
        }
        if left == excess {
            break;
        }
    }
    let mut picked: Vec<usize> = by_class
        .iter()
        .zip(&quotas)
        .flat_map(|(m, &q)| m.choose_multiple(rng, q).copied().collect::<Vec<_>>())
        .collect();
    picked.sort_unstable();
    picked
}

/// Randomizes the demonstration order and, when the prompt would exceed the
/// budget, bags examples and features.
pub fn plan_trial(
    trial: usize,
    attempt: usize,
    schema: &FeatureSchema,
    task: &TaskSpec,
    shots: &LabeledSet,
    cfg: &EnsembleConfig,
) -> Result<TrialContext, PromptError> {
    let seed = cfg.trial_seed(trial, attempt);
    let mut rng = rng_for(seed, &[]);
    let mut ctx = TrialContext::full(schema, shots.len());
    ctx.seed = seed;
    ctx.example_order.shuffle(&mut rng);
    let prompt_cfg = cfg.prompt_config();
    let fits = |ctx: &TrialContext| -> Result<bool, PromptError> {
        let p = build_rule_prompt(task, schema, shots, ctx, &prompt_cfg)?;
        Ok(estimate_tokens(&p) <= cfg.prompt_budget_tokens)
    };
    if fits(&ctx)? {
        return Ok(ctx);
    }
    if shots.len() > cfg.max_bagged_examples {
        ctx.sample_subset = stratified_subset(shots, cfg.max_bagged_examples, &mut rng);
    }
    let mut order: Vec<usize> = (0..schema.len()).collect();
    order.shuffle(&mut rng);
    let floor = schema.len().min(3);
    let full = schema.len();
    let names: Vec<&str> = schema.names().collect();
    let subset_of = |m: usize| {
        let mut keep = order[..m].to_vec();
        keep.sort_unstable();
        keep.iter().map(|&p| names[p].to_owned()).collect::<Vec<_>>()
    };
    if full > floor && !fits(&ctx)? {
        let mut m = full - 1;
        loop {
            ctx.feature_subset = subset_of(m);
            if m == floor || fits(&ctx)? {
                break;
            }
            m -= 1;
        }
    }
    Ok(ctx)
}

fn failure_for(blocks: &[Vec<String>], rulesets: &[RuleSet]) -> Option<(FailureReason, String)> {
    for (lines, rs) in blocks.iter().zip(rulesets) {
        if rs.rules.is_empty() {
            return Some(if lines.is_empty() {
                (
                    FailureReason::NoRulesForClass,
                    format!("no rules for class `{}`", rs.class_label),
                )
            } else {
                (
                    FailureReason::AllRulesUnparseable,
                    format!("none of the {} rules for class `{}` parse", lines.len(), rs.class_label),
                )
            });
        }
    }
    None
}

/// Queries the model for one trial's rules, retrying with a fresh plan when
/// the answer is unusable.
pub fn extract_trial(
    trial: usize,
    client: &dyn LlmClient,
    schema: &FeatureSchema,
    task: &TaskSpec,
    shots: &LabeledSet,
    cfg: &EnsembleConfig,
) -> Result<Result<ExtractedTrial, TrialFailure>, EnsembleError> {
    let prompt_cfg = cfg.prompt_config();
    let mut attempts = Vec::new();
    let mut last = (FailureReason::LlmError, String::new());
    for attempt in 0..=cfg.retry_per_trial {
        let ctx = plan_trial(trial, attempt, schema, task, shots, cfg)?;
        let prompt = build_rule_prompt(task, schema, shots, &ctx, &prompt_cfg)?;
        let hash = prompt_hash(&prompt);
        let mut record = AttemptRecord {
            seed: ctx.seed,
            prompt_hash: hash.clone(),
            prompt_tokens_estimate: estimate_tokens(&prompt),
            rule_lines: 0,
            skipped: 0,
            failure: None,
        };
        let request = CompletionRequest {
            prompt,
            temperature: cfg.temperature,
            top_p: cfg.top_p,
            max_tokens: cfg.max_tokens,
            model_name: cfg.model_name.clone(),
            seed: ctx.seed,
        };
        let response = match client.complete(&request) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("trial {trial} attempt {attempt}: {e}");
                record.failure = Some(FailureReason::LlmError);
                attempts.push(record);
                last = (FailureReason::LlmError, e.to_string());
                continue;
            }
        };
        let blocks = extract_class_blocks(&response.text, &task.classes);
        let mut rulesets = Vec::new();
        let mut stats = ParseStats::default();
        let mut kinds: Vec<(ParseErrorKind, usize)> = Vec::new();
        for (class, lines) in task.classes.iter().zip(&blocks) {
            let (rs, errors) = parse_ruleset(class, lines, schema);
            stats.lines += lines.len();
            stats.parsed += rs.rules.len();
            stats.skipped += rs.skipped;
            stats.per_class.push(rs.rules.len());
            for e in errors {
                match kinds.iter_mut().find(|(k, _)| *k == e.kind) {
                    Some((_, n)) => *n += 1,
                    None => kinds.push((e.kind, 1)),
                }
            }
            rulesets.push(rs);
        }
        stats.errors_by_kind = kinds;
        record.rule_lines = stats.lines;
        record.skipped = stats.skipped;
        if let Some((reason, message)) = failure_for(&blocks, &rulesets) {
            log::warn!("trial {trial} attempt {attempt}: {message}");
            record.failure = Some(reason);
            attempts.push(record);
            last = (reason, message);
            continue;
        }
        attempts.push(record);
        return Ok(Ok(ExtractedTrial {
            trial,
            context: ctx,
            prompt_hash: hash,
            rules: rulesets.iter().map(RuleSet::to_file).collect(),
            parse_stats: stats,
            attempts,
        }));
    }
    Ok(Err(TrialFailure {
        trial,
        reason: last.0,
        message: last.1,
        attempts,
    }))
}

fn class_matrices(
    rulesets: &[RuleSet],
    rows: &[Row],
    schema: &FeatureSchema,
    strategy: MissingStrategy,
    fill: &[Vec<f64>],
) -> Vec<FeatureMatrix> {
    rulesets
        .iter()
        .enumerate()
        .map(|(k, rs)| {
            let m = build_feature_matrix(rs, rows, schema, strategy, None);
            if fill.is_empty() {
                m
            } else {
                m.with_fill(&fill[k])
            }
        })
        .collect()
}

/// Fits the trial model on the k-shot rows from cached rules.
pub fn train_extracted(
    extracted: ExtractedTrial,
    schema: &FeatureSchema,
    task: &TaskSpec,
    shots: &LabeledSet,
    cfg: &EnsembleConfig,
) -> Result<TrialRecord, EnsembleError> {
    let rulesets = extracted
        .rules
        .iter()
        .map(|f| RuleSet::from_file(f, schema))
        .collect::<Result<Vec<_>, _>>()?;
    if rulesets.len() != task.num_classes() {
        return Err(EnsembleError::ClassMismatch {
            trial: extracted.trial,
            expected: task.num_classes(),
            got: rulesets.len(),
        });
    }
    let raw = class_matrices(&rulesets, &shots.rows, schema, cfg.missing, &[]);
    let fill: Vec<Vec<f64>> = if cfg.missing == MissingStrategy::Impute {
        raw.iter().map(impute_missing).collect()
    } else {
        Vec::new()
    };
    let matrices: Vec<FeatureMatrix> = if fill.is_empty() {
        raw
    } else {
        raw.into_iter().zip(&fill).map(|(m, f)| m.with_fill(f)).collect()
    };
    let train_cfg = TrainConfig {
        seed: extracted.context.seed,
        ..cfg.train.clone()
    };
    let model = if cfg.ablations.no_tuning {
        let counts: Vec<usize> = rulesets.iter().map(|r| r.rules.len()).collect();
        TrialModel::all_ones(task.classes.clone(), &counts, train_cfg)
    } else {
        train_trial(&task.classes, &matrices, &shots.labels, &train_cfg)?
    };
    Ok(TrialRecord {
        extracted,
        rulesets,
        model,
        fill,
    })
}

/// One full trial: extraction followed by training.
pub fn run_trial(
    trial: usize,
    client: &dyn LlmClient,
    schema: &FeatureSchema,
    task: &TaskSpec,
    shots: &LabeledSet,
    cfg: &EnsembleConfig,
) -> Result<Result<TrialRecord, TrialFailure>, EnsembleError> {
    match extract_trial(trial, client, schema, task, shots, cfg)? {
        Ok(ex) => Ok(Ok(train_extracted(ex, schema, task, shots, cfg)?)),
        Err(f) => Ok(Err(f)),
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, EnsembleError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| EnsembleError::Pool(e.to_string()))
}

/// Runs the extraction stage for every trial on the worker pool. Results come
/// back ordered by trial index.
pub fn extract_all(
    client: &dyn LlmClient,
    schema: &FeatureSchema,
    task: &TaskSpec,
    shots: &LabeledSet,
    cfg: &EnsembleConfig,
) -> Result<Vec<Result<ExtractedTrial, TrialFailure>>, EnsembleError> {
    let trials = cfg.effective_trials();
    pool(cfg.workers)?.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|t| extract_trial(t, client, schema, task, shots, cfg))
            .collect()
    })
}

/// Trains every extracted trial and assembles the ensemble.
pub fn train_all(
    extracted: Vec<Result<ExtractedTrial, TrialFailure>>,
    schema: &FeatureSchema,
    task: &TaskSpec,
    shots: &LabeledSet,
    cfg: &EnsembleConfig,
) -> Result<EnsembleModel, EnsembleError> {
    let mut ok = Vec::new();
    let mut failures = Vec::new();
    for e in extracted {
        match e {
            Ok(x) => ok.push(x),
            Err(f) => failures.push(f),
        }
    }
    let trials: Vec<TrialRecord> = pool(cfg.workers)?.install(|| {
        ok.into_par_iter()
            .map(|x| train_extracted(x, schema, task, shots, cfg))
            .collect::<Result<_, _>>()
    })?;
    if trials.is_empty() {
        return Err(EnsembleError::NoSuccessfulTrials(failures.len()));
    }
    Ok(EnsembleModel {
        config: cfg.clone(),
        classes: task.classes.clone(),
        trials,
        failures,
    })
}

pub fn fit_ensemble(
    client: &dyn LlmClient,
    schema: &FeatureSchema,
    task: &TaskSpec,
    shots: &LabeledSet,
    cfg: &EnsembleConfig,
) -> Result<EnsembleModel, EnsembleError> {
    let extracted = extract_all(client, schema, task, shots, cfg)?;
    train_all(extracted, schema, task, shots, cfg)
}

/// Per-sample mean of the trials' probability vectors.
///
/// Each mean is taken as the smallest value plus the mean of sorted offsets
/// from it, so trial order never matters and identical trials reproduce their
/// shared value exactly.
pub fn aggregate(per_trial: &[Vec<Vec<f64>>]) -> Result<Vec<Vec<f64>>, EnsembleError> {
    let first = per_trial.first().ok_or(EnsembleError::NoSuccessfulTrials(0))?;
    let t = per_trial.len() as f64;
    Ok((0..first.len())
        .map(|i| {
            (0..first[i].len())
                .map(|k| {
                    let mut vals: Vec<f64> = per_trial.iter().map(|p| p[i][k]).collect();
                    vals.sort_by(f64::total_cmp);
                    let base = vals[0];
                    let offsets: f64 = vals.iter().map(|v| v - base).sum();
                    base + offsets / t
                })
                .collect()
        })
        .collect())
}

/// Index of the largest value; the first one on ties.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = k;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Prediction {
    pub probabilities: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl TrialRecord {
    pub fn predict(&self, schema: &FeatureSchema, rows: &[Row], strategy: MissingStrategy) -> Result<Vec<Vec<f64>>, ModelError> {
        let matrices = class_matrices(&self.rulesets, rows, schema, strategy, &self.fill);
        self.model.predict(&matrices)
    }

    pub fn feature_matrices(&self, schema: &FeatureSchema, rows: &[Row], strategy: MissingStrategy) -> Vec<FeatureMatrix> {
        class_matrices(&self.rulesets, rows, schema, strategy, &self.fill)
    }
}

/// Ensemble probabilities and argmax labels. Uses only the stored rules and
/// weights.
pub fn predict(model: &EnsembleModel, schema: &FeatureSchema, rows: &[Row]) -> Result<Prediction, EnsembleError> {
    let per_trial = model
        .trials
        .iter()
        .map(|t| t.predict(schema, rows, model.config.missing))
        .collect::<Result<Vec<_>, _>>()?;
    let probabilities = aggregate(&per_trial)?;
    let labels = probabilities.iter().map(|p| argmax(p)).collect();
    Ok(Prediction {
        probabilities,
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::ScriptedClient;
    use crate::schema::{FeatureDesc, Value};

    fn toy() -> (FeatureSchema, TaskSpec, LabeledSet) {
        let schema = FeatureSchema::new(vec![
            FeatureDesc::numerical("x", Some("a number")),
            FeatureDesc::categorical("c", None, &["red", "blue"]),
        ])
        .unwrap();
        let task = TaskSpec::new("Is it big? Yes or no?", &["no", "yes"]).unwrap();
        let rows = vec![
            Row::new(vec![Value::num(1.0), Value::cat("red")]),
            Row::new(vec![Value::num(2.0), Value::cat("blue")]),
            Row::new(vec![Value::num(8.0), Value::cat("red")]),
            Row::new(vec![Value::num(9.0), Value::cat("blue")]),
        ];
        let shots = LabeledSet::new(rows, vec![0, 0, 1, 1], 2).unwrap();
        (schema, task, shots)
    }

    const GOOD: &str = "conditions for class \"no\":\n- x < 5\n- c is in [red]\nconditions for class \"yes\":\n- x >= 5\n- c is in [blue]\n";

    fn small_cfg() -> EnsembleConfig {
        EnsembleConfig {
            num_trials: 3,
            train: TrainConfig {
                max_epochs: 20,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn small_prompt_keeps_everything() {
        let (schema, task, shots) = toy();
        let ctx = plan_trial(0, 0, &schema, &task, &shots, &small_cfg()).unwrap();
        assert_eq!(ctx.feature_subset, vec!["x", "c"]);
        assert_eq!(ctx.sample_subset, vec![0, 1, 2, 3]);
        let mut sorted = ctx.example_order.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2, 3]);
    }

    #[test]
    fn tight_budget_bags_features_and_examples() {
        let features: Vec<FeatureDesc> = (0..40)
            .map(|i| FeatureDesc::numerical(format!("f{i}"), Some("some measured quantity")))
            .collect();
        let schema = FeatureSchema::new(features).unwrap();
        let task = TaskSpec::new("Q? Yes or no?", &["no", "yes"]).unwrap();
        let rows: Vec<Row> = (0..32)
            .map(|i| Row::new((0..40).map(|j| Value::num((i * j) as f64)).collect()))
            .collect();
        let labels = (0..32).map(|i| i % 2).collect();
        let shots = LabeledSet::new(rows, labels, 2).unwrap();
        let cfg = EnsembleConfig {
            prompt_budget_tokens: 1500,
            ..Default::default()
        };
        let ctx = plan_trial(0, 0, &schema, &task, &shots, &cfg).unwrap();
        assert!(ctx.feature_subset.len() < 40 && ctx.feature_subset.len() >= 3);
        assert_eq!(ctx.sample_subset.len(), 16);
        let picked = shots.select(&ctx.sample_subset);
        assert_eq!(picked.class_counts(), vec![8, 8]);
        let p = build_rule_prompt(&task, &schema, &shots, &ctx, &cfg.prompt_config()).unwrap();
        assert!(estimate_tokens(&p) <= 1500);
    }

    #[test]
    fn good_rules_give_a_trial() {
        let (schema, task, shots) = toy();
        let client = ScriptedClient::constant(GOOD);
        let rec = run_trial(0, &client, &schema, &task, &shots, &small_cfg()).unwrap().unwrap();
        assert_eq!(rec.extracted.parse_stats.parsed, 4);
        assert_eq!(rec.extracted.parse_stats.skipped, 0);
        assert_eq!(rec.model.num_rules(), vec![2, 2]);
        assert_eq!(client.calls(), 1);
    }

    #[test]
    fn prose_fails_after_one_retry() {
        let (schema, task, shots) = toy();
        let client = ScriptedClient::constant("I cannot help with that.");
        let f = run_trial(0, &client, &schema, &task, &shots, &small_cfg()).unwrap().unwrap_err();
        assert_eq!(f.reason, FailureReason::NoRulesForClass);
        assert_eq!(f.attempts.len(), 2);
        assert_ne!(f.attempts[0].seed, f.attempts[1].seed);
        assert_eq!(client.calls(), 2);
    }

    #[test]
    fn unparseable_class_is_reported() {
        let (schema, task, shots) = toy();
        let client = ScriptedClient::constant(
            "conditions for class \"no\":\n- weight > 3\nconditions for class \"yes\":\n- x > 1\n",
        );
        let f = run_trial(0, &client, &schema, &task, &shots, &small_cfg()).unwrap().unwrap_err();
        assert_eq!(f.reason, FailureReason::AllRulesUnparseable);
    }

    #[test]
    fn bad_lines_are_skipped() {
        let (schema, task, shots) = toy();
        let client = ScriptedClient::constant(format!("{GOOD}- weight > 3\n- x >>> 2\n"));
        let rec = run_trial(0, &client, &schema, &task, &shots, &small_cfg()).unwrap().unwrap();
        assert_eq!(rec.extracted.parse_stats.skipped, 2);
        assert_eq!(rec.extracted.parse_stats.per_class, vec![2, 2]);
    }

    #[test]
    fn aggregate_means() {
        let a = vec![vec![1.0, 0.0]];
        let b = vec![vec![0.0, 1.0]];
        assert_eq!(aggregate(&[a.clone(), b]).unwrap(), vec![vec![0.5, 0.5]]);
        assert_eq!(aggregate(&[a.clone()]).unwrap(), a);
        let p = vec![vec![0.1, 0.2, 0.7]];
        assert_eq!(aggregate(&[p.clone(), p.clone(), p.clone()]).unwrap(), p);
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn ensemble_is_deterministic_and_orders_trials() {
        let (schema, task, shots) = toy();
        let client = ScriptedClient::new(|_, seed| {
            if seed % 2 == 0 {
                GOOD.to_owned()
            } else {
                format!("{GOOD}- x > 4\n")
            }
        });
        let a = fit_ensemble(&client, &schema, &task, &shots, &small_cfg()).unwrap();
        let b = fit_ensemble(&client, &schema, &task, &shots, &small_cfg()).unwrap();
        assert_eq!(a, b);
        let idx: Vec<usize> = a.trials.iter().map(|t| t.extracted.trial).collect();
        assert_eq!(idx, vec![0, 1, 2]);
        let p = predict(&a, &schema, &shots.rows).unwrap();
        assert_eq!(p.labels, vec![0, 0, 1, 1]);
    }

    #[test]
    fn ablation_labels_round_trip() {
        let a = Ablations::parse("no-tuning+no_reasoning").unwrap();
        assert!(a.no_tuning && a.no_reasoning && !a.no_ensemble);
        assert_eq!(a.label(), "no_tuning+no_reasoning");
        assert_eq!(Ablations::parse("none").unwrap(), Ablations::default());
        assert!(Ablations::parse("no-magic").is_none());
    }
}
