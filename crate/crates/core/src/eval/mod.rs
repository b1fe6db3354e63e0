//! Metrics, the repeated-split experiment protocol, the rule-diversity
//! diagnostic and synthetic datasets.

mod diversity;
mod metrics;
mod oracle;
mod synthetic;

pub use diversity::{matched_correlation, max_weight_assignment, pearson, rule_diversity, DiversityError};
pub use metrics::{auc_binary, auc_multiclass, mean_std, MetricError};
pub use oracle::{solution_mix_oracle, solution_mix_oracle_client};
pub use synthetic::{
    generate_synthetic, mixture_concentration, mixture_rule, sequence_counts, SyntheticKind,
    SEQUENCE_CLASSES, SEQUENCE_TYPE_QUESTION, SOLUTION_MIX_QUESTION,
};

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::{fit_ensemble, predict, Ablations, EnsembleConfig, EnsembleError, EnsembleModel, Prediction};
use crate::llm::LlmClient;
use crate::rng::{derive_seed, TAG_REPEAT};
use crate::schema::{
    load_dataset_with, sample_k_shot, stratified_split, FeatureSchema, IngestMode, LabeledSet,
    SchemaError, TaskSpec,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("report: {0}")]
    Report(String),
}

/// Where the rows come from: a CSV plus metadata, or a generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetRef {
    Synthetic {
        synthetic: SyntheticKind,
        #[serde(default = "default_rows")]
        rows: usize,
        #[serde(default)]
        seed: u64,
    },
    Files {
        data: PathBuf,
        metadata: PathBuf,
        #[serde(default)]
        ingest: IngestMode,
    },
}

fn default_rows() -> usize {
    300
}

impl DatasetRef {
    pub fn default_name(&self) -> String {
        match self {
            DatasetRef::Synthetic { synthetic, .. } => synthetic.name().to_owned(),
            DatasetRef::Files { data, .. } => data
                .file_stem()
                .map_or_else(|| "dataset".to_owned(), |s| s.to_string_lossy().into_owned()),
        }
    }

    pub fn load(&self) -> Result<LoadedData, SchemaError> {
        match self {
            DatasetRef::Synthetic {
                synthetic,
                rows,
                seed,
            } => {
                let (schema, task, data) = generate_synthetic(*synthetic, *rows, *seed)?;
                Ok(LoadedData { schema, task, data })
            }
            DatasetRef::Files {
                data,
                metadata,
                ingest,
            } => {
                let d = load_dataset_with(data, metadata, *ingest)?;
                let w = &d.warnings;
                if w.unknown_categories > 0 || !w.dropped_columns.is_empty() || w.dropped_rows > 0 {
                    log::warn!(
                        "{}: {} unknown categories, {} dropped columns, {} dropped rows",
                        data.display(),
                        w.unknown_categories,
                        w.dropped_columns.len(),
                        w.dropped_rows
                    );
                }
                Ok(LoadedData {
                    schema: d.schema,
                    task: d.task,
                    data: d.data,
                })
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct LoadedData {
    pub schema: FeatureSchema,
    pub task: TaskSpec,
    pub data: LabeledSet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetRef,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_shots")]
    pub shots: Vec<usize>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_ablations")]
    pub ablations: Vec<Ablations>,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    /// Fill the report's wall-clock column (makes reports run-dependent).
    #[serde(default)]
    pub timing: bool,
}

fn default_shots() -> Vec<usize> {
    vec![4]
}
fn default_repeats() -> usize {
    3
}
fn default_test_fraction() -> f64 {
    0.2
}
fn default_ablations() -> Vec<Ablations> {
    vec![Ablations::default()]
}

impl ExperimentConfig {
    pub fn new(dataset: DatasetRef) -> Self {
        Self {
            dataset,
            name: None,
            shots: default_shots(),
            repeats: default_repeats(),
            seed: 0,
            test_fraction: default_test_fraction(),
            ablations: default_ablations(),
            ensemble: EnsembleConfig::default(),
            timing: false,
        }
    }

    pub fn dataset_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.dataset.default_name())
    }

    pub fn repeat_seed(&self, repeat: usize) -> u64 {
        derive_seed(self.seed, &[TAG_REPEAT, repeat as u64])
    }

    /// Ensemble settings for one cell of the grid.
    pub fn cell_config(&self, ablations: Ablations, repeat: usize) -> EnsembleConfig {
        EnsembleConfig {
            seed: self.repeat_seed(repeat),
            ablations,
            ..self.ensemble.clone()
        }
    }
}

/// The k-shot training rows and held-out test rows of one repeat.
#[derive(Clone, Debug)]
pub struct RepeatData {
    pub shots: LabeledSet,
    pub test: LabeledSet,
}

/// Splits off the test rows and draws the k-shot sample. Identical for every
/// ablation so that variants are compared on the same rows.
pub fn prepare_repeat(
    cfg: &ExperimentConfig,
    loaded: &LoadedData,
    k: usize,
    repeat: usize,
) -> Result<RepeatData, SchemaError> {
    let seed = cfg.repeat_seed(repeat);
    let (pool, test) = stratified_split(&loaded.data, cfg.test_fraction, seed)?;
    let shots = sample_k_shot(&pool, k, derive_seed(seed, &[k as u64]))?;
    Ok(RepeatData { shots, test })
}

pub fn test_auc(prediction: &Prediction, test: &LabeledSet) -> Result<f64, MetricError> {
    auc_multiclass(&prediction.probabilities, &test.labels, test.num_classes)
}

/// Totals over every attempt of every trial: `(trials ok, trials failed,
/// skipped lines, rule lines)`.
pub fn trial_counts(model: &EnsembleModel) -> (usize, usize, usize, usize) {
    let attempts = model
        .trials
        .iter()
        .flat_map(|t| &t.extracted.attempts)
        .chain(model.failures.iter().flat_map(|f| &f.attempts));
    let (skipped, lines) = attempts.fold((0, 0), |(s, l), a| (s + a.skipped, l + a.rule_lines));
    (model.trials.len(), model.failures.len(), skipped, lines)
}

#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub shots: usize,
    pub ablations: Ablations,
    pub repeat: usize,
    pub model: EnsembleModel,
    pub prediction: Prediction,
    pub test_labels: Vec<usize>,
    pub auc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub shots: usize,
    pub ablation: String,
    pub mean_auc: f64,
    pub std_auc: f64,
    pub trials_ok: usize,
    pub trials_failed: usize,
    pub parse_error_rate: f64,
    pub wall_seconds: Option<f64>,
    #[serde(skip)]
    pub aucs: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

impl ReportRow {
    /// `counts` holds `(trials ok, trials failed, skipped lines, rule lines)`
    /// for each repeat alongside its AUC.
    pub fn new(
        dataset: &str,
        shots: usize,
        ablation: &str,
        aucs: Vec<f64>,
        counts: &[(usize, usize, usize, usize)],
        wall_seconds: Option<f64>,
    ) -> Self {
        let (mean_auc, std_auc) = mean_std(&aucs);
        let (ok, failed, skipped, lines) = counts.iter().fold((0, 0, 0, 0), |acc, c| {
            (acc.0 + c.0, acc.1 + c.1, acc.2 + c.2, acc.3 + c.3)
        });
        Self {
            dataset: dataset.to_owned(),
            shots,
            ablation: ablation.to_owned(),
            mean_auc,
            std_auc,
            trials_ok: ok,
            trials_failed: failed,
            parse_error_rate: if lines == 0 { 0.0 } else { skipped as f64 / lines as f64 },
            wall_seconds,
            aucs,
        }
    }

    /// Aggregates the repeats of one grid cell.
    pub fn from_runs(dataset: &str, runs: &[&RunArtifacts], wall_seconds: Option<f64>) -> Self {
        let counts: Vec<_> = runs.iter().map(|r| trial_counts(&r.model)).collect();
        Self::new(
            dataset,
            runs.first().map_or(0, |r| r.shots),
            &runs.first().map_or_else(|| "none".into(), |r| r.ablations.label()),
            runs.iter().map(|r| r.auc).collect(),
            &counts,
            wall_seconds,
        )
    }
}

const COLUMNS: [&str; 9] = [
    "dataset",
    "shots",
    "ablation",
    "mean_auc",
    "std_auc",
    "trials_ok",
    "trials_failed",
    "parse_error_rate",
    "wall_seconds",
];

impl Report {
    fn cells(row: &ReportRow) -> [String; 9] {
        [
            row.dataset.clone(),
            row.shots.to_string(),
            row.ablation.clone(),
            format!("{:.6}", row.mean_auc),
            format!("{:.6}", row.std_auc),
            row.trials_ok.to_string(),
            row.trials_failed.to_string(),
            format!("{:.6}", row.parse_error_rate),
            row.wall_seconds.map_or_else(String::new, |s| format!("{s:.3}")),
        ]
    }

    pub fn to_csv(&self) -> Result<String, EvalError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| EvalError::Report(e.to_string());
        w.write_record(COLUMNS).map_err(err)?;
        for row in &self.rows {
            w.write_record(Self::cells(row)).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| EvalError::Report(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| EvalError::Report(e.to_string()))
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!("| {} |\n|{}\n", COLUMNS.join(" | "), "---|".repeat(COLUMNS.len()));
        for row in &self.rows {
            let _ = writeln!(out, "| {} |", Self::cells(row).join(" | "));
        }
        out
    }
}

pub struct ExperimentOutcome {
    pub report: Report,
    pub runs: Vec<RunArtifacts>,
}

/// Every (shots, ablation) cell, each repeated over fresh splits. Repeats run
/// in order; trials inside a repeat use the ensemble worker pool.
pub fn run_experiment(cfg: &ExperimentConfig, client: &dyn LlmClient) -> Result<ExperimentOutcome, EvalError> {
    let loaded = cfg.dataset.load()?;
    let name = cfg.dataset_name();
    let mut report = Report::default();
    let mut runs = Vec::new();
    for &k in &cfg.shots {
        for &ablations in &cfg.ablations {
            let start = Instant::now();
            let first = runs.len();
            for repeat in 0..cfg.repeats {
                let data = prepare_repeat(cfg, &loaded, k, repeat)?;
                let ens_cfg = cfg.cell_config(ablations, repeat);
                let model = fit_ensemble(client, &loaded.schema, &loaded.task, &data.shots, &ens_cfg)?;
                let prediction = predict(&model, &loaded.schema, &data.test.rows)?;
                let auc = test_auc(&prediction, &data.test)?;
                log::info!("{name} k={k} {} repeat {repeat}: AUC {auc:.4}", ablations.label());
                runs.push(RunArtifacts {
                    shots: k,
                    ablations,
                    repeat,
                    model,
                    prediction,
                    test_labels: data.test.labels.clone(),
                    auc,
                });
            }
            let wall = cfg.timing.then(|| start.elapsed().as_secs_f64());
            let cell: Vec<&RunArtifacts> = runs[first..].iter().collect();
            report.rows.push(ReportRow::from_runs(&name, &cell, wall));
        }
    }
    Ok(ExperimentOutcome { report, runs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_repeat_has_zero_std() {
        let mut cfg = ExperimentConfig::new(DatasetRef::Synthetic {
            synthetic: SyntheticKind::SolutionMix,
            rows: 100,
            seed: 1,
        });
        cfg.repeats = 1;
        cfg.ensemble.num_trials = 2;
        let out = run_experiment(&cfg, &solution_mix_oracle_client()).unwrap();
        assert_eq!(out.report.rows.len(), 1);
        assert_eq!(out.report.rows[0].std_auc, 0.0);
        assert_eq!(out.report.rows[0].trials_ok, 2);
        let csv = out.report.to_csv().unwrap();
        assert!(csv.starts_with(
            "dataset,shots,ablation,mean_auc,std_auc,trials_ok,trials_failed,parse_error_rate,wall_seconds\n"
        ));
        assert!(csv.lines().nth(1).unwrap().ends_with(','));
        assert!(out.report.to_markdown().starts_with("| dataset | shots |"));
    }

    #[test]
    fn dataset_ref_json_forms() {
        let s: DatasetRef = serde_json::from_str(r#"{"synthetic": "solution_mix", "rows": 50}"#).unwrap();
        assert_eq!(s.default_name(), "solution_mix");
        let f: DatasetRef = serde_json::from_str(r#"{"data": "x/heart.csv", "metadata": "m.json"}"#).unwrap();
        assert_eq!(f.default_name(), "heart");
    }
}
