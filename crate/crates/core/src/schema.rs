//! Dataset and task metadata, CSV ingestion, stratified splitting, balanced
//! k-shot sampling and the `"<feature> is <value>."` row serialization.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{rng_for, TAG_KSHOT, TAG_SPLIT};

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed metadata: {0}")]
    Metadata(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: label `{label}` is not one of the task classes")]
    UnknownLabel { row: usize, label: String },
    #[error("row {row}: cannot parse `{value}` as a number for feature `{feature}`")]
    BadNumber {
        row: usize,
        feature: String,
        value: String,
    },
    #[error("class `{class}` has {count} member(s); at least {needed} required")]
    ClassTooSmall {
        class: String,
        count: usize,
        needed: usize,
    },
    #[error("k = {k} is smaller than the number of classes ({classes})")]
    KTooSmall { k: usize, classes: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Categorical,
    Numerical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureDesc {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
}

impl FeatureDesc {
    pub fn numerical(name: impl Into<String>, description: Option<&str>) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Numerical,
            description: description.map(str::to_owned),
            categories: Vec::new(),
        }
    }

    pub fn categorical(
        name: impl Into<String>,
        description: Option<&str>,
        categories: &[&str],
    ) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Categorical,
            description: description.map(str::to_owned),
            categories: categories.iter().map(|c| c.to_string()).collect(),
        }
    }

    /// Canonical spelling of `value` in the category list; exact match first,
    /// then case-insensitive.
    pub fn match_category(&self, value: &str) -> Option<&str> {
        self.categories
            .iter()
            .find(|c| c.as_str() == value)
            .or_else(|| self.categories.iter().find(|c| c.eq_ignore_ascii_case(value)))
            .map(String::as_str)
    }
}

/// Ordered feature descriptors. Names are unique; categorical features carry a
/// non-empty category list and numerical ones none.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeatureSchema {
    features: Vec<FeatureDesc>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl FeatureSchema {
    pub fn new(features: Vec<FeatureDesc>) -> Result<Self, SchemaError> {
        let mut index = HashMap::with_capacity(features.len());
        for (i, f) in features.iter().enumerate() {
            if f.name.trim().is_empty() {
                return Err(SchemaError::Metadata("empty feature name".into()));
            }
            match f.kind {
                FeatureKind::Categorical if f.categories.is_empty() => {
                    return Err(SchemaError::Metadata(format!(
                        "categorical feature `{}` has no categories",
                        f.name
                    )))
                }
                FeatureKind::Numerical if !f.categories.is_empty() => {
                    return Err(SchemaError::Metadata(format!(
                        "numerical feature `{}` must not list categories",
                        f.name
                    )))
                }
                _ => {}
            }
            if index.insert(f.name.clone(), i).is_some() {
                return Err(SchemaError::Metadata(format!(
                    "duplicate feature name `{}`",
                    f.name
                )));
            }
        }
        Ok(Self { features, index })
    }

    pub fn features(&self) -> &[FeatureDesc] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<&FeatureDesc> {
        self.position(name).map(|i| &self.features[i])
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }

    pub fn count_kind(&self, kind: FeatureKind) -> usize {
        self.features.iter().filter(|f| f.kind == kind).count()
    }

    /// Schema restricted to the features for which `keep` holds, in order.
    pub fn retain(&self, keep: impl Fn(usize, &FeatureDesc) -> bool) -> Self {
        let features = self
            .features
            .iter()
            .enumerate()
            .filter(|(i, f)| keep(*i, f))
            .map(|(_, f)| f.clone())
            .collect();
        Self::new(features).expect("subset of a valid schema is valid")
    }
}

impl<'de> Deserialize<'de> for FeatureSchema {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            features: Vec<FeatureDesc>,
        }
        let raw = Raw::deserialize(d)?;
        FeatureSchema::new(raw.features).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub question: String,
    pub classes: Vec<String>,
}

impl TaskSpec {
    pub fn new(question: impl Into<String>, classes: &[&str]) -> Result<Self, SchemaError> {
        let task = Self {
            question: question.into(),
            classes: classes.iter().map(|c| c.to_string()).collect(),
        };
        task.validate()?;
        Ok(task)
    }

    fn validate(&self) -> Result<(), SchemaError> {
        if self.classes.len() < 2 {
            return Err(SchemaError::Metadata("a task needs at least two classes".into()));
        }
        let distinct: HashSet<&String> = self.classes.iter().collect();
        if distinct.len() != self.classes.len() {
            return Err(SchemaError::Metadata("class labels must be distinct".into()));
        }
        Ok(())
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }
}

/// A numeric cell. `text` is the spelling used in prompts; values read from a
/// file keep their source text so `3.0` is not rendered as `3`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Number {
    pub value: f64,
    pub text: String,
}

impl Number {
    /// Shortest decimal form that round-trips (`1.0` renders as `1`).
    pub fn from_f64(value: f64) -> Self {
        Self {
            value,
            text: format!("{value}"),
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        let text = text.trim();
        let value: f64 = text.parse().ok()?;
        value.is_finite().then(|| Self {
            value,
            text: text.to_owned(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Category(String),
    Number(Number),
    Missing,
}

impl Value {
    pub fn num(v: f64) -> Self {
        Value::Number(Number::from_f64(v))
    }

    pub fn cat(s: &str) -> Self {
        Value::Category(s.to_owned())
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, Value::Missing)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Number(n) => Some(n.value),
            _ => None,
        }
    }

    pub fn as_category(&self) -> Option<&str> {
        match self {
            Value::Category(c) => Some(c),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Category(c) => f.write_str(c),
            Value::Number(n) => f.write_str(&n.text),
            Value::Missing => f.write_str("unknown"),
        }
    }
}

/// One value per schema feature, in schema order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub values: Vec<Value>,
}

impl Row {
    pub fn new(values: Vec<Value>) -> Self {
        Self { values }
    }

    pub fn get(&self, position: usize) -> &Value {
        &self.values[position]
    }

    pub fn by_name<'a>(&'a self, schema: &FeatureSchema, name: &str) -> Option<&'a Value> {
        schema.position(name).map(|i| &self.values[i])
    }
}

/// Rows with class indices into the owning [`TaskSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSet {
    pub rows: Vec<Row>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl LabeledSet {
    pub fn new(rows: Vec<Row>, labels: Vec<usize>, num_classes: usize) -> Result<Self, SchemaError> {
        if rows.len() != labels.len() {
            return Err(SchemaError::Invalid(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(SchemaError::Invalid(format!("label index {bad} out of range")));
        }
        Ok(Self {
            rows,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Member indices per class, in row order.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut by_class = vec![Vec::new(); self.num_classes];
        for (i, &l) in self.labels.iter().enumerate() {
            by_class[l].push(i);
        }
        by_class
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }
}

/// JSON metadata accompanying a CSV data file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Metadata {
    pub task: String,
    pub classes: Vec<String>,
    pub label_column: String,
    pub features: Vec<FeatureDesc>,
}

impl Metadata {
    pub fn from_parts(schema: &FeatureSchema, task: &TaskSpec, label_column: &str) -> Self {
        Self {
            task: task.question.clone(),
            classes: task.classes.clone(),
            label_column: label_column.to_owned(),
            features: schema.features().to_vec(),
        }
    }

    pub fn into_parts(self) -> Result<(FeatureSchema, TaskSpec, String), SchemaError> {
        let schema = FeatureSchema::new(self.features)?;
        let task = TaskSpec {
            question: self.task,
            classes: self.classes,
        };
        task.validate()?;
        if schema.position(&self.label_column).is_some() {
            return Err(SchemaError::Metadata(format!(
                "label column `{}` is also listed as a feature",
                self.label_column
            )));
        }
        Ok((schema, task, self.label_column))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IngestMode {
    /// Keep every column and row; missing cells are handled by the rule
    /// evaluator's missing-value strategy.
    #[default]
    Lenient,
    /// Drop columns with more than 20% missing cells, then drop rows that
    /// still contain a missing cell.
    Strict,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LoadWarnings {
    /// Categorical cells whose value is not in the category list; they are
    /// stored as [`Value::Missing`].
    pub unknown_categories: usize,
    pub dropped_columns: Vec<String>,
    pub dropped_rows: usize,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub schema: FeatureSchema,
    pub task: TaskSpec,
    pub label_column: String,
    pub data: LabeledSet,
    pub warnings: LoadWarnings,
}

fn read_to_string(path: &Path) -> Result<String, SchemaError> {
    let mut s = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|source| SchemaError::Io {
            path: path.display().to_string(),
            source,
        })?;
    Ok(s)
}

pub fn load_metadata(path: &Path) -> Result<Metadata, SchemaError> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| SchemaError::Metadata(e.to_string()))
}

pub fn load_dataset(data_path: &Path, metadata_path: &Path) -> Result<Dataset, SchemaError> {
    load_dataset_with(data_path, metadata_path, IngestMode::Lenient)
}

pub fn load_dataset_with(
    data_path: &Path,
    metadata_path: &Path,
    mode: IngestMode,
) -> Result<Dataset, SchemaError> {
    let meta = load_metadata(metadata_path)?;
    let csv_text = read_to_string(data_path)?;
    parse_dataset(meta, &csv_text, mode)
}

/// Reads CSV text against already-parsed metadata.
pub fn parse_dataset(meta: Metadata, csv_text: &str, mode: IngestMode) -> Result<Dataset, SchemaError> {
    let (schema, task, label_column) = meta.into_parts()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(csv_text.as_bytes());
    let headers = reader.headers()?.clone();

    // column index in the CSV for each schema feature
    let mut seen = HashSet::new();
    let mut feature_cols = vec![usize::MAX; schema.len()];
    let mut label_col = None;
    for (col, name) in headers.iter().enumerate() {
        let name = name.trim();
        if !seen.insert(name.to_owned()) {
            return Err(SchemaError::DuplicateColumn(name.to_owned()));
        }
        if name == label_column {
            label_col = Some(col);
        } else if let Some(pos) = schema.position(name) {
            feature_cols[pos] = col;
        } else {
            return Err(SchemaError::UnknownColumn(name.to_owned()));
        }
    }
    let label_col = label_col.ok_or_else(|| SchemaError::MissingColumn(label_column.clone()))?;
    if let Some(pos) = feature_cols.iter().position(|&c| c == usize::MAX) {
        return Err(SchemaError::MissingColumn(schema.features()[pos].name.clone()));
    }

    let mut warnings = LoadWarnings::default();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row_no = r + 1;
        let label_text = record.get(label_col).unwrap_or("").trim();
        let label = task
            .class_index(label_text)
            .ok_or_else(|| SchemaError::UnknownLabel {
                row: row_no,
                label: label_text.to_owned(),
            })?;
        let mut values = Vec::with_capacity(schema.len());
        for (feat, &col) in schema.features().iter().zip(&feature_cols) {
            let cell = record.get(col).unwrap_or("").trim();
            let value = if cell.is_empty() {
                Value::Missing
            } else {
                match feat.kind {
                    FeatureKind::Numerical => Value::Number(Number::parse(cell).ok_or_else(|| {
                        SchemaError::BadNumber {
                            row: row_no,
                            feature: feat.name.clone(),
                            value: cell.to_owned(),
                        }
                    })?),
                    FeatureKind::Categorical => match feat.match_category(cell) {
                        Some(c) => Value::Category(c.to_owned()),
                        None => {
                            warnings.unknown_categories += 1;
                            log::warn!(
                                "row {row_no}: unknown category `{cell}` for `{}`; treating as missing",
                                feat.name
                            );
                            Value::Missing
                        }
                    },
                }
            };
            values.push(value);
        }
        rows.push(Row::new(values));
        labels.push(label);
    }

    let mut schema = schema;
    if mode == IngestMode::Strict && !rows.is_empty() {
        let n = rows.len() as f64;
        let keep: Vec<bool> = (0..schema.len())
            .map(|j| {
                let missing = rows.iter().filter(|r| r.values[j].is_missing()).count();
                missing as f64 / n <= 0.2
            })
            .collect();
        warnings.dropped_columns = schema
            .features()
            .iter()
            .zip(&keep)
            .filter(|(_, k)| !**k)
            .map(|(f, _)| f.name.clone())
            .collect();
        schema = schema.retain(|i, _| keep[i]);
        let mut kept_rows = Vec::new();
        let mut kept_labels = Vec::new();
        for (row, label) in rows.into_iter().zip(labels) {
            let values: Vec<Value> = row
                .values
                .into_iter()
                .zip(&keep)
                .filter(|(_, k)| **k)
                .map(|(v, _)| v)
                .collect();
            if values.iter().any(Value::is_missing) {
                warnings.dropped_rows += 1;
            } else {
                kept_rows.push(Row::new(values));
                kept_labels.push(label);
            }
        }
        rows = kept_rows;
        labels = kept_labels;
    }

    let data = LabeledSet::new(rows, labels, task.num_classes())?;
    Ok(Dataset {
        schema,
        task,
        label_column,
        data,
        warnings,
    })
}

/// Writes `data` as CSV with the schema's feature columns followed by the
/// label column.
pub fn write_csv<W: std::io::Write>(
    out: W,
    schema: &FeatureSchema,
    task: &TaskSpec,
    label_column: &str,
    data: &LabeledSet,
) -> Result<(), SchemaError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = schema.names().collect();
    header.push(label_column);
    w.write_record(&header)?;
    for (row, &label) in data.rows.iter().zip(&data.labels) {
        let mut rec: Vec<String> = row
            .values
            .iter()
            .map(|v| match v {
                Value::Missing => String::new(),
                other => other.to_string(),
            })
            .collect();
        rec.push(task.classes[label].clone());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|source| SchemaError::Io {
        path: "<csv writer>".into(),
        source,
    })?;
    Ok(())
}

/// Stratified train/test split. Each class contributes
/// `round(count * test_fraction)` test rows, clamped to `1..=count-1`.
/// Both halves keep the original row order.
pub fn stratified_split(
    data: &LabeledSet,
    test_fraction: f64,
    seed: u64,
) -> Result<(LabeledSet, LabeledSet), SchemaError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(SchemaError::Invalid(format!(
            "test fraction {test_fraction} is outside (0, 1)"
        )));
    }
    let mut rng = rng_for(seed, &[TAG_SPLIT]);
    let mut test_idx = Vec::new();
    let mut train_idx = Vec::new();
    for (class, mut members) in data.indices_by_class().into_iter().enumerate() {
        let count = members.len();
        if count < 2 {
            return Err(SchemaError::ClassTooSmall {
                class: format!("#{class}"),
                count,
                needed: 2,
            });
        }
        let n_test = ((count as f64 * test_fraction).round() as usize).clamp(1, count - 1);
        members.shuffle(&mut rng);
        test_idx.extend_from_slice(&members[..n_test]);
        train_idx.extend_from_slice(&members[n_test..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((data.select(&train_idx), data.select(&test_idx)))
}

/// Per-class quotas for a balanced k-shot draw: `floor(k / classes)` each,
/// with the remainder handed out one per class in class order.
pub fn k_shot_quotas(k: usize, num_classes: usize) -> Vec<usize> {
    let base = k / num_classes;
    let extra = k % num_classes;
    (0..num_classes).map(|c| base + usize::from(c < extra)).collect()
}

pub fn sample_k_shot(pool: &LabeledSet, k: usize, seed: u64) -> Result<LabeledSet, SchemaError> {
    if k < pool.num_classes {
        return Err(SchemaError::KTooSmall {
            k,
            classes: pool.num_classes,
        });
    }
    let mut rng = rng_for(seed, &[TAG_KSHOT]);
    let quotas = k_shot_quotas(k, pool.num_classes);
    let mut picked = Vec::with_capacity(k);
    for (class, members) in pool.indices_by_class().into_iter().enumerate() {
        let quota = quotas[class];
        if members.len() < quota {
            return Err(SchemaError::ClassTooSmall {
                class: format!("#{class}"),
                count: members.len(),
                needed: quota,
            });
        }
        picked.extend(members.choose_multiple(&mut rng, quota).copied());
    }
    picked.sort_unstable();
    Ok(pool.select(&picked))
}

/// `"<f1> is <v1>. <f2> is <v2>."`, optionally followed by `"\nAnswer: <label>"`.
pub fn serialize_example(row: &Row, label: Option<&str>, schema: &FeatureSchema) -> String {
    serialize_subset(row, label, schema, None)
}

/// Like [`serialize_example`] but only over the schema positions in `subset`.
pub fn serialize_subset(
    row: &Row,
    label: Option<&str>,
    schema: &FeatureSchema,
    subset: Option<&[usize]>,
) -> String {
    let clause = |i: usize| format!("{} is {}.", schema.features()[i].name, row.values[i]);
    let mut out = match subset {
        Some(idx) => idx.iter().map(|&i| clause(i)).collect::<Vec<_>>().join(" "),
        None => (0..schema.len()).map(clause).collect::<Vec<_>>().join(" "),
    };
    if let Some(label) = label {
        out.push_str("\nAnswer: ");
        out.push_str(label);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_meta() -> Metadata {
        Metadata {
            task: "Is it? Yes or no?".into(),
            classes: vec!["no".into(), "yes".into()],
            label_column: "label".into(),
            features: vec![FeatureDesc::numerical("x", None)],
        }
    }

    fn balanced(counts: &[usize]) -> LabeledSet {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            for i in 0..n {
                rows.push(Row::new(vec![Value::num(i as f64)]));
                labels.push(c);
            }
        }
        LabeledSet::new(rows, labels, counts.len()).unwrap()
    }

    #[test]
    fn minimal_csv_row() {
        let mut meta = tiny_meta();
        meta.classes = vec!["yes".into(), "no".into()];
        let ds = parse_dataset(meta, "x,label\n1.5,yes\n", IngestMode::Lenient).unwrap();
        assert_eq!(ds.data.len(), 1);
        assert_eq!(ds.data.rows[0].values[0].as_f64(), Some(1.5));
        assert_eq!(ds.task.classes[ds.data.labels[0]], "yes");
    }

    #[test]
    fn load_errors() {
        let err = parse_dataset(tiny_meta(), "x,y,label\n1,2,yes\n", IngestMode::Lenient);
        assert!(matches!(err, Err(SchemaError::UnknownColumn(c)) if c == "y"));
        let err = parse_dataset(tiny_meta(), "x,x,label\n1,2,yes\n", IngestMode::Lenient);
        assert!(matches!(err, Err(SchemaError::DuplicateColumn(_))));
        let err = parse_dataset(tiny_meta(), "x,label\n1,maybe\n", IngestMode::Lenient);
        assert!(matches!(err, Err(SchemaError::UnknownLabel { row: 1, .. })));
        let err = parse_dataset(tiny_meta(), "x,label\nabc,yes\n", IngestMode::Lenient);
        assert!(matches!(err, Err(SchemaError::BadNumber { .. })));
        let err = parse_dataset(tiny_meta(), "label\nyes\n", IngestMode::Lenient);
        assert!(matches!(err, Err(SchemaError::MissingColumn(c)) if c == "x"));
    }

    #[test]
    fn malformed_metadata() {
        let mut meta = tiny_meta();
        meta.features.push(FeatureDesc {
            name: "c".into(),
            kind: FeatureKind::Categorical,
            description: None,
            categories: vec![],
        });
        assert!(matches!(meta.into_parts(), Err(SchemaError::Metadata(_))));
        let mut meta = tiny_meta();
        meta.classes = vec!["only".into()];
        assert!(matches!(meta.into_parts(), Err(SchemaError::Metadata(_))));
        assert!(serde_json::from_str::<Metadata>("{\"task\": 3}").is_err());
    }

    #[test]
    fn empty_cells_and_unknown_categories_become_missing() {
        let meta = Metadata {
            features: vec![
                FeatureDesc::numerical("x", None),
                FeatureDesc::categorical("c", None, &["A", "B"]),
            ],
            ..tiny_meta()
        };
        let ds = parse_dataset(meta, "x,c,label\n,a,no\n2,Z,yes\n", IngestMode::Lenient).unwrap();
        assert!(ds.data.rows[0].values[0].is_missing());
        assert_eq!(ds.data.rows[0].values[1], Value::cat("A"));
        assert!(ds.data.rows[1].values[1].is_missing());
        assert_eq!(ds.warnings.unknown_categories, 1);
    }

    #[test]
    fn strict_mode_drops_sparse_columns_then_rows() {
        let meta = Metadata {
            features: vec![
                FeatureDesc::numerical("x", None),
                FeatureDesc::numerical("sparse", None),
            ],
            ..tiny_meta()
        };
        // sparse: 3 of 10 missing (30%) -> dropped; x: 1 of 10 missing -> row dropped
        let mut csv = String::from("x,sparse,label\n");
        for i in 0..10 {
            let x = if i == 9 { String::new() } else { i.to_string() };
            let s = if i < 3 { String::new() } else { "1".into() };
            csv.push_str(&format!("{x},{s},{}\n", if i % 2 == 0 { "no" } else { "yes" }));
        }
        let ds = parse_dataset(meta, &csv, IngestMode::Strict).unwrap();
        assert_eq!(ds.schema.len(), 1);
        assert_eq!(ds.warnings.dropped_columns, vec!["sparse".to_string()]);
        assert_eq!(ds.warnings.dropped_rows, 1);
        assert_eq!(ds.data.len(), 9);
    }

    #[test]
    fn split_exact_proportions() {
        let data = balanced(&[50, 50]);
        let (train, test) = stratified_split(&data, 0.2, 3).unwrap();
        assert_eq!(test.class_counts(), vec![10, 10]);
        assert_eq!(train.len(), 80);
    }

    #[test]
    fn split_keeps_minority_in_test() {
        let data = balanced(&[9, 1 + 1]);
        let (_, test) = stratified_split(&data, 0.2, 0).unwrap();
        assert!(test.class_counts()[1] >= 1);
        let data = balanced(&[9, 1]);
        assert!(matches!(
            stratified_split(&data, 0.2, 0),
            Err(SchemaError::ClassTooSmall { count: 1, .. })
        ));
    }

    #[test]
    fn split_blood_shaped() {
        // 748 rows at 76:24 -> 570 / 178
        let data = balanced(&[570, 178]);
        let (train, test) = stratified_split(&data, 0.2, 11).unwrap();
        assert_eq!(test.len(), 150);
        let counts = test.class_counts();
        assert!(counts[0].abs_diff(114) <= 1 && counts[1].abs_diff(36) <= 1);
        assert_eq!(train.len() + test.len(), 748);
    }

    #[test]
    fn quotas() {
        assert_eq!(k_shot_quotas(4, 2), vec![2, 2]);
        assert_eq!(k_shot_quotas(4, 4), vec![1, 1, 1, 1]);
        assert_eq!(k_shot_quotas(8, 3), vec![3, 3, 2]);
    }

    #[test]
    fn k_shot_counts_and_errors() {
        let pool = balanced(&[10, 10, 10]);
        let shots = sample_k_shot(&pool, 8, 5).unwrap();
        assert_eq!(shots.class_counts(), vec![3, 3, 2]);
        assert!(matches!(sample_k_shot(&pool, 2, 5), Err(SchemaError::KTooSmall { .. })));
        let pool = balanced(&[10, 1]);
        assert!(matches!(
            sample_k_shot(&pool, 4, 5),
            Err(SchemaError::ClassTooSmall { .. })
        ));
    }

    #[test]
    fn serialize_single_feature() {
        let schema = FeatureSchema::new(vec![FeatureDesc::numerical("F", None)]).unwrap();
        let row = Row::new(vec![Value::num(1.0)]);
        assert_eq!(serialize_example(&row, None, &schema), "F is 1.");
        let row = Row::new(vec![Value::Missing]);
        assert_eq!(serialize_example(&row, Some("yes"), &schema), "F is unknown.\nAnswer: yes");
    }

    #[test]
    fn number_text_preserved() {
        assert_eq!(Number::parse("3.0").unwrap().text, "3.0");
        assert_eq!(Number::from_f64(3.0).text, "3");
        assert_eq!(Number::from_f64(0.25).text, "0.25");
        assert!(Number::parse("inf").is_none());
    }
}
