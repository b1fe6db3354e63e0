//! Per-trial class-likelihood model: one nonnegative weight vector per class,
//! applied to that class's rule indicators, followed by a softmax.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{rng_for, TAG_FOLDS};
use crate::ruledsl::FeatureMatrix;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("expected {expected} classes, got {got}")]
    ClassCount { expected: usize, got: usize },
    #[error("class {class}: expected {expected} rule values, got {got}")]
    RuleCount {
        class: usize,
        expected: usize,
        got: usize,
    },
    #[error("feature matrices disagree on the number of rows")]
    RowCount,
    #[error("batch is empty")]
    EmptyBatch,
    #[error("label {0} is out of range")]
    BadLabel(usize),
    #[error("class {0} has no training samples")]
    ClassMissing(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// `None` picks 2 or 4 from the shots per class.
    pub folds: Option<usize>,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            max_epochs: 200,
            folds: None,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn fold_count(&self, num_samples: usize, num_classes: usize) -> usize {
        self.folds.unwrap_or(if num_samples / num_classes.max(1) < 4 { 2 } else { 4 })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialModel {
    pub classes: Vec<String>,
    pub weights: Vec<Vec<f64>>,
    pub trained_epochs: usize,
    pub config: TrainConfig,
}

/// Softmax with the largest logit subtracted first.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn logits(weights: &[Vec<f64>], z: &[&[f64]]) -> Vec<f64> {
    weights
        .iter()
        .zip(z)
        .map(|(w, z)| w.iter().zip(*z).map(|(w, z)| w.max(0.0) * z).sum())
        .collect()
}

fn check_shapes(weights: &[Vec<f64>], z: &[&[f64]]) -> Result<(), ModelError> {
    if weights.len() != z.len() {
        return Err(ModelError::ClassCount {
            expected: weights.len(),
            got: z.len(),
        });
    }
    for (class, (w, z)) in weights.iter().zip(z).enumerate() {
        if w.len() != z.len() {
            return Err(ModelError::RuleCount {
                class,
                expected: w.len(),
                got: z.len(),
            });
        }
    }
    Ok(())
}

fn check_matrices(weights: &[Vec<f64>], matrices: &[FeatureMatrix]) -> Result<usize, ModelError> {
    if weights.len() != matrices.len() {
        return Err(ModelError::ClassCount {
            expected: weights.len(),
            got: matrices.len(),
        });
    }
    let rows = matrices.first().map_or(0, FeatureMatrix::num_rows);
    for (class, (w, m)) in weights.iter().zip(matrices).enumerate() {
        if m.num_rows() != rows {
            return Err(ModelError::RowCount);
        }
        if let Some(bad) = m.values.iter().find(|r| r.len() != w.len()) {
            return Err(ModelError::RuleCount {
                class,
                expected: w.len(),
                got: bad.len(),
            });
        }
    }
    Ok(rows)
}

fn sample<'a>(matrices: &'a [FeatureMatrix], i: usize) -> Vec<&'a [f64]> {
    matrices.iter().map(|m| m.row(i)).collect()
}

impl TrialModel {
    /// A model with every weight set to one: plain rule counting.
    pub fn all_ones(classes: Vec<String>, rule_counts: &[usize], config: TrainConfig) -> Self {
        Self {
            classes,
            weights: rule_counts.iter().map(|&r| vec![1.0; r]).collect(),
            trained_epochs: 0,
            config,
        }
    }

    /// Class probabilities for one sample, given each class's rule values.
    pub fn forward(&self, z: &[&[f64]]) -> Result<Vec<f64>, ModelError> {
        check_shapes(&self.weights, z)?;
        Ok(softmax(&logits(&self.weights, z)))
    }

    /// `forward` for every row of the per-class matrices.
    pub fn predict(&self, matrices: &[FeatureMatrix]) -> Result<Vec<Vec<f64>>, ModelError> {
        let rows = check_matrices(&self.weights, matrices)?;
        Ok((0..rows)
            .map(|i| softmax(&logits(&self.weights, &sample(matrices, i))))
            .collect())
    }

    pub fn num_rules(&self) -> Vec<usize> {
        self.weights.iter().map(Vec::len).collect()
    }
}

/// Mean cross-entropy over the batch and its gradient with respect to the raw
/// weights. Weights at or below zero receive a zero gradient.
pub fn loss_and_gradient(
    model: &TrialModel,
    matrices: &[FeatureMatrix],
    labels: &[usize],
) -> Result<(f64, Vec<Vec<f64>>), ModelError> {
    let rows = check_matrices(&model.weights, matrices)?;
    if rows != labels.len() {
        return Err(ModelError::RowCount);
    }
    if rows == 0 {
        return Err(ModelError::EmptyBatch);
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= model.weights.len()) {
        return Err(ModelError::BadLabel(bad));
    }
    let all: Vec<usize> = (0..rows).collect();
    Ok(batch_loss_grad(&model.weights, matrices, labels, &all))
}

fn batch_loss_grad(
    weights: &[Vec<f64>],
    matrices: &[FeatureMatrix],
    labels: &[usize],
    rows: &[usize],
) -> (f64, Vec<Vec<f64>>) {
    let mut grad: Vec<Vec<f64>> = weights.iter().map(|w| vec![0.0; w.len()]).collect();
    let mut loss = 0.0;
    for &i in rows {
        let z = sample(matrices, i);
        let p = softmax(&logits(weights, &z));
        let y = labels[i];
        loss -= p[y].max(f64::MIN_POSITIVE).ln();
        for (k, (g, (w, zk))) in grad.iter_mut().zip(weights.iter().zip(&z)).enumerate() {
            let delta = p[k] - if k == y { 1.0 } else { 0.0 };
            for ((g, &w), &zv) in g.iter_mut().zip(w).zip(*zk) {
                if w > 0.0 {
                    *g += delta * zv;
                }
            }
        }
    }
    let n = rows.len() as f64;
    grad.iter_mut().flatten().for_each(|g| *g /= n);
    (loss / n, grad)
}

fn batch_loss(weights: &[Vec<f64>], matrices: &[FeatureMatrix], labels: &[usize], rows: &[usize]) -> f64 {
    let total: f64 = rows
        .iter()
        .map(|&i| {
            let p = softmax(&logits(weights, &sample(matrices, i)));
            -p[labels[i]].max(f64::MIN_POSITIVE).ln()
        })
        .sum();
    total / rows.len() as f64
}

struct Adam<'a> {
    cfg: &'a TrainConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: i32,
}

impl<'a> Adam<'a> {
    fn new(cfg: &'a TrainConfig, shape: &[Vec<f64>]) -> Self {
        let zeros: Vec<Vec<f64>> = shape.iter().map(|w| vec![0.0; w.len()]).collect();
        Self {
            cfg,
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }

    fn update(&mut self, weights: &mut [Vec<f64>], grad: &[Vec<f64>]) {
        self.step += 1;
        let (b1, b2) = (self.cfg.adam_beta1, self.cfg.adam_beta2);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        for k in 0..weights.len() {
            for j in 0..weights[k].len() {
                let g = grad[k][j];
                let m = &mut self.m[k][j];
                let v = &mut self.v[k][j];
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                weights[k][j] -= self.cfg.learning_rate * m_hat / (v_hat.sqrt() + self.cfg.adam_eps);
            }
        }
    }
}

fn initial_weights(rule_counts: &[usize]) -> Vec<Vec<f64>> {
    rule_counts
        .iter()
        .map(|&r| vec![1.0 / r.max(1) as f64; r])
        .collect()
}

/// Runs `epochs` full-batch Adam steps on `rows`, calling `on_epoch` with the
/// weights after each one.
fn fit(
    rule_counts: &[usize],
    matrices: &[FeatureMatrix],
    labels: &[usize],
    rows: &[usize],
    epochs: usize,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, &[Vec<f64>]),
) -> Vec<Vec<f64>> {
    let mut weights = initial_weights(rule_counts);
    let mut adam = Adam::new(cfg, &weights);
    for epoch in 1..=epochs {
        let (_, grad) = batch_loss_grad(&weights, matrices, labels, rows);
        adam.update(&mut weights, &grad);
        on_epoch(epoch, &weights);
    }
    weights
}

/// Stratified fold ids, or `None` when some training side would lack a class.
fn assign_folds(labels: &[usize], num_classes: usize, folds: usize, seed: u64) -> Option<Vec<usize>> {
    if folds < 2 || labels.len() < folds {
        return None;
    }
    let mut by_class = vec![Vec::new(); num_classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    if by_class.iter().any(|m| m.len() < 2) {
        return None;
    }
    let mut rng = rng_for(seed, &[TAG_FOLDS]);
    let mut fold_of = vec![0; labels.len()];
    let mut next = 0;
    for members in &mut by_class {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            fold_of[i] = next % folds;
            next += 1;
        }
    }
    Some(fold_of)
}

/// Epoch with the lowest mean validation loss across folds (earliest on ties).
fn select_epoch(
    rule_counts: &[usize],
    matrices: &[FeatureMatrix],
    labels: &[usize],
    fold_of: &[usize],
    folds: usize,
    cfg: &TrainConfig,
) -> usize {
    let mut curve = vec![0.0; cfg.max_epochs + 1];
    for f in 0..folds {
        let (val, train): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| fold_of[i] == f);
        fit(rule_counts, matrices, labels, &train, cfg.max_epochs, cfg, |e, w| {
            curve[e] += batch_loss(w, matrices, labels, &val) / folds as f64;
        });
    }
    let mut best = 1;
    for e in 2..=cfg.max_epochs {
        if curve[e] < curve[best] {
            best = e;
        }
    }
    best
}

/// Fits one trial's weights: cross-validated choice of the epoch count, then
/// a refit on every sample for that many epochs.
pub fn train_trial(
    classes: &[String],
    matrices: &[FeatureMatrix],
    labels: &[usize],
    cfg: &TrainConfig,
) -> Result<TrialModel, ModelError> {
    let rule_counts: Vec<usize> = matrices.iter().map(|m| m.num_rules).collect();
    let shape = initial_weights(&rule_counts);
    let rows = check_matrices(&shape, matrices)?;
    if classes.len() != matrices.len() {
        return Err(ModelError::ClassCount {
            expected: classes.len(),
            got: matrices.len(),
        });
    }
    if rows != labels.len() {
        return Err(ModelError::RowCount);
    }
    if rows == 0 {
        return Err(ModelError::EmptyBatch);
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes.len()) {
        return Err(ModelError::BadLabel(bad));
    }
    if let Some(c) = (0..classes.len()).find(|c| !labels.contains(c)) {
        return Err(ModelError::ClassMissing(c));
    }

    let folds = cfg.fold_count(rows, classes.len());
    let epochs = if cfg.max_epochs == 0 {
        0
    } else {
        match assign_folds(labels, classes.len(), folds, cfg.seed) {
            Some(fold_of) => select_epoch(&rule_counts, matrices, labels, &fold_of, folds, cfg),
            None => {
                log::warn!(
                    "cannot build {folds} stratified folds from {rows} samples; training for {} epochs",
                    cfg.max_epochs
                );
                cfg.max_epochs
            }
        }
    };
    let all: Vec<usize> = (0..rows).collect();
    let weights = fit(&rule_counts, matrices, labels, &all, epochs, cfg, |_, _| {});
    Ok(TrialModel {
        classes: classes.to_vec(),
        weights,
        trained_epochs: epochs,
        config: cfg.clone(),
    })
}

/// Probabilities from summed rule indicators, with no learned weights.
pub fn predict_no_tuning(matrices: &[FeatureMatrix]) -> Result<Vec<Vec<f64>>, ModelError> {
    let rows = matrices.first().map_or(0, FeatureMatrix::num_rows);
    if matrices.iter().any(|m| m.num_rows() != rows) {
        return Err(ModelError::RowCount);
    }
    Ok((0..rows)
        .map(|i| {
            let sums: Vec<f64> = matrices.iter().map(|m| m.row(i).iter().sum()).collect();
            softmax(&sums)
        })
        .collect())
}

/// Training loss after each of `epochs` refit steps on every sample, starting
/// from the initial weights.
pub fn training_curve(
    matrices: &[FeatureMatrix],
    labels: &[usize],
    epochs: usize,
    cfg: &TrainConfig,
) -> Vec<f64> {
    let rule_counts: Vec<usize> = matrices.iter().map(|m| m.num_rules).collect();
    let all: Vec<usize> = (0..labels.len()).collect();
    let mut out = Vec::with_capacity(epochs);
    fit(&rule_counts, matrices, labels, &all, epochs, cfg, |_, w| {
        out.push(batch_loss(w, matrices, labels, &all));
    });
    out
}
