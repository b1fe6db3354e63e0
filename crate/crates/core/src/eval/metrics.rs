use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("scores and labels differ in length ({scores} vs {labels})")]
    Length { scores: usize, labels: usize },
    #[error("AUC needs both positive and negative samples")]
    SingleClass,
    #[error("label {0} is out of range")]
    BadLabel(usize),
}

/// ROC AUC via rank sums. Tied scores get half credit. Doubled mid-ranks keep
/// every intermediate an integer, so the result is the exact pairwise ratio.
pub fn auc_binary(scores: &[f64], labels: &[bool]) -> Result<f64, MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::Length {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    let positives = labels.iter().filter(|&&l| l).count() as u128;
    let negatives = labels.len() as u128 - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut doubled_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]].total_cmp(&scores[order[i]]).is_eq() {
            j += 1;
        }
        // 1-based ranks i+1..=j share the mid-rank (i+1+j)/2
        let doubled = (i + 1 + j) as u128;
        let pos_in_group = order[i..j].iter().filter(|&&k| labels[k]).count() as u128;
        doubled_rank_sum += doubled * pos_in_group;
        i = j;
    }
    let doubled_u = doubled_rank_sum - positives * (positives + 1);
    Ok(doubled_u as f64 / (2 * positives * negatives) as f64)
}

/// Macro one-vs-rest AUC over the classes that occur in `labels`. Two-class
/// input reduces to the binary AUC of the second column.
pub fn auc_multiclass(probs: &[Vec<f64>], labels: &[usize], num_classes: usize) -> Result<f64, MetricError> {
    if probs.len() != labels.len() {
        return Err(MetricError::Length {
            scores: probs.len(),
            labels: labels.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
        return Err(MetricError::BadLabel(bad));
    }
    let present: Vec<usize> = (0..num_classes).filter(|c| labels.contains(c)).collect();
    if present.len() < 2 {
        return Err(MetricError::SingleClass);
    }
    let one_vs_rest = |c: usize| {
        let scores: Vec<f64> = probs.iter().map(|p| p[c]).collect();
        let truth: Vec<bool> = labels.iter().map(|&y| y == c).collect();
        auc_binary(&scores, &truth)
    };
    if num_classes == 2 {
        return one_vs_rest(1);
    }
    let mut total = 0.0;
    for &c in &present {
        total += one_vs_rest(c)?;
    }
    Ok(total / present.len() as f64)
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
