use thiserror::Error;

use crate::ruledsl::FeatureMatrix;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DiversityError {
    #[error("need at least two trials with rules, got {0}")]
    TooFewTrials(usize),
    #[error("trial matrices cover different rows")]
    RowMismatch,
}

/// Pearson correlation; zero when either column is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    if a.is_empty() {
        return 0.0;
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

/// Maximum-weight assignment of rows to distinct columns. Returns, for each
/// row, its column; requires `rows <= cols`.
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> Vec<usize> {
    let n = weights.len();
    if n == 0 {
        return Vec::new();
    }
    let m = weights[0].len();
    assert!(n <= m, "assignment needs rows <= cols");
    // shortest augmenting path with potentials, minimizing negated weights
    let cost = |i: usize, j: usize| -weights[i - 1][j - 1];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=m {
        if owner[j] != 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Mean absolute correlation over the best one-to-one pairing of the two
/// trials' rule columns.
pub fn matched_correlation(a: &FeatureMatrix, b: &FeatureMatrix) -> f64 {
    let (small, large) = if a.num_rules <= b.num_rules { (a, b) } else { (b, a) };
    if small.num_rules == 0 {
        return 0.0;
    }
    let cols_s: Vec<Vec<f64>> = (0..small.num_rules).map(|j| small.column(j)).collect();
    let cols_l: Vec<Vec<f64>> = (0..large.num_rules).map(|j| large.column(j)).collect();
    let weights: Vec<Vec<f64>> = cols_s
        .iter()
        .map(|x| cols_l.iter().map(|y| pearson(x, y).abs()).collect())
        .collect();
    let assignment = max_weight_assignment(&weights);
    let total: f64 = assignment.iter().enumerate().map(|(i, &j)| weights[i][j]).sum();
    total / small.num_rules as f64
}

/// Mean and population variance of the matched correlation over every pair of
/// trials. Each matrix holds all of one trial's rules over the same rows.
pub fn rule_diversity(trials: &[FeatureMatrix]) -> Result<(f64, f64), DiversityError> {
    let usable: Vec<&FeatureMatrix> = trials.iter().filter(|m| m.num_rules > 0).collect();
    if usable.len() < 2 {
        return Err(DiversityError::TooFewTrials(usable.len()));
    }
    let rows = usable[0].num_rows();
    if usable.iter().any(|m| m.num_rows() != rows) {
        return Err(DiversityError::RowMismatch);
    }
    let mut scores = Vec::new();
    for i in 0..usable.len() {
        for j in i + 1..usable.len() {
            scores.push(matched_correlation(usable[i], usable[j]));
        }
    }
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_column_has_zero_correlation() {
        assert_eq!(pearson(&[1.0, 1.0, 1.0], &[0.0, 1.0, 0.0]), 0.0);
        assert!((pearson(&[0.0, 1.0, 2.0], &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn assignment_small() {
        let w = vec![vec![1.0, 9.0, 2.0], vec![8.0, 7.0, 1.0], vec![3.0, 4.0, 6.0]];
        assert_eq!(max_weight_assignment(&w), vec![1, 0, 2]);
        let rect = vec![vec![1.0, 5.0, 3.0]];
        assert_eq!(max_weight_assignment(&rect), vec![1]);
    }

    #[test]
    fn identical_trials() {
        let m = FeatureMatrix::from_values(
            "t",
            vec![vec![1.0, 0.0], vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]],
            2,
        );
        let (mean, var) = rule_diversity(&[m.clone(), m.clone(), m]).unwrap();
        assert!((mean - 1.0).abs() < 1e-12);
        assert!(var.abs() < 1e-20);
    }

    #[test]
    fn needs_two_trials() {
        let m = FeatureMatrix::from_values("t", vec![vec![1.0]], 1);
        assert_eq!(rule_diversity(&[m]), Err(DiversityError::TooFewTrials(1)));
    }
}
