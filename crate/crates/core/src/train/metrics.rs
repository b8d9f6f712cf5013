use thiserror::Error;

use crate::model::TaskType;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("no values to score")]
    Empty,
    #[error("length mismatch: {0} predictions vs {1} labels")]
    LengthMismatch(usize, usize),
    #[error("labels contain a single class")]
    SingleClass,
}

/// Root mean squared error.
pub fn rmse(preds: &[f64], labels: &[f64]) -> Result<f64, MetricError> {
    if preds.len() != labels.len() {
        return Err(MetricError::LengthMismatch(preds.len(), labels.len()));
    }
    if preds.is_empty() {
        return Err(MetricError::Empty);
    }
    let sse: f64 = preds.iter().zip(labels).map(|(p, y)| (p - y) * (p - y)).sum();
    Ok((sse / preds.len() as f64).sqrt())
}

/// Area under the ROC curve from average ranks (Mann-Whitney U), so tied
/// scores count one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch(scores.len(), labels.len()));
    }
    if scores.is_empty() {
        return Err(MetricError::Empty);
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // sum of 1-based ranks of positives, ties sharing their mean rank
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mean_rank = (i + j) as f64 / 2.0 + 1.0;
        let positives = order[i..=j].iter().filter(|&&k| labels[k]).count();
        pos_rank_sum += mean_rank * positives as f64;
        i = j + 1;
    }
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos * n_neg) as f64)
}

/// Per-task metric over rows of predictions with optional labels.
/// Classification averages ROC-AUC over tasks having both classes;
/// regression averages per-task RMSE over tasks with any label.
pub fn task_metric(task: TaskType, preds: &[Vec<f64>], labels: &[Vec<Option<f64>>]) -> Result<f64, MetricError> {
    if preds.len() != labels.len() {
        return Err(MetricError::LengthMismatch(preds.len(), labels.len()));
    }
    let n_tasks = labels.first().map_or(0, Vec::len);
    let mut values = Vec::new();
    let mut single_class = false;
    for t in 0..n_tasks {
        let (p, y): (Vec<f64>, Vec<f64>) = preds
            .iter()
            .zip(labels)
            .filter_map(|(p, l)| l[t].map(|y| (p[t], y)))
            .unzip();
        if p.is_empty() {
            continue;
        }
        match task {
            TaskType::Regression => values.push(rmse(&p, &y)?),
            TaskType::Classification => {
                let y: Vec<bool> = y.iter().map(|&v| v > 0.5).collect();
                match roc_auc(&p, &y) {
                    Ok(v) => values.push(v),
                    Err(MetricError::SingleClass) => single_class = true,
                    Err(e) => return Err(e),
                }
            }
        }
    }
    if values.is_empty() {
        return Err(if single_class { MetricError::SingleClass } else { MetricError::Empty });
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// True when `a` is a strictly better score than `b`.
pub fn improves(task: TaskType, a: f64, b: f64) -> bool {
    match task {
        TaskType::Regression => a < b,
        TaskType::Classification => a > b,
    }
}

pub fn metric_name(task: TaskType) -> &'static str {
    match task {
        TaskType::Regression => "rmse",
        TaskType::Classification => "roc_auc",
    }
}

/// Mean and sample standard deviation; the deviation of one value is 0.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_auc(scores: &[f64], labels: &[bool]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li && !lj {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        wins += 1.0;
                    } else if scores[i] == scores[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]), Ok(1.0));
        assert_eq!(roc_auc(&[0.3; 4], &[false, true, false, true]), Ok(0.5));
        assert_eq!(roc_auc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]), Ok(0.75));
        assert_eq!(roc_auc(&[0.1, 0.4], &[true, true]), Err(MetricError::SingleClass));
        assert_eq!(roc_auc(&[], &[]), Err(MetricError::Empty));
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]), Ok(0.0));
        assert!((rmse(&[1.5, 2.5, -0.5], &[1.0, 2.0, -1.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!((rmse(&[1.0, 2.0], &[0.0, 0.0]).unwrap() - 2.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(rmse(&[], &[]), Err(MetricError::Empty));
        assert_eq!(rmse(&[1.0], &[]), Err(MetricError::LengthMismatch(1, 0)));
    }

    #[test]
    fn multitask_skips_single_class_tasks() {
        let preds = vec![vec![0.9, 0.1], vec![0.2, 0.5], vec![0.4, 0.3]];
        let labels = vec![vec![Some(1.0), Some(0.0)], vec![Some(0.0), Some(0.0)], vec![Some(0.0), None]];
        assert_eq!(task_metric(TaskType::Classification, &preds, &labels), Ok(1.0));
        let labels = vec![vec![Some(1.0), None]; 3];
        assert_eq!(task_metric(TaskType::Classification, &preds, &labels), Err(MetricError::SingleClass));
    }

    #[test]
    fn seed_statistics() {
        let (m, s) = mean_std(&[0.6, 0.7, 0.8]).unwrap();
        assert!((m - 0.7).abs() < 1e-12);
        assert!((s - 0.1).abs() < 1e-12);
        assert_eq!(mean_std(&[0.42]), Some((0.42, 0.0)));
        let (m2, s2) = mean_std(&[0.8, 0.6, 0.7]).unwrap();
        assert!((m - m2).abs() < 1e-15 && (s - s2).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn auc_matches_all_pairs(
            data in prop::collection::vec((0u8..6, any::<bool>()), 2..200)
        ) {
            let scores: Vec<f64> = data.iter().map(|d| d.0 as f64 / 4.0).collect();
            let labels: Vec<bool> = data.iter().map(|d| d.1).collect();
            match roc_auc(&scores, &labels) {
                Ok(v) => prop_assert!((v - brute_auc(&scores, &labels)).abs() < 1e-12),
                Err(e) => prop_assert_eq!(e, MetricError::SingleClass),
            }
        }
    }
}
