//! Evaluation metrics over model predictions.
//!
//! Classification: accuracy, AUC-ROC (Mann–Whitney rank statistic with
//! tie midranks), F1 on the argmax, and average precision by step
//! integration of the precision-recall curve. Binary tasks score class 1
//! as the positive class; wider tasks macro-average one-vs-rest over the
//! classes present in the label set. Regression: MAE and MSE.

use serde::{Deserialize, Serialize};

use crate::dataset::{Label, TaskKind};
use crate::error::{Error, Result};
use crate::gat::Prediction;

/// One evaluation's worth of metrics. Fields that do not apply to the
/// task — or that are undefined on the given labels, like AUC over a
/// single class — hold `None` and serialize as JSON null.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: Option<f64>,
    pub auc_roc: Option<f64>,
    pub f1: Option<f64>,
    pub average_precision: Option<f64>,
    pub mae: Option<f64>,
    pub mse: Option<f64>,
}

/// Compute the metric set appropriate to the task.
pub fn compute_metrics(
    predictions: &[Prediction],
    labels: &[Label],
    task: TaskKind,
) -> Result<MetricSet> {
    if predictions.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "one prediction per label".into(),
            expected: labels.len(),
            got: predictions.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::Config("metrics need at least one prediction".into()));
    }
    match task {
        TaskKind::Classification => classification_metrics(predictions, labels),
        TaskKind::Regression => regression_metrics(predictions, labels),
    }
}

fn classification_metrics(predictions: &[Prediction], labels: &[Label]) -> Result<MetricSet> {
    let mut probs: Vec<&[f64]> = Vec::with_capacity(predictions.len());
    let mut classes: Vec<usize> = Vec::with_capacity(labels.len());
    for (p, l) in predictions.iter().zip(labels) {
        let row = match p {
            Prediction::Classification(row) => row.as_slice(),
            Prediction::Regression(_) => {
                return Err(Error::Schema(
                    "classification metrics got a regression prediction".into(),
                ))
            }
        };
        let c = l.class().ok_or_else(|| {
            Error::Schema("classification metrics got a numeric label".into())
        })?;
        probs.push(row);
        classes.push(c);
    }
    let width = probs[0].len();
    for row in &probs {
        if row.len() != width {
            return Err(Error::DimensionMismatch {
                context: "probability vector width".into(),
                expected: width,
                got: row.len(),
            });
        }
    }
    if let Some(&c) = classes.iter().find(|&&c| c >= width) {
        return Err(Error::Schema(format!(
            "label class {c} outside the {width}-wide probability vectors"
        )));
    }

    let predicted: Vec<usize> = probs.iter().map(|row| argmax(row)).collect();
    let hits = predicted
        .iter()
        .zip(&classes)
        .filter(|(p, l)| p == l)
        .count();
    let accuracy = hits as f64 / classes.len() as f64;

    let mut present: Vec<usize> = classes.to_vec();
    present.sort_unstable();
    present.dedup();

    let auc_roc = if present.len() < 2 {
        log::warn!("labels contain a single class; AUC-ROC is undefined");
        None
    } else if width == 2 {
        let scores: Vec<f64> = probs.iter().map(|row| row[1]).collect();
        let positive: Vec<bool> = classes.iter().map(|&c| c == 1).collect();
        binary_auc(&scores, &positive)
    } else {
        // Macro one-vs-rest over present classes; each has at least one
        // positive, and >= 2 present classes guarantees negatives.
        let mut sum = 0.0;
        for &c in &present {
            let scores: Vec<f64> = probs.iter().map(|row| row[c]).collect();
            let positive: Vec<bool> = classes.iter().map(|&l| l == c).collect();
            sum += binary_auc(&scores, &positive).expect("both outcomes present");
        }
        Some(sum / present.len() as f64)
    };

    let f1 = if width == 2 {
        Some(f1_for_class(&predicted, &classes, 1))
    } else {
        let sum: f64 = present
            .iter()
            .map(|&c| f1_for_class(&predicted, &classes, c))
            .sum();
        Some(sum / present.len() as f64)
    };

    let average_precision = if width == 2 {
        let scores: Vec<f64> = probs.iter().map(|row| row[1]).collect();
        let positive: Vec<bool> = classes.iter().map(|&c| c == 1).collect();
        let ap = average_precision(&scores, &positive);
        if ap.is_none() {
            log::warn!("no positive labels; average precision is undefined");
        }
        ap
    } else {
        let mut sum = 0.0;
        for &c in &present {
            let scores: Vec<f64> = probs.iter().map(|row| row[c]).collect();
            let positive: Vec<bool> = classes.iter().map(|&l| l == c).collect();
            sum += average_precision(&scores, &positive).expect("class is present");
        }
        Some(sum / present.len() as f64)
    };

    Ok(MetricSet {
        accuracy: Some(accuracy),
        auc_roc,
        f1,
        average_precision,
        mae: None,
        mse: None,
    })
}

fn regression_metrics(predictions: &[Prediction], labels: &[Label]) -> Result<MetricSet> {
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    for (p, l) in predictions.iter().zip(labels) {
        let v = match p {
            Prediction::Regression(v) => *v,
            Prediction::Classification(_) => {
                return Err(Error::Schema(
                    "regression metrics got a classification prediction".into(),
                ))
            }
        };
        let y = l
            .value()
            .ok_or_else(|| Error::Schema("regression metrics got a class label".into()))?;
        let err = v - y;
        abs_sum += err.abs();
        sq_sum += err * err;
    }
    let n = predictions.len() as f64;
    Ok(MetricSet {
        mae: Some(abs_sum / n),
        mse: Some(sq_sum / n),
        ..MetricSet::default()
    })
}

fn argmax(row: &[f64]) -> usize {
    row.iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| a.total_cmp(b))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// AUC-ROC via the Mann–Whitney U statistic with midranks for ties.
/// None when either outcome is absent.
pub fn binary_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share their average.
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = mid;
        }
        i = j + 1;
    }
    let rank_sum: f64 = ranks
        .iter()
        .zip(positive)
        .filter(|(_, &p)| p)
        .map(|(&r, _)| r)
        .sum();
    let np = n_pos as f64;
    Some((rank_sum - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}

/// Average precision by step integration: recall increases by 1/P at each
/// positive in score order (descending, index ascending on ties), and the
/// precision at that point is weighed in. None with zero positives.
pub fn average_precision(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count();
    if n_pos == 0 {
        return None;
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut tp = 0usize;
    let mut ap = 0.0;
    for (k, &i) in idx.iter().enumerate() {
        if positive[i] {
            tp += 1;
            ap += tp as f64 / (k + 1) as f64;
        }
    }
    Some(ap / n_pos as f64)
}

/// F1 of one class over argmax predictions; 0 when the class is never
/// predicted nor present.
fn f1_for_class(predicted: &[usize], labels: &[usize], class: usize) -> f64 {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&p, &l) in predicted.iter().zip(labels) {
        match (p == class, l == class) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}
