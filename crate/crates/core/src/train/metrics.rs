use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::labeling::StanceLabel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    /// Missing when only one class is present.
    pub auc: Option<f64>,
    pub f1_positive: f64,
    pub f1_macro: f64,
}

/// Predicted positive when the score exceeds this.
pub const DECISION_THRESHOLD: f64 = 0.5;

fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Mann-Whitney rank statistic with tied scores sharing their average rank.
pub fn auc(scores: &[f64], gold: &[StanceLabel]) -> Option<f64> {
    let pos = gold.iter().filter(|g| **g == StanceLabel::Positive).count();
    let neg = gold.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let mean_rank = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            if gold[k] == StanceLabel::Positive {
                rank_sum += mean_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Some(u / (pos * neg) as f64)
}

/// `scores` are positive-class probabilities.
pub fn evaluate_metrics(scores: &[f64], gold: &[StanceLabel]) -> Result<Metrics, TrainError> {
    if scores.is_empty() || scores.len() != gold.len() {
        return Err(TrainError::Config(format!(
            "metrics need matching nonempty inputs, got {} scores and {} labels",
            scores.len(),
            gold.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(TrainError::NonFinite("prediction score".into()));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (s, g) in scores.iter().zip(gold) {
        match (*s > DECISION_THRESHOLD, *g == StanceLabel::Positive) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let f1_positive = f1(tp, fp, fn_);
    let f1_negative = f1(tn, fn_, fp);
    Ok(Metrics {
        accuracy: (tp + tn) as f64 / scores.len() as f64,
        auc: auc(scores, gold),
        f1_positive,
        f1_macro: (f1_positive + f1_negative) / 2.0,
    })
}
