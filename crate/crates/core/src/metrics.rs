//! Threshold metrics and rank-based ROC-AUC.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
    pub threshold: f64,
    pub n_pos: u64,
    pub n_neg: u64,
}

fn check_lengths(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Input(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(l) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::Input(format!("label {l} is not binary")));
    }
    Ok(())
}

/// Predicts BAD iff `prob >= threshold`.
pub fn confusion(probs: &[f64], labels: &[u8], threshold: f64) -> Result<Confusion> {
    check_lengths(probs, labels)?;
    let mut c = Confusion::default();
    for (&p, &y) in probs.iter().zip(labels) {
        match (p >= threshold, y == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Accuracy, precision, recall and F1 with 0/0 taken as 0.
pub fn prf1(c: &Confusion) -> Result<Rates> {
    let total = c.total();
    if total == 0 {
        return Err(Error::Input("confusion matrix is empty".into()));
    }
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Rates {
        accuracy: ratio(c.tp + c.tn, total),
        precision,
        recall,
        f1,
    })
}

/// AUC as an exact ratio `numerator / denominator`, both doubled so that
/// half-counted ties stay integral: the numerator is `2 * U` of the
/// Mann-Whitney statistic and the denominator `2 * n_pos * n_neg`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AucRatio {
    pub numerator: u128,
    pub denominator: u128,
}

impl AucRatio {
    pub fn value(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }
}

/// Mann-Whitney U from average ranks, O(n log n).
pub fn roc_auc_ratio(scores: &[f64], labels: &[u8]) -> Result<AucRatio> {
    check_lengths(scores, labels)?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Evaluation("scores contain NaN".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count() as u128;
    let n_neg = labels.len() as u128 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Evaluation(
            "AUC is undefined when only one class is present".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sum over positives of twice their (1-based, tie-averaged) rank.
    let mut twice_rank_sum: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // Ranks start+1 ..= end share the average (start + 1 + end) / 2.
        let pos_in_group = order[start..end].iter().filter(|&&i| labels[i] == 1).count() as u128;
        twice_rank_sum += pos_in_group * (start as u128 + 1 + end as u128);
        start = end;
    }
    Ok(AucRatio {
        numerator: twice_rank_sum - n_pos * (n_pos + 1),
        denominator: 2 * n_pos * n_neg,
    })
}

pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    roc_auc_ratio(scores, labels).map(|r| r.value())
}

pub fn evaluate(probs: &[f64], labels: &[u8], threshold: f64) -> Result<MetricsReport> {
    let c = confusion(probs, labels, threshold)?;
    let rates = prf1(&c)?;
    let auc = roc_auc(probs, labels)?;
    let n_pos = labels.iter().filter(|&&l| l == 1).count() as u64;
    Ok(MetricsReport {
        tp: c.tp,
        fp: c.fp,
        tn: c.tn,
        fn_: c.fn_,
        accuracy: rates.accuracy,
        precision: rates.precision,
        recall: rates.recall,
        f1: rates.f1,
        auc,
        threshold,
        n_pos,
        n_neg: labels.len() as u64 - n_pos,
    })
}

/// Restricts `values` to positions where `mask` is set.
pub fn masked<T: Copy>(values: &[T], mask: &[bool]) -> Vec<T> {
    values
        .iter()
        .zip(mask)
        .filter_map(|(v, &m)| m.then_some(*v))
        .collect()
}
