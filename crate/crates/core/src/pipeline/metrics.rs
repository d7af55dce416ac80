//! Binary and four-class scores and their weighted combination.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::ClassLabel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricWeights {
    pub sensitivity: f64,
    pub specificity: f64,
    pub recall: f64,
}

impl Default for MetricWeights {
    fn default() -> Self {
        MetricWeights {
            sensitivity: 0.4,
            specificity: 0.2,
            recall: 0.4,
        }
    }
}

impl MetricWeights {
    pub fn validate(&self) -> Result<()> {
        let w = [self.sensitivity, self.specificity, self.recall];
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0))
            || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::Config(format!(
                "metric weights must be non-negative and sum to 1, got {w:?}"
            )));
        }
        Ok(())
    }

    pub fn combine(&self, sensitivity: f64, specificity: f64, uar: f64) -> f64 {
        self.sensitivity * sensitivity + self.specificity * specificity + self.recall * uar
    }
}

/// `0.4 * sensitivity + 0.2 * specificity + 0.4 * uar`.
pub fn weighted_score(sensitivity: f64, specificity: f64, uar: f64) -> f64 {
    MetricWeights::default().combine(sensitivity, specificity, uar)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Pathological recordings flagged as pathological.
    pub sensitivity: f64,
    /// Normal recordings kept as normal.
    pub specificity: f64,
    /// Unweighted average recall over the classes present in the truth.
    pub uar: f64,
    pub weighted: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn evaluate(pred: &[ClassLabel], truth: &[ClassLabel]) -> Result<Metrics> {
    evaluate_weighted(pred, truth, &MetricWeights::default())
}

/// Scores a four-class prediction. Sensitivity and specificity come from
/// collapsing the labels to normal vs pathological; an empty denominator
/// yields 0.
pub fn evaluate_weighted(
    pred: &[ClassLabel],
    truth: &[ClassLabel],
    weights: &MetricWeights,
) -> Result<Metrics> {
    if pred.len() != truth.len() {
        return Err(Error::arg(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::arg("cannot score an empty prediction"));
    }
    let (mut tp, mut fn_, mut tn, mut fp) = (0, 0, 0, 0);
    let mut hits = [0usize; ClassLabel::COUNT];
    let mut support = [0usize; ClassLabel::COUNT];
    for (&p, &t) in pred.iter().zip(truth) {
        match (t.is_pathological(), p.is_pathological()) {
            (true, true) => tp += 1,
            (true, false) => fn_ += 1,
            (false, false) => tn += 1,
            (false, true) => fp += 1,
        }
        support[t.code()] += 1;
        if p == t {
            hits[t.code()] += 1;
        }
    }
    let sensitivity = ratio(tp, tp + fn_);
    let specificity = ratio(tn, tn + fp);
    let recalls: Vec<f64> = (0..ClassLabel::COUNT)
        .filter(|&c| support[c] > 0)
        .map(|c| ratio(hits[c], support[c]))
        .collect();
    let uar = recalls.iter().sum::<f64>() / recalls.len() as f64;
    Ok(Metrics {
        sensitivity,
        specificity,
        uar,
        weighted: weights.combine(sensitivity, specificity, uar),
    })
}
