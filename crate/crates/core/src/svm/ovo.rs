//! One-vs-one multiclass composition of binary SVMs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{smo_train, BinarySvm, SvmParams};

/// Machine for the class pair `(positive, negative)`, `positive < negative`.
/// A positive decision value is a vote for `positive`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMachine {
    pub positive: usize,
    pub negative: usize,
    pub svm: BinarySvm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvoSvm {
    n_classes: usize,
    machines: Vec<PairMachine>,
    /// Pairs with no training samples for at least one side.
    skipped: Vec<(usize, usize)>,
}

/// Train one binary machine per unordered class pair in `0..n_classes`.
pub fn fit_ovo(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    params: &SvmParams,
) -> Result<OvoSvm> {
    if x.len() != y.len() {
        return Err(Error::arg(format!(
            "{} rows but {} labels",
            x.len(),
            y.len()
        )));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::arg(format!("label {bad} outside 0..{n_classes}")));
    }
    let mut counts = vec![0usize; n_classes];
    for &c in y {
        counts[c] += 1;
    }
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::arg("one-vs-one needs at least two classes present"));
    }

    let pairs: Vec<(usize, usize)> = (0..n_classes)
        .flat_map(|i| (i + 1..n_classes).map(move |j| (i, j)))
        .collect();
    let (trainable, skipped): (Vec<_>, Vec<_>) = pairs
        .into_iter()
        .partition(|&(i, j)| counts[i] > 0 && counts[j] > 0);

    let machines = trainable
        .into_par_iter()
        .map(|(i, j)| {
            let (xs, ys): (Vec<Vec<f64>>, Vec<i8>) = x
                .iter()
                .zip(y)
                .filter(|(_, &c)| c == i || c == j)
                .map(|(row, &c)| (row.clone(), if c == i { 1 } else { -1 }))
                .unzip();
            smo_train(&xs, &ys, params).map(|svm| PairMachine {
                positive: i,
                negative: j,
                svm,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(OvoSvm {
        n_classes,
        machines,
        skipped,
    })
}

impl OvoSvm {
    /// Majority vote over pairwise winners. Ties go to the class with the
    /// larger summed |decision| over the machines it won, then the lowest index.
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut votes = vec![0usize; self.n_classes];
        let mut confidence = vec![0.0f64; self.n_classes];
        for m in &self.machines {
            let d = m.svm.decision(x);
            let winner = if d > 0.0 { m.positive } else { m.negative };
            votes[winner] += 1;
            confidence[winner] += d.abs();
        }
        let mut best = 0;
        for c in 1..self.n_classes {
            let better = votes[c] > votes[best]
                || (votes[c] == votes[best] && confidence[c] > confidence[best]);
            if better {
                best = c;
            }
        }
        best
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn machines(&self) -> &[PairMachine] {
        &self.machines
    }

    pub fn skipped_pairs(&self) -> &[(usize, usize)] {
        &self.skipped
    }
}
