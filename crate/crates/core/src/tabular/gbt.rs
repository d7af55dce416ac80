//! Multiclass gradient-boosted trees with a softmax cross-entropy objective.
//!
//! Each round fits one regression tree per class to the gradient/Hessian
//! pair of the softmax loss; leaves take the Newton weight `-G / (H + lambda)`
//! and are shrunk by the learning rate. If a round would raise the training
//! loss its contribution is halved until it does not.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::tree::{argmax, check_xy};

const LAMBDA: f64 = 1.0;
const MIN_CHILD_WEIGHT: f64 = 1.0;
const MIN_HESSIAN: f64 = 1e-16;
const MAX_BACKTRACK: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            n_estimators: 100,
            max_depth: 6,
            learning_rate: 0.1,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::arg("n_estimators must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::arg(format!(
                "learning_rate must be a positive real, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum RegNode {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RegTree {
    nodes: Vec<RegNode>,
}

impl RegTree {
    fn eval(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                RegNode::Leaf(v) => return *v,
                RegNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    fn scale(&mut self, s: f64) {
        for n in &mut self.nodes {
            if let RegNode::Leaf(v) = n {
                *v *= s;
            }
        }
    }
}

struct RegBuilder<'a> {
    x: &'a [Vec<f64>],
    g: &'a [f64],
    h: &'a [f64],
    max_depth: usize,
    shrink: f64,
    nodes: Vec<RegNode>,
}

fn score(g: f64, h: f64) -> f64 {
    g * g / (h + LAMBDA)
}

impl RegBuilder<'_> {
    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let gs: f64 = idx.iter().map(|&i| self.g[i]).sum();
        let hs: f64 = idx.iter().map(|&i| self.h[i]).sum();
        let split = if depth < self.max_depth && idx.len() >= 2 {
            self.best_split(&idx, gs, hs)
        } else {
            None
        };
        let Some((feature, threshold)) = split else {
            self.nodes
                .push(RegNode::Leaf(-self.shrink * gs / (hs + LAMBDA)));
            return self.nodes.len() - 1;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.x[i][feature] <= threshold);
        let slot = self.nodes.len();
        self.nodes.push(RegNode::Leaf(0.0));
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[slot] = RegNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        slot
    }

    fn best_split(&self, idx: &[usize], gs: f64, hs: f64) -> Option<(usize, f64)> {
        let parent = score(gs, hs);
        let m = self.x[0].len();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = idx.to_vec();
        for f in 0..m {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let (mut gl, mut hl) = (0.0, 0.0);
            for w in 0..order.len() - 1 {
                let i = order[w];
                gl += self.g[i];
                hl += self.h[i];
                let (lo, hi) = (self.x[i][f], self.x[order[w + 1]][f]);
                if lo >= hi {
                    continue;
                }
                let hr = hs - hl;
                if hl < MIN_CHILD_WEIGHT || hr < MIN_CHILD_WEIGHT {
                    continue;
                }
                let gain = 0.5 * (score(gl, hl) + score(gs - gl, hr) - parent);
                if gain > 1e-12 && best.is_none_or(|b| gain > b.0) {
                    let mut thr = 0.5 * (lo + hi);
                    if thr >= hi {
                        thr = lo;
                    }
                    best = Some((gain, f, thr));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

/// Fitted booster. Class indices outside the training labels get probability 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    n_classes: usize,
    /// Distinct training labels; output slot `k` of the softmax maps to `classes[k]`.
    classes: Vec<usize>,
    /// `rounds[t][k]` is the tree for `classes[k]` in round `t`.
    rounds: Vec<Vec<RegTree>>,
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn mean_log_loss(margins: &[Vec<f64>], target: &[usize]) -> f64 {
    let total: f64 = margins
        .iter()
        .zip(target)
        .map(|(f, &t)| {
            let max = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + f.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
            lse - f[t]
        })
        .sum();
    total / margins.len() as f64
}

/// Train and also return the mean training log-loss after every round
/// (entry 0 is the loss of the initial uniform model).
pub fn fit_gbt_traced(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    params: &GbtParams,
) -> Result<(GbtModel, Vec<f64>)> {
    params.validate()?;
    check_xy(x, y, n_classes)?;
    let mut classes: Vec<usize> = y.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let k = classes.len();
    let target: Vec<usize> = y
        .iter()
        .map(|c| classes.binary_search(c).expect("label present"))
        .collect();

    if k == 1 {
        let model = GbtModel {
            n_classes,
            classes,
            rounds: Vec::new(),
        };
        return Ok((model, vec![0.0]));
    }

    let n = x.len();
    let mut margins = vec![vec![0.0; k]; n];
    let mut trace = vec![mean_log_loss(&margins, &target)];
    let mut rounds = Vec::with_capacity(params.n_estimators);
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];

    for _ in 0..params.n_estimators {
        let probs: Vec<Vec<f64>> = margins.iter().map(|f| softmax(f)).collect();
        let mut trees = Vec::with_capacity(k);
        for c in 0..k {
            for i in 0..n {
                let p = probs[i][c];
                g[i] = p - if target[i] == c { 1.0 } else { 0.0 };
                h[i] = (2.0 * p * (1.0 - p)).max(MIN_HESSIAN);
            }
            let mut b = RegBuilder {
                x,
                g: &g,
                h: &h,
                max_depth: params.max_depth,
                shrink: params.learning_rate,
                nodes: Vec::new(),
            };
            b.grow((0..n).collect(), 0);
            trees.push(RegTree { nodes: b.nodes });
        }

        let step: Vec<Vec<f64>> = x
            .iter()
            .map(|row| trees.iter().map(|t| t.eval(row)).collect())
            .collect();
        let current = *trace.last().unwrap();
        let mut factor = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACK {
            let trial: Vec<Vec<f64>> = margins
                .iter()
                .zip(&step)
                .map(|(f, d)| f.iter().zip(d).map(|(a, b)| a + factor * b).collect())
                .collect();
            let loss = mean_log_loss(&trial, &target);
            if loss <= current {
                accepted = Some((trial, loss));
                break;
            }
            factor *= 0.5;
        }
        match accepted {
            Some((trial, loss)) => {
                if factor != 1.0 {
                    trees.iter_mut().for_each(|t| t.scale(factor));
                }
                margins = trial;
                trace.push(loss);
            }
            None => {
                trees.iter_mut().for_each(|t| t.scale(0.0));
                trace.push(current);
            }
        }
        rounds.push(trees);
    }

    Ok((
        GbtModel {
            n_classes,
            classes,
            rounds,
        },
        trace,
    ))
}

pub fn fit_gbt(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    params: &GbtParams,
) -> Result<GbtModel> {
    fit_gbt_traced(x, y, n_classes, params).map(|(m, _)| m)
}

impl GbtModel {
    /// Class probabilities over `0..n_classes`.
    pub fn predict_proba(&self, row: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_classes];
        if self.classes.len() == 1 {
            out[self.classes[0]] = 1.0;
            return out;
        }
        let mut scores = vec![0.0; self.classes.len()];
        for round in &self.rounds {
            for (s, t) in scores.iter_mut().zip(round) {
                *s += t.eval(row);
            }
        }
        for (c, p) in self.classes.iter().zip(softmax(&scores)) {
            out[*c] = p;
        }
        out
    }

    pub fn predict(&self, row: &[f64]) -> usize {
        argmax(&self.predict_proba(row))
    }

    pub fn n_rounds(&self) -> usize {
        self.rounds.len()
    }
}
