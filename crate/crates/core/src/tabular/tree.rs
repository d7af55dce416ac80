//! CART classification trees split on Gini impurity.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or unsplittable.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Features examined per split; `None` examines all of them.
    pub n_features_per_split: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_split: 2,
            n_features_per_split: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf {
        probs: Vec<f64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    n_classes: usize,
    n_features: usize,
    depth: usize,
    /// Total weighted Gini decrease per feature (unnormalized).
    impurity_decrease: Vec<f64>,
}

/// Sum-of-squares form of weighted Gini: `n * gini = n - sum(c^2) / n`.
fn weighted_gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let sq: f64 = counts.iter().map(|&c| (c * c) as f64).sum();
    n as f64 - sq / n as f64
}

struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct Builder<'a, R> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    params: TreeParams,
    rng: &'a mut R,
    nodes: Vec<Node>,
    depth: usize,
    importance: Vec<f64>,
}

impl<R: Rng> Builder<'_, R> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &i in idx {
            c[self.y[i]] += 1;
        }
        c
    }

    fn leaf(&mut self, counts: &[usize], n: usize) -> usize {
        let probs = counts.iter().map(|&c| c as f64 / n as f64).collect();
        self.nodes.push(Node::Leaf { probs });
        self.nodes.len() - 1
    }

    /// Best threshold on one feature; strict improvement keeps the lowest threshold on ties.
    fn best_on_feature(&self, idx: &[usize], feature: usize, parent: f64) -> Option<Candidate> {
        let mut order: Vec<(f64, usize)> = idx
            .iter()
            .map(|&i| (self.x[i][feature], self.y[i]))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = order.len();
        let mut left = vec![0usize; self.n_classes];
        let mut right = vec![0usize; self.n_classes];
        for &(_, c) in &order {
            right[c] += 1;
        }
        let mut best: Option<Candidate> = None;
        for i in 0..n - 1 {
            let c = order[i].1;
            left[c] += 1;
            right[c] -= 1;
            let (lo, hi) = (order[i].0, order[i + 1].0);
            if lo >= hi {
                continue;
            }
            let nl = i + 1;
            let gain = parent - weighted_gini(&left, nl) - weighted_gini(&right, n - nl);
            if best.as_ref().is_none_or(|b| gain > b.gain) {
                let mut threshold = 0.5 * (lo + hi);
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some(Candidate {
                    feature,
                    threshold,
                    gain,
                });
            }
        }
        best
    }

    fn best_split(&mut self, idx: &[usize], parent: f64) -> Option<Candidate> {
        let m = self.x[0].len();
        let k = self.params.n_features_per_split.unwrap_or(m).clamp(1, m);
        let mut features: Vec<usize> = (0..m).collect();
        let (mut first, mut rest) = if k < m {
            features.shuffle(self.rng);
            let rest = features.split_off(k);
            (features, rest)
        } else {
            (features, Vec::new())
        };
        first.sort_unstable();
        rest.sort_unstable();

        let scan = |feats: &[usize]| {
            let mut best: Option<Candidate> = None;
            for &f in feats {
                if let Some(c) = self.best_on_feature(idx, f, parent) {
                    if best.as_ref().is_none_or(|b| c.gain > b.gain) {
                        best = Some(c);
                    }
                }
            }
            best
        };
        // Sampled features that are all constant here fall through to the rest.
        scan(&first).or_else(|| scan(&rest))
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        self.depth = self.depth.max(depth);
        let n = idx.len();
        let counts = self.counts(&idx);
        let parent = weighted_gini(&counts, n);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_capped || n < self.params.min_samples_split.max(2) {
            return self.leaf(&counts, n);
        }
        let Some(split) = self.best_split(&idx, parent) else {
            return self.leaf(&counts, n);
        };
        self.importance[split.feature] += split.gain;

        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.x[i][split.feature] <= split.threshold);
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { probs: Vec::new() });
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[slot] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        slot
    }
}

pub(crate) fn check_xy(x: &[Vec<f64>], y: &[usize], n_classes: usize) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::arg("training matrix is empty"));
    }
    if x.len() != y.len() {
        return Err(Error::arg(format!(
            "{} rows but {} labels",
            x.len(),
            y.len()
        )));
    }
    let m = x[0].len();
    if m == 0 || x.iter().any(|r| r.len() != m) {
        return Err(Error::arg("training rows must share a non-zero width"));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::arg(format!("label {bad} outside 0..{n_classes}")));
    }
    Ok(m)
}

/// Fit a classification tree on the rows listed in `sample` (duplicates allowed).
pub(crate) fn fit_tree_on<R: Rng>(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    sample: Vec<usize>,
    params: &TreeParams,
    rng: &mut R,
) -> DecisionTree {
    let m = x[0].len();
    let mut b = Builder {
        x,
        y,
        n_classes,
        params: *params,
        rng,
        nodes: Vec::new(),
        depth: 0,
        importance: vec![0.0; m],
    };
    b.grow(sample, 0);
    DecisionTree {
        nodes: b.nodes,
        n_classes,
        n_features: m,
        depth: b.depth,
        impurity_decrease: b.importance,
    }
}

/// Fit a CART tree on all rows of `x`; labels must lie in `0..n_classes`.
pub fn fit_tree<R: Rng>(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    params: &TreeParams,
    rng: &mut R,
) -> Result<DecisionTree> {
    check_xy(x, y, n_classes)?;
    Ok(fit_tree_on(
        x,
        y,
        n_classes,
        (0..x.len()).collect(),
        params,
        rng,
    ))
}

impl DecisionTree {
    pub fn predict_proba(&self, row: &[f64]) -> &[f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { probs } => return probs,
                Node::Split {
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

    /// Most probable class; ties go to the lowest index.
    pub fn predict(&self, row: &[f64]) -> usize {
        argmax(self.predict_proba(row))
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Root split as `(feature, threshold)`, if the root is not a leaf.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match &self.nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => Some((*feature, *threshold)),
            Node::Leaf { .. } => None,
        }
    }

    /// Per-feature Gini decrease normalized to sum 1; all zero for a stump-less tree.
    pub fn feature_importances(&self) -> Vec<f64> {
        let total: f64 = self.impurity_decrease.iter().sum();
        if total > 0.0 {
            self.impurity_decrease.iter().map(|v| v / total).collect()
        } else {
            vec![0.0; self.n_features]
        }
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in v.iter().enumerate() {
        if p > v[best] {
            best = i;
        }
    }
    best
}
