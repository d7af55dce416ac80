//! Sequential halving and classification (SHAC) hyperparameter search.
//!
//! Configurations are drawn uniformly from a [`SearchSpace`] in stages. After
//! each stage a binary classifier learns which of that stage's samples scored
//! at or above the stage median; later samples are only kept when every
//! classifier in the cascade accepts them. The final batch is screened with
//! the mean-plus-one-standard-deviation rule.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::{fit_gbt, GbtModel, GbtParams};

/// A discrete choice value. `Text` covers symbolic options such as `"none"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Text(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Real(v) => write!(f, "{v}"),
            ParamValue::Text(s) => f.write_str(s),
        }
    }
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(v) => Some(*v as f64),
            ParamValue::Real(v) => Some(*v),
            ParamValue::Text(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamKind {
    Discrete(Vec<ParamValue>),
    /// Continuous on `(lo, hi)`; samples are rounded to three decimals.
    Uniform {
        lo: f64,
        hi: f64,
    },
}

/// Table form: `{ name = "c", uniform = [0.0, 25.0] }` or
/// `{ name = "trees", choices = [10, 20] }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamSpecRepr {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    choices: Option<Vec<ParamValue>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    uniform: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamSpecRepr", into = "ParamSpecRepr")]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
}

impl TryFrom<ParamSpecRepr> for ParamSpec {
    type Error = String;

    fn try_from(r: ParamSpecRepr) -> std::result::Result<Self, String> {
        let kind = match (r.choices, r.uniform) {
            (Some(c), None) => ParamKind::Discrete(c),
            (None, Some([lo, hi])) => ParamKind::Uniform { lo, hi },
            _ => {
                return Err(format!(
                    "parameter `{}` needs exactly one of `choices` or `uniform`",
                    r.name
                ))
            }
        };
        Ok(ParamSpec { name: r.name, kind })
    }
}

impl From<ParamSpec> for ParamSpecRepr {
    fn from(p: ParamSpec) -> Self {
        match p.kind {
            ParamKind::Discrete(c) => ParamSpecRepr {
                name: p.name,
                choices: Some(c),
                uniform: None,
            },
            ParamKind::Uniform { lo, hi } => ParamSpecRepr {
                name: p.name,
                choices: None,
                uniform: Some([lo, hi]),
            },
        }
    }
}

impl ParamSpec {
    pub fn discrete(name: &str, values: Vec<ParamValue>) -> Self {
        ParamSpec {
            name: name.to_string(),
            kind: ParamKind::Discrete(values),
        }
    }

    pub fn uniform(name: &str, lo: f64, hi: f64) -> Self {
        ParamSpec {
            name: name.to_string(),
            kind: ParamKind::Uniform { lo, hi },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SearchSpace {
    params: Vec<ParamSpec>,
}

impl SearchSpace {
    pub fn new(params: Vec<ParamSpec>) -> Result<Self> {
        let space = SearchSpace { params };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.is_empty() {
            return Err(Error::Config("search space has no parameters".into()));
        }
        for (i, p) in self.params.iter().enumerate() {
            if self.params[..i].iter().any(|q| q.name == p.name) {
                return Err(Error::Config(format!(
                    "duplicate search parameter `{}`",
                    p.name
                )));
            }
            match &p.kind {
                ParamKind::Discrete(v) if v.is_empty() => {
                    return Err(Error::Config(format!(
                        "parameter `{}` has no choices",
                        p.name
                    )))
                }
                ParamKind::Uniform { lo, hi } if !(lo < hi && lo.is_finite() && hi.is_finite()) => {
                    return Err(Error::Config(format!(
                        "parameter `{}` needs finite lo < hi, got ({lo}, {hi})",
                        p.name
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn params(&self) -> &[ParamSpec] {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }
}

/// One configuration, aligned with the parameters of its space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperparamSample {
    pub values: Vec<ParamValue>,
    /// Classifier encoding: choice index for discrete parameters, the value
    /// itself for continuous ones.
    pub encoded: Vec<f64>,
}

impl HyperparamSample {
    pub fn get<'a>(&'a self, space: &SearchSpace, name: &str) -> Option<&'a ParamValue> {
        space.index_of(name).map(|i| &self.values[i])
    }
}

pub fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

/// Draw every parameter independently and uniformly.
pub fn sample_uniform<R: Rng>(space: &SearchSpace, rng: &mut R) -> HyperparamSample {
    let mut values = Vec::with_capacity(space.len());
    let mut encoded = Vec::with_capacity(space.len());
    for p in &space.params {
        match &p.kind {
            ParamKind::Discrete(choices) => {
                let i = rng.random_range(0..choices.len());
                values.push(choices[i].clone());
                encoded.push(i as f64);
            }
            ParamKind::Uniform { lo, hi } => {
                let v = round3(rng.random_range(*lo..*hi));
                values.push(ParamValue::Real(v));
                encoded.push(v);
            }
        }
    }
    HyperparamSample { values, encoded }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShacConfig {
    /// Hard cap on objective evaluations.
    pub budget: usize,
    /// Samples evaluated per stage (one classifier is trained per stage).
    pub batch: usize,
    pub max_classifiers: usize,
    /// Size of the batch screened by the mean + std rule.
    pub final_batch: usize,
    /// Rejection-sampling attempts per accepted sample.
    pub reject_cap: usize,
}

impl Default for ShacConfig {
    fn default() -> Self {
        ShacConfig {
            budget: 1000,
            batch: 100,
            max_classifiers: 10,
            final_batch: 100,
            reject_cap: 10_000,
        }
    }
}

impl ShacConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 {
            return Err(Error::Config("SHAC batch must be at least 1".into()));
        }
        if self.budget < self.batch {
            return Err(Error::Config(format!(
                "SHAC budget {} is smaller than one batch of {}",
                self.budget, self.batch
            )));
        }
        if self.max_classifiers == 0 || self.final_batch == 0 || self.reject_cap == 0 {
            return Err(Error::Config(
                "max_classifiers, final_batch and reject_cap must be positive".into(),
            ));
        }
        Ok(())
    }
}

fn cascade_params() -> GbtParams {
    GbtParams {
        n_estimators: 50,
        max_depth: 3,
        learning_rate: 0.3,
    }
}

/// Stage classifier: predicts whether a configuration lands at or above the
/// median score of the stage it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageClassifier {
    model: GbtModel,
}

impl StageClassifier {
    fn train(samples: &[&HyperparamSample], scores: &[f64]) -> Result<Self> {
        let median = median(scores);
        let x: Vec<Vec<f64>> = samples.iter().map(|s| s.encoded.clone()).collect();
        let y: Vec<usize> = scores.iter().map(|&s| usize::from(s >= median)).collect();
        Ok(StageClassifier {
            model: fit_gbt(&x, &y, 2, &cascade_params())?,
        })
    }

    pub fn prob_above(&self, sample: &HyperparamSample) -> f64 {
        self.model.predict_proba(&sample.encoded)[1]
    }

    pub fn accepts(&self, sample: &HyperparamSample) -> bool {
        self.prob_above(sample) > 0.5
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub stage: usize,
    pub sample: HyperparamSample,
    pub score: f64,
    /// False when rejection sampling ran out and the best-rejected draw was taken.
    pub accepted_by_cascade: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShacResult {
    pub history: Vec<EvalRecord>,
    pub cascade: Vec<StageClassifier>,
    /// History indices of the screened batch.
    pub final_batch: Vec<usize>,
    /// History indices whose score exceeds mean + std of the final batch, best first.
    pub candidates: Vec<usize>,
    /// True when the final batch is the last evaluated stage rather than a fresh draw.
    pub final_batch_reused: bool,
}

impl ShacResult {
    pub fn n_evaluations(&self) -> usize {
        self.history.len()
    }

    pub fn n_stages(&self) -> usize {
        self.history.iter().map(|r| r.stage + 1).max().unwrap_or(0)
    }

    pub fn stage_mean(&self, stage: usize) -> Option<f64> {
        let s: Vec<f64> = self
            .history
            .iter()
            .filter(|r| r.stage == stage)
            .map(|r| r.score)
            .collect();
        (!s.is_empty()).then(|| s.iter().sum::<f64>() / s.len() as f64)
    }

    /// Highest-scoring evaluation (earliest on ties).
    pub fn best_evaluated(&self) -> Option<&EvalRecord> {
        self.history
            .iter()
            .fold(None, |best: Option<&EvalRecord>, r| match best {
                Some(b) if b.score >= r.score => Some(b),
                _ => Some(r),
            })
    }

    /// Whether every classifier in the cascade accepts `sample`.
    pub fn cascade_accepts(&self, sample: &HyperparamSample) -> bool {
        self.cascade.iter().all(|c| c.accepts(sample))
    }

    /// Comma-separated search log: stage, parameter values, score, cascade flag.
    pub fn to_log(&self, space: &SearchSpace) -> String {
        let mut out = String::from("stage");
        for p in space.params() {
            out.push(',');
            out.push_str(&p.name);
        }
        out.push_str(",score,accepted_by_cascade,final_batch,candidate\n");
        for (i, r) in self.history.iter().enumerate() {
            out.push_str(&r.stage.to_string());
            for v in &r.sample.values {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push_str(&format!(
                ",{},{},{},{}\n",
                r.score,
                r.accepted_by_cascade,
                self.final_batch.contains(&i),
                self.candidates.contains(&i)
            ));
        }
        out
    }
}

/// Indices of scores strictly above `mean + std` (population std), best first.
pub fn select_candidates(scores: &[f64]) -> Result<Vec<usize>> {
    if scores.is_empty() {
        return Err(Error::arg("cannot select candidates from an empty batch"));
    }
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Ok(Vec::new());
    }
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let std = (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n).sqrt();
    let threshold = mean + std;
    let mut idx: Vec<usize> = (0..scores.len())
        .filter(|&i| scores[i] > threshold)
        .collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    Ok(idx)
}

/// Draw `count` samples accepted by the whole cascade. Each sample gets at
/// most `reject_cap` attempts; on exhaustion the attempt accepted by the most
/// classifiers (then highest summed probability) is taken and flagged.
fn draw_filtered<R: Rng>(
    space: &SearchSpace,
    cascade: &[StageClassifier],
    count: usize,
    reject_cap: usize,
    rng: &mut R,
) -> Vec<(HyperparamSample, bool)> {
    (0..count)
        .map(|_| {
            let mut best: Option<((usize, f64), HyperparamSample)> = None;
            for _ in 0..reject_cap {
                let s = sample_uniform(space, rng);
                let probs: Vec<f64> = cascade.iter().map(|c| c.prob_above(&s)).collect();
                let passed = probs.iter().filter(|&&p| p > 0.5).count();
                if passed == cascade.len() {
                    return (s, true);
                }
                let margin = (passed, probs.iter().sum::<f64>());
                let better = best
                    .as_ref()
                    .is_none_or(|(m, _)| margin.0 > m.0 || (margin.0 == m.0 && margin.1 > m.1));
                if better {
                    best = Some((margin, s));
                }
            }
            (best.expect("reject_cap >= 1").1, false)
        })
        .collect()
}

/// Run the search. `objective` must be deterministic; it is evaluated in
/// parallel within a stage but results are merged in draw order.
pub fn run_shac<F>(
    space: &SearchSpace,
    objective: F,
    cfg: &ShacConfig,
    seed: u64,
) -> Result<ShacResult>
where
    F: Fn(&HyperparamSample) -> f64 + Sync,
{
    space.validate()?;
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut history: Vec<EvalRecord> = Vec::new();
    let mut cascade: Vec<StageClassifier> = Vec::new();
    let mut last_stage: Vec<usize> = Vec::new();
    let mut stage = 0;

    let evaluate = |draws: Vec<(HyperparamSample, bool)>, stage: usize| -> Vec<EvalRecord> {
        let scores: Vec<f64> = draws.par_iter().map(|(s, _)| objective(s)).collect();
        draws
            .into_iter()
            .zip(scores)
            .map(|((sample, accepted_by_cascade), score)| EvalRecord {
                stage,
                sample,
                score,
                accepted_by_cascade,
            })
            .collect()
    };

    while history.len() + cfg.batch <= cfg.budget {
        let draws = draw_filtered(space, &cascade, cfg.batch, cfg.reject_cap, &mut rng);
        let records = evaluate(draws, stage);
        last_stage = (history.len()..history.len() + records.len()).collect();
        history.extend(records);
        stage += 1;

        let samples: Vec<&HyperparamSample> =
            last_stage.iter().map(|&i| &history[i].sample).collect();
        let scores: Vec<f64> = last_stage.iter().map(|&i| history[i].score).collect();
        cascade.push(StageClassifier::train(&samples, &scores)?);
        if cascade.len() >= cfg.max_classifiers {
            break;
        }
    }

    let remaining = cfg.budget - history.len();
    let (final_batch, final_batch_reused) = if remaining >= cfg.final_batch {
        let draws = draw_filtered(space, &cascade, cfg.final_batch, cfg.reject_cap, &mut rng);
        let records = evaluate(draws, stage);
        let idx = (history.len()..history.len() + records.len()).collect();
        history.extend(records);
        (idx, false)
    } else {
        (last_stage, true)
    };

    let final_scores: Vec<f64> = final_batch.iter().map(|&i| history[i].score).collect();
    let candidates = select_candidates(&final_scores)?
        .into_iter()
        .map(|k| final_batch[k])
        .collect();

    Ok(ShacResult {
        history,
        cascade,
        final_batch,
        candidates,
        final_batch_reused,
    })
}
