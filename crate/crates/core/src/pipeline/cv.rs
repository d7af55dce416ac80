use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{ClassLabel, FeatureTable};
use crate::shac::{
    run_shac, sample_uniform, HyperparamSample, ParamKind, ParamValue, SearchSpace, ShacConfig,
    ShacResult,
};

use super::{
    evaluate_weighted, make_folds, sample_d, train_pipeline, Hyperparams, MetricWeights, Metrics,
    ModelKind, PipelineOptions, D_PARAM,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub k: usize,
    pub weights: MetricWeights,
    pub options: PipelineOptions,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            k: 5,
            weights: MetricWeights::default(),
            options: PipelineOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub seed: u64,
    pub folds: Vec<Metrics>,
    /// Component-wise mean over folds; `weighted` recombines the means.
    pub mean: Metrics,
    /// Population standard deviation of the per-fold weighted scores.
    pub std_dev: f64,
    /// Out-of-fold prediction for every row, in table order.
    pub predictions: Vec<ClassLabel>,
}

impl CvReport {
    pub fn k(&self) -> usize {
        self.folds.len()
    }
}

/// k-fold cross-validation of one hyperparameter setting. Every fold is
/// trained with the same `seed`.
pub fn cross_validate(
    table: &FeatureTable,
    hp: &Hyperparams,
    seed: u64,
    settings: &EvalSettings,
) -> Result<CvReport> {
    settings.weights.validate()?;
    let x = table.features();
    let y = table.labels();
    let split = make_folds(&y, settings.k, seed)?;

    let fold_results = (0..split.k())
        .into_par_iter()
        .map(|f| {
            let train = split.train_indices(f);
            let tx: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
            let ty: Vec<usize> = train.iter().map(|&i| y[i]).collect();
            let model = train_pipeline(&tx, &ty, hp, seed, &settings.options)?;
            split.folds[f]
                .iter()
                .map(|&i| model.predict(&x[i]))
                .collect::<Result<Vec<ClassLabel>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let rows = table.rows();
    let mut predictions = vec![ClassLabel::Normal; rows.len()];
    let mut folds = Vec::with_capacity(split.k());
    for (held_out, pred) in split.folds.iter().zip(&fold_results) {
        let truth: Vec<ClassLabel> = held_out.iter().map(|&i| rows[i].label).collect();
        folds.push(evaluate_weighted(pred, &truth, &settings.weights)?);
        for (&i, &p) in held_out.iter().zip(pred) {
            predictions[i] = p;
        }
    }

    let k = folds.len() as f64;
    let avg = |f: fn(&Metrics) -> f64| folds.iter().map(f).sum::<f64>() / k;
    let (s, p, r) = (
        avg(|m| m.sensitivity),
        avg(|m| m.specificity),
        avg(|m| m.uar),
    );
    let mean = Metrics {
        sensitivity: s,
        specificity: p,
        uar: r,
        weighted: settings.weights.combine(s, p, r),
    };
    let mean_w = avg(|m| m.weighted);
    let std_dev = (folds
        .iter()
        .map(|m| (m.weighted - mean_w).powi(2))
        .sum::<f64>()
        / k)
        .sqrt();
    Ok(CvReport {
        seed,
        folds,
        mean,
        std_dev,
        predictions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    /// Index into the search history.
    pub history_index: usize,
    pub tune_score: f64,
    pub eval_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneOutcome {
    pub best: Hyperparams,
    pub best_sample: HyperparamSample,
    /// Weighted score of `best` on the evaluation folds.
    pub eval_score: f64,
    pub candidates: Vec<CandidateScore>,
    /// Coefficients per block the winner was scored with.
    pub d: usize,
    /// Set when no candidate cleared the screening rule and the best
    /// evaluated sample was used instead.
    pub fallback: bool,
    pub search: ShacResult,
}

impl TuneOutcome {
    /// Search history followed by the re-scored candidates.
    pub fn log(&self, space: &SearchSpace) -> String {
        let mut out = self.search.to_log(space);
        out.push_str(
            "# candidates rescored on evaluation folds\n# history_index,tune_score,eval_score\n",
        );
        for c in &self.candidates {
            out.push_str(&format!(
                "# {},{},{}\n",
                c.history_index, c.tune_score, c.eval_score
            ));
        }
        if self.fallback {
            out.push_str("# no candidate above mean + std; best evaluated sample used\n");
        }
        out
    }
}

/// Search `space` with SHAC, scoring each sample by cross-validation on
/// folds from `tune_seed`, then rescore the screened candidates on folds
/// from `eval_seed` and keep the best. Samples whose training fails score 0.
pub fn tune(
    table: &FeatureTable,
    kind: ModelKind,
    space: &SearchSpace,
    shac: &ShacConfig,
    settings: &EvalSettings,
    tune_seed: u64,
    eval_seed: u64,
) -> Result<TuneOutcome> {
    if tune_seed == eval_seed {
        return Err(Error::Config(
            "tuning and evaluation seeds must differ".into(),
        ));
    }
    settings.weights.validate()?;
    // surface space/kind mismatches before any evaluation
    let probe = sample_uniform(space, &mut ChaCha8Rng::seed_from_u64(0));
    Hyperparams::from_sample(kind, space, &probe)?;

    // one reduced table per grid value, built once
    let mut tables = BTreeMap::new();
    if let Some(i) = space.index_of(D_PARAM) {
        let ParamKind::Discrete(choices) = &space.params()[i].kind else {
            return Err(Error::Config(format!(
                "`{D_PARAM}` must be a discrete parameter"
            )));
        };
        for v in choices {
            let d = match v {
                ParamValue::Int(d) if *d > 0 => *d as usize,
                _ => {
                    return Err(Error::Config(format!(
                        "`{D_PARAM}` choices must be positive integers, got {v}"
                    )))
                }
            };
            if d > table.d() {
                return Err(Error::Config(format!(
                    "search grid asks for d = {d} but the features have d = {}; extract with --n-mfcc {d} or more",
                    table.d()
                )));
            }
            tables.insert(d, table.truncated(d)?);
        }
    }
    let table_for = |sample: &HyperparamSample| -> Result<&FeatureTable> {
        Ok(match sample_d(space, sample)? {
            Some(d) => &tables[&d],
            None => table,
        })
    };

    let score = |sample: &HyperparamSample, seed: u64| -> f64 {
        Hyperparams::from_sample(kind, space, sample)
            .and_then(|hp| cross_validate(table_for(sample)?, &hp, seed, settings))
            .map_or(0.0, |r| r.mean.weighted)
    };
    let search = run_shac(space, |s| score(s, tune_seed), shac, tune_seed)?;

    let fallback = search.candidates.is_empty();
    let pool: Vec<usize> = if fallback {
        let best = search.best_evaluated().expect("budget >= batch >= 1");
        vec![search
            .history
            .iter()
            .position(|r| std::ptr::eq(r, best))
            .expect("in history")]
    } else {
        search.candidates.clone()
    };
    let candidates: Vec<CandidateScore> = pool
        .par_iter()
        .map(|&i| {
            let rec = &search.history[i];
            CandidateScore {
                history_index: i,
                tune_score: rec.score,
                eval_score: score(&rec.sample, eval_seed),
            }
        })
        .collect();

    let winner = candidates.iter().fold(&candidates[0], |best, c| {
        if c.eval_score > best.eval_score {
            c
        } else {
            best
        }
    });
    let best_sample = search.history[winner.history_index].sample.clone();
    Ok(TuneOutcome {
        best: Hyperparams::from_sample(kind, space, &best_sample)?,
        d: table_for(&best_sample)?.d(),
        best_sample,
        eval_score: winner.eval_score,
        candidates,
        fallback,
        search,
    })
}
