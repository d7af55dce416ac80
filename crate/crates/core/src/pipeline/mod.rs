//! The proposed model (random-forest feature selection feeding a one-vs-one
//! RBF SVM), the gradient-boosted baseline, cross-validation and tuning.

mod cv;
mod files;
mod folds;
mod metrics;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::ClassLabel;
use crate::shac::{HyperparamSample, ParamSpec, ParamValue, SearchSpace};
use crate::svm::{fit_ovo, resolve_gamma, OvoSvm, SvmParams};
use crate::tabular::{fit_forest, fit_gbt, select_mask, GbtModel, GbtParams, TreeParams};

pub use cv::{cross_validate, tune, CandidateScore, CvReport, EvalSettings, TuneOutcome};
pub use files::{
    load_hyperparams, load_model, load_report, HyperparamsFile, ModelFile, Provenance, ReportFile,
    HYPERPARAMS_FORMAT, MODEL_FORMAT, MODEL_VERSION, REPORT_FORMAT,
};
pub use folds::{make_folds, FoldSplit};
pub use metrics::{evaluate, evaluate_weighted, weighted_score, MetricWeights, Metrics};

/// Smallest penalty used when a sampled C rounds to zero.
pub const MIN_SVM_C: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    SvmPipeline,
    Gbt,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::SvmPipeline => "svm-pipeline",
            ModelKind::Gbt => "gbt",
        }
    }

    /// The search space tuned for this model kind by default.
    pub fn default_space(self) -> SearchSpace {
        let ints = |v: &[i64]| v.iter().map(|&i| ParamValue::Int(i)).collect::<Vec<_>>();
        let params = match self {
            ModelKind::SvmPipeline => {
                let mut depths = ints(&[3, 4, 5, 6, 7, 8]);
                depths.push(ParamValue::Text("none".into()));
                vec![
                    ParamSpec::discrete("rf_trees", ints(&[10, 20, 50, 100])),
                    ParamSpec::discrete("rf_depth", depths),
                    ParamSpec::uniform("sel_threshold", 0.0, 0.5),
                    ParamSpec::uniform("svm_c", 0.0, 25.0),
                    ParamSpec::uniform("gamma_raw", -1.0, 1.0),
                ]
            }
            ModelKind::Gbt => vec![
                ParamSpec::discrete("n_estimators", ints(&[10, 25, 50, 100, 200])),
                ParamSpec::discrete("max_depth", ints(&[3, 4, 5, 6, 7, 8])),
                ParamSpec::uniform("learning_rate", 0.01, 0.2),
            ],
        };
        SearchSpace::new(params).expect("built-in spaces are valid")
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svm-pipeline" => Ok(ModelKind::SvmPipeline),
            "gbt" => Ok(ModelKind::Gbt),
            other => Err(Error::arg(format!(
                "unknown model kind `{other}` (expected svm-pipeline or gbt)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProposedHyperparams {
    pub rf_trees: usize,
    /// `None` lets trees grow without a depth limit.
    pub rf_depth: Option<usize>,
    pub sel_threshold: f64,
    pub svm_c: f64,
    /// Non-positive values select `1 / n_selected_features`.
    pub gamma_raw: f64,
}

impl Default for ProposedHyperparams {
    fn default() -> Self {
        ProposedHyperparams {
            rf_trees: 100,
            rf_depth: None,
            sel_threshold: 0.01,
            svm_c: 1.0,
            gamma_raw: -1.0,
        }
    }
}

impl ProposedHyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.rf_trees == 0 || self.rf_depth == Some(0) {
            return Err(Error::Config(
                "rf_trees and rf_depth must be positive".into(),
            ));
        }
        if !(self.sel_threshold.is_finite() && self.gamma_raw.is_finite()) {
            return Err(Error::Config(
                "sel_threshold and gamma_raw must be finite".into(),
            ));
        }
        if !(self.svm_c > 0.0 && self.svm_c.is_finite()) {
            return Err(Error::Config(format!(
                "svm_c must be positive, got {}",
                self.svm_c
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Hyperparams {
    SvmPipeline(ProposedHyperparams),
    Gbt(GbtParams),
}

/// Optional search dimension choosing how many coefficients per block the
/// model sees. Absent from a space, the feature table is used as given.
pub const D_PARAM: &str = "d";

/// The `d` a sample asks for, if the space tunes it.
pub fn sample_d(space: &SearchSpace, sample: &HyperparamSample) -> Result<Option<usize>> {
    sample
        .get(space, D_PARAM)
        .map(|v| as_count(v, D_PARAM))
        .transpose()
}

fn lookup<'a>(
    space: &SearchSpace,
    sample: &'a HyperparamSample,
    name: &str,
) -> Result<&'a ParamValue> {
    sample
        .get(space, name)
        .ok_or_else(|| Error::Config(format!("search space lacks parameter `{name}`")))
}

fn as_count(v: &ParamValue, name: &str) -> Result<usize> {
    match v {
        ParamValue::Int(i) if *i > 0 => Ok(*i as usize),
        _ => Err(Error::Config(format!(
            "`{name}` must be a positive integer, got {v}"
        ))),
    }
}

fn as_real(v: &ParamValue, name: &str) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| Error::Config(format!("`{name}` must be numeric, got {v}")))
}

impl Hyperparams {
    pub fn kind(&self) -> ModelKind {
        match self {
            Hyperparams::SvmPipeline(_) => ModelKind::SvmPipeline,
            Hyperparams::Gbt(_) => ModelKind::Gbt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Hyperparams::SvmPipeline(p) => p.validate(),
            Hyperparams::Gbt(p) => p.validate().map_err(|e| Error::Config(e.to_string())),
        }
    }

    /// Decode a search sample by parameter name.
    pub fn from_sample(
        kind: ModelKind,
        space: &SearchSpace,
        sample: &HyperparamSample,
    ) -> Result<Self> {
        let get = |name: &str| lookup(space, sample, name);
        let hp = match kind {
            ModelKind::SvmPipeline => {
                let rf_depth = match get("rf_depth")? {
                    ParamValue::Text(s) if s == "none" => None,
                    v => Some(as_count(v, "rf_depth")?),
                };
                Hyperparams::SvmPipeline(ProposedHyperparams {
                    rf_trees: as_count(get("rf_trees")?, "rf_trees")?,
                    rf_depth,
                    sel_threshold: as_real(get("sel_threshold")?, "sel_threshold")?,
                    svm_c: as_real(get("svm_c")?, "svm_c")?.max(MIN_SVM_C),
                    gamma_raw: as_real(get("gamma_raw")?, "gamma_raw")?,
                })
            }
            ModelKind::Gbt => Hyperparams::Gbt(GbtParams {
                n_estimators: as_count(get("n_estimators")?, "n_estimators")?,
                max_depth: as_count(get("max_depth")?, "max_depth")?,
                learning_rate: as_real(get("learning_rate")?, "learning_rate")?,
            }),
        };
        hp.validate()?;
        Ok(hp)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineOptions {
    /// Z-score the selected features before the SVM (statistics from the
    /// training rows only). Off by default. Has no effect on the tree baseline.
    pub standardize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Scaler {
    pub fn fit(x: &[Vec<f64>]) -> Self {
        let n = x.len() as f64;
        let m = x.first().map_or(0, Vec::len);
        let mean: Vec<f64> = (0..m)
            .map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n)
            .collect();
        let scale = (0..m)
            .map(|j| {
                let var = x.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Scaler { mean, scale }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classifier {
    Svm(OvoSvm),
    Gbt(GbtModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedPipeline {
    pub hyperparams: Hyperparams,
    pub n_features: usize,
    /// Features passed to the classifier; at least one is set.
    pub mask: Vec<bool>,
    /// Forest importances behind the mask (absent for the tree baseline).
    pub importances: Option<Vec<f64>>,
    pub scaler: Option<Scaler>,
    pub classifier: Classifier,
}

fn apply_mask(row: &[f64], mask: &[bool]) -> Vec<f64> {
    row.iter()
        .zip(mask)
        .filter(|(_, &k)| k)
        .map(|(&v, _)| v)
        .collect()
}

/// Fit on rows `x` with class codes `y`. `seed` drives the forest.
pub fn train_pipeline(
    x: &[Vec<f64>],
    y: &[usize],
    hp: &Hyperparams,
    seed: u64,
    opts: &PipelineOptions,
) -> Result<TrainedPipeline> {
    hp.validate()?;
    let n_features = x.first().map_or(0, Vec::len);
    if n_features == 0 {
        return Err(Error::Data("training table is empty".into()));
    }
    let n_classes = ClassLabel::COUNT;
    match hp {
        Hyperparams::SvmPipeline(p) => {
            let tree = TreeParams {
                max_depth: p.rf_depth,
                ..TreeParams::default()
            };
            let forest = fit_forest(x, y, n_classes, p.rf_trees, &tree, seed)?;
            let mask = select_mask(forest.importances(), p.sel_threshold);
            let selected: Vec<Vec<f64>> = x.iter().map(|r| apply_mask(r, &mask)).collect();
            let scaler = opts.standardize.then(|| Scaler::fit(&selected));
            let inputs: Vec<Vec<f64>> = match &scaler {
                Some(s) => selected.iter().map(|r| s.apply(r)).collect(),
                None => selected,
            };
            let dim = mask.iter().filter(|&&k| k).count();
            let params = SvmParams {
                c: p.svm_c,
                gamma: resolve_gamma(p.gamma_raw, dim)?,
                ..SvmParams::default()
            };
            let svm = fit_ovo(&inputs, y, n_classes, &params)?;
            Ok(TrainedPipeline {
                hyperparams: *hp,
                n_features,
                mask,
                importances: Some(forest.importances().to_vec()),
                scaler,
                classifier: Classifier::Svm(svm),
            })
        }
        Hyperparams::Gbt(p) => Ok(TrainedPipeline {
            hyperparams: *hp,
            n_features,
            mask: vec![true; n_features],
            importances: None,
            scaler: None,
            classifier: Classifier::Gbt(fit_gbt(x, y, n_classes, p)?),
        }),
    }
}

impl TrainedPipeline {
    pub fn n_selected(&self) -> usize {
        self.mask.iter().filter(|&&k| k).count()
    }

    /// Resolved SVM kernel width (None for the tree baseline).
    pub fn svm_gamma(&self) -> Option<f64> {
        match &self.classifier {
            Classifier::Svm(m) => m.machines().first().map(|pm| pm.svm.gamma()),
            Classifier::Gbt(_) => None,
        }
    }

    pub fn predict(&self, row: &[f64]) -> Result<ClassLabel> {
        if row.len() != self.n_features {
            return Err(Error::Data(format!(
                "feature vector has {} values, model expects {}",
                row.len(),
                self.n_features
            )));
        }
        let selected = apply_mask(row, &self.mask);
        let input = match &self.scaler {
            Some(s) => s.apply(&selected),
            None => selected,
        };
        let code = match &self.classifier {
            Classifier::Svm(m) => m.predict(&input),
            Classifier::Gbt(m) => m.predict(&input),
        };
        Ok(ClassLabel::from_code(code).expect("classifier trained on class codes"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Four well-separated classes in the first two columns, noise elsewhere.
    pub(crate) fn separable(n_per: usize, width: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers = [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0), (10.0, 10.0)];
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (c, &(a, b)) in centers.iter().enumerate() {
            for _ in 0..n_per {
                let mut row: Vec<f64> = (0..width).map(|_| rng.random::<f64>()).collect();
                row[0] = a + rng.random::<f64>();
                row[1] = b + rng.random::<f64>();
                x.push(row);
                y.push(c);
            }
        }
        (x, y)
    }

    #[test]
    fn default_spaces_have_expected_dimensions() {
        assert_eq!(ModelKind::SvmPipeline.default_space().len(), 5);
        assert_eq!(ModelKind::Gbt.default_space().len(), 3);
    }

    #[test]
    fn sample_decoding() {
        let space = ModelKind::SvmPipeline.default_space();
        let sample = HyperparamSample {
            values: vec![
                ParamValue::Int(20),
                ParamValue::Text("none".into()),
                ParamValue::Real(0.1),
                ParamValue::Real(0.0),
                ParamValue::Real(-0.5),
            ],
            encoded: vec![1.0, 6.0, 0.1, 0.0, -0.5],
        };
        let hp = Hyperparams::from_sample(ModelKind::SvmPipeline, &space, &sample).unwrap();
        let Hyperparams::SvmPipeline(p) = hp else {
            panic!()
        };
        assert_eq!(p.rf_trees, 20);
        assert_eq!(p.rf_depth, None);
        assert_eq!(p.svm_c, MIN_SVM_C);
        let gbt = ModelKind::Gbt.default_space();
        assert!(Hyperparams::from_sample(ModelKind::Gbt, &gbt, &sample).is_err());
    }

    #[test]
    fn hyperparams_json_round_trip() {
        for hp in [
            Hyperparams::SvmPipeline(ProposedHyperparams::default()),
            Hyperparams::Gbt(GbtParams::default()),
        ] {
            let s = serde_json::to_string(&hp).unwrap();
            assert_eq!(serde_json::from_str::<Hyperparams>(&s).unwrap(), hp);
        }
    }

    #[test]
    fn high_threshold_falls_back_to_one_feature() {
        let (x, y) = separable(10, 6, 1);
        let hp = Hyperparams::SvmPipeline(ProposedHyperparams {
            sel_threshold: 0.99,
            ..ProposedHyperparams::default()
        });
        let p = train_pipeline(&x, &y, &hp, 0, &PipelineOptions::default()).unwrap();
        assert_eq!(p.n_selected(), 1);
        assert_eq!(p.svm_gamma(), Some(1.0));
        assert!(p.predict(&x[0]).is_ok());
    }

    #[test]
    fn gamma_uses_masked_dimension() {
        let (x, y) = separable(10, 6, 2);
        let hp = Hyperparams::SvmPipeline(ProposedHyperparams {
            sel_threshold: 0.0,
            gamma_raw: -0.5,
            ..ProposedHyperparams::default()
        });
        let p = train_pipeline(&x, &y, &hp, 0, &PipelineOptions::default()).unwrap();
        assert_eq!(p.svm_gamma(), Some(1.0 / p.n_selected() as f64));
    }

    #[test]
    fn training_is_deterministic_and_memorizes_separable_data() {
        let (x, y) = separable(12, 5, 3);
        let hp = Hyperparams::SvmPipeline(ProposedHyperparams {
            svm_c: 10.0,
            ..ProposedHyperparams::default()
        });
        for standardize in [false, true] {
            let opts = PipelineOptions { standardize };
            let a = train_pipeline(&x, &y, &hp, 4, &opts).unwrap();
            let b = train_pipeline(&x, &y, &hp, 4, &opts).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.scaler.is_some(), standardize);
            for (row, &c) in x.iter().zip(&y) {
                assert_eq!(a.predict(row).unwrap().code(), c);
            }
            assert!(a.predict(&[0.0; 3]).is_err());
        }
    }

    #[test]
    fn scaler_centers_and_scales_training_rows() {
        let rows = vec![vec![1.0, 5.0], vec![3.0, 5.0], vec![5.0, 5.0]];
        let s = Scaler::fit(&rows);
        let z: Vec<Vec<f64>> = rows.iter().map(|r| s.apply(r)).collect();
        let mean: f64 = z.iter().map(|r| r[0]).sum::<f64>() / 3.0;
        let var: f64 = z.iter().map(|r| r[0] * r[0]).sum::<f64>() / 3.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
        // constant column stays finite
        assert!(z.iter().all(|r| r[1] == 0.0));
    }

    #[test]
    fn gbt_baseline_uses_all_features() {
        let (x, y) = separable(8, 4, 5);
        let hp = Hyperparams::Gbt(GbtParams {
            n_estimators: 20,
            max_depth: 3,
            learning_rate: 0.2,
        });
        let p = train_pipeline(&x, &y, &hp, 0, &PipelineOptions::default()).unwrap();
        assert_eq!(p.n_selected(), 4);
        assert!(x
            .iter()
            .zip(&y)
            .all(|(r, &c)| p.predict(r).unwrap().code() == c));
    }
}
