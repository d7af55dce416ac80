//! Versioned JSON containers for tuned hyperparameters, trained models and
//! evaluation reports.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::{ClassLabel, ExtractConfig, FeatureCache, FeatureTable};

use super::{CvReport, Hyperparams, Metrics, ModelKind, PipelineOptions, TrainedPipeline};

pub const HYPERPARAMS_FORMAT: &str = "voxdx-hyperparams";
pub const MODEL_FORMAT: &str = "voxdx-model";
pub const REPORT_FORMAT: &str = "voxdx-report";
pub const MODEL_VERSION: u32 = 1;
const HYPERPARAMS_VERSION: u32 = 1;
const REPORT_VERSION: u32 = 1;

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data serializes");
    s.push('\n');
    s
}

/// Check `format`/`version` before decoding the body, so an old or foreign
/// file reports a version problem rather than a missing field.
fn parse_versioned<T: DeserializeOwned>(text: &str, format: &str, version: u32) -> Result<T> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Format(format!("{format}: {e}")))?;
    let found = value.get("format").and_then(|v| v.as_str()).unwrap_or("");
    if found != format {
        return Err(Error::Format(format!(
            "expected a {format} file, found format `{found}`"
        )));
    }
    match value.get("version").and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(version) => {}
        other => {
            return Err(Error::Format(format!(
                "{format} version {} is not supported (expected {version})",
                other.map_or("<missing>".to_string(), |v| v.to_string())
            )))
        }
    }
    serde_json::from_value(value).map_err(|e| Error::Format(format!("{format}: {e}")))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperparamsFile {
    pub format: String,
    pub version: u32,
    pub hyperparams: Hyperparams,
    /// Coefficients per block to use; absent means whatever the features have.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    pub tune_seed: u64,
    pub eval_seed: u64,
    /// Weighted score on the evaluation folds.
    pub eval_score: f64,
    pub fallback: bool,
}

impl HyperparamsFile {
    pub fn new(
        hyperparams: Hyperparams,
        d: Option<usize>,
        tune_seed: u64,
        eval_seed: u64,
        eval_score: f64,
        fallback: bool,
    ) -> Self {
        HyperparamsFile {
            format: HYPERPARAMS_FORMAT.into(),
            version: HYPERPARAMS_VERSION,
            hyperparams,
            d,
            tune_seed,
            eval_seed,
            eval_score,
            fallback,
        }
    }

    /// The cached table cut down to this file's `d`, with extraction
    /// settings that reproduce it from audio.
    pub fn select(&self, cache: &FeatureCache) -> Result<(FeatureTable, ExtractConfig)> {
        let Some(d) = self.d else {
            return Ok((cache.table.clone(), cache.config.clone()));
        };
        if d > cache.table.d() {
            return Err(Error::Data(format!(
                "hyperparameters expect d = {d} but the features have d = {}",
                cache.table.d()
            )));
        }
        let mut config = cache.config.clone();
        config.mfcc.n_mfcc = d;
        Ok((cache.table.truncated(d)?, config))
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: Self = parse_versioned(text, HYPERPARAMS_FORMAT, HYPERPARAMS_VERSION)?;
        f.hyperparams.validate()?;
        if f.d == Some(0) {
            return Err(Error::Format("hyperparameter file has d = 0".into()));
        }
        Ok(f)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write(path, &self.to_json())
    }
}

pub fn load_hyperparams(path: &Path) -> Result<HyperparamsFile> {
    HyperparamsFile::from_json(&read(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub seed: u64,
    pub n_train: usize,
    /// Training rows per class, in class-code order.
    pub class_counts: Vec<usize>,
    /// Evaluation-fold score recorded when the hyperparameters were tuned.
    pub tuned_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub d: usize,
    pub extract: ExtractConfig,
    pub options: PipelineOptions,
    pub pipeline: TrainedPipeline,
    /// SHA-256 over the extraction config, options, hyperparameters and mask.
    pub fingerprint: String,
    pub provenance: Provenance,
}

fn fingerprint(
    extract: &ExtractConfig,
    options: &PipelineOptions,
    pipeline: &TrainedPipeline,
) -> String {
    let body = serde_json::to_vec(&(extract, options, &pipeline.hyperparams, &pipeline.mask))
        .expect("plain data serializes");
    hex::encode(Sha256::digest(body))
}

impl ModelFile {
    pub fn new(
        extract: ExtractConfig,
        options: PipelineOptions,
        pipeline: TrainedPipeline,
        seed: u64,
        labels: &[ClassLabel],
        tuned_score: Option<f64>,
    ) -> Self {
        let mut class_counts = vec![0; ClassLabel::COUNT];
        for l in labels {
            class_counts[l.code()] += 1;
        }
        ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            d: extract.mfcc.n_mfcc,
            fingerprint: fingerprint(&extract, &options, &pipeline),
            extract,
            options,
            pipeline,
            provenance: Provenance {
                seed,
                n_train: labels.len(),
                class_counts,
                tuned_score,
            },
        }
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = parse_versioned(text, MODEL_FORMAT, MODEL_VERSION)?;
        if m.fingerprint != fingerprint(&m.extract, &m.options, &m.pipeline) {
            return Err(Error::Format(
                "model fingerprint does not match its contents".into(),
            ));
        }
        if m.pipeline.n_features != 3 * m.d || m.pipeline.mask.len() != m.pipeline.n_features {
            return Err(Error::Format(format!(
                "model dimensions disagree: d={} but {} features",
                m.d, m.pipeline.n_features
            )));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write(path, &self.to_json())
    }
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    ModelFile::from_json(&read(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportFile {
    pub format: String,
    pub version: u32,
    pub model_kind: ModelKind,
    pub hyperparams: Hyperparams,
    pub d: usize,
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<Metrics>,
    pub mean: Metrics,
    pub std_dev: f64,
}

impl ReportFile {
    pub fn new(hyperparams: Hyperparams, d: usize, report: &CvReport) -> Self {
        ReportFile {
            format: REPORT_FORMAT.into(),
            version: REPORT_VERSION,
            model_kind: hyperparams.kind(),
            hyperparams,
            d,
            k: report.k(),
            seed: report.seed,
            folds: report.folds.clone(),
            mean: report.mean,
            std_dev: report.std_dev,
        }
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        parse_versioned(text, REPORT_FORMAT, REPORT_VERSION)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write(path, &self.to_json())
    }

    /// Fixed-width table: one row per fold and a summary row.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<14}{:>13}{:>13}{:>9}{:>9}{:>11}\n",
            "", "Sensitivity", "Specificity", "Recall", "Scores", "Std. Dev"
        );
        for (i, m) in self.folds.iter().enumerate() {
            out.push_str(&format!(
                "{:<14}{:>13.4}{:>13.4}{:>9.4}{:>9.4}{:>11}\n",
                format!("fold {}", i + 1),
                m.sensitivity,
                m.specificity,
                m.uar,
                m.weighted,
                ""
            ));
        }
        let m = &self.mean;
        out.push_str(&format!(
            "{:<14}{:>13.4}{:>13.4}{:>9.4}{:>9.4}{:>11.4}\n",
            self.model_kind.name(),
            m.sensitivity,
            m.specificity,
            m.uar,
            m.weighted,
            self.std_dev
        ));
        out
    }
}

pub fn load_report(path: &Path) -> Result<ReportFile> {
    ReportFile::from_json(&read(path)?)
}
