//! TOML run configuration shared by the command-line tools.
//!
//! Every section is optional; omitted keys take the defaults below and
//! unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::ExtractConfig;
use crate::pipeline::{EvalSettings, MetricWeights, ModelKind, PipelineOptions, D_PARAM};
use crate::shac::{ParamSpec, ParamValue, SearchSpace, ShacConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvConfig {
    pub k: usize,
    /// Folds for evaluation, final training and candidate rescoring.
    pub seed: u64,
    /// Folds used inside the search objective; must differ from `seed`.
    pub tune_seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            k: 5,
            seed: 0,
            tune_seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    pub svm_pipeline: Option<SearchSpace>,
    pub gbt: Option<SearchSpace>,
    /// Candidate `d` values. When set, the tuner treats `d` as one more
    /// discrete parameter; features must be extracted with at least the
    /// largest value.
    pub d_grid: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub features: ExtractConfig,
    pub shac: ShacConfig,
    pub cv: CvConfig,
    pub model: PipelineOptions,
    pub weights: MetricWeights,
    pub search: SearchConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        self.shac.validate()?;
        self.weights.validate()?;
        if self.cv.k < 2 {
            return Err(Error::Config(format!(
                "cv.k must be at least 2, got {}",
                self.cv.k
            )));
        }
        if self.cv.seed == self.cv.tune_seed {
            return Err(Error::Config("cv.seed and cv.tune_seed must differ".into()));
        }
        for space in [&self.search.svm_pipeline, &self.search.gbt]
            .into_iter()
            .flatten()
        {
            space.validate()?;
        }
        let grid = &self.search.d_grid;
        if let Some(&d) = grid
            .iter()
            .find(|&&d| d == 0 || d > self.features.mfcc.n_mels)
        {
            return Err(Error::Config(format!(
                "search.d_grid values must lie in 1..={}, got {d}",
                self.features.mfcc.n_mels
            )));
        }
        if (1..grid.len()).any(|i| grid[..i].contains(&grid[i])) {
            return Err(Error::Config("search.d_grid has duplicate values".into()));
        }
        Ok(())
    }

    pub fn space(&self, kind: ModelKind) -> SearchSpace {
        let custom = match kind {
            ModelKind::SvmPipeline => &self.search.svm_pipeline,
            ModelKind::Gbt => &self.search.gbt,
        };
        let space = custom.clone().unwrap_or_else(|| kind.default_space());
        if self.search.d_grid.is_empty() || space.index_of(D_PARAM).is_some() {
            return space;
        }
        let mut params = space.params().to_vec();
        params.push(ParamSpec::discrete(
            D_PARAM,
            self.search
                .d_grid
                .iter()
                .map(|&d| ParamValue::Int(d as i64))
                .collect(),
        ));
        SearchSpace::new(params).expect("validated grid")
    }

    pub fn eval_settings(&self) -> EvalSettings {
        EvalSettings {
            k: self.cv.k,
            weights: self.weights,
            options: self.model,
        }
    }
}
