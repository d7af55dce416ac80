//! Per-clip feature vectors and labeled feature tables.

mod cache;
mod manifest;

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::{self, AudioClip, MfccConfig, MfccMatrix};
use crate::error::{Error, Result};

pub use cache::{load_cache, save_cache, FeatureCache, CACHE_FORMAT, CACHE_VERSION};
pub use manifest::{Manifest, ManifestEntry};

/// Diagnostic class of a recording. `Normal` is the binary negative class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassLabel {
    Normal = 0,
    Neoplasm = 1,
    Phonotrauma = 2,
    VocalPalsy = 3,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 4] = [
        ClassLabel::Normal,
        ClassLabel::Neoplasm,
        ClassLabel::Phonotrauma,
        ClassLabel::VocalPalsy,
    ];
    pub const COUNT: usize = 4;

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<ClassLabel> {
        Self::ALL.get(code).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Normal => "normal",
            ClassLabel::Neoplasm => "neoplasm",
            ClassLabel::Phonotrauma => "phonotrauma",
            ClassLabel::VocalPalsy => "vocal_palsy",
        }
    }

    pub fn is_pathological(self) -> bool {
        self != ClassLabel::Normal
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Data(format!("unknown class label `{s}`")))
    }
}

/// How frame-level matrices are summarized into `3d` values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureLayout {
    /// `[mean(mfcc) | mean(delta) | max(delta)]`
    #[default]
    MeanMfccMeanDeltaMaxDelta,
    /// `[mean(mfcc) | max(mfcc) | mean(delta)]`
    MeanMfccMaxMfccMeanDelta,
    /// `[mean(mfcc) | mean(delta) | mean(delta-delta)]`
    MeanMfccMeanDeltaMeanDelta2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeltaConfig {
    /// Odd Savitzky-Golay window length.
    pub width: usize,
    pub order: usize,
}

impl Default for DeltaConfig {
    fn default() -> Self {
        DeltaConfig { width: 9, order: 1 }
    }
}

/// Everything needed to turn a decoded clip into a feature vector.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractConfig {
    pub mfcc: MfccConfig,
    pub delta: DeltaConfig,
    pub layout: FeatureLayout,
}

impl ExtractConfig {
    pub fn validate(&self) -> Result<()> {
        self.mfcc.validate()?;
        if self.delta.width < 3 || self.delta.width.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "delta width must be odd and >= 3, got {}",
                self.delta.width
            )));
        }
        if self.delta.order == 0 || self.delta.order >= self.delta.width {
            return Err(Error::Config(format!(
                "delta order must lie in 1..{}, got {}",
                self.delta.width, self.delta.order
            )));
        }
        Ok(())
    }
}

/// Fixed-size summary of one clip: three blocks of `d` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    d: usize,
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(d: usize, values: Vec<f64>) -> Result<Self> {
        if d == 0 || values.len() != 3 * d {
            return Err(Error::arg(format!(
                "feature vector length {} is not 3 * {d}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(
                "feature vector contains non-finite values".into(),
            ));
        }
        Ok(FeatureVector { d, values })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

fn row_means(m: &MfccMatrix) -> impl Iterator<Item = f64> + '_ {
    m.rows()
        .iter()
        .map(|r| r.iter().sum::<f64>() / r.len() as f64)
}

fn row_maxes(m: &MfccMatrix) -> impl Iterator<Item = f64> + '_ {
    m.rows()
        .iter()
        .map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

fn check_same_shape(a: &MfccMatrix, b: &MfccMatrix) -> Result<()> {
    if a.n_coeffs() != b.n_coeffs() || a.n_frames() != b.n_frames() {
        return Err(Error::arg(format!(
            "shape mismatch: {}x{} vs {}x{}",
            a.n_coeffs(),
            a.n_frames(),
            b.n_coeffs(),
            b.n_frames()
        )));
    }
    Ok(())
}

/// `[mean over frames of mfcc | mean of delta | max of delta]`.
pub fn aggregate(mfcc: &MfccMatrix, delta: &MfccMatrix) -> Result<FeatureVector> {
    check_same_shape(mfcc, delta)?;
    let values = row_means(mfcc)
        .chain(row_means(delta))
        .chain(row_maxes(delta))
        .collect();
    FeatureVector::new(mfcc.n_coeffs(), values)
}

/// Decoded clip to feature vector: resample, MFCC, delta, summarize.
pub fn extract(clip: &AudioClip, cfg: &ExtractConfig) -> Result<FeatureVector> {
    cfg.validate()?;
    if clip.samples.is_empty() {
        return Err(Error::Data("clip has no samples".into()));
    }
    let clip = dsp::resample(clip, cfg.mfcc.sample_rate)?;
    let mfcc = dsp::mfcc(&clip, &cfg.mfcc)?;
    let delta = dsp::delta(&mfcc, cfg.delta.width, cfg.delta.order)?;
    match cfg.layout {
        FeatureLayout::MeanMfccMeanDeltaMaxDelta => aggregate(&mfcc, &delta),
        FeatureLayout::MeanMfccMaxMfccMeanDelta => FeatureVector::new(
            mfcc.n_coeffs(),
            row_means(&mfcc)
                .chain(row_maxes(&mfcc))
                .chain(row_means(&delta))
                .collect(),
        ),
        FeatureLayout::MeanMfccMeanDeltaMeanDelta2 => {
            let delta2 = dsp::delta(&delta, cfg.delta.width, cfg.delta.order)?;
            FeatureVector::new(
                mfcc.n_coeffs(),
                row_means(&mfcc)
                    .chain(row_means(&delta))
                    .chain(row_means(&delta2))
                    .collect(),
            )
        }
    }
}

/// Read, decode and summarize one WAV file.
pub fn extract_file(path: &Path, cfg: &ExtractConfig) -> Result<FeatureVector> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    extract(&dsp::decode_wav(&bytes)?, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub clip_id: String,
    pub features: Vec<f64>,
    pub label: ClassLabel,
}

/// Labeled corpus of feature vectors sharing one `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    d: usize,
    rows: Vec<FeatureRow>,
}

impl FeatureTable {
    pub fn new(d: usize) -> Self {
        FeatureTable {
            d,
            rows: Vec::new(),
        }
    }

    pub fn from_rows(d: usize, rows: Vec<FeatureRow>) -> Result<Self> {
        let mut table = FeatureTable::new(d);
        let mut seen = HashSet::new();
        for row in rows {
            if !seen.insert(row.clip_id.clone()) {
                return Err(Error::Data(format!("duplicate clip id `{}`", row.clip_id)));
            }
            table.check_row(&row)?;
            table.rows.push(row);
        }
        Ok(table)
    }

    fn check_row(&self, row: &FeatureRow) -> Result<()> {
        if row.features.len() != 3 * self.d {
            return Err(Error::Data(format!(
                "row `{}` has {} features, expected {}",
                row.clip_id,
                row.features.len(),
                3 * self.d
            )));
        }
        if row.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "row `{}` has non-finite features",
                row.clip_id
            )));
        }
        Ok(())
    }

    pub fn push(
        &mut self,
        clip_id: impl Into<String>,
        features: FeatureVector,
        label: ClassLabel,
    ) -> Result<()> {
        let row = FeatureRow {
            clip_id: clip_id.into(),
            features: features.into_values(),
            label,
        };
        if self.rows.iter().any(|r| r.clip_id == row.clip_id) {
            return Err(Error::Data(format!("duplicate clip id `{}`", row.clip_id)));
        }
        self.check_row(&row)?;
        self.rows.push(row);
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn width(&self) -> usize {
        3 * self.d
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[FeatureRow] {
        &self.rows
    }

    pub fn features(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.features.clone()).collect()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.label.code()).collect()
    }

    /// Keep the first `d` coefficients of each of the three blocks. Row `k`
    /// of the MFCC and delta matrices does not depend on how many rows were
    /// computed, so this matches a fresh extraction with `n_mfcc = d`.
    pub fn truncated(&self, d: usize) -> Result<FeatureTable> {
        if d == 0 || d > self.d {
            return Err(Error::Data(format!(
                "cannot reduce a d = {} table to d = {d}",
                self.d
            )));
        }
        let rows = self
            .rows
            .iter()
            .map(|r| FeatureRow {
                features: r
                    .features
                    .chunks(self.d)
                    .flat_map(|block| &block[..d])
                    .copied()
                    .collect(),
                ..r.clone()
            })
            .collect();
        Ok(FeatureTable { d, rows })
    }

    /// Copy of the table with labels permuted by `perm` (row `i` takes the
    /// label of row `perm[i]`).
    pub fn with_permuted_labels(&self, perm: &[usize]) -> FeatureTable {
        let rows = self
            .rows
            .iter()
            .zip(perm)
            .map(|(r, &p)| FeatureRow {
                label: self.rows[p].label,
                ..r.clone()
            })
            .collect();
        FeatureTable { d: self.d, rows }
    }
}

/// Extract every manifest entry (paths relative to `base_dir`), in manifest
/// order. Any failure rejects the whole batch, listing each failing path.
pub fn batch_extract(
    manifest: &Manifest,
    base_dir: &Path,
    cfg: &ExtractConfig,
) -> Result<FeatureTable> {
    cfg.validate()?;
    let results: Vec<_> = manifest
        .entries
        .par_iter()
        .map(|e| {
            let path = base_dir.join(&e.path);
            extract_file(&path, cfg).map_err(|err| (path, err.to_string()))
        })
        .collect();

    let mut table = FeatureTable::new(cfg.mfcc.n_mfcc);
    let mut failures = Vec::new();
    for (entry, res) in manifest.entries.iter().zip(results) {
        match res {
            Ok(fv) => table.push(entry.path.to_string_lossy(), fv, entry.label)?,
            Err(f) => failures.push(f),
        }
    }
    if failures.is_empty() {
        Ok(table)
    } else {
        Err(Error::Batch(failures))
    }
}
