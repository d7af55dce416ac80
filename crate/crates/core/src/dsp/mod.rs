//! Audio decoding, resampling, MFCC extraction and Savitzky-Golay deltas.

mod resample;
mod savgol;
mod spectral;
mod wav;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use resample::resample;
pub use savgol::{delta, sg_filter, SgFilter};
pub use spectral::{
    dct_matrix, frame_count, frame_signal, hann_window, hz_to_mel, log_mel_frames, mel_centers,
    mel_filterbank, mel_to_hz, mfcc, MfccConfig, SpectrumAnalyzer,
};
pub use wav::{decode_wav, encode_wav};

/// A mono recording.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::arg("sample rate must be positive"));
        }
        Ok(AudioClip {
            samples,
            sample_rate,
        })
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Coefficient-by-frame matrix (`n_coeffs` rows, `n_frames` columns).
///
/// Holds both raw MFCCs and their temporal derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfccMatrix {
    rows: Vec<Vec<f64>>,
}

impl MfccMatrix {
    /// Build from row vectors; all rows must be non-empty and equally long.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || n == 0 {
            return Err(Error::arg(
                "MFCC matrix must have at least one row and one frame",
            ));
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::arg("MFCC matrix rows have unequal lengths"));
        }
        Ok(MfccMatrix { rows })
    }

    pub fn n_coeffs(&self) -> usize {
        self.rows.len()
    }

    pub fn n_frames(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, l: usize) -> &[f64] {
        &self.rows[l]
    }

    pub fn get(&self, l: usize, n: usize) -> f64 {
        self.rows[l][n]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> MfccMatrix {
        MfccMatrix {
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|&v| f(v)).collect())
                .collect(),
        }
    }
}
