//! Framing, power spectra, the Slaney mel scale, and MFCCs.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{num_complex::Complex, Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{AudioClip, MfccMatrix};

const MEL_LINEAR_STEP: f64 = 200.0 / 3.0;
const MEL_BREAK_HZ: f64 = 1000.0;
const MEL_BREAK: f64 = MEL_BREAK_HZ / MEL_LINEAR_STEP;

fn mel_log_step() -> f64 {
    6.4f64.ln() / 27.0
}

/// Short-time analysis and cepstral settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MfccConfig {
    pub sample_rate: u32,
    pub n_fft: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub n_mfcc: usize,
    pub fmin: f64,
    /// Upper filterbank edge; `None` means Nyquist.
    pub fmax: Option<f64>,
    pub log_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        MfccConfig {
            sample_rate: 22050,
            n_fft: 2048,
            hop: 512,
            n_mels: 128,
            n_mfcc: 15,
            fmin: 0.0,
            fmax: None,
            log_floor: 1e-10,
        }
    }
}

impl MfccConfig {
    pub fn fmax(&self) -> f64 {
        self.fmax.unwrap_or(self.sample_rate as f64 / 2.0)
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.sample_rate == 0 {
            return bad("sample_rate must be positive".into());
        }
        if self.n_fft < 2 {
            return bad(format!("n_fft = {} is too small", self.n_fft));
        }
        if self.hop == 0 {
            return bad("hop must be positive".into());
        }
        if self.n_mfcc == 0 || self.n_mfcc > self.n_mels || self.n_mels > self.n_bins() {
            return bad(format!(
                "need 0 < n_mfcc ({}) <= n_mels ({}) <= n_fft/2+1 ({})",
                self.n_mfcc,
                self.n_mels,
                self.n_bins()
            ));
        }
        let fmax = self.fmax();
        if !(self.fmin >= 0.0 && self.fmin < fmax && fmax <= self.sample_rate as f64 / 2.0) {
            return bad(format!(
                "need 0 <= fmin ({}) < fmax ({fmax}) <= sample_rate/2",
                self.fmin
            ));
        }
        if !(self.log_floor > 0.0 && self.log_floor.is_finite()) {
            return bad(format!(
                "log_floor must be a positive real, got {}",
                self.log_floor
            ));
        }
        Ok(())
    }
}

pub fn hz_to_mel(f: f64) -> Result<f64> {
    if f.is_nan() || f < 0.0 {
        return Err(Error::arg(format!(
            "frequency must be non-negative, got {f}"
        )));
    }
    Ok(if f < MEL_BREAK_HZ {
        f / MEL_LINEAR_STEP
    } else {
        MEL_BREAK + (f / MEL_BREAK_HZ).ln() / mel_log_step()
    })
}

pub fn mel_to_hz(m: f64) -> Result<f64> {
    if m.is_nan() || m < 0.0 {
        return Err(Error::arg(format!(
            "mel value must be non-negative, got {m}"
        )));
    }
    Ok(if m < MEL_BREAK {
        m * MEL_LINEAR_STEP
    } else {
        MEL_BREAK_HZ * (mel_log_step() * (m - MEL_BREAK)).exp()
    })
}

/// Number of frames produced for a signal of `len` samples.
pub fn frame_count(len: usize, hop: usize) -> usize {
    1 + len / hop
}

/// Periodic Hann window of length `n`.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

fn reflect_index(j: i64, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as i64 - 1);
    let j = j.rem_euclid(period);
    if j < len as i64 {
        j as usize
    } else {
        (period - j) as usize
    }
}

/// Split a clip into Hann-windowed frames of `n_fft` samples after
/// reflect-padding `n_fft / 2` samples on both sides.
pub fn frame_signal(clip: &AudioClip, cfg: &MfccConfig) -> Result<Vec<Vec<f64>>> {
    let x = &clip.samples;
    if x.is_empty() {
        return Err(Error::arg("cannot frame an empty clip"));
    }
    if cfg.hop == 0 || cfg.n_fft == 0 {
        return Err(Error::Config("hop and n_fft must be positive".into()));
    }
    let pad = (cfg.n_fft / 2) as i64;
    let window = hann_window(cfg.n_fft);
    let n_frames = frame_count(x.len(), cfg.hop);
    Ok((0..n_frames)
        .map(|t| {
            let start = (t * cfg.hop) as i64 - pad;
            window
                .iter()
                .enumerate()
                .map(|(i, w)| w * x[reflect_index(start + i as i64, x.len())])
                .collect()
        })
        .collect())
}

/// One-sided power spectrum for frames of a fixed length, with the FFT plan
/// cached.
pub struct SpectrumAnalyzer {
    n_fft: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl SpectrumAnalyzer {
    pub fn new(n_fft: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(n_fft);
        SpectrumAnalyzer { n_fft, fft }
    }

    /// Squared DFT magnitudes for bins `0..=n_fft/2`.
    pub fn power(&self, frame: &[f64]) -> Result<Vec<f64>> {
        if frame.len() != self.n_fft {
            return Err(Error::arg(format!(
                "frame length {} does not match n_fft {}",
                frame.len(),
                self.n_fft
            )));
        }
        let mut buf: Vec<Complex<f64>> = frame.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.fft.process(&mut buf);
        Ok(buf[..=self.n_fft / 2]
            .iter()
            .map(|c| c.norm_sqr())
            .collect())
    }
}

/// Filter centre frequencies (Hz), uniformly spaced on the mel scale.
pub fn mel_centers(cfg: &MfccConfig) -> Result<Vec<f64>> {
    Ok(mel_edges(cfg)?[1..=cfg.n_mels].to_vec())
}

fn mel_edges(cfg: &MfccConfig) -> Result<Vec<f64>> {
    let lo = hz_to_mel(cfg.fmin)?;
    let hi = hz_to_mel(cfg.fmax())?;
    let n = cfg.n_mels + 1;
    (0..=n)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / n as f64))
        .collect()
}

/// Area-normalized triangular mel filters, `n_mels` rows by `n_fft/2+1` bins.
pub fn mel_filterbank(cfg: &MfccConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let edges = mel_edges(cfg)?;
    let n_bins = cfg.n_bins();
    let bin_hz = |k: usize| k as f64 * cfg.sample_rate as f64 / cfg.n_fft as f64;

    let mut bank = Vec::with_capacity(cfg.n_mels);
    for m in 0..cfg.n_mels {
        let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
        let norm = 2.0 / (right - left);
        let row: Vec<f64> = (0..n_bins)
            .map(|k| {
                let f = bin_hz(k);
                let rising = (f - left) / (center - left);
                let falling = (right - f) / (right - center);
                rising.min(falling).max(0.0) * norm
            })
            .collect();
        if row.iter().all(|&w| w <= 0.0) {
            return Err(Error::Config(format!(
                "mel filter {m} ({left:.1}-{right:.1} Hz) covers no FFT bin; \
                 reduce n_mels or increase n_fft"
            )));
        }
        bank.push(row);
    }
    Ok(bank)
}

/// Orthonormal DCT-II matrix; row `k` holds basis vector `k`.
pub fn dct_matrix(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|k| {
            let scale = if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            };
            (0..n)
                .map(|i| scale * (PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos())
                .collect()
        })
        .collect()
}

struct SparseRow {
    start: usize,
    weights: Vec<f64>,
}

fn sparsify(bank: &[Vec<f64>]) -> Vec<SparseRow> {
    bank.iter()
        .map(|row| {
            let start = row.iter().position(|&w| w != 0.0).unwrap_or(0);
            let end = row.iter().rposition(|&w| w != 0.0).map_or(start, |e| e + 1);
            SparseRow {
                start,
                weights: row[start..end].to_vec(),
            }
        })
        .collect()
}

/// Floored natural-log mel energies, one vector of `n_mels` per frame.
pub fn log_mel_frames(clip: &AudioClip, cfg: &MfccConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    if clip.sample_rate != cfg.sample_rate {
        return Err(Error::arg(format!(
            "clip rate {} Hz differs from configured {} Hz",
            clip.sample_rate, cfg.sample_rate
        )));
    }
    let bank = sparsify(&mel_filterbank(cfg)?);
    let analyzer = SpectrumAnalyzer::new(cfg.n_fft);
    frame_signal(clip, cfg)?
        .iter()
        .map(|frame| {
            let power = analyzer.power(frame)?;
            Ok(bank
                .iter()
                .map(|row| {
                    let e: f64 = row
                        .weights
                        .iter()
                        .zip(&power[row.start..])
                        .map(|(w, p)| w * p)
                        .sum();
                    e.max(cfg.log_floor).ln()
                })
                .collect())
        })
        .collect()
}

/// MFCC matrix: log mel energies per frame, orthonormal DCT-II, first
/// `n_mfcc` coefficients kept.
pub fn mfcc(clip: &AudioClip, cfg: &MfccConfig) -> Result<MfccMatrix> {
    let log_mel = log_mel_frames(clip, cfg)?;
    let dct = dct_matrix(cfg.n_mels);
    let mut rows = vec![Vec::with_capacity(log_mel.len()); cfg.n_mfcc];
    for frame in &log_mel {
        for (k, row) in rows.iter_mut().enumerate() {
            row.push(dct[k].iter().zip(frame).map(|(a, b)| a * b).sum());
        }
    }
    MfccMatrix::from_rows(rows)
}
