//! Synthetic sustained-vowel corpus.
//!
//! A jittered, shimmered pulse train is shaped by a glottal low-pass,
//! cascaded two-pole formant resonators and a radiation differentiator, then
//! mixed with white noise at the requested harmonics-to-noise ratio. The four
//! class regimes are caricatures chosen to be separable, not clinical models.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::{encode_wav, AudioClip};
use crate::error::{Error, Result};
use crate::features::{ClassLabel, Manifest, ManifestEntry};

pub const DEFAULT_FORMANTS: [(f64, f64); 3] = [(700.0, 130.0), (1220.0, 160.0), (2600.0, 250.0)];

/// Pole radius of the glottal low-pass (two coincident real poles).
const GLOTTAL_POLE: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoiceParams {
    pub f0: f64,
    /// Standard deviation of each cycle's period, as a fraction of the period.
    pub jitter: f64,
    /// Standard deviation of each cycle's amplitude around 1.
    pub shimmer: f64,
    /// `None` means no added noise.
    pub hnr_db: Option<f64>,
    /// `(center, bandwidth)` in Hz.
    pub formants: Vec<(f64, f64)>,
    pub duration_s: f64,
    pub sample_rate: u32,
}

impl Default for VoiceParams {
    fn default() -> Self {
        VoiceParams {
            f0: 120.0,
            jitter: 0.0,
            shimmer: 0.0,
            hnr_db: None,
            formants: DEFAULT_FORMANTS.to_vec(),
            duration_s: 3.0,
            sample_rate: 44_100,
        }
    }
}

impl VoiceParams {
    pub fn validate(&self) -> Result<()> {
        if !(60.0..=400.0).contains(&self.f0) {
            return Err(Error::arg(format!("f0 {} outside [60, 400] Hz", self.f0)));
        }
        if !(0.0..=0.2).contains(&self.jitter) || !(0.0..=0.2).contains(&self.shimmer) {
            return Err(Error::arg(format!(
                "jitter {} and shimmer {} must lie in [0, 0.2]",
                self.jitter, self.shimmer
            )));
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) || self.sample_rate == 0 {
            return Err(Error::arg("duration and sample rate must be positive"));
        }
        if self.hnr_db.is_some_and(|h| !h.is_finite()) {
            return Err(Error::arg(
                "hnr_db must be finite (omit it for a noise-free voice)",
            ));
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        for &(f, b) in &self.formants {
            if !(f > 0.0 && f < nyquist && b > 0.0) {
                return Err(Error::arg(format!(
                    "formant ({f}, {b}) is not below Nyquist with positive bandwidth"
                )));
            }
        }
        Ok(())
    }
}

/// Second-order all-pole section with unity gain at DC.
fn resonate(x: &mut [f64], freq: f64, bandwidth: f64, sample_rate: f64) {
    let r = (-std::f64::consts::PI * bandwidth / sample_rate).exp();
    let b1 = 2.0 * r * (2.0 * std::f64::consts::PI * freq / sample_rate).cos();
    let b2 = -r * r;
    let a = 1.0 - b1 - b2;
    let (mut y1, mut y2) = (0.0, 0.0);
    for v in x.iter_mut() {
        let y = a * *v + b1 * y1 + b2 * y2;
        y2 = y1;
        y1 = y;
        *v = y;
    }
}

fn gauss<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn synth_vowel(p: &VoiceParams, seed: u64) -> Result<AudioClip> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sr = p.sample_rate as f64;
    let n = (p.duration_s * sr).round() as usize;
    let period = sr / p.f0;

    // pulse train at fractional positions, split linearly between neighbors
    let mut x = vec![0.0; n];
    let mut t = rng.random::<f64>() * period;
    while t < (n - 1) as f64 {
        let amp = (1.0 + p.shimmer * gauss(&mut rng)).max(0.0);
        let i = t.floor() as usize;
        let frac = t - i as f64;
        x[i] += amp * (1.0 - frac);
        x[i + 1] += amp * frac;
        let step = period * (1.0 + p.jitter * gauss(&mut rng));
        t += step.max(0.5 * period);
    }

    resonate(
        &mut x,
        0.0,
        -sr * GLOTTAL_POLE.ln() / std::f64::consts::PI,
        sr,
    );
    for &(f, b) in &p.formants {
        resonate(&mut x, f, b, sr);
    }
    for i in (1..n).rev() {
        x[i] -= x[i - 1];
    }

    if let Some(hnr) = p.hnr_db {
        let power = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let sigma = (power / 10f64.powf(hnr / 10.0)).sqrt();
        let noise = Normal::new(0.0, sigma).map_err(|e| Error::arg(e.to_string()))?;
        for v in &mut x {
            *v += noise.sample(&mut rng);
        }
    }

    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        x.iter_mut().for_each(|v| *v *= 0.9 / peak);
    }
    AudioClip::new(x, p.sample_rate)
}

/// Uniform range `[lo, hi]`; equal ends give a constant.
pub type Range = [f64; 2];

fn draw<R: Rng>(r: Range, rng: &mut R) -> f64 {
    if r[1] > r[0] {
        rng.random_range(r[0]..r[1])
    } else {
        r[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassRegime {
    pub label: ClassLabel,
    pub count: usize,
    pub f0: Range,
    pub jitter: Range,
    pub shimmer: Range,
    pub hnr_db: Range,
    /// Relative spread applied independently to each formant center.
    #[serde(default = "default_formant_spread")]
    pub formant_spread: f64,
}

fn default_formant_spread() -> f64 {
    0.05
}

impl ClassRegime {
    fn check(&self) -> Result<()> {
        for (name, r) in [
            ("f0", self.f0),
            ("jitter", self.jitter),
            ("shimmer", self.shimmer),
            ("hnr_db", self.hnr_db),
        ] {
            if !(r[0] <= r[1] && r[0].is_finite() && r[1].is_finite()) {
                return Err(Error::Config(format!(
                    "{} {name} range {r:?} is not lo <= hi",
                    self.label
                )));
            }
        }
        if !(0.0..0.5).contains(&self.formant_spread) {
            return Err(Error::Config(format!(
                "{} formant_spread must lie in [0, 0.5)",
                self.label
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusSpec {
    pub seed: u64,
    pub duration_s: f64,
    pub sample_rate: u32,
    pub formants: Vec<(f64, f64)>,
    pub classes: Vec<ClassRegime>,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        let regime = |label, count, f0, jitter, shimmer, hnr_db| ClassRegime {
            label,
            count,
            f0,
            jitter,
            shimmer,
            hnr_db,
            formant_spread: default_formant_spread(),
        };
        CorpusSpec {
            seed: 0,
            duration_s: 3.0,
            sample_rate: 44_100,
            formants: DEFAULT_FORMANTS.to_vec(),
            classes: vec![
                regime(
                    ClassLabel::Normal,
                    50,
                    [100.0, 220.0],
                    [0.002, 0.008],
                    [0.01, 0.04],
                    [25.0, 35.0],
                ),
                regime(
                    ClassLabel::Neoplasm,
                    40,
                    [80.0, 160.0],
                    [0.02, 0.05],
                    [0.08, 0.15],
                    [5.0, 12.0],
                ),
                regime(
                    ClassLabel::Phonotrauma,
                    60,
                    [150.0, 260.0],
                    [0.005, 0.015],
                    [0.12, 0.2],
                    [15.0, 22.0],
                ),
                regime(
                    ClassLabel::VocalPalsy,
                    50,
                    [110.0, 200.0],
                    [0.06, 0.12],
                    [0.03, 0.08],
                    [2.0, 8.0],
                ),
            ],
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        for (i, c) in self.classes.iter().enumerate() {
            c.check()?;
            if self.classes[..i].iter().any(|o| o.label == c.label) {
                return Err(Error::Config(format!("class `{}` listed twice", c.label)));
            }
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.classes.iter().map(|c| c.count).sum()
    }

    /// Scale every class count so they sum to about `total`, keeping proportions.
    pub fn with_total(&self, total: usize) -> CorpusSpec {
        let old = self.total().max(1) as f64;
        let mut spec = self.clone();
        let mut assigned = 0;
        let last = spec.classes.len().saturating_sub(1);
        for (i, c) in spec.classes.iter_mut().enumerate() {
            c.count = if i == last {
                total - assigned
            } else {
                ((c.count as f64) * total as f64 / old).round() as usize
            };
            assigned += c.count;
        }
        spec
    }

    /// Every clip's voice parameters and seed, in manifest order.
    pub fn plan(&self) -> Result<Vec<(PathBuf, ClassLabel, VoiceParams, u64)>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::with_capacity(self.total());
        for c in &self.classes {
            for i in 0..c.count {
                let formants = self
                    .formants
                    .iter()
                    .map(|&(f, b)| {
                        (
                            f * (1.0 + draw([-c.formant_spread, c.formant_spread], &mut rng)),
                            b,
                        )
                    })
                    .collect();
                let p = VoiceParams {
                    f0: draw(c.f0, &mut rng),
                    jitter: draw(c.jitter, &mut rng),
                    shimmer: draw(c.shimmer, &mut rng),
                    hnr_db: Some(draw(c.hnr_db, &mut rng)),
                    formants,
                    duration_s: self.duration_s,
                    sample_rate: self.sample_rate,
                };
                p.validate()
                    .map_err(|e| Error::Config(format!("class `{}`: {e}", c.label)))?;
                let name = c.label.name();
                let path = PathBuf::from(format!("{name}/{name}_{i:03}.wav"));
                out.push((path, c.label, p, rng.random()));
            }
        }
        Ok(out)
    }
}

pub const MANIFEST_NAME: &str = "manifest.csv";

/// Write the corpus under `out_dir` plus `manifest.csv` with relative paths.
pub fn gen_corpus(spec: &CorpusSpec, out_dir: &Path) -> Result<Manifest> {
    let plan = spec.plan()?;
    for c in spec.classes.iter().filter(|c| c.count > 0) {
        let dir = out_dir.join(c.label.name());
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    plan.par_iter()
        .map(|(rel, _, p, seed)| {
            let clip = synth_vowel(p, *seed)?;
            let path = out_dir.join(rel);
            std::fs::write(&path, encode_wav(&clip)).map_err(|e| Error::io(&path, e))
        })
        .collect::<Result<Vec<()>>>()?;
    let manifest = Manifest {
        entries: plan
            .into_iter()
            .map(|(path, label, _, _)| ManifestEntry { path, label })
            .collect(),
    };
    let path = out_dir.join(MANIFEST_NAME);
    std::fs::write(&path, manifest.to_text()).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
