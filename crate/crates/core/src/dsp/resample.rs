//! Band-limited sample-rate conversion with a Kaiser-windowed sinc kernel.

use std::f64::consts::PI;

use crate::error::{Error, Result};

use super::AudioClip;

/// Kernel length in zero crossings of the cutoff sinc (both sides).
const TAPS: usize = 64;
const KAISER_BETA: f64 = 8.6;
/// Cutoff relative to the lower of the two Nyquist frequencies.
const ROLLOFF: f64 = 0.95;
/// Above this many polyphase branches the kernel is evaluated per output sample.
const MAX_PHASES: u64 = 4096;

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

struct Kernel {
    cutoff: f64,
    half_width: f64,
    i0_beta: f64,
}

impl Kernel {
    fn new(ratio: f64) -> Self {
        let cutoff = if ratio < 1.0 { ratio * ROLLOFF } else { 1.0 };
        Kernel {
            cutoff,
            half_width: (TAPS / 2) as f64 / cutoff,
            i0_beta: bessel_i0(KAISER_BETA),
        }
    }

    /// Filter response at offset `u` input samples from the output instant.
    fn eval(&self, u: f64) -> f64 {
        let r = u / self.half_width;
        if r.abs() >= 1.0 {
            return 0.0;
        }
        let x = self.cutoff * u;
        let sinc = if x.abs() < 1e-12 {
            1.0
        } else {
            (PI * x).sin() / (PI * x)
        };
        let window = bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / self.i0_beta;
        self.cutoff * sinc * window
    }

    /// Normalized weights for input samples `base - reach + 1 ..= base + reach`
    /// when the output instant sits `frac` samples past `base`.
    fn weights(&self, frac: f64, reach: usize) -> Vec<f64> {
        let mut w: Vec<f64> = (0..2 * reach)
            .map(|i| {
                let offset = i as f64 - (reach as f64 - 1.0);
                self.eval(frac - offset)
            })
            .collect();
        let sum: f64 = w.iter().sum();
        if sum.abs() > 0.0 {
            w.iter_mut().for_each(|v| *v /= sum);
        }
        w
    }
}

/// Resample `clip` to `target_rate`. Output length is
/// `round(len * target / source)`; equal rates return the input unchanged.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip> {
    if target_rate == 0 {
        return Err(Error::arg("resample target rate must be positive"));
    }
    let source_rate = clip.sample_rate;
    if target_rate == source_rate {
        return Ok(clip.clone());
    }
    let len = clip.samples.len() as u64;
    let out_len = ((len as u128 * target_rate as u128 + source_rate as u128 / 2)
        / source_rate as u128) as usize;

    let g = gcd(source_rate as u64, target_rate as u64);
    let up = target_rate as u64 / g;
    let down = source_rate as u64 / g;
    let kernel = Kernel::new(target_rate as f64 / source_rate as f64);
    let reach = kernel.half_width.ceil() as usize + 1;

    let table: Option<Vec<Vec<f64>>> = (up <= MAX_PHASES).then(|| {
        (0..up)
            .map(|phase| kernel.weights(phase as f64 / up as f64, reach))
            .collect()
    });

    let x = &clip.samples;
    let mut out = Vec::with_capacity(out_len);
    for j in 0..out_len as u64 {
        let pos = j * down;
        let base = (pos / up) as i64;
        let phase = pos % up;
        let owned;
        let w: &[f64] = match &table {
            Some(t) => &t[phase as usize],
            None => {
                owned = kernel.weights(phase as f64 / up as f64, reach);
                &owned
            }
        };
        let first = base - (reach as i64 - 1);
        let mut acc = 0.0;
        for (i, &wi) in w.iter().enumerate() {
            let idx = first + i as i64;
            if idx >= 0 && (idx as u64) < len {
                acc += wi * x[idx as usize];
            }
        }
        out.push(acc);
    }
    AudioClip::new(out, target_rate)
}
