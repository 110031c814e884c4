//! Spectral primitives shared by every other module: the waveform carrier,
//! STFT analysis/synthesis and the log-mel front-end.

mod mel;
mod stft;

pub use mel::{log_mel, MelFilterbank, LOG_MEL_FLOOR, NUM_MEL_BANDS};
pub use stft::{magnitude, ComplexSpectrogram, StftConfig, StftPlan};

use crate::error::{Error, Result};

/// Sample rate of every signal crossing a module boundary.
pub const SAMPLE_RATE: u32 = 44_100;

/// Mono audio at [`SAMPLE_RATE`]. Samples are always finite.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Waveform {
    samples: Vec<f64>,
}

impl Waveform {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample at index {i}")));
        }
        Ok(Self { samples })
    }

    /// Wrap samples produced by this crate's own arithmetic, which keeps them finite.
    pub(crate) fn from_vec(samples: Vec<f64>) -> Self {
        debug_assert!(samples.iter().all(|s| s.is_finite()));
        Self { samples }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            samples: vec![0.0; len],
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / SAMPLE_RATE as f64
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self::from_vec(self.samples.iter().map(|s| s * gain).collect())
    }

    /// Sample-wise sum. All inputs must share one length.
    pub fn sum<'a>(len: usize, parts: impl IntoIterator<Item = &'a Waveform>) -> Result<Self> {
        let mut out = vec![0.0; len];
        for part in parts {
            if part.len() != len {
                return Err(Error::invalid(format!(
                    "cannot sum waveform of length {} into length {len}",
                    part.len()
                )));
            }
            for (o, s) in out.iter_mut().zip(&part.samples) {
                *o += s;
            }
        }
        Ok(Self::from_vec(out))
    }
}

/// Periodic Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n as f64).cos())
        .collect()
}
