use std::collections::BTreeSet;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::{render, EnvelopeParams, FrameActivations, OneShotBank, TrackGains};
use crate::classes::{DrumClass, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::signal::{Waveform, SAMPLE_RATE};
use crate::transcription::{OnsetEvent, Transcription};

/// Parameters of the synthetic dataset generator.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationSpec {
    pub tracks: usize,
    pub duration_secs: f64,
    /// Expected onsets per second, per class.
    pub densities: [f64; NUM_CLASSES],
    pub velocity_range: (f64, f64),
    /// Onset grid spacing in samples.
    pub hop_size: usize,
    /// Minimum distance between two onsets of one class, in frames.
    pub min_gap_frames: usize,
    /// Peak-normalize each mixture to 1 before gain augmentation.
    pub normalize: bool,
    pub gain_probability: f64,
    pub gain_range: (f64, f64),
}

impl Default for GenerationSpec {
    fn default() -> Self {
        Self {
            tracks: 10,
            duration_secs: 6.0,
            densities: [2.0, 1.5, 3.0, 0.5, 0.3, 0.3, 0.3, 0.2, 0.5],
            velocity_range: (0.5, 1.0),
            hop_size: 512,
            min_gap_frames: 2,
            normalize: true,
            gain_probability: 0.8,
            gain_range: (0.3, 1.0),
        }
    }
}

impl GenerationSpec {
    pub fn num_samples(&self) -> usize {
        (self.duration_secs * SAMPLE_RATE as f64).round() as usize
    }

    fn validate(&self) -> Result<()> {
        if !(self.duration_secs > 0.0) {
            return Err(Error::invalid("duration must be positive"));
        }
        if self.densities.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::invalid("onset densities must be finite and >= 0"));
        }
        let (lo, hi) = self.velocity_range;
        if !(0.0..=2.0).contains(&lo) || !(lo..=2.0).contains(&hi) {
            return Err(Error::invalid("velocity range must satisfy 0 <= lo <= hi <= 2"));
        }
        let (glo, ghi) = self.gain_range;
        if !(glo >= 0.0 && glo <= ghi) || !(0.0..=1.0).contains(&self.gain_probability) {
            return Err(Error::invalid("invalid gain augmentation parameters"));
        }
        if self.hop_size == 0 {
            return Err(Error::invalid("hop size must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTrack {
    pub name: String,
    pub kit_id: String,
    pub mixture: Waveform,
    pub stems: Vec<Waveform>,
    pub transcription: Transcription,
    /// Overall factor applied after rendering (normalization times augmentation gain).
    pub output_gain: f64,
}

/// Render `spec.tracks` random tracks. Track `i` draws from its own RNG
/// stream, so output does not depend on generation order.
pub fn generate_dataset(
    banks: &[OneShotBank],
    seed: u64,
    spec: &GenerationSpec,
) -> Result<Vec<SyntheticTrack>> {
    if banks.is_empty() {
        return Err(Error::invalid("at least one one-shot bank is required"));
    }
    spec.validate()?;
    (0..spec.tracks)
        .map(|i| generate_track(banks, seed, i, spec))
        .collect()
}

fn generate_track(
    banks: &[OneShotBank],
    seed: u64,
    index: usize,
    spec: &GenerationSpec,
) -> Result<SyntheticTrack> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let bank = &banks[rng.random_range(0..banks.len())];
    let len = spec.num_samples();
    let frames = len.div_ceil(spec.hop_size);

    let mut events = Vec::new();
    for class in DrumClass::ALL {
        let rate = spec.densities[class.index()] * spec.duration_secs;
        if rate <= 0.0 {
            continue;
        }
        let count = Poisson::new(rate)
            .map_err(|e| Error::invalid(format!("poisson rate {rate}: {e}")))?
            .sample(&mut rng) as usize;
        for frame in place_onsets(&mut rng, count, frames, spec.min_gap_frames) {
            let (lo, hi) = spec.velocity_range;
            let velocity = if hi > lo {
                rng.random_range(lo..=hi)
            } else {
                lo
            };
            // Six decimals, so the annotation file carries the exact rendered value.
            let velocity = (velocity * 1e6).round() / 1e6;
            events.push(OnsetEvent {
                time: (frame * spec.hop_size) as f64 / SAMPLE_RATE as f64,
                class,
                velocity,
            });
        }
    }
    let transcription = Transcription::new(events)?;

    let mut onsets = Array2::zeros((NUM_CLASSES, frames));
    let mut velocities = Array2::zeros((NUM_CLASSES, frames));
    for e in transcription.events() {
        let m = (e.time * SAMPLE_RATE as f64 / spec.hop_size as f64).round() as usize;
        onsets[[e.class.index(), m]] = 1.0;
        velocities[[e.class.index(), m]] = e.velocity;
    }
    let grid = FrameActivations::new(onsets, velocities, spec.hop_size)?;
    let rendered = render(bank, &grid, &TrackGains::unit(), &EnvelopeParams::flat(), len)?;

    let mut gain = 1.0;
    if spec.normalize {
        let peak = rendered.mixture.peak();
        if peak > 0.0 {
            gain = 1.0 / peak;
        }
    }
    if rng.random_bool(spec.gain_probability) {
        let (lo, hi) = spec.gain_range;
        gain *= if hi > lo { rng.random_range(lo..=hi) } else { lo };
    }
    let stems: Vec<Waveform> = rendered.stems.iter().map(|s| s.scaled(gain)).collect();
    let mixture = Waveform::sum(len, &stems)?;
    Ok(SyntheticTrack {
        name: format!("track_{index:04}"),
        kit_id: bank.kit_id.clone(),
        mixture,
        stems,
        transcription,
        output_gain: gain,
    })
}

/// Draw up to `count` distinct frames, each at least `min_gap` from the others.
fn place_onsets(rng: &mut ChaCha8Rng, count: usize, frames: usize, min_gap: usize) -> Vec<usize> {
    let mut taken = BTreeSet::new();
    for _ in 0..count {
        let free: Vec<usize> = (0..frames)
            .filter(|&m| {
                taken
                    .range(m.saturating_sub(min_gap.saturating_sub(1))..=m + min_gap.saturating_sub(1))
                    .next()
                    .is_none()
            })
            .collect();
        if free.is_empty() {
            break;
        }
        taken.insert(free[rng.random_range(0..free.len())]);
    }
    taken.into_iter().collect()
}
