//! Procedural one-shots for synthetic kits and test fixtures.

use std::f64::consts::{SQRT_2, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{OneShotBank, ONE_SHOT_LEN};
use crate::classes::DrumClass;
use crate::signal::{Waveform, SAMPLE_RATE};

const FS: f64 = SAMPLE_RATE as f64;

#[derive(Debug, Clone, Copy)]
enum Pass {
    Low,
    High,
}

/// Cascade of two Butterworth biquads (4th order), direct form I.
fn filter(x: &mut [f64], cutoff_hz: f64, pass: Pass) {
    let w0 = TAU * cutoff_hz / FS;
    let (sin, cos) = w0.sin_cos();
    let alpha = sin / SQRT_2;
    let (b0, b1, b2) = match pass {
        Pass::Low => ((1.0 - cos) / 2.0, 1.0 - cos, (1.0 - cos) / 2.0),
        Pass::High => ((1.0 + cos) / 2.0, -(1.0 + cos), (1.0 + cos) / 2.0),
    };
    let a0 = 1.0 + alpha;
    let (a1, a2) = (-2.0 * cos, 1.0 - alpha);
    for _ in 0..2 {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        for s in x.iter_mut() {
            let y = (b0 * *s + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2) / a0;
            x2 = x1;
            x1 = *s;
            y2 = y1;
            y1 = y;
            *s = y;
        }
    }
}

fn normalize(mut x: Vec<f64>, peak: f64) -> Waveform {
    let m = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m > 0.0 {
        for v in &mut x {
            *v *= peak / m;
        }
    }
    Waveform::from_vec(x)
}

fn decay(t: usize, tau_secs: f64) -> f64 {
    (-(t as f64) / (tau_secs * FS)).exp()
}

/// Pitch-swept, exponentially decaying sine, low-passed at `cutoff_hz`.
pub fn thump(start_hz: f64, end_hz: f64, tau_secs: f64, cutoff_hz: f64) -> Waveform {
    let mut phase = 0.0;
    let mut x = Vec::with_capacity(ONE_SHOT_LEN);
    for t in 0..ONE_SHOT_LEN {
        let sweep = (-(t as f64) / (0.04 * FS)).exp();
        let f = end_hz + (start_hz - end_hz) * sweep;
        phase += TAU * f / FS;
        x.push(phase.sin() * decay(t, tau_secs));
    }
    filter(&mut x, cutoff_hz, Pass::Low);
    normalize(x, 0.9)
}

/// Exponentially decaying white noise, high-passed at `cutoff_hz`.
pub fn noise_burst(seed: u64, tau_secs: f64, cutoff_hz: f64) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..ONE_SHOT_LEN)
        .map(|t| rng.random_range(-1.0..1.0) * decay(t, tau_secs))
        .collect();
    filter(&mut x, cutoff_hz, Pass::High);
    normalize(x, 0.9)
}

fn snare(seed: u64, tone_hz: f64) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise: Vec<f64> = (0..ONE_SHOT_LEN)
        .map(|t| rng.random_range(-1.0..1.0) * decay(t, 0.06))
        .collect();
    filter(&mut noise, 1500.0, Pass::High);
    let x = noise
        .iter()
        .enumerate()
        .map(|(t, n)| 0.6 * n + 0.5 * (TAU * tone_hz * t as f64 / FS).sin() * decay(t, 0.05))
        .collect();
    normalize(x, 0.9)
}

fn metallic(seed: u64, partials: &[f64], tau_secs: f64) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phases: Vec<f64> = partials.iter().map(|_| rng.random_range(0.0..TAU)).collect();
    let mut x: Vec<f64> = (0..ONE_SHOT_LEN)
        .map(|t| {
            let tt = t as f64 / FS;
            let tone: f64 = partials
                .iter()
                .zip(&phases)
                .map(|(f, p)| (TAU * f * tt + p).sin())
                .sum();
            (0.3 * tone / partials.len() as f64 + 0.7 * rng.random_range(-1.0..1.0))
                * decay(t, tau_secs)
        })
        .collect();
    filter(&mut x, 3000.0, Pass::High);
    normalize(x, 0.8)
}

/// A complete procedural kit. `seed` varies pitches and noise realisations.
pub fn synthetic_kit(kit_id: &str, seed: u64) -> OneShotBank {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tune: f64 = rng.random_range(0.85..1.15);
    let s = rng.random::<u64>();
    let shots = DrumClass::ALL
        .iter()
        .map(|class| match class {
            DrumClass::Kick => thump(150.0 * tune, 50.0 * tune, 0.25, 250.0),
            DrumClass::Snare => snare(s ^ 1, 190.0 * tune),
            DrumClass::HihatClosed => noise_burst(s ^ 2, 0.02, 7000.0),
            DrumClass::HihatOpen => noise_burst(s ^ 3, 0.25, 6000.0),
            DrumClass::HiTom => thump(300.0 * tune, 220.0 * tune, 0.2, 1200.0),
            DrumClass::MidTom => thump(220.0 * tune, 160.0 * tune, 0.25, 900.0),
            DrumClass::LowTom => thump(160.0 * tune, 110.0 * tune, 0.3, 700.0),
            DrumClass::CrashLeft => metallic(s ^ 4, &[3150.0, 4370.0, 5470.0, 6880.0], 0.6),
            DrumClass::Ride => metallic(s ^ 5, &[2710.0, 3440.0, 5210.0], 0.45),
        })
        .collect();
    OneShotBank::new(kit_id, shots).expect("procedural shots are normalized and complete")
}
