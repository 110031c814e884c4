//! Event lists, frame grids, peak picking and onset scoring.

mod flux;
mod matching;
mod peaks;

pub use flux::spectral_flux_curve;
pub use matching::{match_onsets, OnsetScores, DEFAULT_TOLERANCE_SECS};
pub use peaks::{peak_pick, PeakPickConfig};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::classes::{DrumClass, NUM_CLASSES};
use crate::drum_machine::FrameActivations;
use crate::error::{Error, Result};
use crate::signal::SAMPLE_RATE;

/// One annotated drum hit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnsetEvent {
    pub time: f64,
    pub class: DrumClass,
    pub velocity: f64,
}

/// Ground-truth or estimated drum events, kept sorted by `(class, time)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Transcription {
    events: Vec<OnsetEvent>,
}

impl Transcription {
    pub fn new(mut events: Vec<OnsetEvent>) -> Result<Self> {
        for e in &events {
            if !e.time.is_finite() || e.time < 0.0 {
                return Err(Error::invalid(format!(
                    "onset time {} for {} must be finite and >= 0",
                    e.time, e.class
                )));
            }
            if !e.velocity.is_finite() || !(0.0..=2.0).contains(&e.velocity) {
                return Err(Error::invalid(format!(
                    "velocity {} for {} outside [0, 2]",
                    e.velocity, e.class
                )));
            }
        }
        events.sort_by(|a, b| a.class.cmp(&b.class).then(a.time.total_cmp(&b.time)));
        Ok(Self { events })
    }

    pub fn events(&self) -> &[OnsetEvent] {
        &self.events
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn for_class(&self, class: DrumClass) -> impl Iterator<Item = &OnsetEvent> {
        self.events.iter().filter(move |e| e.class == class)
    }

    /// Sorted onset times of the given classes, merged.
    pub fn times(&self, classes: &[DrumClass]) -> Vec<f64> {
        let mut t: Vec<f64> = self
            .events
            .iter()
            .filter(|e| classes.contains(&e.class))
            .map(|e| e.time)
            .collect();
        t.sort_by(f64::total_cmp);
        t
    }

    pub fn onset_count(&self, class: DrumClass) -> usize {
        self.for_class(class).count()
    }
}

/// Nearest frame to `time`, with exact half-frame ties going to the earlier frame.
pub fn nearest_frame(time: f64, hop: usize) -> usize {
    let pos = time * SAMPLE_RATE as f64 / hop as f64;
    // The small slack absorbs rounding in the seconds representation of exact ties.
    (pos - 0.5 - 1e-9).ceil().max(0.0) as usize
}

/// Onset and velocity grids: 1 at the frame nearest each event.
///
/// Two events of one class landing on the same frame share the cell; the
/// larger velocity wins.
pub fn events_to_grid(t: &Transcription, frames: usize, hop: usize) -> Result<FrameActivations> {
    let mut onsets = Array2::zeros((NUM_CLASSES, frames));
    let mut velocities = Array2::zeros((NUM_CLASSES, frames));
    for e in t.events() {
        let m = nearest_frame(e.time, hop);
        if m >= frames {
            return Err(Error::OutOfRange(format!(
                "event ({:.6} s, {}, {}) falls on frame {m}, grid has {frames} frames",
                e.time, e.class, e.velocity
            )));
        }
        let k = e.class.index();
        onsets[[k, m]] = 1.0;
        velocities[[k, m]] = f64::max(velocities[[k, m]], e.velocity);
    }
    FrameActivations::new(onsets, velocities, hop)
}

/// Inverse of [`events_to_grid`]: one event per non-zero onset cell at `frame * hop / fs`.
pub fn grid_to_events(grid: &FrameActivations) -> Result<Transcription> {
    let mut events = Vec::new();
    for ((k, m), &o) in grid.onsets().indexed_iter() {
        if o > 0.0 {
            let class = DrumClass::from_index(k)
                .ok_or_else(|| Error::invalid(format!("class index {k} outside vocabulary")))?;
            events.push(OnsetEvent {
                time: (m * grid.hop_size()) as f64 / SAMPLE_RATE as f64,
                class,
                velocity: grid.velocities()[[k, m]],
            });
        }
    }
    Transcription::new(events)
}
