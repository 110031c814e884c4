//! Drum source separation toolkit.
//!
//! A drum-machine forward model (one-shots triggered by onset/velocity
//! activations) inverted two ways: transcription-informed NMFD and per-track
//! analysis-by-synthesis on a multi-resolution STFT loss. Both feed
//! alpha-Wiener masking, and an evaluation suite scores the results.

pub mod abs;
pub mod classes;
pub mod drum_machine;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod masking;
pub mod nmfd;
pub mod pipeline;
pub mod signal;
pub mod transcription;

pub use classes::{ClassGrouping, DrumClass, DrumGroup, NUM_CLASSES};
pub use error::{Error, Result};
pub use signal::{Waveform, SAMPLE_RATE};
