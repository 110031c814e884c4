//! The drum-machine forward model: onset/velocity activations trigger
//! one-shot samples through a sequencer, scaled by per-track gains and
//! shaped by exponential decay envelopes.

mod activations;
mod bank;
mod generator;
mod render;
mod sequencer;
pub mod synth;

pub use activations::{upsample_activations, ActivationSignal, FrameActivations};
pub use bank::{OneShotBank, ONE_SHOT_LEN};
pub use generator::{generate_dataset, GenerationSpec, SyntheticTrack};
pub use render::{envelope, render, EnvelopeParams, Rendered, TrackGains};
pub use sequencer::{sequence, sequence_direct};
