use ndarray::Array2;

use crate::error::{Error, Result};

/// Frame-rate onset (`[0, 1]`) and velocity (`[0, 2]`) grids, `K x M`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameActivations {
    onsets: Array2<f64>,
    velocities: Array2<f64>,
    hop_size: usize,
}

impl FrameActivations {
    pub fn new(onsets: Array2<f64>, velocities: Array2<f64>, hop_size: usize) -> Result<Self> {
        if onsets.dim() != velocities.dim() {
            return Err(Error::invalid(format!(
                "onset grid {:?} and velocity grid {:?} differ in shape",
                onsets.dim(),
                velocities.dim()
            )));
        }
        if hop_size == 0 {
            return Err(Error::invalid("hop size must be positive"));
        }
        if onsets.iter().any(|o| !(0.0..=1.0).contains(o)) {
            return Err(Error::invalid("onsets must lie in [0, 1]"));
        }
        if velocities.iter().any(|v| !(0.0..=2.0).contains(v)) {
            return Err(Error::invalid("velocities must lie in [0, 2]"));
        }
        Ok(Self {
            onsets,
            velocities,
            hop_size,
        })
    }

    pub fn onsets(&self) -> &Array2<f64> {
        &self.onsets
    }

    pub fn velocities(&self) -> &Array2<f64> {
        &self.velocities
    }

    pub fn hop_size(&self) -> usize {
        self.hop_size
    }

    pub fn num_classes(&self) -> usize {
        self.onsets.nrows()
    }

    pub fn num_frames(&self) -> usize {
        self.onsets.ncols()
    }

    /// `(class, frame)` cells with a non-zero onset, in class-major order.
    pub fn onset_cells(&self) -> Vec<(usize, usize)> {
        self.onsets
            .indexed_iter()
            .filter(|(_, &o)| o > 0.0)
            .map(|(ix, _)| ix)
            .collect()
    }
}

/// Audio-rate activation, `K x T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationSignal {
    pub a: Array2<f64>,
}

impl ActivationSignal {
    pub fn row(&self, k: usize) -> &[f64] {
        self.a
            .row(k)
            .to_slice()
            .expect("activation rows are contiguous")
    }
}

/// Multiply onsets by velocities and upsample to audio rate by zero insertion.
///
/// Frames whose sample position `m * hop` falls at or beyond `len` are dropped.
pub fn upsample_activations(f: &FrameActivations, len: usize) -> ActivationSignal {
    let mut a = Array2::zeros((f.num_classes(), len));
    for ((k, m), &o) in f.onsets.indexed_iter() {
        let t = m * f.hop_size;
        if t < len {
            a[[k, t]] = o * f.velocities[[k, m]];
        }
    }
    ActivationSignal { a }
}
