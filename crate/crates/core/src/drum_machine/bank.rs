use crate::classes::{DrumClass, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::signal::{Waveform, SAMPLE_RATE};

/// One-shot length: one second at 44.1 kHz.
pub const ONE_SHOT_LEN: usize = SAMPLE_RATE as usize;

/// Per-class one-shots of a single drum kit, in [`DrumClass::ALL`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct OneShotBank {
    pub kit_id: String,
    one_shots: Vec<Waveform>,
}

impl OneShotBank {
    /// Pads (with zeros) or truncates every one-shot to [`ONE_SHOT_LEN`].
    pub fn new(kit_id: impl Into<String>, one_shots: Vec<Waveform>) -> Result<Self> {
        if one_shots.len() != NUM_CLASSES {
            return Err(Error::invalid(format!(
                "a bank needs {NUM_CLASSES} one-shots, got {}",
                one_shots.len()
            )));
        }
        let mut fitted = Vec::with_capacity(NUM_CLASSES);
        for (class, w) in DrumClass::ALL.iter().zip(one_shots) {
            if w.peak() > 1.0 {
                return Err(Error::invalid(format!(
                    "one-shot `{class}` exceeds the [-1, 1] amplitude range"
                )));
            }
            let mut s = w.into_samples();
            s.resize(ONE_SHOT_LEN, 0.0);
            fitted.push(Waveform::from_vec(s));
        }
        Ok(Self {
            kit_id: kit_id.into(),
            one_shots: fitted,
        })
    }

    pub fn get(&self, class: DrumClass) -> &Waveform {
        &self.one_shots[class.index()]
    }

    pub fn one_shots(&self) -> &[Waveform] {
        &self.one_shots
    }
}
