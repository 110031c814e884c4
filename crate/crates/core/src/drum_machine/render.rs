use super::{sequence, upsample_activations, FrameActivations, OneShotBank};
use crate::classes::NUM_CLASSES;
use crate::error::{Error, Result};
use crate::signal::Waveform;

/// Global per-track gains in `[0, 2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackGains(pub Vec<f64>);

impl TrackGains {
    pub fn unit() -> Self {
        Self(vec![1.0; NUM_CLASSES])
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.iter().any(|g| !(0.0..=2.0).contains(g)) {
            return Err(Error::invalid("track gains must lie in [0, 2]"));
        }
        Ok(())
    }
}

/// Per-class decay parameters of the exponential envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeParams(pub Vec<f64>);

impl EnvelopeParams {
    /// `alpha = 0` everywhere: envelopes are flat.
    pub fn flat() -> Self {
        Self(vec![0.0; NUM_CLASSES])
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::invalid("envelope decays must be finite and >= 0"));
        }
        Ok(())
    }
}

/// `exp(-20 * alpha * t / len)` for `0 <= t < len`.
pub fn envelope(alpha: f64, len: usize) -> Vec<f64> {
    (0..len)
        .map(|t| (-20.0 * alpha * t as f64 / len as f64).exp())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub stems: Vec<Waveform>,
    pub mixture: Waveform,
}

/// Sequence every class and mix: `stem_k = g_k * sequence(w_k * env_k, a_k)`.
pub fn render(
    bank: &OneShotBank,
    activations: &FrameActivations,
    gains: &TrackGains,
    envelopes: &EnvelopeParams,
    len: usize,
) -> Result<Rendered> {
    let k = bank.one_shots().len();
    if activations.num_classes() != k || gains.0.len() != k || envelopes.0.len() != k {
        return Err(Error::invalid(format!(
            "class count mismatch: bank {k}, activations {}, gains {}, envelopes {}",
            activations.num_classes(),
            gains.0.len(),
            envelopes.0.len()
        )));
    }
    gains.validate()?;
    envelopes.validate()?;
    let a = upsample_activations(activations, len);
    let stems: Vec<Waveform> = (0..k)
        .map(|c| {
            let row = a.row(c);
            if gains.0[c] == 0.0 || row.iter().all(|&v| v == 0.0) {
                return Waveform::zeros(len);
            }
            let w = bank.one_shots()[c].samples();
            let shaped: Vec<f64> = w
                .iter()
                .zip(envelope(envelopes.0[c], w.len()))
                .map(|(s, e)| s * e)
                .collect();
            sequence(&shaped, row).scaled(gains.0[c])
        })
        .collect();
    let mixture = Waveform::sum(len, &stems)?;
    Ok(Rendered { stems, mixture })
}
