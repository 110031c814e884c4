//! α-Wiener soft masking of the mixture STFT.

use ndarray::{Array2, Zip};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::{ComplexSpectrogram, StftConfig, StftPlan, Waveform};

pub const DEFAULT_MASK_ALPHA: f64 = 1.0;
pub const DEFAULT_MASK_EPSILON: f64 = 1e-8;

/// One `F x M` mask per class, each value in `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSet {
    pub masks: Vec<Array2<f64>>,
    pub alpha: f64,
    pub epsilon: f64,
}

impl MaskSet {
    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    /// `Σ_k M_k` per cell.
    pub fn total(&self) -> Array2<f64> {
        let mut total = Array2::zeros(self.masks[0].dim());
        for m in &self.masks {
            total += m;
        }
        total
    }
}

/// `M_i = |Ŝ_i|^α / (Σ_j |Ŝ_j|^α + ε)`.
pub fn compute_masks(estimates: &[Array2<f64>], alpha: f64, epsilon: f64) -> Result<MaskSet> {
    let first = estimates
        .first()
        .ok_or_else(|| Error::invalid("at least one estimate is required"))?;
    if estimates.iter().any(|e| e.dim() != first.dim()) {
        return Err(Error::invalid("all estimates must share one shape"));
    }
    if estimates.iter().flat_map(|e| e.iter()).any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::invalid("estimates must be finite and non-negative"));
    }
    if !(alpha > 0.0 && alpha.is_finite()) || !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid("mask alpha and epsilon must be positive"));
    }
    let powered: Vec<Array2<f64>> = estimates
        .iter()
        .map(|e| if alpha == 1.0 { e.clone() } else { e.mapv(|v| v.powf(alpha)) })
        .collect();
    let mut denom = Array2::from_elem(first.dim(), epsilon);
    for p in &powered {
        denom += p;
    }
    let masks = powered.into_iter().map(|p| p / &denom).collect();
    Ok(MaskSet {
        masks,
        alpha,
        epsilon,
    })
}

/// `stem_i = istft(M_i ⊙ stft(x))`, trimmed to `len(x)`.
pub fn apply_masks(x: &Waveform, masks: &MaskSet, cfg: StftConfig) -> Result<Vec<Waveform>> {
    let plan = StftPlan::new(cfg)?;
    let spec = plan.stft(x)?;
    masks
        .masks
        .iter()
        .map(|m| {
            let masked = mask_spectrogram(&spec, m)?;
            plan.istft(&masked)
        })
        .collect()
}

/// Element-wise `M ⊙ X`; the phase of every non-zero cell of `X` is kept.
pub fn mask_spectrogram(spec: &ComplexSpectrogram, mask: &Array2<f64>) -> Result<ComplexSpectrogram> {
    if spec.bins.dim() != mask.dim() {
        return Err(Error::invalid(format!(
            "mask shape {:?} does not match mixture STFT {:?}",
            mask.dim(),
            spec.bins.dim()
        )));
    }
    let bins = Zip::from(&spec.bins)
        .and(mask)
        .map_collect(|&x, &m| Complex64::new(x.re * m, x.im * m));
    Ok(ComplexSpectrogram {
        bins,
        config: spec.config,
        origin_length: spec.origin_length,
    })
}
