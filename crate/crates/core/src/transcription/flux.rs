use crate::signal::{log_mel, Waveform};

/// Class-agnostic onset envelope: half-wave rectified frame difference of the
/// log-mel spectrogram, summed over bands and scaled to a unit maximum.
///
/// Frame 0 has no predecessor and is 0. A silent input yields an all-zero curve.
pub fn spectral_flux_curve(x: &Waveform) -> Vec<f64> {
    let lm = log_mel(x);
    let frames = lm.ncols();
    let mut curve = vec![0.0; frames];
    for m in 1..frames {
        curve[m] = lm
            .column(m)
            .iter()
            .zip(lm.column(m - 1).iter())
            .map(|(a, b)| (a - b).max(0.0))
            .sum();
    }
    let peak = curve.iter().copied().fold(0.0, f64::max);
    if peak > 0.0 {
        for c in &mut curve {
            *c /= peak;
        }
    }
    curve
}
