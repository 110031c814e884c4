use ndarray::Array2;

use super::{StftConfig, StftPlan, Waveform, SAMPLE_RATE};

pub const NUM_MEL_BANDS: usize = 128;

/// Added to mel power before the logarithm.
pub const LOG_MEL_FLOOR: f64 = 1e-5;

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters with centres equally spaced on the mel scale.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    /// `n_mels x (window_size / 2 + 1)`, non-negative.
    pub weights: Array2<f64>,
    pub f_min: f64,
    pub f_max: f64,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, window_size: usize, sample_rate: u32) -> Self {
        let f_min = 0.0;
        let f_max = sample_rate as f64 / 2.0;
        let bins = window_size / 2 + 1;
        let (lo, hi) = (hz_to_mel(f_min), hz_to_mel(f_max));
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64))
            .collect();
        let bin_hz = sample_rate as f64 / window_size as f64;
        let weights = Array2::from_shape_fn((n_mels, bins), |(m, b)| {
            let f = b as f64 * bin_hz;
            let (left, centre, right) = (edges[m], edges[m + 1], edges[m + 2]);
            let rising = (f - left) / (centre - left);
            let falling = (right - f) / (right - centre);
            rising.min(falling).max(0.0)
        });
        Self {
            weights,
            f_min,
            f_max,
        }
    }

    /// Mel power `weights · power` for a power spectrogram of shape `(bins, frames)`.
    pub fn project(&self, power: &Array2<f64>) -> Array2<f64> {
        self.weights.dot(power)
    }
}

/// Natural-log mel spectrogram (128 bands, 2048 / 512 centred STFT).
pub fn log_mel(x: &Waveform) -> Array2<f64> {
    let cfg = StftConfig::analysis();
    let plan = StftPlan::new(cfg).expect("analysis config is valid");
    let bins = cfg.num_bins();
    let frames = plan.analyze(x.samples());
    let m = frames.len() / bins;
    let power = Array2::from_shape_fn((bins, m), |(f, t)| frames[t * bins + f].norm_sqr());
    let bank = MelFilterbank::new(NUM_MEL_BANDS, cfg.window_size, SAMPLE_RATE);
    bank.project(&power).mapv(|p| (p + LOG_MEL_FLOOR).ln())
}
