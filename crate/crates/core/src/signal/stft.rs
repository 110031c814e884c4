use std::fmt;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use super::{hann, Waveform};
use crate::error::{Error, Result};

/// Analysis parameters. The window is always a periodic Hann window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftConfig {
    pub window_size: usize,
    pub hop_size: usize,
    /// Zero-pad `window_size / 2` samples on both ends so frame `m` is centred on sample `m * hop`.
    pub centered: bool,
}

impl StftConfig {
    pub const fn new(window_size: usize, hop_size: usize) -> Self {
        Self {
            window_size,
            hop_size,
            centered: true,
        }
    }

    /// The toolkit-wide analysis configuration (2048 / 512, centred).
    pub const fn analysis() -> Self {
        Self::new(2048, 512)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_size < 2 || !self.window_size.is_power_of_two() {
            return Err(Error::Config(format!(
                "window size {} is not a power of two >= 2",
                self.window_size
            )));
        }
        if self.hop_size == 0 || self.window_size % self.hop_size != 0 {
            return Err(Error::Config(format!(
                "hop size {} does not divide window size {}",
                self.hop_size, self.window_size
            )));
        }
        Ok(())
    }

    /// Overlap-add reconstruction needs at least 50 % overlap with a Hann window.
    pub fn is_cola(&self) -> bool {
        self.hop_size <= self.window_size / 2
    }

    pub fn num_bins(&self) -> usize {
        self.window_size / 2 + 1
    }

    pub fn num_frames(&self, len: usize) -> usize {
        if self.centered {
            1 + len / self.hop_size
        } else if len <= self.window_size {
            1
        } else {
            1 + (len - self.window_size).div_ceil(self.hop_size)
        }
    }

    fn frame_offset(&self, m: usize) -> isize {
        let start = (m * self.hop_size) as isize;
        if self.centered {
            start - (self.window_size / 2) as isize
        } else {
            start
        }
    }
}

impl Default for StftConfig {
    fn default() -> Self {
        Self::analysis()
    }
}

/// STFT coefficients, `bins[[f, m]]` for bin `f` of frame `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    pub bins: Array2<Complex64>,
    pub config: StftConfig,
    /// Length of the analysed signal, used to trim the inverse.
    pub origin_length: usize,
}

impl ComplexSpectrogram {
    pub fn num_bins(&self) -> usize {
        self.bins.nrows()
    }

    pub fn num_frames(&self) -> usize {
        self.bins.ncols()
    }
}

/// Element-wise complex modulus.
pub fn magnitude(spec: &ComplexSpectrogram) -> Array2<f64> {
    spec.bins.mapv(|c| c.norm())
}

/// Planned forward/inverse transforms for one configuration.
///
/// Plans are cheap to clone and can be shared across threads; every call
/// allocates its own scratch buffers.
#[derive(Clone)]
pub struct StftPlan {
    config: StftConfig,
    window: Vec<f64>,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
}

impl fmt::Debug for StftPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StftPlan")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl StftPlan {
    pub fn new(config: StftConfig) -> Result<Self> {
        config.validate()?;
        let mut planner = RealFftPlanner::<f64>::new();
        Ok(Self {
            config,
            window: hann(config.window_size),
            forward: planner.plan_fft_forward(config.window_size),
            inverse: planner.plan_fft_inverse(config.window_size),
        })
    }

    pub fn config(&self) -> StftConfig {
        self.config
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    /// Frame-major coefficients: frame `m` occupies `[m * F, (m + 1) * F)`.
    pub fn analyze(&self, x: &[f64]) -> Vec<Complex64> {
        let n = self.config.window_size;
        let bins = self.config.num_bins();
        let frames = self.config.num_frames(x.len());
        let mut out = vec![Complex64::new(0.0, 0.0); frames * bins];
        let mut buf = vec![0.0; n];
        let mut scratch = self.forward.make_scratch_vec();
        for (m, chunk) in out.chunks_exact_mut(bins).enumerate() {
            let off = self.config.frame_offset(m);
            for (i, b) in buf.iter_mut().enumerate() {
                let t = off + i as isize;
                *b = if t >= 0 && (t as usize) < x.len() {
                    x[t as usize] * self.window[i]
                } else {
                    0.0
                };
            }
            self.forward
                .process_with_scratch(&mut buf, chunk, &mut scratch)
                .expect("buffer sizes come from the plan");
        }
        out
    }

    pub fn stft(&self, x: &Waveform) -> Result<ComplexSpectrogram> {
        if x.is_empty() {
            return Err(Error::invalid("stft of an empty signal"));
        }
        let bins = self.config.num_bins();
        let frames_major = self.analyze(x.samples());
        let frames = frames_major.len() / bins;
        let spec = Array2::from_shape_fn((bins, frames), |(f, m)| frames_major[m * bins + f]);
        Ok(ComplexSpectrogram {
            bins: spec,
            config: self.config,
            origin_length: x.len(),
        })
    }

    /// Weighted overlap-add inverse, normalized by the summed squared window.
    pub fn istft(&self, spec: &ComplexSpectrogram) -> Result<Waveform> {
        if spec.config != self.config {
            return Err(Error::Config(
                "spectrogram was produced with a different configuration".into(),
            ));
        }
        if !self.config.is_cola() {
            return Err(Error::Config(format!(
                "hop {} exceeds half the window {}; overlap-add cannot reconstruct",
                self.config.hop_size, self.config.window_size
            )));
        }
        if spec.num_bins() != self.config.num_bins() {
            return Err(Error::invalid(format!(
                "spectrogram has {} bins, expected {}",
                spec.num_bins(),
                self.config.num_bins()
            )));
        }
        let n = self.config.window_size;
        let len = spec.origin_length;
        let mut out = vec![0.0; len];
        let mut norm = vec![0.0; len];
        let mut freq = self.inverse.make_input_vec();
        let mut frame = vec![0.0; n];
        let mut scratch = self.inverse.make_scratch_vec();
        let scale = 1.0 / n as f64;
        let last = freq.len() - 1;
        for m in 0..spec.num_frames() {
            for (f, c) in freq.iter_mut().enumerate() {
                *c = spec.bins[[f, m]];
            }
            freq[0].im = 0.0;
            freq[last].im = 0.0;
            self.inverse
                .process_with_scratch(&mut freq, &mut frame, &mut scratch)
                .expect("buffer sizes come from the plan");
            let off = self.config.frame_offset(m);
            for (i, v) in frame.iter().enumerate() {
                let t = off + i as isize;
                if t >= 0 && (t as usize) < len {
                    let w = self.window[i];
                    out[t as usize] += v * scale * w;
                    norm[t as usize] += w * w;
                }
            }
        }
        for (o, w) in out.iter_mut().zip(&norm) {
            if *w > 1e-12 {
                *o /= w;
            } else {
                *o = 0.0;
            }
        }
        Ok(Waveform::from_vec(out))
    }

    /// Adjoint of [`StftPlan::analyze`] for real-valued objectives.
    ///
    /// `grad` holds `dL/dRe + i dL/dIm` per coefficient (frame-major); the
    /// result is `dL/dx` for a signal of length `len`.
    pub fn analyze_adjoint(&self, grad: &[Complex64], len: usize) -> Vec<f64> {
        let n = self.config.window_size;
        let bins = self.config.num_bins();
        let mut out = vec![0.0; len];
        let mut freq = self.inverse.make_input_vec();
        let mut frame = vec![0.0; n];
        let mut scratch = self.inverse.make_scratch_vec();
        let last = bins - 1;
        for (m, chunk) in grad.chunks_exact(bins).enumerate() {
            // The unnormalized real inverse evaluates Y_0 + Y_last (-1)^n + 2 Re(sum Y_f e^{+i...}),
            // so interior bins are halved to obtain Re(sum_f G_f e^{+i 2 pi f n / N}).
            freq[0] = Complex64::new(chunk[0].re, 0.0);
            freq[last] = Complex64::new(chunk[last].re, 0.0);
            for f in 1..last {
                freq[f] = chunk[f] * 0.5;
            }
            self.inverse
                .process_with_scratch(&mut freq, &mut frame, &mut scratch)
                .expect("buffer sizes come from the plan");
            let off = self.config.frame_offset(m);
            let lo = (-off).max(0) as usize;
            let hi = ((len as isize - off).min(n as isize)).max(0) as usize;
            for i in lo..hi {
                out[(off + i as isize) as usize] += frame[i] * self.window[i];
            }
        }
        out
    }
}
