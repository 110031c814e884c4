use std::io::BufWriter;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::atomic_write;
use crate::error::{Error, Result};
use crate::signal::{Waveform, SAMPLE_RATE};

/// Read 16-bit PCM or 32-bit float audio at 44.1 kHz, averaging channels to mono.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = WavReader::open(path).map_err(wav_err)?;
    let spec = reader.spec();
    if spec.sample_rate != SAMPLE_RATE {
        return Err(Error::UnsupportedRate {
            path: path.to_path_buf(),
            rate: spec.sample_rate,
        });
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_err)?,
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_err)?,
        (format, bits) => {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                message: format!("{bits}-bit {format:?} samples (expected 16-bit PCM or 32-bit float)"),
            })
        }
    };
    let channels = spec.channels.max(1) as usize;
    let samples = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f64>() / channels as f64)
            .collect()
    };
    Waveform::new(samples).map_err(|_| Error::UnsupportedFormat {
        path: path.to_path_buf(),
        message: "non-finite samples".into(),
    })
}

/// Write mono 32-bit float audio at 44.1 kHz. Samples outside `[-1, 1]` are
/// clipped; the number of clipped samples is returned.
pub fn write_wav(path: impl AsRef<Path>, x: &Waveform) -> Result<usize> {
    let path = path.as_ref();
    let spec = WavSpec {
        channels: 1,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut clipped = 0;
    atomic_write(path, |file| {
        let wav_err = |source| Error::Wav {
            path: path.to_path_buf(),
            source,
        };
        let mut writer = WavWriter::new(BufWriter::new(file), spec).map_err(wav_err)?;
        for &s in x.samples() {
            if s.abs() > 1.0 {
                clipped += 1;
            }
            writer.write_sample(s.clamp(-1.0, 1.0) as f32).map_err(wav_err)?;
        }
        writer.finalize().map_err(wav_err)
    })?;
    if clipped > 0 {
        log::warn!("{}: clipped {clipped} samples to [-1, 1]", path.display());
    }
    Ok(clipped)
}
