use num_complex::Complex64;
use realfft::RealFftPlanner;

use crate::signal::Waveform;

/// Trigger `one_shot` with the audio-rate `activation` row.
///
/// Linear convolution through frequency-domain multiplication, truncated to
/// `activation.len()`; energy past the end of the track is dropped.
pub fn sequence(one_shot: &[f64], activation: &[f64]) -> Waveform {
    let len = activation.len();
    if len == 0 || one_shot.is_empty() {
        return Waveform::zeros(len);
    }
    let size = (len + one_shot.len() - 1).next_power_of_two();
    let mut planner = RealFftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);

    let mut buf = vec![0.0; size];
    buf[..len].copy_from_slice(activation);
    let mut a_hat = fwd.make_output_vec();
    fwd.process(&mut buf, &mut a_hat).expect("sizes from plan");

    buf.fill(0.0);
    buf[..one_shot.len()].copy_from_slice(one_shot);
    let mut w_hat = fwd.make_output_vec();
    fwd.process(&mut buf, &mut w_hat).expect("sizes from plan");

    let scale = 1.0 / size as f64;
    let mut prod: Vec<Complex64> = a_hat.iter().zip(&w_hat).map(|(a, w)| a * w * scale).collect();
    let last = prod.len() - 1;
    prod[0].im = 0.0;
    prod[last].im = 0.0;
    inv.process(&mut prod, &mut buf).expect("sizes from plan");
    buf.truncate(len);
    Waveform::from_vec(buf)
}

/// Direct time-domain convolution over the non-zero activation samples.
///
/// Equal to [`sequence`] up to rounding; cheaper when the activation is a
/// sparse impulse train.
pub fn sequence_direct(one_shot: &[f64], activation: &[f64]) -> Waveform {
    let len = activation.len();
    let mut out = vec![0.0; len];
    for (t0, &a) in activation.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        let end = (t0 + one_shot.len()).min(len);
        for (o, w) in out[t0..end].iter_mut().zip(one_shot) {
            *o += a * w;
        }
    }
    Waveform::from_vec(out)
}
