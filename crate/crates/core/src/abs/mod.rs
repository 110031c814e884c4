//! Per-track analysis-by-synthesis.
//!
//! One-shot waveforms, per-onset velocities, track gains and envelope decays
//! are fitted by Adam on the multi-resolution STFT loss, with onsets fixed to
//! the supplied transcription.

mod loss;
mod model;
mod optim;

pub use loss::{recon_loss, LossConfig, SpectralTarget};
pub use model::{
    backpropagate, exp_sigmoid, exp_sigmoid_derivative, exp_sigmoid_inverse, loss_and_gradient, synthesize,
    AbsParams, OnsetLayout, Synthesis,
};
pub use optim::{Adam, OptimizerConfig};

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::classes::NUM_CLASSES;
use crate::drum_machine::{FrameActivations, ONE_SHOT_LEN};
use crate::error::{Error, Result};
use crate::signal::{StftConfig, Waveform};
use crate::transcription::{events_to_grid, Transcription};

/// Standard deviation of the raw one-shot initialization.
pub const INIT_NOISE_STD: f64 = 1e-2;
pub const INIT_VELOCITY: f64 = 1.0;
pub const INIT_GAIN: f64 = 1.0;
pub const INIT_ALPHA: f64 = 0.05;

/// Seeded starting point: small noise one-shots, unit velocities and gains, slow decay.
pub fn init_params(layout: &OnsetLayout, seed: u64) -> AbsParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, INIT_NOISE_STD).expect("valid normal parameters");
    let raw = |y: f64| exp_sigmoid_inverse(y).expect("initial values lie inside the mapping range");
    AbsParams {
        raw_one_shots: Array2::from_shape_simple_fn((layout.num_classes, layout.one_shot_len), || {
            normal.sample(&mut rng)
        }),
        raw_velocities: vec![raw(INIT_VELOCITY); layout.onsets.len()],
        raw_gains: vec![raw(INIT_GAIN); layout.num_classes],
        raw_alphas: vec![raw(INIT_ALPHA); layout.num_classes],
    }
}

/// Gradient of `recon_loss(x, synthesize(params))` in raw parameters.
pub fn loss_gradient(params: &AbsParams, x: &Waveform, grid: &FrameActivations, cfg: &LossConfig) -> Result<AbsParams> {
    let layout = OnsetLayout::from_grid(grid, params.one_shot_len(), x.len());
    let target = SpectralTarget::new(x.samples(), cfg)?;
    Ok(loss_and_gradient(params, &layout, &target)?.1)
}

#[derive(Debug, Clone)]
pub struct AbsSolution {
    pub params: AbsParams,
    pub layout: OnsetLayout,
    /// Enveloped one-shots `tanh(u_k) ⊙ e_k`.
    pub one_shots: Vec<Waveform>,
    pub velocities: Vec<f64>,
    pub gains: Vec<f64>,
    pub alphas: Vec<f64>,
    /// Synthesis estimates, one per class.
    pub stems: Vec<Waveform>,
    /// Sum of `stems`.
    pub reconstruction: Waveform,
    /// Loss before every update and after the last one.
    pub loss_trace: Vec<f64>,
}

/// Run Adam from `init` for `opt.steps` updates. `learning_rate = 0` is accepted here.
pub fn solve_from(
    x: &Waveform,
    layout: OnsetLayout,
    init: AbsParams,
    opt: &OptimizerConfig,
    cfg: &LossConfig,
) -> Result<AbsSolution> {
    if layout.signal_len != x.len() {
        return Err(Error::invalid("onset layout length differs from the mixture"));
    }
    layout.check(&init)?;
    let target = SpectralTarget::new(x.samples(), cfg)?;
    let mut params = init;
    let mut flat = params.to_flat();
    let mut adam = Adam::new(flat.len());
    let mut trace = Vec::with_capacity(opt.steps + 1);
    for step in 0..opt.steps {
        let (loss, grad) = loss_and_gradient(&params, &layout, &target)?;
        if !loss.is_finite() {
            return Err(Error::invalid(format!("loss diverged at step {step}")));
        }
        trace.push(loss);
        let mut g = grad.to_flat();
        let norm = adam.step(&mut flat, &mut g, opt.learning_rate, opt.grad_clip_norm);
        params.set_flat(&flat);
        if step % 100 == 0 {
            log::debug!("abs step {step}: loss {loss:.6e}, grad norm {norm:.3e}");
        }
    }
    let synth = synthesize(&params, &layout)?;
    trace.push(target.loss(&synth.mixture)?);
    let stems: Vec<Waveform> = synth.stems.into_iter().map(Waveform::from_vec).collect();
    let reconstruction = Waveform::sum(x.len(), &stems)?;
    Ok(AbsSolution {
        one_shots: synth.one_shots.into_iter().map(Waveform::from_vec).collect(),
        velocities: synth.velocities,
        gains: synth.gains,
        alphas: params.alphas(),
        params,
        layout,
        stems,
        reconstruction,
        loss_trace: trace,
    })
}

/// Fit the drum machine to `x` with onsets fixed by `t` on the analysis hop grid.
pub fn solve_track(x: &Waveform, t: &Transcription, opt: &OptimizerConfig, cfg: &LossConfig) -> Result<AbsSolution> {
    if t.is_empty() {
        return Err(Error::invalid("analysis-by-synthesis needs at least one onset"));
    }
    if x.is_empty() {
        return Err(Error::invalid("mixture is empty"));
    }
    opt.validate()?;
    let hop = StftConfig::analysis().hop_size;
    let grid = events_to_grid(t, x.len().div_ceil(hop), hop)?;
    debug_assert_eq!(grid.num_classes(), NUM_CLASSES);
    let layout = OnsetLayout::from_grid(&grid, ONE_SHOT_LEN, x.len());
    let init = init_params(&layout, opt.seed);
    solve_from(x, layout, init, opt, cfg)
}

/// `|<a, b>| / (‖a‖ ‖b‖)` over the common prefix; 0 if either is silent.
pub fn normalized_cross_correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot.abs() / (na * nb)
    }
}

/// Loss trace as `step,loss` CSV.
pub fn loss_trace_csv(trace: &[f64]) -> String {
    let mut out = String::from("step,loss\n");
    for (i, l) in trace.iter().enumerate() {
        out.push_str(&format!("{i},{l:.9e}\n"));
    }
    out
}
