//! Parameterized drum-machine forward model and its reverse-mode gradient.

use ndarray::Array2;

use super::loss::SpectralTarget;
use crate::drum_machine::{envelope, FrameActivations};
use crate::error::{Error, Result};

const EXP_SIGMOID_MAX: f64 = 2.0;
const EXP_SIGMOID_FLOOR: f64 = 1e-7;

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `2 σ(x)^{ln 10} + 1e-7`.
pub fn exp_sigmoid(x: f64) -> f64 {
    EXP_SIGMOID_MAX * sigmoid(x).powf(std::f64::consts::LN_10) + EXP_SIGMOID_FLOOR
}

pub fn exp_sigmoid_derivative(x: f64) -> f64 {
    let s = sigmoid(x);
    EXP_SIGMOID_MAX * std::f64::consts::LN_10 * s.powf(std::f64::consts::LN_10) * (1.0 - s)
}

/// Raw input mapping to `y`; `y` must lie strictly inside `(1e-7, 2 + 1e-7)`.
pub fn exp_sigmoid_inverse(y: f64) -> Result<f64> {
    let inner = (y - EXP_SIGMOID_FLOOR) / EXP_SIGMOID_MAX;
    if !(inner > 0.0 && inner < 1.0) {
        return Err(Error::OutOfRange(format!("{y} is outside the exp-sigmoid range")));
    }
    let s = inner.powf(1.0 / std::f64::consts::LN_10);
    Ok((s / (1.0 - s)).ln())
}

/// Unconstrained solver parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsParams {
    /// `K x R`; one-shot samples are `tanh` of these.
    pub raw_one_shots: Array2<f64>,
    /// One entry per onset, in [`OnsetLayout`] order.
    pub raw_velocities: Vec<f64>,
    pub raw_gains: Vec<f64>,
    pub raw_alphas: Vec<f64>,
}

impl AbsParams {
    pub fn zeros_like(&self) -> Self {
        Self {
            raw_one_shots: Array2::zeros(self.raw_one_shots.dim()),
            raw_velocities: vec![0.0; self.raw_velocities.len()],
            raw_gains: vec![0.0; self.raw_gains.len()],
            raw_alphas: vec![0.0; self.raw_alphas.len()],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.raw_one_shots.nrows()
    }

    pub fn one_shot_len(&self) -> usize {
        self.raw_one_shots.ncols()
    }

    pub fn num_values(&self) -> usize {
        self.raw_one_shots.len() + self.raw_velocities.len() + self.raw_gains.len() + self.raw_alphas.len()
    }

    /// Concatenation: one-shots (row-major), velocities, gains, alphas.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_values());
        out.extend(self.raw_one_shots.iter());
        out.extend(&self.raw_velocities);
        out.extend(&self.raw_gains);
        out.extend(&self.raw_alphas);
        out
    }

    /// Inverse of [`AbsParams::to_flat`] for a same-shaped parameter set.
    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_values(), "flat parameter length");
        let (shots, rest) = flat.split_at(self.raw_one_shots.len());
        for (d, s) in self.raw_one_shots.iter_mut().zip(shots) {
            *d = *s;
        }
        let (vel, rest) = rest.split_at(self.raw_velocities.len());
        self.raw_velocities.copy_from_slice(vel);
        let (gains, alphas) = rest.split_at(self.raw_gains.len());
        self.raw_gains.copy_from_slice(gains);
        self.raw_alphas.copy_from_slice(alphas);
    }

    pub fn one_shot(&self, k: usize) -> Vec<f64> {
        self.raw_one_shots.row(k).iter().map(|u| u.tanh()).collect()
    }

    pub fn velocities(&self) -> Vec<f64> {
        self.raw_velocities.iter().map(|&x| exp_sigmoid(x)).collect()
    }

    pub fn gains(&self) -> Vec<f64> {
        self.raw_gains.iter().map(|&x| exp_sigmoid(x)).collect()
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.raw_alphas.iter().map(|&x| exp_sigmoid(x)).collect()
    }
}

/// Sample positions of the fixed onsets, grouped by class.
#[derive(Debug, Clone, PartialEq)]
pub struct OnsetLayout {
    pub num_classes: usize,
    pub one_shot_len: usize,
    pub signal_len: usize,
    /// `(class, sample)` sorted by class then position.
    pub onsets: Vec<(usize, usize)>,
}

impl OnsetLayout {
    /// Onsets of `grid` that start inside a signal of `signal_len` samples.
    pub fn from_grid(grid: &FrameActivations, one_shot_len: usize, signal_len: usize) -> Self {
        let hop = grid.hop_size();
        let onsets = grid
            .onset_cells()
            .into_iter()
            .map(|(k, m)| (k, m * hop))
            .filter(|&(_, t)| t < signal_len)
            .collect();
        Self {
            num_classes: grid.num_classes(),
            one_shot_len,
            signal_len,
            onsets,
        }
    }

    pub fn onsets_of(&self, k: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.onsets
            .iter()
            .enumerate()
            .filter(move |(_, &(c, _))| c == k)
            .map(|(i, &(_, t))| (i, t))
    }

    pub fn check(&self, params: &AbsParams) -> Result<()> {
        if params.num_classes() != self.num_classes
            || params.one_shot_len() != self.one_shot_len
            || params.raw_velocities.len() != self.onsets.len()
            || params.raw_gains.len() != self.num_classes
            || params.raw_alphas.len() != self.num_classes
        {
            return Err(Error::invalid("parameter shapes do not match the onset layout"));
        }
        Ok(())
    }
}

/// Forward-pass values retained for backpropagation.
#[derive(Debug, Clone)]
pub struct Synthesis {
    /// `tanh(u_k)`.
    pub waveforms: Vec<Vec<f64>>,
    pub envelopes: Vec<Vec<f64>>,
    /// Enveloped one-shots `s_k = w_k ⊙ e_k`.
    pub one_shots: Vec<Vec<f64>>,
    pub velocities: Vec<f64>,
    pub gains: Vec<f64>,
    /// Sequenced one-shots before the track gain.
    pub unscaled: Vec<Vec<f64>>,
    pub stems: Vec<Vec<f64>>,
    pub mixture: Vec<f64>,
}

pub fn synthesize(params: &AbsParams, layout: &OnsetLayout) -> Result<Synthesis> {
    layout.check(params)?;
    let (k_count, r, len) = (layout.num_classes, layout.one_shot_len, layout.signal_len);
    let velocities = params.velocities();
    let gains = params.gains();
    let alphas = params.alphas();
    let mut waveforms = Vec::with_capacity(k_count);
    let mut envelopes = Vec::with_capacity(k_count);
    let mut one_shots = Vec::with_capacity(k_count);
    let mut unscaled = Vec::with_capacity(k_count);
    let mut stems = Vec::with_capacity(k_count);
    for k in 0..k_count {
        let w = params.one_shot(k);
        let e = envelope(alphas[k], r);
        let s: Vec<f64> = w.iter().zip(&e).map(|(a, b)| a * b).collect();
        let mut y = vec![0.0; len];
        for (i, t) in layout.onsets_of(k) {
            let v = velocities[i];
            let end = (t + r).min(len);
            for (dst, &src) in y[t..end].iter_mut().zip(&s) {
                *dst += v * src;
            }
        }
        stems.push(y.iter().map(|v| v * gains[k]).collect::<Vec<f64>>());
        waveforms.push(w);
        envelopes.push(e);
        one_shots.push(s);
        unscaled.push(y);
    }
    let mut mixture = vec![0.0; len];
    for stem in &stems {
        for (m, v) in mixture.iter_mut().zip(stem) {
            *m += v;
        }
    }
    Ok(Synthesis {
        waveforms,
        envelopes,
        one_shots,
        velocities,
        gains,
        unscaled,
        stems,
        mixture,
    })
}

/// Chain rule from `dL/dx̂` back to the raw parameters.
pub fn backpropagate(params: &AbsParams, layout: &OnsetLayout, synth: &Synthesis, dx: &[f64]) -> AbsParams {
    let mut grad = params.zeros_like();
    let (r, len) = (layout.one_shot_len, layout.signal_len);
    for k in 0..layout.num_classes {
        let g = synth.gains[k];
        let dg: f64 = dx.iter().zip(&synth.unscaled[k]).map(|(a, b)| a * b).sum();
        grad.raw_gains[k] = dg * exp_sigmoid_derivative(params.raw_gains[k]);

        let s = &synth.one_shots[k];
        let mut ds = vec![0.0; r];
        for (i, t) in layout.onsets_of(k) {
            let end = (t + r).min(len);
            let window = &dx[t..end];
            let dv: f64 = window.iter().zip(s).map(|(a, b)| a * b).sum::<f64>() * g;
            grad.raw_velocities[i] = dv * exp_sigmoid_derivative(params.raw_velocities[i]);
            let scale = g * synth.velocities[i];
            for (acc, &d) in ds.iter_mut().zip(window) {
                *acc += scale * d;
            }
        }

        let w = &synth.waveforms[k];
        let e = &synth.envelopes[k];
        let mut dalpha = 0.0;
        for j in 0..r {
            let dw = ds[j] * e[j];
            grad.raw_one_shots[[k, j]] = dw * (1.0 - w[j] * w[j]);
            dalpha += ds[j] * w[j] * e[j] * (-20.0 * j as f64 / r as f64);
        }
        grad.raw_alphas[k] = dalpha * exp_sigmoid_derivative(params.raw_alphas[k]);
    }
    grad
}

/// Loss of the synthesized mixture against `target` and its gradient in raw parameters.
pub fn loss_and_gradient(params: &AbsParams, layout: &OnsetLayout, target: &SpectralTarget) -> Result<(f64, AbsParams)> {
    let synth = synthesize(params, layout)?;
    let (loss, dx) = target.loss_and_gradient(&synth.mixture)?;
    Ok((loss, backpropagate(params, layout, &synth, &dx)))
}
