//! Multi-resolution STFT reconstruction loss and its gradient.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::signal::{StftConfig, StftPlan, Waveform};

/// Scales and log floor of the multi-resolution loss. Each scale uses hop = window / 4.
#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    pub scales: Vec<usize>,
    pub log_floor: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            scales: vec![2048, 1024, 512, 256],
            log_floor: 1e-5,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() {
            return Err(Error::Config("loss needs at least one scale".into()));
        }
        if self.scales.iter().any(|&s| !s.is_power_of_two() || s < 4) {
            return Err(Error::Config(format!(
                "loss scales must be powers of two >= 4, got {:?}",
                self.scales
            )));
        }
        if self.scales.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::Config("loss scales must be strictly descending".into()));
        }
        if !(self.log_floor > 0.0) {
            return Err(Error::Config("log floor must be positive".into()));
        }
        Ok(())
    }

    fn plans(&self) -> Result<Vec<StftPlan>> {
        self.validate()?;
        self.scales
            .iter()
            .map(|&n| StftPlan::new(StftConfig::new(n, n / 4)))
            .collect()
    }
}

/// Target magnitudes at every scale, computed once per solve.
#[derive(Debug, Clone)]
pub struct SpectralTarget {
    plans: Vec<StftPlan>,
    magnitudes: Vec<Vec<f64>>,
    len: usize,
    log_floor: f64,
}

impl SpectralTarget {
    pub fn new(x: &[f64], cfg: &LossConfig) -> Result<Self> {
        let plans = cfg.plans()?;
        let magnitudes = plans
            .iter()
            .map(|p| p.analyze(x).iter().map(|c| c.norm()).collect())
            .collect();
        Ok(Self {
            plans,
            magnitudes,
            len: x.len(),
            log_floor: cfg.log_floor,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn check(&self, x_hat: &[f64]) -> Result<()> {
        if x_hat.len() != self.len {
            return Err(Error::invalid(format!(
                "length mismatch: target {} vs estimate {} samples",
                self.len,
                x_hat.len()
            )));
        }
        Ok(())
    }

    fn cell(&self, a: f64, b: f64) -> f64 {
        (a - b).abs() + ((a + self.log_floor).ln() - (b + self.log_floor).ln()).abs()
    }

    pub fn loss(&self, x_hat: &[f64]) -> Result<f64> {
        self.check(x_hat)?;
        let per_scale: Vec<f64> = self
            .plans
            .par_iter()
            .zip(&self.magnitudes)
            .map(|(plan, target)| {
                plan.analyze(x_hat)
                    .iter()
                    .zip(target)
                    .map(|(c, &a)| self.cell(a, c.norm()))
                    .sum()
            })
            .collect();
        Ok(per_scale.iter().sum())
    }

    /// Sign of `|X̂| − |X|` per cell over all scales. The loss is smooth on
    /// any segment along which this pattern is constant.
    pub fn residual_signs(&self, x_hat: &[f64]) -> Result<Vec<i8>> {
        self.check(x_hat)?;
        Ok(self
            .plans
            .iter()
            .zip(&self.magnitudes)
            .flat_map(|(plan, target)| {
                plan.analyze(x_hat)
                    .iter()
                    .zip(target)
                    .map(|(c, &a)| (c.norm() - a).signum() as i8)
                    .collect::<Vec<_>>()
            })
            .collect())
    }

    /// Loss and `dL/dx̂`. Per-scale results are combined in scale order.
    pub fn loss_and_gradient(&self, x_hat: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check(x_hat)?;
        let eps = self.log_floor;
        let per_scale: Vec<(f64, Vec<f64>)> = self
            .plans
            .par_iter()
            .zip(&self.magnitudes)
            .map(|(plan, target)| {
                let spec = plan.analyze(x_hat);
                let mut loss = 0.0;
                let grad: Vec<Complex64> = spec
                    .iter()
                    .zip(target)
                    .map(|(&c, &a)| {
                        let b = c.norm();
                        loss += self.cell(a, b);
                        let diff = b - a;
                        if b == 0.0 || diff == 0.0 {
                            return Complex64::new(0.0, 0.0);
                        }
                        // Both terms are monotone in b, so they share the sign of b - a.
                        let d_mag = diff.signum() * (1.0 + 1.0 / (b + eps));
                        c * (d_mag / b)
                    })
                    .collect();
                (loss, plan.analyze_adjoint(&grad, x_hat.len()))
            })
            .collect();
        let mut total = 0.0;
        let mut grad = vec![0.0; x_hat.len()];
        for (loss, g) in per_scale {
            total += loss;
            for (acc, v) in grad.iter_mut().zip(g) {
                *acc += v;
            }
        }
        Ok((total, grad))
    }
}

/// Σ over scales of `‖|X| − |X̂|‖₁ + ‖ln(|X| + ε) − ln(|X̂| + ε)‖₁`.
pub fn recon_loss(x: &Waveform, x_hat: &Waveform, cfg: &LossConfig) -> Result<f64> {
    if x.len() != x_hat.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {} samples",
            x.len(),
            x_hat.len()
        )));
    }
    SpectralTarget::new(x.samples(), cfg)?.loss(x_hat.samples())
}
