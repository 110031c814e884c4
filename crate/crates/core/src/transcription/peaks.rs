use serde::{Deserialize, Serialize};

/// Moving-maximum / moving-average peak picker parameters, in frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakPickConfig {
    pub pre_max: usize,
    pub post_max: usize,
    pub pre_avg: usize,
    pub post_avg: usize,
    pub delta: f64,
    pub wait: usize,
}

impl Default for PeakPickConfig {
    fn default() -> Self {
        Self {
            pre_max: 1,
            post_max: 1,
            pre_avg: 2,
            post_avg: 2,
            delta: 0.05,
            wait: 2,
        }
    }
}

/// Frames that are a local maximum, exceed the local mean by `delta`, and
/// follow the previous pick by more than `wait` frames. Windows are clipped
/// at the curve boundaries.
pub fn peak_pick(curve: &[f64], cfg: &PeakPickConfig) -> Vec<usize> {
    let n = curve.len();
    let mut picks = Vec::new();
    let mut last: Option<usize> = None;
    for i in 0..n {
        let max_lo = i.saturating_sub(cfg.pre_max);
        let max_hi = (i + cfg.post_max + 1).min(n);
        let local_max = curve[max_lo..max_hi]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if curve[i] != local_max {
            continue;
        }
        let avg_lo = i.saturating_sub(cfg.pre_avg);
        let avg_hi = (i + cfg.post_avg + 1).min(n);
        let window = &curve[avg_lo..avg_hi];
        let mean = window.iter().sum::<f64>() / window.len() as f64;
        if curve[i] < mean + cfg.delta {
            continue;
        }
        if let Some(prev) = last {
            if i - prev <= cfg.wait {
                continue;
            }
        }
        picks.push(i);
        last = Some(i);
    }
    picks
}
