//! Separation and transcription metrics, per-track reports and aggregation.

use serde::Serialize;

use crate::classes::{ClassGrouping, DrumClass, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::signal::{magnitude, StftConfig, StftPlan, Waveform};
use crate::transcription::{match_onsets, OnsetScores, Transcription, DEFAULT_TOLERANCE_SECS};

pub const METRIC_EPSILON: f64 = 1e-8;
/// Energy floor and silence threshold, in dB.
pub const SILENCE_DB: f64 = -60.0;
pub const PES_FRAME: usize = 512;

fn check_lengths(a: &Waveform, b: &Waveform) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "length mismatch: reference {} vs estimate {} samples",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// `10 log10(‖s‖² / (‖s − ŝ‖² + ε) + ε)`.
pub fn nsdr(reference: &Waveform, estimate: &Waveform) -> Result<f64> {
    check_lengths(reference, estimate)?;
    let err: f64 = reference
        .samples()
        .iter()
        .zip(estimate.samples())
        .map(|(s, e)| (s - e) * (s - e))
        .sum();
    Ok(10.0 * (reference.energy() / (err + METRIC_EPSILON) + METRIC_EPSILON).log10())
}

/// Mean over frames of the RMS over bins of `ln((|Ŝ|² + ε) / (|S|² + ε))`.
pub fn lsd(reference: &Waveform, estimate: &Waveform) -> Result<f64> {
    check_lengths(reference, estimate)?;
    let plan = StftPlan::new(StftConfig::analysis())?;
    let s = magnitude(&plan.stft(reference)?);
    let e = magnitude(&plan.stft(estimate)?);
    Ok(lsd_from_magnitudes(&s, &e))
}

/// LSD on precomputed `F x M` magnitudes.
pub fn lsd_from_magnitudes(reference: &ndarray::Array2<f64>, estimate: &ndarray::Array2<f64>) -> f64 {
    let frames = reference.ncols();
    let bins = reference.nrows() as f64;
    let total: f64 = reference
        .columns()
        .into_iter()
        .zip(estimate.columns())
        .map(|(s, e)| {
            let sq: f64 = s
                .iter()
                .zip(e.iter())
                .map(|(s, e)| {
                    let r = ((e * e + METRIC_EPSILON) / (s * s + METRIC_EPSILON)).ln();
                    r * r
                })
                .sum();
            (sq / bins).sqrt()
        })
        .sum();
    total / frames as f64
}

fn frame_energy_db(x: &[f64]) -> f64 {
    10.0 * (x.iter().map(|v| v * v).sum::<f64>() + METRIC_EPSILON).log10()
}

/// Mean estimate energy (dB, floored at −60) over frames where the reference
/// is silent. `None` when the reference has no silent frame.
/// A trailing partial frame counts as a frame.
pub fn pes(reference: &Waveform, estimate: &Waveform) -> Result<Option<f64>> {
    check_lengths(reference, estimate)?;
    let (sum, count) = reference
        .samples()
        .chunks(PES_FRAME)
        .zip(estimate.samples().chunks(PES_FRAME))
        .filter(|(r, _)| frame_energy_db(r) <= SILENCE_DB)
        .fold((0.0, 0usize), |(sum, n), (_, e)| {
            (sum + frame_energy_db(e).max(SILENCE_DB), n + 1)
        });
    Ok((count > 0).then(|| sum / count as f64))
}

/// Which estimate is scored: masked outputs get nSDR, synthesis outputs do not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Masked,
    Synthesis,
}

/// Metrics of one class (or group) of one track.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub class: String,
    pub active: bool,
    pub onsets: usize,
    pub nsdr_db: Option<f64>,
    pub lsd: Option<f64>,
    pub pes_db: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackReport {
    pub track: String,
    pub output: OutputKind,
    pub classes: Vec<ClassMetrics>,
    /// Class-agnostic onset detection scores against all reference onsets.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub onsets: Option<OnsetScores>,
}

/// Estimated onsets to score, when available.
#[derive(Debug, Clone, Copy)]
pub enum OnsetEstimate<'a> {
    PerClass(&'a Transcription),
    ClassAgnostic(&'a [f64]),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub grouping: ClassGrouping,
    pub tolerance_secs: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            grouping: ClassGrouping::Nine,
            tolerance_secs: DEFAULT_TOLERANCE_SECS,
        }
    }
}

/// Group stems by summation in class order.
pub fn group_stems(stems: &[Waveform], grouping: ClassGrouping) -> Result<Vec<(String, Vec<DrumClass>, Waveform)>> {
    if stems.len() != NUM_CLASSES {
        return Err(Error::invalid(format!(
            "expected {NUM_CLASSES} stems, got {}",
            stems.len()
        )));
    }
    let len = stems[0].len();
    grouping
        .labels()
        .into_iter()
        .map(|(label, members)| {
            let sum = Waveform::sum(len, members.iter().map(|c| &stems[c.index()]))?;
            Ok((label, members, sum))
        })
        .collect()
}

/// Score one track. `refs` and `ests` are indexed by 9-class order.
pub fn evaluate_track(
    name: &str,
    refs: &[Waveform],
    ests: &[Waveform],
    reference: &Transcription,
    estimated_onsets: Option<OnsetEstimate<'_>>,
    output: OutputKind,
    cfg: &EvalConfig,
) -> Result<TrackReport> {
    if refs.len() != ests.len() {
        return Err(Error::invalid(format!(
            "{} reference stems vs {} estimates",
            refs.len(),
            ests.len()
        )));
    }
    let len = refs.first().map(Waveform::len).unwrap_or(0);
    if refs.iter().chain(ests).any(|w| w.len() != len) {
        return Err(Error::invalid("all stems of a track must share one length"));
    }
    let ref_groups = group_stems(refs, cfg.grouping)?;
    let est_groups = group_stems(ests, cfg.grouping)?;

    let classes = ref_groups
        .into_iter()
        .zip(est_groups)
        .map(|((label, members, r), (_, _, e))| -> Result<ClassMetrics> {
            let onsets: usize = members.iter().map(|&c| reference.onset_count(c)).sum();
            let active = onsets > 0;
            let pes_db = pes(&r, &e)?;
            if !active {
                return Ok(ClassMetrics {
                    class: label,
                    active,
                    onsets,
                    nsdr_db: None,
                    lsd: None,
                    pes_db,
                    precision: None,
                    recall: None,
                });
            }
            let nsdr_db = match output {
                OutputKind::Masked => Some(nsdr(&r, &e)?),
                OutputKind::Synthesis => None,
            };
            let (precision, recall) = match estimated_onsets {
                Some(OnsetEstimate::PerClass(est)) => {
                    let scores = match_onsets(&est.times(&members), &reference.times(&members), cfg.tolerance_secs);
                    (Some(scores.precision), Some(scores.recall))
                }
                _ => (None, None),
            };
            Ok(ClassMetrics {
                class: label,
                active,
                onsets,
                nsdr_db,
                lsd: Some(lsd(&r, &e)?),
                pes_db,
                precision,
                recall,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let onsets = match estimated_onsets {
        Some(OnsetEstimate::ClassAgnostic(times)) => {
            let mut est = times.to_vec();
            est.sort_by(f64::total_cmp);
            Some(match_onsets(&est, &reference.times(&DrumClass::ALL), cfg.tolerance_secs))
        }
        _ => None,
    };
    Ok(TrackReport {
        track: name.to_string(),
        output,
        classes,
        onsets,
    })
}

/// Order statistics of a metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub min: f64,
    pub max: f64,
}

/// Linear interpolation between order statistics at position `q (n - 1)`.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn aggregate(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::invalid("cannot aggregate an empty set of values"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Summary {
        count: sorted.len(),
        mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
        median: quantile(&sorted, 0.5),
        q25: quantile(&sorted, 0.25),
        q75: quantile(&sorted, 0.75),
        min: sorted[0],
        max: sorted[sorted.len() - 1],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassSummary {
    pub class: String,
    pub summary: Summary,
}

/// Per-class and pooled statistics of one metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSummary {
    pub per_class: Vec<ClassSummary>,
    pub overall: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregates {
    pub nsdr_db: MetricSummary,
    pub lsd: MetricSummary,
    pub pes_db: MetricSummary,
    pub precision: MetricSummary,
    pub recall: MetricSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub tracks: Vec<TrackReport>,
    pub aggregates: Aggregates,
}

fn summarize(tracks: &[TrackReport], metric: fn(&ClassMetrics) -> Option<f64>) -> MetricSummary {
    let mut labels: Vec<&str> = Vec::new();
    for row in tracks.iter().flat_map(|t| &t.classes) {
        if !labels.contains(&row.class.as_str()) {
            labels.push(&row.class);
        }
    }
    let per_class = labels
        .iter()
        .filter_map(|&label| {
            let values: Vec<f64> = tracks
                .iter()
                .flat_map(|t| &t.classes)
                .filter(|r| r.class == label)
                .filter_map(metric)
                .collect();
            aggregate(&values).ok().map(|summary| ClassSummary {
                class: label.to_string(),
                summary,
            })
        })
        .collect();
    let pooled: Vec<f64> = tracks.iter().flat_map(|t| &t.classes).filter_map(metric).collect();
    MetricSummary {
        per_class,
        overall: aggregate(&pooled).ok(),
    }
}

impl MetricsReport {
    /// Tracks are sorted by name so the report does not depend on evaluation order.
    pub fn new(mut tracks: Vec<TrackReport>) -> Result<Self> {
        if tracks.is_empty() {
            return Err(Error::invalid("a report needs at least one track"));
        }
        tracks.sort_by(|a, b| a.track.cmp(&b.track));
        let aggregates = Aggregates {
            nsdr_db: summarize(&tracks, |r| r.nsdr_db),
            lsd: summarize(&tracks, |r| r.lsd),
            pes_db: summarize(&tracks, |r| r.pes_db),
            precision: summarize(&tracks, |r| r.precision),
            recall: summarize(&tracks, |r| r.recall),
        };
        Ok(Self { tracks, aggregates })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization is infallible");
        s.push('\n');
        s
    }
}
