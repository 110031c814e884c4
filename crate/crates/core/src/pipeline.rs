//! End-to-end commands: render, generate, separate, detect onsets, evaluate.
//!
//! Every command reads and writes files only through [`crate::io`], and all
//! randomness derives from the seed in [`RunConfig`].

use std::path::{Path, PathBuf};

use ndarray::Array3;
use rayon::prelude::*;
use serde::Serialize;

use crate::abs::{loss_trace_csv, solve_track, AbsSolution};
use crate::classes::DrumClass;
use crate::drum_machine::synth::synthetic_kit;
use crate::drum_machine::{generate_dataset, render, EnvelopeParams, GenerationSpec, OneShotBank, TrackGains, ONE_SHOT_LEN};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_track, MetricsReport, OnsetEstimate, OutputKind, TrackReport};
use crate::io::{self, RunConfig};
use crate::masking::{apply_masks, compute_masks};
use crate::nmfd::nmfd_run;
use crate::signal::{magnitude, StftPlan, Waveform, SAMPLE_RATE};
use crate::transcription::{events_to_grid, peak_pick, spectral_flux_curve, PeakPickConfig, Transcription};

pub const MIXTURE_FILE: &str = "mixture.wav";
pub const TRANSCRIPTION_FILE: &str = "transcription.csv";
pub const CONFIG_ECHO_FILE: &str = "config.txt";
pub const MASKED_DIR: &str = "masked";
pub const SYNTHESIS_DIR: &str = "synthesis";

/// Render one track from a bank and a transcription into `out`.
///
/// The default duration ends one one-shot length after the last onset.
pub fn render_track(bank: &OneShotBank, t: &Transcription, duration_secs: Option<f64>, cfg: &RunConfig, out: &Path) -> Result<Vec<Waveform>> {
    let len = match duration_secs {
        Some(d) if d > 0.0 && d.is_finite() => (d * SAMPLE_RATE as f64).round() as usize,
        Some(d) => return Err(Error::invalid(format!("duration must be positive, got {d}"))),
        None => {
            let last = t.events().iter().map(|e| e.time).fold(0.0, f64::max);
            (last * SAMPLE_RATE as f64).round() as usize + ONE_SHOT_LEN
        }
    };
    let hop = cfg.stft.hop_size;
    let grid = events_to_grid(t, len.div_ceil(hop), hop)?;
    let rendered = render(bank, &grid, &TrackGains::unit(), &EnvelopeParams::flat(), len)?;
    io::write_stems(out, &rendered.stems)?;
    io::write_wav(out.join(MIXTURE_FILE), &rendered.mixture)?;
    io::write_transcription(t, out.join(TRANSCRIPTION_FILE))?;
    io::write_text(out.join(CONFIG_ECHO_FILE), &cfg.to_text())?;
    Ok(rendered.stems)
}

#[derive(Debug, Serialize)]
struct ManifestEntry<'a> {
    track: &'a str,
    kit_id: &'a str,
    onsets: usize,
    output_gain: f64,
}

/// Generate `tracks` synthetic tracks into `out/<track>/`.
pub fn generate(banks: &[OneShotBank], tracks: usize, duration_secs: Option<f64>, cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let mut spec = GenerationSpec {
        tracks,
        hop_size: cfg.stft.hop_size,
        ..GenerationSpec::default()
    };
    if let Some(d) = duration_secs {
        spec.duration_secs = d;
    }
    let dataset = generate_dataset(banks, cfg.seed, &spec)?;
    io::create_dir(out)?;
    let mut dirs = Vec::with_capacity(dataset.len());
    for track in &dataset {
        let dir = out.join(&track.name);
        io::write_stems(&dir, &track.stems)?;
        io::write_wav(dir.join(MIXTURE_FILE), &track.mixture)?;
        io::write_transcription(&track.transcription, dir.join(TRANSCRIPTION_FILE))?;
        dirs.push(dir);
    }
    let manifest: Vec<ManifestEntry> = dataset
        .iter()
        .map(|t| ManifestEntry {
            track: &t.name,
            kit_id: &t.kit_id,
            onsets: t.transcription.len(),
            output_gain: t.output_gain,
        })
        .collect();
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serialization is infallible");
    io::write_text(out.join("manifest.json"), &(json + "\n"))?;
    io::write_text(out.join(CONFIG_ECHO_FILE), &cfg.to_text())?;
    Ok(dirs)
}

/// Mask the mixture with per-class magnitude estimates and invert.
pub fn masked_stems(mixture: &Waveform, estimates: &[ndarray::Array2<f64>], cfg: &RunConfig) -> Result<Vec<Waveform>> {
    let masks = compute_masks(estimates, cfg.mask_alpha, cfg.mask_epsilon)?;
    apply_masks(mixture, &masks, cfg.stft)
}

/// Informed NMFD; writes `masked/<class>.wav` and `magnitudes.npy` (K x F x M).
pub fn separate_nmfd(mixture: &Waveform, t: &Transcription, bank: Option<&OneShotBank>, cfg: &RunConfig, out: &Path) -> Result<Vec<Waveform>> {
    let case = cfg.nmfd_case();
    if case.needs_bank() && bank.is_none() {
        return Err(Error::invalid(format!("NMFD case {} requires --bank", case.id)));
    }
    let plan = StftPlan::new(cfg.stft)?;
    let v = magnitude(&plan.stft(mixture)?);
    let result = nmfd_run(&v, t, bank, &case, cfg.stft)?;
    log::info!(
        "nmfd case {}: divergence {:.6e} -> {:.6e}",
        case.id,
        result.divergence_trace[0],
        result.divergence_trace.last().copied().unwrap_or(f64::NAN)
    );
    let stems = masked_stems(mixture, &result.per_class, cfg)?;
    io::write_stems(out.join(MASKED_DIR), &stems)?;
    let (f, m) = v.dim();
    let mut cube = Array3::zeros((result.per_class.len(), f, m));
    for (k, p) in result.per_class.iter().enumerate() {
        cube.index_axis_mut(ndarray::Axis(0), k).assign(p);
    }
    let npy = out.join("magnitudes.npy");
    io::atomic_write(&npy, |file| {
        ndarray_npy::WriteNpyExt::write_npy(&cube, file).map_err(|e| Error::UnsupportedFormat {
            path: npy.clone(),
            message: e.to_string(),
        })
    })?;
    io::write_text(out.join(CONFIG_ECHO_FILE), &cfg.to_text())?;
    Ok(stems)
}

#[derive(Debug, Serialize)]
struct SolvedParams<'a> {
    class: &'a str,
    gain: f64,
    alpha: f64,
    onsets: Vec<(f64, f64)>,
}

/// Analysis-by-synthesis; writes `synthesis/`, `masked/`, `one_shots/`,
/// `loss_trace.csv` and `params.json`.
pub fn separate_abs(mixture: &Waveform, t: &Transcription, cfg: &RunConfig, out: &Path) -> Result<AbsSolution> {
    let solution = solve_track(mixture, t, &cfg.solver, &cfg.loss)?;
    let plan = StftPlan::new(cfg.stft)?;
    let estimates = solution
        .stems
        .iter()
        .map(|s| Ok(magnitude(&plan.stft(s)?)))
        .collect::<Result<Vec<_>>>()?;
    let masked = masked_stems(mixture, &estimates, cfg)?;
    io::write_stems(out.join(SYNTHESIS_DIR), &solution.stems)?;
    io::write_stems(out.join(MASKED_DIR), &masked)?;
    io::write_stems(out.join("one_shots"), &solution.one_shots)?;
    io::write_text(out.join("loss_trace.csv"), &loss_trace_csv(&solution.loss_trace))?;
    let params: Vec<SolvedParams> = DrumClass::ALL
        .iter()
        .map(|c| {
            let k = c.index();
            SolvedParams {
                class: c.token(),
                gain: solution.gains[k],
                alpha: solution.alphas[k],
                onsets: solution
                    .layout
                    .onsets_of(k)
                    .map(|(i, pos)| (pos as f64 / SAMPLE_RATE as f64, solution.velocities[i]))
                    .collect(),
            }
        })
        .collect();
    let json = serde_json::to_string_pretty(&params).expect("parameter serialization is infallible");
    io::write_text(out.join("params.json"), &(json + "\n"))?;
    io::write_text(out.join(CONFIG_ECHO_FILE), &cfg.to_text())?;
    Ok(solution)
}

/// Class-agnostic onset times from spectral flux peaks.
pub fn detect_onsets(mixture: &Waveform) -> Vec<f64> {
    let curve = spectral_flux_curve(mixture);
    let hop = crate::signal::StftConfig::analysis().hop_size;
    peak_pick(&curve, &PeakPickConfig::default())
        .into_iter()
        .map(|m| (m * hop) as f64 / SAMPLE_RATE as f64)
        .collect()
}

/// Inputs for scoring one track.
#[derive(Debug, Clone)]
pub struct EvalInput {
    pub refs: PathBuf,
    pub ests: PathBuf,
    pub transcription: PathBuf,
}

/// Score tracks and write `report.json`. `onsets` optionally points at an
/// estimated transcription (per-class or class-agnostic) for every track.
pub fn evaluate(inputs: &[EvalInput], output: OutputKind, onsets: Option<&Path>, cfg: &RunConfig, report_path: &Path) -> Result<MetricsReport> {
    let rows = inputs
        .par_iter()
        .map(|input| -> Result<TrackReport> {
            let refs = io::read_stems(&input.refs)?;
            let ests = io::read_stems(&input.ests)?;
            let t = io::read_transcription(&input.transcription)?;
            let name = input
                .refs
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| input.refs.display().to_string());
            let per_class;
            let agnostic;
            let estimate = match onsets {
                None => None,
                Some(path) => match io::read_transcription(path) {
                    Ok(est) => {
                        per_class = est;
                        Some(OnsetEstimate::PerClass(&per_class))
                    }
                    Err(_) => {
                        agnostic = io::read_onset_times(path)?;
                        Some(OnsetEstimate::ClassAgnostic(&agnostic))
                    }
                },
            };
            evaluate_track(&name, &refs, &ests, &t, estimate, output, &cfg.eval)
        })
        .collect::<Result<Vec<_>>>()?;
    let report = MetricsReport::new(rows)?;
    io::write_text(report_path, &report.to_json())?;
    Ok(report)
}

/// Write `count` procedural kits as `out/kit_NN/`.
pub fn synth_banks(count: usize, seed: u64, out: &Path) -> Result<Vec<PathBuf>> {
    if count == 0 {
        return Err(Error::invalid("at least one kit must be requested"));
    }
    (0..count)
        .map(|i| {
            let id = format!("kit_{i:02}");
            let dir = out.join(&id);
            io::write_bank(&dir, &synthetic_kit(&id, seed.wrapping_add(i as u64)))?;
            Ok(dir)
        })
        .collect()
}
