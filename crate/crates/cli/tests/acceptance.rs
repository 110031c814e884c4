//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails. Built with `harness = false`.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use drumsep::abs::{loss_and_gradient, normalized_cross_correlation, synthesize, AbsParams, LossConfig, OnsetLayout, SpectralTarget};
use drumsep::drum_machine::synth::{noise_burst, thump};
use drumsep::drum_machine::{sequence, FrameActivations, OneShotBank, ONE_SHOT_LEN};
use drumsep::evaluation::{evaluate_track, lsd, nsdr, pes, EvalConfig, OnsetEstimate, OutputKind};
use drumsep::io;
use drumsep::masking::{apply_masks, compute_masks, DEFAULT_MASK_EPSILON};
use drumsep::nmfd::{model_divergence, nmfd_step, NmfdModel, NMFD_EPSILON};
use drumsep::signal::{magnitude, StftConfig, StftPlan};
use drumsep::transcription::{match_onsets, OnsetEvent, Transcription, DEFAULT_TOLERANCE_SECS};
use drumsep::{ClassGrouping, DrumClass, Waveform, SAMPLE_RATE};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_drumsep")
}

fn run(args: &[&str]) -> Result<(), String> {
    let out = Command::new(bin()).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("`drumsep {}` failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn p(path: &Path) -> &str {
    path.to_str().expect("temporary paths are UTF-8")
}

fn naive_convolution(w: &[f64], a: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; a.len()];
    for (t0, &v) in a.iter().enumerate() {
        if v != 0.0 {
            for (j, &s) in w.iter().enumerate().take(a.len() - t0) {
                y[t0 + j] += v * s;
            }
        }
    }
    y
}

fn sequencer_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let w: Vec<f64> = (0..rng.random_range(1..=ONE_SHOT_LEN)).map(|_| rng.random_range(-1.0..1.0)).collect();
        let len = rng.random_range(1..=2 * SAMPLE_RATE as usize);
        let mut a = vec![0.0; len];
        for _ in 0..rng.random_range(0..12) {
            a[rng.random_range(0..len)] = rng.random_range(0.0..2.0);
        }
        let y = sequence(&w, &a);
        let oracle = naive_convolution(&w, &a);
        for (x, o) in y.samples().iter().zip(&oracle) {
            worst = worst.max((x - o).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(worst < 1e-6 && secs < 5.0, format!("max error {worst:.2e}, {secs:.2} s"))
}

fn stft_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for cfg in [StftConfig::new(2048, 512), StftConfig::new(1024, 256)] {
        let plan = StftPlan::new(cfg).map_err(|e| e.to_string())?;
        for _ in 0..20 {
            let x = Waveform::new((0..SAMPLE_RATE as usize).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let y = plan.istft(&plan.stft(&x).unwrap()).unwrap();
            for (a, b) in x.samples().iter().zip(y.samples()) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    check(worst < 1e-6, format!("max error {worst:.2e} over 40 signals"))
}

fn tiny_instance(seed: u64) -> (AbsParams, OnsetLayout, Waveform) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (k, r, len, hop) = (2, 64, 256, 16);
    let mut o = Array2::zeros((k, len / hop));
    for c in 0..k {
        for _ in 0..2 {
            o[[c, rng.random_range(0..len / hop)]] = 1.0;
        }
    }
    let grid = FrameActivations::new(o.clone(), o, hop).unwrap();
    let layout = OnsetLayout::from_grid(&grid, r, len);
    let params = AbsParams {
        raw_one_shots: Array2::from_shape_simple_fn((k, r), || rng.random_range(-1.0..1.0)),
        raw_velocities: (0..layout.onsets.len()).map(|_| rng.random_range(-0.5..1.5)).collect(),
        raw_gains: (0..k).map(|_| rng.random_range(-0.5..1.5)).collect(),
        raw_alphas: (0..k).map(|_| rng.random_range(-4.0..-1.0)).collect(),
    };
    let x = Waveform::new((0..len).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    (params, layout, x)
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let cfg = LossConfig::default();
    let h = 1e-4;
    let (mut worst, mut checked, mut skipped) = (0.0f64, 0, 0);
    for seed in 0..50 {
        let (params, layout, x) = tiny_instance(seed);
        let target = SpectralTarget::new(x.samples(), &cfg).unwrap();
        let (_, grad) = loss_and_gradient(&params, &layout, &target).unwrap();
        let analytic = grad.to_flat();
        let base = params.to_flat();
        let perturbed = |i: usize, d: f64| {
            let mut q = params.clone();
            let mut flat = base.clone();
            flat[i] += d;
            q.set_flat(&flat);
            synthesize(&q, &layout).unwrap().mixture
        };
        let central = |i: usize, h: f64| (target.loss(&perturbed(i, h)).unwrap() - target.loss(&perturbed(i, -h)).unwrap()) / (2.0 * h);
        for i in 0..base.len() {
            // Coordinates whose stencil crosses a kink of the L1 terms have no derivative to compare.
            let signs = target.residual_signs(&perturbed(i, 0.0)).unwrap();
            if [h, -h, h / 2.0, -h / 2.0].iter().any(|&d| target.residual_signs(&perturbed(i, d)).unwrap() != signs) {
                skipped += 1;
                continue;
            }
            let fd = (4.0 * central(i, h / 2.0) - central(i, h)) / 3.0;
            let err = (fd - analytic[i]).abs() / fd.abs().max(analytic[i].abs()).max(1e-8);
            worst = worst.max(err);
            checked += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst < 1e-4 && secs < 60.0,
        format!("max relative error {worst:.2e} over {checked} coordinates ({skipped} kink stencils skipped), {secs:.1} s"),
    )
}

/// Two-class fixture with disjoint-band one-shots.
struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    bank: OneShotBank,
    stems: Vec<Waveform>,
    mixture: Waveform,
}

const FIXTURE_CLASSES: [DrumClass; 2] = [DrumClass::Kick, DrumClass::HihatClosed];

fn fixture() -> Result<Fixture, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path().to_path_buf();
    let mut shots = vec![Waveform::zeros(ONE_SHOT_LEN); 9];
    shots[DrumClass::Kick.index()] = thump(150.0, 50.0, 0.25, 250.0);
    shots[DrumClass::HihatClosed.index()] = noise_burst(7, 0.02, 7000.0);
    let bank = OneShotBank::new("fixture", shots).unwrap();
    io::write_bank(root.join("bank"), &bank).map_err(|e| e.to_string())?;
    let frame_time = |m: usize| (m * 512) as f64 / SAMPLE_RATE as f64;
    let mut events = Vec::new();
    for (m, v) in [10, 100, 190, 300, 410].into_iter().zip([1.0, 0.8, 0.9, 0.7, 1.0]) {
        events.push(OnsetEvent { time: frame_time(m), class: DrumClass::Kick, velocity: v });
    }
    for (m, v) in [50, 140, 240, 350, 460].into_iter().zip([0.9, 1.0, 0.6, 0.8, 1.0]) {
        events.push(OnsetEvent { time: frame_time(m), class: DrumClass::HihatClosed, velocity: v });
    }
    let t = Transcription::new(events).unwrap();
    io::write_transcription(&t, root.join("transcription.csv")).map_err(|e| e.to_string())?;
    let track = root.join("track");
    run(&["render", "--bank", p(&root.join("bank")), "--transcription", p(&root.join("transcription.csv")), "--out", p(&track), "--duration", "6"])?;
    let stems = io::read_stems(&track).map_err(|e| e.to_string())?;
    let mixture = io::read_wav(track.join("mixture.wav")).map_err(|e| e.to_string())?;
    Ok(Fixture { _dir: dir, root, bank, stems, mixture })
}

fn self_inversion(fx: &Fixture) -> Outcome {
    let out = fx.root.join("abs");
    let start = Instant::now();
    run(&[
        "separate", "abs", "--mixture", p(&fx.root.join("track/mixture.wav")),
        "--transcription", p(&fx.root.join("transcription.csv")), "--out", p(&out), "--steps", "1000",
    ])
    .map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let shots = io::read_stems(out.join("one_shots")).map_err(|e| e.to_string())?;
    let masked = io::read_stems(out.join("masked")).map_err(|e| e.to_string())?;
    let mut ok = secs < 600.0;
    let mut parts = Vec::new();
    for class in FIXTURE_CLASSES {
        let k = class.index();
        let ncc = normalized_cross_correlation(shots[k].samples(), fx.bank.get(class).samples());
        let sdr = nsdr(&fx.stems[k], &masked[k]).unwrap();
        ok &= ncc > 0.9 && sdr > 10.0;
        parts.push(format!("{class}: ncc {ncc:.3}, masked nSDR {sdr:.2} dB"));
    }
    check(ok, format!("{}; {secs:.0} s", parts.join("; ")))
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(0.0..1.0))
}

fn nmfd_criterion(fx: &Fixture) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_rise = f64::NEG_INFINITY;
    for _ in 0..50 {
        let (f, m, k, l) = (rng.random_range(4..16), rng.random_range(8..32), rng.random_range(1..4), rng.random_range(1..6));
        let v = random_matrix(&mut rng, f, m);
        let templates: Vec<_> = (0..k).map(|_| random_matrix(&mut rng, f, l)).collect();
        let h = random_matrix(&mut rng, k, m);
        let mut model = NmfdModel::new(&templates, h, false, NMFD_EPSILON).unwrap();
        let mut prev = model_divergence(&model, &v);
        for _ in 0..20 {
            nmfd_step(&mut model, &v).unwrap();
            let d = model_divergence(&model, &v);
            worst_rise = worst_rise.max(d - prev);
            prev = d;
        }
    }
    let out = fx.root.join("nmfd");
    run(&[
        "separate", "nmfd", "--case", "1a", "--mixture", p(&fx.root.join("track/mixture.wav")),
        "--transcription", p(&fx.root.join("transcription.csv")), "--bank", p(&fx.root.join("bank")), "--out", p(&out),
    ])?;
    let masked = io::read_stems(out.join("masked")).map_err(|e| e.to_string())?;
    let mut ok = worst_rise <= 1e-9;
    let mut parts = vec![format!("largest divergence increase {worst_rise:.2e}")];
    for class in FIXTURE_CLASSES {
        let sdr = nsdr(&fx.stems[class.index()], &masked[class.index()]).unwrap();
        ok &= sdr > 6.0;
        parts.push(format!("{class} case 1a nSDR {sdr:.2} dB"));
    }
    check(ok, parts.join("; "))
}

fn masking_partition(fx: &Fixture) -> Outcome {
    let plan = StftPlan::new(StftConfig::analysis()).unwrap();
    let bank_estimates: Vec<_> = fx.stems.iter().map(|s| magnitude(&plan.stft(s).unwrap())).collect();
    let eps = DEFAULT_MASK_EPSILON;
    let masks = compute_masks(&bank_estimates, 1.0, eps).unwrap();
    let total = masks.total();
    let energy: Array2<f64> = bank_estimates.iter().fold(Array2::zeros(total.dim()), |acc, e| acc + e);
    let (mut worst_deficit, mut over) = (0.0f64, false);
    for (s, e) in total.iter().zip(energy.iter()) {
        if *e >= 1e3 * eps {
            worst_deficit = worst_deficit.max(1.0 - s);
            over |= *s >= 1.0;
        }
    }
    let stems = apply_masks(&fx.mixture, &masks, StftConfig::analysis()).unwrap();
    let sum = Waveform::sum(fx.mixture.len(), &stems).unwrap();
    let err: f64 = sum.samples().iter().zip(fx.mixture.samples()).map(|(a, b)| (a - b).powi(2)).sum();
    let rel_db = 10.0 * (err / fx.mixture.energy()).log10();
    check(
        worst_deficit <= 1e-6 && !over && rel_db < -60.0,
        format!("max 1 - sum(M) {worst_deficit:.2e} where energy >= 1e3 eps; mixture reconstruction {rel_db:.1} dB"),
    )
}

fn metric_closed_forms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let raw: Vec<f64> = (0..4096).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    let s = Waveform::new(raw.iter().map(|v| v / norm).collect()).unwrap();
    let sdr = nsdr(&s, &s).unwrap();
    let l = lsd(&s, &s).unwrap();
    let silence = Waveform::zeros(4096);
    let pe = pes(&silence, &silence).unwrap();
    let times = [0.1, 0.5, 1.25];
    let scores = match_onsets(&times, &times, DEFAULT_TOLERANCE_SECS);
    check(
        (sdr - 80.0).abs() < 1e-3 && l == 0.0 && pe == Some(-60.0) && scores.precision == 1.0 && scores.recall == 1.0,
        format!("nSDR {sdr:.6} dB, LSD {l}, PES {pe:?}, P/R ({}, {})", scores.precision, scores.recall),
    )
}

fn dir_files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let banks = dir.path().join("banks");
    run(&["synth-bank", "--count", "1", "--seed", "3", "--out", p(&banks)])?;
    let pipeline = |name: &str| -> Result<PathBuf, String> {
        let root = dir.path().join(name);
        let data = root.join("data");
        run(&["generate", "--banks", p(&banks.join("kit_00")), "--tracks", "1", "--seed", "11", "--duration", "2", "--out", p(&data)])?;
        let track = data.join("track_0000");
        let sep = root.join("sep");
        run(&[
            "separate", "abs", "--mixture", p(&track.join("mixture.wav")), "--transcription",
            p(&track.join("transcription.csv")), "--out", p(&sep), "--steps", "5", "--seed", "11",
        ])?;
        run(&[
            "evaluate", "--refs", p(&track), "--ests", p(&sep.join("masked")), "--transcription",
            p(&track.join("transcription.csv")), "--out", p(&root.join("report.json")),
        ])?;
        Ok(root)
    };
    let a = pipeline("a")?;
    let b = pipeline("b")?;
    let files = dir_files(&a);
    if files != dir_files(&b) {
        return Err("runs produced different file sets".into());
    }
    let differing: Vec<_> = files
        .iter()
        .filter(|f| std::fs::read(a.join(f)).unwrap() != std::fs::read(b.join(f)).unwrap())
        .map(|f| f.display().to_string())
        .collect();
    let wavs = files.iter().filter(|f| f.extension().is_some_and(|e| e == "wav")).count();
    check(differing.is_empty(), format!("{} files compared ({wavs} WAVs), differing: {differing:?}", files.len()))
}

fn five_class_grouping() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let len = SAMPLE_RATE as usize;
    let noise = |rng: &mut ChaCha8Rng, scale: f64| -> Vec<f64> { (0..len).map(|_| scale * rng.random_range(-1.0..1.0)).collect() };
    let mut refs = vec![Waveform::zeros(len); 9];
    let mut ests = vec![Waveform::zeros(len); 9];
    for class in [DrumClass::HihatClosed, DrumClass::HihatOpen] {
        let mut r = vec![0.0; len];
        let at = if class == DrumClass::HihatClosed { 4000 } else { 20_000 };
        r[at..at + 8000].copy_from_slice(&noise(&mut rng, 0.5)[..8000]);
        let e: Vec<f64> = r.iter().zip(noise(&mut rng, 0.01)).map(|(a, b)| a + b).collect();
        refs[class.index()] = Waveform::new(r).unwrap();
        ests[class.index()] = Waveform::new(e).unwrap();
    }
    let t = Transcription::new(vec![
        OnsetEvent { time: 4000.0 / 44_100.0, class: DrumClass::HihatClosed, velocity: 1.0 },
        OnsetEvent { time: 20_000.0 / 44_100.0, class: DrumClass::HihatOpen, velocity: 1.0 },
    ])
    .unwrap();
    let est_t = Transcription::new(vec![
        OnsetEvent { time: 4100.0 / 44_100.0, class: DrumClass::HihatClosed, velocity: 1.0 },
        OnsetEvent { time: 0.8, class: DrumClass::HihatOpen, velocity: 1.0 },
    ])
    .unwrap();
    let cfg = EvalConfig { grouping: ClassGrouping::Five, tolerance_secs: DEFAULT_TOLERANCE_SECS };
    let report = evaluate_track("hihat", &refs, &ests, &t, Some(OnsetEstimate::PerClass(&est_t)), OutputKind::Masked, &cfg).unwrap();
    let members = [DrumClass::HihatClosed, DrumClass::HihatOpen];
    let summed = |stems: &[Waveform]| Waveform::sum(len, members.iter().map(|c| &stems[c.index()])).unwrap();
    let (r, e) = (summed(&refs), summed(&ests));
    let row = report
        .classes
        .iter()
        .find(|c| c.active)
        .ok_or("no active row in the 5-class report")?;
    let onsets = match_onsets(&est_t.times(&members), &t.times(&members), DEFAULT_TOLERANCE_SECS);
    let expected = [
        ("nsdr", row.nsdr_db, Some(nsdr(&r, &e).unwrap())),
        ("lsd", row.lsd, Some(lsd(&r, &e).unwrap())),
        ("pes", row.pes_db, pes(&r, &e).unwrap()),
        ("precision", row.precision, Some(onsets.precision)),
        ("recall", row.recall, Some(onsets.recall)),
    ];
    let mut worst = 0.0f64;
    let mut mismatch = Vec::new();
    for (name, got, want) in expected {
        match (got, want) {
            (Some(g), Some(w)) => worst = worst.max((g - w).abs()),
            (g, w) if g == w => {}
            (g, w) => mismatch.push(format!("{name}: {g:?} vs {w:?}")),
        }
    }
    let active = report.classes.iter().filter(|c| c.active).count();
    check(
        worst <= 1e-9 && mismatch.is_empty() && active == 1 && row.class == "HH",
        format!("row `{}`, max deviation {worst:.1e}, active rows {active} {mismatch:?}", row.class),
    )
}

fn main() {
    let mut failures = 0;
    let mut report = |id: u32, name: &str, outcome: Outcome| {
        match &outcome {
            Ok(detail) => println!("criterion {id} ({name}): PASS - {detail}"),
            Err(detail) => {
                failures += 1;
                println!("criterion {id} ({name}): FAIL - {detail}");
            }
        }
    };
    report(1, "sequencer oracle", sequencer_oracle());
    report(2, "stft round trip", stft_round_trip());
    report(3, "gradient check", gradient_check());
    match fixture() {
        Ok(fx) => {
            report(4, "self-inversion", self_inversion(&fx));
            report(5, "nmfd monotonicity and case 1a", nmfd_criterion(&fx));
            report(6, "masking partition", masking_partition(&fx));
        }
        Err(e) => {
            for (id, name) in [(4, "self-inversion"), (5, "nmfd monotonicity and case 1a"), (6, "masking partition")] {
                report(id, name, Err(format!("fixture setup failed: {e}")));
            }
        }
    }
    report(7, "metric closed forms", metric_closed_forms());
    report(8, "end-to-end determinism", determinism());
    report(9, "5-class grouping", five_class_grouping());
    println!("acceptance: {} of 9 criteria passed", 9 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
