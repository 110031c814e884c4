//! Transcription-informed non-negative matrix factor deconvolution.
//!
//! The mixture magnitude `V` (F x M) is approximated by the convolutive model
//! `Λ[f, m] = Σ_k Σ_τ W_k[f, τ] H[k, m - τ]` and fitted with multiplicative
//! updates under the generalized Kullback-Leibler divergence `D(V ‖ Λ + ε)`.
//! Activations start at 1 on annotated onset frames and `ε` elsewhere.

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array2, Array3, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::classes::NUM_CLASSES;
use crate::drum_machine::OneShotBank;
use crate::error::{Error, Result};
use crate::signal::{magnitude, StftConfig, StftPlan};
use crate::transcription::{events_to_grid, Transcription};

/// Entry floor, also the activation value away from onsets.
pub const NMFD_EPSILON: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NmfdCaseId {
    /// Informed templates, kept fixed.
    OneA,
    /// Informed templates, updated.
    OneB,
    /// Random templates, updated.
    Three,
}

impl fmt::Display for NmfdCaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NmfdCaseId::OneA => "1a",
            NmfdCaseId::OneB => "1b",
            NmfdCaseId::Three => "3",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmfdCase {
    pub id: NmfdCaseId,
    pub iterations: usize,
    pub template_length: usize,
    pub epsilon: f64,
    /// Seed for random template initialization (case 3).
    pub seed: u64,
}

impl NmfdCase {
    pub fn new(id: NmfdCaseId) -> Self {
        let (iterations, template_length) = match id {
            NmfdCaseId::OneA => (50, 40),
            NmfdCaseId::OneB => (20, 10),
            NmfdCaseId::Three => (20, 7),
        };
        Self {
            id,
            iterations,
            template_length,
            epsilon: NMFD_EPSILON,
            seed: 0,
        }
    }

    pub fn fixed_templates(&self) -> bool {
        self.id == NmfdCaseId::OneA
    }

    pub fn needs_bank(&self) -> bool {
        self.id != NmfdCaseId::Three
    }
}

impl FromStr for NmfdCaseId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "1a" => Ok(NmfdCaseId::OneA),
            "1b" => Ok(NmfdCaseId::OneB),
            "3" => Ok(NmfdCaseId::Three),
            other => Err(Error::invalid(format!(
                "NMFD case must be 1a, 1b or 3, got `{other}`"
            ))),
        }
    }
}

/// Templates and activations of a convolutive factorization.
#[derive(Debug, Clone, PartialEq)]
pub struct NmfdModel {
    /// Indexed `[τ, f, k]` so each lag slice is an `F x K` matrix.
    templates: Array3<f64>,
    /// `K x M`.
    pub activations: Array2<f64>,
    pub fixed_templates: bool,
    pub epsilon: f64,
}

impl NmfdModel {
    /// `templates[k]` is `F x L`.
    pub fn new(
        templates: &[Array2<f64>],
        activations: Array2<f64>,
        fixed_templates: bool,
        epsilon: f64,
    ) -> Result<Self> {
        let k = templates.len();
        if k == 0 || k != activations.nrows() {
            return Err(Error::invalid(format!(
                "{k} templates for {} activation rows",
                activations.nrows()
            )));
        }
        let (f, l) = templates[0].dim();
        if templates.iter().any(|t| t.dim() != (f, l)) || l == 0 {
            return Err(Error::invalid("templates must share one non-empty shape"));
        }
        let mut packed = Array3::zeros((l, f, k));
        for (ki, t) in templates.iter().enumerate() {
            packed.slice_mut(s![.., .., ki]).assign(&t.t());
        }
        let model = Self {
            templates: packed,
            activations,
            fixed_templates,
            epsilon,
        };
        if model
            .templates
            .iter()
            .chain(model.activations.iter())
            .any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(Error::invalid("NMFD factors must be finite and non-negative"));
        }
        Ok(model)
    }

    pub fn num_classes(&self) -> usize {
        self.templates.dim().2
    }

    pub fn num_bins(&self) -> usize {
        self.templates.dim().1
    }

    pub fn template_length(&self) -> usize {
        self.templates.dim().0
    }

    pub fn num_frames(&self) -> usize {
        self.activations.ncols()
    }

    /// Template of class `k`, `F x L`.
    pub fn template(&self, k: usize) -> Array2<f64> {
        self.templates.slice(s![.., .., k]).t().to_owned()
    }

    /// Per-class reconstructions `Λ_k`.
    pub fn partial_reconstructions(&self) -> Vec<Array2<f64>> {
        let (l, f, _) = self.templates.dim();
        let m = self.num_frames();
        (0..self.num_classes())
            .into_par_iter()
            .map(|k| {
                let mut out = Array2::zeros((f, m));
                let h = self.activations.row(k);
                for tau in 0..l.min(m) {
                    let w = self.templates.slice(s![tau, .., k]);
                    for (col, &hv) in (tau..m).zip(h.iter()) {
                        out.column_mut(col).scaled_add(hv, &w);
                    }
                }
                out
            })
            .collect()
    }

    /// `Λ = Σ_k Λ_k`, summed in class order.
    pub fn reconstruction(&self) -> Array2<f64> {
        let parts = self.partial_reconstructions();
        let mut total = Array2::zeros(parts[0].dim());
        for p in &parts {
            total += p;
        }
        total
    }

    /// Model approximation via lag-wise matrix products (the update path).
    fn approximation(&self) -> Array2<f64> {
        let (l, f, _) = self.templates.dim();
        let m = self.num_frames();
        let mut out = Array2::zeros((f, m));
        for tau in 0..l.min(m) {
            let w = self.templates.index_axis(Axis(0), tau);
            let h = self.activations.slice(s![.., ..m - tau]);
            let mut dst = out.slice_mut(s![.., tau..]);
            ndarray::linalg::general_mat_mul(1.0, &w, &h, 1.0, &mut dst);
        }
        out
    }

    fn check_shape(&self, v: &ArrayView2<f64>) -> Result<()> {
        if v.dim() != (self.num_bins(), self.num_frames()) {
            return Err(Error::invalid(format!(
                "magnitude {:?} does not match model {:?}",
                v.dim(),
                (self.num_bins(), self.num_frames())
            )));
        }
        Ok(())
    }
}

/// Generalized KL divergence `D(V ‖ Λ + ε)`.
pub fn kl_divergence(v: &Array2<f64>, approx: &Array2<f64>, epsilon: f64) -> f64 {
    Zip::from(v).and(approx).fold(0.0, |acc, &x, &y| {
        let y = y + epsilon;
        let term = if x > 0.0 { x * (x / y).ln() } else { 0.0 };
        acc + term - x + y
    })
}

/// Divergence of the model's current approximation to `v`.
pub fn model_divergence(model: &NmfdModel, v: &Array2<f64>) -> f64 {
    kl_divergence(v, &model.approximation(), model.epsilon)
}

fn ratio(v: &Array2<f64>, approx: &Array2<f64>, epsilon: f64) -> Array2<f64> {
    Zip::from(v).and(approx).map_collect(|&x, &y| x / (y + epsilon))
}

/// Activation grid initialised from the transcription and the
/// templates from one-shot magnitudes (cases 1A/1B) or uniform noise (case 3).
pub fn init_informed(
    v: &Array2<f64>,
    transcription: &Transcription,
    bank: Option<&OneShotBank>,
    case: &NmfdCase,
    stft: StftConfig,
) -> Result<NmfdModel> {
    if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::invalid("magnitude must be finite and non-negative"));
    }
    let (f, m) = v.dim();
    if f != stft.num_bins() {
        return Err(Error::invalid(format!(
            "magnitude has {f} bins but the STFT config yields {}",
            stft.num_bins()
        )));
    }
    let eps = case.epsilon;
    let grid = events_to_grid(transcription, m, stft.hop_size)?;
    let activations = grid.onsets().mapv(|o| if o > 0.0 { 1.0 } else { eps });
    let l = case.template_length;

    let templates: Vec<Array2<f64>> = if case.needs_bank() {
        let bank = bank.ok_or_else(|| {
            Error::invalid(format!("NMFD case {} requires a one-shot bank", case.id))
        })?;
        let plan = StftPlan::new(stft)?;
        bank.one_shots()
            .iter()
            .map(|w| -> Result<Array2<f64>> {
                let mag = magnitude(&plan.stft(w)?);
                let mut t = Array2::from_elem((f, l), eps);
                let frames = mag.ncols().min(l);
                t.slice_mut(s![.., ..frames]).assign(&mag.slice(s![.., ..frames]));
                t.mapv_inplace(|x| x.max(eps));
                Ok(t)
            })
            .collect::<Result<_>>()?
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
        (0..NUM_CLASSES)
            .map(|_| Array2::from_shape_simple_fn((f, l), || 1.0 - rng.random::<f64>()))
            .collect()
    };
    NmfdModel::new(&templates, activations, case.fixed_templates(), eps)
}

/// One multiplicative update of the activations, then (unless fixed) of the templates.
pub fn nmfd_step(model: &mut NmfdModel, v: &Array2<f64>) -> Result<()> {
    model.check_shape(&v.view())?;
    let eps = model.epsilon;
    let (l, _, k) = model.templates.dim();
    let m = model.num_frames();
    let lags = l.min(m);

    // Activations: H ← H ⊙ (Σ_τ W_τᵀ Q[:, τ..]) ⊘ (Σ_{τ < M - m} colsum W_τ).
    let q = ratio(v, &model.approximation(), eps);
    let mut numer = Array2::<f64>::zeros((k, m));
    let mut denom = Array2::<f64>::zeros((k, m));
    for tau in 0..lags {
        let w = model.templates.index_axis(Axis(0), tau);
        let qs = q.slice(s![.., tau..]);
        let mut dst = numer.slice_mut(s![.., ..m - tau]);
        ndarray::linalg::general_mat_mul(1.0, &w.t(), &qs, 1.0, &mut dst);
        let colsum = w.sum_axis(Axis(0));
        for ki in 0..k {
            denom
                .slice_mut(s![ki, ..m - tau])
                .mapv_inplace(|d| d + colsum[ki]);
        }
    }
    Zip::from(&mut model.activations)
        .and(&numer)
        .and(&denom)
        .for_each(|h, &n, &d| {
            if d > 0.0 {
                *h *= n / d;
            }
            *h = h.max(eps);
        });

    if !model.fixed_templates {
        // Templates: W_τ ← W_τ ⊙ (Q[:, τ..] H[:, ..M-τ]ᵀ) ⊘ (Σ_{n < M-τ} H[k, n]).
        let q = ratio(v, &model.approximation(), eps);
        let h = &model.activations;
        for tau in 0..lags {
            let qs = q.slice(s![.., tau..]);
            let hs = h.slice(s![.., ..m - tau]);
            let numer = qs.dot(&hs.t());
            let denom = hs.sum_axis(Axis(1));
            let mut w = model.templates.index_axis_mut(Axis(0), tau);
            Zip::indexed(&mut w).and(&numer).for_each(|(_, ki), wv, &n| {
                if denom[ki] > 0.0 {
                    *wv *= n / denom[ki];
                }
                *wv = wv.max(eps);
            });
        }
    }
    Ok(())
}

/// Result of a full informed NMFD run.
#[derive(Debug, Clone)]
pub struct NmfdOutput {
    pub model: NmfdModel,
    /// `Λ_k`, one `F x M` matrix per class.
    pub per_class: Vec<Array2<f64>>,
    /// Divergence before the first update and after each update.
    pub divergence_trace: Vec<f64>,
}

pub fn nmfd_run(
    v: &Array2<f64>,
    transcription: &Transcription,
    bank: Option<&OneShotBank>,
    case: &NmfdCase,
    stft: StftConfig,
) -> Result<NmfdOutput> {
    let mut model = init_informed(v, transcription, bank, case, stft)?;
    let mut trace = Vec::with_capacity(case.iterations + 1);
    trace.push(model_divergence(&model, v));
    for _ in 0..case.iterations {
        nmfd_step(&mut model, v)?;
        trace.push(model_divergence(&model, v));
    }
    let per_class = model.partial_reconstructions();
    Ok(NmfdOutput {
        model,
        per_class,
        divergence_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::DrumClass;
    use crate::drum_machine::synth::{noise_burst, thump};
    use crate::drum_machine::ONE_SHOT_LEN;
    use crate::signal::Waveform;
    use crate::transcription::OnsetEvent;
    use proptest::prelude::*;

    fn random_model(seed: u64, f: usize, m: usize, k: usize, l: usize) -> NmfdModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let templates: Vec<Array2<f64>> = (0..k)
            .map(|_| Array2::from_shape_simple_fn((f, l), || rng.random_range(0.05..1.0)))
            .collect();
        let h = Array2::from_shape_simple_fn((k, m), || rng.random_range(0.05..1.0));
        NmfdModel::new(&templates, h, false, NMFD_EPSILON).unwrap()
    }

    /// Direct quadruple-loop evaluation of the convolutive model.
    fn direct_lambda(model: &NmfdModel) -> Array2<f64> {
        let (f, m, k, l) = (
            model.num_bins(),
            model.num_frames(),
            model.num_classes(),
            model.template_length(),
        );
        let mut out = Array2::zeros((f, m));
        for ki in 0..k {
            let w = model.template(ki);
            for fi in 0..f {
                for mi in 0..m {
                    for tau in 0..l.min(mi + 1) {
                        out[[fi, mi]] += w[[fi, tau]] * model.activations[[ki, mi - tau]];
                    }
                }
            }
        }
        out
    }

    #[test]
    fn both_reconstruction_paths_match_the_definition() {
        let model = random_model(1, 6, 8, 2, 3);
        let direct = direct_lambda(&model);
        for (a, b) in direct.iter().zip(model.approximation().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in direct.iter().zip(model.reconstruction().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn partials_sum_exactly() {
        let model = random_model(2, 10, 12, 3, 4);
        let parts = model.partial_reconstructions();
        let mut sum = Array2::zeros(parts[0].dim());
        for p in &parts {
            sum += p;
        }
        assert_eq!(sum, model.reconstruction());
    }

    #[test]
    fn fixed_point_when_v_equals_model() {
        let mut model = random_model(3, 6, 8, 2, 2);
        let v = model.approximation();
        let before = model.clone();
        nmfd_step(&mut model, &v).unwrap();
        for (a, b) in before.activations.iter().zip(model.activations.iter()) {
            assert!(((a - b) / a).abs() < 1e-6);
        }
        for (a, b) in before.templates.iter().zip(model.templates.iter()) {
            assert!(((a - b) / a).abs() < 1e-6);
        }
    }

    #[test]
    fn small_instance_step_does_not_increase_divergence() {
        let model0 = random_model(4, 6, 8, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let v = Array2::from_shape_simple_fn((6, 8), || rng.random_range(0.0..2.0));
        let mut model = model0.clone();
        let before = model_divergence(&model, &v);
        nmfd_step(&mut model, &v).unwrap();
        let after = model_divergence(&model, &v);
        assert!(after <= before + 1e-9, "{before} -> {after}");
    }

    #[test]
    fn fixed_templates_are_untouched() {
        let mut model = random_model(5, 6, 8, 2, 2);
        model.fixed_templates = true;
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let v = Array2::from_shape_simple_fn((6, 8), || rng.random_range(0.0..2.0));
        let before = model.templates.clone();
        nmfd_step(&mut model, &v).unwrap();
        assert_eq!(model.templates, before);
    }

    fn two_class_bank() -> OneShotBank {
        let mut shots = vec![Waveform::zeros(ONE_SHOT_LEN); NUM_CLASSES];
        shots[DrumClass::Kick.index()] = thump(150.0, 50.0, 0.25, 250.0);
        shots[DrumClass::HihatClosed.index()] = noise_burst(7, 0.02, 7000.0);
        OneShotBank::new("fixture", shots).unwrap()
    }

    fn events(class: DrumClass, frames: &[usize]) -> Vec<OnsetEvent> {
        frames
            .iter()
            .map(|&m| OnsetEvent {
                time: (m * 512) as f64 / 44_100.0,
                class,
                velocity: 1.0,
            })
            .collect()
    }

    fn mixture_magnitude(bank: &OneShotBank, t: &Transcription, len: usize) -> Array2<f64> {
        use crate::drum_machine::{render, EnvelopeParams, TrackGains};
        let grid = events_to_grid(t, len.div_ceil(512), 512).unwrap();
        let out = render(bank, &grid, &TrackGains::unit(), &EnvelopeParams::flat(), len).unwrap();
        let plan = StftPlan::new(StftConfig::analysis()).unwrap();
        magnitude(&plan.stft(&out.mixture).unwrap())
    }

    #[test]
    fn informed_init_places_onsets_and_templates() {
        let bank = two_class_bank();
        let v = Array2::from_elem((1025, 30), 1.0);
        let empty = Transcription::default();
        let case = NmfdCase::new(NmfdCaseId::OneB);
        let model = init_informed(&v, &empty, Some(&bank), &case, StftConfig::analysis()).unwrap();
        assert!(model.activations.iter().all(|&h| h == NMFD_EPSILON));

        let t = Transcription::new(events(DrumClass::HihatClosed, &[5])).unwrap();
        let model = init_informed(&v, &t, Some(&bank), &case, StftConfig::analysis()).unwrap();
        let row = model.activations.row(DrumClass::HihatClosed.index());
        assert_eq!(row[5], 1.0);
        assert_eq!(row.iter().filter(|&&h| h == 1.0).count(), 1);

        // Templates equal the first 10 frames of an independently computed one-shot STFT.
        let plan = StftPlan::new(StftConfig::analysis()).unwrap();
        let k = DrumClass::Kick.index();
        let reference = magnitude(&plan.stft(bank.get(DrumClass::Kick)).unwrap());
        let template = model.template(k);
        assert_eq!(template.dim(), (1025, 10));
        for tau in 0..10 {
            for f in 0..1025 {
                let expect = reference[[f, tau]].max(NMFD_EPSILON);
                assert!((template[[f, tau]] - expect).abs() <= 1e-12 * expect.max(1.0));
            }
        }
    }

    #[test]
    fn informed_cases_require_a_bank() {
        let v = Array2::from_elem((1025, 10), 1.0);
        let t = Transcription::default();
        for id in [NmfdCaseId::OneA, NmfdCaseId::OneB] {
            let err = init_informed(&v, &t, None, &NmfdCase::new(id), StftConfig::analysis());
            assert!(matches!(err, Err(Error::InvalidArgument(_))));
        }
        assert!(init_informed(&v, &t, None, &NmfdCase::new(NmfdCaseId::Three), StftConfig::analysis()).is_ok());
    }

    #[test]
    fn random_init_is_seeded() {
        let v = Array2::from_elem((1025, 10), 1.0);
        let t = Transcription::default();
        let case = NmfdCase::new(NmfdCaseId::Three);
        let a = init_informed(&v, &t, None, &case, StftConfig::analysis()).unwrap();
        let b = init_informed(&v, &t, None, &case, StftConfig::analysis()).unwrap();
        assert_eq!(a, b);
        assert!(a.templates.iter().all(|&w| w > 0.0 && w <= 1.0));
    }

    #[test]
    fn single_class_mixture_stays_in_its_class() {
        let bank = two_class_bank();
        let t = Transcription::new(events(DrumClass::Kick, &[10, 60, 110])).unwrap();
        let v = mixture_magnitude(&bank, &t, 3 * 44_100);
        let out = nmfd_run(&v, &t, Some(&bank), &NmfdCase::new(NmfdCaseId::OneA), StftConfig::analysis()).unwrap();
        let energy: Vec<f64> = out.per_class.iter().map(|p| p.iter().map(|x| x.abs()).sum()).collect();
        let total: f64 = energy.iter().sum();
        assert!(energy[DrumClass::Kick.index()] / total > 0.99);
    }

    #[test]
    fn zero_magnitude_gives_epsilon_scale_output() {
        let v = Array2::zeros((1025, 20));
        let t = Transcription::new(events(DrumClass::Snare, &[3])).unwrap();
        let out = nmfd_run(&v, &t, None, &NmfdCase::new(NmfdCaseId::Three), StftConfig::analysis()).unwrap();
        let peak = out.per_class.iter().flat_map(|p| p.iter()).fold(0.0f64, |m, &x| m.max(x));
        assert!(peak < 1e-6, "{peak}");
    }

    #[test]
    fn disjoint_bands_separate_by_band() {
        let bank = two_class_bank();
        let mut ev = events(DrumClass::Kick, &[5, 70, 140]);
        ev.extend(events(DrumClass::HihatClosed, &[30, 100, 170, 200]));
        let t = Transcription::new(ev).unwrap();
        let v = mixture_magnitude(&bank, &t, 5 * 44_100);
        let cutoff = (1000.0 / (44_100.0 / 2048.0)) as usize;
        for id in [NmfdCaseId::OneA, NmfdCaseId::OneB] {
            let out = nmfd_run(&v, &t, Some(&bank), &NmfdCase::new(id), StftConfig::analysis()).unwrap();
            let band = |p: &Array2<f64>, low: bool| -> f64 {
                let rows = if low { s![..cutoff, ..] } else { s![cutoff.., ..] };
                p.slice(rows).iter().map(|x| x * x).sum()
            };
            let kick = &out.per_class[DrumClass::Kick.index()];
            let hat = &out.per_class[DrumClass::HihatClosed.index()];
            assert!(band(kick, true) / (band(kick, true) + band(kick, false)) > 0.9);
            assert!(band(hat, false) / (band(hat, true) + band(hat, false)) > 0.9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn divergence_never_increases_and_factors_stay_non_negative(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (f, m, k, l) = (rng.random_range(2..10), rng.random_range(2..14), rng.random_range(1..4), rng.random_range(1..5));
            let mut model = random_model(seed ^ 0xabc, f, m, k, l);
            let v = Array2::from_shape_simple_fn((f, m), || if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..3.0) });
            let mut prev = model_divergence(&model, &v);
            for _ in 0..20 {
                nmfd_step(&mut model, &v).unwrap();
                let d = model_divergence(&model, &v);
                prop_assert!(d <= prev + 1e-9, "{} -> {}", prev, d);
                prop_assert!(model.activations.iter().chain(model.templates.iter()).all(|&x| x >= NMFD_EPSILON && x.is_finite()));
                prev = d;
            }
        }
    }
}
