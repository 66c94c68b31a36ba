//! Synthetic multi-channel activity recordings whose shape depends on who
//! performs the activity.
//!
//! Each class has a base waveform: a harmonic mixture with a class-specific
//! fundamental frequency and per-channel harmonic weights and phases. A
//! subject performs it with
//!
//! - amplitude `1 ± s * amplitude_delta` (heavy +, light -),
//! - frequency `1 ± s * frequency_delta` (young +, old -),
//! - an inter-channel phase step of `s * phase_shift` for men,
//! - Gaussian per-subject jitter on all three, scaled by `s`,
//!
//! where `s` is the idiosyncrasy strength. White noise is added on top. At
//! `s = 0` every subject produces the same expected signal.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::curation::binarize_profiles;
use crate::error::{Error, Result};
use crate::model::{AgeClass, Gender, LabeledDataset, ProfileKey, Recording, SubjectProfile, WeightClass};
use crate::rng::{self, Rng};

const HARMONICS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Subjects to generate per (age class, gender) profile.
    pub n_subjects_per_profile: BTreeMap<ProfileKey, usize>,
    pub n_classes: usize,
    pub frames_per_recording: usize,
    #[serde(default = "defaults::recordings")]
    pub recordings_per_subject: usize,
    pub channels: usize,
    pub sampling_rate_hz: f64,
    pub idiosyncrasy_strength: f64,
    pub noise_sd: f64,
    pub seed: u64,
    #[serde(default = "defaults::base_frequency")]
    pub base_frequency_hz: f64,
    /// Ratio between fundamentals of consecutive classes.
    #[serde(default = "defaults::class_ratio")]
    pub class_frequency_ratio: f64,
    #[serde(default = "defaults::amplitude_delta")]
    pub amplitude_delta: f64,
    #[serde(default = "defaults::frequency_delta")]
    pub frequency_delta: f64,
    #[serde(default = "defaults::phase_shift")]
    pub phase_shift: f64,
    /// SDs of the per-subject jitter on amplitude, frequency and phase.
    #[serde(default = "defaults::jitter")]
    pub jitter: [f64; 3],
    /// Relative share of frames per class; equal shares when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_weights: Option<Vec<f64>>,
}

mod defaults {
    pub fn recordings() -> usize {
        1
    }
    pub fn base_frequency() -> f64 {
        1.5
    }
    pub fn class_ratio() -> f64 {
        1.25
    }
    pub fn amplitude_delta() -> f64 {
        0.2
    }
    pub fn frequency_delta() -> f64 {
        0.15
    }
    pub fn phase_shift() -> f64 {
        core::f64::consts::FRAC_PI_4
    }
    pub fn jitter() -> [f64; 3] {
        [0.05, 0.03, 0.1]
    }
}

impl SynthConfig {
    /// `per_profile` subjects of each of the four profiles.
    pub fn balanced(per_profile: usize, seed: u64) -> Self {
        SynthConfig {
            n_subjects_per_profile: ProfileKey::ALL.iter().map(|&k| (k, per_profile)).collect(),
            n_classes: 6,
            frames_per_recording: 900,
            recordings_per_subject: defaults::recordings(),
            channels: 3,
            sampling_rate_hz: 50.0,
            idiosyncrasy_strength: 0.6,
            noise_sd: 0.1,
            seed,
            base_frequency_hz: defaults::base_frequency(),
            class_frequency_ratio: defaults::class_ratio(),
            amplitude_delta: defaults::amplitude_delta(),
            frequency_delta: defaults::frequency_delta(),
            phase_shift: defaults::phase_shift(),
            jitter: defaults::jitter(),
            class_weights: None,
        }
    }

    pub fn n_subjects(&self) -> usize {
        self.n_subjects_per_profile.values().sum()
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_subjects();
        if n < 8 {
            return Err(Error::TooFewSubjects { needed: 8, found: n });
        }
        let young: usize = self
            .n_subjects_per_profile
            .iter()
            .filter(|(k, _)| k.age == AgeClass::Young)
            .map(|(_, c)| c)
            .sum();
        // Values at or below the median are young, so at least half the
        // cohort is.
        if young < n.div_ceil(2) {
            return Err(Error::argument(format!(
                "a median split of {n} subjects puts at least {} in the young class, {young} requested",
                n.div_ceil(2)
            )));
        }
        if self.n_classes < 2 || self.channels == 0 || self.recordings_per_subject == 0 {
            return Err(Error::argument("need at least two classes, one channel and one recording"));
        }
        if self.frames_per_recording < self.n_classes {
            return Err(Error::argument("recordings are shorter than one frame per class"));
        }
        if !(self.sampling_rate_hz > 0.0) || !(self.noise_sd >= 0.0) {
            return Err(Error::argument("sampling rate must be positive and noise non-negative"));
        }
        if !(0.0..=1.0).contains(&self.idiosyncrasy_strength) {
            return Err(Error::argument("idiosyncrasy strength must lie in [0, 1]"));
        }
        if let Some(w) = &self.class_weights {
            if w.len() != self.n_classes || w.iter().any(|&x| !(x > 0.0)) {
                return Err(Error::argument("class weights need one positive value per class"));
            }
        }
        Ok(())
    }
}

struct ClassWave {
    fundamental: f64,
    /// `[channel][harmonic]` weights and phases.
    weights: Vec<[f64; HARMONICS]>,
    phases: Vec<[f64; HARMONICS]>,
}

struct Style {
    amplitude: f64,
    frequency: f64,
    phase_step: f64,
}

fn class_waves(cfg: &SynthConfig) -> Vec<ClassWave> {
    (0..cfg.n_classes)
        .map(|c| {
            let mut r = rng::rng(rng::derive(cfg.seed, &[0xC1A55, c as u64]));
            let mut weights = Vec::with_capacity(cfg.channels);
            let mut phases = Vec::with_capacity(cfg.channels);
            for _ in 0..cfg.channels {
                let mut w = [0.0; HARMONICS];
                w.iter_mut().for_each(|v| *v = r.random_range(0.2..1.0));
                let norm = libm::sqrt(w.iter().map(|v| v * v).sum::<f64>());
                w.iter_mut().for_each(|v| *v /= norm);
                let mut p = [0.0; HARMONICS];
                p.iter_mut().for_each(|v| *v = r.random_range(0.0..2.0 * PI));
                weights.push(w);
                phases.push(p);
            }
            ClassWave {
                fundamental: cfg.base_frequency_hz * libm::pow(cfg.class_frequency_ratio, c as f64),
                weights,
                phases,
            }
        })
        .collect()
}

/// Ages such that a median split yields exactly `young` young subjects out
/// of `n`, returned in ascending order.
fn ages_for_split(n: usize, young: usize, r: &mut Rng) -> Vec<u32> {
    let mut ages: Vec<u32> = (0..young).map(|i| 20 + i as u32).collect();
    let lo = (n - 1) / 2;
    if young > lo {
        let pivot = ages[lo];
        ages[lo..].iter_mut().for_each(|a| *a = pivot);
    }
    let old_start = 45 + r.random_range(0..5u32);
    ages.extend((0..n - young).map(|i| old_start + i as u32));
    ages
}

fn block_lengths(cfg: &SynthConfig) -> Vec<usize> {
    let k = cfg.n_classes;
    let weights = cfg.class_weights.clone().unwrap_or_else(|| vec![1.0; k]);
    let total: f64 = weights.iter().sum();
    let mut lens: Vec<usize> = weights
        .iter()
        .map(|w| libm::floor(cfg.frames_per_recording as f64 * w / total) as usize)
        .collect();
    let mut rest = cfg.frames_per_recording - lens.iter().sum::<usize>();
    let mut i = 0;
    while rest > 0 {
        lens[i % k] += 1;
        rest -= 1;
        i += 1;
    }
    lens
}

/// Generates subjects and recordings. Deterministic in `config`.
pub fn generate_synthetic(config: &SynthConfig) -> Result<LabeledDataset> {
    config.validate()?;
    let s = config.idiosyncrasy_strength;
    let mut meta_rng = rng::rng(rng::derive(config.seed, &[0x5B1EC7]));

    let mut keys: Vec<ProfileKey> = Vec::new();
    for key in ProfileKey::ALL {
        let count = config.n_subjects_per_profile.get(&key).copied().unwrap_or(0);
        keys.extend(core::iter::repeat_n(key, count));
    }
    let n = keys.len();
    let young_slots: Vec<usize> = (0..n).filter(|&i| keys[i].age == AgeClass::Young).collect();
    let old_slots: Vec<usize> = (0..n).filter(|&i| keys[i].age == AgeClass::Old).collect();
    let ages = ages_for_split(n, young_slots.len(), &mut meta_rng);
    let mut young_ages = ages[..young_slots.len()].to_vec();
    young_ages.shuffle(&mut meta_rng);
    let mut subject_ages = vec![0u32; n];
    for (slot, age) in young_slots.iter().chain(&old_slots).zip(young_ages.iter().chain(&ages[young_slots.len()..])) {
        subject_ages[*slot] = *age;
    }

    let width = n.to_string().len().max(2);
    let mut subjects = Vec::with_capacity(n);
    for (i, key) in keys.iter().enumerate() {
        let (h_mean, w_mean) = match key.gender {
            Gender::Female => (165.0, 62.0),
            Gender::Male => (178.0, 80.0),
        };
        let height = (h_mean + 6.0 * rng::standard_normal(&mut meta_rng)).max(140.0);
        let weight = (w_mean + 8.0 * rng::standard_normal(&mut meta_rng)).max(40.0);
        subjects.push(SubjectProfile::new(
            format!("S{:0width$}", i + 1),
            subject_ages[i],
            key.gender,
            libm::round(height * 10.0) / 10.0,
            libm::round(weight * 10.0) / 10.0,
        )?);
    }
    let binarized = binarize_profiles(&subjects)?;

    let waves = class_waves(config);
    let lens = block_lengths(config);
    let channel_names: Vec<String> = (0..config.channels).map(|j| format!("ch_{j}")).collect();
    let mut recordings = Vec::with_capacity(n * config.recordings_per_subject);
    for (subject, profile) in subjects.iter().zip(&binarized) {
        let sid = rng::hash_str(&subject.subject_id);
        let mut style_rng = rng::rng(rng::derive(config.seed, &[0x57F1E, sid]));
        let sign = |upper: bool| if upper { 1.0 } else { -1.0 };
        let heavy = profile.weight_class == Some(WeightClass::Heavy);
        let young = profile.age_class == AgeClass::Young;
        let male = subject.gender == Gender::Male;
        let style = Style {
            amplitude: 1.0
                + s * (sign(heavy) * config.amplitude_delta
                    + config.jitter[0] * rng::standard_normal(&mut style_rng)),
            frequency: 1.0
                + s * (sign(young) * config.frequency_delta
                    + config.jitter[1] * rng::standard_normal(&mut style_rng)),
            phase_step: s
                * (if male { config.phase_shift } else { 0.0 }
                    + config.jitter[2] * rng::standard_normal(&mut style_rng)),
        };
        for k in 0..config.recordings_per_subject {
            let mut r = rng::rng(rng::derive(config.seed, &[0x2EC, sid, k as u64]));
            recordings.push(render(config, &waves, &lens, &style, &subject.subject_id, &channel_names, &mut r)?);
        }
    }
    let class_names = (0..config.n_classes).map(|c| format!("activity_{c}")).collect();
    LabeledDataset::new("synthetic", class_names, subjects, recordings)
}

fn render(
    cfg: &SynthConfig,
    waves: &[ClassWave],
    lens: &[usize],
    style: &Style,
    subject_id: &str,
    channel_names: &[String],
    r: &mut Rng,
) -> Result<Recording> {
    let mut order: Vec<usize> = (0..cfg.n_classes).collect();
    order.shuffle(r);
    let c = cfg.channels;
    let mut samples = Vec::with_capacity(cfg.frames_per_recording * c);
    let mut labels = Vec::with_capacity(cfg.frames_per_recording);
    for &class in &order {
        let wave = &waves[class];
        let f = wave.fundamental * style.frequency;
        for frame in 0..lens[class] {
            let t = frame as f64 / cfg.sampling_rate_hz;
            for j in 0..c {
                let mut v = 0.0;
                for h in 0..HARMONICS {
                    let arg = 2.0 * PI * (h + 1) as f64 * f * t + wave.phases[j][h] + j as f64 * style.phase_step;
                    v += wave.weights[j][h] * libm::sin(arg);
                }
                samples.push(style.amplitude * v + cfg.noise_sd * rng::standard_normal(r));
            }
            labels.push(class);
        }
    }
    Recording::new(subject_id, cfg.sampling_rate_hz, channel_names.to_vec(), samples, labels)
}
