//! Domain types every dataset is normalized into.
//!
//! All types validate on construction and are immutable afterwards, so they
//! can be shared between worker threads freely.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Female,
    Male,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Handedness {
    Left,
    Right,
}

/// Raw soft-biometrics of one recorded person.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub subject_id: String,
    pub age: u32,
    pub gender: Gender,
    pub height_cm: f64,
    pub weight_kg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub handedness: Option<Handedness>,
}

impl SubjectProfile {
    pub fn new(
        subject_id: impl Into<String>,
        age: u32,
        gender: Gender,
        height_cm: f64,
        weight_kg: f64,
    ) -> Result<Self> {
        let profile = SubjectProfile {
            subject_id: subject_id.into(),
            age,
            gender,
            height_cm,
            weight_kg,
            handedness: None,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn with_handedness(mut self, handedness: Handedness) -> Self {
        self.handedness = Some(handedness);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.subject_id.is_empty() {
            return Err(Error::InvalidDataset("empty subject id".into()));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if self.age == 0 || !positive(self.height_cm) || !positive(self.weight_kg) {
            return Err(Error::InvalidDataset(format!(
                "subject `{}` needs positive age, height and weight",
                self.subject_id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgeClass {
    Young,
    Old,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeightClass {
    Short,
    Tall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightClass {
    Light,
    Heavy,
}

/// Median-binarized characteristics of one subject.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinarizedProfile {
    pub subject_id: String,
    pub age_class: AgeClass,
    pub gender: Gender,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height_class: Option<HeightClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_class: Option<WeightClass>,
}

impl BinarizedProfile {
    pub fn key(&self) -> ProfileKey {
        ProfileKey {
            age: self.age_class,
            gender: self.gender,
        }
    }
}

/// The (age class, gender) pair used for curation, written `YF`, `OF`, `YM`
/// or `OM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ProfileKey {
    pub age: AgeClass,
    pub gender: Gender,
}

impl ProfileKey {
    pub const ALL: [ProfileKey; 4] = [
        ProfileKey::new(AgeClass::Young, Gender::Female),
        ProfileKey::new(AgeClass::Old, Gender::Female),
        ProfileKey::new(AgeClass::Young, Gender::Male),
        ProfileKey::new(AgeClass::Old, Gender::Male),
    ];

    pub const fn new(age: AgeClass, gender: Gender) -> Self {
        ProfileKey { age, gender }
    }

    /// Number of attributes in which two keys differ (0, 1 or 2).
    pub fn distance(self, other: ProfileKey) -> usize {
        usize::from(self.age != other.age) + usize::from(self.gender != other.gender)
    }
}

impl fmt::Display for ProfileKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let age = match self.age {
            AgeClass::Young => 'Y',
            AgeClass::Old => 'O',
        };
        let gender = match self.gender {
            Gender::Female => 'F',
            Gender::Male => 'M',
        };
        write!(f, "{age}{gender}")
    }
}

impl FromStr for ProfileKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut chars = s.chars();
        let age = match chars.next() {
            Some('Y' | 'y') => AgeClass::Young,
            Some('O' | 'o') => AgeClass::Old,
            _ => return Err(Error::argument(format!("bad profile key `{s}`"))),
        };
        let gender = match chars.next() {
            Some('F' | 'f') => Gender::Female,
            Some('M' | 'm') => Gender::Male,
            _ => return Err(Error::argument(format!("bad profile key `{s}`"))),
        };
        if chars.next().is_some() {
            return Err(Error::argument(format!("bad profile key `{s}`")));
        }
        Ok(ProfileKey { age, gender })
    }
}

impl TryFrom<String> for ProfileKey {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ProfileKey> for String {
    fn from(key: ProfileKey) -> String {
        format!("{key}")
    }
}

/// One continuous multi-channel recording of a single subject.
///
/// Samples are stored row-major: frame `i` occupies
/// `samples[i * channels .. (i + 1) * channels]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    subject_id: String,
    sampling_rate_hz: f64,
    channels: Vec<String>,
    samples: Vec<f64>,
    frame_labels: Vec<usize>,
}

impl Recording {
    pub fn new(
        subject_id: impl Into<String>,
        sampling_rate_hz: f64,
        channels: Vec<String>,
        samples: Vec<f64>,
        frame_labels: Vec<usize>,
    ) -> Result<Self> {
        let subject_id = subject_id.into();
        if channels.is_empty() {
            return Err(Error::InvalidDataset(format!(
                "recording of `{subject_id}` has no channels"
            )));
        }
        if !(sampling_rate_hz.is_finite() && sampling_rate_hz > 0.0) {
            return Err(Error::InvalidDataset(format!(
                "recording of `{subject_id}` has sampling rate {sampling_rate_hz}"
            )));
        }
        if samples.len() != frame_labels.len() * channels.len() {
            return Err(Error::InvalidDataset(format!(
                "recording of `{subject_id}`: {} values for {} frames x {} channels",
                samples.len(),
                frame_labels.len(),
                channels.len()
            )));
        }
        Ok(Recording {
            subject_id,
            sampling_rate_hz,
            channels,
            samples,
            frame_labels,
        })
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn sampling_rate_hz(&self) -> f64 {
        self.sampling_rate_hz
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn n_frames(&self) -> usize {
        self.frame_labels.len()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn frame(&self, index: usize) -> &[f64] {
        let c = self.channels.len();
        &self.samples[index * c..(index + 1) * c]
    }

    pub fn frame_labels(&self) -> &[usize] {
        &self.frame_labels
    }

    /// Keeps only the named channels, in the given order.
    pub fn select_channels(&self, names: &[String]) -> Result<Recording> {
        let idx = names
            .iter()
            .map(|n| {
                self.channels.iter().position(|c| c == n).ok_or_else(|| {
                    Error::InvalidDataset(format!(
                        "recording of `{}` has no channel `{n}`",
                        self.subject_id
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut samples = Vec::with_capacity(self.n_frames() * idx.len());
        for f in 0..self.n_frames() {
            let row = self.frame(f);
            samples.extend(idx.iter().map(|&i| row[i]));
        }
        Recording::new(
            self.subject_id.clone(),
            self.sampling_rate_hz,
            names.to_vec(),
            samples,
            self.frame_labels.clone(),
        )
    }

    pub fn into_parts(self) -> (String, f64, Vec<String>, Vec<f64>, Vec<usize>) {
        (
            self.subject_id,
            self.sampling_rate_hz,
            self.channels,
            self.samples,
            self.frame_labels,
        )
    }
}

/// A named set of subjects and their recordings with a shared class list
/// and channel layout.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    name: String,
    class_names: Vec<String>,
    subjects: Vec<SubjectProfile>,
    recordings: Vec<Recording>,
}

impl LabeledDataset {
    pub fn new(
        name: impl Into<String>,
        class_names: Vec<String>,
        subjects: Vec<SubjectProfile>,
        recordings: Vec<Recording>,
    ) -> Result<Self> {
        let name = name.into();
        if class_names.is_empty() {
            return Err(Error::InvalidDataset(format!("dataset `{name}` has no classes")));
        }
        let mut ids = BTreeSet::new();
        for s in &subjects {
            s.validate()?;
            if !ids.insert(s.subject_id.as_str()) {
                return Err(Error::InvalidDataset(format!(
                    "duplicate subject id `{}`",
                    s.subject_id
                )));
            }
        }
        if let Some(first) = recordings.first() {
            for r in &recordings {
                if r.channels != first.channels {
                    return Err(Error::InvalidDataset(format!(
                        "recording of `{}` has {} channels, expected {}",
                        r.subject_id,
                        r.n_channels(),
                        first.n_channels()
                    )));
                }
                if r.sampling_rate_hz != first.sampling_rate_hz {
                    return Err(Error::InvalidDataset(format!(
                        "recording of `{}` has a different sampling rate",
                        r.subject_id
                    )));
                }
            }
        }
        for r in &recordings {
            if !ids.contains(r.subject_id.as_str()) {
                return Err(Error::InvalidDataset(format!(
                    "recording references unknown subject `{}`",
                    r.subject_id
                )));
            }
            if let Some(&bad) = r.frame_labels.iter().find(|&&l| l >= class_names.len()) {
                return Err(Error::InvalidDataset(format!(
                    "label {bad} out of range for {} classes",
                    class_names.len()
                )));
            }
        }
        Ok(LabeledDataset {
            name,
            class_names,
            subjects,
            recordings,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn subjects(&self) -> &[SubjectProfile] {
        &self.subjects
    }

    pub fn recordings(&self) -> &[Recording] {
        &self.recordings
    }

    pub fn subject(&self, id: &str) -> Option<&SubjectProfile> {
        self.subjects.iter().find(|s| s.subject_id == id)
    }

    /// Channel names shared by all recordings; empty without recordings.
    pub fn channels(&self) -> &[String] {
        self.recordings.first().map_or(&[], |r| r.channels())
    }

    pub fn sampling_rate_hz(&self) -> Option<f64> {
        self.recordings.first().map(|r| r.sampling_rate_hz)
    }

    /// Recordings of one subject together with their index among that
    /// subject's recordings.
    pub fn recordings_of<'a>(
        &'a self,
        subject_id: &'a str,
    ) -> impl Iterator<Item = (usize, &'a Recording)> + 'a {
        self.recordings
            .iter()
            .filter(move |r| r.subject_id == subject_id)
            .enumerate()
    }

    pub fn into_parts(self) -> (String, Vec<String>, Vec<SubjectProfile>, Vec<Recording>) {
        (self.name, self.class_names, self.subjects, self.recordings)
    }
}
