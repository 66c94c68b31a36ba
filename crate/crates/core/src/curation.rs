//! Training-population curation.
//!
//! Subjects are binarized at dataset medians, characteristic associations
//! are checked with 2x2 contingency tables, and four-subject training sets
//! are labeled with a heterogeneity measure (HM) computed from their
//! (age class, gender) profiles:
//!
//! | distinct profiles | label |
//! |---|---|
//! | 1 | `HM1` |
//! | 2, differing in one attribute | `HM2a` |
//! | 2, differing in both attributes | `HM2b` |
//! | 3 | `HM3` |
//! | 4 | `HM4` |
//!
//! The 2a/2b split ignores multiplicity: both 2+2 and 1+3 sets count as HM2.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AgeClass, BinarizedProfile, Gender, HeightClass, ProfileKey, SubjectProfile, WeightClass};
use crate::rng;
use crate::stats;

/// Training sets always hold this many subjects.
pub const TRAIN_SUBJECTS: usize = 4;

/// Binarizes age, height and weight at their medians over `subjects`.
///
/// Values strictly above the median go to the upper class; ties stay in the
/// lower class.
pub fn binarize_profiles(subjects: &[SubjectProfile]) -> Result<Vec<BinarizedProfile>> {
    if subjects.len() < 2 {
        return Err(Error::TooFewSubjects {
            needed: 2,
            found: subjects.len(),
        });
    }
    let column = |f: fn(&SubjectProfile) -> f64| -> f64 {
        let values: Vec<f64> = subjects.iter().map(f).collect();
        stats::median(&values).unwrap_or(0.0)
    };
    let age_median = column(|s| f64::from(s.age));
    let height_median = column(|s| s.height_cm);
    let weight_median = column(|s| s.weight_kg);
    Ok(subjects
        .iter()
        .map(|s| BinarizedProfile {
            subject_id: s.subject_id.clone(),
            age_class: if f64::from(s.age) > age_median {
                AgeClass::Old
            } else {
                AgeClass::Young
            },
            gender: s.gender,
            height_class: Some(if s.height_cm > height_median {
                HeightClass::Tall
            } else {
                HeightClass::Short
            }),
            weight_class: Some(if s.weight_kg > weight_median {
                WeightClass::Heavy
            } else {
                WeightClass::Light
            }),
        })
        .collect())
}

/// Counts of each (age class, gender) profile, in [`ProfileKey::ALL`] order.
pub fn profile_counts(profiles: &[BinarizedProfile]) -> BTreeMap<ProfileKey, usize> {
    let mut counts: BTreeMap<ProfileKey, usize> = ProfileKey::ALL.iter().map(|&k| (k, 0)).collect();
    for p in profiles {
        *counts.entry(p.key()).or_default() += 1;
    }
    counts
}

/// A binarized characteristic usable as a contingency-table axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attribute {
    Gender,
    Age,
    Height,
    Weight,
}

impl Attribute {
    pub fn name(self) -> &'static str {
        match self {
            Attribute::Gender => "gender",
            Attribute::Age => "age",
            Attribute::Height => "height",
            Attribute::Weight => "weight",
        }
    }

    /// Class names, lower class first.
    pub fn classes(self) -> [&'static str; 2] {
        match self {
            Attribute::Gender => ["female", "male"],
            Attribute::Age => ["young", "old"],
            Attribute::Height => ["short", "tall"],
            Attribute::Weight => ["light", "heavy"],
        }
    }

    fn class_of(self, p: &BinarizedProfile) -> Option<usize> {
        match self {
            Attribute::Gender => Some(usize::from(p.gender == Gender::Male)),
            Attribute::Age => Some(usize::from(p.age_class == AgeClass::Old)),
            Attribute::Height => p.height_class.map(|c| usize::from(c == HeightClass::Tall)),
            Attribute::Weight => p.weight_class.map(|c| usize::from(c == WeightClass::Heavy)),
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Attribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gender" => Ok(Attribute::Gender),
            "age" => Ok(Attribute::Age),
            "height" => Ok(Attribute::Height),
            "weight" => Ok(Attribute::Weight),
            _ => Err(Error::argument(format!("unknown attribute `{s}`"))),
        }
    }
}

/// 2x2 frequency table of two binarized attributes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub row_attr: Attribute,
    pub col_attr: Attribute,
    pub counts: [[u64; 2]; 2],
}

impl ContingencyTable {
    pub fn new(row_attr: Attribute, col_attr: Attribute, counts: [[u64; 2]; 2]) -> Result<Self> {
        let table = ContingencyTable {
            row_attr,
            col_attr,
            counts,
        };
        if table.total() == 0 {
            return Err(Error::argument("contingency table is empty"));
        }
        Ok(table)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sums(&self) -> [u64; 2] {
        [self.counts[0][0] + self.counts[0][1], self.counts[1][0] + self.counts[1][1]]
    }

    pub fn col_sums(&self) -> [u64; 2] {
        [self.counts[0][0] + self.counts[1][0], self.counts[0][1] + self.counts[1][1]]
    }

    pub fn transpose(&self) -> ContingencyTable {
        let c = self.counts;
        ContingencyTable {
            row_attr: self.col_attr,
            col_attr: self.row_attr,
            counts: [[c[0][0], c[1][0]], [c[0][1], c[1][1]]],
        }
    }
}

pub fn crosstab(profiles: &[BinarizedProfile], row_attr: Attribute, col_attr: Attribute) -> Result<ContingencyTable> {
    let mut counts = [[0u64; 2]; 2];
    for p in profiles {
        let r = row_attr.class_of(p).ok_or(Error::MissingAttribute(row_attr.name()))?;
        let c = col_attr.class_of(p).ok_or(Error::MissingAttribute(col_attr.name()))?;
        counts[r][c] += 1;
    }
    ContingencyTable::new(row_attr, col_attr, counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssociationTest {
    pub statistic: f64,
    pub p_value: f64,
    pub significant_at_0_05: bool,
}

/// Pearson chi-square test of independence without continuity correction.
pub fn association_test(table: &ContingencyTable) -> Result<AssociationTest> {
    association_test_with(table, false)
}

/// Pearson chi-square test of independence, optionally with Yates'
/// continuity correction. One degree of freedom.
pub fn association_test_with(table: &ContingencyTable, continuity_correction: bool) -> Result<AssociationTest> {
    let rows = table.row_sums();
    let cols = table.col_sums();
    if rows.contains(&0) || cols.contains(&0) {
        return Err(Error::DegenerateTable);
    }
    let n = table.total() as f64;
    let mut statistic = 0.0;
    for (i, row) in table.counts.iter().enumerate() {
        for (j, &obs) in row.iter().enumerate() {
            let expected = rows[i] as f64 * cols[j] as f64 / n;
            let mut diff = libm::fabs(obs as f64 - expected);
            if continuity_correction {
                diff = (diff - 0.5).max(0.0);
            }
            statistic += diff * diff / expected;
        }
    }
    let p_value = stats::chi_square_sf(statistic, 1.0);
    Ok(AssociationTest {
        statistic,
        p_value,
        significant_at_0_05: p_value < 0.05,
    })
}

/// Heterogeneity of a four-subject training set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum HmLabel {
    Hm1,
    Hm2a,
    Hm2b,
    Hm3,
    Hm4,
}

impl HmLabel {
    pub const ALL: [HmLabel; 5] = [HmLabel::Hm1, HmLabel::Hm2a, HmLabel::Hm2b, HmLabel::Hm3, HmLabel::Hm4];

    pub fn as_str(self) -> &'static str {
        match self {
            HmLabel::Hm1 => "HM1",
            HmLabel::Hm2a => "HM2a",
            HmLabel::Hm2b => "HM2b",
            HmLabel::Hm3 => "HM3",
            HmLabel::Hm4 => "HM4",
        }
    }

    /// Group with the HM2 subgroups merged.
    pub fn group(self) -> HmGroup {
        match self {
            HmLabel::Hm1 => HmGroup::Hm1,
            HmLabel::Hm2a | HmLabel::Hm2b => HmGroup::Hm2,
            HmLabel::Hm3 => HmGroup::Hm3,
            HmLabel::Hm4 => HmGroup::Hm4,
        }
    }

    /// Group keeping HM2a and HM2b apart.
    pub fn subgroup(self) -> HmGroup {
        match self {
            HmLabel::Hm2a => HmGroup::Hm2a,
            HmLabel::Hm2b => HmGroup::Hm2b,
            other => other.group(),
        }
    }
}

impl fmt::Display for HmLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HmLabel {
    type Err = Error;

    /// Accepts `HM2a`, `hm2a` and `2a` spellings.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let bare = lower.strip_prefix("hm").unwrap_or(&lower).trim();
        match bare {
            "1" => Ok(HmLabel::Hm1),
            "2a" => Ok(HmLabel::Hm2a),
            "2b" => Ok(HmLabel::Hm2b),
            "3" => Ok(HmLabel::Hm3),
            "4" => Ok(HmLabel::Hm4),
            _ => Err(Error::argument(format!("unknown HM label `{s}`"))),
        }
    }
}

impl TryFrom<String> for HmLabel {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<HmLabel> for String {
    fn from(label: HmLabel) -> String {
        label.as_str().to_string()
    }
}

/// Reporting group: either the four HM levels or the five subgroups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum HmGroup {
    Hm1,
    Hm2,
    Hm2a,
    Hm2b,
    Hm3,
    Hm4,
}

impl HmGroup {
    pub fn as_str(self) -> &'static str {
        match self {
            HmGroup::Hm1 => "HM1",
            HmGroup::Hm2 => "HM2",
            HmGroup::Hm2a => "HM2a",
            HmGroup::Hm2b => "HM2b",
            HmGroup::Hm3 => "HM3",
            HmGroup::Hm4 => "HM4",
        }
    }
}

impl fmt::Display for HmGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl TryFrom<String> for HmGroup {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("hm2") || s.trim() == "2" {
            return Ok(HmGroup::Hm2);
        }
        Ok(s.parse::<HmLabel>()?.subgroup())
    }
}

impl From<HmGroup> for String {
    fn from(group: HmGroup) -> String {
        group.as_str().to_string()
    }
}

/// Labels four (age class, gender) profiles.
pub fn heterogeneity_measure(keys: &[ProfileKey]) -> Result<HmLabel> {
    if keys.len() != TRAIN_SUBJECTS {
        return Err(Error::argument(format!(
            "heterogeneity is defined for {TRAIN_SUBJECTS} profiles, got {}",
            keys.len()
        )));
    }
    let distinct: BTreeSet<ProfileKey> = keys.iter().copied().collect();
    Ok(match distinct.len() {
        1 => HmLabel::Hm1,
        3 => HmLabel::Hm3,
        4 => HmLabel::Hm4,
        _ => {
            let mut it = distinct.iter();
            let (a, b) = (it.next().copied(), it.next().copied());
            match (a, b) {
                (Some(a), Some(b)) if a.distance(b) == 1 => HmLabel::Hm2a,
                _ => HmLabel::Hm2b,
            }
        }
    })
}

/// [`heterogeneity_measure`] over binarized profiles.
pub fn heterogeneity_of(profiles: &[&BinarizedProfile]) -> Result<HmLabel> {
    let keys: Vec<ProfileKey> = profiles.iter().map(|p| p.key()).collect();
    heterogeneity_measure(&keys)
}

/// One experiment: four training subjects, the rest for testing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSetting {
    pub setting_id: String,
    pub train_subjects: BTreeSet<String>,
    pub test_subjects: BTreeSet<String>,
    pub hm: HmLabel,
    pub seed: u64,
}

impl SplitSetting {
    /// Builds a setting over `profiles` and re-derives its HM label, which
    /// must equal `declared`.
    pub fn verified(
        setting_id: impl Into<String>,
        declared: HmLabel,
        train_subjects: &[String],
        profiles: &[BinarizedProfile],
        seed: u64,
    ) -> Result<SplitSetting> {
        let setting_id = setting_id.into();
        let mut train = Vec::with_capacity(train_subjects.len());
        for id in train_subjects {
            let p = profiles
                .iter()
                .find(|p| &p.subject_id == id)
                .ok_or_else(|| Error::UnknownSubject {
                    setting_id: setting_id.clone(),
                    subject: id.clone(),
                })?;
            train.push(p);
        }
        let train_ids: BTreeSet<String> = train_subjects.iter().cloned().collect();
        if train_ids.len() != TRAIN_SUBJECTS || train_subjects.len() != TRAIN_SUBJECTS {
            return Err(Error::argument(format!(
                "setting `{setting_id}` needs {TRAIN_SUBJECTS} distinct training subjects"
            )));
        }
        let actual = heterogeneity_of(&train)?;
        if actual != declared {
            return Err(Error::HmMismatch {
                setting_id,
                declared,
                actual,
            });
        }
        let test_subjects = profiles
            .iter()
            .map(|p| p.subject_id.clone())
            .filter(|id| !train_ids.contains(id))
            .collect();
        Ok(SplitSetting {
            setting_id,
            train_subjects: train_ids,
            test_subjects,
            hm: actual,
            seed,
        })
    }
}

/// Calls `visit` with every 4-subset of `0..n` in lexicographic order.
pub fn for_each_quad(n: usize, mut visit: impl FnMut([usize; 4])) {
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                for d in c + 1..n {
                    visit([a, b, c, d]);
                }
            }
        }
    }
}

fn quad_label(keys: &[ProfileKey], quad: [usize; 4]) -> HmLabel {
    // Four keys always label.
    heterogeneity_measure(&quad.map(|i| keys[i])).unwrap_or(HmLabel::Hm1)
}

/// Index quadruples whose profiles have heterogeneity `hm`, in
/// lexicographic order.
pub fn feasible_subsets(profiles: &[BinarizedProfile], hm: HmLabel) -> Vec<[usize; 4]> {
    let keys: Vec<ProfileKey> = profiles.iter().map(BinarizedProfile::key).collect();
    let mut out = Vec::new();
    for_each_quad(keys.len(), |q| {
        if quad_label(&keys, q) == hm {
            out.push(q);
        }
    });
    out
}

/// Number of 4-subject subsets per HM label.
pub fn feasible_counts(profiles: &[BinarizedProfile]) -> BTreeMap<HmLabel, usize> {
    let keys: Vec<ProfileKey> = profiles.iter().map(BinarizedProfile::key).collect();
    let mut counts: BTreeMap<HmLabel, usize> = HmLabel::ALL.iter().map(|&l| (l, 0)).collect();
    for_each_quad(keys.len(), |q| *counts.entry(quad_label(&keys, q)).or_default() += 1);
    counts
}

/// Draws up to `max_settings` distinct training sets with heterogeneity
/// `hm`, uniformly without replacement, and pairs each with the remaining
/// subjects as its test set.
///
/// Settings come back in lexicographic order of subject index and are named
/// `<HM>-<nn>`.
pub fn enumerate_settings(
    profiles: &[BinarizedProfile],
    hm: HmLabel,
    max_settings: usize,
    seed: u64,
) -> Result<Vec<SplitSetting>> {
    if profiles.len() < 2 * TRAIN_SUBJECTS {
        return Err(Error::TooFewSubjects {
            needed: 2 * TRAIN_SUBJECTS,
            found: profiles.len(),
        });
    }
    if max_settings == 0 {
        return Err(Error::argument("max_settings must be at least 1"));
    }
    let feasible = feasible_subsets(profiles, hm);
    if feasible.is_empty() {
        return Err(Error::InfeasibleHm(hm));
    }
    let chosen: Vec<[usize; 4]> = if feasible.len() <= max_settings {
        feasible
    } else {
        let mut rng = rng::rng(rng::derive(seed, &[rng::hash_str(hm.as_str())]));
        let mut picks = index::sample(&mut rng, feasible.len(), max_settings).into_vec();
        picks.sort_unstable();
        picks.into_iter().map(|i| feasible[i]).collect()
    };
    Ok(chosen
        .into_iter()
        .enumerate()
        .map(|(k, quad)| {
            let train: BTreeSet<String> = quad.iter().map(|&i| profiles[i].subject_id.clone()).collect();
            let test = profiles
                .iter()
                .map(|p| p.subject_id.clone())
                .filter(|id| !train.contains(id))
                .collect();
            SplitSetting {
                setting_id: format!("{hm}-{:02}", k + 1),
                train_subjects: train,
                test_subjects: test,
                hm,
                seed: rng::derive(seed, &[rng::hash_str(hm.as_str()), k as u64]),
            }
        })
        .collect())
}
