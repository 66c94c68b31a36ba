//! Frequency tables of binarized soft-biometrics and their association
//! with gender.

use std::fmt;

use harbias_core::curation::{association_test, binarize_profiles, crosstab, profile_counts, Attribute, AssociationTest};
use harbias_core::model::{BinarizedProfile, ProfileKey, SubjectProfile};
use serde::{Deserialize, Serialize};

/// Smallest expected cell count for which the chi-square test is run.
pub const MIN_EXPECTED_COUNT: f64 = 1.0;

pub const PAIRS: [(Attribute, Attribute); 3] = [
    (Attribute::Gender, Attribute::Age),
    (Attribute::Gender, Attribute::Height),
    (Attribute::Gender, Attribute::Weight),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableReport {
    pub row_attr: String,
    pub col_attr: String,
    pub row_classes: [String; 2],
    pub col_classes: [String; 2],
    pub counts: Option<[[u64; 2]; 2]>,
    pub test: Option<AssociationTest>,
    /// Why no test was run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub not_testable: Option<String>,
    /// Associated at the 0.05 level, so one of the two attributes adds
    /// little when curating training sets.
    pub curation_redundant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicsReport {
    pub n_subjects: usize,
    pub profile_counts: Vec<(ProfileKey, usize)>,
    pub tables: Vec<TableReport>,
}

/// Binarizes each cohort with its own medians, pools the results and
/// tabulates gender against age, height and weight.
pub fn audit_characteristics(cohorts: &[Vec<SubjectProfile>]) -> CharacteristicsReport {
    let n_subjects = cohorts.iter().map(Vec::len).sum();
    let binarized: Result<Vec<BinarizedProfile>, String> = cohorts
        .iter()
        .map(|c| binarize_profiles(c).map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()
        .map(|v| v.into_iter().flatten().collect());
    let profile_counts = match &binarized {
        Ok(p) => profile_counts(p).into_iter().collect(),
        Err(_) => Vec::new(),
    };
    let tables = PAIRS
        .iter()
        .map(|&(row, col)| {
            let mut t = TableReport {
                row_attr: row.name().into(),
                col_attr: col.name().into(),
                row_classes: row.classes().map(String::from),
                col_classes: col.classes().map(String::from),
                counts: None,
                test: None,
                not_testable: None,
                curation_redundant: false,
            };
            let profiles = match &binarized {
                Ok(p) => p,
                Err(e) => {
                    t.not_testable = Some(e.clone());
                    return t;
                }
            };
            let table = match crosstab(profiles, row, col) {
                Ok(table) => table,
                Err(e) => {
                    t.not_testable = Some(e.to_string());
                    return t;
                }
            };
            t.counts = Some(table.counts);
            let (rs, cs, n) = (table.row_sums(), table.col_sums(), table.total() as f64);
            let min_expected = rs
                .iter()
                .flat_map(|&r| cs.iter().map(move |&c| r as f64 * c as f64 / n))
                .fold(f64::INFINITY, f64::min);
            if min_expected < MIN_EXPECTED_COUNT {
                t.not_testable = Some(format!("smallest expected count {min_expected:.2} is below {MIN_EXPECTED_COUNT}"));
                return t;
            }
            match association_test(&table) {
                Ok(test) => {
                    t.curation_redundant = test.significant_at_0_05;
                    t.test = Some(test);
                }
                Err(e) => t.not_testable = Some(e.to_string()),
            }
            t
        })
        .collect();
    CharacteristicsReport {
        n_subjects,
        profile_counts,
        tables,
    }
}

impl fmt::Display for CharacteristicsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} subjects", self.n_subjects)?;
        if !self.profile_counts.is_empty() {
            let parts: Vec<String> = self.profile_counts.iter().map(|(k, n)| format!("{k}: {n}")).collect();
            writeln!(f, "profiles: {}", parts.join(", "))?;
        }
        for t in &self.tables {
            writeln!(f)?;
            writeln!(f, "{} x {}", t.row_attr, t.col_attr)?;
            if let Some(c) = t.counts {
                writeln!(f, "{:>10} {:>8} {:>8}", "", t.col_classes[0], t.col_classes[1])?;
                for (i, row) in c.iter().enumerate() {
                    writeln!(f, "{:>10} {:>8} {:>8}", t.row_classes[i], row[0], row[1])?;
                }
            }
            match (&t.test, &t.not_testable) {
                (Some(test), _) => {
                    write!(f, "chi2 = {:.3}, p = {:.4}", test.statistic, test.p_value)?;
                    if t.curation_redundant {
                        write!(f, "  significant at 0.05, curation-redundant")?;
                    }
                    writeln!(f)?;
                }
                (None, Some(reason)) => writeln!(f, "not testable: {reason}")?,
                (None, None) => writeln!(f, "not testable")?,
            }
        }
        Ok(())
    }
}
