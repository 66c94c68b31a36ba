//! Summaries of a results file, per heterogeneity group.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use harbias_core::curation::HmGroup;
use harbias_core::metrics::{group_summary, summarize_settings, AggregationLevel, BoxplotStats, GroupSummary, SettingSummary};
use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};
use crate::runner::ResultRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    /// HM1 to HM4 with 2a and 2b merged.
    #[default]
    Hm,
    /// HM2 split into 2a and 2b.
    HmSubgroup,
}

impl std::str::FromStr for GroupBy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "hm" => Ok(GroupBy::Hm),
            "hm_subgroup" | "hm-subgroup" => Ok(GroupBy::HmSubgroup),
            other => Err(format!("unknown grouping `{other}`, expected hm or hm_subgroup")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub group_by: GroupBy,
    pub level: AggregationLevel,
    pub n_records: usize,
    pub n_failed: usize,
    pub groups: Vec<GroupSummary>,
    pub settings: Vec<SettingSummary>,
}

impl Report {
    pub fn group(&self, hm: HmGroup) -> Option<&GroupSummary> {
        self.groups.iter().find(|g| g.hm == hm)
    }
}

pub fn build_report(records: &[ResultRecord], group_by: GroupBy, level: AggregationLevel) -> Result<Report> {
    let tagged: Vec<_> = records
        .iter()
        .filter_map(|r| {
            let group = match group_by {
                GroupBy::Hm => r.hm.group(),
                GroupBy::HmSubgroup => r.hm.subgroup(),
            };
            r.trial_result().map(|t| (group, t))
        })
        .collect();
    if tagged.is_empty() {
        return Err(AuditError::EmptyReport);
    }
    Ok(Report {
        group_by,
        level,
        n_records: records.len(),
        n_failed: records.len() - tagged.len(),
        groups: group_summary(&tagged, level),
        settings: summarize_settings(&tagged),
    })
}

const METRICS: [&str; 4] = ["mean_accuracy", "mean_wf1", "sd_accuracy", "sd_wf1"];

fn boxes(g: &GroupSummary) -> [BoxplotStats; 4] {
    [g.boxplot_acc, g.boxplot_wf1, g.boxplot_sd_acc, g.boxplot_sd_wf1]
}

/// Writes `summary.json`, `summary.csv`, `settings.csv`, `boxplots.csv`
/// and, with `plots`, one SVG per metric. Returns the written paths.
pub fn write_report(dir: &Path, report: &Report, plots: bool) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| AuditError::io(dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: &str, body: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| AuditError::io(&path, e))?;
        written.push(path);
        Ok(())
    };

    put("summary.json", serde_json::to_string_pretty(report).expect("report serializes") + "\n")?;

    let mut csv = String::from("hm,n_settings,n_trials,mean_acc,sd_acc,mean_wf1,sd_wf1,mean_trial_sd_acc,mean_trial_sd_wf1\n");
    for g in &report.groups {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            g.hm, g.n_settings, g.n_trials, g.mean_acc, g.sd_acc, g.mean_wf1, g.sd_wf1, g.mean_trial_sd_acc, g.mean_trial_sd_wf1
        );
    }
    put("summary.csv", csv)?;

    let mut csv = String::from("setting_id,hm,trials,mean_acc,sd_acc,mean_wf1,sd_wf1\n");
    for s in &report.settings {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            s.setting_id, s.group, s.trials, s.mean_acc, s.sd_acc, s.mean_wf1, s.sd_wf1
        );
    }
    put("settings.csv", csv)?;

    let mut csv = String::from("hm,metric,min,q1,median,q3,max\n");
    for g in &report.groups {
        for (metric, b) in METRICS.iter().zip(boxes(g)) {
            let _ = writeln!(csv, "{},{metric},{},{},{},{},{}", g.hm, b.min, b.q1, b.median, b.q3, b.max);
        }
    }
    put("boxplots.csv", csv)?;

    if plots {
        for (i, metric) in METRICS.iter().enumerate() {
            let series: Vec<(String, BoxplotStats)> =
                report.groups.iter().map(|g| (g.hm.to_string(), boxes(g)[i])).collect();
            put(&format!("boxplot_{metric}.svg"), boxplot_svg(metric, &series))?;
        }
    }
    Ok(written)
}

/// A minimal standalone SVG boxplot, one box per series.
pub fn boxplot_svg(title: &str, series: &[(String, BoxplotStats)]) -> String {
    let (w_box, left, top, height) = (80.0, 60.0, 30.0, 240.0);
    let width = left + w_box * series.len().max(1) as f64 + 20.0;
    let lo = series.iter().map(|(_, b)| b.min).fold(f64::INFINITY, f64::min);
    let hi = series.iter().map(|(_, b)| b.max).fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if !lo.is_finite() || hi - lo < 1e-12 { (lo.min(0.0) - 0.5, hi.max(0.0) + 0.5) } else { (lo, hi) };
    let pad = (hi - lo) * 0.05;
    let (lo, hi) = (lo - pad, hi + pad);
    let y = |v: f64| top + height * (hi - v) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{}" font-family="sans-serif" font-size="12">"#,
        top + height + 40.0
    );
    let _ = writeln!(s, r#"<text x="{}" y="18" text-anchor="middle">{title}</text>"#, width / 2.0);
    let _ = writeln!(s, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{}" stroke="black"/>"#, top + height);
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{v:.3}</text>"#,
            left - 4.0,
            y(v) + 4.0
        );
    }
    for (i, (name, b)) in series.iter().enumerate() {
        let cx = left + w_box * (i as f64 + 0.5);
        let half = w_box * 0.3;
        let _ = writeln!(
            s,
            r#"<line x1="{cx}" y1="{:.1}" x2="{cx}" y2="{:.1}" stroke="black"/>"#,
            y(b.max),
            y(b.min)
        );
        let _ = writeln!(
            s,
            r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="#9ecae1" stroke="black"/>"##,
            cx - half,
            y(b.q3),
            2.0 * half,
            (y(b.q1) - y(b.q3)).max(0.5)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black" stroke-width="2"/>"#,
            cx - half,
            y(b.median),
            cx + half,
            y(b.median)
        );
        let _ = writeln!(
            s,
            r#"<text x="{cx}" y="{}" text-anchor="middle">{name}</text>"#,
            top + height + 20.0
        );
    }
    s.push_str("</svg>\n");
    s
}
