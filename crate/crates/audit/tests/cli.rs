use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use harbias::characteristics::audit_characteristics;
use harbias::ingest::canonical::SubjectMeta;
use harbias::manifest::SettingsFile;
use harbias_core::model::SubjectProfile;

fn audit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_audit")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn text(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn fixture_subjects(name: &str) -> Vec<SubjectProfile> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name);
    let metas: Vec<SubjectMeta> = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    metas.iter().map(|m| m.to_profile().unwrap()).collect()
}

#[test]
fn lara_cohort_alone() {
    let r = audit_characteristics(&[fixture_subjects("lara_subjects.json")]);
    let age = r.tables.iter().find(|t| t.col_attr == "age").unwrap();
    assert_eq!(age.counts, Some([[4, 3], [3, 4]]));
    assert!(!age.curation_redundant);
    assert_eq!(r.n_subjects, 14);
}

#[test]
fn end_to_end_synth_enumerate_run_report() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();

    fs::write(
        p("synth.json"),
        r#"{"n_subjects_per_profile": {"YF": 2, "OF": 2, "YM": 2, "OM": 2},
            "n_classes": 3, "frames_per_recording": 300, "channels": 2,
            "sampling_rate_hz": 50.0, "idiosyncrasy_strength": 0.5, "noise_sd": 0.1, "seed": 3}"#,
    )
    .unwrap();
    let out = audit(&["synth", "--config", &p("synth.json"), "--out", &p("data")]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let out = audit(&["enumerate", "--dataset", &p("data")]);
    assert_eq!(code(&out), 0);
    assert!(text(&out).lines().any(|l| l.starts_with("HM4\t")), "{}", text(&out));

    let out = audit(&["enumerate", "--dataset", &p("data"), "--hm", "HM4", "--max", "1", "--out", &p("settings.json")]);
    assert_eq!(code(&out), 0);
    let settings: SettingsFile = serde_json::from_str(&fs::read_to_string(p("settings.json")).unwrap()).unwrap();
    assert_eq!(settings.settings.len(), 1);

    let manifest = serde_json::json!({
        "dataset_root": "data",
        "window": {"window_size": 50, "step": 25},
        "model": {"conv_layers_per_branch": 1, "filters": 4, "branch_fc_units": 8, "fusion_fc_units": 8},
        "train": {"learning_rate": 0.001, "batch_size": 32, "max_epochs": 2},
        "settings": settings.settings,
        "trials_per_setting": 2,
        "global_seed": 1
    });
    fs::write(p("manifest.json"), manifest.to_string()).unwrap();
    let out = audit(&["run", "--manifest", &p("manifest.json"), "--out", &p("results.jsonl")]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let again = audit(&["run", "--manifest", &p("manifest.json"), "--out", &p("results.jsonl")]);
    assert_eq!(code(&again), 0);
    assert!(text(&again).contains("2 already present, 0 written"), "{}", text(&again));

    let out = audit(&["report", "--in", &p("results.jsonl"), "--out", &p("report"), "--plots"]);
    assert_eq!(code(&out), 0);
    assert!(text(&out).contains("HM4"));
    assert!(dir.path().join("report/boxplot_sd_accuracy.svg").is_file());

    let out = audit(&["characteristics", "--dataset", &p("data"), "--json"]);
    assert_eq!(code(&out), 0);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["n_subjects"], 8);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json").to_string_lossy().into_owned();
    // Usage errors.
    assert_eq!(code(&audit(&[])), 2);
    assert_eq!(code(&audit(&["report", "--in", "x", "--out", "y", "--level", "weekly"])), 2);
    // Unreadable manifest.
    assert_eq!(code(&audit(&["run", "--manifest", &missing, "--out", "r.jsonl"])), 2);
    // Data errors.
    let empty = dir.path().to_string_lossy().into_owned();
    assert_eq!(code(&audit(&["characteristics", "--dataset", &format!("canonical={empty}")])), 3);
    let results = dir.path().join("r.jsonl");
    fs::write(&results, "").unwrap();
    let out = audit(&["report", "--in", &results.to_string_lossy(), "--out", &empty]);
    assert_eq!(code(&out), 3);
    // A failed trial in the results.
    fs::write(
        &results,
        r#"{"manifest_hash":"h","setting_id":"a","hm":"HM1","trial_index":0,"trial_seed":1,"init_seed":1,"n_train_windows":0,"n_test_windows":0,"stopped_epoch":0,"best_epoch":0,"wall_time_s":0.0,"error":"boom"}
{"manifest_hash":"h","setting_id":"a","hm":"HM1","trial_index":1,"trial_seed":2,"init_seed":1,"accuracy":0.5,"wf1":0.5,"n_train_windows":4,"n_test_windows":2,"stopped_epoch":1,"best_epoch":1,"wall_time_s":0.0,"confusion":[1,1,0,0]}
"#,
    )
    .unwrap();
    let out = audit(&["report", "--in", &results.to_string_lossy(), "--out", &empty]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
}
