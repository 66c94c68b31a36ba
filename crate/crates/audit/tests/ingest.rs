use std::fs;
use std::path::Path;

use harbias::ingest::{canonical, load_dataset, load_subjects, motionsense, DatasetKind, IngestConfig, IngestError};
use harbias_core::model::Gender;
use harbias_core::synthetic::{generate_synthetic, SynthConfig};

fn write_lara(root: &Path, frames: usize) {
    fs::write(
        root.join("subjects.csv"),
        "subject,gender,age,weight_kg,height_cm,handedness\nS01,M,28,78,175,R\nS02,F,24,62,163,L\n",
    )
    .unwrap();
    let dir = root.join("S01");
    fs::create_dir_all(&dir).unwrap();
    for (subject, dir) in [("S01", dir.clone()), ("S02", root.to_path_buf())] {
        let mut data = String::from("Time,head_RX,head_RY,lwr_RX\n");
        let mut labels = String::from("Class\n");
        for i in 0..frames {
            data.push_str(&format!("{i},{}.0,{}.5,{}\n", i, i, i * 2));
            labels.push_str(if i < frames / 2 { "1\n" } else { "Cart\n" });
        }
        fs::write(dir.join(format!("L01_{subject}_R01.csv")), data).unwrap();
        fs::write(dir.join(format!("L01_{subject}_R01_labels.csv")), labels).unwrap();
    }
}

#[test]
fn canonical_round_trip_is_lossless() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = SynthConfig::balanced(2, 4);
    cfg.frames_per_recording = 120;
    let original = generate_synthetic(&cfg).unwrap();
    canonical::write(dir.path(), &original).unwrap();
    let back = load_dataset(&IngestConfig::new(DatasetKind::Canonical, dir.path())).unwrap();
    assert_eq!(back.subjects(), original.subjects());
    assert_eq!(back.class_names(), original.class_names());
    assert_eq!(back.recordings().len(), original.recordings().len());
    for (a, b) in back.recordings().iter().zip(original.recordings()) {
        assert_eq!(a.subject_id(), b.subject_id());
        assert_eq!(a.samples(), b.samples());
        assert_eq!(a.frame_labels(), b.frame_labels());
    }
}

#[test]
fn canonical_without_meta_is_missing_meta() {
    let dir = tempfile::tempdir().unwrap();
    let err = load_dataset(&IngestConfig::new(DatasetKind::Canonical, dir.path())).unwrap_err();
    assert!(matches!(err, IngestError::MissingMeta(_)), "{err}");
}

#[test]
fn lara_layout_drops_index_column_and_downsamples() {
    let dir = tempfile::tempdir().unwrap();
    write_lara(dir.path(), 40);
    let mut config = IngestConfig::new(DatasetKind::LaraOmocap, dir.path());
    config.downsample_factor = 2;
    let d = load_dataset(&config).unwrap();
    assert_eq!(d.channels(), ["head_RX", "head_RY", "lwr_RX"]);
    assert_eq!(d.sampling_rate_hz(), Some(100.0));
    assert_eq!(d.recordings().len(), 2);
    let rec = d.recordings_of("S01").next().unwrap().1;
    assert_eq!(rec.n_frames(), 20);
    assert_eq!(rec.frame(1), [2.0, 2.5, 4.0]);
    assert_eq!(rec.frame_labels()[0], 1);
    assert_eq!(rec.frame_labels()[19], 2);
    let s2 = d.subject("S02").unwrap();
    assert_eq!((s2.gender, s2.age), (Gender::Female, 24));
}

#[test]
fn lara_unknown_label_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    write_lara(dir.path(), 10);
    let path = dir.path().join("L01_S02_R01_labels.csv");
    let text = fs::read_to_string(&path).unwrap().replacen("Cart", "Dancing", 1);
    fs::write(&path, text).unwrap();
    let err = load_dataset(&IngestConfig::new(DatasetKind::LaraOmocap, dir.path())).unwrap_err();
    assert!(matches!(err, IngestError::UnknownLabel { ref label, .. } if label == "Dancing"), "{err}");
}

#[test]
fn lara_channel_count_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    write_lara(dir.path(), 10);
    let path = dir.path().join("L01_S02_R01.csv");
    let mut text = String::from("Time,head_RX,head_RY\n");
    for i in 0..10 {
        text.push_str(&format!("{i},0,0\n"));
    }
    fs::write(path, text).unwrap();
    let err = load_dataset(&IngestConfig::new(DatasetKind::LaraOmocap, dir.path())).unwrap_err();
    match err {
        IngestError::ChannelMismatch { expected, found, .. } => {
            assert_eq!((expected.min(found), expected.max(found)), (2, 3));
        }
        other => panic!("unexpected {other}"),
    }
}

fn write_motionsense(root: &Path) {
    fs::write(
        root.join(motionsense::SUBJECTS_FILE),
        "code,weight,height,age,gender\n1,102,188,46,1\n2,48,161,28,0\n",
    )
    .unwrap();
    let groups = [
        "attitude.roll", "attitude.pitch", "attitude.yaw", "gravity.x", "gravity.y", "gravity.z",
        "rotationRate.x", "rotationRate.y", "rotationRate.z", "userAcceleration.x", "userAcceleration.y",
        "userAcceleration.z",
    ];
    for (act, code) in [("wlk_7", 1), ("jog_9", 2), ("sit_5", 1)] {
        let dir = root.join(motionsense::DATA_DIR).join(act);
        fs::create_dir_all(&dir).unwrap();
        let mut text = format!(",{}\n", groups.join(","));
        for i in 0..8 {
            let row: Vec<String> = (0..groups.len()).map(|c| format!("{}", i * 100 + c)).collect();
            text.push_str(&format!("{i},{}\n", row.join(",")));
        }
        fs::write(dir.join(format!("sub_{code}.csv")), text).unwrap();
    }
}

#[test]
fn motionsense_keeps_nine_channels_and_labels_from_folder() {
    let dir = tempfile::tempdir().unwrap();
    write_motionsense(dir.path());
    let d = load_dataset(&IngestConfig::new(DatasetKind::Motionsense, dir.path())).unwrap();
    assert_eq!(d.channels(), motionsense::default_channels().as_slice());
    assert_eq!(d.sampling_rate_hz(), Some(50.0));
    assert_eq!(d.recordings().len(), 3);
    let walking = d.class_names().iter().position(|c| c == "walking").unwrap();
    let sub2 = d.recordings_of("sub_2").next().unwrap().1;
    assert_eq!(sub2.frame_labels()[0], d.class_names().iter().position(|c| c == "jogging").unwrap());
    let sub1: Vec<_> = d.recordings_of("sub_1").map(|(_, r)| r).collect();
    assert!(sub1.iter().any(|r| r.frame_labels()[0] == walking));
    // gravity.* (columns 3..6) is left out.
    assert_eq!(sub2.frame(1)[3], 106.0);
    let s1 = d.subject("sub_1").unwrap();
    assert_eq!((s1.gender, s1.age, s1.height_cm), (Gender::Male, 46, 188.0));
}

#[test]
fn motionsense_channel_selection() {
    let dir = tempfile::tempdir().unwrap();
    write_motionsense(dir.path());
    let mut config = IngestConfig::new(DatasetKind::Motionsense, dir.path());
    config.channel_selection = Some(vec!["gravity.z".into(), "attitude.roll".into()]);
    let d = load_dataset(&config).unwrap();
    assert_eq!(d.channels(), ["gravity.z", "attitude.roll"]);
    assert_eq!(d.recordings()[0].frame(0), [5.0, 0.0]);
}

#[test]
fn missing_subject_table_fails_before_recordings() {
    let dir = tempfile::tempdir().unwrap();
    let err = load_subjects(DatasetKind::Motionsense, dir.path()).unwrap_err();
    assert!(matches!(err, IngestError::MissingMeta(_)));
    let err = load_dataset(&IngestConfig::new(DatasetKind::LaraOmocap, dir.path())).unwrap_err();
    assert!(matches!(err, IngestError::MissingMeta(_)));
}

#[test]
fn missing_root_is_io_error() {
    let err = load_dataset(&IngestConfig::new(DatasetKind::Canonical, "/nonexistent/harbias")).unwrap_err();
    assert!(matches!(err, IngestError::Io { .. }));
}
