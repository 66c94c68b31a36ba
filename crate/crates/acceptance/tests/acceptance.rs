//! Acceptance gate. Every criterion is its own test and writes exactly one
//! `PASS`/`FAIL`/`SKIP` line to stderr, bypassing output capture so the lines
//! show up in a plain `cargo test` run.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use harbias::characteristics::audit_characteristics;
use harbias::ingest::canonical::{self, SubjectMeta};
use harbias::ingest::{load_dataset, DatasetKind, IngestConfig};
use harbias::manifest::{load_settings, verify_each, ExperimentManifest, SettingEntry};
use harbias::runner::{read_results, run_experiment, RunOptions};
use harbias::cache::WindowCache;
use harbias_core::curation::{binarize_profiles, enumerate_settings, feasible_counts, HmGroup, HmLabel};
use harbias_core::metrics::{accuracy, group_summary, weighted_f1, AggregationLevel, ConfusionMatrix, TrialResult};
use harbias_core::model::{AgeClass, BinarizedProfile, Gender, ProfileKey, Recording, SubjectProfile};
use harbias_core::nn::{orthogonal, softmax, ModelConfig, Network, TrainConfig};
use harbias_core::rng;
use harbias_core::segmentation::{segment, WindowConfig};
use harbias_core::synthetic::{generate_synthetic, SynthConfig};
use harbias_core::trial::{run_trial, ModelSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(criterion: &str, pass: bool, detail: &str, elapsed: Duration) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(
        std::io::stderr(),
        "{verdict} {criterion}: {detail} [{:.2}s]",
        elapsed.as_secs_f64()
    );
}

fn gate(criterion: &str, ok: bool, detail: String, start: Instant, budget: Duration) {
    let elapsed = start.elapsed();
    let in_time = elapsed < budget;
    let detail = if in_time {
        detail
    } else {
        format!("{detail}; over budget of {}s", budget.as_secs())
    };
    report(criterion, ok && in_time, &detail, elapsed);
    assert!(ok && in_time, "{criterion}: {detail}");
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../audit/fixtures").join(name)
}

fn fixture_subjects(name: &str) -> Vec<SubjectProfile> {
    let text = std::fs::read_to_string(fixture(name)).unwrap();
    let metas: Vec<SubjectMeta> = serde_json::from_str(&text).unwrap();
    metas.iter().map(|m| m.to_profile().unwrap()).collect()
}

fn binarized(key: ProfileKey, i: usize) -> BinarizedProfile {
    BinarizedProfile {
        subject_id: format!("s{i:02}"),
        age_class: key.age,
        gender: key.gender,
        height_class: None,
        weight_class: None,
    }
}

/// Independent reading of the heterogeneity rule, used as the oracle.
fn oracle_label(keys: &[(bool, bool); 4]) -> HmLabel {
    let distinct: BTreeSet<(bool, bool)> = keys.iter().copied().collect();
    match distinct.len() {
        1 => HmLabel::Hm1,
        2 => {
            let v: Vec<_> = distinct.into_iter().collect();
            let differing = usize::from(v[0].0 != v[1].0) + usize::from(v[0].1 != v[1].1);
            if differing == 1 {
                HmLabel::Hm2a
            } else {
                HmLabel::Hm2b
            }
        }
        3 => HmLabel::Hm3,
        _ => HmLabel::Hm4,
    }
}

fn oracle_counts(keys: &[(bool, bool)]) -> BTreeMap<HmLabel, usize> {
    let mut counts = BTreeMap::new();
    let n = keys.len();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                for d in c + 1..n {
                    *counts.entry(oracle_label(&[keys[a], keys[b], keys[c], keys[d]])).or_insert(0) += 1;
                }
            }
        }
    }
    counts
}

fn choose4(n: usize) -> usize {
    if n < 4 {
        0
    } else {
        n * (n - 1) * (n - 2) * (n - 3) / 24
    }
}

fn key_of(young: bool, female: bool) -> ProfileKey {
    ProfileKey::new(
        if young { AgeClass::Young } else { AgeClass::Old },
        if female { Gender::Female } else { Gender::Male },
    )
}

#[test]
fn hm_totality_and_partition() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut problems = Vec::new();
    let mut pools = 0;
    for n in 4..=24 {
        for _ in 0..4 {
            let keys: Vec<(bool, bool)> = (0..n).map(|_| (rng.random_bool(0.5), rng.random_bool(0.5))).collect();
            let profiles: Vec<BinarizedProfile> =
                keys.iter().enumerate().map(|(i, &(y, f))| binarized(key_of(y, f), i)).collect();
            let got = feasible_counts(&profiles);
            let got: BTreeMap<HmLabel, usize> = got.into_iter().filter(|&(_, c)| c > 0).collect();
            let want = oracle_counts(&keys);
            if got != want {
                problems.push(format!("n={n}: {got:?} != {want:?}"));
            }
            if got.values().sum::<usize>() != choose4(n) {
                problems.push(format!("n={n}: counts do not sum to C(n,4)"));
            }
            pools += 1;
        }
    }
    // Young/female, old/female, young/male, old/male = 4, 3, 3, 4.
    let lara_keys: Vec<(bool, bool)> = [((true, true), 4), ((false, true), 3), ((true, false), 3), ((false, false), 4)]
        .iter()
        .flat_map(|&(k, c)| std::iter::repeat_n(k, c))
        .collect();
    let lara: Vec<BinarizedProfile> =
        lara_keys.iter().enumerate().map(|(i, &(y, f))| binarized(key_of(y, f), i)).collect();
    let counts = feasible_counts(&lara);
    let hm1 = counts.get(&HmLabel::Hm1).copied().unwrap_or(0);
    let hm4 = counts.get(&HmLabel::Hm4).copied().unwrap_or(0);
    if hm1 != 2 || hm4 != 144 {
        problems.push(format!("LARa-shaped pool: HM1 {hm1}, HM4 {hm4}, expected 2 and 144"));
    }
    let fixture_counts = feasible_counts(&binarize_profiles(&fixture_subjects("lara_subjects.json")).unwrap());
    if fixture_counts != counts {
        problems.push(format!("LARa fixture counts {fixture_counts:?} differ from {counts:?}"));
    }
    let detail = if problems.is_empty() {
        format!("{pools} random pools (n 4..=24) match the exhaustive oracle; LARa HM1 {hm1}, HM4 {hm4}")
    } else {
        problems.join("; ")
    };
    gate("hm-totality", problems.is_empty(), detail, start, Duration::from_secs(5));
}

fn check_appendix(settings: &str, subjects: &str, expected_rows: usize, problems: &mut Vec<String>) -> usize {
    let file = load_settings(&fixture(settings)).unwrap();
    if file.settings.len() != expected_rows {
        problems.push(format!("{settings}: {} rows, expected {expected_rows}", file.settings.len()));
    }
    let profiles = binarize_profiles(&fixture_subjects(subjects)).unwrap();
    let mut ok = 0;
    for (id, result) in verify_each(&file.settings, &profiles) {
        match result {
            Ok(_) => ok += 1,
            Err(e) => problems.push(format!("{id}: {e}")),
        }
    }
    ok
}

#[test]
fn manifest_fidelity() {
    let start = Instant::now();
    let mut problems = Vec::new();
    let lara = check_appendix("lara_appendix_settings.json", "lara_subjects.json", 27, &mut problems);
    let ms = check_appendix("motionsense_appendix_settings.json", "motionsense_subjects.json", 28, &mut problems);
    let detail = format!("LARa {lara} verified, MotionSense {ms} verified; {}", problems.join("; "));
    gate("manifest-fidelity", problems.is_empty(), detail, start, Duration::from_secs(1));
}

#[test]
fn association_reproduction() {
    let start = Instant::now();
    let cohorts = [fixture_subjects("lara_subjects.json"), fixture_subjects("motionsense_subjects.json")];
    let r = audit_characteristics(&cohorts);
    let table = |col: &str| r.tables.iter().find(|t| t.row_attr == "gender" && t.col_attr == col).unwrap();
    let (weight, height) = (table("weight"), table("height"));
    // Expected counts under independence: rows 17/21, columns 19/19.
    let expected = [[17.0 * 19.0 / 38.0; 2], [21.0 * 19.0 / 38.0; 2]];
    let observed = [[12.0, 5.0], [7.0, 14.0]];
    let mut hand = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let d: f64 = observed[i][j] - expected[i][j];
            hand += d * d / expected[i][j];
        }
    }
    let w_stat = weight.test.map(|t| t.statistic).unwrap_or(f64::NAN);
    let ok = weight.counts == Some([[12, 5], [7, 14]])
        && height.counts == Some([[16, 1], [3, 18]])
        && weight.test.is_some_and(|t| t.significant_at_0_05)
        && height.test.is_some_and(|t| t.significant_at_0_05)
        && (w_stat - hand).abs() < 1e-9
        && (w_stat - 5.22).abs() < 0.005;
    let detail = format!(
        "weight {:?} chi2 {w_stat:.4} (hand {hand:.4}), height {:?} chi2 {:.4}",
        weight.counts,
        height.counts,
        height.test.map(|t| t.statistic).unwrap_or(f64::NAN)
    );
    gate("association-reproduction", ok, detail, start, Duration::from_secs(1));
}

fn oracle_metrics(counts: &[Vec<u64>]) -> (f64, f64) {
    let mut truth = Vec::new();
    let mut pred = Vec::new();
    for (t, row) in counts.iter().enumerate() {
        for (p, &c) in row.iter().enumerate() {
            for _ in 0..c {
                truth.push(t);
                pred.push(p);
            }
        }
    }
    let n = truth.len() as f64;
    let correct = truth.iter().zip(&pred).filter(|(t, p)| t == p).count() as f64;
    let mut wf1 = 0.0;
    for k in 0..counts.len() {
        let tp = truth.iter().zip(&pred).filter(|&(&t, &p)| t == k && p == k).count() as f64;
        let fp = truth.iter().zip(&pred).filter(|&(&t, &p)| t != k && p == k).count() as f64;
        let fn_ = truth.iter().zip(&pred).filter(|&(&t, &p)| t == k && p != k).count() as f64;
        let support = tp + fn_;
        let f1 = if 2.0 * tp + fp + fn_ == 0.0 { 0.0 } else { 2.0 * tp / (2.0 * tp + fp + fn_) };
        wf1 += support / n * f1;
    }
    (correct / n, wf1)
}

#[test]
fn metric_oracles() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let k = rng.random_range(1..=10);
        let mut counts: Vec<Vec<u64>> = (0..k)
            .map(|_| (0..k).map(|_| if rng.random_bool(0.3) { 0 } else { rng.random_range(0..20) }).collect())
            .collect();
        counts[0][0] += 1;
        let names = (0..k).map(|i| format!("c{i}")).collect();
        let cm = ConfusionMatrix::from_counts(counts.clone(), names).unwrap();
        let (acc, wf1) = oracle_metrics(&counts);
        worst = worst
            .max((accuracy(&cm).unwrap() - acc).abs())
            .max((weighted_f1(&cm).unwrap() - wf1).abs());
    }
    gate(
        "metric-oracles",
        worst <= 1e-9,
        format!("1000 matrices, K <= 10, max abs difference {worst:.3e}"),
        start,
        Duration::from_secs(10),
    );
}

#[test]
fn windowing_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut mismatches = Vec::new();
    for _ in 0..1000 {
        let t = rng.random_range(1..=600);
        let w = rng.random_range(1..=200);
        let step = rng.random_range(1..=w);
        let mut naive = 0;
        let mut s = 0;
        while s + w <= t {
            naive += 1;
            s += step;
        }
        let rec = Recording::new("s", 50.0, vec!["x".into()], (0..t).map(|i| i as f64).collect(), vec![0; t]).unwrap();
        let got = segment(&rec, 0, &WindowConfig::new(w, step)).unwrap().len();
        if got != naive {
            mismatches.push(format!("T={t} W={w} step={step}: {got} != {naive}"));
        }
    }
    gate(
        "windowing-oracle",
        mismatches.is_empty(),
        format!("1000 triples, {} mismatches {}", mismatches.len(), mismatches.join("; ")),
        start,
        Duration::from_secs(5),
    );
}

#[test]
fn numerical_soundness() {
    let start = Instant::now();
    // Orthogonality of square and wide initializations.
    let mut ortho_err: f64 = 0.0;
    for (i, &(r, c)) in [(16, 16), (8, 40), (32, 64), (5, 5)].iter().enumerate() {
        let mut g = rng::rng(i as u64);
        let w = orthogonal(r, c, 1.0, &mut g);
        for a in 0..r {
            for b in 0..r {
                let dot: f64 = (0..c).map(|k| w[a * c + k] * w[b * c + k]).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                ortho_err = ortho_err.max((dot - target).abs());
            }
        }
    }

    // Central differences on a tiny two-branch model.
    let mut config = ModelConfig::new(4, 10, 3);
    config.branches = vec![vec![0, 1], vec![2, 3]];
    config.conv_layers_per_branch = 2;
    config.filters = 3;
    config.kernel_frames = 3;
    config.pool_size = 2;
    config.branch_fc_units = 4;
    config.fusion_fc_units = 5;
    config.dropout_p = 0.0;
    let mut net = Network::new(config, 3).unwrap();
    let mut g = rng::rng(17);
    for p in net.params_mut() {
        *p += 0.1 * rng::standard_normal(&mut g);
    }
    let windows: Vec<Vec<f64>> = (0..3).map(|_| (0..40).map(|_| rng::standard_normal(&mut g)).collect()).collect();
    let refs: Vec<&[f64]> = windows.iter().map(Vec::as_slice).collect();
    let labels = [0, 2, 1];
    let (_, grad) = net.loss_and_gradient(&refs, &labels).unwrap();
    let h = 1e-5;
    let mut worst_rel: f64 = 0.0;
    for i in 0..net.n_params() {
        let orig = net.params()[i];
        net.params_mut()[i] = orig + h;
        let up = net.loss(&refs, &labels).unwrap();
        net.params_mut()[i] = orig - h;
        let down = net.loss(&refs, &labels).unwrap();
        net.params_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let rel = (numeric - grad[i]).abs() / numeric.abs().max(grad[i].abs()).max(1e-6);
        worst_rel = worst_rel.max(rel);
    }

    // Softmax rows, including extreme logits.
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut worst_sum: f64 = 0.0;
    let mut out = Vec::new();
    for _ in 0..1000 {
        let k = rng.random_range(1..=20);
        let scale = [1.0, 100.0, 1e4][rng.random_range(0..3)];
        let logits: Vec<f64> = (0..k).map(|_| scale * (rng.random::<f64>() - 0.5)).collect();
        softmax(&logits, &mut out);
        worst_sum = worst_sum.max((out.iter().sum::<f64>() - 1.0).abs());
    }

    let ok = ortho_err < 1e-5 && worst_rel < 1e-4 && worst_sum <= 1e-6;
    gate(
        "numerical-soundness",
        ok,
        format!(
            "orthogonality {ortho_err:.2e}, gradient rel error {worst_rel:.2e} over {} params, softmax row sum {worst_sum:.2e}",
            net.n_params()
        ),
        start,
        Duration::from_secs(30),
    );
}

struct Replication {
    mean: BTreeMap<HmGroup, f64>,
    trial_sd: BTreeMap<HmGroup, f64>,
}

/// Desk-scale audit on one synthetic population: two settings per level,
/// three trials per setting, a small network.
fn replicate(strength: f64, rep: u64) -> Replication {
    let mut cfg = SynthConfig::balanced(4, 1000 + rep);
    cfg.idiosyncrasy_strength = strength;
    cfg.noise_sd = 0.3;
    let dataset = generate_synthetic(&cfg).unwrap();
    let profiles = binarize_profiles(dataset.subjects()).unwrap();
    let window = WindowConfig::new(50, 10);
    let spec = ModelSpec {
        conv_layers_per_branch: 2,
        filters: 16,
        branch_fc_units: 32,
        fusion_fc_units: 32,
        ..ModelSpec::default()
    };
    let model = spec.for_dataset(&dataset, window.window_size).unwrap();
    let mut results = Vec::new();
    for hm in HmLabel::ALL {
        for setting in enumerate_settings(&profiles, hm, 2, rep).unwrap() {
            for trial in 0..3u64 {
                let train = TrainConfig::new(1e-3, 32, 20, 7 + trial * 101 + rep);
                let out = run_trial(&dataset, &setting, &window, &model, &train, rep).unwrap();
                let r = TrialResult::from_confusion(setting.setting_id.clone(), trial as usize, out.confusion, out.n_train_windows)
                    .unwrap();
                results.push((hm.group(), r));
            }
        }
    }
    let groups = group_summary(&results, AggregationLevel::Settings);
    Replication {
        mean: groups.iter().map(|g| (g.hm, g.mean_acc)).collect(),
        trial_sd: groups.iter().map(|g| (g.hm, g.mean_trial_sd_acc)).collect(),
    }
}

#[test]
fn desk_scale_trend() {
    let start = Instant::now();
    let (mut mean_wins, mut sd_wins) = (0, 0);
    let mut lines = Vec::new();
    for rep in 0..5 {
        let r = replicate(0.6, rep);
        let (m1, m4) = (r.mean[&HmGroup::Hm1], r.mean[&HmGroup::Hm4]);
        let (s1, s4) = (r.trial_sd[&HmGroup::Hm1], r.trial_sd[&HmGroup::Hm4]);
        mean_wins += usize::from(m4 - m1 > 0.0);
        sd_wins += usize::from(s4 <= s1);
        lines.push(format!("rep {rep}: HM1 {m1:.4}/{s1:.4} HM4 {m4:.4}/{s4:.4}"));
    }
    gate(
        "desk-scale-trend",
        mean_wins >= 4 && sd_wins >= 4,
        format!(
            "HM4 mean above HM1 in {mean_wins}/5, HM4 SD at most HM1 in {sd_wins}/5 (mean/sd: {})",
            lines.join(", ")
        ),
        start,
        Duration::from_secs(15 * 60),
    );
}

#[test]
fn null_effect_control() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for rep in 0..5 {
        let r = replicate(0.0, rep);
        let hi = r.mean.values().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = r.mean.values().copied().fold(f64::INFINITY, f64::min);
        worst = worst.max(hi - lo);
    }
    gate(
        "null-effect-control",
        worst <= 0.03,
        format!("largest gap between group means over 5 replications {:.2} pp", 100.0 * worst),
        start,
        Duration::from_secs(15 * 60),
    );
}

/// Trains on roughly two thirds of the subjects and tests on the rest.
fn full_dataset(kind: DatasetKind, root: &Path) -> f64 {
    let (downsample, window, spec, training) = match kind {
        DatasetKind::LaraOmocap => (2, WindowConfig::new(100, 12), ModelSpec::default(), TrainConfig::lara(0)),
        _ => (
            1,
            WindowConfig::new(200, 25),
            ModelSpec {
                branch_by_prefix: false,
                ..ModelSpec::default()
            },
            TrainConfig::motionsense(0),
        ),
    };
    let mut config = IngestConfig::new(kind, root);
    config.downsample_factor = downsample;
    let dataset = load_dataset(&config).unwrap();
    let mut ids: Vec<String> = dataset.subjects().iter().map(|s| s.subject_id.clone()).collect();
    ids.sort();
    let test: BTreeSet<String> = ids.iter().skip(2).step_by(3).cloned().collect();
    let train: BTreeSet<String> = ids.iter().filter(|i| !test.contains(*i)).cloned().collect();
    let setting = harbias_core::curation::SplitSetting {
        setting_id: "all".into(),
        train_subjects: train,
        test_subjects: test,
        hm: HmLabel::Hm4,
        seed: 0,
    };
    let model = spec.for_dataset(&dataset, window.window_size).unwrap();
    let out = run_trial(&dataset, &setting, &window, &model, &training, 0).unwrap();
    accuracy(&out.confusion).unwrap()
}

#[test]
fn full_dataset_reference() {
    let start = Instant::now();
    let targets = [
        ("HARBIAS_LARA_ROOT", DatasetKind::LaraOmocap, 0.7763),
        ("HARBIAS_MOTIONSENSE_ROOT", DatasetKind::Motionsense, 0.956),
    ];
    let mut ran = Vec::new();
    let mut ok = true;
    for (var, kind, target) in targets {
        if let Some(root) = std::env::var_os(var) {
            let acc = full_dataset(kind, Path::new(&root));
            ok &= (acc - target).abs() <= 0.03;
            ran.push(format!("{kind:?} {:.2}% (target {:.2}%)", 100.0 * acc, 100.0 * target));
        }
    }
    if ran.is_empty() {
        let _ = writeln!(
            std::io::stderr(),
            "SKIP full-dataset-reference: set HARBIAS_LARA_ROOT or HARBIAS_MOTIONSENSE_ROOT to run"
        );
        return;
    }
    gate("full-dataset-reference", ok, ran.join(", "), start, Duration::from_secs(24 * 3600));
}

#[test]
fn determinism() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = SynthConfig::balanced(2, 77);
    cfg.frames_per_recording = 600;
    let dataset = generate_synthetic(&cfg).unwrap();
    let data_dir = dir.path().join("data");
    canonical::write(&data_dir, &dataset).unwrap();
    let dataset = load_dataset(&IngestConfig::new(DatasetKind::Canonical, &data_dir)).unwrap();
    let profiles = binarize_profiles(dataset.subjects()).unwrap();
    let settings: Vec<SettingEntry> = [HmLabel::Hm2a, HmLabel::Hm4]
        .iter()
        .flat_map(|&hm| enumerate_settings(&profiles, hm, 1, 3).unwrap())
        .map(|s| SettingEntry::from(&s))
        .collect();
    let manifest = ExperimentManifest {
        dataset_root: data_dir,
        dataset_kind: DatasetKind::Canonical,
        downsample_factor: 1,
        channel_selection: None,
        window: WindowConfig::new(50, 25),
        model: ModelSpec {
            conv_layers_per_branch: 1,
            filters: 4,
            branch_fc_units: 8,
            fusion_fc_units: 8,
            ..ModelSpec::default()
        },
        train: TrainConfig::new(1e-3, 32, 3, 0),
        settings,
        trials_per_setting: 2,
        global_seed: 99,
        vary_init_seed: true,
    };
    let options = RunOptions {
        workers: 2,
        checkpoint_dir: None,
        cache: WindowCache::new(None),
        limit: None,
    };
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    run_experiment(&manifest, &dataset, &a, &options).unwrap();
    run_experiment(&manifest, &dataset, &b, &options).unwrap();
    let (ra, rb) = (read_results(&a).unwrap(), read_results(&b).unwrap());
    let bits = |r: &harbias::runner::ResultRecord| {
        (r.accuracy.map(f64::to_bits), r.wf1.map(f64::to_bits), r.confusion.clone())
    };
    let identical = ra.len() == rb.len()
        && !ra.is_empty()
        && ra.iter().all(|r| r.is_ok())
        && ra.iter().zip(&rb).all(|(x, y)| x.same_outcome(y) && bits(x) == bits(y));
    gate(
        "determinism",
        identical,
        format!("{} records per run, metrics bit-identical: {identical}", ra.len()),
        start,
        Duration::from_secs(120),
    );
}
