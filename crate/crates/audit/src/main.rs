use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use harbias::characteristics::audit_characteristics;
use harbias::core::curation::{binarize_profiles, enumerate_settings, feasible_counts, HmLabel};
use harbias::core::metrics::AggregationLevel;
use harbias::core::synthetic::{generate_synthetic, SynthConfig};
use harbias::error::read_json;
use harbias::ingest::{canonical, load_dataset, load_subjects, DatasetKind, IngestConfig};
use harbias::manifest::{load_manifest, SettingEntry, SettingsFile};
use harbias::report::{build_report, write_report, GroupBy};
use harbias::runner::{read_results, run_experiment, RunOptions};
use harbias::cache::WindowCache;
use harbias::{AuditError, Result};

const EXIT_PARTIAL: u8 = 4;

#[derive(Parser)]
#[command(name = "audit", version, about = "Audit how the make-up of a training population biases activity recognition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a source dataset into the canonical layout.
    Ingest {
        #[arg(long)]
        kind: DatasetKind,
        #[arg(long)]
        root: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        downsample: usize,
        /// Comma-separated channel names to keep.
        #[arg(long, value_delimiter = ',')]
        channels: Option<Vec<String>>,
        #[arg(long, default_value_t = ',')]
        delimiter: char,
    },
    /// Generate a synthetic dataset in the canonical layout.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// List feasible training sets per heterogeneity level, or sample settings for some levels.
    Enumerate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "canonical")]
        kind: DatasetKind,
        /// Levels to sample settings for; without it only counts are printed.
        #[arg(long = "hm")]
        hm: Vec<HmLabel>,
        #[arg(long, default_value_t = 10)]
        max: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write settings JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and evaluate every setting of a manifest.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long)]
        checkpoints: Option<PathBuf>,
        /// Stop after this many new trials.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Summarize a results file per heterogeneity group.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "hm")]
        group_by: GroupBy,
        #[arg(long, default_value = "settings", value_parser = parse_level)]
        level: AggregationLevel,
        #[arg(long)]
        out: PathBuf,
        /// Also draw SVG boxplots.
        #[arg(long)]
        plots: bool,
    },
    /// Frequency tables and association tests of subject characteristics.
    Characteristics {
        /// `[kind=]path`; repeat to pool cohorts, each binarized on its own.
        #[arg(long, required = true)]
        dataset: Vec<String>,
        #[arg(long)]
        json: bool,
    },
}

fn parse_level(s: &str) -> std::result::Result<AggregationLevel, String> {
    match s {
        "settings" => Ok(AggregationLevel::Settings),
        "trials" => Ok(AggregationLevel::Trials),
        other => Err(format!("unknown level `{other}`, expected settings or trials")),
    }
}

fn parse_dataset_arg(arg: &str) -> Result<(DatasetKind, PathBuf)> {
    match arg.split_once('=') {
        Some((kind, path)) => Ok((kind.parse().map_err(AuditError::Config)?, PathBuf::from(path))),
        None => Ok((DatasetKind::Canonical, PathBuf::from(arg))),
    }
}

fn write_json<T: serde::Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("value serializes") + "\n";
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| AuditError::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(command: Command) -> Result<u8> {
    match command {
        Command::Ingest {
            kind,
            root,
            out,
            downsample,
            channels,
            delimiter,
        } => {
            if !delimiter.is_ascii() {
                return Err(AuditError::Config("delimiter must be an ASCII character".into()));
            }
            let config = IngestConfig {
                dataset_kind: kind,
                root_path: root,
                downsample_factor: downsample,
                channel_selection: channels,
                delimiter: delimiter as u8,
            };
            let dataset = load_dataset(&config)?;
            canonical::write(&out, &dataset)?;
            println!(
                "{} subjects, {} recordings, {} channels at {} Hz -> {}",
                dataset.subjects().len(),
                dataset.recordings().len(),
                dataset.channels().len(),
                dataset.sampling_rate_hz().unwrap_or(0.0),
                out.display()
            );
        }
        Command::Synth { config, out } => {
            let config: SynthConfig = read_json(&config)?;
            let dataset = generate_synthetic(&config)?;
            canonical::write(&out, &dataset)?;
            println!("{} subjects -> {}", dataset.subjects().len(), out.display());
        }
        Command::Enumerate {
            dataset,
            kind,
            hm,
            max,
            seed,
            out,
        } => {
            let subjects = load_subjects(kind, &dataset)?;
            let profiles = binarize_profiles(&subjects)?;
            if hm.is_empty() {
                for (label, n) in feasible_counts(&profiles) {
                    println!("{label}\t{n}");
                }
                return Ok(0);
            }
            let mut settings = Vec::new();
            for label in hm {
                settings.extend(enumerate_settings(&profiles, label, max, seed)?.iter().map(SettingEntry::from));
            }
            let file = SettingsFile {
                dataset: Some(dataset.display().to_string()),
                settings,
            };
            write_json(out.as_deref(), &file)?;
        }
        Command::Run {
            manifest,
            out,
            workers,
            checkpoints,
            limit,
        } => {
            let manifest = load_manifest(&manifest)?;
            let dataset = load_dataset(&manifest.ingest_config())?;
            let options = RunOptions {
                workers,
                checkpoint_dir: checkpoints,
                cache: WindowCache::from_env(),
                limit,
            };
            let summary = run_experiment(&manifest, &dataset, &out, &options)?;
            println!(
                "{} trials: {} already present, {} written, {} failed",
                summary.total, summary.skipped, summary.written, summary.failed
            );
            let failed = read_results(&out)?.iter().filter(|r| !r.is_ok()).count();
            if failed > 0 {
                return Ok(EXIT_PARTIAL);
            }
        }
        Command::Report {
            input,
            group_by,
            level,
            out,
            plots,
        } => {
            let records = read_results(&input)?;
            let report = build_report(&records, group_by, level)?;
            for path in write_report(&out, &report, plots)? {
                println!("{}", path.display());
            }
            for g in &report.groups {
                println!(
                    "{}\tsettings {}\tacc {:.4} (sd {:.4})\twF1 {:.4} (sd {:.4})",
                    g.hm, g.n_settings, g.mean_acc, g.sd_acc, g.mean_wf1, g.sd_wf1
                );
            }
            if report.n_failed > 0 {
                return Ok(EXIT_PARTIAL);
            }
        }
        Command::Characteristics { dataset, json } => {
            let mut cohorts = Vec::new();
            for arg in &dataset {
                let (kind, root) = parse_dataset_arg(arg)?;
                cohorts.push(load_subjects(kind, &root)?);
            }
            let report = audit_characteristics(&cohorts);
            if json {
                write_json(None, &report)?;
            } else {
                print!("{report}");
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
