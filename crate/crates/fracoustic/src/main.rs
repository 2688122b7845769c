//! Command-line front end: feature extraction, training, speaker-split
//! evaluation, synthetic corpus generation, and report rendering.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error, 3 internal.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use fracoustic::audio_io::{load_manifest, DatasetManifest, ManifestLayout};
use fracoustic::classify::{fit_model, save_model, FeatureScope};
use fracoustic::error::{Error, Result};
use fracoustic::eval::report::{emit_report, parse_json, render_csv, render_text, ReportFormat};
use fracoustic::eval::synth::{write_synthetic, SynthSpec};
use fracoustic::eval::{
    extract_manifest_features, mean_overall_accuracy, run_protocol, ProtocolKind, RunConfig,
};
use fracoustic::pipeline::{features_to_csv, FdMethod};
use fracoustic::wavelet::{BoundaryMode, WaveletFamily};

#[derive(Parser)]
#[command(
    name = "fracoustic",
    about = "Audio emotion recognition from wavelet sub-band fractal dimensions",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract feature vectors for a manifest into a CSV cache file.
    Extract {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        tuning: TuningArgs,
        /// Output feature CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a model on every utterance in the manifest and serialize it.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        tuning: TuningArgs,
        /// Optional feature CSV reused as an extraction cache.
        #[arg(long)]
        features: Option<PathBuf>,
        /// Output model file (JSON).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a speaker-split protocol and write one report per split.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        tuning: TuningArgs,
        /// Split protocol.
        #[arg(long, default_value = "one_vs_three")]
        protocol: String,
        /// Optional feature CSV reused as an extraction cache.
        #[arg(long)]
        features: Option<PathBuf>,
        /// Report directory; reports print to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Report format: text, csv, or json.
        #[arg(long, default_value = "text")]
        format: String,
    },
    /// Generate the seeded synthetic corpus (WAV files plus manifest.csv).
    Synth {
        /// Target directory.
        #[arg(long = "out-dir")]
        out_dir: PathBuf,
        /// Clips per class.
        #[arg(long, default_value_t = 60)]
        per_class: usize,
        /// Samples per clip.
        #[arg(long, default_value_t = 8192)]
        length: usize,
        /// Sample rate in Hz.
        #[arg(long, default_value_t = 16000)]
        sample_rate: u32,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Re-render a JSON report in another format.
    Report {
        /// Input report (JSON).
        #[arg(long)]
        input: PathBuf,
        /// Output format: text, csv, or json.
        #[arg(long, default_value = "text")]
        format: String,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Manifest CSV path, or a dataset root for `--layout savee_dirs`.
    #[arg(long)]
    manifest: PathBuf,
    /// Manifest layout: csv or savee_dirs.
    #[arg(long, default_value = "csv")]
    layout: String,
}

impl DataArgs {
    fn load(&self) -> Result<DatasetManifest> {
        let layout = match self.layout.as_str() {
            "csv" => ManifestLayout::Csv,
            "savee_dirs" => ManifestLayout::SaveeDirs,
            other => {
                return Err(Error::Config(format!("unknown manifest layout `{other}`")))
            }
        };
        load_manifest(&self.manifest, layout)
    }
}

/// Knobs shared by extract/train/eval. Every flag overrides the config
/// file, which overrides the built-in defaults.
#[derive(Args)]
struct TuningArgs {
    /// Config file with `key=value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Wavelet family: haar, db2, db4, db8.
    #[arg(long)]
    wavelet: Option<String>,
    /// Boundary mode: symmetric, periodic, zero.
    #[arg(long)]
    mode: Option<String>,
    /// Decomposition depth J.
    #[arg(long)]
    levels: Option<usize>,
    /// Higuchi delay cap for the raw signal.
    #[arg(long)]
    kmax: Option<usize>,
    /// Higuchi delay cap for sub-band sequences.
    #[arg(long = "kmax-subband")]
    kmax_subband: Option<usize>,
    /// Fractal dimension estimator: higuchi or katz.
    #[arg(long)]
    fd: Option<String>,
    #[arg(long = "frame-len")]
    frame_len: Option<usize>,
    #[arg(long)]
    hop: Option<usize>,
    /// MMC target dimension.
    #[arg(long = "mmc-dim")]
    mmc_dim: Option<usize>,
    /// KNN neighbor count.
    #[arg(long = "knn-k")]
    knn_k: Option<usize>,
    /// Screening cascade: on or off.
    #[arg(long)]
    cascade: Option<String>,
    /// Features entering MMC+KNN: fd or all.
    #[arg(long)]
    scope: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

impl TuningArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut config = RunConfig::default();
        if let Some(path) = &self.config {
            apply_config_file(&mut config, path)?;
        }
        if let Some(v) = &self.wavelet {
            config.extraction.family = v.parse()?;
        }
        if let Some(v) = &self.mode {
            config.extraction.mode = v.parse()?;
        }
        if let Some(v) = self.levels {
            config.extraction.levels = v;
        }
        if let Some(v) = self.kmax {
            config.extraction.k_max_raw = v;
        }
        if let Some(v) = self.kmax_subband {
            config.extraction.k_max_subband = v;
        }
        if let Some(v) = &self.fd {
            config.extraction.fd_method = v.parse()?;
        }
        if let Some(v) = self.frame_len {
            config.extraction.frame_len = v;
        }
        if let Some(v) = self.hop {
            config.extraction.hop = v;
        }
        if let Some(v) = self.mmc_dim {
            config.classifier.mmc_dim = v;
        }
        if let Some(v) = self.knn_k {
            config.classifier.knn_k = v;
        }
        if let Some(v) = &self.cascade {
            config.classifier.use_cascade = parse_on_off(v)?;
        }
        if let Some(v) = &self.scope {
            config.classifier.feature_scope = v.parse()?;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        validate(&config)?;
        Ok(config)
    }
}

fn parse_on_off(v: &str) -> Result<bool> {
    match v {
        "on" => Ok(true),
        "off" => Ok(false),
        other => Err(Error::Config(format!("expected on|off, got `{other}`"))),
    }
}

fn validate(config: &RunConfig) -> Result<()> {
    let ex = &config.extraction;
    if ex.levels == 0 {
        return Err(Error::Config("levels must be >= 1".into()));
    }
    if ex.k_max_raw < 2 || ex.k_max_subband < 2 {
        return Err(Error::Config("kmax values must be >= 2".into()));
    }
    if ex.frame_len < 4 || ex.hop == 0 {
        return Err(Error::Config("frame_len must be >= 4 and hop >= 1".into()));
    }
    if config.classifier.mmc_dim == 0 || config.classifier.knn_k == 0 {
        return Err(Error::Config("mmc_dim and knn_k must be >= 1".into()));
    }
    Ok(())
}

fn apply_config_file(config: &mut RunConfig, path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "{}:{}: expected key=value, got `{line}`",
                path.display(),
                lineno + 1
            ))
        })?;
        let (key, value) = (key.trim(), value.trim());
        let bad_value =
            |e: Error| Error::Config(format!("{}:{}: {e}", path.display(), lineno + 1));
        let parse_num = |v: &str| -> Result<usize> {
            v.parse()
                .map_err(|_| Error::Config(format!("{}:{}: bad number `{v}`", path.display(), lineno + 1)))
        };
        match key {
            "wavelet" => {
                config.extraction.family = value.parse::<WaveletFamily>().map_err(bad_value)?
            }
            "mode" => config.extraction.mode = value.parse::<BoundaryMode>().map_err(bad_value)?,
            "levels" => config.extraction.levels = parse_num(value)?,
            "kmax" => config.extraction.k_max_raw = parse_num(value)?,
            "kmax_subband" => config.extraction.k_max_subband = parse_num(value)?,
            "fd" => config.extraction.fd_method = value.parse::<FdMethod>().map_err(bad_value)?,
            "frame_len" => config.extraction.frame_len = parse_num(value)?,
            "hop" => config.extraction.hop = parse_num(value)?,
            "pitch_fmin" => {
                config.extraction.pitch_f_min = value
                    .parse()
                    .map_err(|_| Error::Config(format!("bad pitch_fmin `{value}`")))?
            }
            "pitch_fmax" => {
                config.extraction.pitch_f_max = value
                    .parse()
                    .map_err(|_| Error::Config(format!("bad pitch_fmax `{value}`")))?
            }
            "voicing_threshold" => {
                config.extraction.voicing_threshold = value
                    .parse()
                    .map_err(|_| Error::Config(format!("bad voicing_threshold `{value}`")))?
            }
            "mmc_dim" => config.classifier.mmc_dim = parse_num(value)?,
            "knn_k" => config.classifier.knn_k = parse_num(value)?,
            "cascade" => config.classifier.use_cascade = parse_on_off(value)?,
            "scope" => {
                config.classifier.feature_scope =
                    value.parse::<FeatureScope>().map_err(bad_value)?
            }
            "seed" => {
                config.seed = value
                    .parse()
                    .map_err(|_| Error::Config(format!("bad seed `{value}`")))?
            }
            other => {
                return Err(Error::Config(format!(
                    "{}:{}: unknown key `{other}`",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Extract { data, tuning, out } => {
            let manifest = data.load()?;
            let config = tuning.resolve()?;
            let features = extract_manifest_features(&manifest, &config.extraction, None)?;
            for w in &features.warnings {
                eprintln!("warning: {w}");
            }
            let csv = features_to_csv(&features.records, config.extraction.levels);
            fracoustic::write_atomic(&out, csv.as_bytes())?;
            for (speaker, count) in manifest.per_speaker_counts() {
                println!("  {speaker}: {count} utterances");
            }
            println!(
                "extracted {} utterances ({} skipped, {} rows dropped at load) -> {}",
                features.records.len(),
                features.skipped,
                manifest.skipped,
                out.display()
            );
            Ok(())
        }
        Command::Train {
            data,
            tuning,
            features,
            out,
        } => {
            let manifest = data.load()?;
            let config = tuning.resolve()?;
            let extracted =
                extract_manifest_features(&manifest, &config.extraction, features.as_deref())?;
            for w in &extracted.warnings {
                eprintln!("warning: {w}");
            }
            let train: Vec<_> = extracted
                .records
                .iter()
                .map(|r| (r.vector.clone(), r.emotion))
                .collect();
            let model = fit_model(&train, &config.classifier)?;
            save_model(&model, &out)?;
            println!(
                "trained on {} utterances ({} skipped) -> {}",
                train.len(),
                extracted.skipped,
                out.display()
            );
            Ok(())
        }
        Command::Eval {
            data,
            tuning,
            protocol,
            features,
            out,
            format,
        } => {
            let manifest = data.load()?;
            let config = tuning.resolve()?;
            let kind: ProtocolKind = protocol.parse()?;
            let format: ReportFormat = format.parse()?;
            let reports = run_protocol(&manifest, kind, &config, features.as_deref())?;
            if let Some(dir) = &out {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                let ext = match format {
                    ReportFormat::Text => "txt",
                    ReportFormat::Csv => "csv",
                    ReportFormat::Json => "json",
                };
                for report in &reports {
                    let name = format!(
                        "report_{}_{}.{ext}",
                        report.protocol,
                        report.train_speakers.join("+")
                    );
                    emit_report(report, format, &dir.join(name))?;
                }
            } else {
                for report in &reports {
                    match format {
                        ReportFormat::Text => print!("{}", render_text(report)),
                        ReportFormat::Csv => print!("{}", render_csv(report)),
                        ReportFormat::Json => {
                            println!("{}", fracoustic::eval::report::render_json(report)?)
                        }
                    }
                    println!();
                }
            }
            for report in &reports {
                println!(
                    "{} {}: accuracy {:.4} ({} test utterances)",
                    report.protocol, report.split, report.overall_accuracy, report.test_count
                );
            }
            println!("mean accuracy: {:.4}", mean_overall_accuracy(&reports));
            Ok(())
        }
        Command::Synth {
            out_dir,
            per_class,
            length,
            sample_rate,
            seed,
        } => {
            let spec = SynthSpec {
                per_class,
                length,
                sample_rate,
                seed,
                ..SynthSpec::default()
            };
            let manifest = write_synthetic(&spec, &out_dir)?;
            println!(
                "wrote {} clips for {} speakers -> {}",
                manifest.len(),
                manifest.speakers().len(),
                out_dir.display()
            );
            Ok(())
        }
        Command::Report { input, format, out } => {
            let text = std::fs::read_to_string(&input).map_err(|e| Error::io(&input, e))?;
            let report = parse_json(&text, &input)?;
            report.check_consistency()?;
            let format: ReportFormat = format.parse()?;
            match out {
                Some(path) => emit_report(&report, format, &path)?,
                None => match format {
                    ReportFormat::Text => print!("{}", render_text(&report)),
                    ReportFormat::Csv => print!("{}", render_csv(&report)),
                    ReportFormat::Json => {
                        println!("{}", fracoustic::eval::report::render_json(&report)?)
                    }
                },
            }
            Ok(())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
