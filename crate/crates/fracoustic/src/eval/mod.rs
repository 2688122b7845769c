//! Experiment protocols, feature extraction over manifests, and reports.
//!
//! Splits are speaker-disjoint: `one_vs_three` trains on each single
//! speaker in turn, `two_vs_two` on every unordered speaker pair. An
//! experiment extracts features (optionally through a keyed CSV cache),
//! fits the classifier on the training speakers, predicts the rest, and
//! assembles a fully reproducible report with the configuration embedded.

pub mod report;
pub mod synth;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::audio_io::{DatasetManifest, Emotion};
use crate::classify::{fit_model, predict, ClassifierConfig};
use crate::error::{Error, Result};
use crate::pipeline::{
    cache_key, extract_features, features_from_csv, features_to_csv, ExtractionConfig,
    FeatureRecord,
};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    OneVsThree,
    TwoVsTwo,
    Custom,
}

impl std::fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ProtocolKind::OneVsThree => "one_vs_three",
            ProtocolKind::TwoVsTwo => "two_vs_two",
            ProtocolKind::Custom => "custom",
        })
    }
}

impl std::str::FromStr for ProtocolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one_vs_three" => Ok(ProtocolKind::OneVsThree),
            "two_vs_two" => Ok(ProtocolKind::TwoVsTwo),
            "custom" => Ok(ProtocolKind::Custom),
            other => Err(Error::Protocol(format!("unknown protocol `{other}`"))),
        }
    }
}

/// One speaker-disjoint train/test split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitProtocol {
    pub kind: ProtocolKind,
    pub train_speakers: Vec<String>,
    pub test_speakers: Vec<String>,
}

impl SplitProtocol {
    pub fn custom(train: Vec<String>, test: Vec<String>) -> Result<Self> {
        let split = SplitProtocol {
            kind: ProtocolKind::Custom,
            train_speakers: train,
            test_speakers: test,
        };
        split.validate()?;
        Ok(split)
    }

    fn validate(&self) -> Result<()> {
        if self.train_speakers.is_empty() || self.test_speakers.is_empty() {
            return Err(Error::Protocol(
                "train and test speaker sets must both be nonempty".into(),
            ));
        }
        for s in &self.train_speakers {
            if self.test_speakers.contains(s) {
                return Err(Error::Protocol(format!(
                    "speaker `{s}` appears in both train and test sets"
                )));
            }
        }
        Ok(())
    }

    /// Short label used in report filenames and tables.
    pub fn name(&self) -> String {
        format!("train={}", self.train_speakers.join("+"))
    }
}

/// Enumerate the protocol's splits over the manifest's speakers.
pub fn make_splits(manifest: &DatasetManifest, kind: ProtocolKind) -> Result<Vec<SplitProtocol>> {
    let speakers = manifest.speakers();
    match kind {
        ProtocolKind::OneVsThree => {
            if speakers.len() < 2 {
                return Err(Error::Protocol(format!(
                    "one_vs_three needs at least 2 speakers, manifest has {}",
                    speakers.len()
                )));
            }
            Ok(speakers
                .iter()
                .map(|s| SplitProtocol {
                    kind,
                    train_speakers: vec![s.clone()],
                    test_speakers: speakers.iter().filter(|t| *t != s).cloned().collect(),
                })
                .collect())
        }
        ProtocolKind::TwoVsTwo => {
            if speakers.len() < 3 {
                return Err(Error::Protocol(format!(
                    "two_vs_two needs at least 3 speakers, manifest has {}",
                    speakers.len()
                )));
            }
            let mut splits = Vec::new();
            for i in 0..speakers.len() {
                for j in i + 1..speakers.len() {
                    let train = vec![speakers[i].clone(), speakers[j].clone()];
                    let test = speakers
                        .iter()
                        .enumerate()
                        .filter(|(k, _)| *k != i && *k != j)
                        .map(|(_, s)| s.clone())
                        .collect();
                    splits.push(SplitProtocol {
                        kind,
                        train_speakers: train,
                        test_speakers: test,
                    });
                }
            }
            Ok(splits)
        }
        ProtocolKind::Custom => Err(Error::Protocol(
            "custom splits are built with SplitProtocol::custom".into(),
        )),
    }
}

/// Full configuration snapshot embedded in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub extraction: ExtractionConfig,
    pub classifier: ClassifierConfig,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            extraction: ExtractionConfig::default(),
            classifier: ClassifierConfig::default(),
            seed: 42,
        }
    }
}

/// Outcome of one split: accuracies, the 6x6 confusion matrix in the fixed
/// label order, and the exact configuration that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub protocol: String,
    pub split: String,
    pub train_speakers: Vec<String>,
    pub test_speakers: Vec<String>,
    pub train_count: usize,
    pub test_count: usize,
    /// Utterances dropped before the split (unreadable or failed extraction).
    pub skipped: usize,
    pub overall_accuracy: f64,
    /// Only emotions present in the test set appear.
    pub per_emotion_accuracy: BTreeMap<String, f64>,
    /// `confusion[true][predicted]`, rows/columns in [`Emotion::ALL`] order.
    pub confusion: Vec<Vec<u64>>,
    pub config: RunConfig,
}

impl EvalReport {
    /// Internal consistency: row sums match per-emotion counts and the
    /// trace/total ratio reproduces the stored accuracy.
    pub fn check_consistency(&self) -> Result<()> {
        let total: u64 = self.confusion.iter().flatten().sum();
        if total as usize != self.test_count {
            return Err(Error::Internal(format!(
                "confusion total {total} != test count {}",
                self.test_count
            )));
        }
        let trace: u64 = (0..6).map(|i| self.confusion[i][i]).sum();
        let accuracy = if total == 0 {
            0.0
        } else {
            trace as f64 / total as f64
        };
        if (accuracy - self.overall_accuracy).abs() > 1e-12 {
            return Err(Error::Internal(
                "stored accuracy does not match confusion matrix".into(),
            ));
        }
        for (i, emotion) in Emotion::ALL.iter().enumerate() {
            let row_sum: u64 = self.confusion[i].iter().sum();
            match self.per_emotion_accuracy.get(emotion.name()) {
                Some(frac) => {
                    let expect = self.confusion[i][i] as f64 / row_sum as f64;
                    if row_sum == 0 || (frac - expect).abs() > 1e-12 {
                        return Err(Error::Internal(format!(
                            "per-emotion accuracy for {emotion} inconsistent"
                        )));
                    }
                }
                None => {
                    if row_sum != 0 {
                        return Err(Error::Internal(format!(
                            "missing per-emotion accuracy for {emotion}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Extraction outcome for a manifest: ordered records, plus skip count and
/// accumulated warnings.
#[derive(Debug, Clone)]
pub struct ManifestFeatures {
    pub records: Vec<FeatureRecord>,
    pub skipped: usize,
    pub warnings: Vec<String>,
}

/// Extract features for every manifest entry, in manifest order. Entries
/// whose file cannot be read or extracted are skipped and counted, not
/// fatal. With `cache_path`, rows whose content/config key matches are
/// reused and the refreshed cache is written back atomically.
pub fn extract_manifest_features(
    manifest: &DatasetManifest,
    config: &ExtractionConfig,
    cache_path: Option<&Path>,
) -> Result<ManifestFeatures> {
    let mut cached: BTreeMap<u64, FeatureRecord> = BTreeMap::new();
    if let Some(path) = cache_path {
        if path.exists() {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            for record in features_from_csv(&text, path)? {
                cached.insert(record.cache_key, record);
            }
        }
    }
    type Extracted = (FeatureRecord, Vec<String>, Option<u32>);
    let outcomes = crate::map_batch(&manifest.entries, |entry| -> Result<Extracted> {
        let bytes = std::fs::read(&entry.path).map_err(|e| Error::io(&entry.path, e))?;
        let key = cache_key(&bytes, config);
        if let Some(hit) = cached.get(&key) {
            let mut record = hit.clone();
            record.path = entry.path.clone();
            record.speaker = entry.speaker.clone();
            record.emotion = entry.emotion;
            return Ok((record, Vec::new(), None));
        }
        let clip = crate::audio_io::decode_wav(&bytes, &entry.path)?
            .with_labels(entry.speaker.clone(), entry.emotion);
        let rate = clip.sample_rate;
        let out = extract_features(&clip, config)?;
        Ok((
            FeatureRecord {
                path: entry.path.clone(),
                speaker: entry.speaker.clone(),
                emotion: entry.emotion,
                vector: out.vector,
                cache_key: key,
            },
            out.warnings,
            Some(rate),
        ))
    });
    let mut features = ManifestFeatures {
        records: Vec::with_capacity(manifest.entries.len()),
        skipped: 0,
        warnings: Vec::new(),
    };
    let mut rates = std::collections::BTreeSet::new();
    for outcome in outcomes {
        match outcome {
            Ok((record, warnings, rate)) => {
                features.records.push(record);
                features.warnings.extend(warnings);
                if let Some(rate) = rate {
                    rates.insert(rate);
                }
            }
            Err(e) => {
                features.skipped += 1;
                features.warnings.push(format!("skipped: {e}"));
            }
        }
    }
    // fractal features are rate-agnostic, but mixed rates deserve a flag
    if rates.len() > 1 {
        features.warnings.push(format!(
            "manifest mixes sample rates {:?}; no resampling is applied",
            rates
        ));
    }
    if features.records.is_empty() {
        return Err(Error::InsufficientData(
            "no utterance survived feature extraction".into(),
        ));
    }
    if let Some(path) = cache_path {
        let levels = config.levels;
        let csv = features_to_csv(&features.records, levels);
        crate::write_atomic(path, csv.as_bytes())?;
    }
    Ok(features)
}

/// Fit on the training speakers, predict the rest, assemble the report.
pub fn run_split(
    records: &[FeatureRecord],
    split: &SplitProtocol,
    config: &RunConfig,
    skipped: usize,
) -> Result<EvalReport> {
    split.validate()?;
    let train: Vec<(crate::pipeline::FeatureVector, Emotion)> = records
        .iter()
        .filter(|r| split.train_speakers.contains(&r.speaker))
        .map(|r| (r.vector.clone(), r.emotion))
        .collect();
    let test: Vec<&FeatureRecord> = records
        .iter()
        .filter(|r| split.test_speakers.contains(&r.speaker))
        .collect();
    if train.is_empty() || test.is_empty() {
        return Err(Error::Protocol(format!(
            "split {} selects {} train and {} test utterances",
            split.name(),
            train.len(),
            test.len()
        )));
    }
    let model = fit_model(&train, &config.classifier)?;
    let mut confusion = vec![vec![0u64; 6]; 6];
    for record in &test {
        let predicted = predict(&model, &record.vector)?;
        confusion[record.emotion.index()][predicted.index()] += 1;
    }
    let total: u64 = confusion.iter().flatten().sum();
    let trace: u64 = (0..6).map(|i| confusion[i][i]).sum();
    let mut per_emotion = BTreeMap::new();
    for (i, emotion) in Emotion::ALL.iter().enumerate() {
        let row_sum: u64 = confusion[i].iter().sum();
        if row_sum > 0 {
            per_emotion.insert(
                emotion.name().to_string(),
                confusion[i][i] as f64 / row_sum as f64,
            );
        }
    }
    let report = EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        protocol: split.kind.to_string(),
        split: split.name(),
        train_speakers: split.train_speakers.clone(),
        test_speakers: split.test_speakers.clone(),
        train_count: train.len(),
        test_count: test.len(),
        skipped,
        overall_accuracy: trace as f64 / total as f64,
        per_emotion_accuracy: per_emotion,
        confusion,
        config: config.clone(),
    };
    report.check_consistency()?;
    Ok(report)
}

/// Extract once and evaluate one split.
pub fn run_experiment(
    manifest: &DatasetManifest,
    split: &SplitProtocol,
    config: &RunConfig,
    cache_path: Option<&Path>,
) -> Result<EvalReport> {
    let features = extract_manifest_features(manifest, &config.extraction, cache_path)?;
    run_split(&features.records, split, config, features.skipped)
}

/// Extract once and evaluate every split of the protocol.
pub fn run_protocol(
    manifest: &DatasetManifest,
    kind: ProtocolKind,
    config: &RunConfig,
    cache_path: Option<&Path>,
) -> Result<Vec<EvalReport>> {
    let splits = make_splits(manifest, kind)?;
    let features = extract_manifest_features(manifest, &config.extraction, cache_path)?;
    splits
        .iter()
        .map(|split| run_split(&features.records, split, config, features.skipped))
        .collect()
}

pub fn mean_overall_accuracy(reports: &[EvalReport]) -> f64 {
    if reports.is_empty() {
        return 0.0;
    }
    reports.iter().map(|r| r.overall_accuracy).sum::<f64>() / reports.len() as f64
}
