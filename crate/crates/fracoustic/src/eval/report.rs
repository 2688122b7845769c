//! Report rendering: human-readable text, key-value CSV, and JSON.
//!
//! JSON is the canonical machine format; parsing it back reproduces every
//! numeric field exactly. Files are written atomically (temp then rename).

use std::path::Path;

use crate::audio_io::Emotion;
use crate::error::{Error, Result};

use super::EvalReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::Parameter(format!("unknown report format `{other}`"))),
        }
    }
}

fn config_lines(report: &EvalReport) -> Vec<(String, String)> {
    let ex = &report.config.extraction;
    let cl = &report.config.classifier;
    vec![
        ("wavelet".into(), ex.family.to_string()),
        ("mode".into(), ex.mode.to_string()),
        ("levels".into(), ex.levels.to_string()),
        ("fd".into(), ex.fd_method.to_string()),
        ("kmax_subband".into(), ex.k_max_subband.to_string()),
        ("kmax_raw".into(), ex.k_max_raw.to_string()),
        ("frame_len".into(), ex.frame_len.to_string()),
        ("hop".into(), ex.hop.to_string()),
        ("mmc_dim".into(), cl.mmc_dim.to_string()),
        ("knn_k".into(), cl.knn_k.to_string()),
        ("cascade".into(), if cl.use_cascade { "on" } else { "off" }.into()),
        ("feature_scope".into(), cl.feature_scope.to_string()),
        ("seed".into(), report.config.seed.to_string()),
    ]
}

pub fn render_text(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "emotion recognition report (schema {})\n",
        report.schema_version
    ));
    out.push_str(&format!(
        "protocol: {}   split: {}\n",
        report.protocol, report.split
    ));
    out.push_str("config:");
    for (k, v) in config_lines(report) {
        out.push_str(&format!(" {k}={v}"));
    }
    out.push('\n');
    out.push_str(&format!(
        "train: {} utterances from [{}]\n",
        report.train_count,
        report.train_speakers.join(", ")
    ));
    out.push_str(&format!(
        "test:  {} utterances from [{}], {} skipped upstream\n",
        report.test_count,
        report.test_speakers.join(", "),
        report.skipped
    ));
    out.push_str(&format!(
        "overall accuracy: {:.4}\n\nper-emotion accuracy:\n",
        report.overall_accuracy
    ));
    for emotion in Emotion::ALL {
        match report.per_emotion_accuracy.get(emotion.name()) {
            Some(frac) => out.push_str(&format!("  {:<9} {:.4}\n", emotion.name(), frac)),
            None => out.push_str(&format!("  {:<9} (no test samples)\n", emotion.name())),
        }
    }
    out.push_str("\nconfusion matrix (rows = truth, columns = prediction):\n");
    out.push_str("           ");
    for emotion in Emotion::ALL {
        out.push_str(&format!("{:>9}", emotion.name()));
    }
    out.push('\n');
    for (i, emotion) in Emotion::ALL.iter().enumerate() {
        out.push_str(&format!("  {:<9}", emotion.name()));
        for j in 0..6 {
            out.push_str(&format!("{:>9}", report.confusion[i][j]));
        }
        out.push('\n');
    }
    out
}

pub fn render_csv(report: &EvalReport) -> String {
    let mut out = String::from("key,value\n");
    out.push_str(&format!("schema_version,{}\n", report.schema_version));
    out.push_str(&format!("protocol,{}\n", report.protocol));
    out.push_str(&format!("split,{}\n", report.split));
    out.push_str(&format!("train_speakers,{}\n", report.train_speakers.join("+")));
    out.push_str(&format!("test_speakers,{}\n", report.test_speakers.join("+")));
    out.push_str(&format!("train_count,{}\n", report.train_count));
    out.push_str(&format!("test_count,{}\n", report.test_count));
    out.push_str(&format!("skipped,{}\n", report.skipped));
    out.push_str(&format!("overall_accuracy,{}\n", report.overall_accuracy));
    for (k, v) in config_lines(report) {
        out.push_str(&format!("config.{k},{v}\n"));
    }
    for (emotion, frac) in &report.per_emotion_accuracy {
        out.push_str(&format!("accuracy.{emotion},{frac}\n"));
    }
    out.push_str("confusion");
    for emotion in Emotion::ALL {
        out.push_str(&format!(",{}", emotion.name()));
    }
    out.push('\n');
    for (i, emotion) in Emotion::ALL.iter().enumerate() {
        out.push_str(emotion.name());
        for j in 0..6 {
            out.push_str(&format!(",{}", report.confusion[i][j]));
        }
        out.push('\n');
    }
    out
}

pub fn render_json(report: &EvalReport) -> Result<String> {
    serde_json::to_string_pretty(report)
        .map_err(|e| Error::Internal(format!("report serialization failed: {e}")))
}

pub fn parse_json(text: &str, source: &Path) -> Result<EvalReport> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        path: source.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Render and write atomically.
pub fn emit_report(report: &EvalReport, format: ReportFormat, path: &Path) -> Result<()> {
    let body = match format {
        ReportFormat::Text => render_text(report),
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Json => render_json(report)?,
    };
    crate::write_atomic(path, body.as_bytes())
}
