//! Audio decoding, dataset manifests, and framing utilities.
//!
//! WAV support covers RIFF/WAVE PCM (8/16/24/32-bit integer, 32-bit float),
//! mono or multichannel; multichannel input is averaged to mono. Integer
//! samples are scaled by the type's maximum magnitude (e.g. 1/32768 for
//! 16-bit), not by per-file peak, so relative energies across a corpus are
//! preserved for the screening features.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The six emotion labels; `neutral` is deliberately not representable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Angry,
    Disgust,
    Fear,
    Happy,
    Sad,
    Surprise,
}

impl Emotion {
    pub const ALL: [Emotion; 6] = [
        Emotion::Angry,
        Emotion::Disgust,
        Emotion::Fear,
        Emotion::Happy,
        Emotion::Sad,
        Emotion::Surprise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Angry => "angry",
            Emotion::Disgust => "disgust",
            Emotion::Fear => "fear",
            Emotion::Happy => "happy",
            Emotion::Sad => "sad",
            Emotion::Surprise => "surprise",
        }
    }

    /// Position in the fixed label order used by confusion matrices.
    pub fn index(self) -> usize {
        Emotion::ALL.iter().position(|e| *e == self).unwrap()
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Emotion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "angry" | "anger" => Ok(Emotion::Angry),
            "disgust" => Ok(Emotion::Disgust),
            "fear" => Ok(Emotion::Fear),
            "happy" | "happiness" => Ok(Emotion::Happy),
            "sad" | "sadness" => Ok(Emotion::Sad),
            "surprise" => Ok(Emotion::Surprise),
            other => Err(Error::UnknownEmotion(other.to_string())),
        }
    }
}

/// A labeled mono utterance, samples normalized to `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub speaker: String,
    /// `None` until labels are attached from a manifest.
    pub emotion: Option<Emotion>,
    pub source_path: PathBuf,
}

impl AudioClip {
    pub fn new(
        samples: Vec<f64>,
        sample_rate: u32,
        source_path: impl Into<PathBuf>,
    ) -> Result<Self> {
        let clip = AudioClip {
            samples,
            sample_rate,
            speaker: String::new(),
            emotion: None,
            source_path: source_path.into(),
        };
        clip.validate()?;
        Ok(clip)
    }

    pub fn with_labels(mut self, speaker: impl Into<String>, emotion: Emotion) -> Self {
        self.speaker = speaker.into();
        self.emotion = Some(emotion);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::EmptySignal(self.source_path.clone()));
        }
        if self.sample_rate == 0 {
            return Err(Error::Parameter("sample rate must be positive".into()));
        }
        for (i, v) in self.samples.iter().enumerate() {
            if !v.is_finite() || v.abs() > 1.0 + 1e-6 {
                return Err(Error::Parameter(format!(
                    "sample {i} out of range after normalization: {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

// ---------------------------------------------------------------------------
// WAV decoding / encoding
// ---------------------------------------------------------------------------

fn read_u16(bytes: &[u8], at: usize) -> Option<u16> {
    bytes.get(at..at + 2).map(|b| u16::from_le_bytes([b[0], b[1]]))
}

fn read_u32(bytes: &[u8], at: usize) -> Option<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

const WAVE_FORMAT_PCM: u16 = 0x0001;
const WAVE_FORMAT_IEEE_FLOAT: u16 = 0x0003;
const WAVE_FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Decode a PCM WAV file to a mono clip (no labels attached).
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes, path)
}

/// Decode WAV bytes; `path` is used only for error reporting.
pub fn decode_wav(bytes: &[u8], path: &Path) -> Result<AudioClip> {
    let format_err = |reason: &str| Error::WavFormat {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(format_err("missing RIFF/WAVE magic"));
    }
    let mut fmt: Option<(u16, u16, u32, u16)> = None; // (tag, channels, rate, bits)
    let mut data: Option<&[u8]> = None;
    let mut at = 12usize;
    while at + 8 <= bytes.len() {
        let id = &bytes[at..at + 4];
        let size =
            read_u32(bytes, at + 4).ok_or_else(|| format_err("truncated chunk header"))? as usize;
        let body_start = at + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|e| *e <= bytes.len())
            .ok_or_else(|| format_err("chunk overruns file"))?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(format_err("fmt chunk too small"));
                }
                let mut tag = read_u16(body, 0).unwrap();
                let channels = read_u16(body, 2).unwrap();
                let rate = read_u32(body, 4).unwrap();
                let bits = read_u16(body, 14).unwrap();
                if tag == WAVE_FORMAT_EXTENSIBLE {
                    // actual format lives in the first two bytes of the sub-format GUID
                    tag = read_u16(body, 24)
                        .ok_or_else(|| format_err("truncated extensible fmt"))?;
                }
                fmt = Some((tag, channels, rate, bits));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // chunks are word-aligned
        at = body_end + size % 2;
    }
    let (tag, channels, rate, bits) = fmt.ok_or_else(|| format_err("missing fmt chunk"))?;
    let data = data.ok_or_else(|| format_err("missing data chunk"))?;
    if channels == 0 {
        return Err(format_err("zero channels"));
    }
    if rate == 0 {
        return Err(format_err("zero sample rate"));
    }
    let decode_frame: fn(&[u8]) -> f64 = match (tag, bits) {
        (WAVE_FORMAT_PCM, 8) => |b| (b[0] as f64 - 128.0) / 128.0,
        (WAVE_FORMAT_PCM, 16) => |b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0,
        (WAVE_FORMAT_PCM, 24) => |b| {
            let raw = (((b[2] as i32) << 24) | ((b[1] as i32) << 16) | ((b[0] as i32) << 8)) >> 8;
            raw as f64 / 8_388_608.0
        },
        (WAVE_FORMAT_PCM, 32) => {
            |b| i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64 / 2_147_483_648.0
        }
        (WAVE_FORMAT_IEEE_FLOAT, 32) => {
            |b| (f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64).clamp(-1.0, 1.0)
        }
        _ => {
            return Err(Error::UnsupportedCodec {
                path: path.to_path_buf(),
                tag,
                bits,
            })
        }
    };
    let bytes_per_sample = (bits / 8) as usize;
    let frame_size = bytes_per_sample * channels as usize;
    let frame_count = data.len() / frame_size;
    if frame_count == 0 {
        return Err(Error::EmptySignal(path.to_path_buf()));
    }
    let mut samples = Vec::with_capacity(frame_count);
    for f in 0..frame_count {
        let mut acc = 0.0;
        for c in 0..channels as usize {
            let start = f * frame_size + c * bytes_per_sample;
            acc += decode_frame(&data[start..start + bytes_per_sample]);
        }
        samples.push(acc / channels as f64);
    }
    AudioClip::new(samples, rate, path)
}

/// Write mono samples as a 16-bit PCM WAV file.
pub fn write_wav_16bit(path: impl AsRef<Path>, samples: &[f64], sample_rate: u32) -> Result<()> {
    let path = path.as_ref();
    let data_len = samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&WAVE_FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &v in samples {
        let q = (v * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Dataset manifests
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub speaker: String,
    pub emotion: Emotion,
}

/// Inventory of labeled utterances. Entries keep file order (CSV) or sorted
/// directory order (SAVEE layout) so loading is deterministic.
#[derive(Debug, Clone, Default)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    /// Rows dropped because the emotion was `neutral` or unparseable.
    pub skipped: usize,
}

impl DatasetManifest {
    pub fn speakers(&self) -> Vec<String> {
        let mut speakers: Vec<String> =
            self.entries.iter().map(|e| e.speaker.clone()).collect();
        speakers.sort();
        speakers.dedup();
        speakers
    }

    pub fn per_speaker_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for e in &self.entries {
            *counts.entry(e.speaker.clone()).or_insert(0) += 1;
        }
        counts
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn check_duplicates(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for e in &self.entries {
            if !seen.insert(&e.path) {
                return Err(Error::DuplicatePath(e.path.display().to_string()));
            }
        }
        Ok(())
    }

    /// Serialize back to the CSV layout.
    pub fn to_csv(&self) -> String {
        self.to_csv_relative(Path::new(""))
    }

    /// CSV with paths rewritten relative to `base` (the directory the
    /// manifest file will live in, since loading resolves against it).
    pub fn to_csv_relative(&self, base: &Path) -> String {
        let mut out = String::from("path,speaker,emotion\n");
        for e in &self.entries {
            let shown = e.path.strip_prefix(base).unwrap_or(&e.path);
            out.push_str(&format!("{},{},{}\n", shown.display(), e.speaker, e.emotion));
        }
        out
    }
}

/// Manifest layouts supported by [`load_manifest`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifestLayout {
    /// UTF-8 CSV with header `path,speaker,emotion`; relative paths resolve
    /// against the manifest's directory.
    Csv,
    /// One directory per speaker; the filename's leading letters encode the
    /// emotion (see [`DEFAULT_SAVEE_PREFIXES`]).
    SaveeDirs,
}

/// Default filename-prefix mapping for SAVEE-style trees. `None` marks a
/// recognized prefix that is skipped (neutral). Longest prefixes first so
/// `sa`/`su` win over a bare `s`.
pub const DEFAULT_SAVEE_PREFIXES: [(&str, Option<Emotion>); 7] = [
    ("sa", Some(Emotion::Sad)),
    ("su", Some(Emotion::Surprise)),
    ("a", Some(Emotion::Angry)),
    ("d", Some(Emotion::Disgust)),
    ("f", Some(Emotion::Fear)),
    ("h", Some(Emotion::Happy)),
    ("n", None),
];

pub fn load_manifest(path: impl AsRef<Path>, layout: ManifestLayout) -> Result<DatasetManifest> {
    match layout {
        ManifestLayout::Csv => load_manifest_csv(path.as_ref()),
        ManifestLayout::SaveeDirs => load_manifest_savee(path.as_ref(), &DEFAULT_SAVEE_PREFIXES),
    }
}

fn load_manifest_csv(path: &Path) -> Result<DatasetManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        reason: "empty file".into(),
    })?;
    if header.trim() != "path,speaker,emotion" {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            reason: format!("expected header `path,speaker,emotion`, got `{header}`"),
        });
    }
    let mut manifest = DatasetManifest::default();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                reason: format!(
                    "line {}: expected 3 fields, got {}",
                    lineno + 2,
                    fields.len()
                ),
            });
        }
        match fields[2].parse::<Emotion>() {
            Ok(emotion) => {
                let entry_path = base.join(fields[0].trim());
                manifest.entries.push(ManifestEntry {
                    path: entry_path,
                    speaker: fields[1].trim().to_string(),
                    emotion,
                });
            }
            // unparseable or neutral emotions are skipped, not fatal
            Err(_) => manifest.skipped += 1,
        }
    }
    if manifest.entries.is_empty() {
        return Err(Error::EmptyManifest {
            path: path.to_path_buf(),
        });
    }
    manifest.check_duplicates()?;
    Ok(manifest)
}

/// Build a manifest from a SAVEE-style directory tree using a custom prefix
/// mapping (the filename convention is a dataset artifact, so it stays
/// configurable).
pub fn load_manifest_savee(
    root: &Path,
    prefixes: &[(&str, Option<Emotion>)],
) -> Result<DatasetManifest> {
    let mut speaker_dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    speaker_dirs.sort();
    let mut manifest = DatasetManifest::default();
    for dir in speaker_dirs {
        let speaker = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut files: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension()
                    .map(|e| e.eq_ignore_ascii_case("wav"))
                    .unwrap_or(false)
            })
            .collect();
        files.sort();
        for file in files {
            let stem = file
                .file_stem()
                .map(|n| n.to_string_lossy().to_ascii_lowercase())
                .unwrap_or_default();
            let matched = prefixes.iter().find(|(p, _)| stem.starts_with(p));
            match matched {
                Some((_, Some(emotion))) => manifest.entries.push(ManifestEntry {
                    path: file,
                    speaker: speaker.clone(),
                    emotion: *emotion,
                }),
                // neutral or unknown prefix
                _ => manifest.skipped += 1,
            }
        }
    }
    if manifest.entries.is_empty() {
        return Err(Error::EmptyManifest {
            path: root.to_path_buf(),
        });
    }
    manifest.check_duplicates()?;
    Ok(manifest)
}

// ---------------------------------------------------------------------------
// Framing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Rectangular,
    Hamming,
}

impl WindowKind {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            WindowKind::Rectangular => vec![1.0; len],
            WindowKind::Hamming => (0..len)
                .map(|i| {
                    if len == 1 {
                        1.0
                    } else {
                        0.54 - 0.46
                            * (2.0 * std::f64::consts::PI * i as f64 / (len - 1) as f64).cos()
                    }
                })
                .collect(),
        }
    }
}

/// Fixed-length windows cut from a signal: frame `i` covers samples
/// `[i * hop, i * hop + frame_len)` with the window applied multiplicatively.
#[derive(Debug, Clone)]
pub struct FrameSeries {
    pub frames: Vec<Vec<f64>>,
    pub frame_len: usize,
    pub hop: usize,
    pub window: WindowKind,
}

impl FrameSeries {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

pub fn frame_signal(
    samples: &[f64],
    frame_len: usize,
    hop: usize,
    window: WindowKind,
) -> Result<FrameSeries> {
    if frame_len == 0 {
        return Err(Error::Parameter("frame length must be >= 1".into()));
    }
    if hop == 0 {
        return Err(Error::Parameter("hop must be >= 1".into()));
    }
    if frame_len > samples.len() {
        return Err(Error::TooShort(format!(
            "frame length {frame_len} exceeds signal length {}",
            samples.len()
        )));
    }
    let coeffs = window.coefficients(frame_len);
    let count = (samples.len() - frame_len) / hop + 1;
    let mut frames = Vec::with_capacity(count);
    for i in 0..count {
        let start = i * hop;
        let frame: Vec<f64> = samples[start..start + frame_len]
            .iter()
            .zip(&coeffs)
            .map(|(s, w)| s * w)
            .collect();
        frames.push(frame);
    }
    Ok(FrameSeries {
        frames,
        frame_len,
        hop,
        window,
    })
}
