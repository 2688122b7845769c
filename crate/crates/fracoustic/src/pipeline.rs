//! Per-utterance feature vectors and the sequential screening cascade.
//!
//! A feature vector concatenates fractal dimensions of every wavelet
//! sub-band with utterance-level screening statistics:
//!
//! ```text
//! fd:     [fd_d1 .. fd_dJ, fd_a1 .. fd_aJ, fd_raw]        (2J + 1 values)
//! screen: [le_mean, le_std, teo_mean, teo_std, zcr_mean, pitch_mean]
//! ```
//!
//! Fractal dimensions are computed over whole coefficient sequences (no
//! sliding windows). A degenerate band (constant sequence) contributes the
//! sentinel 1.0 and a warning instead of failing the utterance; the same
//! applies to levels lost when a short clip clamps the decomposition
//! depth, so vector length depends only on `(levels, layout_version)`.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::audio_io::{frame_signal, AudioClip, Emotion, WindowKind};
use crate::error::{Error, Result};
use crate::fractal::{higuchi_fd, katz_fd, HiguchiConfig, DEGENERATE_FD_SENTINEL};
use crate::time_features::{
    log_energy_track, pitch_track, teo_mean_track, track_stats, zcr_track, PitchConfig, LOG_EPS,
};
use crate::wavelet::{analyze_levels, filter_coeffs, BoundaryMode, WaveletFamily};

pub const LAYOUT_VERSION: u32 = 1;

/// Indices into the screening block of a [`FeatureVector`].
pub const SCREEN_LE_MEAN: usize = 0;
pub const SCREEN_LE_STD: usize = 1;
pub const SCREEN_TEO_MEAN: usize = 2;
pub const SCREEN_TEO_STD: usize = 3;
pub const SCREEN_ZCR_MEAN: usize = 4;
pub const SCREEN_PITCH_MEAN: usize = 5;
pub const SCREEN_LEN: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FdMethod {
    Higuchi,
    Katz,
}

impl fmt::Display for FdMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FdMethod::Higuchi => "higuchi",
            FdMethod::Katz => "katz",
        })
    }
}

impl FromStr for FdMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "higuchi" => Ok(FdMethod::Higuchi),
            "katz" => Ok(FdMethod::Katz),
            other => Err(Error::Parameter(format!("unknown fd method `{other}`"))),
        }
    }
}

/// Everything that determines a feature vector for a given clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    pub family: WaveletFamily,
    pub mode: BoundaryMode,
    pub levels: usize,
    pub fd_method: FdMethod,
    /// Higuchi delay cap for sub-band sequences (they halve per level).
    pub k_max_subband: usize,
    /// Higuchi delay cap for the raw signal.
    pub k_max_raw: usize,
    pub frame_len: usize,
    pub hop: usize,
    pub pitch_f_min: f64,
    pub pitch_f_max: f64,
    pub voicing_threshold: f64,
    pub layout_version: u32,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        let pitch = PitchConfig::default();
        ExtractionConfig {
            family: WaveletFamily::Db4,
            mode: BoundaryMode::Symmetric,
            levels: 5,
            fd_method: FdMethod::Higuchi,
            k_max_subband: 8,
            k_max_raw: 16,
            frame_len: 512,
            hop: 256,
            pitch_f_min: pitch.f_min,
            pitch_f_max: pitch.f_max,
            voicing_threshold: pitch.voicing_threshold,
            layout_version: LAYOUT_VERSION,
        }
    }
}

impl ExtractionConfig {
    pub fn pitch_config(&self) -> PitchConfig {
        PitchConfig {
            f_min: self.pitch_f_min,
            f_max: self.pitch_f_max,
            voicing_threshold: self.voicing_threshold,
        }
    }

    /// Canonical one-line form; feeds the feature-cache key.
    pub fn fingerprint(&self) -> String {
        format!(
            "v{} {} {} J{} {} ks{} kr{} fl{} hop{} pf{}..{} vt{}",
            self.layout_version,
            self.family,
            self.mode,
            self.levels,
            self.fd_method,
            self.k_max_subband,
            self.k_max_raw,
            self.frame_len,
            self.hop,
            self.pitch_f_min,
            self.pitch_f_max,
            self.voicing_threshold
        )
    }
}

/// Fixed-layout numeric description of one utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// `[fd_d1..fd_dJ, fd_a1..fd_aJ, fd_raw]`, length `2 * levels + 1`.
    pub fd: Vec<f64>,
    /// `[le_mean, le_std, teo_mean, teo_std, zcr_mean, pitch_mean]`.
    pub screen: Vec<f64>,
    /// False when every pitch frame was unvoiced; `screen[SCREEN_PITCH_MEAN]`
    /// is 0.0 in that case rather than NaN.
    pub pitch_voiced: bool,
    pub levels: usize,
    pub layout_version: u32,
}

impl FeatureVector {
    pub fn fd_len(levels: usize) -> usize {
        2 * levels + 1
    }

    pub fn len(&self) -> usize {
        self.fd.len() + self.screen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Column names matching the CSV cache layout, without the leading
    /// path/speaker/emotion columns.
    pub fn column_names(levels: usize) -> Vec<String> {
        let mut names = Vec::with_capacity(Self::fd_len(levels) + SCREEN_LEN + 1);
        for j in 1..=levels {
            names.push(format!("fd_d{j}"));
        }
        for j in 1..=levels {
            names.push(format!("fd_a{j}"));
        }
        names.push("fd_raw".into());
        for n in ["le_mean", "le_std", "teo_mean", "teo_std", "zcr_mean", "pitch_mean"] {
            names.push(n.into());
        }
        names.push("pitch_voiced".into());
        names
    }

    fn assert_finite(&self) -> Result<()> {
        if self.fd.iter().chain(self.screen.iter()).all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Internal("non-finite feature value".into()))
        }
    }
}

/// Extraction result: the vector plus any degradation notes (degenerate
/// bands, clamped decomposition depth, shortened frames).
#[derive(Debug, Clone)]
pub struct Extraction {
    pub vector: FeatureVector,
    pub warnings: Vec<String>,
}

fn band_fd(
    series: &[f64],
    method: FdMethod,
    k_max: usize,
    label: &str,
    warnings: &mut Vec<String>,
) -> f64 {
    let computed = match method {
        FdMethod::Higuchi => higuchi_fd(series, &HiguchiConfig::new(k_max)).map(|e| {
            if e.k_range_shrunk {
                warnings.push(format!("{label}: short band shrank the higuchi k range"));
            }
            e.dimension
        }),
        FdMethod::Katz => katz_fd(series),
    };
    match computed {
        Ok(v) if v.is_finite() => v,
        Ok(_) | Err(_) => {
            warnings.push(format!(
                "{label}: degenerate fractal dimension, substituting {DEGENERATE_FD_SENTINEL}"
            ));
            DEGENERATE_FD_SENTINEL
        }
    }
}

/// Compute the full feature vector for one clip. Deterministic for a fixed
/// `(clip, config)` pair, bit for bit.
pub fn extract_features(clip: &AudioClip, config: &ExtractionConfig) -> Result<Extraction> {
    let mut warnings = Vec::new();
    let samples = &clip.samples;
    // reject bad pitch bands up front; later Parameter errors from the
    // pitch path then only mean "frame too short for the band"
    let pitch_cfg = config.pitch_config();
    if !(pitch_cfg.f_min > 0.0 && pitch_cfg.f_min < pitch_cfg.f_max)
        || pitch_cfg.f_max >= clip.sample_rate as f64 / 2.0
    {
        return Err(Error::Parameter(format!(
            "invalid pitch band [{}, {}] for sample rate {}",
            pitch_cfg.f_min, pitch_cfg.f_max, clip.sample_rate
        )));
    }
    let filter = filter_coeffs(config.family);

    // fractal block: one dimension per detail band, approx band, and the raw signal
    let bands = analyze_levels(samples, &filter, config.mode, config.levels)?;
    let achieved = bands.details.len();
    if achieved < config.levels {
        warnings.push(format!(
            "decomposition clamped to {achieved} of {} levels (clip {})",
            config.levels,
            clip.source_path.display()
        ));
    }
    let mut fd = Vec::with_capacity(FeatureVector::fd_len(config.levels));
    for j in 0..config.levels {
        if j < achieved {
            fd.push(band_fd(
                &bands.details[j],
                config.fd_method,
                config.k_max_subband,
                &format!("d{}", j + 1),
                &mut warnings,
            ));
        } else {
            warnings.push(format!("d{}: level missing, substituting sentinel", j + 1));
            fd.push(DEGENERATE_FD_SENTINEL);
        }
    }
    for j in 0..config.levels {
        if j < achieved {
            fd.push(band_fd(
                &bands.approxes[j],
                config.fd_method,
                config.k_max_subband,
                &format!("a{}", j + 1),
                &mut warnings,
            ));
        } else {
            warnings.push(format!("a{}: level missing, substituting sentinel", j + 1));
            fd.push(DEGENERATE_FD_SENTINEL);
        }
    }
    fd.push(band_fd(
        samples,
        config.fd_method,
        config.k_max_raw,
        "raw",
        &mut warnings,
    ));

    // screening block: utterance-level statistics of the frame tracks
    let mut frame_len = config.frame_len;
    let mut hop = config.hop;
    if frame_len > samples.len() {
        frame_len = samples.len();
        hop = hop.min(frame_len);
        warnings.push(format!(
            "clip shorter than one frame; using a single {frame_len}-sample frame"
        ));
    }
    let rect = frame_signal(samples, frame_len, hop, WindowKind::Rectangular)?;
    let le_stats = track_stats(&log_energy_track(&rect, LOG_EPS)?)?
        .expect("log-energy track has no undefined values");
    let teo_stats = track_stats(&teo_mean_track(&rect)?)?
        .expect("teo track has no undefined values");
    let zcr_stats = track_stats(&zcr_track(&rect)?)?
        .expect("zcr track has no undefined values");
    let hamming = frame_signal(samples, frame_len, hop, WindowKind::Hamming)?;
    let (pitch_mean, pitch_voiced) =
        match pitch_track(&hamming, clip.sample_rate, &config.pitch_config()) {
            Ok(track) => match track_stats(&track)? {
                Some(stats) => (stats.mean, true),
                None => (0.0, false),
            },
            // frames too short to hold the quefrency band; treat as unvoiced
            Err(Error::Parameter(reason)) => {
                warnings.push(format!("pitch unavailable: {reason}"));
                (0.0, false)
            }
            Err(other) => return Err(other),
        };

    let vector = FeatureVector {
        fd,
        screen: vec![
            le_stats.mean,
            le_stats.std,
            teo_stats.mean,
            teo_stats.std,
            zcr_stats.mean,
            pitch_mean,
        ],
        pitch_voiced,
        levels: config.levels,
        layout_version: config.layout_version,
    };
    vector.assert_finite()?;
    Ok(Extraction { vector, warnings })
}

/// Extract many clips; parallel under the `parallel` feature, with output
/// order matching input order either way.
pub fn extract_features_batch(
    clips: &[AudioClip],
    config: &ExtractionConfig,
) -> Vec<Result<Extraction>> {
    crate::map_batch(clips, |clip| extract_features(clip, config))
}

// ---------------------------------------------------------------------------
// Screening cascade
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Greater,
    Less,
}

/// One learned decision stump over a screening feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningStage {
    pub target: Emotion,
    pub feature_index: usize,
    pub direction: Direction,
    pub threshold: f64,
    /// Half the gap between the class-conditional means; a zero-margin
    /// stage is kept but never fires.
    pub margin: f64,
}

impl ScreeningStage {
    fn fires(&self, v: &FeatureVector) -> Result<bool> {
        let value = *v.screen.get(self.feature_index).ok_or_else(|| {
            Error::Shape(format!(
                "screen feature index {} out of range for layout of {} values",
                self.feature_index,
                v.screen.len()
            ))
        })?;
        if self.margin <= 0.0 {
            return Ok(false);
        }
        Ok(match self.direction {
            Direction::Greater => value > self.threshold,
            Direction::Less => value < self.threshold,
        })
    }
}

/// Ordered threshold stages; the first firing stage decides.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScreeningCascade {
    pub stages: Vec<ScreeningStage>,
}

/// Stage order used when none is configured: angry by Teager energy, then
/// sad and disgust by log energy.
pub fn default_cascade_order() -> Vec<(Emotion, usize, Direction)> {
    vec![
        (Emotion::Angry, SCREEN_TEO_MEAN, Direction::Greater),
        (Emotion::Sad, SCREEN_LE_MEAN, Direction::Less),
        (Emotion::Disgust, SCREEN_LE_MEAN, Direction::Less),
    ]
}

/// Fit stage thresholds sequentially: each stage takes the midpoint between
/// the target class mean and the complement mean on its designated feature,
/// computed over the utterances surviving all previous stages.
pub fn fit_cascade(
    features: &[(FeatureVector, Emotion)],
    order: &[(Emotion, usize, Direction)],
) -> Result<ScreeningCascade> {
    let mut seen = std::collections::BTreeSet::new();
    for (emotion, _, _) in order {
        if !seen.insert(*emotion) {
            return Err(Error::Parameter(format!(
                "cascade lists {emotion} twice"
            )));
        }
    }
    let mut survivors: Vec<&(FeatureVector, Emotion)> = features.iter().collect();
    let mut stages = Vec::with_capacity(order.len());
    for &(target, feature_index, direction) in order {
        let mut target_sum = 0.0;
        let mut target_n = 0usize;
        let mut rest_sum = 0.0;
        let mut rest_n = 0usize;
        for (v, emotion) in &survivors {
            let value = *v.screen.get(feature_index).ok_or_else(|| {
                Error::Shape(format!("screen feature index {feature_index} out of range"))
            })?;
            if *emotion == target {
                target_sum += value;
                target_n += 1;
            } else {
                rest_sum += value;
                rest_n += 1;
            }
        }
        if target_n == 0 || rest_n == 0 {
            return Err(Error::InsufficientData(format!(
                "screening stage for {target} needs surviving utterances of the target \
                 and of the complement (got {target_n}/{rest_n})"
            )));
        }
        let target_mean = target_sum / target_n as f64;
        let rest_mean = rest_sum / rest_n as f64;
        let stage = ScreeningStage {
            target,
            feature_index,
            direction,
            threshold: (target_mean + rest_mean) / 2.0,
            margin: (target_mean - rest_mean).abs() / 2.0,
        };
        survivors.retain(|(v, _)| !stage.fires(v).unwrap_or(false));
        stages.push(stage);
    }
    Ok(ScreeningCascade { stages })
}

/// Evaluate the cascade: the first stage whose strict predicate fires
/// returns its target emotion; `None` means pass-through to the residual
/// classifier.
pub fn apply_cascade(cascade: &ScreeningCascade, v: &FeatureVector) -> Result<Option<Emotion>> {
    for stage in &cascade.stages {
        if stage.fires(v)? {
            return Ok(Some(stage.target));
        }
    }
    Ok(None)
}

// ---------------------------------------------------------------------------
// Feature CSV cache
// ---------------------------------------------------------------------------

/// One labeled feature row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub path: PathBuf,
    pub speaker: String,
    pub emotion: Emotion,
    pub vector: FeatureVector,
    /// Hash of (file bytes, extraction config); rows with a stale key are
    /// recomputed rather than trusted.
    pub cache_key: u64,
}

/// FNV-1a, used for feature-cache keys; stable across runs and platforms.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Cache key for a clip's bytes under a given extraction config.
pub fn cache_key(file_bytes: &[u8], config: &ExtractionConfig) -> u64 {
    let mut keyed = Vec::with_capacity(file_bytes.len() + 64);
    keyed.extend_from_slice(file_bytes);
    keyed.extend_from_slice(config.fingerprint().as_bytes());
    fnv1a(&keyed)
}

pub fn features_to_csv(records: &[FeatureRecord], levels: usize) -> String {
    let mut out = String::from("path,speaker,emotion");
    for name in FeatureVector::column_names(levels) {
        out.push(',');
        out.push_str(&name);
    }
    out.push_str(",cache_key\n");
    for r in records {
        out.push_str(&format!("{},{},{}", r.path.display(), r.speaker, r.emotion));
        for v in r.vector.fd.iter().chain(r.vector.screen.iter()) {
            out.push_str(&format!(",{v}"));
        }
        out.push_str(&format!(
            ",{},{:016x}\n",
            if r.vector.pitch_voiced { 1 } else { 0 },
            r.cache_key
        ));
    }
    out
}

pub fn features_from_csv(text: &str, source: &std::path::Path) -> Result<Vec<FeatureRecord>> {
    let bad = |line: usize, reason: String| Error::Parse {
        path: source.to_path_buf(),
        reason: format!("line {line}: {reason}"),
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| bad(1, "empty feature file".into()))?;
    let columns: Vec<&str> = header.split(',').collect();
    if columns.len() < 3 + SCREEN_LEN + 2 || columns[..3] != ["path", "speaker", "emotion"] {
        return Err(bad(1, "unrecognized feature header".into()));
    }
    // fd block spans everything between the fixed prefix and the 8 fixed tail columns
    let fd_len = columns.len() - 3 - SCREEN_LEN - 2;
    if fd_len % 2 != 1 {
        return Err(bad(1, format!("implausible fd column count {fd_len}")));
    }
    let levels = (fd_len - 1) / 2;
    let mut records = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(bad(i + 1, format!("expected {} fields", columns.len())));
        }
        let parse_f64 = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| bad(i + 1, format!("bad numeric value `{s}`")))
        };
        let fd: Vec<f64> = fields[3..3 + fd_len]
            .iter()
            .map(|s| parse_f64(s))
            .collect::<Result<_>>()?;
        let screen: Vec<f64> = fields[3 + fd_len..3 + fd_len + SCREEN_LEN]
            .iter()
            .map(|s| parse_f64(s))
            .collect::<Result<_>>()?;
        let voiced = fields[columns.len() - 2] == "1";
        let key = u64::from_str_radix(fields[columns.len() - 1], 16)
            .map_err(|_| bad(i + 1, "bad cache key".into()))?;
        records.push(FeatureRecord {
            path: PathBuf::from(fields[0]),
            speaker: fields[1].to_string(),
            emotion: fields[2].parse()?,
            vector: FeatureVector {
                fd,
                screen,
                pitch_voiced: voiced,
                levels,
                layout_version: LAYOUT_VERSION,
            },
            cache_key: key,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise_clip(seed: u64, n: usize) -> AudioClip {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<f64> = (0..n)
            .map(|_| {
                let v: f64 = StandardNormal.sample(&mut rng);
                (v * 0.2).clamp(-1.0, 1.0)
            })
            .collect();
        AudioClip::new(samples, 16000, format!("noise-{seed}.wav")).unwrap()
    }

    fn screen_only(screen: [f64; SCREEN_LEN]) -> FeatureVector {
        FeatureVector {
            fd: vec![1.5; 11],
            screen: screen.to_vec(),
            pitch_voiced: true,
            levels: 5,
            layout_version: LAYOUT_VERSION,
        }
    }

    #[test]
    fn layout_has_documented_length() {
        let clip = noise_clip(1, 8192);
        let config = ExtractionConfig::default();
        let out = extract_features(&clip, &config).unwrap();
        assert_eq!(out.vector.fd.len(), 11); // 2 * 5 + 1
        assert_eq!(out.vector.screen.len(), 6);
        assert_eq!(out.vector.len(), 17);
        assert_eq!(
            FeatureVector::column_names(5).len(),
            out.vector.len() + 1 // + pitch_voiced flag column
        );
    }

    #[test]
    fn white_noise_fd_features_are_broadband() {
        let clip = noise_clip(2, 8192);
        let out = extract_features(&clip, &ExtractionConfig::default()).unwrap();
        for (i, v) in out.vector.fd.iter().enumerate() {
            assert!((1.5..=2.1).contains(v), "fd[{i}] = {v}");
        }
    }

    #[test]
    fn constant_clip_hits_sentinel_path_without_crashing() {
        let clip = AudioClip::new(vec![0.25; 4096], 16000, "dc.wav").unwrap();
        let out = extract_features(&clip, &ExtractionConfig::default()).unwrap();
        for v in &out.vector.fd {
            assert_eq!(*v, DEGENERATE_FD_SENTINEL);
        }
        assert!(!out.warnings.is_empty());
        assert!(out.vector.screen.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn extraction_is_bitwise_deterministic() {
        let clip = noise_clip(3, 8192);
        let config = ExtractionConfig::default();
        let a = extract_features(&clip, &config).unwrap();
        let b = extract_features(&clip, &config).unwrap();
        assert_eq!(a.vector, b.vector);
        let batch = extract_features_batch(&[clip.clone(), clip], &config);
        for out in batch {
            assert_eq!(out.unwrap().vector, a.vector);
        }
    }

    #[test]
    fn short_clip_clamps_levels_and_keeps_layout() {
        // periodic db4 on 64 samples: 64 -> 32 -> 16 -> 8 -> 4 stops at
        // four levels, one short of the requested five
        let clip = noise_clip(4, 64);
        let config = ExtractionConfig {
            mode: BoundaryMode::Periodic,
            frame_len: 32,
            hop: 16,
            ..ExtractionConfig::default()
        };
        let out = extract_features(&clip, &config).unwrap();
        assert_eq!(out.vector.fd.len(), 11);
        assert!(out
            .warnings
            .iter()
            .any(|w| w.contains("clamped")), "warnings: {:?}", out.warnings);
    }

    #[test]
    fn katz_method_is_selectable() {
        let clip = noise_clip(5, 4096);
        let config = ExtractionConfig {
            fd_method: FdMethod::Katz,
            ..ExtractionConfig::default()
        };
        let out = extract_features(&clip, &config).unwrap();
        assert!(out.vector.fd.iter().all(|v| v.is_finite() && *v >= 1.0));
    }

    #[test]
    fn cascade_midpoint_rule() {
        let mut features = Vec::new();
        for _ in 0..4 {
            features.push((
                screen_only([2.0, 0.0, 10.0, 0.0, 0.0, 0.0]),
                Emotion::Angry,
            ));
            features.push((screen_only([2.0, 0.0, 2.0, 0.0, 0.0, 0.0]), Emotion::Fear));
        }
        let order = vec![(Emotion::Angry, SCREEN_TEO_MEAN, Direction::Greater)];
        let cascade = fit_cascade(&features, &order).unwrap();
        let stage = &cascade.stages[0];
        assert_eq!(stage.threshold, 6.0);
        assert_eq!(stage.margin, 4.0);
        assert_eq!(stage.direction, Direction::Greater);
    }

    #[test]
    fn cascade_with_identical_means_never_fires() {
        let features = vec![
            (screen_only([1.0, 0.0, 5.0, 0.0, 0.0, 0.0]), Emotion::Angry),
            (screen_only([1.0, 0.0, 5.0, 0.0, 0.0, 0.0]), Emotion::Fear),
        ];
        let order = vec![(Emotion::Angry, SCREEN_TEO_MEAN, Direction::Greater)];
        let cascade = fit_cascade(&features, &order).unwrap();
        assert_eq!(cascade.stages[0].margin, 0.0);
        let hot = screen_only([1.0, 0.0, 9.0, 0.0, 0.0, 0.0]);
        assert_eq!(apply_cascade(&cascade, &hot).unwrap(), None);
    }

    #[test]
    fn cascade_fires_in_order_and_respects_strict_threshold() {
        let cascade = ScreeningCascade {
            stages: vec![
                ScreeningStage {
                    target: Emotion::Angry,
                    feature_index: SCREEN_TEO_MEAN,
                    direction: Direction::Greater,
                    threshold: 6.0,
                    margin: 4.0,
                },
                ScreeningStage {
                    target: Emotion::Sad,
                    feature_index: SCREEN_LE_MEAN,
                    direction: Direction::Less,
                    threshold: -2.0,
                    margin: 1.0,
                },
            ],
        };
        // fires the first stage; the sad stage would also match but is not consulted
        let angry = screen_only([-5.0, 0.0, 7.0, 0.0, 0.0, 0.0]);
        assert_eq!(apply_cascade(&cascade, &angry).unwrap(), Some(Emotion::Angry));
        // exactly at the threshold: does not fire
        let boundary = screen_only([0.0, 0.0, 6.0, 0.0, 0.0, 0.0]);
        assert_eq!(apply_cascade(&cascade, &boundary).unwrap(), None);
        // passes every stage
        let calm = screen_only([0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(apply_cascade(&cascade, &calm).unwrap(), None);
    }

    #[test]
    fn cascade_fit_needs_both_classes() {
        let features = vec![(screen_only([0.0; 6]), Emotion::Angry)];
        let order = vec![(Emotion::Angry, SCREEN_TEO_MEAN, Direction::Greater)];
        assert!(matches!(
            fit_cascade(&features, &order),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn simulated_angry_screening_captures_most_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let mut features = Vec::new();
        for i in 0..200 {
            let jitter: f64 = StandardNormal.sample(&mut rng);
            let teo = if i % 2 == 0 { 8.0 + jitter } else { 2.0 + jitter };
            let emotion = if i % 2 == 0 { Emotion::Angry } else { Emotion::Happy };
            features.push((screen_only([0.0, 0.0, teo, 0.0, 0.0, 0.0]), emotion));
        }
        let order = vec![(Emotion::Angry, SCREEN_TEO_MEAN, Direction::Greater)];
        let cascade = fit_cascade(&features, &order).unwrap();
        let captured = features
            .iter()
            .filter(|(v, e)| {
                *e == Emotion::Angry
                    && apply_cascade(&cascade, v).unwrap() == Some(Emotion::Angry)
            })
            .count();
        assert!(captured as f64 >= 0.95 * 100.0, "captured {captured}/100");
    }

    #[test]
    fn feature_csv_round_trips() {
        let clip = noise_clip(6, 4096);
        let config = ExtractionConfig::default();
        let out = extract_features(&clip, &config).unwrap();
        let record = FeatureRecord {
            path: clip.source_path.clone(),
            speaker: "spk0".into(),
            emotion: Emotion::Happy,
            vector: out.vector,
            cache_key: cache_key(b"bytes", &config),
        };
        let csv = features_to_csv(std::slice::from_ref(&record), config.levels);
        let parsed = features_from_csv(&csv, std::path::Path::new("mem.csv")).unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0], record);
    }

    #[test]
    fn cache_key_tracks_config_and_bytes() {
        let config = ExtractionConfig::default();
        let other = ExtractionConfig {
            levels: 4,
            ..ExtractionConfig::default()
        };
        assert_ne!(cache_key(b"abc", &config), cache_key(b"abd", &config));
        assert_ne!(cache_key(b"abc", &config), cache_key(b"abc", &other));
        assert_eq!(cache_key(b"abc", &config), cache_key(b"abc", &config));
    }
}
