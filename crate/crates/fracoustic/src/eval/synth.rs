//! Seeded synthetic corpus with analytically known fractal structure.
//!
//! Each class is fractional Brownian motion with a target Hurst exponent
//! (theoretical fractal dimension `2 - H`), scaled to a class energy, with
//! optional additive high-frequency bursts that drive the Teager-energy
//! screening feature. Generation is exact-covariance circulant embedding
//! (Davies-Harte); short lengths or a failed embedding fall back to a
//! Cholesky factorization of the dense covariance.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio_io::{write_wav_16bit, AudioClip, DatasetManifest, Emotion, ManifestEntry};
use crate::error::{Error, Result};

/// Below this length the dense Cholesky construction is used outright; the
/// O(n^3) cost is negligible and it avoids embedding corner cases.
const CHOLESKY_CUTOFF: usize = 64;

/// One synthetic emotion class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthClass {
    pub emotion: Emotion,
    /// Hurst exponent in (0, 1); fractal dimension of the path is `2 - H`.
    pub hurst: f64,
    /// Peak amplitude of the fBm path after normalization.
    pub energy_scale: f64,
    /// Amplitude of additive high-frequency bursts (0 disables them).
    pub burst_amplitude: f64,
}

/// Full corpus description; identical specs generate identical bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub classes: Vec<SynthClass>,
    pub per_class: usize,
    pub length: usize,
    pub sample_rate: u32,
    pub seed: u64,
}

impl Default for SynthSpec {
    /// Six classes separated on the three axes the pipeline uses: Hurst
    /// exponent (fractal dimension), energy scale (log-energy screening),
    /// and burst amplitude (Teager-energy screening).
    fn default() -> Self {
        SynthSpec {
            classes: vec![
                SynthClass {
                    emotion: Emotion::Angry,
                    hurst: 0.30,
                    energy_scale: 0.35,
                    burst_amplitude: 0.45,
                },
                SynthClass {
                    emotion: Emotion::Disgust,
                    hurst: 0.75,
                    energy_scale: 0.20,
                    burst_amplitude: 0.0,
                },
                SynthClass {
                    emotion: Emotion::Fear,
                    hurst: 0.20,
                    energy_scale: 0.70,
                    burst_amplitude: 0.0,
                },
                SynthClass {
                    emotion: Emotion::Happy,
                    hurst: 0.60,
                    energy_scale: 0.70,
                    burst_amplitude: 0.0,
                },
                SynthClass {
                    emotion: Emotion::Sad,
                    hurst: 0.45,
                    energy_scale: 0.02,
                    burst_amplitude: 0.0,
                },
                SynthClass {
                    emotion: Emotion::Surprise,
                    hurst: 0.90,
                    energy_scale: 0.70,
                    burst_amplitude: 0.0,
                },
            ],
            per_class: 60,
            length: 8192,
            sample_rate: 16000,
            seed: 42,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::Parameter("synthetic spec needs classes".into()));
        }
        if self.per_class < 2 {
            return Err(Error::Parameter("per-class count must be >= 2".into()));
        }
        if self.length < 16 {
            return Err(Error::Parameter("clip length must be >= 16".into()));
        }
        for class in &self.classes {
            if !(0.0 < class.hurst && class.hurst < 1.0) {
                return Err(Error::Parameter(format!(
                    "hurst exponent {} for {} must be in (0, 1)",
                    class.hurst, class.emotion
                )));
            }
            if class.energy_scale <= 0.0 || class.energy_scale + class.burst_amplitude > 1.0 {
                return Err(Error::Parameter(format!(
                    "energy {} + burst {} for {} must stay within (0, 1]",
                    class.energy_scale, class.burst_amplitude, class.emotion
                )));
            }
        }
        Ok(())
    }
}

/// Fractional Gaussian noise autocovariance at lag `k` for unit-variance
/// increments.
fn fgn_autocov(k: usize, hurst: f64) -> f64 {
    let k = k as f64;
    let h2 = 2.0 * hurst;
    0.5 * ((k - 1.0).abs().powf(h2) - 2.0 * k.powf(h2) + (k + 1.0).powf(h2))
}

/// Exact fGn sample via Davies-Harte circulant embedding. Returns `None`
/// when the embedding is not positive semidefinite for this (n, H).
fn fgn_circulant(n: usize, hurst: f64, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    let m = 2 * n;
    let mut row: Vec<Complex<f64>> = Vec::with_capacity(m);
    for k in 0..=n {
        row.push(Complex::new(fgn_autocov(k, hurst), 0.0));
    }
    for k in (1..n).rev() {
        row.push(Complex::new(fgn_autocov(k, hurst), 0.0));
    }
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(m);
    fft.process(&mut row);
    let mut eig = Vec::with_capacity(m);
    for c in &row {
        let lambda = c.re;
        if lambda < -1e-9 {
            return None;
        }
        eig.push(lambda.max(0.0));
    }
    // weights: w_0, w_n real; w_j complex with conjugate mirror
    let mut w = vec![Complex::new(0.0, 0.0); m];
    let z0: f64 = StandardNormal.sample(rng);
    let zn: f64 = StandardNormal.sample(rng);
    w[0] = Complex::new((eig[0] / m as f64).sqrt() * z0, 0.0);
    w[n] = Complex::new((eig[n] / m as f64).sqrt() * zn, 0.0);
    for j in 1..n {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        let amp = (eig[j] / (2.0 * m as f64)).sqrt();
        w[j] = Complex::new(amp * re, amp * im);
        w[m - j] = w[j].conj();
    }
    let fft2 = planner.plan_fft_forward(m);
    fft2.process(&mut w);
    Some(w.iter().take(n).map(|c| c.re).collect())
}

/// Dense-covariance fallback: Cholesky of the n-by-n fGn covariance.
#[allow(clippy::needless_range_loop)] // triangular index ranges
fn fgn_cholesky(n: usize, hurst: f64, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let mut cov = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            cov[i][j] = fgn_autocov(i - j, hurst);
        }
    }
    let mut chol = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = cov[i][j];
            for k in 0..j {
                sum -= chol[i][k] * chol[j][k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::Internal(format!(
                        "fGn covariance lost positive definiteness at {i} (H={hurst})"
                    )));
                }
                chol[i][j] = sum.sqrt();
            } else {
                chol[i][j] = sum / chol[j][j];
            }
        }
    }
    let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    Ok((0..n)
        .map(|i| (0..=i).map(|k| chol[i][k] * z[k]).sum())
        .collect())
}

/// Sample one fractional Brownian motion path of `n` points (cumulative sum
/// of exact fGn increments).
pub fn fbm_path(n: usize, hurst: f64, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::Parameter("fBm path needs at least 2 points".into()));
    }
    if !(0.0 < hurst && hurst < 1.0) {
        return Err(Error::Parameter(format!(
            "hurst exponent {hurst} must be in (0, 1)"
        )));
    }
    let fgn = if n < CHOLESKY_CUTOFF {
        fgn_cholesky(n, hurst, rng)?
    } else {
        match fgn_circulant(n, hurst, rng) {
            Some(fgn) => fgn,
            None => fgn_cholesky(n, hurst, rng)?,
        }
    };
    let mut path = Vec::with_capacity(n);
    let mut acc = 0.0;
    for inc in fgn {
        acc += inc;
        path.push(acc);
    }
    Ok(path)
}

/// Stable per-clip seed derivation (splitmix-style) so corpus generation
/// can run in any order, including in parallel.
fn derive_seed(base: u64, class_idx: u64, clip_idx: u64) -> u64 {
    let mut x = base
        .wrapping_add(class_idx.wrapping_mul(0x9E3779B97F4A7C15))
        .wrapping_add(clip_idx.wrapping_mul(0xBF58476D1CE4E5B9));
    x ^= x >> 30;
    x = x.wrapping_mul(0xBF58476D1CE4E5B9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}

const BURST_COUNT: usize = 8;
const BURST_LEN: usize = 128;
/// Burst carrier frequency in radians per sample; high enough that the
/// Teager operator sees it clearly.
const BURST_OMEGA: f64 = 2.0;

fn synth_clip(spec: &SynthSpec, class_idx: usize, clip_idx: usize) -> Result<AudioClip> {
    let class = &spec.classes[class_idx];
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
        spec.seed,
        class_idx as u64,
        clip_idx as u64,
    ));
    let mut samples = fbm_path(spec.length, class.hurst, &mut rng)?;
    let peak = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        let gain = class.energy_scale / peak;
        for v in &mut samples {
            *v *= gain;
        }
    }
    if class.burst_amplitude > 0.0 && spec.length > BURST_LEN {
        for _ in 0..BURST_COUNT {
            let start = rng.random_range(0..spec.length - BURST_LEN);
            let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            for t in 0..BURST_LEN {
                samples[start + t] +=
                    class.burst_amplitude * (BURST_OMEGA * t as f64 + phase).sin();
            }
        }
    }
    for v in &mut samples {
        *v = v.clamp(-1.0, 1.0);
    }
    let speaker = format!("spk{}", clip_idx % 4);
    let name = format!("{}_{:03}.wav", class.emotion, clip_idx);
    Ok(AudioClip::new(samples, spec.sample_rate, name)?.with_labels(speaker, class.emotion))
}

/// Generate the whole corpus in memory, labels attached, speakers assigned
/// round-robin over four pseudo-speaker IDs.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<Vec<AudioClip>> {
    spec.validate()?;
    let total = spec.classes.len() * spec.per_class;
    let clips = crate::map_indices(total, |i| {
        synth_clip(spec, i / spec.per_class, i % spec.per_class)
    });
    clips.into_iter().collect()
}

/// Generate and persist the corpus: one 16-bit WAV per clip plus a
/// `manifest.csv` in the target directory. Returns the manifest.
pub fn write_synthetic(spec: &SynthSpec, dir: &Path) -> Result<DatasetManifest> {
    let clips = generate_synthetic(spec)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = DatasetManifest::default();
    for clip in &clips {
        let path = dir.join(clip.source_path.file_name().expect("synth clips are named"));
        write_wav_16bit(&path, &clip.samples, clip.sample_rate)?;
        manifest.entries.push(ManifestEntry {
            path,
            speaker: clip.speaker.clone(),
            emotion: clip.emotion.expect("synth clips are labeled"),
        });
    }
    let manifest_path = dir.join("manifest.csv");
    crate::write_atomic(&manifest_path, manifest.to_csv_relative(dir).as_bytes())?;
    Ok(manifest)
}
