//! Frame-level acoustic descriptors: pitch, zero-crossing rate, log
//! energy, and Teager energy, plus per-utterance track statistics.
//!
//! These are the low-level screening features; the heavy lifting for
//! classification happens in the fractal/wavelet modules.

use std::cell::RefCell;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio_io::FrameSeries;
use crate::error::{Error, Result};

thread_local! {
    // rustfft caches plans per planner instance; keep one per thread so
    // per-frame pitch calls reuse plans
    static FFT_PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Floor inside every logarithm and log-magnitude guard.
pub const LOG_EPS: f64 = 1e-12;

/// Default cepstral peak-to-band-RMS ratio below which a frame is unvoiced.
///
/// Chosen empirically: white-noise frames land around 2.4-3.3 on this
/// statistic while harmonic frames (pulse trains, voiced speech) score far
/// above it; 4.0 flags well over 95% of noise frames as unvoiced.
pub const DEFAULT_VOICING_THRESHOLD: f64 = 4.0;

/// Track kinds produced by the builders below.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackKind {
    Pitch,
    Zcr,
    LogEnergy,
    TeoMean,
}

/// One value per frame; `None` marks an unvoiced frame in pitch tracks.
#[derive(Debug, Clone)]
pub struct FrameTrack {
    pub kind: TrackKind,
    pub values: Vec<Option<f64>>,
}

impl FrameTrack {
    /// CSV export (`frame_index,value`); unvoiced frames leave the value
    /// field empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame_index,value\n");
        for (i, v) in self.values.iter().enumerate() {
            match v {
                Some(x) => out.push_str(&format!("{i},{x}\n")),
                None => out.push_str(&format!("{i},\n")),
            }
        }
        out
    }
}

/// Summary statistics over the defined values of a track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackStats {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator; 0 for a single value).
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub median: f64,
}

/// Fraction of adjacent sample pairs whose sign differs, zero counted as
/// positive. Always in `[0, 1]`.
pub fn zero_crossing_rate(frame: &[f64]) -> Result<f64> {
    if frame.len() < 2 {
        return Err(Error::TooShort(format!(
            "zero-crossing rate needs at least 2 samples, got {}",
            frame.len()
        )));
    }
    let negative = |x: f64| x < 0.0;
    let crossings = frame
        .windows(2)
        .filter(|w| negative(w[0]) != negative(w[1]))
        .count();
    Ok(crossings as f64 / (frame.len() - 1) as f64)
}

/// `log(eps + sum x_i^2)`; monotone in frame energy.
pub fn log_energy(frame: &[f64], eps: f64) -> Result<f64> {
    if eps <= 0.0 {
        return Err(Error::Parameter("log-energy epsilon must be positive".into()));
    }
    if frame.is_empty() {
        return Err(Error::TooShort("log energy of an empty frame".into()));
    }
    let energy: f64 = frame.iter().map(|x| x * x).sum();
    Ok((eps + energy).ln())
}

/// Teager energy `psi[n] = x[n]^2 - x[n+1] * x[n-1]` for the interior
/// samples; output length is `frame_len - 2`.
pub fn teager_energy(frame: &[f64]) -> Result<Vec<f64>> {
    if frame.len() < 3 {
        return Err(Error::TooShort(format!(
            "teager energy needs at least 3 samples, got {}",
            frame.len()
        )));
    }
    Ok((1..frame.len() - 1)
        .map(|n| frame[n] * frame[n] - frame[n + 1] * frame[n - 1])
        .collect())
}

/// Pitch detector settings; the search band is in Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchConfig {
    pub f_min: f64,
    pub f_max: f64,
    pub voicing_threshold: f64,
}

impl Default for PitchConfig {
    fn default() -> Self {
        PitchConfig {
            f_min: 60.0,
            f_max: 400.0,
            voicing_threshold: DEFAULT_VOICING_THRESHOLD,
        }
    }
}

/// The cepstral peak only pins the period to a few quefrency bins for
/// sparse spectra; the final value is refined against the magnitude
/// spectrum inside this many bins around the candidate.
const REFINE_QUEFRENCY_BINS: usize = 8;

/// Cepstral pitch estimate for one frame, or `None` when unvoiced.
///
/// The frame is zero-padded to a power of two; the magnitude spectrum is
/// taken through `log(|X| + eps)` and inverse-transformed, and the highest
/// cepstral value inside the quefrency band `[rate / f_max, rate / f_min]`
/// is compared against the band RMS to decide voicing. The candidate
/// period is then refined by a parabolic fit around the nearest
/// magnitude-spectrum peak, which recovers the exact frequency even for
/// single sinusoids whose cepstral ridge is broad. Amplitude scaling of
/// the frame only shifts the zeroth cepstral bin, which is outside every
/// valid band, so the estimate and the voicing decision are both scale
/// invariant.
pub fn pitch_cepstral(
    frame: &[f64],
    sample_rate: u32,
    config: &PitchConfig,
) -> Result<Option<f64>> {
    if frame.is_empty() {
        return Err(Error::TooShort("pitch of an empty frame".into()));
    }
    if !(config.f_min > 0.0 && config.f_min < config.f_max)
        || config.f_max >= sample_rate as f64 / 2.0
    {
        return Err(Error::Parameter(format!(
            "invalid pitch band [{}, {}] for sample rate {sample_rate}",
            config.f_min, config.f_max
        )));
    }
    let n = frame.len().next_power_of_two();
    let mut buf: Vec<Complex<f64>> = frame
        .iter()
        .map(|&x| Complex::new(x, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(n)
        .collect();
    FFT_PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n).process(&mut buf));
    let mag: Vec<f64> = buf.iter().map(|c| c.norm()).collect();
    let mut logmag: Vec<Complex<f64>> = mag
        .iter()
        .map(|&m| Complex::new((m + LOG_EPS).ln(), 0.0))
        .collect();
    FFT_PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n).process(&mut logmag));
    // real cepstrum (input was even-symmetric); rustfft leaves the 1/n out
    let cepstrum: Vec<f64> = logmag.iter().map(|c| c.re / n as f64).collect();

    let q_lo = ((sample_rate as f64 / config.f_max).ceil() as usize).max(1);
    let q_hi = ((sample_rate as f64 / config.f_min).floor() as usize).min(n / 2);
    if q_lo > q_hi {
        return Err(Error::Parameter(format!(
            "pitch band maps to an empty quefrency range [{q_lo}, {q_hi}] for frame length {n}"
        )));
    }
    let band = &cepstrum[q_lo..=q_hi];
    let (peak_offset, peak) =
        band.iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
                if v > bv {
                    (i, v)
                } else {
                    (bi, bv)
                }
            });
    let rms = (band.iter().map(|v| v * v).sum::<f64>() / band.len() as f64).sqrt();
    if rms <= 0.0 || peak / rms < config.voicing_threshold {
        return Ok(None);
    }
    let q_star = q_lo + peak_offset;
    Ok(Some(refine_pitch(&mag, n, sample_rate, q_star)))
}

/// Parabolic interpolation of the strongest spectral peak within
/// [`REFINE_QUEFRENCY_BINS`] quefrency bins of the cepstral candidate.
fn refine_pitch(mag: &[f64], n: usize, sample_rate: u32, q_star: usize) -> f64 {
    let rate = sample_rate as f64;
    let coarse = rate / q_star as f64;
    let q_plus = q_star + REFINE_QUEFRENCY_BINS;
    let q_minus = q_star.saturating_sub(REFINE_QUEFRENCY_BINS).max(2);
    let f_lo = rate / q_plus as f64;
    let f_hi = rate / q_minus as f64;
    let b_lo = ((f_lo * n as f64 / rate).floor() as usize).max(1);
    let b_hi = ((f_hi * n as f64 / rate).ceil() as usize).min(n / 2 - 1);
    if b_lo >= b_hi {
        return coarse;
    }
    let mut b_star = b_lo;
    for b in b_lo..=b_hi {
        if mag[b] > mag[b_star] {
            b_star = b;
        }
    }
    let (alpha, beta, gamma) = (
        (mag[b_star - 1] + LOG_EPS).ln(),
        (mag[b_star] + LOG_EPS).ln(),
        (mag[b_star + 1] + LOG_EPS).ln(),
    );
    let denom = alpha - 2.0 * beta + gamma;
    let offset = if denom.abs() < 1e-30 {
        0.0
    } else {
        (0.5 * (alpha - gamma) / denom).clamp(-0.5, 0.5)
    };
    (b_star as f64 + offset) * rate / n as f64
}

/// Standard sample statistics over the defined values; `Ok(None)` when the
/// track has no defined value (e.g. an all-unvoiced pitch track).
pub fn track_stats(track: &FrameTrack) -> Result<Option<TrackStats>> {
    if track.values.is_empty() {
        return Err(Error::TooShort("statistics of an empty track".into()));
    }
    let mut defined: Vec<f64> = track.values.iter().filter_map(|v| *v).collect();
    if defined.is_empty() {
        return Ok(None);
    }
    let n = defined.len() as f64;
    let mean = defined.iter().sum::<f64>() / n;
    let std = if defined.len() < 2 {
        0.0
    } else {
        (defined.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    defined.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if defined.len() % 2 == 1 {
        defined[defined.len() / 2]
    } else {
        (defined[defined.len() / 2 - 1] + defined[defined.len() / 2]) / 2.0
    };
    Ok(Some(TrackStats {
        mean,
        std,
        min: defined[0],
        max: defined[defined.len() - 1],
        median,
    }))
}

// ---------------------------------------------------------------------------
// Track builders over framed signals
// ---------------------------------------------------------------------------

pub fn zcr_track(frames: &FrameSeries) -> Result<FrameTrack> {
    let values = frames
        .frames
        .iter()
        .map(|f| zero_crossing_rate(f).map(Some))
        .collect::<Result<_>>()?;
    Ok(FrameTrack {
        kind: TrackKind::Zcr,
        values,
    })
}

pub fn log_energy_track(frames: &FrameSeries, eps: f64) -> Result<FrameTrack> {
    let values = frames
        .frames
        .iter()
        .map(|f| log_energy(f, eps).map(Some))
        .collect::<Result<_>>()?;
    Ok(FrameTrack {
        kind: TrackKind::LogEnergy,
        values,
    })
}

/// Per-frame mean of the Teager energy sequence.
pub fn teo_mean_track(frames: &FrameSeries) -> Result<FrameTrack> {
    let values = frames
        .frames
        .iter()
        .map(|f| {
            let teo = teager_energy(f)?;
            Ok(Some(teo.iter().sum::<f64>() / teo.len() as f64))
        })
        .collect::<Result<_>>()?;
    Ok(FrameTrack {
        kind: TrackKind::TeoMean,
        values,
    })
}

pub fn pitch_track(
    frames: &FrameSeries,
    sample_rate: u32,
    config: &PitchConfig,
) -> Result<FrameTrack> {
    let values = frames
        .frames
        .iter()
        .map(|f| pitch_cepstral(f, sample_rate, config))
        .collect::<Result<_>>()?;
    Ok(FrameTrack {
        kind: TrackKind::Pitch,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn plain_track(kind: TrackKind, values: &[f64]) -> FrameTrack {
        FrameTrack {
            kind,
            values: values.iter().map(|v| Some(*v)).collect(),
        }
    }

    /// Autocorrelation pitch oracle: argmax of the raw autocorrelation over
    /// the lag band, independent of the cepstral path.
    fn autocorr_pitch(frame: &[f64], rate: u32, f_min: f64, f_max: f64) -> f64 {
        let lag_lo = (rate as f64 / f_max).ceil() as usize;
        let lag_hi = (rate as f64 / f_min).floor() as usize;
        let mut best = (lag_lo, f64::NEG_INFINITY);
        for lag in lag_lo..=lag_hi.min(frame.len() - 1) {
            let r: f64 = (0..frame.len() - lag).map(|i| frame[i] * frame[i + lag]).sum();
            if r > best.1 {
                best = (lag, r);
            }
        }
        rate as f64 / best.0 as f64
    }

    #[test]
    fn zcr_alternating_is_one() {
        assert_eq!(zero_crossing_rate(&[1.0, -1.0, 1.0, -1.0]).unwrap(), 1.0);
    }

    #[test]
    fn zcr_positive_frame_is_zero() {
        assert_eq!(zero_crossing_rate(&[2.0, 3.0, 5.0]).unwrap(), 0.0);
    }

    #[test]
    fn zcr_counts_direct() {
        assert_eq!(
            zero_crossing_rate(&[1.0, 1.0, -1.0, -1.0, 1.0]).unwrap(),
            0.5
        );
    }

    #[test]
    fn zcr_is_sign_symmetric_for_nonzero_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..200)
            .map(|_| {
                let v: f64 = StandardNormal.sample(&mut rng);
                if v == 0.0 {
                    1e-9
                } else {
                    v
                }
            })
            .collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(
            zero_crossing_rate(&x).unwrap(),
            zero_crossing_rate(&neg).unwrap()
        );
    }

    #[test]
    fn log_energy_floor_and_unit_cases() {
        let le = log_energy(&[0.0, 0.0, 0.0], 1e-12).unwrap();
        assert!((le - (1e-12f64).ln()).abs() < 1e-9);
        let unit = log_energy(&[1.0, 0.0, 0.0], 1e-12).unwrap();
        assert!(unit.abs() < 1e-9);
    }

    #[test]
    fn log_energy_scaling_adds_log4() {
        let frame = [0.5, -0.25, 0.75, 0.1];
        let doubled: Vec<f64> = frame.iter().map(|v| 2.0 * v).collect();
        let delta = log_energy(&doubled, 1e-12).unwrap() - log_energy(&frame, 1e-12).unwrap();
        assert!((delta - 4.0f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn log_energy_is_permutation_invariant() {
        let frame = [0.4, -0.9, 0.2, 0.7, -0.3];
        let mut shuffled = frame;
        shuffled.reverse();
        shuffled.swap(1, 3);
        let diff = log_energy(&frame, 1e-12).unwrap() - log_energy(&shuffled, 1e-12).unwrap();
        assert!(diff.abs() < 1e-12); // summation order may differ in the last ulp
    }

    #[test]
    fn teo_constant_frame_is_zero() {
        assert_eq!(teager_energy(&[3.0, 3.0, 3.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn teo_ramp_is_slope_squared() {
        assert_eq!(teager_energy(&[0.0, 1.0, 2.0, 3.0]).unwrap(), vec![1.0, 1.0]);
        let steep: Vec<f64> = (0..6).map(|i| 2.5 * i as f64).collect();
        for v in teager_energy(&steep).unwrap() {
            assert!((v - 2.5 * 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn teo_of_sine_is_constant_amplitude_term() {
        // psi[A sin(omega n)] = A^2 sin^2(omega), exactly, for every n
        let (amplitude, omega) = (0.7, 0.3);
        let frame: Vec<f64> = (0..256).map(|n| amplitude * (omega * n as f64).sin()).collect();
        let expect = amplitude * amplitude * omega.sin() * omega.sin();
        for v in teager_energy(&frame).unwrap() {
            assert!((v - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn teo_rejects_short_frames() {
        assert!(matches!(
            teager_energy(&[1.0, 2.0]),
            Err(Error::TooShort(_))
        ));
    }

    #[test]
    fn pitch_of_pulse_train_matches_autocorrelation_oracle() {
        let rate = 16000;
        let period = 80; // 200 Hz
        let frame: Vec<f64> = (0..1024)
            .map(|i| if i % period == 0 { 1.0 } else { 0.0 })
            .collect();
        let cfg = PitchConfig::default();
        let pitch = pitch_cepstral(&frame, rate, &cfg).unwrap().unwrap();
        assert!((196.0..=204.0).contains(&pitch), "pitch={pitch}");
        let oracle = autocorr_pitch(&frame, rate, cfg.f_min, cfg.f_max);
        assert!((pitch - oracle).abs() <= rate as f64 / 79.0 - rate as f64 / 80.0 + 1e-9);
    }

    #[test]
    fn pitch_of_pure_sine_matches_oracle_within_one_bin() {
        let rate = 16000;
        let f0 = 100.0;
        let window = crate::audio_io::WindowKind::Hamming.coefficients(1024);
        let frame: Vec<f64> = (0..1024)
            .map(|i| {
                window[i] * (2.0 * std::f64::consts::PI * f0 * i as f64 / rate as f64).sin()
            })
            .collect();
        // permissive threshold: this exercises the estimate, not the gate
        let cfg = PitchConfig {
            voicing_threshold: 0.0,
            ..PitchConfig::default()
        };
        let pitch = pitch_cepstral(&frame, rate, &cfg).unwrap().unwrap();
        let q = (rate as f64 / f0).round();
        let lo = rate as f64 / (q + 1.0);
        let hi = rate as f64 / (q - 1.0);
        assert!((lo..=hi).contains(&pitch), "pitch={pitch}");
        let oracle = autocorr_pitch(&frame, rate, cfg.f_min, cfg.f_max);
        assert!((pitch - oracle).abs() < hi - lo + 1e-9);
    }

    #[test]
    fn white_noise_frames_are_mostly_unvoiced_at_default_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let cfg = PitchConfig::default();
        let mut unvoiced = 0;
        for _ in 0..100 {
            let frame: Vec<f64> = (0..1024)
                .map(|_| {
                    let v: f64 = StandardNormal.sample(&mut rng);
                    v * 0.3
                })
                .collect();
            if pitch_cepstral(&frame, 16000, &cfg).unwrap().is_none() {
                unvoiced += 1;
            }
        }
        assert!(unvoiced >= 95, "only {unvoiced}/100 unvoiced");
    }

    #[test]
    fn pitch_is_amplitude_scale_invariant() {
        let rate = 16000;
        let frame: Vec<f64> = (0..1024)
            .map(|i| if i % 80 == 0 { 0.9 } else { 0.0 })
            .collect();
        let scaled: Vec<f64> = frame.iter().map(|v| v * 1e-3).collect();
        let cfg = PitchConfig::default();
        let a = pitch_cepstral(&frame, rate, &cfg).unwrap().unwrap();
        let b = pitch_cepstral(&scaled, rate, &cfg).unwrap().unwrap();
        // the log-magnitude epsilon guard leaves last-ulp noise in the
        // parabolic refinement; anything tighter than this is luck
        assert!((a - b).abs() / a < 1e-9, "a={a} b={b}");
    }

    #[test]
    fn pitch_rejects_invalid_band() {
        let frame = vec![0.0; 256];
        let cfg = PitchConfig {
            f_min: 500.0,
            f_max: 400.0,
            voicing_threshold: 2.5,
        };
        assert!(matches!(
            pitch_cepstral(&frame, 16000, &cfg),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn track_stats_basics() {
        let stats = track_stats(&plain_track(TrackKind::Zcr, &[1.0, 2.0, 3.0]))
            .unwrap()
            .unwrap();
        assert_eq!(stats.mean, 2.0);
        assert_eq!(stats.std, 1.0);
        assert_eq!(stats.min, 1.0);
        assert_eq!(stats.max, 3.0);
        assert_eq!(stats.median, 2.0);
    }

    #[test]
    fn track_stats_constant_has_zero_std() {
        let stats = track_stats(&plain_track(TrackKind::LogEnergy, &[4.2; 9]))
            .unwrap()
            .unwrap();
        assert_eq!(stats.std, 0.0);
        assert_eq!(stats.median, 4.2);
    }

    #[test]
    fn all_unvoiced_pitch_track_has_absent_stats() {
        let track = FrameTrack {
            kind: TrackKind::Pitch,
            values: vec![None; 8],
        };
        assert!(track_stats(&track).unwrap().is_none());
    }

    #[test]
    fn empty_track_is_an_error() {
        let track = FrameTrack {
            kind: TrackKind::Pitch,
            values: vec![],
        };
        assert!(matches!(track_stats(&track), Err(Error::TooShort(_))));
    }

    #[test]
    fn track_csv_marks_unvoiced_frames() {
        let track = FrameTrack {
            kind: TrackKind::Pitch,
            values: vec![Some(120.0), None],
        };
        assert_eq!(track.to_csv(), "frame_index,value\n0,120\n1,\n");
    }
}
