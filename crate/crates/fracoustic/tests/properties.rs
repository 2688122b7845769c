//! Property tests for the library's structural invariants.

use proptest::prelude::*;

use fracoustic::audio_io::Emotion;
use fracoustic::fractal::{higuchi_fd, katz_fd, HiguchiConfig};
use fracoustic::pipeline::{
    apply_cascade, Direction, FeatureVector, ScreeningCascade, ScreeningStage, SCREEN_LEN,
};
use fracoustic::time_features::{log_energy, teager_energy, zero_crossing_rate};
use fracoustic::wavelet::{filter_coeffs, wavedec, BoundaryMode, WaveletFamily};

fn signal(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len)
}

/// Samples bounded away from zero so the sign convention cannot flip.
fn nonzero_signal(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(
        prop_oneof![-1.0f64..-1e-3, 1e-3..1.0f64],
        len,
    )
}

proptest! {
    #[test]
    fn zcr_is_bounded_and_sign_symmetric(frame in nonzero_signal(2..128)) {
        let rate = zero_crossing_rate(&frame).unwrap();
        prop_assert!((0.0..=1.0).contains(&rate));
        let negated: Vec<f64> = frame.iter().map(|v| -v).collect();
        prop_assert_eq!(rate, zero_crossing_rate(&negated).unwrap());
    }

    #[test]
    fn log_energy_ignores_sample_order(frame in signal(1..64), rotation in 0usize..64) {
        let mut rotated = frame.clone();
        rotated.rotate_left(rotation % frame.len());
        let a = log_energy(&frame, 1e-12).unwrap();
        let b = log_energy(&rotated, 1e-12).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn teo_of_affine_frames_is_constant(
        slope in -3.0f64..3.0,
        intercept in -5.0f64..5.0,
        len in 3usize..64,
    ) {
        let frame: Vec<f64> = (0..len).map(|i| slope * i as f64 + intercept).collect();
        for v in teager_energy(&frame).unwrap() {
            prop_assert!((v - slope * slope).abs() < 1e-9);
        }
    }

    #[test]
    fn katz_of_affine_series_is_always_one(
        slope in -100.0f64..100.0,
        intercept in -10.0f64..10.0,
        len in 3usize..500,
    ) {
        let series: Vec<f64> = (0..len).map(|i| slope * i as f64 + intercept).collect();
        prop_assert!((katz_fd(&series).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn higuchi_is_affine_invariant(
        series in signal(64..256),
        scale in prop_oneof![1e-3f64..1e-1, 1.0f64..1e3],
        offset in -100.0f64..100.0,
    ) {
        let config = HiguchiConfig::new(8);
        // skip the (measure-zero) degenerate case of a constant draw
        if let Ok(base) = higuchi_fd(&series, &config) {
            let mapped: Vec<f64> = series.iter().map(|v| scale * v + offset).collect();
            let got = higuchi_fd(&mapped, &config).unwrap();
            prop_assert!((got.dimension - base.dimension).abs() < 1e-9);
        }
    }

    #[test]
    fn multilevel_round_trip_reconstructs(
        series in signal(64..512),
        family_idx in 0usize..4,
        mode_idx in 0usize..3,
        levels in 1usize..5,
    ) {
        let family = WaveletFamily::ALL[family_idx];
        let mode = BoundaryMode::ALL[mode_idx];
        let filter = filter_coeffs(family);
        let dec = wavedec(&series, &filter, mode, levels).unwrap();
        let rec = dec.reconstruct().unwrap();
        let err = series
            .iter()
            .zip(&rec)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        prop_assert!(err < 1e-8, "{} {} J={}: {}", family, mode, levels, err);
    }

    #[test]
    fn stages_after_the_first_firing_one_are_irrelevant(
        teo in -10.0f64..10.0,
        le in -10.0f64..10.0,
        swap in any::<bool>(),
    ) {
        let angry = ScreeningStage {
            target: Emotion::Angry,
            feature_index: 2,
            direction: Direction::Greater,
            threshold: 3.0,
            margin: 1.0,
        };
        let sad = ScreeningStage {
            target: Emotion::Sad,
            feature_index: 0,
            direction: Direction::Less,
            threshold: -3.0,
            margin: 1.0,
        };
        let vector = FeatureVector {
            fd: vec![1.5; 11],
            screen: {
                let mut s = vec![0.0; SCREEN_LEN];
                s[0] = le;
                s[2] = teo;
                s
            },
            pitch_voiced: false,
            levels: 5,
            layout_version: 1,
        };
        let full = ScreeningCascade { stages: vec![angry.clone(), sad.clone()] };
        let first = apply_cascade(&full, &vector).unwrap();
        if first == Some(Emotion::Angry) {
            // replacing everything after the firing stage changes nothing
            let mutated = ScreeningCascade {
                stages: if swap {
                    vec![angry.clone()]
                } else {
                    vec![angry.clone(), angry.clone()]
                },
            };
            prop_assert_eq!(apply_cascade(&mutated, &vector).unwrap(), first);
        }
    }
}
