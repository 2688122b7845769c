//! Batch throughput: the feature-gated data-parallel path against a plain
//! sequential loop over the same single-item functions.
//!
//! With the default `parallel` feature the batch entry points fan out over
//! rayon; compiled with `--no-default-features` they degrade to the same
//! sequential iteration, so the two sides of each group converge. Expect
//! parity on a single-core host.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fracoustic::audio_io::AudioClip;
use fracoustic::eval::synth::{generate_synthetic, SynthSpec};
use fracoustic::fractal::{higuchi_fd, HiguchiConfig};
use fracoustic::pipeline::{extract_features, extract_features_batch, ExtractionConfig};
use fracoustic::wavelet::{filter_coeffs, wavedec, BoundaryMode, WaveletFamily};

fn bench_clips(count: usize, length: usize) -> Vec<AudioClip> {
    let spec = SynthSpec {
        per_class: count.div_ceil(6).max(2),
        length,
        ..SynthSpec::default()
    };
    let mut clips = generate_synthetic(&spec).unwrap();
    clips.truncate(count);
    clips
}

fn bench_extraction(c: &mut Criterion) {
    let clips = bench_clips(24, 8192);
    let config = ExtractionConfig::default();
    let mut group = c.benchmark_group("extract_batch");
    group.sample_size(10);
    group.bench_with_input(BenchmarkId::new("sequential", clips.len()), &clips, |b, clips| {
        b.iter(|| {
            let out: Vec<_> = clips
                .iter()
                .map(|clip| extract_features(clip, &config).unwrap())
                .collect();
            black_box(out)
        })
    });
    group.bench_with_input(BenchmarkId::new("parallel", clips.len()), &clips, |b, clips| {
        b.iter(|| black_box(extract_features_batch(clips, &config)))
    });
    group.finish();
}

fn bench_higuchi(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let series: Vec<Vec<f64>> = (0..64)
        .map(|_| (0..4096).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let config = HiguchiConfig::new(16);
    let mut group = c.benchmark_group("higuchi_batch");
    group.sample_size(20);
    group.bench_function("sequential", |b| {
        b.iter(|| {
            let dims: Vec<f64> = series
                .iter()
                .map(|s| higuchi_fd(s, &config).unwrap().dimension)
                .collect();
            black_box(dims)
        })
    });
    group.bench_function("parallel", |b| {
        b.iter(|| {
            let dims = fracoustic::map_batch(&series, |s| {
                higuchi_fd(s, &config).unwrap().dimension
            });
            black_box(dims)
        })
    });
    group.finish();
}

fn bench_wavedec(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let signals: Vec<Vec<f64>> = (0..32)
        .map(|_| (0..16384).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let filter = filter_coeffs(WaveletFamily::Db4);
    let mut group = c.benchmark_group("wavedec_batch");
    group.sample_size(20);
    group.bench_function("sequential", |b| {
        b.iter(|| {
            let decs: Vec<_> = signals
                .iter()
                .map(|s| wavedec(s, &filter, BoundaryMode::Symmetric, 5).unwrap())
                .collect();
            black_box(decs)
        })
    });
    group.bench_function("parallel", |b| {
        b.iter(|| {
            let decs = fracoustic::map_batch(&signals, |s| {
                wavedec(s, &filter, BoundaryMode::Symmetric, 5).unwrap()
            });
            black_box(decs)
        })
    });
    group.finish();
}

criterion_group!(benches, bench_extraction, bench_higuchi, bench_wavedec);
criterion_main!(benches);
