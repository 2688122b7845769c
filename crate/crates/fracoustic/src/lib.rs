//! Audio emotion recognition from wavelet sub-band fractal dimensions.
//!
//! The pipeline decomposes an utterance with a multilevel discrete wavelet
//! transform, estimates a fractal dimension for every sub-band, screens
//! high-arousal / low-energy emotions with simple threshold stages over
//! energy and Teager-energy statistics, and classifies whatever remains
//! with a maximum-margin-criterion projection followed by k-nearest
//! neighbors.
//!
//! Modules follow the processing order:
//!
//! * [`audio_io`] - WAV decoding, dataset manifests, framing
//! * [`time_features`] - pitch, zero crossings, log energy, Teager energy
//! * [`wavelet`] - multilevel DWT analysis/synthesis
//! * [`fractal`] - Katz and Higuchi fractal-dimension estimators
//! * [`pipeline`] - feature vectors and the screening cascade
//! * [`classify`] - MMC reduction and KNN prediction
//! * [`eval`] - split protocols, synthetic corpora, experiment reports
//!
//! Batch entry points run data-parallel under the default `parallel`
//! feature (rayon) and fall back to sequential iteration without it.

pub mod audio_io;
pub mod classify;
pub mod error;
pub mod eval;
pub mod fractal;
pub mod pipeline;
pub mod time_features;
pub mod wavelet;

pub use error::{Error, Result};

/// Map `f` over `items`, in parallel when the `parallel` feature is on.
/// Output order always matches input order.
pub fn map_batch<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Like [`map_batch`] but over an index range; used where work items are
/// generated rather than stored.
pub fn map_indices<U, F>(count: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}

/// Write through a temporary sibling then rename, so readers never observe
/// a half-written file.
pub fn write_atomic(path: &std::path::Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp{}",
        path.extension()
            .map(|e| e.to_string_lossy().into_owned())
            .unwrap_or_default(),
        std::process::id()
    ));
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
