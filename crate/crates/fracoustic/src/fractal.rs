//! Katz and Higuchi fractal-dimension estimators for 1-D series.
//!
//! Both estimators are amplitude-scale invariant up to floating point and
//! work on raw signals as well as wavelet sub-band coefficient sequences.
//! Katz embeds the series as the planar curve `(i, x_i)` with the index in
//! sample units, which keeps constant series well defined (a horizontal
//! line has dimension 1).

use crate::error::{Error, Result};

/// Value substituted for a sub-band whose fractal dimension is degenerate
/// (constant series); 1.0 is the smooth-curve limit.
pub const DEGENERATE_FD_SENTINEL: f64 = 1.0;

/// Higuchi estimator settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HiguchiConfig {
    /// Maximum sub-sampling delay; the fit uses `k = 1..=k_max`.
    pub k_max: usize,
    /// Optional `(k_lo, k_hi)` inclusive sub-range actually used by the
    /// regression.
    pub fit_range: Option<(usize, usize)>,
}

impl HiguchiConfig {
    pub fn new(k_max: usize) -> Self {
        HiguchiConfig {
            k_max,
            fit_range: None,
        }
    }
}

impl Default for HiguchiConfig {
    /// Default for raw-signal use; sub-band callers typically use 8.
    fn default() -> Self {
        HiguchiConfig::new(16)
    }
}

/// A fitted fractal-dimension estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdEstimate {
    pub dimension: f64,
    /// RMS of the log-log regression residuals.
    pub fit_residual: f64,
    /// Number of `(log k, log <L(k)>)` points entering the fit.
    pub points_used: usize,
    /// True when the usable `k` range was shrunk because the series is
    /// short (`n <= 2 * k_max`).
    pub k_range_shrunk: bool,
}

/// Katz fractal dimension of the planar curve `(i, x_i)`.
///
/// With `L` the total path length, `d` the maximum distance from the first
/// point and `n = N - 1` steps: `D = log(n) / (log(n) + log(d / L))`.
pub fn katz_fd(series: &[f64]) -> Result<f64> {
    let n = series.len();
    if n < 3 {
        return Err(Error::TooShort(format!(
            "katz dimension needs at least 3 samples, got {n}"
        )));
    }
    let mut path = 0.0;
    let mut extent2: f64 = 0.0;
    let x0 = series[0];
    for i in 1..n {
        let step = series[i] - series[i - 1];
        path += (1.0 + step * step).sqrt();
        let di = i as f64;
        let dx = series[i] - x0;
        extent2 = extent2.max(di * di + dx * dx);
    }
    let steps = (n - 1) as f64;
    let extent = extent2.sqrt();
    Ok(steps.ln() / (steps.ln() + (extent / path).ln()))
}

/// Mean normalized curve length `<L(k)>` at delay `k`: the average over the
/// `k` offsets `m` of
/// `sum_i |X(m + ik) - X(m + (i-1)k)| * (N - 1) / (floor((N - m) / k) * k^2)`.
pub fn higuchi_lengths(series: &[f64], k: usize) -> Result<f64> {
    let n = series.len();
    if k == 0 {
        return Err(Error::Parameter("higuchi delay k must be >= 1".into()));
    }
    if k >= n {
        return Err(Error::Parameter(format!(
            "higuchi delay k={k} must be smaller than series length {n}"
        )));
    }
    let norm = (n - 1) as f64 / (k * k) as f64;
    let mut total = 0.0;
    for m in 1..=k {
        let sub_steps = (n - m) / k;
        if sub_steps == 0 {
            return Err(Error::Parameter(format!(
                "no sub-samples for offset m={m} at delay k={k} (length {n})"
            )));
        }
        let mut length = 0.0;
        // series is 1-based in the defining formula: X(m + ik) = series[m - 1 + ik]
        let mut prev = series[m - 1];
        for i in 1..=sub_steps {
            let cur = series[m - 1 + i * k];
            length += (cur - prev).abs();
            prev = cur;
        }
        total += length * norm / sub_steps as f64;
    }
    Ok(total / k as f64)
}

/// Higuchi fractal dimension: minus the slope of the least-squares fit of
/// `log <L(k)>` against `log k`.
///
/// Short series shrink the usable delay range to `floor(n / 2)` instead of
/// failing; the shrink is reported in the estimate.
pub fn higuchi_fd(series: &[f64], config: &HiguchiConfig) -> Result<FdEstimate> {
    let n = series.len();
    if config.k_max < 2 {
        return Err(Error::Parameter(format!(
            "higuchi k_max must be >= 2, got {}",
            config.k_max
        )));
    }
    let mut k_max = config.k_max;
    let mut shrunk = false;
    if n <= 2 * k_max {
        k_max = n / 2;
        shrunk = true;
        if k_max < 2 {
            return Err(Error::TooShort(format!(
                "series length {n} too short for a higuchi fit"
            )));
        }
    }
    let (k_lo, k_hi) = match config.fit_range {
        Some((lo, hi)) => {
            if lo < 1 || hi > k_max || lo >= hi {
                return Err(Error::Parameter(format!(
                    "fit range {lo}..={hi} invalid for k_max {k_max}"
                )));
            }
            (lo, hi)
        }
        None => (1, k_max),
    };
    let mut log_k = Vec::with_capacity(k_hi - k_lo + 1);
    let mut log_l = Vec::with_capacity(k_hi - k_lo + 1);
    for k in k_lo..=k_hi {
        let l = higuchi_lengths(series, k)?;
        if l <= 0.0 {
            return Err(Error::DegenerateSignal(format!(
                "mean curve length is zero at delay k={k}"
            )));
        }
        log_k.push((k as f64).ln());
        log_l.push(l.ln());
    }
    let (slope, residual) = ols_fit(&log_k, &log_l);
    Ok(FdEstimate {
        dimension: -slope,
        fit_residual: residual,
        points_used: log_k.len(),
        k_range_shrunk: shrunk,
    })
}

/// Ordinary least squares `y = a + b x`; returns `(b, rms residual)`.
fn ols_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let sum_x: f64 = x.iter().sum();
    let sum_y: f64 = y.iter().sum();
    let sum_xy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sum_xx: f64 = x.iter().map(|a| a * a).sum();
    let denom = n * sum_xx - sum_x * sum_x;
    let slope = (n * sum_xy - sum_x * sum_y) / denom;
    let intercept = (sum_y - slope * sum_x) / n;
    let ss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (intercept + slope * a);
            r * r
        })
        .sum();
    (slope, (ss / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Literal index-by-index transcription of the defining Higuchi
    /// formulas, kept independent of the production path.
    fn naive_higuchi_length(x: &[f64], k: usize) -> f64 {
        let n = x.len();
        let mut acc = 0.0;
        for m in 1..=k {
            let imax = (n - m) / k;
            let mut s = 0.0;
            for i in 1..=imax {
                s += (x[m + i * k - 1] - x[m + (i - 1) * k - 1]).abs();
            }
            acc += s * (n as f64 - 1.0) / (imax as f64 * (k * k) as f64);
        }
        acc / k as f64
    }

    fn naive_higuchi_fd(x: &[f64], k_max: usize) -> f64 {
        let pts: Vec<(f64, f64)> = (1..=k_max)
            .map(|k| ((k as f64).ln(), naive_higuchi_length(x, k).ln()))
            .collect();
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        -(n * sxy - sx * sy) / (n * sxx - sx * sx)
    }

    /// Direct transcription of the Katz formula.
    fn naive_katz(x: &[f64]) -> f64 {
        let n = x.len();
        let mut l = 0.0;
        for i in 1..n {
            let dx = 1.0f64;
            let dy = x[i] - x[i - 1];
            l += (dx * dx + dy * dy).sqrt();
        }
        let mut d: f64 = 0.0;
        for i in 1..n {
            let dx = i as f64;
            let dy = x[i] - x[0];
            d = d.max((dx * dx + dy * dy).sqrt());
        }
        let nn = (n - 1) as f64;
        nn.ln() / (nn.ln() + (d / l).ln())
    }

    fn white_noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| StandardNormal.sample(rng)).collect()
    }

    #[test]
    fn katz_of_affine_series_is_one() {
        let line: Vec<f64> = (0..100).map(|i| 0.37 * i as f64 + 2.0).collect();
        assert!((katz_fd(&line).unwrap() - 1.0).abs() < 1e-9);
        let constant = vec![3.5; 100];
        assert!((katz_fd(&constant).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn katz_matches_naive_transcription_on_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let x = white_noise(&mut rng, 1000);
        let got = katz_fd(&x).unwrap();
        assert!(got > 1.0);
        assert!((got - naive_katz(&x)).abs() < 1e-12);
    }

    #[test]
    fn katz_rejects_tiny_series() {
        assert!(matches!(katz_fd(&[1.0, 2.0]), Err(Error::TooShort(_))));
    }

    #[test]
    fn katz_symmetric_series_survives_reversal() {
        let x: Vec<f64> = (0..101)
            .map(|i| ((i as f64 - 50.0) / 10.0).powi(2))
            .collect();
        let mut rev = x.clone();
        rev.reverse();
        assert!((katz_fd(&x).unwrap() - katz_fd(&rev).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn higuchi_length_at_k1_is_total_variation() {
        let x = [0.0, 1.0, 0.0, 1.0];
        assert!((higuchi_lengths(&x, 1).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn higuchi_length_of_constant_is_zero() {
        let x = vec![2.0; 50];
        for k in 1..=10 {
            assert_eq!(higuchi_lengths(&x, k).unwrap(), 0.0);
        }
    }

    #[test]
    fn higuchi_lengths_match_naive_transcription() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = white_noise(&mut rng, 500);
        for k in 1..=16 {
            let got = higuchi_lengths(&x, k).unwrap();
            let want = naive_higuchi_length(&x, k);
            assert!((got - want).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn higuchi_length_rejects_large_k() {
        let x = [1.0, 2.0, 3.0];
        assert!(matches!(higuchi_lengths(&x, 3), Err(Error::Parameter(_))));
    }

    #[test]
    fn higuchi_fd_constant_series_is_degenerate() {
        let x = vec![1.0; 64];
        let err = higuchi_fd(&x, &HiguchiConfig::new(8)).unwrap_err();
        assert!(matches!(err, Error::DegenerateSignal(_)));
    }

    #[test]
    fn higuchi_fd_matches_naive_on_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &n in &[50usize, 500, 5000] {
            let x = white_noise(&mut rng, n);
            let k_max = 16.min(n / 2);
            let est = higuchi_fd(&x, &HiguchiConfig::new(k_max)).unwrap();
            let want = naive_higuchi_fd(&x, k_max);
            assert!((est.dimension - want).abs() < 1e-10, "n={n}");
        }
    }

    #[test]
    fn higuchi_fd_of_white_noise_is_near_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut sum = 0.0;
        let runs = 20;
        for _ in 0..runs {
            let x = white_noise(&mut rng, 8192);
            sum += higuchi_fd(&x, &HiguchiConfig::new(16)).unwrap().dimension;
        }
        let mean = sum / runs as f64;
        assert!((1.9..=2.05).contains(&mean), "mean={mean}");
    }

    #[test]
    fn higuchi_fd_of_smooth_sine_is_near_one() {
        let n = 8192;
        let x: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * 4.0 * i as f64 / n as f64).sin())
            .collect();
        let est = higuchi_fd(&x, &HiguchiConfig::new(8)).unwrap();
        assert!(
            (0.95..=1.1).contains(&est.dimension),
            "dimension={}",
            est.dimension
        );
        assert!((est.dimension - naive_higuchi_fd(&x, 8)).abs() < 1e-10);
    }

    #[test]
    fn higuchi_fd_is_scale_and_offset_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x = white_noise(&mut rng, 600);
        let base = higuchi_fd(&x, &HiguchiConfig::new(12)).unwrap().dimension;
        for &(c, b) in &[(10.0, 0.0), (0.004, 0.0), (1.0, 25.0), (3.0, -8.0)] {
            let y: Vec<f64> = x.iter().map(|v| c * v + b).collect();
            let got = higuchi_fd(&y, &HiguchiConfig::new(12)).unwrap().dimension;
            assert!((got - base).abs() < 1e-9, "c={c} b={b}");
        }
    }

    #[test]
    fn higuchi_fd_shrinks_k_range_on_short_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let x = white_noise(&mut rng, 20);
        let est = higuchi_fd(&x, &HiguchiConfig::new(16)).unwrap();
        assert!(est.k_range_shrunk);
        assert_eq!(est.points_used, 10);
    }

    #[test]
    fn higuchi_fit_range_restricts_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let x = white_noise(&mut rng, 512);
        let cfg = HiguchiConfig {
            k_max: 16,
            fit_range: Some((2, 8)),
        };
        let est = higuchi_fd(&x, &cfg).unwrap();
        assert_eq!(est.points_used, 7);
        let bad = HiguchiConfig {
            k_max: 16,
            fit_range: Some((9, 40)),
        };
        assert!(matches!(higuchi_fd(&x, &bad), Err(Error::Parameter(_))));
    }
}
