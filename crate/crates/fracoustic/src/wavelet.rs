//! Multilevel discrete wavelet analysis and synthesis.
//!
//! Orthonormal Daubechies filter banks with three boundary handling modes.
//! Coefficient lengths are part of the external contract:
//!
//! * `Symmetric` / `Zero`: one level maps length `n` to `(n + L - 1) / 2`
//!   (floor division), where `L` is the filter length. The signal is
//!   extended by `L - 1` samples on each side before filtering, so the
//!   transform is slightly expansive and reconstructs exactly at every
//!   boundary.
//! * `Periodic`: one level maps `n` to `ceil(n / 2)`. Odd-length inputs are
//!   padded by repeating the last sample before the circular convolution;
//!   reconstruction truncates back to the original length.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reconstruction tolerance promised by the multilevel round trip.
pub const RECONSTRUCTION_TOL: f64 = 1e-8;

/// Decompositions stop before the running approximation would drop below
/// this many samples, so every retained band stays usable for the
/// downstream fractal estimators (which need at least `2 * k_max` samples
/// with `k_max >= 2`).
pub const MIN_APPROX_LEN: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveletFamily {
    Haar,
    Db2,
    Db4,
    Db8,
}

impl WaveletFamily {
    pub const ALL: [WaveletFamily; 4] = [
        WaveletFamily::Haar,
        WaveletFamily::Db2,
        WaveletFamily::Db4,
        WaveletFamily::Db8,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WaveletFamily::Haar => "haar",
            WaveletFamily::Db2 => "db2",
            WaveletFamily::Db4 => "db4",
            WaveletFamily::Db8 => "db8",
        }
    }
}

impl fmt::Display for WaveletFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WaveletFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "haar" => Ok(WaveletFamily::Haar),
            "db2" => Ok(WaveletFamily::Db2),
            "db4" => Ok(WaveletFamily::Db4),
            "db8" => Ok(WaveletFamily::Db8),
            other => Err(Error::UnknownFamily(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryMode {
    Symmetric,
    Periodic,
    Zero,
}

impl BoundaryMode {
    pub const ALL: [BoundaryMode; 3] = [
        BoundaryMode::Symmetric,
        BoundaryMode::Periodic,
        BoundaryMode::Zero,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundaryMode::Symmetric => "symmetric",
            BoundaryMode::Periodic => "periodic",
            BoundaryMode::Zero => "zero",
        }
    }
}

impl fmt::Display for BoundaryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundaryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetric" => Ok(BoundaryMode::Symmetric),
            "periodic" => Ok(BoundaryMode::Periodic),
            "zero" => Ok(BoundaryMode::Zero),
            other => Err(Error::Parameter(format!("unknown boundary mode `{other}`"))),
        }
    }
}

/// Orthonormal analysis/synthesis filter pair.
///
/// `lowpass` is the scaling filter (sums to sqrt(2), unit energy);
/// `highpass[i] = (-1)^i * lowpass[L-1-i]` is its quadrature mirror.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletFilterPair {
    pub family: WaveletFamily,
    pub lowpass: Vec<f64>,
    pub highpass: Vec<f64>,
}

impl WaveletFilterPair {
    pub fn len(&self) -> usize {
        self.lowpass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lowpass.is_empty()
    }
}

const HAAR: [f64; 2] = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2];

// tables carry full printed precision; the parser rounds to nearest f64
#[allow(clippy::excessive_precision)]
const DB2: [f64; 4] = [
    0.48296291314453414,
    0.83651630373780791,
    0.22414386804201338,
    -0.12940952255126038,
];

#[allow(clippy::excessive_precision)]
const DB4: [f64; 8] = [
    0.2303778133088965,
    0.71484657055291565,
    0.63088076792985891,
    -0.027983769416859854,
    -0.18703481171909308,
    0.030841381835560764,
    0.0328830116668852,
    -0.010597401785069032,
];

#[allow(clippy::excessive_precision)]
const DB8: [f64; 16] = [
    0.05441584224310401,
    0.31287159091429997,
    0.67563073629728981,
    0.58535468365420671,
    -0.015829105256349306,
    -0.28401554296154693,
    0.00047248457391328277,
    0.12874742662047846,
    -0.017369301001807546,
    -0.044088253930794752,
    0.013981027917398282,
    0.0087460940474057767,
    -0.0048703529934515743,
    -0.00039174037337694705,
    0.00067544940645056937,
    -0.00011747678412476953,
];

/// Tabulated filter pair for a supported family.
pub fn filter_coeffs(family: WaveletFamily) -> WaveletFilterPair {
    let lowpass: Vec<f64> = match family {
        WaveletFamily::Haar => HAAR.to_vec(),
        WaveletFamily::Db2 => DB2.to_vec(),
        WaveletFamily::Db4 => DB4.to_vec(),
        WaveletFamily::Db8 => DB8.to_vec(),
    };
    let len = lowpass.len();
    let highpass: Vec<f64> = (0..len)
        .map(|i| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            sign * lowpass[len - 1 - i]
        })
        .collect();
    WaveletFilterPair {
        family,
        lowpass,
        highpass,
    }
}

/// Single-level coefficient length for a signal of length `n`.
pub fn coeff_len(n: usize, filter_len: usize, mode: BoundaryMode) -> usize {
    match mode {
        BoundaryMode::Symmetric | BoundaryMode::Zero => (n + filter_len - 1) / 2,
        BoundaryMode::Periodic => n.div_ceil(2),
    }
}

/// Symmetric (half-point) reflection of index `i` into `[0, n)`.
fn mirror_index(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let mut j = i.rem_euclid(period);
    if j >= n as isize {
        j = period - 1 - j;
    }
    j as usize
}

fn extended_sample(signal: &[f64], i: isize, mode: BoundaryMode) -> f64 {
    let n = signal.len();
    match mode {
        BoundaryMode::Zero => {
            if i < 0 || i >= n as isize {
                0.0
            } else {
                signal[i as usize]
            }
        }
        BoundaryMode::Symmetric => signal[mirror_index(i, n)],
        BoundaryMode::Periodic => signal[i.rem_euclid(n as isize) as usize],
    }
}

/// One analysis step: boundary-extended correlation with each filter,
/// downsampled by two. Output lengths follow [`coeff_len`].
pub fn dwt_single(
    signal: &[f64],
    filter: &WaveletFilterPair,
    mode: BoundaryMode,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = signal.len();
    let lf = filter.len();
    if n < lf {
        return Err(Error::TooShort(format!(
            "signal length {n} shorter than {} filter ({lf} taps)",
            filter.family
        )));
    }
    match mode {
        BoundaryMode::Symmetric | BoundaryMode::Zero => {
            let out_len = coeff_len(n, lf, mode);
            let mut approx = vec![0.0; out_len];
            let mut detail = vec![0.0; out_len];
            for nn in 0..out_len {
                // window start in signal coordinates; extension handles the edges
                let base = 2 * nn as isize + 1 - (lf as isize - 1);
                let mut a = 0.0;
                let mut d = 0.0;
                for k in 0..lf {
                    let x = extended_sample(signal, base + k as isize, mode);
                    a += filter.lowpass[k] * x;
                    d += filter.highpass[k] * x;
                }
                approx[nn] = a;
                detail[nn] = d;
            }
            Ok((approx, detail))
        }
        BoundaryMode::Periodic => {
            // pad odd lengths by repeating the final sample
            let n_eff = n + n % 2;
            let sample = |i: usize| -> f64 {
                let j = i % n_eff;
                if j < n {
                    signal[j]
                } else {
                    signal[n - 1]
                }
            };
            let out_len = n_eff / 2;
            let mut approx = vec![0.0; out_len];
            let mut detail = vec![0.0; out_len];
            for nn in 0..out_len {
                let mut a = 0.0;
                let mut d = 0.0;
                for k in 0..lf {
                    let x = sample(2 * nn + k);
                    a += filter.lowpass[k] * x;
                    d += filter.highpass[k] * x;
                }
                approx[nn] = a;
                detail[nn] = d;
            }
            Ok((approx, detail))
        }
    }
}

/// One synthesis step, inverting [`dwt_single`] for a known original length.
pub fn idwt_single(
    approx: &[f64],
    detail: &[f64],
    filter: &WaveletFilterPair,
    mode: BoundaryMode,
    target_length: usize,
) -> Result<Vec<f64>> {
    if approx.len() != detail.len() {
        return Err(Error::Shape(format!(
            "approx length {} != detail length {}",
            approx.len(),
            detail.len()
        )));
    }
    let lc = approx.len();
    let lf = filter.len();
    let expected = coeff_len(target_length, lf, mode);
    if lc != expected {
        return Err(Error::Shape(format!(
            "coefficient length {lc} inconsistent with target length {target_length} \
             (expected {expected} for {} taps, {mode} mode)",
            lf
        )));
    }
    match mode {
        BoundaryMode::Symmetric | BoundaryMode::Zero => {
            // upsample by two, convolve with the synthesis filters, keep the
            // center: out[i] = y[i + L - 2] of the full convolution
            let mut out = vec![0.0; target_length];
            for (i, o) in out.iter_mut().enumerate() {
                let m = i as isize + lf as isize - 2;
                // contributions from coefficients q with 0 <= m - 2q < lf
                let q_min = ((m - lf as isize + 1).max(0) + 1) / 2;
                let q_max = (m / 2).min(lc as isize - 1);
                let mut acc = 0.0;
                let mut q = q_min;
                while q <= q_max {
                    let t = (m - 2 * q) as usize;
                    acc += approx[q as usize] * filter.lowpass[t]
                        + detail[q as usize] * filter.highpass[t];
                    q += 1;
                }
                *o = acc;
            }
            Ok(out)
        }
        BoundaryMode::Periodic => {
            let n_eff = target_length + target_length % 2;
            let mut buf = vec![0.0; n_eff];
            for q in 0..lc {
                for k in 0..lf {
                    let pos = (2 * q + k) % n_eff;
                    buf[pos] += approx[q] * filter.lowpass[k] + detail[q] * filter.highpass[k];
                }
            }
            buf.truncate(target_length);
            Ok(buf)
        }
    }
}

/// How many levels [`wavedec`] will actually run for a given signal length.
pub fn max_usable_levels(
    signal_len: usize,
    filter_len: usize,
    mode: BoundaryMode,
    requested: usize,
) -> usize {
    let mut len = signal_len;
    let mut achieved = 0;
    while achieved < requested {
        if len < filter_len {
            break;
        }
        let next = coeff_len(len, filter_len, mode);
        if next < MIN_APPROX_LEN {
            break;
        }
        len = next;
        achieved += 1;
    }
    achieved
}

/// All per-level bands of a multilevel analysis: `approxes[j]` and
/// `details[j]` hold level `j + 1` coefficients (finest first).
#[derive(Debug, Clone)]
pub struct LevelBands {
    pub approxes: Vec<Vec<f64>>,
    pub details: Vec<Vec<f64>>,
}

/// Iterated single-level analysis keeping every intermediate approximation.
///
/// The requested depth is clamped (never an error) when the signal runs out
/// of samples; compare `details.len()` with the request to detect it.
pub fn analyze_levels(
    signal: &[f64],
    filter: &WaveletFilterPair,
    mode: BoundaryMode,
    levels: usize,
) -> Result<LevelBands> {
    if levels == 0 {
        return Err(Error::Parameter("decomposition levels must be >= 1".into()));
    }
    if signal.is_empty() {
        return Err(Error::TooShort("cannot decompose an empty signal".into()));
    }
    let achieved = max_usable_levels(signal.len(), filter.len(), mode, levels);
    if achieved == 0 {
        return Err(Error::TooShort(format!(
            "signal length {} supports no {} levels in {mode} mode",
            signal.len(),
            filter.family
        )));
    }
    let mut approxes = Vec::with_capacity(achieved);
    let mut details = Vec::with_capacity(achieved);
    let mut current = signal.to_vec();
    for _ in 0..achieved {
        let (a, d) = dwt_single(&current, filter, mode)?;
        details.push(d);
        current = a.clone();
        approxes.push(a);
    }
    Ok(LevelBands { approxes, details })
}

/// Multilevel decomposition: per-level details plus the final approximation.
#[derive(Debug, Clone)]
pub struct WaveletDecomposition {
    pub filter: WaveletFilterPair,
    pub mode: BoundaryMode,
    /// Levels actually computed (may be fewer than requested).
    pub levels: usize,
    pub requested_levels: usize,
    /// `details[j]` is level `j + 1` (finest first).
    pub details: Vec<Vec<f64>>,
    /// Final approximation `a_J`.
    pub approx: Vec<f64>,
    pub original_length: usize,
}

impl WaveletDecomposition {
    pub fn was_clamped(&self) -> bool {
        self.levels < self.requested_levels
    }

    /// Per-level input lengths `[N, len_1, ..., len_{J-1}]`, derived from the
    /// documented length formula rather than stored.
    fn level_input_lengths(&self) -> Vec<usize> {
        let lf = self.filter.len();
        let mut lens = Vec::with_capacity(self.levels);
        let mut n = self.original_length;
        for _ in 0..self.levels {
            lens.push(n);
            n = coeff_len(n, lf, self.mode);
        }
        lens
    }

    /// Invert all levels back to the original signal.
    pub fn reconstruct(&self) -> Result<Vec<f64>> {
        let lens = self.level_input_lengths();
        let mut current = self.approx.clone();
        for j in (0..self.levels).rev() {
            current = idwt_single(&current, &self.details[j], &self.filter, self.mode, lens[j])?;
        }
        Ok(current)
    }

    /// Flat text serialization: a header line
    /// `family,mode,levels,original_length`, a band-length line, then one
    /// comma-separated line per band in the order `a_J, d_J, ..., d_1`.
    pub fn to_flat_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{},{},{},{}\n",
            self.filter.family, self.mode, self.levels, self.original_length
        ));
        let mut lens: Vec<usize> = vec![self.approx.len()];
        lens.extend(self.details.iter().rev().map(Vec::len));
        let lens_str: Vec<String> = lens.iter().map(|l| l.to_string()).collect();
        out.push_str(&lens_str.join(","));
        out.push('\n');
        let mut bands: Vec<&[f64]> = vec![&self.approx];
        bands.extend(self.details.iter().rev().map(|d| d.as_slice()));
        for band in bands {
            let vals: Vec<String> = band.iter().map(|v| format!("{v}")).collect();
            out.push_str(&vals.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_flat_text(text: &str) -> Result<Self> {
        let bad = |reason: &str| Error::Parse {
            path: "<decomposition>".into(),
            reason: reason.to_string(),
        };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("missing header"))?;
        let fields: Vec<&str> = header.split(',').collect();
        if fields.len() != 4 {
            return Err(bad("header must be family,mode,levels,original_length"));
        }
        let family: WaveletFamily = fields[0].parse()?;
        let mode: BoundaryMode = fields[1].parse()?;
        let levels: usize = fields[2].parse().map_err(|_| bad("bad level count"))?;
        let original_length: usize = fields[3].parse().map_err(|_| bad("bad original length"))?;
        let lens_line = lines.next().ok_or_else(|| bad("missing band lengths"))?;
        let lens: Vec<usize> = lens_line
            .split(',')
            .map(|t| t.parse().map_err(|_| bad("bad band length")))
            .collect::<Result<_>>()?;
        if lens.len() != levels + 1 {
            return Err(bad("band length count does not match levels"));
        }
        let mut bands = Vec::with_capacity(lens.len());
        for expected in &lens {
            let line = lines.next().ok_or_else(|| bad("missing band data"))?;
            let vals: Vec<f64> = line
                .split(',')
                .map(|t| t.trim().parse().map_err(|_| bad("bad coefficient")))
                .collect::<Result<_>>()?;
            if vals.len() != *expected {
                return Err(bad("band length mismatch"));
            }
            bands.push(vals);
        }
        let approx = bands.remove(0);
        bands.reverse(); // stored coarsest-first, kept finest-first
        Ok(WaveletDecomposition {
            filter: filter_coeffs(family),
            mode,
            levels,
            requested_levels: levels,
            details: bands,
            approx,
            original_length,
        })
    }
}

/// Multilevel analysis retaining the J detail bands and the final
/// approximation. Depth is clamped with the same rule as [`analyze_levels`].
pub fn wavedec(
    signal: &[f64],
    filter: &WaveletFilterPair,
    mode: BoundaryMode,
    levels: usize,
) -> Result<WaveletDecomposition> {
    let bands = analyze_levels(signal, filter, mode, levels)?;
    let achieved = bands.details.len();
    let approx = bands
        .approxes
        .last()
        .cloned()
        .expect("analyze_levels guarantees at least one level");
    Ok(WaveletDecomposition {
        filter: filter.clone(),
        mode,
        levels: achieved,
        requested_levels: levels,
        details: bands.details,
        approx,
        original_length: signal.len(),
    })
}
