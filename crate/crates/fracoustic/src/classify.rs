//! Maximum-margin-criterion reduction and k-nearest-neighbor prediction.
//!
//! Features are z-scored per dimension (fractal dimensions sit near 1-2
//! while log-energy statistics live on a log scale), the symmetric matrix
//! `S_b - S_w` is eigendecomposed with a deterministic cyclic Jacobi
//! sweep, and the top eigenvectors form an orthonormal projection. The
//! reduced training vectors are kept as KNN exemplars. Eigenvector signs
//! are fixed (largest-magnitude component positive) so serialized models
//! reproduce exactly.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::audio_io::Emotion;
use crate::error::{Error, Result};
use crate::pipeline::{
    apply_cascade, default_cascade_order, fit_cascade, Direction, FeatureVector, ScreeningCascade,
};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

pub type Matrix = Vec<Vec<f64>>;

fn zeros(rows: usize, cols: usize) -> Matrix {
    vec![vec![0.0; cols]; rows]
}

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

/// Per-dimension z-score parameters fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardScaler {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl StandardScaler {
    /// Fit on rows of equal length; zero-variance dimensions get scale 1
    /// and are reported back.
    pub fn fit(data: &[Vec<f64>]) -> Result<(Self, Vec<usize>)> {
        let n = data.len();
        if n == 0 {
            return Err(Error::InsufficientData("no vectors to standardize".into()));
        }
        let dim = data[0].len();
        let mut mean = vec![0.0; dim];
        for row in data {
            if row.len() != dim {
                return Err(Error::Shape("ragged feature matrix".into()));
            }
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut var = vec![0.0; dim];
        for row in data {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                let d = v - m;
                *s += d * d;
            }
        }
        let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
        let mut flat_dims = Vec::new();
        let scale: Vec<f64> = var
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let sd = (s / denom).sqrt();
                if sd < 1e-12 {
                    flat_dims.push(i);
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Ok((StandardScaler { mean, scale }, flat_dims))
    }

    pub fn transform(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.mean.len() {
            return Err(Error::Shape(format!(
                "vector length {} does not match scaler dimension {}",
                v.len(),
                self.mean.len()
            )));
        }
        Ok(v.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((x, m), s)| (x - m) / s)
            .collect())
    }
}

// ---------------------------------------------------------------------------
// Scatter matrices
// ---------------------------------------------------------------------------

/// Between-class and within-class scatter of labeled vectors, both weighted
/// by class priors `p_c = n_c / n` with population-normalized class
/// covariances, so `S_b + S_w` equals the total scatter exactly.
pub fn scatter_matrices(data: &[Vec<f64>], labels: &[Emotion]) -> Result<(Matrix, Matrix)> {
    if data.len() != labels.len() {
        return Err(Error::Shape("one label per vector required".into()));
    }
    if data.is_empty() {
        return Err(Error::InsufficientData("no vectors for scatter".into()));
    }
    let dim = data[0].len();
    let n = data.len() as f64;
    let mut classes: Vec<Emotion> = labels.to_vec();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::InsufficientClasses(classes.len()));
    }
    let mut global_mean = vec![0.0; dim];
    for row in data {
        if row.len() != dim {
            return Err(Error::Shape("ragged feature matrix".into()));
        }
        for (m, v) in global_mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut global_mean {
        *m /= n;
    }
    let mut s_b = zeros(dim, dim);
    let mut s_w = zeros(dim, dim);
    for class in classes {
        let members: Vec<&Vec<f64>> = data
            .iter()
            .zip(labels)
            .filter(|(_, l)| **l == class)
            .map(|(v, _)| v)
            .collect();
        let nc = members.len() as f64;
        let prior = nc / n;
        let mut class_mean = vec![0.0; dim];
        for row in &members {
            for (m, v) in class_mean.iter_mut().zip(row.iter()) {
                *m += v;
            }
        }
        for m in &mut class_mean {
            *m /= nc;
        }
        for i in 0..dim {
            let di = class_mean[i] - global_mean[i];
            for j in 0..dim {
                s_b[i][j] += prior * di * (class_mean[j] - global_mean[j]);
            }
        }
        for row in &members {
            for i in 0..dim {
                let di = row[i] - class_mean[i];
                for j in 0..dim {
                    // prior * (1/nc) = 1/n
                    s_w[i][j] += di * (row[j] - class_mean[j]) / n;
                }
            }
        }
    }
    Ok((s_b, s_w))
}

// ---------------------------------------------------------------------------
// Symmetric eigendecomposition (cyclic Jacobi)
// ---------------------------------------------------------------------------

/// Off-diagonal convergence target relative to the input Frobenius norm.
const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenvalues (descending) and matching eigenvectors of a symmetric
/// matrix via cyclic Jacobi rotations. Each eigenvector's largest-magnitude
/// component is made positive, so results are reproducible bit for bit.
#[allow(clippy::needless_range_loop)] // rotations index rows and columns symmetrically
pub fn symmetric_eigen(matrix: &Matrix) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = matrix.len();
    if n == 0 || matrix.iter().any(|r| r.len() != n) {
        return Err(Error::Shape("eigendecomposition needs a square matrix".into()));
    }
    let mut a = matrix.clone();
    let mut v = zeros(n, n);
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let fro: f64 = a
        .iter()
        .flatten()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    let tol = JACOBI_TOL * fro.max(1.0);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        s += a[i][j] * a[i][j];
                    }
                }
            }
            s.sqrt()
        };
        if off < tol {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                if a[p][q].abs() <= tol / (n * n) as f64 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).unwrap().then(i.cmp(&j)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[i][i]).collect();
    let mut eigenvectors = Vec::with_capacity(n);
    for &col in &order {
        let mut vec_col: Vec<f64> = (0..n).map(|r| v[r][col]).collect();
        let lead = vec_col
            .iter()
            .enumerate()
            .max_by(|(ia, x), (ib, y)| {
                x.abs()
                    .partial_cmp(&y.abs())
                    .unwrap()
                    .then(ib.cmp(ia))
            })
            .map(|(i, _)| i)
            .unwrap();
        if vec_col[lead] < 0.0 {
            for x in &mut vec_col {
                *x = -*x;
            }
        }
        eigenvectors.push(vec_col);
    }
    Ok((eigenvalues, eigenvectors))
}

// ---------------------------------------------------------------------------
// MMC projection
// ---------------------------------------------------------------------------

/// Fitted projection: orthonormal rows of `basis` span the reduced space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmcProjection {
    /// `dim_out` rows, each of input dimension, orthonormal.
    pub basis: Vec<Vec<f64>>,
    /// Eigenvalues of `S_b - S_w`, descending, one per basis row.
    pub eigenvalues: Vec<f64>,
    pub scaler: StandardScaler,
    /// Input dimensions that had zero variance at fit time (their scale
    /// was forced to 1).
    pub flat_dimensions: Vec<usize>,
}

impl MmcProjection {
    pub fn input_dim(&self) -> usize {
        self.scaler.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.basis.len()
    }
}

/// Fit the projection maximizing `trace(W^T (S_b - S_w) W)` over
/// orthonormal `W` with `dim_out` columns.
pub fn mmc_fit(data: &[Vec<f64>], labels: &[Emotion], dim_out: usize) -> Result<MmcProjection> {
    if data.is_empty() {
        return Err(Error::InsufficientData("no training vectors".into()));
    }
    let dim = data[0].len();
    if dim_out == 0 || dim_out > dim {
        return Err(Error::Parameter(format!(
            "target dimension {dim_out} must be in 1..={dim}"
        )));
    }
    let (scaler, flat_dimensions) = StandardScaler::fit(data)?;
    let standardized: Vec<Vec<f64>> = data
        .iter()
        .map(|v| scaler.transform(v))
        .collect::<Result<_>>()?;
    let (s_b, s_w) = scatter_matrices(&standardized, labels)?;
    let mut diff = zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            diff[i][j] = s_b[i][j] - s_w[i][j];
        }
    }
    let (eigenvalues, eigenvectors) = symmetric_eigen(&diff)?;
    Ok(MmcProjection {
        basis: eigenvectors.into_iter().take(dim_out).collect(),
        eigenvalues: eigenvalues.into_iter().take(dim_out).collect(),
        scaler,
        flat_dimensions,
    })
}

/// Standardize and project a raw feature vector.
pub fn mmc_project(projection: &MmcProjection, v: &[f64]) -> Result<Vec<f64>> {
    let z = projection.scaler.transform(v)?;
    Ok(projection
        .basis
        .iter()
        .map(|row| row.iter().zip(&z).map(|(a, b)| a * b).sum())
        .collect())
}

// ---------------------------------------------------------------------------
// K-nearest-neighbor prediction
// ---------------------------------------------------------------------------

/// Majority vote over the `k` nearest exemplars in Euclidean distance.
/// Label ties break first on smaller summed distance, then on lexicographic
/// label order; the result is deterministic for any input order of equal
/// exemplars with distinct distances.
pub fn knn_predict(
    exemplars: &[(Vec<f64>, Emotion)],
    query: &[f64],
    k: usize,
) -> Result<Emotion> {
    if exemplars.is_empty() {
        return Err(Error::Model("no exemplars in model".into()));
    }
    if k == 0 || k > exemplars.len() {
        return Err(Error::Parameter(format!(
            "k={k} must be in 1..={}",
            exemplars.len()
        )));
    }
    let mut scored: Vec<(f64, usize)> = Vec::with_capacity(exemplars.len());
    for (i, (coords, _)) in exemplars.iter().enumerate() {
        if coords.len() != query.len() {
            return Err(Error::Shape(format!(
                "query dimension {} does not match exemplar dimension {}",
                query.len(),
                coords.len()
            )));
        }
        let d2: f64 = coords
            .iter()
            .zip(query)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        scored.push((d2, i));
    }
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let mut votes: std::collections::BTreeMap<Emotion, (usize, f64)> =
        std::collections::BTreeMap::new();
    for &(d2, i) in scored.iter().take(k) {
        let entry = votes.entry(exemplars[i].1).or_insert((0, 0.0));
        entry.0 += 1;
        entry.1 += d2.sqrt();
    }
    let mut best: Option<(Emotion, usize, f64)> = None;
    for (label, (count, dist)) in votes {
        let better = match best {
            None => true,
            Some((_, bc, bd)) => {
                count > bc || (count == bc && dist < bd)
                // equal count and distance: keep the earlier label
                // (BTreeMap iterates in lexicographic order)
            }
        };
        if better {
            best = Some((label, count, dist));
        }
    }
    Ok(best.unwrap().0)
}

// ---------------------------------------------------------------------------
// Full model
// ---------------------------------------------------------------------------

/// Which block of the feature vector feeds the MMC+KNN stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureScope {
    /// Fractal dimensions only (screening statistics feed the cascade).
    FdOnly,
    /// Fractal dimensions plus screening statistics.
    All,
}

impl fmt::Display for FeatureScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureScope::FdOnly => "fd",
            FeatureScope::All => "all",
        })
    }
}

impl FromStr for FeatureScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fd" => Ok(FeatureScope::FdOnly),
            "all" => Ok(FeatureScope::All),
            other => Err(Error::Parameter(format!("unknown feature scope `{other}`"))),
        }
    }
}

pub fn scope_features(v: &FeatureVector, scope: FeatureScope) -> Vec<f64> {
    match scope {
        FeatureScope::FdOnly => v.fd.clone(),
        FeatureScope::All => v.fd.iter().chain(v.screen.iter()).copied().collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub mmc_dim: usize,
    pub knn_k: usize,
    pub use_cascade: bool,
    /// `None` selects [`default_cascade_order`].
    pub cascade_order: Option<Vec<(Emotion, usize, Direction)>>,
    pub feature_scope: FeatureScope,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            mmc_dim: 5,
            knn_k: 3,
            use_cascade: true,
            cascade_order: None,
            feature_scope: FeatureScope::FdOnly,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exemplar {
    pub coords: Vec<f64>,
    pub label: Emotion,
}

/// Fitted end-to-end classifier: optional screening cascade, projection,
/// and stored projected exemplars. Immutable once fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionModel {
    pub schema_version: u32,
    pub projection: MmcProjection,
    pub exemplars: Vec<Exemplar>,
    pub k: usize,
    pub cascade: Option<ScreeningCascade>,
    pub scope: FeatureScope,
    pub levels: usize,
    pub layout_version: u32,
}

pub fn fit_model(
    train: &[(FeatureVector, Emotion)],
    config: &ClassifierConfig,
) -> Result<EmotionModel> {
    if train.is_empty() {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    if config.knn_k == 0 || config.knn_k > train.len() {
        return Err(Error::Parameter(format!(
            "knn k={} must be in 1..={}",
            config.knn_k,
            train.len()
        )));
    }
    let levels = train[0].0.levels;
    let layout_version = train[0].0.layout_version;
    for (v, _) in train {
        if v.levels != levels || v.layout_version != layout_version {
            return Err(Error::Shape("mixed feature layouts in training set".into()));
        }
    }
    let cascade = if config.use_cascade {
        let order = config
            .cascade_order
            .clone()
            .unwrap_or_else(default_cascade_order);
        Some(fit_cascade(train, &order)?)
    } else {
        None
    };
    let data: Vec<Vec<f64>> = train
        .iter()
        .map(|(v, _)| scope_features(v, config.feature_scope))
        .collect();
    let labels: Vec<Emotion> = train.iter().map(|(_, e)| *e).collect();
    let projection = mmc_fit(&data, &labels, config.mmc_dim)?;
    let exemplars = data
        .iter()
        .zip(&labels)
        .map(|(v, l)| {
            Ok(Exemplar {
                coords: mmc_project(&projection, v)?,
                label: *l,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EmotionModel {
        schema_version: MODEL_SCHEMA_VERSION,
        projection,
        exemplars,
        k: config.knn_k,
        cascade,
        scope: config.feature_scope,
        levels,
        layout_version,
    })
}

/// Cascade first when present; pass-throughs go to MMC + KNN.
pub fn predict(model: &EmotionModel, v: &FeatureVector) -> Result<Emotion> {
    if v.levels != model.levels || v.layout_version != model.layout_version {
        return Err(Error::Shape(format!(
            "feature layout (levels {}, version {}) does not match model (levels {}, version {})",
            v.levels, v.layout_version, model.levels, model.layout_version
        )));
    }
    if let Some(cascade) = &model.cascade {
        if let Some(label) = apply_cascade(cascade, v)? {
            return Ok(label);
        }
    }
    let coords = mmc_project(&model.projection, &scope_features(v, model.scope))?;
    let pairs: Vec<(Vec<f64>, Emotion)> = model
        .exemplars
        .iter()
        .map(|e| (e.coords.clone(), e.label))
        .collect();
    knn_predict(&pairs, &coords, model.k)
}

pub fn save_model(model: &EmotionModel, path: impl AsRef<Path>) -> Result<()> {
    let json = serde_json::to_string_pretty(model)
        .map_err(|e| Error::Internal(format!("model serialization failed: {e}")))?;
    crate::write_atomic(path.as_ref(), json.as_bytes())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<EmotionModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let model: EmotionModel = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    if model.schema_version != MODEL_SCHEMA_VERSION {
        return Err(Error::Model(format!(
            "unsupported model schema version {}",
            model.schema_version
        )));
    }
    Ok(model)
}
