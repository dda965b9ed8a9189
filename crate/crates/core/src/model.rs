//! Per-category linear scoring: ridge regression on pooled features against
//! overlap targets, with feature standardization baked into the model.
//!
//! Training solves the normal equations in closed form. With more examples
//! than dimensions it factors the (d+1)-sized primal system once (bias
//! unregularized); with wide features it switches to the exactly equivalent
//! n-sized dual system, so the huge concatenated pooling vectors stay cheap
//! to train on.

use std::io::Read as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{cholesky, cholesky_solve, Matrix};
use crate::{Error, Result};

/// Per-category linear model plus the standardization statistics of its
/// training features.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    categories: Vec<String>,
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
    feature_dim: usize,
    lambda: f64,
    digest: String,
    means: Vec<f64>,
    scales: Vec<f64>,
}

/// One training row: a candidate's concatenated pooled feature and its
/// per-category overlap targets.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub feature: Vec<f64>,
    pub targets: Vec<f64>,
}

impl LinearModel {
    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn weights(&self, category: usize) -> (&[f64], f64) {
        (&self.weights[category], self.biases[category])
    }

    /// Per-dimension means subtracted before scoring.
    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Per-dimension scales divided out before scoring.
    pub fn scales(&self) -> &[f64] {
        &self.scales
    }
}

/// Trains one ridge regressor per category against the overlap targets;
/// bias terms are unregularized, features are standardized per dimension
/// (zero-variance dimensions pass through unscaled).
pub fn train_ridge(
    examples: &[TrainExample],
    lambda: f64,
    categories: &[String],
    digest: impl Into<String>,
) -> Result<LinearModel> {
    if examples.is_empty() {
        return Err(Error::InvalidParameter(
            "training needs at least one example".into(),
        ));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be finite and positive, got {lambda}"
        )));
    }
    let n = examples.len();
    let d = examples[0].feature.len();
    let k = categories.len();
    for ex in examples {
        if ex.feature.len() != d {
            return Err(Error::DimensionMismatch { expected: d, actual: ex.feature.len() });
        }
        if ex.targets.len() != k {
            return Err(Error::DimensionMismatch { expected: k, actual: ex.targets.len() });
        }
        if !ex.feature.iter().all(|v| v.is_finite()) {
            return Err(Error::NumericalInput);
        }
        if !ex.targets.iter().all(|t| t.is_finite() && (0.0..=1.0).contains(t)) {
            return Err(Error::InvalidParameter(
                "overlap targets must lie in [0, 1]".into(),
            ));
        }
    }

    let (means, scales) = standardization_stats(examples, d);
    // Standardized design matrix, row per example.
    let x: Vec<Vec<f64>> = examples
        .iter()
        .map(|ex| {
            ex.feature
                .iter()
                .zip(means.iter().zip(&scales))
                .map(|(v, (m, s))| (v - m) / s)
                .collect()
        })
        .collect();
    let targets: Vec<Vec<f64>> = (0..k)
        .map(|c| examples.iter().map(|ex| ex.targets[c]).collect())
        .collect();

    let (weights, biases) = if d <= n {
        solve_primal(&x, &targets, lambda)?
    } else {
        solve_dual(&x, &targets, lambda)?
    };

    Ok(LinearModel {
        categories: categories.to_vec(),
        weights,
        biases,
        feature_dim: d,
        lambda,
        digest: digest.into(),
        means,
        scales,
    })
}

/// Per-category scores `w_c . standardize(feature) + b_c`. The caller's
/// configuration digest must match the one the model was trained with.
pub fn score(model: &LinearModel, feature: &[f64], digest: &str) -> Result<Vec<f64>> {
    if digest != model.digest {
        return Err(Error::ConfigMismatch {
            expected: model.digest.clone(),
            actual: digest.to_string(),
        });
    }
    if feature.len() != model.feature_dim {
        return Err(Error::DimensionMismatch {
            expected: model.feature_dim,
            actual: feature.len(),
        });
    }
    let std: Vec<f64> = feature
        .iter()
        .zip(model.means.iter().zip(&model.scales))
        .map(|(v, (m, s))| (v - m) / s)
        .collect();
    Ok(model
        .weights
        .iter()
        .zip(&model.biases)
        .map(|(w, b)| w.iter().zip(&std).map(|(wi, xi)| wi * xi).sum::<f64>() + b)
        .collect())
}

fn standardization_stats(examples: &[TrainExample], d: usize) -> (Vec<f64>, Vec<f64>) {
    let n = examples.len() as f64;
    let mut means = vec![0.0; d];
    for ex in examples {
        for (m, v) in means.iter_mut().zip(&ex.feature) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n;
    }
    let mut vars = vec![0.0; d];
    for ex in examples {
        for ((var, v), m) in vars.iter_mut().zip(&ex.feature).zip(&means) {
            let c = v - m;
            *var += c * c;
        }
    }
    let scales = vars
        .iter()
        .map(|v| {
            let std = (v / n).sqrt();
            if std < 1e-12 {
                1.0
            } else {
                std
            }
        })
        .collect();
    (means, scales)
}

/// Augmented (d+1) normal equations, factored once and shared by every
/// category's right-hand side.
fn solve_primal(
    x: &[Vec<f64>],
    targets: &[Vec<f64>],
    lambda: f64,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let n = x.len();
    let d = x[0].len();
    let mut a = Matrix::zeros(d + 1, d + 1);
    let rows: Vec<Vec<f64>> = (0..d)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0.0; d + 1];
            for j in i..d {
                row[j] = x.iter().map(|r| r[i] * r[j]).sum();
            }
            row[d] = x.iter().map(|r| r[i]).sum();
            row
        })
        .collect();
    for (i, row) in rows.iter().enumerate() {
        for j in i..d {
            a.set(i, j, row[j]);
            a.set(j, i, row[j]);
        }
        a.set(i, d, row[d]);
        a.set(d, i, row[d]);
        a.set(i, i, a.get(i, i) + lambda);
    }
    a.set(d, d, n as f64);
    let l = cholesky(&a)?;

    let mut weights = Vec::with_capacity(targets.len());
    let mut biases = Vec::with_capacity(targets.len());
    for t in targets {
        let mut rhs = vec![0.0; d + 1];
        for (i, r) in rhs.iter_mut().enumerate().take(d) {
            *r = x.iter().zip(t).map(|(row, ti)| row[i] * ti).sum();
        }
        rhs[d] = t.iter().sum();
        let sol = cholesky_solve(&l, &rhs)?;
        weights.push(sol[..d].to_vec());
        biases.push(sol[d]);
    }
    Ok((weights, biases))
}

/// Dual form for wide features: center rows and targets, solve the n-sized
/// kernel system `(X_c X_c^T + lambda I) alpha = t_c`, then
/// `w = X_c^T alpha` and `b = mean(t) - mean(x) . w` — the exact optimum of
/// the same objective.
fn solve_dual(
    x: &[Vec<f64>],
    targets: &[Vec<f64>],
    lambda: f64,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let n = x.len();
    let d = x[0].len();
    let nf = n as f64;
    let mut col_means = vec![0.0; d];
    for row in x {
        for (m, v) in col_means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut col_means {
        *m /= nf;
    }
    let xc: Vec<Vec<f64>> = x
        .iter()
        .map(|row| row.iter().zip(&col_means).map(|(v, m)| v - m).collect())
        .collect();

    let gram_rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i..n)
                .map(|j| xc[i].iter().zip(&xc[j]).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();
    let mut kmat = Matrix::zeros(n, n);
    for (i, row) in gram_rows.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + off;
            kmat.set(i, j, v);
            kmat.set(j, i, v);
        }
        kmat.set(i, i, kmat.get(i, i) + lambda);
    }
    let l = cholesky(&kmat)?;

    let mut weights = Vec::with_capacity(targets.len());
    let mut biases = Vec::with_capacity(targets.len());
    for t in targets {
        let t_mean = t.iter().sum::<f64>() / nf;
        let tc: Vec<f64> = t.iter().map(|v| v - t_mean).collect();
        let alpha = cholesky_solve(&l, &tc)?;
        let mut w = vec![0.0; d];
        for (row, &a) in xc.iter().zip(&alpha) {
            for (wi, v) in w.iter_mut().zip(row) {
                *wi += a * v;
            }
        }
        let b = t_mean - col_means.iter().zip(&w).map(|(m, wi)| m * wi).sum::<f64>();
        weights.push(w);
        biases.push(b);
    }
    Ok((weights, biases))
}

const MODEL_MAGIC: &[u8; 8] = b"SEGMDL01";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelMeta {
    version: u32,
    lambda: f64,
    feature_dim: usize,
    categories: Vec<String>,
    digest: String,
}

impl LinearModel {
    /// Writes the versioned binary container plus a `.json` metadata
    /// sidecar next to it.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        buf.extend_from_slice(MODEL_MAGIC);
        buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        buf.extend_from_slice(&self.lambda.to_le_bytes());
        buf.extend_from_slice(&(self.feature_dim as u64).to_le_bytes());
        buf.extend_from_slice(&(self.categories.len() as u32).to_le_bytes());
        write_str(&mut buf, &self.digest);
        for c in &self.categories {
            write_str(&mut buf, c);
        }
        for v in self.means.iter().chain(&self.scales) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for (w, b) in self.weights.iter().zip(&self.biases) {
            for v in w {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            buf.extend_from_slice(&b.to_le_bytes());
        }
        std::fs::write(path, &buf).map_err(|e| Error::io(path, e))?;

        let meta = ModelMeta {
            version: MODEL_VERSION,
            lambda: self.lambda,
            feature_dim: self.feature_dim,
            categories: self.categories.clone(),
            digest: self.digest.clone(),
        };
        let sidecar = path.with_extension(format!(
            "{}json",
            path.extension()
                .map(|e| format!("{}.", e.to_string_lossy()))
                .unwrap_or_default()
        ));
        let json = serde_json::to_string_pretty(&meta)?;
        std::fs::write(&sidecar, json).map_err(|e| Error::io(&sidecar, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        let bad = |reason: &str| Error::BadFormat {
            path: path.to_path_buf(),
            reason: reason.into(),
        };
        let mut cur = std::io::Cursor::new(&bytes);
        let mut magic = [0u8; 8];
        cur.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if &magic != MODEL_MAGIC {
            return Err(bad("missing model magic"));
        }
        let version = read_u32(&mut cur).map_err(|_| bad("truncated header"))?;
        if version != MODEL_VERSION {
            return Err(bad(&format!("unsupported model version {version}")));
        }
        let lambda = read_f64(&mut cur).map_err(|_| bad("truncated header"))?;
        let feature_dim = read_u64(&mut cur).map_err(|_| bad("truncated header"))? as usize;
        let n_cat = read_u32(&mut cur).map_err(|_| bad("truncated header"))? as usize;
        let digest = read_str(&mut cur).map_err(|_| bad("truncated digest"))?;
        let mut categories = Vec::with_capacity(n_cat);
        for _ in 0..n_cat {
            categories.push(read_str(&mut cur).map_err(|_| bad("truncated category table"))?);
        }
        let means = read_vec(&mut cur, feature_dim).map_err(|_| bad("truncated stats"))?;
        let scales = read_vec(&mut cur, feature_dim).map_err(|_| bad("truncated stats"))?;
        let mut weights = Vec::with_capacity(n_cat);
        let mut biases = Vec::with_capacity(n_cat);
        for _ in 0..n_cat {
            weights.push(read_vec(&mut cur, feature_dim).map_err(|_| bad("truncated weights"))?);
            biases.push(read_f64(&mut cur).map_err(|_| bad("truncated weights"))?);
        }
        if cur.position() != bytes.len() as u64 {
            return Err(bad("trailing bytes after weight rows"));
        }
        Ok(LinearModel {
            categories,
            weights,
            biases,
            feature_dim,
            lambda,
            digest,
            means,
            scales,
        })
    }
}

fn write_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

fn read_u32(cur: &mut std::io::Cursor<&Vec<u8>>) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    cur.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(cur: &mut std::io::Cursor<&Vec<u8>>) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    cur.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(cur: &mut std::io::Cursor<&Vec<u8>>) -> std::io::Result<f64> {
    let mut b = [0u8; 8];
    cur.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_vec(cur: &mut std::io::Cursor<&Vec<u8>>, len: usize) -> std::io::Result<Vec<f64>> {
    (0..len).map(|_| read_f64(cur)).collect()
}

fn read_str(cur: &mut std::io::Cursor<&Vec<u8>>) -> std::io::Result<String> {
    let len = read_u32(cur)? as usize;
    let mut b = vec![0u8; len];
    cur.read_exact(&mut b)?;
    String::from_utf8(b).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}
