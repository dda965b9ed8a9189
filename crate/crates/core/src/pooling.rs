//! Second-order pooling (O2P): average the outer products of a descriptor
//! pool, take the matrix logarithm through a symmetric eigendecomposition,
//! flatten the upper triangle with sqrt(2)-scaled off-diagonals (a Frobenius
//! isometry), and power-normalize. Pooled blocks concatenate in a fixed
//! canonical order.

use serde::{Deserialize, Serialize};

use crate::descriptors::{DescriptorKind, LocalDescriptor};
use crate::linalg::{jacobi_eigen, Matrix};
use crate::partition::RegionId;
use crate::{Error, Result};

/// Numerical knobs of the pooling stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct O2PConfig {
    /// Diagonal regularizer added to the averaged outer products.
    pub epsilon: f64,
    /// Power-normalization exponent h in (0, 1].
    pub power: f64,
    /// Off-diagonal scale of the flattening; sqrt(2) preserves inner
    /// products between flattened matrices.
    pub offdiag_scale: f64,
}

impl Default for O2PConfig {
    fn default() -> Self {
        O2PConfig {
            epsilon: 1e-3,
            power: 0.5,
            offdiag_scale: std::f64::consts::SQRT_2,
        }
    }
}

impl O2PConfig {
    pub fn validate(&self) -> Result<()> {
        // epsilon 0 is accepted for full-rank pools (the analytic identity
        // cases); anything negative can produce log of a nonpositive value.
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be finite and >= 0, got {}",
                self.epsilon
            )));
        }
        if !(self.power.is_finite() && self.power > 0.0 && self.power <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "power must be in (0, 1], got {}",
                self.power
            )));
        }
        if !(self.offdiag_scale.is_finite() && self.offdiag_scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "offdiag scale must be positive, got {}",
                self.offdiag_scale
            )));
        }
        Ok(())
    }
}

/// One pooled block: the O2P vector of one (region, descriptor kind) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledFeature {
    pub region: RegionId,
    pub kind: DescriptorKind,
    pub vector: Vec<f64>,
    pub count: usize,
}

/// `A = (1/n) sum x x^T + eps I` for a nonempty pool of equal-dimension
/// vectors. The accumulation order is the given slice order.
pub fn o2p_matrix(vectors: &[Vec<f64>], epsilon: f64) -> Result<Matrix> {
    let n = vectors.len();
    let d = vectors.first().map_or(0, Vec::len);
    if n == 0 || d == 0 {
        return Err(Error::InvalidParameter(
            "outer-product matrix needs a nonempty pool of nonempty vectors".into(),
        ));
    }
    for v in vectors {
        if v.len() != d {
            return Err(Error::DimensionMismatch { expected: d, actual: v.len() });
        }
        if !v.iter().all(|x| x.is_finite()) {
            return Err(Error::NumericalInput);
        }
    }
    let mut a = Matrix::zeros(d, d);
    for v in vectors {
        for i in 0..d {
            for j in i..d {
                a.set(i, j, a.get(i, j) + v[i] * v[j]);
            }
        }
    }
    let inv_n = 1.0 / n as f64;
    for i in 0..d {
        for j in i..d {
            let val = a.get(i, j) * inv_n;
            a.set(i, j, val);
            a.set(j, i, val);
        }
    }
    for i in 0..d {
        a.set(i, i, a.get(i, i) + epsilon);
    }
    Ok(a)
}

/// Matrix logarithm of the regularized outer-product average, via the
/// symmetric eigendecomposition (log applied to eigenvalues).
pub fn o2p_log_matrix(vectors: &[Vec<f64>], epsilon: f64) -> Result<Matrix> {
    let a = o2p_matrix(vectors, epsilon)?;
    let eig = jacobi_eigen(&a)?;
    if epsilon > 0.0 {
        // A + eps I is positive definite by construction.
        assert!(
            eig.values[0] > 0.0,
            "regularized pooled matrix lost positive definiteness"
        );
    } else if eig.values[0] <= 0.0 {
        return Err(Error::NumericalInput);
    }
    let d = a.rows();
    let log_values: Vec<f64> = eig.values.iter().map(|&l| l.ln()).collect();
    let mut log = Matrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let mut sum = 0.0;
            for k in 0..d {
                sum += eig.vectors.get(i, k) * log_values[k] * eig.vectors.get(j, k);
            }
            log.set(i, j, sum);
            log.set(j, i, sum);
        }
    }
    Ok(log)
}

/// Row-major upper-triangle flattening with scaled off-diagonals. With
/// scale sqrt(2), dot products of flattened vectors equal Frobenius inner
/// products of the symmetric source matrices.
pub fn flatten_upper(m: &Matrix, offdiag_scale: f64) -> Vec<f64> {
    let d = m.rows();
    debug_assert_eq!(d, m.cols());
    let mut out = Vec::with_capacity(d * (d + 1) / 2);
    for i in 0..d {
        for j in i..d {
            let v = m.get(i, j);
            out.push(if i == j { v } else { v * offdiag_scale });
        }
    }
    out
}

/// Elementwise signed power normalization `sign(v) |v|^h`.
pub fn power_normalize(v: &mut [f64], h: f64) {
    for x in v {
        *x = x.signum() * x.abs().powf(h);
    }
}

/// Second-order pooling of one descriptor pool. The pool is re-sorted into
/// the canonical scan order internally, so the result is exactly invariant
/// to input permutation. An empty pool yields the all-zero vector (sized by
/// the descriptor kind) with count 0.
pub fn o2p_pool(
    region: RegionId,
    kind: DescriptorKind,
    pool: &[LocalDescriptor],
    cfg: &O2PConfig,
) -> Result<PooledFeature> {
    cfg.validate()?;
    if pool.is_empty() {
        let d = kind.dim();
        return Ok(PooledFeature {
            region,
            kind,
            vector: vec![0.0; d * (d + 1) / 2],
            count: 0,
        });
    }
    for desc in pool {
        if !desc.vector.iter().all(|x| x.is_finite()) {
            return Err(Error::NumericalInput);
        }
    }
    let mut ordered: Vec<&LocalDescriptor> = pool.iter().collect();
    ordered.sort_by(|a, b| {
        (a.y, a.x, a.scale)
            .cmp(&(b.y, b.x, b.scale))
            .then_with(|| a.vector.partial_cmp(&b.vector).expect("finite entries"))
    });
    let vectors: Vec<Vec<f64>> = ordered.iter().map(|d| d.vector.clone()).collect();

    let log = o2p_log_matrix(&vectors, cfg.epsilon)?;
    let mut vector = flatten_upper(&log, cfg.offdiag_scale);
    power_normalize(&mut vector, cfg.power);
    Ok(PooledFeature { region, kind, vector, count: pool.len() })
}

/// Concatenates pooled blocks in the canonical order: descriptor kind
/// outermost (eSIFT, eMSIFT, eLBP), region innermost (undivided figure,
/// figure cells in index order, border, ground). Input order is irrelevant;
/// a repeated (kind, region) pair is an error.
pub fn concat_features(parts: &[PooledFeature]) -> Result<Vec<f64>> {
    let mut ordered: Vec<&PooledFeature> = parts.iter().collect();
    ordered.sort_by_key(|p| (p.kind, p.region));
    for pair in ordered.windows(2) {
        if pair[0].kind == pair[1].kind && pair[0].region == pair[1].region {
            return Err(Error::DuplicateBlock(format!(
                "{} {}",
                pair[0].kind, pair[0].region
            )));
        }
    }
    let mut out = Vec::with_capacity(ordered.iter().map(|p| p.vector.len()).sum());
    for p in ordered {
        out.extend_from_slice(&p.vector);
    }
    Ok(out)
}
