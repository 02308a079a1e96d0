//! Certificates that the operator norm cannot be repaired: lower bounds that
//! survive every admissible submatrix removal, and the sparse sign-matrix
//! witness showing the removal budget itself is the obstruction.

use crate::error::{MatregError, Result};
use crate::matcore::{frobenius_norm, DenseMatrix};
use crate::randgen::{sample_matrix, DistributionSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    MeanSum,
    Frobenius,
    MinSubmatrixFrobenius,
    OptimalityWitness,
}

/// Kind-specific payload; unused fields stay empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CertificateDetails {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub removable_mass: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retained_dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nonzero_rows: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nonzero_cols: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nonzero_entries: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundCertificate {
    pub kind: CertificateKind,
    pub value: f64,
    pub conclusive: bool,
    pub details: CertificateDetails,
}

/// (1/m)·ΣB_ij, the Rayleigh quotient of the normalized all-ones vector;
/// always at most the operator norm.
pub fn mean_sum_lower(b: &DenseMatrix) -> Result<f64> {
    let m = require_square(b)?;
    Ok(b.entries().iter().sum::<f64>() / m as f64)
}

/// ‖B‖_F/√m; always at most the operator norm.
pub fn frobenius_lower(b: &DenseMatrix) -> Result<f64> {
    let m = require_square(b)?;
    Ok(frobenius_norm(b) / (m as f64).sqrt())
}

fn require_square(b: &DenseMatrix) -> Result<usize> {
    if !b.is_square() {
        return Err(MatregError::NotSquare {
            rows: b.n_rows(),
            cols: b.n_cols(),
        });
    }
    Ok(b.n_rows())
}

/// Lower bound on ‖A'‖ over every (1-eps)n × (1-eps)n submatrix A' of A.
///
/// Deleting any ⌊eps·n⌋ rows and columns removes at most the top row and
/// column squared masses, so ‖A'‖_F² ≥ ‖A‖_F² − removable, and the Frobenius
/// bound divides by √m with m = ⌈(1-eps)·n⌉.
pub fn min_submatrix_frobenius_lower(
    a: &DenseMatrix,
    eps: f64,
) -> Result<LowerBoundCertificate> {
    let n = require_square(a)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(MatregError::InvalidParameter(format!(
            "eps must lie in (0, 1), got {eps}"
        )));
    }
    let drop = (eps * n as f64).floor() as usize;
    let m = ((1.0 - eps) * n as f64).ceil() as usize;
    let mut row_mass = vec![0.0f64; n];
    let mut col_mass = vec![0.0f64; n];
    for i in 0..n {
        for (j, &v) in a.row(i).iter().enumerate() {
            row_mass[i] += v * v;
            col_mass[j] += v * v;
        }
    }
    let top_sum = |mut mass: Vec<f64>| -> f64 {
        mass.sort_by(|x, y| y.partial_cmp(x).unwrap());
        mass.iter().take(drop).sum()
    };
    let removable = top_sum(row_mass) + top_sum(col_mass);
    let total = frobenius_norm(a).powi(2);
    let value = (total - removable).max(0.0).sqrt() / (m as f64).sqrt();
    Ok(LowerBoundCertificate {
        kind: CertificateKind::MinSubmatrixFrobenius,
        value,
        conclusive: true,
        details: CertificateDetails {
            removable_mass: Some(removable),
            retained_dim: Some(m),
            ..Default::default()
        },
    })
}

/// Samples a sparse ±1/√p matrix with p = 2·eps/n and counts the rows holding
/// a nonzero. When more than eps·n rows do, every eps·n × eps·n zeroing leaves
/// some entry of magnitude 1/√p intact, so the minimum over removals of the
/// operator norm is at least 1/√p = √(n/(2·eps)).
pub fn optimality_witness(n: usize, eps: f64, seed: u64) -> Result<LowerBoundCertificate> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(MatregError::InvalidParameter(format!(
            "eps must lie in (0, 1), got {eps}"
        )));
    }
    if (n as f64) * eps < 1.0 {
        return Err(MatregError::InvalidParameter(format!(
            "need n·eps >= 1, got n = {n}, eps = {eps}"
        )));
    }
    let p = 2.0 * eps / n as f64;
    let spec = DistributionSpec::SparseSign { p };
    let a = sample_matrix(&spec, n, seed)?;
    let mut row_has = vec![false; n];
    let mut col_has = vec![false; n];
    let mut nonzeros = 0usize;
    for i in 0..n {
        for (j, &v) in a.row(i).iter().enumerate() {
            if v != 0.0 {
                row_has[i] = true;
                col_has[j] = true;
                nonzeros += 1;
            }
        }
    }
    let nonzero_rows = row_has.iter().filter(|&&b| b).count();
    let nonzero_cols = col_has.iter().filter(|&&b| b).count();
    let conclusive = nonzero_rows as f64 > eps * n as f64;
    Ok(LowerBoundCertificate {
        kind: CertificateKind::OptimalityWitness,
        value: if conclusive { 1.0 / p.sqrt() } else { 0.0 },
        conclusive,
        details: CertificateDetails {
            nonzero_rows: Some(nonzero_rows),
            nonzero_cols: Some(nonzero_cols),
            nonzero_entries: Some(nonzeros),
            p: Some(p),
            seed: Some(seed),
            ..Default::default()
        },
    })
}
