//! Constructive factorization weights on the simplex: find μ with
//! ‖Bx‖₂² ≤ C²·Σ μ_j x_j², then prune the heavy-weight columns, which bounds
//! the operator norm of the remainder by C/√(δm).

use crate::error::{MatregError, Result};
use crate::matcore::{DenseMatrix, IndexSet};
use crate::randgen::stateless_u64;
use serde::{Deserialize, Serialize};

/// Simplex weights μ with the factorization certificate C.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PietschWeights {
    pub mu: Vec<f64>,
    pub certificate_c: f64,
    pub iterations_used: usize,
}

struct ScaledGramOp<'a> {
    b: &'a DenseMatrix,
    inv_sqrt_mu: Vec<f64>,
    tmp_col: Vec<f64>,
    tmp_row: Vec<f64>,
}

impl<'a> ScaledGramOp<'a> {
    fn new(b: &'a DenseMatrix, mu: &[f64]) -> Self {
        let inv_sqrt_mu = mu
            .iter()
            .map(|&m| if m > 0.0 { 1.0 / m.sqrt() } else { 0.0 })
            .collect();
        Self {
            b,
            inv_sqrt_mu,
            tmp_col: vec![0.0; b.n_cols()],
            tmp_row: vec![0.0; b.n_rows()],
        }
    }

    /// y = D^{-1/2} Bᵀ B D^{-1/2} x
    fn apply(&mut self, x: &[f64], y: &mut [f64]) {
        let Self {
            b,
            inv_sqrt_mu,
            tmp_col,
            tmp_row,
        } = self;
        for (t, (&xi, &s)) in tmp_col.iter_mut().zip(x.iter().zip(inv_sqrt_mu.iter())) {
            *t = xi * s;
        }
        b.matvec(tmp_col, tmp_row);
        b.matvec_transposed(tmp_row, y);
        for (yi, &s) in y.iter_mut().zip(inv_sqrt_mu.iter()) {
            *yi *= s;
        }
    }

    /// Top eigenpair by power iteration from a warm-start vector.
    fn top_eigenpair(&mut self, v: &mut Vec<f64>, tol: f64, max_iters: usize) -> f64 {
        let m = v.len();
        let mut y = vec![0.0; m];
        let mut lambda = 0.0;
        let mut prev = -1.0;
        for _ in 0..max_iters {
            self.apply(v, &mut y);
            lambda = v.iter().zip(y.iter()).map(|(a, b)| a * b).sum::<f64>();
            let norm = y.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            for (vi, &yi) in v.iter_mut().zip(y.iter()) {
                *vi = yi / norm;
            }
            if prev >= 0.0 && (lambda - prev).abs() <= tol * lambda.max(f64::MIN_POSITIVE) {
                break;
            }
            prev = lambda;
        }
        lambda.max(0.0)
    }
}

fn top_eigenvalue_exact(b: &DenseMatrix, mu: &[f64], warm: &mut Vec<f64>) -> f64 {
    let mut op = ScaledGramOp::new(b, mu);
    let m = b.n_cols();
    if m <= 64 {
        // materialize the scaled Gram and solve densely for full accuracy
        let mut scaled = DenseMatrix::zeros(b.n_rows(), m);
        for i in 0..b.n_rows() {
            for j in 0..m {
                scaled.set(i, j, b.get(i, j) * op.inv_sqrt_mu[j]);
            }
        }
        crate::matcore::sym_max_eigenvalue(&scaled.gram(), m).max(0.0)
    } else {
        op.top_eigenpair(warm, 1e-13, 20_000)
    }
}

/// Entropic mirror descent over the simplex minimizing
/// λ_max(D_μ^{-1/2} Bᵀ B D_μ^{-1/2}); zero columns are pinned to μ_j = 0.
/// Returns the best iterate with its re-evaluated certificate.
pub fn pietsch_weights(b: &DenseMatrix, max_iters: usize, seed: u64) -> Result<PietschWeights> {
    if max_iters == 0 {
        return Err(MatregError::InvalidParameter(
            "max_iters must be at least 1".into(),
        ));
    }
    let m = b.n_cols();
    let mut support = Vec::new();
    for j in 0..m {
        if (0..b.n_rows()).any(|i| b.get(i, j) != 0.0) {
            support.push(j);
        }
    }
    if support.is_empty() {
        return Err(MatregError::ContractViolation(
            "factorization weights need at least one nonzero entry".into(),
        ));
    }
    let mut mu = vec![0.0; m];
    for &j in &support {
        mu[j] = 1.0 / support.len() as f64;
    }
    let mut warm: Vec<f64> = (0..m)
        .map(|j| {
            if mu[j] > 0.0 {
                (stateless_u64(seed, j as u64) >> 11) as f64 / (1u64 << 53) as f64 + 0.5
            } else {
                0.0
            }
        })
        .collect();
    let wn = warm.iter().map(|v| v * v).sum::<f64>().sqrt();
    warm.iter_mut().for_each(|v| *v /= wn);
    let mut best_mu = mu.clone();
    let mut best_f = f64::INFINITY;
    let mut v = warm.clone();
    for t in 1..=max_iters {
        let mut op = ScaledGramOp::new(b, &mu);
        let lambda = op.top_eigenpair(&mut v, 1e-10, if t == 1 { 200 } else { 8 });
        if lambda < best_f {
            best_f = lambda;
            best_mu.copy_from_slice(&mu);
        }
        let eta = 0.5 / (t as f64).sqrt();
        let mut total = 0.0;
        for &j in &support {
            let expo = (eta * v[j] * v[j] / mu[j]).min(30.0);
            mu[j] *= expo.exp();
            total += mu[j];
        }
        for &j in &support {
            mu[j] /= total;
        }
    }
    let mut final_warm = v;
    let lambda = top_eigenvalue_exact(b, &best_mu, &mut final_warm);
    Ok(PietschWeights {
        mu: best_mu,
        certificate_c: lambda.sqrt(),
        iterations_used: max_iters,
    })
}

/// Removes the heavy-weight columns J = {j : μ_j > 1/(δm)}.
///
/// |J| < δm by pigeonhole on Σμ = 1, and the certificate gives
/// ‖B with J zeroed‖ ≤ C/√(δm) deterministically.
pub fn gp_prune(
    b: &DenseMatrix,
    weights: &PietschWeights,
    delta: f64,
) -> Result<(IndexSet, f64)> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(MatregError::InvalidParameter(format!(
            "delta must lie in (0, 1], got {delta}"
        )));
    }
    let m = b.n_cols();
    if weights.mu.len() != m {
        return Err(MatregError::ContractViolation(format!(
            "weight vector length {} does not match {} columns",
            weights.mu.len(),
            m
        )));
    }
    let total: f64 = weights.mu.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(MatregError::ContractViolation(format!(
            "weights sum to {total}, not 1"
        )));
    }
    for (j, &mj) in weights.mu.iter().enumerate() {
        if mj < 0.0 {
            return Err(MatregError::ContractViolation(format!(
                "negative weight at column {j}"
            )));
        }
        if mj == 0.0 && (0..b.n_rows()).any(|i| b.get(i, j) != 0.0) {
            return Err(MatregError::ContractViolation(format!(
                "zero weight on nonzero column {j}"
            )));
        }
    }
    let threshold = 1.0 / (delta * m as f64);
    let selected: Vec<usize> = weights
        .mu
        .iter()
        .enumerate()
        .filter(|(_, &mj)| mj > threshold)
        .map(|(j, _)| j)
        .collect();
    let bound = weights.certificate_c / (delta * m as f64).sqrt();
    Ok((IndexSet::new(selected, m)?, bound))
}
