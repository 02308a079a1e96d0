use super::DenseMatrix;
use crate::error::{MatregError, Result};
use crate::randgen::stateless_u64;
use serde::{Deserialize, Serialize};

/// Largest column count accepted by [`inf_to_two_exact`].
pub const INF_TO_TWO_EXACT_MAX_COLS: usize = 24;

const POWER_MAX_ITERS: usize = 50_000;
const JACOBI_CUTOFF: usize = 32;

/// All norms of one matrix, computed together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub op: f64,
    pub two_to_inf: f64,
    pub inf_to_two: f64,
    pub inf_to_two_is_exact: bool,
    pub frobenius: f64,
    pub schur: f64,
    pub l1_row_max: f64,
    pub l1_col_max: f64,
}

impl NormReport {
    /// Computes every norm. The infinity-to-2 norm is exact for at most 16
    /// columns; beyond that a greedy estimate (a lower bound) is reported and
    /// `inf_to_two_is_exact` is false.
    pub fn compute(a: &DenseMatrix, rel_tol: f64, restarts: usize, seed: u64) -> Result<Self> {
        let (inf_to_two, inf_to_two_is_exact) = if a.n_cols() <= 16 {
            (inf_to_two_exact(a)?, true)
        } else {
            (inf_to_two_estimate(a, restarts, seed)?, false)
        };
        let (l1_row_max, l1_col_max) = l1_maxima(a);
        Ok(Self {
            op: op_norm(a, rel_tol)?,
            two_to_inf: two_to_inf_norm(a),
            inf_to_two,
            inf_to_two_is_exact,
            frobenius: frobenius_norm(a),
            schur: (l1_row_max * l1_col_max).sqrt(),
            l1_row_max,
            l1_col_max,
        })
    }
}

fn l1_maxima(a: &DenseMatrix) -> (f64, f64) {
    let mut col_sums = vec![0.0; a.n_cols()];
    let mut row_max = 0.0f64;
    for i in 0..a.n_rows() {
        let row = a.row(i);
        let mut row_sum = 0.0;
        for (j, &v) in row.iter().enumerate() {
            let av = v.abs();
            row_sum += av;
            col_sums[j] += av;
        }
        row_max = row_max.max(row_sum);
    }
    let col_max = col_sums.iter().cloned().fold(0.0f64, f64::max);
    (row_max, col_max)
}

/// √(max ℓ1 row sum · max ℓ1 column sum), an upper bound on the operator norm.
pub fn schur_bound(a: &DenseMatrix) -> f64 {
    let (r, c) = l1_maxima(a);
    (r * c).sqrt()
}

/// √(Σ entries²).
pub fn frobenius_norm(a: &DenseMatrix) -> f64 {
    a.entries().iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Maximum Euclidean norm over rows.
pub fn two_to_inf_norm(a: &DenseMatrix) -> f64 {
    (0..a.n_rows())
        .map(|i| a.row(i).iter().map(|v| v * v).sum::<f64>())
        .fold(0.0f64, f64::max)
        .sqrt()
}

/// Largest singular value to relative accuracy `rel_tol`.
///
/// Small matrices (min dimension at most 32) go through a dense symmetric
/// eigensolve of the Gram matrix; larger ones use power iteration.
pub fn op_norm(a: &DenseMatrix, rel_tol: f64) -> Result<f64> {
    check_rel_tol(rel_tol)?;
    if a.n_rows().min(a.n_cols()) <= JACOBI_CUTOFF {
        let gram = if a.n_cols() <= a.n_rows() {
            a.gram()
        } else {
            a.transpose().gram()
        };
        let dim = a.n_rows().min(a.n_cols());
        Ok(jacobi_max_eigenvalue(&gram, dim).max(0.0).sqrt())
    } else {
        op_norm_power_iteration(a, rel_tol)
    }
}

fn check_rel_tol(rel_tol: f64) -> Result<()> {
    if !(rel_tol > 0.0 && rel_tol <= 1e-3) {
        return Err(MatregError::InvalidParameter(format!(
            "rel_tol must lie in (0, 1e-3], got {rel_tol}"
        )));
    }
    Ok(())
}

/// Power iteration on A^T A with a deterministic start vector. Exposed
/// separately so it can be cross-checked against the dense path.
pub fn op_norm_power_iteration(a: &DenseMatrix, rel_tol: f64) -> Result<f64> {
    check_rel_tol(rel_tol)?;
    let m = a.n_cols();
    let ones = vec![1.0 / (m as f64).sqrt(); m];
    let mut best = power_run(a, ones, rel_tol);
    // A second deterministic start guards against the all-ones vector being
    // orthogonal to the top singular direction.
    let mut alt = Vec::with_capacity(m);
    for j in 0..m {
        let u = stateless_u64(0x9e37_79b9_7f4a_7c15, j as u64);
        alt.push((u as f64 / u64::MAX as f64) - 0.5);
    }
    let norm = alt.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in &mut alt {
            *v /= norm;
        }
        best = best.max(power_run(a, alt, rel_tol));
    }
    Ok(best)
}

fn power_run(a: &DenseMatrix, mut v: Vec<f64>, rel_tol: f64) -> f64 {
    let n = a.n_rows();
    let m = a.n_cols();
    let mut u = vec![0.0; n];
    let mut w = vec![0.0; m];
    let mut prev = -1.0f64;
    let mut stagnant = 0usize;
    for iter in 0..POWER_MAX_ITERS {
        a.matvec(&v, &mut u);
        let lambda = u.iter().map(|x| x * x).sum::<f64>();
        if lambda == 0.0 {
            return 0.0;
        }
        let rel_change = (lambda - prev).abs() / lambda.max(f64::MIN_POSITIVE);
        if prev >= 0.0 && rel_change < rel_tol * rel_tol {
            return lambda.sqrt();
        }
        if prev >= 0.0 && rel_change < 1e-14 {
            stagnant += 1;
        } else {
            stagnant = 0;
        }
        prev = lambda;
        a.matvec_transposed(&u, &mut w);
        let wn = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if wn == 0.0 {
            return lambda.sqrt();
        }
        for (vj, &wj) in v.iter_mut().zip(w.iter()) {
            *vj = wj / wn;
        }
        if stagnant >= 3 {
            // deterministic kick off a possible fixed point
            for (j, vj) in v.iter_mut().enumerate() {
                let u = stateless_u64(0xd1b5_4a32_d192_ed03, (iter * m + j) as u64);
                *vj += 1e-6 * ((u as f64 / u64::MAX as f64) - 0.5);
            }
            let nn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            for vj in &mut v {
                *vj /= nn;
            }
            stagnant = 0;
            prev = -1.0;
        }
    }
    prev.max(0.0).sqrt()
}

/// Largest eigenvalue of a symmetric `dim x dim` matrix (row-major) via cyclic
/// Jacobi rotations. Accurate to machine precision for modest dimensions.
pub fn sym_max_eigenvalue(sym: &[f64], dim: usize) -> f64 {
    jacobi_max_eigenvalue(sym, dim)
}

fn jacobi_max_eigenvalue(sym: &[f64], dim: usize) -> f64 {
    let mut a = sym.to_vec();
    if dim == 1 {
        return a[0];
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..dim {
            for q in (p + 1)..dim {
                off += a[p * dim + q] * a[p * dim + q];
            }
        }
        let scale = (0..dim).map(|i| a[i * dim + i].abs()).fold(0.0f64, f64::max);
        if off.sqrt() <= 1e-14 * scale.max(1.0) {
            break;
        }
        for p in 0..dim {
            for q in (p + 1)..dim {
                let apq = a[p * dim + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * dim + p];
                let aqq = a[q * dim + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..dim {
                    let akp = a[k * dim + p];
                    let akq = a[k * dim + q];
                    a[k * dim + p] = c * akp - s * akq;
                    a[k * dim + q] = s * akp + c * akq;
                }
                for k in 0..dim {
                    let apk = a[p * dim + k];
                    let aqk = a[q * dim + k];
                    a[p * dim + k] = c * apk - s * aqk;
                    a[q * dim + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..dim).map(|i| a[i * dim + i]).fold(f64::NEG_INFINITY, f64::max)
}

/// Exact max over sign vectors x of ‖Ax‖₂, by Gray-code enumeration of
/// 2^{n_cols - 1} vectors (the map x to -x leaves the value unchanged).
pub fn inf_to_two_exact(a: &DenseMatrix) -> Result<f64> {
    let m = a.n_cols();
    if m > INF_TO_TWO_EXACT_MAX_COLS {
        return Err(MatregError::DimensionTooLarge {
            max: INF_TO_TWO_EXACT_MAX_COLS,
            got: m,
        });
    }
    let at = a.transpose();
    let n = a.n_rows();
    // start at x = all ones
    let mut y = vec![0.0; n];
    for j in 0..m {
        for (yi, &v) in y.iter_mut().zip(at.row(j).iter()) {
            *yi += v;
        }
    }
    let mut x = vec![1.0f64; m];
    let mut best = y.iter().map(|v| v * v).sum::<f64>();
    let total: u64 = 1 << (m - 1);
    for step in 1..total {
        // Gray code: flip the coordinate given by the lowest set bit of step.
        // Coordinate m-1 is never flipped, fixing the sign symmetry.
        let j = step.trailing_zeros() as usize;
        let delta = -2.0 * x[j];
        x[j] = -x[j];
        let col = at.row(j);
        let mut sq = 0.0;
        for (yi, &v) in y.iter_mut().zip(col.iter()) {
            *yi += delta * v;
            sq += *yi * *yi;
        }
        if sq > best {
            best = sq;
        }
    }
    Ok(best.sqrt())
}

/// Greedy lower bound on the infinity-to-2 norm: single-coordinate sign-flip
/// ascent from `restarts` seeded random sign vectors. Never exceeds the true
/// norm; deterministic for a fixed seed.
pub fn inf_to_two_estimate(a: &DenseMatrix, restarts: usize, seed: u64) -> Result<f64> {
    if restarts == 0 {
        return Err(MatregError::InvalidParameter(
            "restarts must be at least 1".into(),
        ));
    }
    let m = a.n_cols();
    let gram = a.gram();
    let fro_sq: f64 = (0..m).map(|j| gram[j * m + j]).sum();
    let tol = 1e-9 * fro_sq.max(f64::MIN_POSITIVE);
    let mut best_x: Option<Vec<f64>> = None;
    let mut best_sq = -1.0f64;
    for r in 0..restarts {
        let mut x: Vec<f64> = (0..m)
            .map(|j| {
                if stateless_u64(seed, (r * m + j) as u64) & 1 == 0 {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        // g = G x, maintained incrementally
        let mut g = vec![0.0; m];
        for (j, &xj) in x.iter().enumerate() {
            let col = &gram[j * m..(j + 1) * m];
            for (gi, &v) in g.iter_mut().zip(col.iter()) {
                *gi += xj * v;
            }
        }
        let mut val = x.iter().zip(g.iter()).map(|(a, b)| a * b).sum::<f64>();
        for _ in 0..4 * m + 4 {
            // flipping x_j changes x^T G x by 4(G_jj - x_j g_j)
            let mut pick = None;
            let mut gain = tol;
            for j in 0..m {
                let d = 4.0 * (gram[j * m + j] - x[j] * g[j]);
                if d > gain {
                    gain = d;
                    pick = Some(j);
                }
            }
            let Some(j) = pick else { break };
            let old = x[j];
            x[j] = -old;
            val += gain;
            let col = &gram[j * m..(j + 1) * m];
            for (gi, &v) in g.iter_mut().zip(col.iter()) {
                *gi -= 2.0 * old * v;
            }
        }
        if val > best_sq {
            best_sq = val;
            best_x = Some(x);
        }
    }
    // evaluate the winner directly to avoid accumulated drift
    let x = best_x.unwrap();
    let mut y = vec![0.0; a.n_rows()];
    a.matvec(&x, &mut y);
    Ok(y.iter().map(|v| v * v).sum::<f64>().sqrt())
}
