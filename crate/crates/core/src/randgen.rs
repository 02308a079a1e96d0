//! Seeded, counter-addressable samplers for the entry distributions used in
//! the experiments. Every draw is a pure function of (spec, dimensions, seed),
//! so results are reproducible regardless of parallel scheduling.

use crate::error::{MatregError, Result};
use crate::matcore::DenseMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

/// Counter-based generator: a splitmix64-style mix of (seed, counter).
pub fn stateless_u64(seed: u64, counter: u64) -> u64 {
    let mut z = seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(counter.wrapping_mul(0xbf58_476d_1ce4_e5b9))
        .wrapping_add(0x94d0_49bb_1331_11eb);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform on (0, 1].
#[inline]
pub fn uniform_open01(seed: u64, counter: u64) -> f64 {
    ((stateless_u64(seed, counter) >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform on [0, 1).
#[inline]
fn uniform_halfopen01(seed: u64, counter: u64) -> f64 {
    (stateless_u64(seed, counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Entry distribution for random matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionSpec {
    Gaussian { mean: f64, variance: f64 },
    /// Value ±1/√p with probability p/2 each, 0 otherwise.
    SparseSign { p: f64 },
    /// Value ±√n with probability 1/(2n) each, 0 otherwise; n fixed at sampling.
    SparseBig,
    /// Symmetric two-sided Pareto with tail exponent alpha, rescaled to unit
    /// variance when alpha > 2.
    ParetoSym { alpha: f64 },
    /// Unit-variance Gaussian plus a nonzero constant mean.
    ShiftedGaussian { mu: f64 },
}

impl DistributionSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DistributionSpec::Gaussian { variance, .. } if variance <= 0.0 => {
                Err(MatregError::InvalidParameter(format!(
                    "gaussian variance must be positive, got {variance}"
                )))
            }
            DistributionSpec::SparseSign { p } if !(p > 0.0 && p <= 1.0) => {
                Err(MatregError::InvalidParameter(format!(
                    "sparse_sign p must lie in (0,1], got {p}"
                )))
            }
            DistributionSpec::ParetoSym { alpha } if alpha <= 0.0 => {
                Err(MatregError::InvalidParameter(format!(
                    "pareto_sym alpha must be positive, got {alpha}"
                )))
            }
            DistributionSpec::ShiftedGaussian { mu } if mu == 0.0 => {
                Err(MatregError::InvalidParameter(
                    "shifted_gaussian mu must be nonzero".into(),
                ))
            }
            _ => Ok(()),
        }
    }

    /// True when the second moment is infinite (ParetoSym with alpha ≤ 2).
    pub fn infinite_variance(&self) -> bool {
        matches!(self, DistributionSpec::ParetoSym { alpha } if *alpha <= 2.0)
    }

    /// True when the entry distribution has atoms (relevant for jitter).
    pub fn is_discrete(&self) -> bool {
        matches!(
            self,
            DistributionSpec::SparseSign { .. } | DistributionSpec::SparseBig
        )
    }

    fn pareto_scale(alpha: f64) -> f64 {
        if alpha > 2.0 {
            ((alpha - 2.0) / alpha).sqrt()
        } else {
            1.0
        }
    }

    /// P(|X| ≥ t) for one entry, with matrix dimension `n` fixed.
    pub fn survival_abs(&self, t: f64, n: usize) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        match *self {
            DistributionSpec::Gaussian { mean, variance } => {
                let s = variance.sqrt();
                gaussian_upper_tail((t - mean) / s) + gaussian_upper_tail((t + mean) / s)
            }
            DistributionSpec::ShiftedGaussian { mu } => {
                gaussian_upper_tail(t - mu) + gaussian_upper_tail(t + mu)
            }
            DistributionSpec::SparseSign { p } => {
                if t <= 1.0 / p.sqrt() {
                    p
                } else {
                    0.0
                }
            }
            DistributionSpec::SparseBig => {
                let nf = n as f64;
                if t <= nf.sqrt() {
                    1.0 / nf
                } else {
                    0.0
                }
            }
            DistributionSpec::ParetoSym { alpha } => {
                let s = Self::pareto_scale(alpha);
                if t <= s {
                    1.0
                } else {
                    (t / s).powf(-alpha)
                }
            }
        }
    }

    fn sample_entry(&self, n: usize, seed: u64, base: u64, jitter: bool) -> f64 {
        let v = match *self {
            DistributionSpec::Gaussian { mean, variance } => {
                mean + variance.sqrt() * standard_normal(seed, base)
            }
            DistributionSpec::ShiftedGaussian { mu } => mu + standard_normal(seed, base),
            DistributionSpec::SparseSign { p } => {
                let u = uniform_halfopen01(seed, base);
                if u < p / 2.0 {
                    1.0 / p.sqrt()
                } else if u < p {
                    -1.0 / p.sqrt()
                } else {
                    0.0
                }
            }
            DistributionSpec::SparseBig => {
                let nf = n as f64;
                let u = uniform_halfopen01(seed, base);
                if u < 0.5 / nf {
                    nf.sqrt()
                } else if u < 1.0 / nf {
                    -nf.sqrt()
                } else {
                    0.0
                }
            }
            DistributionSpec::ParetoSym { alpha } => {
                let sign = if stateless_u64(seed, base) & 1 == 0 {
                    1.0
                } else {
                    -1.0
                };
                let u = uniform_open01(seed, base + 1);
                sign * Self::pareto_scale(alpha) * u.powf(-1.0 / alpha)
            }
        };
        if jitter && self.is_discrete() {
            v + 1e-9 * uniform_halfopen01(seed, base + 3)
        } else {
            v
        }
    }
}

fn standard_normal(seed: u64, base: u64) -> f64 {
    let u1 = uniform_open01(seed, base);
    let u2 = uniform_halfopen01(seed, base + 1);
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// P(Z ≥ x) for standard normal Z, via an erfc approximation accurate to ~1e-7.
fn gaussian_upper_tail(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

fn erfc(x: f64) -> f64 {
    // Abramowitz & Stegun 7.1.26 on |x|, reflected for negative arguments
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * z);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    let e = poly * (-z * z).exp();
    if x >= 0.0 {
        e
    } else {
        2.0 - e
    }
}

/// n x n matrix of i.i.d. draws; identical output for identical arguments.
pub fn sample_matrix(spec: &DistributionSpec, n: usize, seed: u64) -> Result<DenseMatrix> {
    sample_matrix_jittered(spec, n, seed, false)
}

/// Like [`sample_matrix`] with an optional uniform(0, 1e-9) additive jitter on
/// discrete distributions, breaking ties for the quantile machinery.
pub fn sample_matrix_jittered(
    spec: &DistributionSpec,
    n: usize,
    seed: u64,
    jitter: bool,
) -> Result<DenseMatrix> {
    spec.validate()?;
    if n == 0 {
        return Err(MatregError::InvalidParameter(
            "matrix dimension must be at least 1".into(),
        ));
    }
    let mut entries = Vec::with_capacity(n * n);
    for idx in 0..(n * n) as u64 {
        entries.push(spec.sample_entry(n, seed, idx * 4, jitter));
    }
    DenseMatrix::new(n, n, entries)
}

/// Empirical entry moments, for experiment logs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mean: f64,
    pub second_moment: f64,
    pub fourth_moment: f64,
    pub max_abs: f64,
}

pub fn moment_summary(a: &DenseMatrix) -> MomentSummary {
    let count = a.entries().len() as f64;
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    let mut sum4 = 0.0;
    let mut max_abs = 0.0f64;
    for &v in a.entries() {
        sum += v;
        let v2 = v * v;
        sum2 += v2;
        sum4 += v2 * v2;
        max_abs = max_abs.max(v.abs());
    }
    MomentSummary {
        mean: sum / count,
        second_moment: sum2 / count,
        fourth_moment: sum4 / count,
        max_abs,
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DistributionSpec::Gaussian { mean, variance } => {
                write!(f, "gaussian:mean={mean},variance={variance}")
            }
            DistributionSpec::SparseSign { p } => write!(f, "sparse_sign:p={p}"),
            DistributionSpec::SparseBig => write!(f, "sparse_big"),
            DistributionSpec::ParetoSym { alpha } => write!(f, "pareto_sym:alpha={alpha}"),
            DistributionSpec::ShiftedGaussian { mu } => write!(f, "shifted_gaussian:mu={mu}"),
        }
    }
}

impl FromStr for DistributionSpec {
    type Err = MatregError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| MatregError::InvalidParameter(format!("{msg} in spec '{s}'"));
        let (name, rest) = match s.split_once(':') {
            Some((n, r)) => (n, Some(r)),
            None => (s, None),
        };
        let mut kv = std::collections::BTreeMap::new();
        if let Some(rest) = rest {
            for part in rest.split(',') {
                let (k, v) = part
                    .split_once('=')
                    .ok_or_else(|| bad("expected key=value"))?;
                let val: f64 = v
                    .parse()
                    .map_err(|_| bad(&format!("bad number '{v}'")))?;
                kv.insert(k.trim().to_string(), val);
            }
        }
        let get = |key: &str| -> Result<f64> {
            kv.get(key)
                .copied()
                .ok_or_else(|| bad(&format!("missing parameter '{key}'")))
        };
        let spec = match name.trim() {
            "gaussian" => DistributionSpec::Gaussian {
                mean: kv.get("mean").copied().unwrap_or(0.0),
                variance: kv.get("variance").copied().unwrap_or(1.0),
            },
            "sparse_sign" => DistributionSpec::SparseSign { p: get("p")? },
            "sparse_big" => DistributionSpec::SparseBig,
            "pareto_sym" => DistributionSpec::ParetoSym { alpha: get("alpha")? },
            "shifted_gaussian" => DistributionSpec::ShiftedGaussian { mu: get("mu")? },
            other => return Err(bad(&format!("unknown distribution '{other}'"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}
