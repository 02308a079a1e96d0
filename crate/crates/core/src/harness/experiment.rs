//! Monte Carlo experiment drivers with deterministic, parallel-safe seeding.

use crate::damping::level_parameter;
use crate::error::{MatregError, Result};
use crate::lowerbound::{frobenius_lower, mean_sum_lower, min_submatrix_frobenius_lower,
    optimality_witness};
use crate::matcore::{op_norm, schur_bound, zero_submatrix};
use crate::randgen::{sample_matrix, stateless_u64, DistributionSpec};
use crate::reglab::{band_matrix, classify_entries, regularize_full, regularize_moderate,
    topk_truncate, Budgets};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Scaling,
    Optimality,
    Global,
    Twoplus,
    Bernoulli,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ExperimentKind::Scaling => "scaling",
            ExperimentKind::Optimality => "optimality",
            ExperimentKind::Global => "global",
            ExperimentKind::Twoplus => "twoplus",
            ExperimentKind::Bernoulli => "bernoulli",
        };
        f.write_str(s)
    }
}

impl FromStr for ExperimentKind {
    type Err = MatregError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scaling" => Ok(ExperimentKind::Scaling),
            "optimality" => Ok(ExperimentKind::Optimality),
            "global" => Ok(ExperimentKind::Global),
            "twoplus" => Ok(ExperimentKind::Twoplus),
            "bernoulli" => Ok(ExperimentKind::Bernoulli),
            other => Err(MatregError::InvalidParameter(format!(
                "unknown experiment '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub spec: DistributionSpec,
    pub n_list: Vec<usize>,
    pub eps_list: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    pub budgets: Budgets,
}

impl ExperimentConfig {
    /// Grid defaults sized to run in minutes on a laptop.
    pub fn defaults(experiment: ExperimentKind) -> Self {
        let (spec, n_list, eps_list, trials) = match experiment {
            ExperimentKind::Scaling => (
                DistributionSpec::ParetoSym { alpha: 2.05 },
                vec![1024],
                vec![0.02, 0.05, 0.1, 0.2, 0.3],
                30,
            ),
            ExperimentKind::Optimality => (
                DistributionSpec::SparseSign { p: 1e-4 },
                vec![1000],
                vec![0.05],
                10,
            ),
            ExperimentKind::Global => (
                DistributionSpec::ParetoSym { alpha: 1.5 },
                vec![256, 2048],
                vec![0.1],
                50,
            ),
            ExperimentKind::Twoplus => (
                DistributionSpec::ParetoSym { alpha: 3.5 },
                vec![2000],
                vec![1.0],
                50,
            ),
            ExperimentKind::Bernoulli => {
                (DistributionSpec::SparseBig, vec![1024], vec![0.1], 100)
            }
        };
        Self {
            experiment,
            spec,
            n_list,
            eps_list,
            trials,
            master_seed: 0,
            budgets: Budgets::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(MatregError::InvalidParameter("trials must be >= 1".into()));
        }
        if self.n_list.is_empty() || self.eps_list.is_empty() {
            return Err(MatregError::InvalidParameter(
                "need at least one n and one eps".into(),
            ));
        }
        let hi = match self.experiment {
            ExperimentKind::Scaling => 1.0 / 3.0,
            ExperimentKind::Twoplus => 1.0,
            _ => 0.5,
        };
        for &eps in &self.eps_list {
            if !(eps > 0.0 && eps <= hi) {
                return Err(MatregError::InvalidParameter(format!(
                    "eps {eps} outside (0, {hi}] for {}",
                    self.experiment
                )));
            }
        }
        self.spec.validate()
    }
}

/// One (n, eps, trial) cell result. Metric names and order are fixed per
/// experiment. Wall time is informational and kept out of the CSV so output
/// bytes depend only on (config, master seed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub n: usize,
    pub eps: f64,
    pub trial: usize,
    pub seed: u64,
    pub success: bool,
    pub metrics: Vec<(String, f64)>,
    pub wall_time_ms: f64,
}

impl ResultRow {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| *v)
    }
}

/// Seed for one trial; independent of eps so the same matrix is reused across
/// eps cells.
pub fn trial_seed(master: u64, n: usize, trial: usize) -> u64 {
    stateless_u64(stateless_u64(master, n as u64), trial as u64)
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn run_trial(cfg: &ExperimentConfig, n: usize, eps: f64, trial: usize) -> ResultRow {
    let seed = trial_seed(cfg.master_seed, n, trial);
    let start = Instant::now();
    let (success, metrics) = match cfg.experiment {
        ExperimentKind::Scaling => scaling_trial(cfg, n, eps, seed),
        ExperimentKind::Optimality => optimality_trial(n, eps, seed),
        ExperimentKind::Global => global_trial(cfg, n, eps, seed),
        ExperimentKind::Twoplus => twoplus_trial(cfg, n, eps, seed),
        ExperimentKind::Bernoulli => bernoulli_trial(cfg, n, eps, seed),
    };
    ResultRow {
        experiment: cfg.experiment.to_string(),
        n,
        eps,
        trial,
        seed,
        success,
        metrics,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    }
}

fn scaling_fit_denominator(n: usize, eps: f64) -> f64 {
    (n as f64).sqrt() * (1.0 / eps).ln() / eps.sqrt()
}

fn scaling_trial(
    cfg: &ExperimentConfig,
    n: usize,
    eps: f64,
    seed: u64,
) -> (bool, Vec<(String, f64)>) {
    let a = match sample_matrix(&cfg.spec, n, seed) {
        Ok(a) => a,
        Err(_) => return (false, Vec::new()),
    };
    match regularize_full(&a, eps, &cfg.budgets, seed) {
        Ok((_, report)) => {
            let op_after = report.norms_after.op;
            let metrics = vec![
                ("op_before".into(), report.norms_before.op),
                ("op_after".into(), op_after),
                ("op_after_over_sqrt_n".into(), op_after / (n as f64).sqrt()),
                (
                    "fit_ratio".into(),
                    op_after / scaling_fit_denominator(n, eps),
                ),
                ("mask_rows".into(), report.mask.rows.len() as f64),
                ("mask_cols".into(), report.mask.cols.len() as f64),
                ("p_hat".into(), report.p_hat),
                ("mean_shift_norm".into(), report.mean_shift_norm),
                ("band_failures".into(), report.failures.len() as f64),
            ];
            (report.failures.is_empty(), metrics)
        }
        Err(_) => (false, Vec::new()),
    }
}

fn optimality_trial(n: usize, eps: f64, seed: u64) -> (bool, Vec<(String, f64)>) {
    match optimality_witness(n, eps, seed) {
        Ok(cert) => {
            let metrics = vec![
                ("value".into(), cert.value),
                ("conclusive".into(), flag(cert.conclusive)),
                (
                    "nonzero_rows".into(),
                    cert.details.nonzero_rows.unwrap_or(0) as f64,
                ),
                (
                    "nonzero_cols".into(),
                    cert.details.nonzero_cols.unwrap_or(0) as f64,
                ),
                (
                    "nonzero_entries".into(),
                    cert.details.nonzero_entries.unwrap_or(0) as f64,
                ),
            ];
            (true, metrics)
        }
        Err(_) => (false, Vec::new()),
    }
}

fn global_trial(
    cfg: &ExperimentConfig,
    n: usize,
    eps: f64,
    seed: u64,
) -> (bool, Vec<(String, f64)>) {
    let a = match sample_matrix(&cfg.spec, n, seed) {
        Ok(a) => a,
        Err(_) => return (false, Vec::new()),
    };
    let sqrt_n = (n as f64).sqrt();
    let mean = mean_sum_lower(&a).unwrap_or(f64::NAN);
    let fro = frobenius_lower(&a).unwrap_or(f64::NAN);
    let min_sub = match min_submatrix_frobenius_lower(&a, eps) {
        Ok(c) => c.value,
        Err(_) => return (false, Vec::new()),
    };
    let metrics = vec![
        ("mean_sum_lower".into(), mean),
        ("frobenius_lower".into(), fro),
        ("min_submatrix_frobenius_lower".into(), min_sub),
        ("mean_sum_over_sqrt_n".into(), mean / sqrt_n),
        ("min_submatrix_over_sqrt_n".into(), min_sub / sqrt_n),
    ];
    (true, metrics)
}

/// Rescale so the entry third absolute moment is at most 1, where closed-form
/// moments exist.
fn third_moment_scale(spec: &DistributionSpec) -> f64 {
    match *spec {
        DistributionSpec::ParetoSym { alpha } if alpha > 3.0 => {
            let s = ((alpha - 2.0) / alpha).sqrt();
            let third = s.powi(3) * alpha / (alpha - 3.0);
            third.powf(-1.0 / 3.0).min(1.0)
        }
        _ => 1.0,
    }
}

fn twoplus_trial(
    cfg: &ExperimentConfig,
    n: usize,
    moment_eps: f64,
    seed: u64,
) -> (bool, Vec<(String, f64)>) {
    let a = match sample_matrix(&cfg.spec, n, seed) {
        Ok(a) => a.scaled(third_moment_scale(&cfg.spec)),
        Err(_) => return (false, Vec::new()),
    };
    match topk_truncate(&a, moment_eps) {
        Ok(out) => {
            let op_after = op_norm(&out.atilde, cfg.budgets.rel_tol).unwrap_or(f64::NAN);
            let sqrt_n = (n as f64).sqrt();
            let bvh_ok = op_after <= 9.0 * sqrt_n;
            let metrics = vec![
                ("r".into(), out.r),
                ("k_actual".into(), out.k_actual as f64),
                ("k_budget".into(), out.k_budget),
                ("within_budget".into(), flag(out.within_budget)),
                ("op_after".into(), op_after),
                ("op_after_over_sqrt_n".into(), op_after / sqrt_n),
                ("bvh_ok".into(), flag(bvh_ok)),
            ];
            (out.within_budget && bvh_ok, metrics)
        }
        Err(_) => (false, Vec::new()),
    }
}

fn bernoulli_trial(
    cfg: &ExperimentConfig,
    n: usize,
    eps: f64,
    seed: u64,
) -> (bool, Vec<(String, f64)>) {
    let a = match sample_matrix(&cfg.spec, n, seed) {
        Ok(a) => a,
        Err(_) => return (false, Vec::new()),
    };
    let split = match classify_entries(&a, eps) {
        Ok(s) => s,
        Err(_) => return (false, Vec::new()),
    };
    let am = band_matrix(&a, &split.moderate);
    match regularize_moderate(&am, eps) {
        Ok(out) => {
            let kept = zero_submatrix(&am, &out.band.mask).unwrap();
            let schur_after = schur_bound(&kept);
            let pred = split.t2
                * (21.0 * out.p_hat * n as f64 + 4.0 * (1.0 / eps).ln());
            let ok = out.band.failure.is_none() && schur_after <= pred;
            let metrics = vec![
                ("p_hat".into(), out.p_hat),
                ("flag_threshold".into(), out.flag_threshold),
                ("mask_rows".into(), out.band.mask.rows.len() as f64),
                ("mask_cols".into(), out.band.mask.cols.len() as f64),
                ("schur_after".into(), schur_after),
                ("schur_pred".into(), pred),
                ("level_l".into(), level_parameter(eps, 1.0)),
            ];
            (ok, metrics)
        }
        Err(_) => (false, Vec::new()),
    }
}

/// Runs the whole (n, eps, trial) grid, in parallel across trials, and
/// returns rows sorted by (n, eps, trial). Identical (config, master seed)
/// give identical rows regardless of thread count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let mut grid = Vec::new();
    for &n in &cfg.n_list {
        for &eps in &cfg.eps_list {
            for trial in 0..cfg.trials {
                grid.push((n, eps, trial));
            }
        }
    }
    let pool = build_pool()?;
    let mut rows: Vec<ResultRow> = pool.install(|| {
        grid.par_iter()
            .map(|&(n, eps, trial)| run_trial(cfg, n, eps, trial))
            .collect()
    });
    rows.sort_by(|a, b| {
        a.n.cmp(&b.n)
            .then(a.eps.partial_cmp(&b.eps).unwrap())
            .then(a.trial.cmp(&b.trial))
    });
    Ok(rows)
}

fn build_pool() -> Result<rayon::ThreadPool> {
    let threads = std::env::var("MATREG_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| MatregError::InvalidParameter(format!("thread pool: {e}")))
}

/// Per-cell medians of every metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub n: usize,
    pub eps: f64,
    pub trials: usize,
    pub medians: Vec<(String, f64)>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mid = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[mid]
    } else {
        0.5 * (xs[mid - 1] + xs[mid])
    }
}

pub fn summarize(rows: &[ResultRow]) -> Vec<CellSummary> {
    let mut cells: Vec<(usize, f64)> = Vec::new();
    for r in rows {
        if !cells.contains(&(r.n, r.eps)) {
            cells.push((r.n, r.eps));
        }
    }
    cells.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.partial_cmp(&b.1).unwrap()));
    cells
        .into_iter()
        .map(|(n, eps)| {
            let cell_rows: Vec<&ResultRow> =
                rows.iter().filter(|r| r.n == n && r.eps == eps).collect();
            let names: Vec<String> = cell_rows
                .iter()
                .find(|r| !r.metrics.is_empty())
                .map(|r| r.metrics.iter().map(|(k, _)| k.clone()).collect())
                .unwrap_or_default();
            let medians = names
                .iter()
                .map(|name| {
                    let vals: Vec<f64> = cell_rows
                        .iter()
                        .filter_map(|r| r.metric(name))
                        .collect();
                    (name.clone(), median(vals))
                })
                .collect();
            CellSummary {
                n,
                eps,
                trials: cell_rows.len(),
                medians,
            }
        })
        .collect()
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV with a fixed header, one row per trial, then `#`-prefixed per-cell
/// median lines.
pub fn render_csv(rows: &[ResultRow]) -> String {
    let mut out = Vec::new();
    let metric_names: Vec<String> = rows
        .iter()
        .find(|r| !r.metrics.is_empty())
        .map(|r| r.metrics.iter().map(|(k, _)| k.clone()).collect())
        .unwrap_or_default();
    let mut header = vec![
        "experiment".to_string(),
        "n".to_string(),
        "eps".to_string(),
        "trial".to_string(),
        "seed".to_string(),
        "success".to_string(),
    ];
    header.extend(metric_names.iter().cloned());
    writeln!(out, "{}", header.join(",")).unwrap();
    for r in rows {
        let mut fields = vec![
            r.experiment.clone(),
            r.n.to_string(),
            fmt_f64(r.eps),
            r.trial.to_string(),
            r.seed.to_string(),
            (r.success as u8).to_string(),
        ];
        for name in &metric_names {
            fields.push(fmt_f64(r.metric(name).unwrap_or(f64::NAN)));
        }
        writeln!(out, "{}", fields.join(",")).unwrap();
    }
    for cell in summarize(rows) {
        let meds: Vec<String> = cell
            .medians
            .iter()
            .map(|(k, v)| format!("median_{k}={}", fmt_f64(*v)))
            .collect();
        writeln!(
            out,
            "# cell n={} eps={} trials={} {}",
            cell.n,
            fmt_f64(cell.eps),
            cell.trials,
            meds.join(" ")
        )
        .unwrap();
    }
    String::from_utf8(out).unwrap()
}

pub fn write_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    std::fs::write(path, render_csv(rows)).map_err(|e| MatregError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn write_json(rows: &[ResultRow], path: &Path) -> Result<()> {
    let body = serde_json::to_string_pretty(rows)
        .map_err(|e| MatregError::InvalidParameter(format!("serialize: {e}")))?;
    std::fs::write(path, body).map_err(|e| MatregError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn optimality_defaults_run_and_certify() {
        let mut cfg = ExperimentConfig::defaults(ExperimentKind::Optimality);
        cfg.master_seed = 3;
        let rows = run_experiment(&cfg).unwrap();
        assert_eq!(rows.len(), 10);
        for r in &rows {
            if r.metric("conclusive") == Some(1.0) {
                assert!((r.metric("value").unwrap() - 100.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rows_are_replayable_from_seed() {
        let mut cfg = ExperimentConfig::defaults(ExperimentKind::Global);
        cfg.n_list = vec![64];
        cfg.trials = 10;
        cfg.master_seed = 5;
        let rows = run_experiment(&cfg).unwrap();
        for r in rows.iter().take(10) {
            let replay = run_trial(&cfg, r.n, r.eps, r.trial);
            assert_eq!(replay.seed, r.seed);
            assert_eq!(replay.metrics, r.metrics);
        }
    }

    #[test]
    fn csv_deterministic_across_runs() {
        let mut cfg = ExperimentConfig::defaults(ExperimentKind::Bernoulli);
        cfg.n_list = vec![128];
        cfg.trials = 8;
        cfg.master_seed = 11;
        let a = render_csv(&run_experiment(&cfg).unwrap());
        let b = render_csv(&run_experiment(&cfg).unwrap());
        assert_eq!(a, b);
        assert!(a.starts_with("experiment,n,eps,trial,seed,success,"));
        assert!(a.contains("# cell n=128"));
    }

    #[test]
    fn median_helper() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(vec![]).is_nan());
    }
}
