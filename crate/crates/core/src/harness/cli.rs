//! Command line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime failure.

use crate::error::Result;
use crate::harness::experiment::{
    run_experiment, summarize, write_csv, write_json, ExperimentConfig, ExperimentKind,
};
use crate::harness::io::{load_matrix, save_matrix};
use crate::lowerbound::{frobenius_lower, mean_sum_lower, min_submatrix_frobenius_lower,
    optimality_witness};
use crate::matcore::NormReport;
use crate::randgen::{moment_summary, sample_matrix, DistributionSpec};
use crate::reglab::{regularize_full, topk_truncate, Budgets};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::ffi::OsString;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "matreg", version, about = "Heavy-tailed random matrix regularization toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct BudgetArgs {
    /// Iteration budget for the column-weight optimizer
    #[arg(long, default_value_t = Budgets::default().pietsch_iters)]
    budget_iters: usize,
    /// Relative tolerance for iterative norm estimates
    #[arg(long, default_value_t = Budgets::default().rel_tol)]
    rel_tol: f64,
}

impl BudgetArgs {
    fn budgets(&self) -> Budgets {
        Budgets {
            pietsch_iters: self.budget_iters,
            rel_tol: self.rel_tol,
            ..Budgets::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample a random matrix and write it to a file
    Gen {
        /// Distribution, e.g. gaussian:mean=0,variance=1 | pareto_sym:alpha=2.1
        /// | sparse_sign:p=0.01 | sparse_big | shifted_gaussian:mu=0.5
        #[arg(long)]
        spec: DistributionSpec,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path; .csv writes text, anything else the binary format
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the norm report of a matrix file
    Norms {
        matrix: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Run the full regularization pipeline
    Regularize {
        matrix: PathBuf,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output matrix path; a JSON report lands next to it
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Zero all entries above the truncation level n^{1/2 - eps/8}
    Truncate {
        matrix: PathBuf,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Lower-bound certificates: for a matrix file, or the sparse witness
    Certify {
        /// Matrix file; omit to run the synthetic witness instead
        matrix: Option<PathBuf>,
        #[arg(long)]
        eps: f64,
        /// Witness dimension (only without a matrix file)
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a Monte Carlo experiment grid and write per-trial results
    Experiment {
        /// scaling | optimality | global | twoplus | bernoulli
        #[arg(long)]
        experiment: ExperimentKind,
        /// Override the default distribution for this experiment
        #[arg(long)]
        spec: Option<DistributionSpec>,
        /// Override dimensions (repeatable)
        #[arg(long = "n")]
        n_list: Vec<usize>,
        /// Override eps values (repeatable)
        #[arg(long = "eps")]
        eps_list: Vec<f64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        format: OutputFormat,
        #[command(flatten)]
        budget: BudgetArgs,
    },
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Gen { spec, n, seed, out } => {
            let a = sample_matrix(&spec, n, seed)?;
            save_matrix(&a, &out)?;
            let m = moment_summary(&a);
            println!(
                "wrote {} ({n}x{n}, spec {spec}, seed {seed})",
                out.display()
            );
            println!(
                "mean {:.6e}  second_moment {:.6e}  max_abs {:.6e}",
                m.mean, m.second_moment, m.max_abs
            );
            Ok(())
        }
        Command::Norms {
            matrix,
            seed,
            budget,
        } => {
            let a = load_matrix(&matrix)?;
            let b = budget.budgets();
            let report = NormReport::compute(&a, b.rel_tol, b.inf_to_two_restarts, seed)?;
            print_norms(&report);
            Ok(())
        }
        Command::Regularize {
            matrix,
            eps,
            seed,
            out,
            budget,
        } => {
            let a = load_matrix(&matrix)?;
            let (atilde, report) = regularize_full(&a, eps, &budget.budgets(), seed)?;
            save_matrix(&atilde, &out)?;
            let report_path = out.with_extension("json");
            let body = serde_json::to_string_pretty(&report).map_err(|e| {
                crate::error::MatregError::InvalidParameter(format!("serialize: {e}"))
            })?;
            std::fs::write(&report_path, body).map_err(|e| crate::error::MatregError::Io {
                path: report_path.display().to_string(),
                source: e,
            })?;
            println!(
                "removed {} rows, {} cols; op norm {:.6e} -> {:.6e}",
                report.mask.rows.len(),
                report.mask.cols.len(),
                report.norms_before.op,
                report.norms_after.op
            );
            for f in &report.failures {
                println!(
                    "band failure [{}]: {} (limit {})",
                    f.stage, f.detail, f.limit
                );
            }
            println!("wrote {} and {}", out.display(), report_path.display());
            Ok(())
        }
        Command::Truncate { matrix, eps, out } => {
            let a = load_matrix(&matrix)?;
            let res = topk_truncate(&a, eps)?;
            save_matrix(&res.atilde, &out)?;
            println!(
                "level {:.6e}: zeroed {} entries (budget {:.1}, within {})",
                res.r, res.k_actual, res.k_budget, res.within_budget
            );
            Ok(())
        }
        Command::Certify {
            matrix,
            eps,
            n,
            seed,
        } => {
            match matrix {
                Some(path) => {
                    let a = load_matrix(&path)?;
                    println!("mean_sum_lower = {:.16e}", mean_sum_lower(&a)?);
                    println!("frobenius_lower = {:.16e}", frobenius_lower(&a)?);
                    let cert = min_submatrix_frobenius_lower(&a, eps)?;
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&cert).map_err(|e| {
                            crate::error::MatregError::InvalidParameter(format!(
                                "serialize: {e}"
                            ))
                        })?
                    );
                }
                None => {
                    let n = n.ok_or_else(|| {
                        crate::error::MatregError::InvalidParameter(
                            "certify needs a matrix file or --n for the witness".into(),
                        )
                    })?;
                    let cert = optimality_witness(n, eps, seed)?;
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&cert).map_err(|e| {
                            crate::error::MatregError::InvalidParameter(format!(
                                "serialize: {e}"
                            ))
                        })?
                    );
                }
            }
            Ok(())
        }
        Command::Experiment {
            experiment,
            spec,
            n_list,
            eps_list,
            trials,
            seed,
            out,
            format,
            budget,
        } => {
            let mut cfg = ExperimentConfig::defaults(experiment);
            if let Some(spec) = spec {
                cfg.spec = spec;
            }
            if !n_list.is_empty() {
                cfg.n_list = n_list;
            }
            if !eps_list.is_empty() {
                cfg.eps_list = eps_list;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            cfg.master_seed = seed;
            cfg.budgets = budget.budgets();
            let rows = run_experiment(&cfg)?;
            match format {
                OutputFormat::Csv => write_csv(&rows, &out)?,
                OutputFormat::Json => write_json(&rows, &out)?,
            }
            let failed = rows.iter().filter(|r| !r.success).count();
            println!(
                "{} rows ({failed} unsuccessful) -> {}",
                rows.len(),
                out.display()
            );
            for cell in summarize(&rows) {
                let meds: Vec<String> = cell
                    .medians
                    .iter()
                    .map(|(k, v)| format!("{k}={v:.4e}"))
                    .collect();
                println!(
                    "n={} eps={} trials={}: {}",
                    cell.n,
                    cell.eps,
                    cell.trials,
                    meds.join(" ")
                );
            }
            Ok(())
        }
    }
}

fn print_norms(r: &NormReport) {
    println!("op = {:.16e}", r.op);
    println!("two_to_inf = {:.16e}", r.two_to_inf);
    println!(
        "inf_to_two = {:.16e} ({})",
        r.inf_to_two,
        if r.inf_to_two_is_exact {
            "exact"
        } else {
            "lower estimate"
        }
    );
    println!("frobenius = {:.16e}", r.frobenius);
    println!("schur = {:.16e}", r.schur);
    println!("l1_row_max = {:.16e}", r.l1_row_max);
    println!("l1_col_max = {:.16e}", r.l1_col_max);
}
