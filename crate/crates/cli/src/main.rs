//! `decouple`: two-stage sparse regression from the command line.
//!
//! Typical flow: `simulate` (or bring your own CSV) -> `fit` a posterior ->
//! `path` or `apm` to build a sparsity path -> `select` one estimate ->
//! `eval` against held-out data; `bench` runs the whole replicated study.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use decouple_cli::commands::{self, Preprocess};
use decouple_cli::CliResult;

#[derive(Parser)]
#[command(name = "decouple", version, about = "Sparse regression by posterior decoupling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct PreprocessArg {
    /// Column transform applied after loading: center|unit-norm|none
    #[arg(long, default_value = "center")]
    preprocess: String,
}

impl PreprocessArg {
    fn parse(&self) -> CliResult<Preprocess> {
        Preprocess::parse(&self.preprocess)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic train/truth/test CSVs under an equicorrelated design
    Simulate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
        #[arg(long)]
        k: usize,
        /// Signal value of the k nonzero coefficients
        #[arg(long)]
        s: f64,
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        seed: u64,
        /// Test rows to emit (defaults to n)
        #[arg(long)]
        test_n: Option<usize>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Sample a posterior and write draws.csv plus a fit.json sidecar
    Fit {
        #[arg(long)]
        data: PathBuf,
        /// ss (spike-and-slab) or hs (horseshoe)
        #[arg(long)]
        prior: String,
        #[arg(long, default_value_t = decouple_core::spikeslab::DEFAULT_DRAWS)]
        draws: usize,
        #[arg(long, default_value_t = decouple_core::spikeslab::DEFAULT_BURNIN)]
        burnin: usize,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        preprocess: PreprocessArg,
        #[arg(long, default_value = "fit.json")]
        out: PathBuf,
        #[arg(long, default_value = "draws.csv")]
        draws_out: PathBuf,
    },
    /// Weighted-lasso solution path over the smoothed target
    Path {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        fit: PathBuf,
        /// Draws CSV (needed for fd/is penalties; defaults to draws.csv next to the fit)
        #[arg(long)]
        draws: Option<PathBuf>,
        /// l1, fd, or is
        #[arg(long)]
        penalty: String,
        /// Stabilizer for the is penalty
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        #[arg(long, default_value_t = decouple_core::wlasso::DEFAULT_GRID)]
        grid: usize,
        /// posterior-mean or raw-y
        #[arg(long, default_value = "posterior-mean")]
        target: String,
        #[command(flatten)]
        preprocess: PreprocessArg,
        #[arg(long, default_value = "path.json")]
        out: PathBuf,
        /// Optional flat CSV emission (grid point x coordinate)
        #[arg(long)]
        csv_out: Option<PathBuf>,
    },
    /// Nested models by descending inclusion probability
    Apm {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        fit: PathBuf,
        #[arg(long)]
        draws: Option<PathBuf>,
        /// Cap on the densest model
        #[arg(long)]
        max_size: Option<usize>,
        #[command(flatten)]
        preprocess: PreprocessArg,
        #[arg(long, default_value = "apm.json")]
        out: PathBuf,
    },
    /// Pick one estimate from a path by posterior benchmarking or local fdr
    Select {
        #[arg(long)]
        data: PathBuf,
        /// path.json or apm.json
        #[arg(long)]
        path: PathBuf,
        #[arg(long)]
        draws: PathBuf,
        #[arg(long)]
        fit: PathBuf,
        /// benchmark or fdr
        #[arg(long, default_value = "benchmark")]
        rule: String,
        #[arg(long, default_value_t = decouple_core::select::DEFAULT_COVERAGE)]
        coverage: f64,
        #[arg(long, default_value_t = decouple_core::select::DEFAULT_FDR_THRESHOLD)]
        fdr_threshold: f64,
        #[command(flatten)]
        preprocess: PreprocessArg,
        #[arg(long, default_value = "est.json")]
        est_out: PathBuf,
        #[arg(long, default_value = "report.json")]
        report_out: PathBuf,
    },
    /// Cross-validated lasso or iteratively reweighted l1
    Baseline {
        #[arg(long)]
        data: PathBuf,
        /// lasso or iter-l1
        #[arg(long)]
        method: String,
        #[arg(long, default_value_t = decouple_core::baselines::DEFAULT_FOLDS)]
        folds: usize,
        #[arg(long, default_value_t = decouple_core::baselines::DEFAULT_ITERS)]
        iters: usize,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        preprocess: PreprocessArg,
        #[arg(long, default_value = "baseline.json")]
        out: PathBuf,
    },
    /// Score an estimate on held-out data
    Eval {
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long, default_value = "metrics.json")]
        out: PathBuf,
    },
    /// Replicated experiment grid from a JSON config
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Worker threads for replicate-level parallelism
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
    },
}

fn default_jobs() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate {
            n,
            p,
            k,
            s,
            rho,
            seed,
            test_n,
            out_dir,
        } => commands::cmd_simulate(&commands::SimulateArgs {
            n,
            p,
            k,
            s,
            rho,
            seed,
            test_n,
            out_dir,
        }),
        Command::Fit {
            data,
            prior,
            draws,
            burnin,
            seed,
            preprocess,
            out,
            draws_out,
        } => commands::cmd_fit(&commands::FitArgs {
            data,
            prior,
            draws,
            burnin,
            seed,
            preprocess: preprocess.parse()?,
            out,
            draws_out,
        }),
        Command::Path {
            data,
            fit,
            draws,
            penalty,
            eps,
            grid,
            target,
            preprocess,
            out,
            csv_out,
        } => commands::cmd_path(&commands::PathArgs {
            data,
            fit,
            draws,
            penalty,
            eps,
            grid,
            target,
            preprocess: preprocess.parse()?,
            out,
            csv_out,
        }),
        Command::Apm {
            data,
            fit,
            draws,
            max_size,
            preprocess,
            out,
        } => commands::cmd_apm(&commands::ApmArgs {
            data,
            fit,
            draws,
            max_size,
            preprocess: preprocess.parse()?,
            out,
        }),
        Command::Select {
            data,
            path,
            draws,
            fit,
            rule,
            coverage,
            fdr_threshold,
            preprocess,
            est_out,
            report_out,
        } => commands::cmd_select(&commands::SelectArgs {
            data,
            path,
            draws,
            fit,
            rule,
            coverage,
            fdr_threshold,
            preprocess: preprocess.parse()?,
            est_out,
            report_out,
        }),
        Command::Baseline {
            data,
            method,
            folds,
            iters,
            seed,
            preprocess,
            out,
        } => commands::cmd_baseline(&commands::BaselineArgs {
            data,
            method,
            folds,
            iters,
            seed,
            preprocess: preprocess.parse()?,
            out,
        }),
        Command::Eval {
            estimate,
            test,
            truth,
            out,
        } => commands::cmd_eval(&commands::EvalArgs {
            estimate,
            test,
            truth,
            out,
        }),
        Command::Bench {
            config,
            out_dir,
            jobs,
        } => commands::cmd_bench(&commands::BenchArgs {
            config,
            out_dir,
            jobs,
        }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
