//! Implementations behind the `decouple` subcommands.

use std::path::{Path, PathBuf};

use decouple_core::data::{self, SimConfig};
use decouple_core::horseshoe::sample_hs;
use decouple_core::metrics;
use decouple_core::select::{
    apm_path, select_benchmark_with_spread, select_fdr, PredictionSpread,
};
use decouple_core::spikeslab::sample_ss;
use decouple_core::weights::{fd_weights, is_weights, unit_weights, CoefDraws, PenaltyKind};
use decouple_core::wlasso::{self, TargetKind};
use decouple_core::Dataset;

use crate::dataio;
use crate::experiment::{self, ExperimentConfig};
use crate::fitio::{self, FitSidecar, LoadedDraws};
use crate::manifest::{manifest_path_for, ManifestBuilder};
use crate::schemas::{
    self, parse_penalty, parse_target, write_json, EstimateFile, LoadedPath, MetricsFile,
    PathFile, ReportFile,
};
use crate::{invalid, CliError, CliResult};

/// Column transform applied after loading a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preprocess {
    Center,
    UnitNorm,
    None,
}

impl Preprocess {
    pub fn parse(name: &str) -> CliResult<Self> {
        match name {
            "center" => Ok(Preprocess::Center),
            "unit-norm" => Ok(Preprocess::UnitNorm),
            "none" => Ok(Preprocess::None),
            other => invalid(format!(
                "unknown preprocess {other:?} (expected center|unit-norm|none)"
            )),
        }
    }

    pub fn apply(&self, ds: &Dataset) -> CliResult<Dataset> {
        Ok(match self {
            Preprocess::Center => data::center(ds)?,
            Preprocess::UnitNorm => data::standardize_unit_norm(ds)?,
            Preprocess::None => ds.clone(),
        })
    }
}

pub struct SimulateArgs {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub s: f64,
    pub rho: f64,
    pub seed: u64,
    pub test_n: Option<usize>,
    pub out_dir: PathBuf,
}

pub fn cmd_simulate(a: &SimulateArgs) -> CliResult<()> {
    let cfg = SimConfig {
        n: a.n,
        p: a.p,
        k: a.k,
        s_star: a.s,
        rho: a.rho,
        seed: a.seed,
    };
    let ds = data::generate_synthetic(cfg)?;
    let test = data::generate_test_set(cfg, a.test_n.unwrap_or(a.n))?;
    std::fs::create_dir_all(&a.out_dir)
        .map_err(|e| CliError::Io(format!("create {}: {e}", a.out_dir.display())))?;
    let data_path = a.out_dir.join("data.csv");
    let truth_path = a.out_dir.join("truth.csv");
    let test_path = a.out_dir.join("test.csv");
    dataio::save_csv(&ds, &data_path)?;
    dataio::save_truth(ds.truth.as_ref().expect("synthetic truth"), &truth_path)?;
    dataio::save_csv(&test, &test_path)?;
    let mut m = ManifestBuilder::new("simulate");
    m.seed(a.seed);
    m.output(&data_path).output(&truth_path).output(&test_path);
    m.write(&a.out_dir.join("manifest.json"))
}

pub struct FitArgs {
    pub data: PathBuf,
    pub prior: String,
    pub draws: usize,
    pub burnin: usize,
    pub seed: u64,
    pub preprocess: Preprocess,
    pub out: PathBuf,
    pub draws_out: PathBuf,
}

pub fn cmd_fit(a: &FitArgs) -> CliResult<()> {
    let ds = a.preprocess.apply(&dataio::load_csv(&a.data, None)?)?;
    let sidecar = match a.prior.as_str() {
        "ss" => {
            let fit = sample_ss(&ds, a.draws, a.burnin, a.seed)?;
            fitio::write_ss_draws(&fit, &a.draws_out)?;
            FitSidecar::from_ss(&fit)
        }
        "hs" => {
            let fit = sample_hs(&ds, a.draws, a.burnin, a.seed)?;
            fitio::write_hs_draws(&fit, &a.draws_out)?;
            FitSidecar::from_hs(&fit)
        }
        other => return invalid(format!("unknown prior {other:?} (expected ss|hs)")),
    };
    fitio::write_sidecar(&sidecar, &a.out)?;
    let mut m = ManifestBuilder::new("fit");
    m.seed(a.seed);
    m.input(&a.data)?;
    m.output(&a.out).output(&a.draws_out);
    m.write(&manifest_path_for(&a.out))
}

pub struct PathArgs {
    pub data: PathBuf,
    pub fit: PathBuf,
    pub draws: Option<PathBuf>,
    pub penalty: String,
    pub eps: f64,
    pub grid: usize,
    pub target: String,
    pub preprocess: Preprocess,
    pub out: PathBuf,
    pub csv_out: Option<PathBuf>,
}

pub fn cmd_path(a: &PathArgs) -> CliResult<()> {
    let ds = a.preprocess.apply(&dataio::load_csv(&a.data, None)?)?;
    let sidecar = fitio::read_sidecar(&a.fit)?;
    if sidecar.post_mean.len() != ds.p() {
        return invalid(format!(
            "fit has p = {} but data has p = {}",
            sidecar.post_mean.len(),
            ds.p()
        ));
    }
    let penalty = parse_penalty(&a.penalty)?;
    let target_kind = parse_target(&a.target)?;
    let weights = match penalty {
        PenaltyKind::Unit => unit_weights(ds.p()),
        PenaltyKind::Fd => {
            if sidecar.prior != "ss" {
                return invalid("FD penalty requires a selection prior (fit with --prior ss)");
            }
            let loaded = load_draws_for(&a.fit, a.draws.as_deref(), &sidecar)?;
            fd_weights(&fitio::loaded_to_ss(&loaded)?)?
        }
        PenaltyKind::Is => {
            let loaded = load_draws_for(&a.fit, a.draws.as_deref(), &sidecar)?;
            is_weights(&loaded, a.eps)?
        }
    };
    let target = match target_kind {
        TargetKind::PosteriorMean => ds.x.matvec(&sidecar.post_mean),
        TargetKind::RawY => ds.y.clone(),
    };
    let sp = wlasso::path(&target, &ds.x, &weights, target_kind, a.grid)?;
    write_json(&PathFile::from_solution_path(&sp), &a.out)?;
    if let Some(csv) = &a.csv_out {
        schemas::write_path_csv(&sp, csv)?;
    }
    let mut m = ManifestBuilder::new("path");
    m.input(&a.data)?;
    m.input(&a.fit)?;
    if let Some(d) = &a.draws {
        m.input(d)?;
    }
    m.output(&a.out);
    if let Some(csv) = &a.csv_out {
        m.output(csv);
    }
    m.write(&manifest_path_for(&a.out))
}

fn load_draws_for(
    fit_path: &Path,
    draws: Option<&Path>,
    sidecar: &FitSidecar,
) -> CliResult<LoadedDraws> {
    let draws_path = match draws {
        Some(d) => d.to_path_buf(),
        None => {
            // Conventional sibling: fit.json next to draws.csv.
            let candidate = fit_path.with_file_name("draws.csv");
            if !candidate.exists() {
                return invalid(format!(
                    "this penalty needs the draws CSV; pass --draws (tried {})",
                    candidate.display()
                ));
            }
            candidate
        }
    };
    fitio::read_draws(&draws_path, sidecar.clone())
}

pub struct ApmArgs {
    pub data: PathBuf,
    pub fit: PathBuf,
    pub draws: Option<PathBuf>,
    pub max_size: Option<usize>,
    pub preprocess: Preprocess,
    pub out: PathBuf,
}

pub fn cmd_apm(a: &ApmArgs) -> CliResult<()> {
    let ds = a.preprocess.apply(&dataio::load_csv(&a.data, None)?)?;
    let sidecar = fitio::read_sidecar(&a.fit)?;
    if sidecar.prior != "ss" {
        return invalid("adaptive threshold paths require a selection prior (fit with --prior ss)");
    }
    let loaded = load_draws_for(&a.fit, a.draws.as_deref(), &sidecar)?;
    let ss = fitio::loaded_to_ss(&loaded)?;
    let path = apm_path(&ss, &ds, a.max_size)?;
    write_json(&PathFile::from_apm_path(&path), &a.out)?;
    let mut m = ManifestBuilder::new("apm");
    m.input(&a.data)?;
    m.input(&a.fit)?;
    m.output(&a.out);
    m.write(&manifest_path_for(&a.out))
}

pub struct SelectArgs {
    pub data: PathBuf,
    pub path: PathBuf,
    pub draws: PathBuf,
    pub fit: PathBuf,
    pub rule: String,
    pub coverage: f64,
    pub fdr_threshold: f64,
    pub preprocess: Preprocess,
    pub est_out: PathBuf,
    pub report_out: PathBuf,
}

pub fn cmd_select(a: &SelectArgs) -> CliResult<()> {
    let ds = a.preprocess.apply(&dataio::load_csv(&a.data, None)?)?;
    let pf: PathFile = schemas::read_json(&a.path)?;
    pf.validate(&a.path)?;
    let loaded_path = pf.into_estimate_path()?;
    let sidecar = fitio::read_sidecar(&a.fit)?;
    let loaded = fitio::read_draws(&a.draws, sidecar)?;
    if loaded.p() != ds.p() {
        return invalid(format!(
            "draws have p = {} but data has p = {}",
            loaded.p(),
            ds.p()
        ));
    }
    let report = match a.rule.as_str() {
        "benchmark" => {
            let spread = PredictionSpread::new(&loaded, &ds.x);
            match &loaded_path {
                LoadedPath::Weighted(p) => {
                    select_benchmark_with_spread(p, &spread, &ds.x, a.coverage)?
                }
                LoadedPath::Apm(p) => select_benchmark_with_spread(p, &spread, &ds.x, a.coverage)?,
            }
        }
        "fdr" => {
            let pip = loaded.sidecar.pip.clone().ok_or_else(|| {
                CliError::Validation(
                    "the fdr rule needs inclusion probabilities (fit with --prior ss)".into(),
                )
            })?;
            match &loaded_path {
                LoadedPath::Weighted(p) => select_fdr(p, &pip, a.fdr_threshold)?,
                LoadedPath::Apm(p) => select_fdr(p, &pip, a.fdr_threshold)?,
            }
        }
        other => return invalid(format!("unknown rule {other:?} (expected benchmark|fdr)")),
    };
    let fdr_thr = (a.rule == "fdr").then_some(a.fdr_threshold);
    write_json(&EstimateFile::new(report.chosen_estimate.clone()), &a.est_out)?;
    write_json(&ReportFile::from_report(&report, fdr_thr), &a.report_out)?;
    let mut m = ManifestBuilder::new("select");
    m.input(&a.data)?;
    m.input(&a.path)?;
    m.input(&a.draws)?;
    m.input(&a.fit)?;
    m.output(&a.est_out).output(&a.report_out);
    m.write(&manifest_path_for(&a.est_out))
}

pub struct BaselineArgs {
    pub data: PathBuf,
    pub method: String,
    pub folds: usize,
    pub iters: usize,
    pub seed: u64,
    pub preprocess: Preprocess,
    pub out: PathBuf,
}

pub fn cmd_baseline(a: &BaselineArgs) -> CliResult<()> {
    let ds = a.preprocess.apply(&dataio::load_csv(&a.data, None)?)?;
    match a.method.as_str() {
        "lasso" => {
            let cv = decouple_core::baselines::lasso_cv(&ds, a.folds, a.seed)?;
            write_json(
                &schemas::CvFile {
                    schema_version: schemas::SCHEMA_VERSION,
                    method: "lasso".into(),
                    lambda_grid: cv.lambda_grid,
                    cv_mse: cv.cv_mse,
                    chosen_lambda: cv.chosen_lambda,
                    chosen_index: cv.chosen_index,
                    estimate: cv.estimate,
                    fold_assignments: cv.fold_assignments,
                },
                &a.out,
            )?;
        }
        "iter-l1" => {
            let fit = decouple_core::baselines::iterative_l1(&ds, a.iters, a.folds, a.seed)?;
            write_json(
                &schemas::IterL1File {
                    schema_version: schemas::SCHEMA_VERSION,
                    method: "iter-l1".into(),
                    estimate: fit.estimate,
                    eps_values: fit.eps_values,
                    chosen_lambdas: fit.chosen_lambdas,
                },
                &a.out,
            )?;
        }
        other => return invalid(format!("unknown method {other:?} (expected lasso|iter-l1)")),
    }
    let mut m = ManifestBuilder::new("baseline");
    m.seed(a.seed);
    m.input(&a.data)?;
    m.output(&a.out);
    m.write(&manifest_path_for(&a.out))
}

pub struct EvalArgs {
    pub estimate: PathBuf,
    pub test: PathBuf,
    pub truth: Option<PathBuf>,
    pub out: PathBuf,
}

pub fn cmd_eval(a: &EvalArgs) -> CliResult<()> {
    let est = EstimateFile::load(&a.estimate)?;
    let test = dataio::load_csv(&a.test, None)?;
    let truth = match &a.truth {
        Some(t) => Some(dataio::load_truth(t, test.p())?),
        None => None,
    };
    let m = metrics::evaluate(&est.estimate, truth.as_deref(), &test)?;
    write_json(
        &MetricsFile {
            schema_version: schemas::SCHEMA_VERSION,
            size: m.size,
            mse: m.mse,
            fdp: m.fdp,
            tpp: m.tpp,
        },
        &a.out,
    )?;
    let mut mb = ManifestBuilder::new("eval");
    mb.input(&a.estimate)?;
    mb.input(&a.test)?;
    if let Some(t) = &a.truth {
        mb.input(t)?;
    }
    mb.output(&a.out);
    mb.write(&manifest_path_for(&a.out))
}

pub struct BenchArgs {
    pub config: PathBuf,
    pub out_dir: PathBuf,
    pub jobs: usize,
}

pub fn cmd_bench(a: &BenchArgs) -> CliResult<()> {
    let cfg: ExperimentConfig = schemas::read_json(&a.config)?;
    let out = experiment::run_experiment(&cfg, Some(&a.out_dir), a.jobs)?;
    let failed: usize = out.rows.iter().map(|r| r.failures).sum();
    if failed > 0 {
        eprintln!("warning: {failed} replicate runs failed and were flagged in reps/");
    }
    let mut m = ManifestBuilder::new("bench");
    m.seed(cfg.seed);
    m.input(&a.config)?;
    m.output(&a.out_dir.join("table.csv"));
    if cfg.path_quality {
        m.output(&a.out_dir.join("path_quality.csv"));
    }
    m.write(&a.out_dir.join("manifest.json"))
}
