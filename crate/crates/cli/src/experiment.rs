//! Replicated synthetic experiments: for each design setting and method,
//! run R independent replicates (fresh train and test data per replicate),
//! evaluate size/MSE/FDP/TPP, and aggregate a results table. Replicates are
//! resumable through per-replicate JSON files and run in parallel across a
//! worker pool.
//!
//! Seeding: replicate r of a setting uses `config.seed + r` for its data;
//! each method derives its own sampler seed from the replicate seed and the
//! method name, so methods share data but not sampler randomness.

use std::io::Write;
use std::path::{Path, PathBuf};

use decouple_core::baselines;
use decouple_core::data::{center, generate_synthetic, generate_test_set, Dataset, SimConfig};
use decouple_core::horseshoe::sample_hs;
use decouple_core::metrics::{self, Metrics};
use decouple_core::rng::derive_seed;
use decouple_core::select::{apm_path, mpm, select_benchmark, EstimatePath};
use decouple_core::spikeslab::{conditional_post_mean_on_support, sample_ss};
use decouple_core::weights::{fd_weights, is_weights, unit_weights, WeightVector};
use decouple_core::wlasso::{self, TargetKind};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::schemas::{read_json, write_json, SCHEMA_VERSION};
use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Setting {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub s_star: f64,
    pub rho: f64,
}

impl Setting {
    pub fn label(&self) -> String {
        format!("p={};rho={}", self.p, self.rho)
    }

    pub fn sim_config(&self, seed: u64) -> SimConfig {
        SimConfig {
            n: self.n,
            p: self.p,
            k: self.k,
            s_star: self.s_star,
            rho: self.rho,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub settings: Vec<Setting>,
    pub methods: Vec<String>,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default = "default_burnin")]
    pub burnin: usize,
    /// Test rows per replicate; defaults to the training n.
    #[serde(default)]
    pub test_n: Option<usize>,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_coverage")]
    pub coverage: f64,
    #[serde(default = "default_is_eps")]
    pub is_eps: f64,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_iters")]
    pub iters: usize,
    /// Also accumulate TPP/FDP-by-model-size curves for path methods.
    #[serde(default)]
    pub path_quality: bool,
    #[serde(default = "default_pq_cap")]
    pub path_quality_cap: usize,
}

fn default_draws() -> usize {
    decouple_core::spikeslab::DEFAULT_DRAWS
}
fn default_burnin() -> usize {
    decouple_core::spikeslab::DEFAULT_BURNIN
}
fn default_grid() -> usize {
    wlasso::DEFAULT_GRID
}
fn default_coverage() -> f64 {
    decouple_core::select::DEFAULT_COVERAGE
}
fn default_is_eps() -> f64 {
    1e-3
}
fn default_folds() -> usize {
    baselines::DEFAULT_FOLDS
}
fn default_iters() -> usize {
    baselines::DEFAULT_ITERS
}
fn default_pq_cap() -> usize {
    metrics::DEFAULT_PATH_QUALITY_CAP
}

impl ExperimentConfig {
    pub fn validate(&self) -> CliResult<()> {
        if self.schema_version != SCHEMA_VERSION {
            return crate::invalid(format!(
                "unsupported schema_version {}",
                self.schema_version
            ));
        }
        if self.replicates < 1 {
            return crate::invalid("replicates must be >= 1");
        }
        if self.settings.is_empty() {
            return crate::invalid("no settings");
        }
        if self.methods.is_empty() {
            return crate::invalid("no methods");
        }
        for m in &self.methods {
            Method::parse(m)?;
        }
        Ok(())
    }
}

/// The comparison methods of the study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Mpm,
    Apm,
    BdL1Ss,
    BdFdSs,
    BdL1Hs,
    BdIsHs,
    Lasso,
    IterL1,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Mpm,
        Method::Apm,
        Method::BdL1Ss,
        Method::BdFdSs,
        Method::BdL1Hs,
        Method::BdIsHs,
        Method::Lasso,
        Method::IterL1,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Mpm => "mpm",
            Method::Apm => "apm",
            Method::BdL1Ss => "bd-l1-ss",
            Method::BdFdSs => "bd-fd-ss",
            Method::BdL1Hs => "bd-l1-hs",
            Method::BdIsHs => "bd-is-hs",
            Method::Lasso => "lasso",
            Method::IterL1 => "iter-l1",
        }
    }

    pub fn parse(name: &str) -> CliResult<Method> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name() == name)
            .ok_or_else(|| {
                CliError::Validation(format!(
                    "unknown method {name:?} (expected one of {})",
                    Method::ALL
                        .iter()
                        .map(|m| m.name())
                        .collect::<Vec<_>>()
                        .join("|")
                ))
            })
    }
}

/// One method's output on one replicate: the point estimate and, when the
/// method is path-valued, the supports along its path (sparse to dense).
pub struct MethodFit {
    pub estimate: Vec<f64>,
    pub path_supports: Option<Vec<Vec<usize>>>,
}

fn supports_of_solution_path(p: &wlasso::SolutionPath, cap: usize) -> Vec<Vec<usize>> {
    (0..p.len())
        .filter(|&g| p.sizes[g] <= cap)
        .map(|g| p.support(g))
        .collect()
}

/// Run one method on one replicate's (centered) train data.
pub fn run_method(
    method: Method,
    ds: &Dataset,
    cfg: &ExperimentConfig,
    rep_seed: u64,
) -> decouple_core::Result<MethodFit> {
    let seed = derive_seed(rep_seed, method.name());
    let pq_cap = cfg.path_quality_cap;
    match method {
        Method::Mpm => {
            let fit = sample_ss(ds, cfg.draws, cfg.burnin, seed)?;
            let support: Vec<usize> = mpm(&fit.pip)
                .iter()
                .enumerate()
                .filter_map(|(j, &m)| m.then_some(j))
                .collect();
            let estimate = conditional_post_mean_on_support(&support, ds)?;
            Ok(MethodFit {
                estimate,
                path_supports: None,
            })
        }
        Method::Apm => {
            let fit = sample_ss(ds, cfg.draws, cfg.burnin, seed)?;
            let path = apm_path(&fit, ds, None)?;
            let report = select_benchmark(&path, &fit, &ds.x, cfg.coverage)?;
            let supports = (0..path.len())
                .filter(|&g| path.sizes[g] >= 1 && path.sizes[g] <= pq_cap)
                .map(|g| path.support(g))
                .collect();
            Ok(MethodFit {
                estimate: report.chosen_estimate,
                path_supports: Some(supports),
            })
        }
        Method::BdL1Ss | Method::BdFdSs => {
            let fit = sample_ss(ds, cfg.draws, cfg.burnin, seed)?;
            let w = match method {
                Method::BdL1Ss => unit_weights(ds.p()),
                _ => fd_weights(&fit)?,
            };
            bd_path_fit(ds, &fit, &w, cfg)
        }
        Method::BdL1Hs | Method::BdIsHs => {
            let fit = sample_hs(ds, cfg.draws, cfg.burnin, seed)?;
            let w = match method {
                Method::BdL1Hs => unit_weights(ds.p()),
                _ => is_weights(&fit, cfg.is_eps)?,
            };
            bd_path_fit(ds, &fit, &w, cfg)
        }
        Method::Lasso => {
            let cv = baselines::lasso_cv(ds, cfg.folds, seed)?;
            let supports = supports_of_solution_path(&cv.full_path, pq_cap);
            Ok(MethodFit {
                estimate: cv.estimate,
                path_supports: Some(supports),
            })
        }
        Method::IterL1 => {
            let fit = baselines::iterative_l1(ds, cfg.iters, cfg.folds, seed)?;
            let supports = supports_of_solution_path(&fit.final_path, pq_cap);
            Ok(MethodFit {
                estimate: fit.estimate,
                path_supports: Some(supports),
            })
        }
    }
}

fn bd_path_fit<D: decouple_core::weights::CoefDraws>(
    ds: &Dataset,
    fit: &D,
    w: &WeightVector,
    cfg: &ExperimentConfig,
) -> decouple_core::Result<MethodFit> {
    let target = ds.x.matvec(fit.post_mean());
    let path = wlasso::path(&target, &ds.x, w, TargetKind::PosteriorMean, cfg.grid)?;
    let report = select_benchmark(&path, fit, &ds.x, cfg.coverage)?;
    let supports = supports_of_solution_path(&path, cfg.path_quality_cap);
    Ok(MethodFit {
        estimate: report.chosen_estimate,
        path_supports: Some(supports),
    })
}

/// Stored per (setting, method, replicate); the unit of resumability.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ReplicateRecord {
    pub schema_version: u32,
    pub setting: String,
    pub method: String,
    pub replicate: usize,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fdp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tpp: Option<f64>,
    /// Path-quality curves for sizes 1..=cap, present when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pq_tpp: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pq_fdp: Option<Vec<f64>>,
}

/// Per-size carry-forward scoring of one replicate's path.
fn per_size_curves(
    supports: &[Vec<usize>],
    truth_support: &[usize],
    cap: usize,
) -> (Vec<f64>, Vec<f64>) {
    let pq = metrics::path_quality(
        std::slice::from_ref(&supports.to_vec()),
        std::slice::from_ref(&truth_support.to_vec()),
        cap,
    )
    .expect("single replicate curves");
    (pq.tpp, pq.fdp)
}

fn run_one_replicate(
    setting: &Setting,
    method: Method,
    cfg: &ExperimentConfig,
    replicate: usize,
) -> ReplicateRecord {
    let rep_seed = cfg.seed.wrapping_add(replicate as u64);
    let sim = setting.sim_config(rep_seed);
    let base = ReplicateRecord {
        schema_version: SCHEMA_VERSION,
        setting: setting.label(),
        method: method.name().into(),
        replicate,
        status: "error".into(),
        error: None,
        size: None,
        mse: None,
        fdp: None,
        tpp: None,
        pq_tpp: None,
        pq_fdp: None,
    };
    let run = || -> decouple_core::Result<ReplicateRecord> {
        let raw = generate_synthetic(sim)?;
        let ds = center(&raw)?;
        let test_n = cfg.test_n.unwrap_or(setting.n);
        let test = center(&generate_test_set(sim, test_n)?)?;
        let truth = ds.truth.clone().expect("synthetic data carries truth");
        let fit = run_method(method, &ds, cfg, rep_seed)?;
        let m: Metrics = metrics::evaluate(&fit.estimate, Some(&truth), &test)?;
        let (pq_tpp, pq_fdp) = if cfg.path_quality {
            match &fit.path_supports {
                Some(supports) => {
                    let ts = metrics::support_of(&truth);
                    let (t, f) = per_size_curves(supports, &ts, cfg.path_quality_cap);
                    (Some(t), Some(f))
                }
                None => (None, None),
            }
        } else {
            (None, None)
        };
        Ok(ReplicateRecord {
            status: "ok".into(),
            size: Some(m.size),
            mse: Some(m.mse),
            fdp: m.fdp,
            tpp: m.tpp,
            pq_tpp,
            pq_fdp,
            ..base.clone()
        })
    };
    match run() {
        Ok(rec) => rec,
        Err(e) => ReplicateRecord {
            error: Some(e.to_string()),
            ..base
        },
    }
}

/// Aggregated row of the results table.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct TableRow {
    pub setting: String,
    pub method: String,
    pub replicates: usize,
    pub failures: usize,
    pub size_mean: f64,
    pub size_se: f64,
    pub mse_mean: f64,
    pub mse_se: f64,
    pub fdp_mean: f64,
    pub fdp_se: f64,
    pub tpp_mean: f64,
    pub tpp_se: f64,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub rows: Vec<TableRow>,
    pub records: Vec<ReplicateRecord>,
    /// (setting, method) -> averaged per-size curves.
    pub path_quality: Vec<PathQualityRow>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct PathQualityRow {
    pub setting: String,
    pub method: String,
    pub size: usize,
    pub tpp: f64,
    pub fdp: f64,
}

fn record_path(out_dir: &Path, setting: &Setting, method: Method, r: usize) -> PathBuf {
    out_dir.join("reps").join(format!(
        "p{}_rho{}_{}_r{:04}.json",
        setting.p,
        setting.rho,
        method.name(),
        r
    ))
}

/// Run (or resume) the full grid of settings x methods x replicates.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: Option<&Path>,
    jobs: usize,
) -> CliResult<ExperimentOutput> {
    cfg.validate()?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir.join("reps"))
            .map_err(|e| CliError::Io(format!("create {}: {e}", dir.display())))?;
    }
    let methods: Vec<Method> = cfg
        .methods
        .iter()
        .map(|m| Method::parse(m))
        .collect::<CliResult<_>>()?;

    let mut tasks: Vec<(usize, Method, usize)> = Vec::new();
    for (si, _) in cfg.settings.iter().enumerate() {
        for &m in &methods {
            for r in 0..cfg.replicates {
                tasks.push((si, m, r));
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Io(format!("thread pool: {e}")))?;

    let records: Vec<ReplicateRecord> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(si, method, r)| {
                let setting = &cfg.settings[si];
                if let Some(dir) = out_dir {
                    let path = record_path(dir, setting, method, r);
                    if path.exists() {
                        if let Ok(rec) = read_json::<ReplicateRecord>(&path) {
                            if rec.status == "ok" {
                                return rec;
                            }
                        }
                    }
                    let rec = run_one_replicate(setting, method, cfg, r);
                    let _ = write_json(&rec, &path);
                    rec
                } else {
                    run_one_replicate(setting, method, cfg, r)
                }
            })
            .collect()
    });

    // Aggregate in deterministic (setting, method) order.
    let mut rows = Vec::new();
    let mut pq_rows = Vec::new();
    for setting in &cfg.settings {
        let label = setting.label();
        for &m in &methods {
            let recs: Vec<&ReplicateRecord> = records
                .iter()
                .filter(|r| r.setting == label && r.method == m.name())
                .collect();
            let ok: Vec<&&ReplicateRecord> = recs.iter().filter(|r| r.status == "ok").collect();
            let failures = recs.len() - ok.len();
            let grab = |f: fn(&ReplicateRecord) -> Option<f64>| -> Vec<f64> {
                ok.iter().filter_map(|r| f(r)).collect()
            };
            let (size_mean, size_se) = mean_sd(&grab(|r| r.size.map(|s| s as f64)));
            let (mse_mean, mse_se) = mean_sd(&grab(|r| r.mse));
            let (fdp_mean, fdp_se) = mean_sd(&grab(|r| r.fdp));
            let (tpp_mean, tpp_se) = mean_sd(&grab(|r| r.tpp));
            rows.push(TableRow {
                setting: label.clone(),
                method: m.name().into(),
                replicates: ok.len(),
                failures,
                size_mean,
                size_se,
                mse_mean,
                mse_se,
                fdp_mean,
                fdp_se,
                tpp_mean,
                tpp_se,
            });
            if cfg.path_quality {
                let curves: Vec<(&Vec<f64>, &Vec<f64>)> = ok
                    .iter()
                    .filter_map(|r| r.pq_tpp.as_ref().zip(r.pq_fdp.as_ref()))
                    .collect();
                if !curves.is_empty() {
                    let cap = cfg.path_quality_cap;
                    for t in 0..cap {
                        let tpp =
                            curves.iter().map(|(tv, _)| tv[t]).sum::<f64>() / curves.len() as f64;
                        let fdp =
                            curves.iter().map(|(_, fv)| fv[t]).sum::<f64>() / curves.len() as f64;
                        pq_rows.push(PathQualityRow {
                            setting: label.clone(),
                            method: m.name().into(),
                            size: t + 1,
                            tpp,
                            fdp,
                        });
                    }
                }
            }
        }
    }

    if let Some(dir) = out_dir {
        write_table(&rows, &dir.join("table.csv"))?;
        if cfg.path_quality {
            write_path_quality(&pq_rows, &dir.join("path_quality.csv"))?;
        }
    }
    Ok(ExperimentOutput {
        rows,
        records,
        path_quality: pq_rows,
    })
}

pub fn write_table(rows: &[TableRow], path: &Path) -> CliResult<()> {
    let file = std::fs::File::create(path)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(
        w,
        "setting,method,replicates,failures,size_mean,size_se,mse_mean,mse_se,fdp_mean,fdp_se,tpp_mean,tpp_se"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.setting,
            r.method,
            r.replicates,
            r.failures,
            r.size_mean,
            r.size_se,
            r.mse_mean,
            r.mse_se,
            r.fdp_mean,
            r.fdp_se,
            r.tpp_mean,
            r.tpp_se
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_path_quality(rows: &[PathQualityRow], path: &Path) -> CliResult<()> {
    let file = std::fs::File::create(path)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "setting,method,size,tpp,fdp")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.setting, r.method, r.size, r.tpp, r.fdp)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            schema_version: 1,
            settings: vec![Setting {
                n: 40,
                p: 10,
                k: 2,
                s_star: 6.0,
                rho: 0.0,
            }],
            methods: vec!["mpm".into(), "lasso".into()],
            replicates: 3,
            seed: 42,
            draws: 400,
            burnin: 100,
            test_n: None,
            grid: 30,
            coverage: 0.9,
            is_eps: 1e-3,
            folds: 5,
            iters: 2,
            path_quality: true,
            path_quality_cap: 10,
        }
    }

    #[test]
    fn experiment_runs_and_aggregates() {
        let cfg = tiny_config();
        let out = run_experiment(&cfg, None, 1).unwrap();
        assert_eq!(out.rows.len(), 2);
        for row in &out.rows {
            assert_eq!(row.failures, 0);
            assert_eq!(row.replicates, 3);
            assert!(row.size_mean >= 2.0);
            assert!(row.tpp_mean > 0.9, "{row:?}");
        }
        // Path quality present for lasso, absent for mpm.
        assert!(out.path_quality.iter().any(|r| r.method == "lasso"));
        assert!(!out.path_quality.iter().any(|r| r.method == "mpm"));
    }

    #[test]
    fn experiment_is_deterministic_and_resumable() {
        let cfg = tiny_config();
        let a = run_experiment(&cfg, None, 1).unwrap();
        let b = run_experiment(&cfg, None, 1).unwrap();
        assert_eq!(a.rows, b.rows);

        let dir = tempfile::tempdir().unwrap();
        let c = run_experiment(&cfg, Some(dir.path()), 1).unwrap();
        assert_eq!(a.rows, c.rows);
        // Tamper with a record: resume must reuse existing ok-records, so
        // the table reflects the tampered file rather than a re-run.
        let path = record_path(dir.path(), &cfg.settings[0], Method::Mpm, 0);
        let mut rec: ReplicateRecord = read_json(&path).unwrap();
        rec.mse = Some(1234.5);
        write_json(&rec, &path).unwrap();
        let d = run_experiment(&cfg, Some(dir.path()), 1).unwrap();
        assert!(d
            .rows
            .iter()
            .any(|r| r.method == "mpm" && r.mse_mean > 100.0));
        assert!(dir.path().join("table.csv").exists());
        assert!(dir.path().join("path_quality.csv").exists());
    }

    #[test]
    fn single_replicate_has_nan_spread() {
        let mut cfg = tiny_config();
        cfg.replicates = 1;
        cfg.methods = vec!["lasso".into()];
        cfg.path_quality = false;
        let out = run_experiment(&cfg, None, 1).unwrap();
        assert!(out.rows[0].size_se.is_nan());
        assert!(!out.rows[0].size_mean.is_nan());
    }

    #[test]
    fn unknown_method_is_rejected() {
        let mut cfg = tiny_config();
        cfg.methods = vec!["mpm".into(), "of-the-gaps".into()];
        let err = run_experiment(&cfg, None, 1).unwrap_err();
        assert!(err.to_string().contains("of-the-gaps"), "{err}");
    }
}
